"""Beltrami equation solver.

For compactly supported ``mu`` the normalised solution is
``f = z + C h`` where ``h = mu (1 + S h)``, ``C`` is the Cauchy transform
``-(1/pi) int h(zeta) / (zeta - z)`` and ``S = d/dz C`` the Beurling
transform.  ``h`` is piecewise constant on grid cells; both transforms are
discrete convolutions with kernels integrated exactly over a cell, applied
with zero-padded FFTs, so there is no periodic image of the support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage
import scipy.fft as sfft

from .errors import (AliasingWarningError, DegenerateNormalization, DegenerateProbes,
                     EquivarianceViolation, MaxIterExceeded, NotContracting)
from .fields import Grid, ScalarField, d_z, d_zbar
from .fuchsia import FuchsianGroup, MobiusMap

SAFETY_MARGIN = 0.95
NEAR_CELLS = 16  # offsets (in cells) below which kernels use closed forms


def _cauchy_antiderivative(x, y):
    """``F`` with ``d2F/dxdy = 1/(x + iy)``; continuous on the plane."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        p = 0.5 * y * lg - y + np.where(x != 0, x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        q = 0.5 * x * lg - x + np.where(y != 0, y * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return p - 1j * q


def _beurling_antiderivative(x, y):
    """``i log(x + iy)`` with principal branch; corner sums cancel the cut."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore"):
        return 0.5j * np.log(np.where(r2 > 0, r2, 1.0)) - np.arctan2(y, x)


def _corner_sum(F, dx, dy, h):
    a, b = dx - h / 2, dx + h / 2
    c, d = dy - h / 2, dy + h / 2
    return F(b, d) - F(a, d) - F(b, c) + F(a, c)


def cell_integral_inv(dx, dy, h):
    """``int_cell 1/zeta dA`` over the square of side ``h`` centred at ``dx + i dy``."""
    dx, dy = np.broadcast_arrays(np.asarray(dx, float), np.asarray(dy, float))
    zeta = dx + 1j * dy
    near = np.abs(zeta) < NEAR_CELLS * h
    out = np.empty(dx.shape, dtype=complex)
    zf = zeta[~near]
    # midpoint rule plus the first non-vanishing correction for holomorphic integrands
    out[~near] = h * h * (1.0 / zf - h ** 4 / (60.0 * zf ** 5))
    out[near] = _corner_sum(_cauchy_antiderivative, dx[near], dy[near], h)
    return out


def cell_integral_inv2(dx, dy, h):
    """Principal value ``int_cell 1/zeta^2 dA``."""
    dx, dy = np.broadcast_arrays(np.asarray(dx, float), np.asarray(dy, float))
    zeta = dx + 1j * dy
    near = np.abs(zeta) < NEAR_CELLS * h
    out = np.empty(dx.shape, dtype=complex)
    zf = zeta[~near]
    out[~near] = h * h * (1.0 / zf ** 2 - h ** 4 / (12.0 * zf ** 6))
    zn = zeta[near]
    centred = np.abs(zn) < 1e-12 * h
    val = _corner_sum(_beurling_antiderivative, dx[near], dy[near], h)
    out[near] = np.where(centred, 0.0, val)
    return out


@lru_cache(maxsize=4)
def _kernel_spectra(n: int, h: float):
    """FFTs of the Cauchy and Beurling kernels on the ``2n x 2n`` padded grid."""
    m = 2 * n
    k = np.fft.fftfreq(m, 1.0 / m)  # integer offsets 0..n-1, -n..-1
    # convolution kernel K'(delta) = K(-delta): value at cell j seen from cell i
    dx = -k[None, :] * h
    dy = -k[:, None] * h
    kc = -cell_integral_inv(dx, dy, h) / np.pi
    ks = -cell_integral_inv2(dx, dy, h) / np.pi
    return sfft.fft2(kc), sfft.fft2(ks)


class _Transforms:
    def __init__(self, grid: Grid):
        if grid.nx != grid.ny:
            raise ValueError("solver grid must be square")
        self.n = grid.nx
        self.h = grid.spacing
        self.kc, self.ks = _kernel_spectra(self.n, self.h)

    def _apply(self, kernel_hat, h):
        n = self.n
        pad = np.zeros((2 * n, 2 * n), dtype=complex)
        pad[:n, :n] = h
        return sfft.ifft2(sfft.fft2(pad, workers=-1) * kernel_hat, workers=-1)[:n, :n]

    def cauchy(self, h):
        return self._apply(self.kc, h)

    def beurling(self, h):
        return self._apply(self.ks, h)


@dataclass(frozen=True)
class BeltramiField:
    """Beltrami coefficient samples on a square solver grid."""

    mu: np.ndarray
    grid: Grid
    support: np.ndarray = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=complex)
        object.__setattr__(self, "mu", mu)
        if self.support is None:
            object.__setattr__(self, "support", mu != 0)

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.mu).max()) if self.mu.size else 0.0

    def field(self) -> ScalarField:
        return ScalarField(self.mu, self.grid, "z")


@dataclass(frozen=True)
class QcSolution:
    """``f = z + C h`` with ``d f/dz = 1 + S h`` and ``d f/dzbar = mu d f/dz`` on cell centres.

    ``h`` is the (corrected) cell density actually transformed.
    """

    f: np.ndarray
    fz: np.ndarray
    fzb: np.ndarray
    h: np.ndarray
    mu: BeltramiField
    residual: float
    iterations: int
    post: tuple = (1.0 + 0j, 0j)  # affine post-composition (A, B): f -> A f + B
    history: tuple = field(default=(), compare=False)

    @property
    def grid(self) -> Grid:
        return self.mu.grid

    def evaluate(self, points) -> np.ndarray:
        """``f`` at arbitrary points by direct summation of the cell-integrated kernel."""
        pts = np.asarray(points, dtype=complex)
        flat = pts.ravel()
        z = self.grid.centers()
        sel = self.h != 0
        hz, hv = z[sel], self.h[sel]
        h = self.grid.spacing
        out = np.empty(flat.shape, dtype=complex)
        for i, p in enumerate(flat):
            d = hz - p
            out[i] = p - np.sum(hv * cell_integral_inv(d.real, d.imag, h)) / np.pi
        A, B = self.post
        return (A * out + B).reshape(pts.shape)

    def fd_residual(self, mask=None, order: int = 4) -> float:
        """``max |f_zbar - mu f_z| / |f_z|`` with finite differences of ``f``."""
        hh = self.grid.spacing
        fz = d_z(self.f, hh, order)
        fzb = d_zbar(self.f, hh, order)
        r = np.abs(fzb - self.mu.mu * fz) / np.abs(fz)
        m = np.isfinite(r) if mask is None else (mask & np.isfinite(r))
        return float(r[m].max())


def _cell_correction(h, support, spacing, band):
    """Second-order correction ``-h^2/12 Lap(h)`` on the support shrunk by ``band`` cells.

    Converts centre samples of ``h`` into the piecewise-constant density whose
    transforms reproduce centre values to fourth order where ``h`` is smooth.
    """
    if band <= 0:
        return h
    inner = ndimage.binary_erosion(support, iterations=band)
    lap = np.zeros_like(h)
    lap[1:-1, 1:-1] = (h[2:, 1:-1] + h[:-2, 1:-1] + h[1:-1, 2:] + h[1:-1, :-2]
                       - 4 * h[1:-1, 1:-1])
    return h - np.where(inner, lap, 0) / 12.0


def solve_beltrami(mu: BeltramiField, tol: float = 1e-10, max_iter: int = 200,
                   safety: float = SAFETY_MARGIN, pad_cells: int = 2,
                   correction_band: int = 4) -> QcSolution:
    """Neumann iteration ``h <- mu (1 + S h)`` until successive iterates differ by < tol.

    ``residual`` is the fixed-point defect of the discrete equation.  With
    ``correction_band > 0`` the reconstruction of ``f`` uses a corrected density
    away from the edge of the support (set it to 0 for the plain scheme).
    """
    k = mu.sup_norm
    if k >= 1:
        raise NotContracting(f"|mu|_inf = {k:.4f} >= 1")
    if k > safety:
        raise NotContracting(f"|mu|_inf = {k:.4f} exceeds safety margin {safety}")
    grid = mu.grid
    edge = np.ones(grid.shape, dtype=bool)
    edge[pad_cells:-pad_cells, pad_cells:-pad_cells] = False
    if np.any(mu.mu[edge] != 0):
        raise AliasingWarningError("support of mu touches the grid edge")
    z = grid.centers()
    if k == 0:
        zero = np.zeros(grid.shape, dtype=complex)
        return QcSolution(z.copy(), np.ones(grid.shape, complex), zero, zero, mu, 0.0, 0)
    T = _Transforms(grid)
    h = mu.mu.copy()
    hist = []
    for it in range(1, max_iter + 1):
        h_new = mu.mu * (1 + T.beurling(h))
        step = float(np.abs(h_new - h).max())
        hist.append(step)
        h = h_new
        if step < tol:
            break
    else:
        raise MaxIterExceeded(f"no convergence after {max_iter} iterations, last step {step:.3e}")
    residual = float(np.abs(h - mu.mu * (1 + T.beurling(h))).max())
    H = _cell_correction(h, mu.support, grid.spacing, correction_band)
    f = z + T.cauchy(H)
    fz = 1 + T.beurling(H)
    # mu fz is a more accurate f_zbar than H itself once H carries the correction
    return QcSolution(f, fz, mu.mu * fz, H, mu, residual, it, history=tuple(hist))


def normalize_solution(sol: QcSolution, p0: complex = 0j, p1: complex = 1 + 0j) -> QcSolution:
    """Post-compose with the affine map sending ``f(p0), f(p1)`` to ``0, 1``."""
    raw = QcSolution(sol.f, sol.fz, sol.fzb, sol.h, sol.mu, sol.residual, sol.iterations)
    f0, f1 = raw.evaluate([p0, p1])
    if abs(f1 - f0) < 1e-14:
        raise DegenerateNormalization("f(p0) = f(p1)")
    A = 1.0 / (f1 - f0)
    B = -f0 * A
    return QcSolution(A * sol.f + B, A * sol.fz, A * sol.fzb, sol.h, sol.mu, sol.residual,
                      sol.iterations, (A, B), sol.history)


def fit_mobius(src, dst) -> MobiusMap:
    """Least-squares Mobius map with ``M(src_i) ~ dst_i`` (at least three pairs)."""
    src = np.asarray(src, dtype=complex)
    dst = np.asarray(dst, dtype=complex)
    if len(src) < 3:
        raise DegenerateProbes("need three point pairs")
    # a s + b - c s t - d t = 0
    A = np.stack([src, np.ones_like(src), -src * dst, -dst], axis=1)
    scale = np.abs(A).max(axis=1, keepdims=True)
    _, S, Vh = np.linalg.svd(A / scale)
    if len(S) >= 3 and S[2] < 1e-12 * S[0]:
        raise DegenerateProbes("probe images are degenerate")
    a, b, c, d = Vh[-1].conj()
    return MobiusMap.from_coeffs(a, b, c, d)


@dataclass(frozen=True)
class ConjugatedGroup:
    generators: tuple
    residual: float
    relator_residual: float


def _probe_sets(G: FuchsianGroup, n_fit: int, n_check: int, spread: float):
    """Probe points around the side midpoint each generator moves to another midpoint."""
    geo = G.octagon
    mids = geo.midpoint_radius * np.exp(1j * np.arange(8) * np.pi / 4)
    out = []
    for g in G.generators:
        img = g(mids)
        j = int(np.argmin(np.min(np.abs(img[:, None] - mids[None, :]), axis=1)))
        ang = 2 * np.pi * (np.arange(n_fit + n_check) + 0.25) / (n_fit + n_check)
        rad = spread * np.where(np.arange(n_fit + n_check) % 2 == 0, 1.0, 0.5)
        # move inward so all probes lie in the octagon interior
        p = mids[j] * 0.9 + rad * np.exp(1j * ang)
        out.append((p[:n_fit], p[n_fit:]))
    return out


def conjugate_group(sol: QcSolution, G: FuchsianGroup, n_fit: int = 6, n_check: int = 6,
                    spread: float = 0.08, tol: float = 1e-4) -> ConjugatedGroup:
    """Generators ``f g f^-1`` fitted from probe pairs ``(f(p), f(g p))``."""
    gens = []
    worst = 0.0
    for g, (pf, pc) in zip(G.generators, _probe_sets(G, n_fit, n_check, spread)):
        pts = np.concatenate([pf, pc])
        fp = sol.evaluate(np.concatenate([pts, g(pts)]))
        src, dst = fp[:len(pts)], fp[len(pts):]
        m = fit_mobius(src[:n_fit], dst[:n_fit])
        chk = m(src[n_fit:])
        worst = max(worst, float(np.max(_chordal(chk, dst[n_fit:]))))
        gens.append(m)
    a1, b1, a2, b2 = gens
    comm = lambda x, y: x @ y @ x.inverse() @ y.inverse()
    rel = (comm(a1, b1) @ comm(a2, b2)).distance(MobiusMap(np.eye(2)))
    if worst > tol:
        raise EquivarianceViolation(f"conjugation residual {worst:.3e}")
    return ConjugatedGroup(tuple(gens), worst, float(rel))


def _chordal(a, b):
    return 2 * np.abs(a - b) / np.sqrt((1 + np.abs(a) ** 2) * (1 + np.abs(b) ** 2))


def disk_support_weights(grid: Grid, radius: float = 1.0, subsamples: int = 8) -> np.ndarray:
    """Fraction of each cell lying in ``|z| < radius``."""
    z = grid.centers()
    h = grid.spacing
    w = (np.abs(z) < radius).astype(float)
    near = np.abs(np.abs(z) - radius) < h
    iy, ix = np.nonzero(near)
    s = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    off = (s[None, :] + 1j * s[:, None]).ravel() * h
    pts = z[iy, ix][:, None] + off[None, :]
    w[iy, ix] = (np.abs(pts) < radius).mean(axis=1)
    return w
