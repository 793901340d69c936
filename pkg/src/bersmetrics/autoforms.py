"""Holomorphic quadratic differentials by weight-4 Poincare series.

A differential is stored by the Taylor coefficients of ``phi`` at 0.  They
are obtained by sampling the series on a circle of radius 0.9: each sample
point is first moved into the octagon with side pairings, the orbit sum is
evaluated there, and the value is carried back by automorphy
``phi(z) = phi(Mz) M'(z)^2``.  An FFT of the circle samples then gives the
coefficients, which are accurate on ``|z| <= 0.88`` (the octagon has vertex
radius 0.841).

The truncated series is only automorphic up to its tail (about 1e-5 at
displacement radius 10).  By default it is therefore projected onto the
numerical null space of the automorphy operator acting on Taylor
coefficients, which is three-dimensional and automorphic to ~1e-14.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BudgetExceeded, InsufficientOverlap, NonConvergent
from .fields import Grid, ScalarField, interior_mask
from .fuchsia import FuchsianGroup, Orbit, build_genus2_group, orbit_ball, reduce_to_domain
from .geomcore import SymTensor, divergence, trace

SAMPLE_RADIUS = 0.9
TAYLOR_RADIUS = 0.88
N_COEFFS = 400
DEFAULT_SEEDS = ((1.0,), (0.0, 1.0), (0.0, 0.0, 1.0))


def orbit_sum(mats: np.ndarray, seeds, w: np.ndarray, chunk: int = 64, shell=None):
    """``sum_g seed(g w) g'(w)^2`` for each seed polynomial (ascending coefficients).

    Returns an array of shape ``(len(seeds),) + w.shape``.  When a boolean
    ``shell`` mask over the elements is given, the partial sum over the
    shell is returned as a second array.
    """
    w = np.asarray(w, dtype=complex)
    flat = w.ravel()
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    deg = max(len(s) for s in seeds)
    coef = np.zeros((len(seeds), deg), dtype=complex)
    for k, s in enumerate(seeds):
        coef[k, :len(s)] = s
    out = np.zeros((len(seeds), flat.size), dtype=complex)
    part = np.zeros_like(out) if shell is not None else None
    for i in range(0, flat.size, chunk):
        ww = flat[i:i + chunk, None]
        inv = 1.0 / (c * ww + d)
        gz = (a * ww + b) * inv
        inv *= inv
        term = inv * inv  # g'(w)^2
        # powers of g w weighted by g'(w)^2, one row per monomial
        mono = np.empty((deg,) + term.shape, dtype=complex)
        mono[0] = term
        for p in range(1, deg):
            mono[p] = mono[p - 1] * gz
        out[:, i:i + chunk] = np.einsum("kp,pnm->kn", coef, mono)
        if shell is not None:
            part[:, i:i + chunk] = np.einsum("kp,pnm->kn", coef, mono[:, :, shell])
    shape = (len(seeds),) + w.shape
    if shell is None:
        return out.reshape(shape)
    return out.reshape(shape), part.reshape(shape)


@dataclass(frozen=True)
class HQD:
    """A holomorphic quadratic differential ``phi(z) dz^2`` on the disk.

    ``coeffs[n]`` is the Taylor coefficient of ``z**n``.  Evaluation uses the
    Taylor series inside :data:`TAYLOR_RADIUS` and automorphy outside.
    """

    coeffs: np.ndarray
    label: str = ""
    tail: float = 0.0
    holomorphy_residual: float = 0.0
    orbit_radius: float = 0.0

    def taylor(self, z):
        return np.polyval(self.coeffs[::-1], np.asarray(z, dtype=complex))

    def taylor_derivative(self, z, k: int = 1):
        c = self.coeffs
        for _ in range(k):
            c = c[1:] * np.arange(1, len(c))
        return np.polyval(c[::-1], np.asarray(z, dtype=complex))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        far = np.abs(z) > TAYLOR_RADIUS
        if not np.any(far):
            return self.taylor(z)
        out = np.empty(z.shape, dtype=complex)
        out[~far] = self.taylor(z[~far])
        w, (_, _, c, d) = reduce_to_domain(build_genus2_group(), z[far])
        out[far] = self.taylor(w) / (c * z[far] + d) ** 4
        return out

    def __add__(self, other: "HQD") -> "HQD":
        n = max(len(self.coeffs), len(other.coeffs))
        c = np.zeros(n, dtype=complex)
        c[:len(self.coeffs)] += self.coeffs
        c[:len(other.coeffs)] += other.coeffs
        return HQD(c, f"({self.label}+{other.label})", self.tail + other.tail,
                   max(self.holomorphy_residual, other.holomorphy_residual),
                   min(self.orbit_radius, other.orbit_radius))

    def scaled(self, s: complex) -> "HQD":
        return HQD(s * self.coeffs, f"{s}*{self.label}", abs(s) * self.tail,
                   self.holomorphy_residual, self.orbit_radius)

    def on_grid(self, grid: Grid, chart: str = "z") -> "QuadraticDifferentialField":
        z = grid.centers()
        vals = np.where(np.abs(z) < 1, self(np.where(np.abs(z) < 1, z, 0)), 0)
        return QuadraticDifferentialField(ScalarField(vals, grid, chart), "plus", self.label)


def combine(basis, coeffs) -> HQD:
    out = basis[0].scaled(coeffs[0])
    for b, c in zip(basis[1:], coeffs[1:]):
        out = out + b.scaled(c)
    return out


@dataclass(frozen=True)
class QuadraticDifferentialField:
    """Samples of ``phi`` with ``q = phi (dchart)^2``.

    ``side`` is ``"plus"`` for ``phi dz^2`` and ``"minus"`` for a differential
    ``phi dzbar^2`` living in the conjugate chart.
    """

    phi: ScalarField
    side: str = "plus"
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def values(self):
        return self.phi.values

    @property
    def grid(self):
        return self.phi.grid

    def conj(self) -> "QuadraticDifferentialField":
        side = "minus" if self.side == "plus" else "plus"
        return QuadraticDifferentialField(
            ScalarField(np.conj(self.phi.values), self.grid, _conj_chart(self.phi.chart)),
            side, _conj_label(self.label))

    def scaled(self, s: complex) -> "QuadraticDifferentialField":
        return QuadraticDifferentialField(ScalarField(s * self.phi.values, self.grid, self.phi.chart),
                                          self.side, self.label)

    def tensor(self) -> SymTensor:
        zero = np.zeros(self.grid.shape, dtype=complex)
        if self.side == "plus":
            return SymTensor(self.values, zero, zero, self.grid)
        return SymTensor(zero, zero, self.values, self.grid)

    def to_dict(self) -> dict:
        d = self.phi.to_dict()
        d.update({"weight": 4, "side": self.side, "label": self.label})
        for key in ("role", "provenance"):
            if key in self.meta:
                d[key] = self.meta[key]
        return d


def _conj_chart(chart: str) -> str:
    return chart[:-3] if chart.endswith("bar") else chart + "bar"


def _circle_samples(G: FuchsianGroup, orbit: Orbit, seeds, samples: int, radius: float, shell=None):
    theta = 2 * np.pi * np.arange(samples) / samples
    zc = radius * np.exp(1j * theta)
    w, (_, _, c, d) = reduce_to_domain(G, zc)
    back = 1.0 / (c * zc + d) ** 4
    res = orbit_sum(orbit.matrices, seeds, w, shell=shell)
    if shell is None:
        return res * back
    return res[0] * back, res[1] * back


def _taylor_from_samples(vals: np.ndarray, radius: float):
    m = vals.shape[-1]
    C = np.fft.fft(vals, axis=-1) / m
    n = np.arange(m)
    pos = C[..., : m // 2] / radius ** n[: m // 2]
    neg = np.abs(C[..., m // 2 + 1:]).max(axis=-1) / np.abs(C).max(axis=-1)
    return pos, neg


@lru_cache(maxsize=4)
def automorphic_subspace(n_coeffs: int = N_COEFFS, radius: float = SAMPLE_RADIUS, dim: int = 3):
    """Orthonormal basis of scaled coefficients ``x_n = c_n r^n`` of automorphic series.

    Collocation on ``|z| = r``: each point is reduced into the octagon and
    ``sum x_n e^{in theta} = M'(z)^2 sum x_n (w / r)^n`` is imposed.  Returns
    ``(basis, singular_values)``; the spectral gap certifies the dimension.
    """
    G = build_genus2_group()
    m = 2 * n_coeffs
    theta = 2 * np.pi * (np.arange(m) + 0.5) / m
    z = radius * np.exp(1j * theta)
    w, (_, _, c, d) = reduce_to_domain(G, z)
    jac = 1.0 / (c * z + d) ** 4
    n = np.arange(n_coeffs)
    A = np.exp(1j * np.outer(theta, n)) - jac[:, None] * (w[:, None] / radius) ** n
    _, S, Vh = np.linalg.svd(A, full_matrices=False)
    return Vh[-dim:].conj().T, S


def project_automorphic(coeffs: np.ndarray, n_coeffs: int = N_COEFFS,
                        radius: float = SAMPLE_RADIUS) -> np.ndarray:
    basis, _ = automorphic_subspace(n_coeffs, radius)
    scale = radius ** np.arange(n_coeffs)
    x = np.zeros(n_coeffs, dtype=complex)
    k = min(n_coeffs, len(coeffs))
    x[:k] = coeffs[:k] * scale[:k]
    return (basis @ (basis.conj().T @ x)) / scale


def poincare_series(G: FuchsianGroup, seed, radius: float = 10.0, refine: bool = True,
                    samples: int = 2 * N_COEFFS, sample_radius: float = SAMPLE_RADIUS,
                    cap: int = 3_000_000) -> HQD:
    """Weight-4 Poincare series of a polynomial seed, truncated by displacement.

    The recorded ``tail`` is the sup over the sample circle of the contribution
    from elements with displacement in ``(radius - 1, radius]`` relative to
    the full sum.  ``NonConvergent`` is raised when it exceeds 0.5.
    """
    return poincare_basis(G, (tuple(seed),), radius, refine, samples, sample_radius, cap)[0]


def poincare_basis(G: FuchsianGroup, seeds=DEFAULT_SEEDS, radius: float = 10.0,
                   refine: bool = True, samples: int = 2 * N_COEFFS,
                   sample_radius: float = SAMPLE_RADIUS, cap: int = 3_000_000):
    seeds = tuple(tuple(complex(x) for x in s) for s in seeds)
    return _poincare_basis_cached(seeds, float(radius), bool(refine), int(samples),
                                  float(sample_radius), int(cap))


@lru_cache(maxsize=16)
def _poincare_basis_cached(seeds, radius, refine, samples, sample_radius, cap):
    G = build_genus2_group()
    orbit = orbit_ball(radius)
    if len(orbit) > cap:
        raise BudgetExceeded(f"{len(orbit)} group elements exceed cap {cap}")
    shell = orbit.displacement > radius - 1
    vals, shell_vals = _circle_samples(G, orbit, seeds, samples, sample_radius, shell)
    coeffs, neg = _taylor_from_samples(vals, sample_radius)
    out = []
    for k, s in enumerate(seeds):
        total = np.abs(vals[k]).max()
        tail = float(np.abs(shell_vals[k]).max() / total) if total > 0 else 0.0
        if tail > 0.5:
            raise NonConvergent(f"seed {s}: last-shell ratio {tail:.3f}")
        label = "P[" + ",".join(f"{x.real:g}" for x in s) + "]"
        c = coeffs[k]
        if refine:
            c = project_automorphic(c, min(N_COEFFS, len(c)), sample_radius)
        out.append(HQD(c, label, tail, float(neg[k]), radius))
    return tuple(out)


def hqd_basis(radius: float = 10.0):
    """Default basis from the seeds ``1, z, z^2``."""
    return poincare_basis(build_genus2_group(), DEFAULT_SEEDS, radius)


def automorphy_residual(phi, G: FuchsianGroup, n_points: int = 400, r_max: float = 0.8,
                        min_pairs: int = 20, seed: int = 0) -> float:
    """``max |phi(g z) g'(z)^2 - phi(z)| / (1 + |phi(z)|)`` over generators.

    ``phi`` is any callable; for an :class:`HQD` the raw Taylor series is
    used so that the check is not satisfied by construction.  Sample points
    are kept when both ``z`` and ``g z`` lie in ``|z| <= r_max``.
    """
    f = phi.taylor if isinstance(phi, HQD) else phi
    rng = np.random.default_rng(seed)
    z = r_max * np.sqrt(rng.uniform(0, 1, n_points)) * np.exp(2j * np.pi * rng.uniform(0, 1, n_points))
    worst, pairs = 0.0, 0
    for g in G.generators:
        for m in (g, g.inverse()):
            gz = m(z)
            ok = np.abs(gz) <= r_max
            pairs += int(ok.sum())
            if not np.any(ok):
                continue
            fz = f(z[ok])
            r = np.abs(f(gz[ok]) * m.derivative(z[ok]) ** 2 - fz) / (1 + np.abs(fz))
            worst = max(worst, float(r.max()))
    if pairs < min_pairs:
        raise InsufficientOverlap(f"only {pairs} testable pairs")
    return worst


def _conj_label(label: str) -> str:
    if label.startswith("conj(") and label.endswith(")"):
        inner, depth = label[5:-1], 0
        for ch in inner:
            depth += (ch == "(") - (ch == ")")
            if depth < 0:
                break
        else:
            return inner
    return f"conj({label})"


def linf_norm(q, rho0_field: ScalarField, mask=None) -> float:
    """``max |phi| / rho0`` over the masked cells."""
    phi = q.values if hasattr(q, "values") else np.asarray(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(phi) / np.abs(rho0_field.values)
    if mask is not None:
        ratio = ratio[mask]
    return float(ratio.max())


def check_tt(q, g0: SymTensor, order: int = 4, mask=None):
    """Trace and divergence residuals of ``Re q`` with respect to ``g0``.

    ``q`` is a :class:`QuadraticDifferentialField` (its real part is used)
    or an arbitrary symmetric tensor.  Residuals are maxima over interior
    cells, relative to the largest component of the tensor.
    """
    if isinstance(q, QuadraticDifferentialField):
        T = q.tensor()
        T = SymTensor(0.5 * T.g11 + 0.5 * np.conj(T.g22), 0.5 * (T.g12 + np.conj(T.g12)),
                      0.5 * T.g22 + 0.5 * np.conj(T.g11), T.grid)
    else:
        T = q
    scale = max(np.abs(T.g11).max(), np.abs(T.g12).max(), np.abs(T.g22).max())
    if scale == 0:
        return 0.0, 0.0
    inner = interior_mask(g0.grid.shape, order)
    if mask is not None:
        inner &= mask
    tr = np.abs(trace(T, g0)) * np.abs(g0.g12)
    dv = divergence(T, g0, order)
    dres = np.maximum(np.abs(dv[0]), np.abs(dv[1])) * np.abs(g0.g12)
    return float(tr[inner].max() / scale), float(dres[inner].max() / scale)
