"""Schwarzian derivatives, the developing-map ODE and the affine deformation law.

Two differentiation routes are provided.  Charts known as callables are
differentiated spectrally: the Taylor coefficients at each point come from
an FFT of samples on a small circle (trapezoidal Cauchy integrals converge
geometrically).  Charts known only on a grid use nested centred differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .autoforms import QuadraticDifferentialField
from .errors import ChartMismatch, CriticalPoint, PoleEncountered
from .fields import Grid, ScalarField, d_zbar, interior_mask, partial_x

CAUCHY_RADIUS = 0.05
CAUCHY_NODES = 32


@dataclass(frozen=True)
class ProjectiveChartField:
    """Samples of a locally injective holomorphic map.

    ``func`` (optional) evaluates the map anywhere in its domain and enables
    spectral differentiation.  ``valid`` marks cells where the samples are
    trusted (all cells when ``None``), e.g. the pole-free part of a
    developed chart.
    """

    f: ScalarField
    chart: str = "z"
    func: Callable | None = field(default=None, compare=False, repr=False)
    valid: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def mask(self) -> np.ndarray:
        return np.ones(self.grid.shape, bool) if self.valid is None else self.valid

    def holomorphy_residual(self, order: int = 6) -> float:
        """``max |f_zbar| / max |f_z|`` over valid interior cells."""
        h = self.grid.spacing
        vals = np.where(self.mask, self.f.values, 0)
        fb = d_zbar(vals, h, order)
        fx = partial_x(vals, h, order)
        m = _stencil_safe(self.mask, order // 2)
        return float(np.abs(fb[m]).max() / np.abs(fx[m]).max())

    @classmethod
    def from_function(cls, func: Callable, grid: Grid, chart: str = "z") -> "ProjectiveChartField":
        return cls(ScalarField(np.asarray(func(grid.centers()), complex), grid, chart), chart, func)


def _stencil_safe(mask, band):
    """Cells whose ``band``-neighbourhood lies in ``mask`` and inside the grid."""
    m = ndimage.binary_erosion(mask, iterations=band, border_value=0)
    return m & interior_mask(mask.shape, band)


def taylor_derivatives(func: Callable, points, kmax: int = 3, radius: float = CAUCHY_RADIUS,
                       nodes: int = CAUCHY_NODES) -> np.ndarray:
    """``f^(k)(z)`` for ``k = 0..kmax`` by the trapezoidal Cauchy integral.

    Returns shape ``(kmax + 1,) + points.shape``.  Accurate when ``func`` is
    holomorphic on a disk of radius well above ``radius`` around each point.
    """
    z = np.asarray(points, dtype=complex)
    w = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    vals = np.asarray(func(z[..., None] + radius * w), dtype=complex)
    coeffs = np.fft.fft(vals, axis=-1) / nodes  # coefficient k sits at index k
    out = np.empty((kmax + 1,) + z.shape, dtype=complex)
    fact = 1.0
    for k in range(kmax + 1):
        if k:
            fact *= k
        out[k] = fact * coeffs[..., k] / radius ** k
    return out


def schwarzian_from_derivatives(d1, d2, d3, tol: float = 1e-12):
    """``f'''/f' - (3/2)(f''/f')^2``; raises :class:`CriticalPoint` if ``|f'| < tol``."""
    small = np.abs(d1) < tol
    if np.any(small):
        raise CriticalPoint(f"|f'| below {tol:g} at {int(small.sum())} points")
    L = d2 / d1
    return d3 / d1 - 1.5 * L * L


def schwarzian_at(func: Callable, points, radius: float = CAUCHY_RADIUS,
                  nodes: int = CAUCHY_NODES, tol: float = 1e-12) -> np.ndarray:
    """Pointwise ``Schw(func)`` by spectral differentiation."""
    d = taylor_derivatives(func, points, 3, radius, nodes)
    return schwarzian_from_derivatives(d[1], d[2], d[3], tol)


def schwarzian(f: ProjectiveChartField, method: str = "auto", order: int = 6,
               radius: float = CAUCHY_RADIUS, nodes: int = CAUCHY_NODES,
               tol: float = 1e-12) -> QuadraticDifferentialField:
    """``Schw(f) dz^2`` sampled on the grid of ``f``.

    ``method`` is ``"spectral"`` (needs ``f.func``), ``"fd"`` or ``"auto"``.
    Cells where the result is not available (stencil or pole band) hold 0
    and are recorded in ``meta["valid"]``.
    """
    if method == "auto":
        method = "spectral" if f.func is not None else "fd"
    grid = f.grid
    if method == "spectral":
        if f.func is None:
            raise ChartMismatch("spectral Schwarzian needs a callable chart")
        valid = f.mask.copy()
        vals = np.zeros(grid.shape, dtype=complex)
        vals[valid] = schwarzian_at(f.func, grid.centers()[valid], radius, nodes, tol)
    elif method == "fd":
        h = grid.spacing
        band = 3 * (order // 2)
        valid = _stencil_safe(f.mask, band)
        # holomorphic, so d/dz = d/dx
        src = np.where(f.mask, f.f.values, 0)
        d1 = partial_x(src, h, order)
        d2 = partial_x(d1, h, order)
        d3 = partial_x(d2, h, order)
        vals = np.zeros(grid.shape, dtype=complex)
        vals[valid] = schwarzian_from_derivatives(d1[valid], d2[valid], d3[valid], tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return QuadraticDifferentialField(ScalarField(vals, grid, f.chart), "plus", "Schw",
                                      {"role": "schwarzian", "valid": valid, "method": method})


@dataclass(frozen=True)
class DevelopedChart:
    """Output of :func:`develop_from_schwarzian`."""

    chart: ProjectiveChartField
    u1: np.ndarray
    u2: np.ndarray
    pole_free: np.ndarray


def _rk4_rays(s: Callable, z0: complex, targets: np.ndarray, steps: int):
    """Integrate ``u'' = -(1/2) s u`` from ``z0`` to each target along the segment.

    Two solutions with ``(u, u') = (1, 0)`` and ``(0, 1)`` at ``z0``.
    Returns ``(u1, u2, du1)`` at the targets (``du1`` in ``z``).
    """
    dz = targets - z0
    dt = 1.0 / steps
    # state rows: u1, u1', u2, u2' (primes in z)
    y = np.zeros((4,) + targets.shape, dtype=complex)
    y[0] = 1
    y[3] = 1

    def rhs(tau, y):
        sz = np.asarray(s(z0 + tau * dz), dtype=complex)
        return np.stack([y[1] * dz, -0.5 * sz * y[0] * dz, y[3] * dz, -0.5 * sz * y[2] * dz])

    tau = 0.0
    for _ in range(steps):
        k1 = rhs(tau, y)
        k2 = rhs(tau + dt / 2, y + dt / 2 * k1)
        k3 = rhs(tau + dt / 2, y + dt / 2 * k2)
        k4 = rhs(tau + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += dt
    return y[0], y[2], y[1]


def develop_from_schwarzian(s: Callable, grid: Grid, basepoint: complex = 0j, steps: int = 128,
                            pole_tol: float = 1e-3, strict: bool = False) -> DevelopedChart:
    """A chart ``f = u2/u1`` with ``Schw(f) = s`` on ``grid``.

    ``u1, u2`` solve ``u'' + (s/2) u = 0`` with initial data ``(1, 0)`` and
    ``(0, 1)`` at ``basepoint``, integrated by RK4 along straight rays, so
    ``f(basepoint) = 0`` and ``f'(basepoint) = 1``.  Cells with
    ``|u1| <= pole_tol``, or whose linearised distance ``|u1 / u1'|`` to a
    zero of ``u1`` is below one cell, are near a pole of ``f`` and are
    excluded from the pole-free mask.  With ``strict`` a :class:`PoleEncountered` carrying the
    partial chart is raised instead.
    """
    z = grid.centers()
    u1, u2, du1 = _rk4_rays(s, basepoint, z, steps)
    # |u1 / u1'| estimates the distance to the nearest zero of u1
    pole_free = (np.abs(u1) > pole_tol) & (np.abs(u1) >= grid.spacing * np.abs(du1))

    def func(points):
        p = np.asarray(points, dtype=complex)
        a, b, _ = _rk4_rays(s, basepoint, p, steps)
        return b / a

    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(pole_free, u2 / u1, 0)
    chart = ProjectiveChartField(ScalarField(vals, grid, "z"), "z", func, pole_free)
    out = DevelopedChart(chart, u1, u2, pole_free)
    if strict and not pole_free.all():
        err = PoleEncountered(f"developing map has poles near {int((~pole_free).sum())} cells")
        err.partial = out
        raise err
    return out


def schw_of_deformation(s_base: QuadraticDifferentialField, q: QuadraticDifferentialField,
                        side: str, t: float) -> QuadraticDifferentialField:
    """``Schw(g + t q) = Schw(g) - (t/2) q`` in the chart of ``s_base``."""
    if q.side != side or s_base.side != side:
        raise ChartMismatch(f"expected {side} differentials, got {s_base.side} and {q.side}")
    if q.phi.chart != s_base.phi.chart or q.grid != s_base.grid:
        raise ChartMismatch(f"Schwarzian in chart {s_base.phi.chart!r}, q in {q.phi.chart!r}")
    meta = dict(s_base.meta)
    meta["role"] = "schwarzian"
    prov = dict(meta.get("provenance", {"base": s_base.label}))
    prov["deformations"] = list(prov.get("deformations", [])) + [[side, q.label, float(t)]]
    meta["provenance"] = prov
    vals = s_base.values - 0.5 * t * q.values
    return QuadraticDifferentialField(ScalarField(vals, s_base.grid, s_base.phi.chart), side,
                                      s_base.label, meta)


def fuchsian_schwarzian(grid: Grid, side: str = "plus") -> QuadraticDifferentialField:
    """``Schw(g0) = 0`` in the uniformizing chart."""
    chart = "z" if side == "plus" else "zbar"
    return QuadraticDifferentialField(ScalarField(np.zeros(grid.shape, complex), grid, chart), side,
                                      "Schw(g0)", {"role": "schwarzian",
                                                   "provenance": {"base": "fuchsian"}})
