"""Positivity margins, maximal rays and Schwarzian-ball radii.

Everything here works for a Bers metric whose plus chart is the grid
coordinate ``z``, so that ``g = rho dz.dWbar`` has ``g22 = 0`` and

    g11 = rho Wbar_z,     2 g12 = rho Wbar_zb.

The plus-side quantities are then pointwise functions of ``(g11, g12)``.
Minus-side versions are obtained by conjugating the metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bersdeform import BersMetric, conjugate_bers, deform
from .errors import ChartMismatch, DegenerateChart, NotPositive
from .fields import Grid, ScalarField
from .fuchsia import build_genus2_group, mesh_on_grid, rho0
from .geomcore import area_density, isotropic_ratios


def _oriented(bm: BersMetric, q, side: str):
    """Metric and differential values seen from the plus side."""
    if side == "plus":
        g, phi = bm, q
    elif side == "minus":
        g, phi = conjugate_bers(bm), (None if q is None else q.conj())
    else:
        raise ValueError(f"unknown side {side!r}")
    if g.plus_name != "z":
        raise ChartMismatch(f"{side} chart of the metric is {g.plus_name!r}, not the grid coordinate")
    if np.any(g.g.g22[g.inside] != 0):
        raise ChartMismatch("metric is not isotropic along dzbar; its plus chart is not z")
    if phi is not None:
        if phi.side != "plus" or phi.phi.chart != "z":
            raise ChartMismatch(f"differential lives on the {q.side} side, chart {q.phi.chart!r}")
        if phi.grid != bm.grid:
            raise ChartMismatch("differential sampled on a different grid")
    return g, (None if phi is None else np.asarray(phi.values))


@lru_cache(maxsize=8)
def _octagon_cells(grid: Grid) -> np.ndarray:
    m = mesh_on_grid(build_genus2_group(), grid).inside
    m.setflags(write=False)
    return m


def surface_cells(bm: BersMetric) -> np.ndarray:
    """Cells meeting the octagon.  All minimands are Gamma-invariant, so
    the minimum over these cells is the minimum over the surface."""
    return _octagon_cells(bm.grid) & bm.inside


@dataclass(frozen=True)
class BoundReport:
    """Margin field of ``g + t q`` with the ray limit and ball radius of ``g``."""

    margin_field: ScalarField
    t_star: float
    R: float
    worst_cell: tuple
    margin: float
    side: str
    t: float
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def positive(self) -> bool:
        return self.margin > 0

    def to_dict(self) -> dict:
        return {"side": self.side, "t": self.t, "t_star": self.t_star, "R": self.R,
                "margin_min": self.margin, "worst_cell": list(self.worst_cell),
                "positive": self.positive, "provenance": self.provenance}


def _margin(g11, g12, phi, t):
    return np.abs(2 * g12) - np.abs(g11 + t * phi)


def _masked_argmin(values, mask):
    v = np.where(mask, values, np.inf)
    idx = np.unravel_index(int(np.argmin(v)), v.shape)
    return float(v[idx]), tuple(int(i) for i in idx)


def positivity_margin(bm: BersMetric, q, side: str = "plus", t: float = 0.0,
                      mask=None) -> BoundReport:
    """``|rho Wbar_zb| - |rho Wbar_z + t phi|`` per cell.

    Positive on every surface cell iff ``g + t q`` is a Bers metric.  The
    report also carries ``t_star`` and ``R`` of the undeformed ``g``.
    """
    g, phi = _oriented(bm, q, side)
    m = surface_cells(bm) if mask is None else (mask & bm.inside)
    field_ = _margin(g.g.g11, g.g.g12, phi, t)  # off-disk cells hold the Euclidean filler
    worst, idx = _masked_argmin(field_, m)
    return BoundReport(ScalarField(field_.astype(complex), bm.grid), max_ray_parameter(bm, q, side, m),
                       compute_R(bm, side, m), idx, worst, side, float(t),
                       {"metric": bm.provenance, "q": q.label})


def ray_parameter_field(g11, g12, phi) -> np.ndarray:
    """Positive root of ``|g11 + t phi| = |2 g12|`` per cell (``inf`` where ``phi = 0``).

    With ``a = g11``, ``c = |2 g12| > |a|`` the quadratic
    ``|phi|^2 t^2 + 2 Re(a conj(phi)) t + |a|^2 - c^2`` has roots of opposite
    sign; the positive one is taken in the cancellation-free form.
    """
    a, c2 = g11, np.abs(2 * g12) ** 2
    p2 = np.abs(phi) ** 2
    b = (a * np.conj(phi)).real
    gap = c2 - np.abs(a) ** 2
    disc = np.sqrt(b * b + p2 * gap)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(b >= 0, gap / (b + disc), (disc - b) / p2)
    return np.where(p2 > 0, t, np.inf)


def max_ray_parameter(bm: BersMetric, q, side: str = "plus", mask=None) -> float:
    """Largest ``t*`` with ``g + t q`` positive for all ``0 <= t < t*``."""
    g, phi = _oriented(bm, q, side)
    m = surface_cells(bm) if mask is None else (mask & bm.inside)
    if not np.any(phi[m] != 0):
        return float("inf")
    return float(ray_parameter_field(g.g.g11, g.g.g12, phi)[m].min())


def ray_parameter_bisection(bm: BersMetric, q, side: str = "plus", mask=None,
                            tol: float = 1e-12) -> float:
    """Bisection for the first ``t`` at which the margin reaches zero (a cross-check)."""
    g, phi = _oriented(bm, q, side)
    m = surface_cells(bm) if mask is None else (mask & bm.inside)
    g11, g12, phi = g.g.g11[m], g.g.g12[m], phi[m]

    def ok(t):
        return _margin(g11, g12, phi, t).min() > 0

    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            return float("inf")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return 0.5 * (lo + hi)


def ball_density(g11, g12, rho_base) -> np.ndarray:
    """``(1 - |w_zb / w_z|) |a_g / a_g0|`` per cell; half its minimum is ``R``."""
    two_g12 = 2 * g12
    return (1 - np.abs(g11 / two_g12)) * np.abs(two_g12 / rho_base)


def compute_R(bm: BersMetric, side: str = "plus", mask=None) -> float:
    """Radius of the sup-norm ball around ``Schw(g)`` certified to stay Bers.

    The base is the Fuchsian metric ``rho0`` of the matching structure
    (the same density on both sides in the disk model).
    """
    g, _ = _oriented(bm, None, side)
    m = surface_cells(bm) if mask is None else (mask & bm.inside)
    if np.any(np.abs(g.g.g12[m]) < 1e-300):
        raise DegenerateChart("chart derivative vanishes")
    r0 = rho0(bm.points())
    return 0.5 * float(ball_density(g.g.g11, g.g.g12, r0)[m].min())


def sup_norm(q, bm: BersMetric, mask=None) -> float:
    """``||q||_inf = max |phi| / rho0`` over the surface cells."""
    m = surface_cells(bm) if mask is None else (mask & bm.inside)
    return float((np.abs(q.values) / rho0(bm.points()))[m].max())


@dataclass(frozen=True)
class BallCertificate:
    """Outcome of :func:`ball_certificate`.

    ``form_spread`` is the largest relative disagreement between the three
    algebraic expressions of the pointwise bound; ``chart_spread`` compares
    them with the chart-derivative expression when the charts are known
    (solver accuracy, not round-off).  ``witness`` is the cell of smallest
    slack and ``witness_positive`` whether ``g - 2q`` is Bers (checked only
    when the certificate holds).
    """

    holds: bool
    slack: float
    witness: tuple
    form_spread: float
    chart_spread: float | None
    witness_positive: bool | None

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "slack": self.slack, "witness": list(self.witness),
                "form_spread": self.form_spread, "chart_spread": self.chart_spread,
                "witness_positive": self.witness_positive}


@dataclass(frozen=True)
class BoundForms:
    """The right-hand side of the ball test written several ways.

    ``components``: ``(|2 g12| - |g11|)/2``.  ``area``:
    ``(rho0/2)(1 - |w_zb/w_z|)|a_g/a_g0|`` with ``a_g`` from the principal
    root of the determinant.  ``isotropic``: ``(|a_g|/2)(1 - |1/r+|)`` with
    ``r+`` the outer isotropic ratio.  ``chart``:
    ``(|rho|/2)(|Wbar_zb| - |Wbar_z|)`` or ``None`` when the minus chart is
    not known.
    """

    components: np.ndarray
    area: np.ndarray
    isotropic: np.ndarray
    chart: np.ndarray | None


def bound_forms(bm: BersMetric, side: str = "plus") -> BoundForms:
    g, _ = _oriented(bm, None, side)
    comp = 0.5 * (np.abs(2 * g.g.g12) - np.abs(g.g.g11))
    a_g = area_density(g.g)
    r0 = rho0(bm.points())
    ratio = np.abs(g.g.g11 / (2 * g.g.g12))
    area = 0.5 * r0 * (1 - ratio) * np.abs(a_g / r0)
    iso = 0.5 * np.abs(a_g) * (1 - np.abs(isotropic_ratios(g.g).inv_r_plus))
    chart = None
    if g.rho is not None and g.minus_derivs is not None:
        wz, wb = g.minus_derivs
        chart = 0.5 * np.abs(g.rho) * (np.abs(wb) - np.abs(wz))
    return BoundForms(comp, area, iso, chart)


def ball_certificate(bm: BersMetric, q, side: str = "plus", mask=None,
                     check_witness: bool = True) -> BallCertificate:
    """Pointwise test ``|phi| < (|2 g12| - |g11|)/2`` on the surface cells.

    When it holds, ``g - 2 q`` is checked to be positive as well.
    """
    _, phi = _oriented(bm, q, side)
    m = surface_cells(bm) if mask is None else (mask & bm.inside)
    forms = bound_forms(bm, side)
    comp = forms.components
    scale = float(np.abs(comp[m]).max())
    spread = max(float(np.abs(forms.area - comp)[m].max()),
                 float(np.abs(forms.isotropic - comp)[m].max())) / scale
    chart_spread = None
    if forms.chart is not None:
        chart_spread = float(np.abs(forms.chart - comp)[m].max()) / scale
    slack, idx = _masked_argmin(comp - np.abs(phi), m)
    holds = slack > 0
    witness = None
    if holds and check_witness:
        try:
            deform(bm, q, side, -2.0, mask=m)
            witness = True
        except NotPositive:
            witness = False
    return BallCertificate(holds, slack, idx, spread, chart_spread, witness)
