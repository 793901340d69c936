"""Bers metrics on the disk and their deformations by quadratic differentials.

A Bers metric is stored with its two charts: a holomorphic coordinate ``Z``
for the structure ``c+`` and an antiholomorphic one ``Wbar`` for ``c-``, so
that ``g = rho dZ.dWbar``.  Only the first derivatives of the charts are kept
(``Z_z, Z_zb, Wbar_z, Wbar_zb``); they are all that pairings, Beltrami
differentials and conjugation need.

A plus-deformation ``g + t phi dz^2`` keeps ``c+`` and moves ``c-``.  The new
chart ``etabar`` is found lazily by one Beltrami solve (:func:`second_chart`).
Minus-deformations are obtained by conjugation.  Since ``conj(g0 + s qbar) =
g0 + s q`` for real ``s``, a single solve serves both deformations of a ray.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .autoforms import DEFAULT_SEEDS, HQD, QuadraticDifferentialField, orbit_sum
from .errors import ChartMismatch, ConsistencyFailure, EquivarianceViolation, NotPositive
from .fields import Grid, ScalarField, d_z
from .fuchsia import FuchsianGroup, build_genus2_group, orbit_ball, rho0
from .geomcore import ComplexMetricField, SymTensor, conjugate_metric, is_positive
from .qcsolve import (BeltramiField, ConjugatedGroup, QcSolution, conjugate_group,
                      disk_support_weights, solve_beltrami)


@dataclass(frozen=True)
class BersMetric:
    """A complex metric on a disk grid together with (possibly unknown) charts.

    ``weights`` is the fraction of each cell inside the unit disk.  Cells with
    zero weight carry the Euclidean metric as filler so that pointwise
    operations stay defined; every reduction masks them out.
    ``rho`` and the minus-chart fields are ``None`` after a plus-deformation
    until :func:`second_chart` fills them in (and symmetrically for the plus
    chart after a minus-deformation).
    """

    g: ComplexMetricField
    weights: np.ndarray
    rho: np.ndarray | None = None
    plus_chart: np.ndarray | None = None
    plus_derivs: tuple | None = None  # (Z_z, Z_zb)
    minus_chart: np.ndarray | None = None
    minus_derivs: tuple | None = None  # (Wbar_z, Wbar_zb)
    plus_name: str = "z"
    minus_name: str = "zbar"
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def grid(self) -> Grid:
        return self.g.grid

    @property
    def inside(self) -> np.ndarray:
        return self.weights > 0

    def points(self) -> np.ndarray:
        return domain_points(self.grid, self.weights)

    def chart_residual(self, mask=None) -> float:
        """``max |g - rho dZ.dWbar| / |g12|`` from the stored chart derivatives."""
        if self.rho is None or self.plus_derivs is None or self.minus_derivs is None:
            raise ChartMismatch("charts not available")
        (zz, zb), (wz, wb) = self.plus_derivs, self.minus_derivs
        r = self.rho
        res = np.maximum.reduce([
            np.abs(r * zz * wz - self.g.g11),
            np.abs(0.5 * r * (zz * wb + zb * wz) - self.g.g12),
            np.abs(r * zb * wb - self.g.g22)]) / np.abs(self.g.g12)
        m = self.inside if mask is None else (mask & self.inside)
        return float(res[m].max())

    def to_dict(self) -> dict:
        d = {"g": self.g.to_dict(), "provenance": self.provenance,
             "charts": {"plus": self.plus_name, "minus": self.minus_name}}
        if self.rho is not None:
            d["rho"] = ScalarField(np.asarray(self.rho, complex), self.grid).to_dict()
        if self.minus_chart is not None:
            d["chart_minus"] = ScalarField(np.asarray(self.minus_chart, complex), self.grid,
                                           self.minus_name).to_dict()
        return d


def domain_points(grid: Grid, weights: np.ndarray) -> np.ndarray:
    """Cell centres, pulled just inside the unit circle for partially covered cells.

    Cells outside the disk map to 0 (their values are discarded by callers).
    """
    z = grid.centers()
    r = np.abs(z)
    inner = np.where(r < 1, z, z * (1 - 1e-9) / np.maximum(r, 1e-300))
    return np.where(weights > 0, inner, 0)


def fuchsian_bers(grid: Grid, weights: np.ndarray | None = None) -> BersMetric:
    """The hyperbolic metric ``g0 = rho0 dz.dzbar`` with charts ``(z, zbar)``."""
    if weights is None:
        weights = disk_support_weights(grid)
    inside = weights > 0
    z = grid.centers()
    rho = np.where(inside, rho0(domain_points(grid, weights)), 1.0).astype(complex)
    zero = np.zeros(grid.shape, dtype=complex)
    one = np.ones(grid.shape, dtype=complex)
    g = ComplexMetricField(zero, 0.5 * rho, zero, grid)
    return BersMetric(g, weights, rho, z, (one, zero), np.conj(z), (zero, one),
                      provenance={"base": "fuchsian", "deformations": []})


def sample_hqd(q, bm: BersMetric, side: str = "plus", label: str | None = None
               ) -> QuadraticDifferentialField:
    """Samples of a callable ``phi`` on the disk cells of ``bm`` (zero outside).

    ``side="minus"`` returns ``conj(phi) dzbar^2``.
    """
    vals = np.where(bm.inside, q(bm.points()), 0)
    name = label if label is not None else getattr(q, "label", "q")
    qf = QuadraticDifferentialField(ScalarField(vals, bm.grid, "z"), "plus", name)
    return qf if side == "plus" else qf.conj()


def conjugate_bers(bm: BersMetric) -> BersMetric:
    """``conj(g)``: swaps the roles of the two charts."""
    def cj(x):
        return None if x is None else np.conj(x)

    pd = None if bm.minus_derivs is None else (np.conj(bm.minus_derivs[1]), np.conj(bm.minus_derivs[0]))
    md = None if bm.plus_derivs is None else (np.conj(bm.plus_derivs[1]), np.conj(bm.plus_derivs[0]))
    prov = dict(bm.provenance)
    prov["conjugated"] = not prov.get("conjugated", False)
    return BersMetric(conjugate_metric(bm.g), bm.weights, cj(bm.rho), cj(bm.minus_chart), pd,
                      cj(bm.plus_chart), md, _conj_name(bm.minus_name), _conj_name(bm.plus_name),
                      prov)


def _conj_name(name: str) -> str:
    return name[:-3] if name.endswith("bar") else name + "bar"


def deform(bm: BersMetric, q: QuadraticDifferentialField, side: str, t: float,
           mask=None) -> BersMetric:
    """``g + t q`` with ``q`` holomorphic for the structure on ``side``.

    The plus side adds ``t phi`` to ``g11`` and drops the minus chart (it is
    recomputed by :func:`second_chart`).  The minus side goes through
    conjugation.  Raises :class:`NotPositive` with the worst cell when the
    result is not a Bers metric on the disk cells.
    """
    if side == "minus":
        if q.side != "minus":
            raise ChartMismatch("minus deformation needs a differential in dzbar^2")
        out = deform(conjugate_bers(bm), q.conj(), "plus", t, mask)
        return conjugate_bers(out)
    if side != "plus":
        raise ValueError(f"unknown side {side!r}")
    if q.side != "plus" or q.phi.chart != bm.plus_name:
        raise ChartMismatch(f"differential in chart {q.phi.chart!r} ({q.side}), "
                            f"metric plus chart is {bm.plus_name!r}")
    if q.grid != bm.grid:
        raise ChartMismatch("differential sampled on a different grid")
    if t == 0:
        return bm
    if bm.plus_name != "z":
        raise ChartMismatch("plus deformations need the background plus chart")
    g = ComplexMetricField(bm.g.g11 + t * np.where(bm.inside, q.values, 0), bm.g.g12, bm.g.g22,
                           bm.grid)
    m = bm.inside if mask is None else (mask & bm.inside)
    cert = is_positive(g, m)
    if not cert:
        raise NotPositive(f"g + {t} q is not positive (margin {cert.margin:.3e})",
                          cert.worst_index, cert.margin)
    prov = dict(bm.provenance)
    prov["deformations"] = list(prov.get("deformations", [])) + [
        ["plus" if not prov.get("conjugated") else "minus", q.label, float(t)]]
    return replace(bm, g=g, rho=None, minus_chart=None, minus_derivs=None,
                   minus_name="etabar", provenance=prov)


def deformation_ratio(bm: BersMetric) -> np.ndarray:
    """``mu_eta = g11 / (2 g12)`` on disk cells (requires ``g22 = 0``)."""
    if np.any(bm.g.g22[bm.inside] != 0):
        raise ChartMismatch("second chart needs an isotropic dzbar (g22 = 0)")
    return np.where(bm.inside, bm.g.g11 / (2 * bm.g.g12), 0)


@dataclass(frozen=True)
class SecondChart:
    """Result of :func:`second_chart`.

    ``eta`` solves ``eta_zb = nu eta_z`` with ``nu = conj(mu_eta)``; the
    minus chart is ``etabar = conj(eta)``.
    """

    metric: BersMetric
    solution: QcSolution
    consistency: float

    @property
    def eta(self):
        return self.solution.f

    @property
    def eta_z(self):
        return self.solution.fz

    @property
    def eta_zb(self):
        return self.solution.fzb


def second_chart(bm: BersMetric, tol: float = 1e-10, mask=None, fd_order: int = 6,
                 consistency_tol: float = 1e-4) -> SecondChart:
    """Recover the minus chart of a plus-deformed metric by one Beltrami solve.

    ``rho`` is read off from ``g12 = rho etabar_zb / 2``.  The consistency
    residual compares ``rho d etabar`` (finite differences of the chart) with
    the metric row ``g11 dz + 2 g12 dzbar`` relative to ``|2 g12|`` on
    ``mask`` (default: the octagon).
    """
    mu_eta = deformation_ratio(bm)
    beltrami = BeltramiField(np.conj(mu_eta) * bm.weights, bm.grid, bm.inside)
    sol = solve_beltrami(beltrami, tol=tol)
    etabar = np.conj(sol.f)
    wz, wb = np.conj(sol.fzb), np.conj(sol.fz)
    rho = np.where(bm.inside, 2 * bm.g.g12 / wb, 1.0)
    if mask is None:
        mask = build_genus2_group().octagon.contains(bm.grid.centers())
    h = bm.grid.spacing
    fd_z = d_z(etabar, h, fd_order)
    res = np.abs(rho * fd_z - bm.g.g11) / np.abs(2 * bm.g.g12)
    m = mask & bm.inside & np.isfinite(res)
    consistency = float(res[m].max())
    if consistency > consistency_tol:
        raise ConsistencyFailure(f"1-form residual {consistency:.3e} exceeds {consistency_tol}")
    out = replace(bm, rho=rho, minus_chart=etabar, minus_derivs=(wz, wb))
    return SecondChart(out, sol, consistency)


def _chart_wedge(bm: BersMetric):
    """``Z_z Wbar_zb - Z_zb Wbar_z``, the coefficient of ``dZ^dWbar`` over ``dz^dzbar``."""
    (zz, zb), (wz, wb) = bm.plus_derivs, bm.minus_derivs
    return zz * wb - zb * wz


def chart_jacobian(bm: BersMetric, side: str) -> np.ndarray:
    """Jacobian of the plus chart ``Z`` (side plus) or of ``w = conj(Wbar)`` (side minus)."""
    if side == "plus":
        zz, zb = bm.plus_derivs
        return np.abs(zz) ** 2 - np.abs(zb) ** 2
    wz, wb = bm.minus_derivs
    return np.abs(wb) ** 2 - np.abs(wz) ** 2


def deformation_beltrami(bm: BersMetric, q, side: str) -> BeltramiField:
    """Beltrami differential of the infinitesimal deformation by ``q``.

    ``q`` holds the coefficient of ``q`` in the chart of ``side`` (an array or
    a :class:`QuadraticDifferentialField`), sampled at the z-cells.

    Plus side: ``(phi dZ/dw / rho) dw/dwbar``, a differential on the minus
    structure written in ``w = conj(Wbar)``.  Minus side: ``(sigmabar
    dWbar/dZbar / rho) dZbar/dZ`` on the plus structure.  Pair the result
    with the matching :func:`chart_jacobian` to integrate in that chart.
    """
    if bm.rho is None or bm.minus_derivs is None or bm.plus_derivs is None:
        raise ChartMismatch("charts not available; run second_chart first")
    if isinstance(q, QuadraticDifferentialField):
        if q.side != side:
            raise ChartMismatch(f"{q.side} differential used for a {side} deformation")
        q = q.values
    wedge = _chart_wedge(bm)
    if side == "plus":
        vals = q * wedge / (bm.rho * chart_jacobian(bm, "minus"))
    elif side == "minus":
        vals = q * wedge / (bm.rho * chart_jacobian(bm, "plus"))
    else:
        raise ValueError(f"unknown side {side!r}")
    return BeltramiField(np.where(bm.inside, vals, 0), bm.grid, bm.inside)


def chart_tensor(phi, a, b, grid: Grid) -> SymTensor:
    """``phi (d eta)^2`` in the (dz, dzbar) frame, where ``d eta = a dz + b dzbar``."""
    return SymTensor(phi * a * a, phi * a * b, phi * b * b, grid)


@dataclass(frozen=True)
class DeformedBasis:
    """Poincare series over a conjugated group, evaluated in the ``eta`` plane.

    The orbit words of the Fuchsian series are replayed on the fitted
    generators, so the truncation matches the undeformed basis.
    """

    group: ConjugatedGroup
    matrices: np.ndarray
    seeds: tuple
    radius: float

    def __call__(self, eta) -> np.ndarray:
        """Values of all basis elements, shape ``(len(seeds),) + eta.shape``."""
        return orbit_sum(self.matrices, self.seeds, np.asarray(eta, dtype=complex))

    def automorphy_residual(self, eta) -> float:
        """``max |phi(A eta) A'(eta)^2 - phi(eta)| / max |phi|`` over generators and their inverses."""
        eta = np.asarray(eta, dtype=complex).ravel()
        base = self(eta)
        scale = np.abs(base).max()
        worst = 0.0
        for gen in self.group.generators:
            for m in (gen, gen.inverse()):
                moved = self(m(eta)) * m.derivative(eta) ** 2
                worst = max(worst, float(np.abs(moved - base).max() / scale))
        return worst


def deformed_basis(sol: QcSolution, G: FuchsianGroup | None = None, radius: float = 10.0,
                   seeds=DEFAULT_SEEDS, tol: float = 1e-3) -> DeformedBasis:
    """Holomorphic quadratic differentials of the structure ``f(D)``, ``f = sol.f``."""
    G = G or build_genus2_group()
    cg = conjugate_group(sol, G, tol=tol)
    if cg.residual > tol:
        raise EquivarianceViolation(f"conjugation residual {cg.residual:.3e}")
    orbit = orbit_ball(radius)
    mats = orbit.replay([m.matrix for m in cg.generators])
    seeds = tuple(tuple(complex(x) for x in s) for s in seeds)
    return DeformedBasis(cg, mats, seeds, radius)


@dataclass
class RayPoint:
    """The deformations ``g0 + s q`` (plus) and ``g0 + s qbar`` (minus) sharing one solve.

    ``plus`` carries the chart pair ``(z, etabar)`` and ``minus`` is its
    conjugate with chart pair ``(eta, zbar)``.
    """

    q: HQD
    s: float
    base: BersMetric
    chart: SecondChart

    @property
    def plus(self) -> BersMetric:
        return self.chart.metric

    @cached_property
    def minus(self) -> BersMetric:
        return conjugate_bers(self.plus)

    @property
    def eta(self):
        return self.chart.eta

    def basis(self, radius: float = 10.0) -> DeformedBasis:
        key = ("basis", radius)
        cache = self.__dict__.setdefault("_cache", {})
        if key not in cache:
            cache[key] = deformed_basis(self.chart.solution, radius=radius)
        return cache[key]


def ray_point(q: HQD, s: float, n: int = 1024, half_width: float = 1.05, tol: float = 1e-10,
              consistency_tol: float = 1e-4) -> RayPoint:
    """Solve once for the pair of deformations of ``g0`` along ``q`` at parameter ``s``."""
    grid = Grid.square(half_width, n)
    base = fuchsian_bers(grid)
    plus = deform(base, sample_hqd(q, base), "plus", s)
    return RayPoint(q, s, base, second_chart(plus, tol=tol, consistency_tol=consistency_tol))
