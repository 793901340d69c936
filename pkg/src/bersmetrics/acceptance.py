"""The ten acceptance criteria as callable checks.

Each check returns a :class:`CriterionResult` with the measured quantities,
the thresholds it was held to and its wall time against the time budget.
Randomness is drawn from fixed seeds so repeated runs agree exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .autoforms import combine, hqd_basis
from .bersdeform import deform, fuchsian_bers, ray_point, sample_hqd
from .bounds import (ball_certificate, compute_R, max_ray_parameter, positivity_margin,
                     ray_parameter_bisection, sup_norm, surface_cells)
from .epstein import (bers_from_immersion, data_at_infinity, random_admissible,
                      random_nearly_fuchsian, reconstruct_from_infinity, shift_check)
from .fields import Grid
from .fuchsia import build_genus2_group, fundamental_mesh, hyperbolic_area, rho0
from .geomcore import ComplexMetricField, curvature_field, is_positive
from .schwarz import develop_from_schwarzian, schwarzian, schwarzian_at
from .wpmetric import (basis_on_quadrature, gram, invariant_flow_field,
                       isotopy_invariance_check, mcmullen_check, quadrature, same_side_gram)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict
    thresholds: dict
    elapsed: float = 0.0
    budget: float = float("inf")
    notes: str = ""

    @property
    def within_budget(self) -> bool:
        return self.elapsed <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        timing = f"{self.elapsed:.1f}s/{self.budget:.0f}s"
        return f"[{status}] criterion {self.number:2d} {self.title}: {parts} ({timing})"

    def to_dict(self, timing: bool = False) -> dict:
        d = {"number": self.number, "title": self.title, "passed": self.passed,
             "measured": self.measured, "thresholds": self.thresholds, "budget_s": self.budget}
        if timing:
            d["elapsed_s"] = self.elapsed
            d["within_budget"] = self.within_budget
        if self.notes:
            d["notes"] = self.notes
        return d


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _random_hqd(rng, basis):
    return combine(basis, rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis)))


def _timed(fn):
    def run(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


@_timed
def curvature(resolution: int = 512, order: int = 4, n_metrics: int = 5, seed: int = 1
              ) -> CriterionResult:
    """|K + 1| on the octagon for g0 and deformed metrics, with the observed order."""
    rng = np.random.default_rng(seed)
    B = hqd_basis()
    G = build_genus2_group()
    ref = fuchsian_bers(Grid.square(1.05, resolution))
    specs = [(None, "plus", 0.0)]
    for k in range(n_metrics):
        q = _random_hqd(rng, B)
        side = "plus" if k % 2 == 0 else "minus"
        frac = float(rng.uniform(0.3, 0.9))
        specs.append((q, side, frac * max_ray_parameter(ref, sample_hqd(q, ref))))
    meshes = {n: fundamental_mesh(G, n) for n in (resolution // 2, resolution)}
    errs, orders = [], []
    for q, side, t in specs:
        e = []
        for n, M in meshes.items():
            z = np.where(np.abs(M.centers) < 0.95, M.centers, 0)
            phi = np.zeros(z.shape, complex) if q is None else t * q(z)
            r = rho0(z)
            if side == "plus":
                g = ComplexMetricField(phi, r / 2, np.zeros_like(phi), M.grid)
            else:
                g = ComplexMetricField(np.zeros_like(phi), r / 2, np.conj(phi), M.grid)
            if not is_positive(g, M.inside):
                raise AssertionError("sample metric is not positive")
            e.append(curvature_field(g, order).max_deviation(mask=M.inside))
        errs.append(e[1])
        orders.append(float(np.log2(e[0] / e[1])))
    worst, order_min = max(errs), min(orders)
    return CriterionResult(1, "curvature of Bers metrics",
                           worst < 5e-5 and order_min >= 1.8,
                           {"max_abs_K_plus_1": worst, "min_refinement_order": order_min,
                            "metrics": len(specs)},
                           {"max_abs_K_plus_1": 5e-5, "min_refinement_order": 1.8}, budget=30)


@_timed
def fuchsian_bounds(n: int = 512, samples: int = 10, seed: int = 2) -> CriterionResult:
    """R = 1/2 and t* ||q|| = 1 at the Fuchsian point."""
    rng = np.random.default_rng(seed)
    B = hqd_basis()
    bm = fuchsian_bers(Grid.square(1.05, n))
    r_err = abs(compute_R(bm) - 0.5)
    t_err = bis = 0.0
    for _ in range(samples):
        q = sample_hqd(_random_hqd(rng, B), bm)
        ts = max_ray_parameter(bm, q)
        t_err = max(t_err, abs(ts * sup_norm(q, bm) - 1))
        bis = max(bis, abs(ray_parameter_bisection(bm, q) / ts - 1))
    return CriterionResult(2, "Fuchsian R and ray limit", r_err < 1e-10 and t_err < 1e-10,
                           {"abs_R_minus_half": r_err, "abs_tstar_norm_minus_1": t_err,
                            "bisection_rel_gap": bis},
                           {"abs_R_minus_half": 1e-10, "abs_tstar_norm_minus_1": 1e-10}, budget=10)


@_timed
def margin_equivalence(n: int = 256, samples: int = 200, seed: int = 3) -> CriterionResult:
    """Sign of the chart margin against the isotropic-ratio positivity test."""
    rng = np.random.default_rng(seed)
    B = hqd_basis()
    base = fuchsian_bers(Grid.square(1.05, n))
    disagree = positives = 0
    for _ in range(samples):
        side = "plus" if rng.random() < 0.5 else "minus"
        q0 = sample_hqd(_random_hqd(rng, B), base, side)
        s = float(rng.uniform(0, 0.9)) * max_ray_parameter(base, q0, side)
        g = deform(base, q0, side, s)
        q = sample_hqd(_random_hqd(rng, B), base, side)
        t = float(rng.uniform(0, 2)) * max_ray_parameter(g, q, side)
        rep = positivity_margin(g, q, side, t)
        raw = g.g.g11 + t * q.values if side == "plus" else g.g.g11
        g22 = g.g.g22 if side == "plus" else g.g.g22 + t * q.values
        cert = is_positive(ComplexMetricField(raw, g.g.g12, g22, g.grid), surface_cells(g))
        disagree += rep.positive != bool(cert)
        positives += bool(cert)
    return CriterionResult(3, "margin sign equals positivity", disagree == 0,
                           {"disagreements": disagree, "samples": samples, "positive": positives},
                           {"disagreements": 0}, budget=60)


@_timed
def epstein_identities(samples: int = 1000, seed: int = 4) -> CriterionResult:
    """Round trip through data at infinity and the 2q shift."""
    rng = np.random.default_rng(seed)
    rt = shift = conj = 0.0
    for _ in range(samples):
        p = random_nearly_fuchsian(rng)
        d = data_at_infinity(p)
        back = reconstruct_from_infinity(d.Istar, d.Bstar)
        rt = max(rt, float(np.abs(back.I - p.I).max()), float(np.abs(back.B - p.B).max()))
        g = bers_from_immersion(p)
        flipped = bers_from_immersion(type(p)(p.I, -p.B))
        conj = max(conj, float(np.abs(flipped - np.conj(g)).max()))
        shift = max(shift, shift_check(*random_admissible(rng)).residual)
    return CriterionResult(4, "Epstein round trip and 2q shift", rt < 1e-10 and shift < 1e-10,
                           {"round_trip": rt, "shift_residual": shift, "conjugation": conj,
                            "samples": samples},
                           {"round_trip": 1e-10, "shift_residual": 1e-10}, budget=5)


def _base_samples(n):
    grid = Grid.square(1.05, n)
    base = fuchsian_bers(grid)
    z = base.points()
    return base, [np.where(base.inside, b(z), 0) for b in hqd_basis()]


@_timed
def gram_matrices(n: int = 512, reference: int = 1024) -> CriterionResult:
    """Same-side Gram vanishes, mixed Gram is nondegenerate and matches classical WP."""
    base, P = _base_samples(n)
    quad = quadrature(base.grid, 1)
    mixed = gram(base, P, [np.conj(p) for p in P], quad)
    scale = float(np.abs(mixed.entries).max())
    same = max(float(np.abs(same_side_gram(base, P, "plus", quad).entries).max()),
               float(np.abs(same_side_gram(base, [np.conj(p) for p in P], "minus", quad).entries).max()))
    # a deformed point: both plus differentials still pair to zero
    B = hqd_basis()
    q = sample_hqd(B[0], base)
    g = deform(base, q, "plus", 0.3 * max_ray_parameter(base, q))
    same = max(same, float(np.abs(same_side_gram(g, P, "plus", quad).entries).max()))
    # classical WP on an independent grid and quadrature (octagon cut cells)
    G = build_genus2_group()
    M = fundamental_mesh(G, reference, subsamples=16)
    zc = np.where(M.inside, M.centers, 0)
    vals = [b(zc) for b in B]
    r0 = rho0(zc)
    W = np.array([[M.integrate(a * np.conj(c) / r0) for c in vals] for a in vals]).real
    gap = float(np.abs(2 * mixed.entries - W).max())
    smin = mixed.sigma_min
    return CriterionResult(5, "Gram matrices", same < 1e-10 * scale and smin > 0 and gap < 1e-4,
                           {"same_side_over_scale": same / scale, "sigma_min": smin,
                            "max_abs_2G_minus_W": gap},
                           {"same_side_over_scale": 1e-10, "sigma_min": 0.0,
                            "max_abs_2G_minus_W": 1e-4}, budget=60)


@_timed
def mcmullen(n: int = 1024, stride: int = 3, fraction: float = 0.3) -> CriterionResult:
    """Three routes to the mixed pairing at g0 + 0.3 t* qbar."""
    B = hqd_basis()
    ref = fuchsian_bers(Grid.square(1.05, 512))
    s = fraction * max_ray_parameter(ref, sample_hqd(B[0], ref))
    rp = ray_point(B[0], s, n=n)
    quad = quadrature(rp.plus.grid, stride)
    z = rp.base.points()
    psi = np.where(rp.base.inside, B[0](z), 0)
    phit = basis_on_quadrature(rp, quad)[0]
    routes = mcmullen_check(rp.minus, phit, np.conj(psi), quad, plus_chart=rp.eta)
    scale = abs(routes.route_c)
    spread = routes.spread / scale
    residual = rp.chart.solution.residual
    return CriterionResult(6, "McMullen three routes", spread < 1e-3 and residual < 1e-5,
                           {"relative_spread": spread, "solver_residual": residual,
                            "fd_consistency": rp.chart.consistency, "grid": n},
                           {"relative_spread": 1e-3, "solver_residual": 1e-5}, budget=300)


@_timed
def isotopy(n: int = 512, t: float = 0.05) -> CriterionResult:
    """Pairing drift under an equivariant isotopy."""
    B = hqd_basis()
    before, after = isotopy_invariance_check(B[0], B[0], invariant_flow_field(B[1]), t, n=n)
    drift = abs(after - before) / abs(before)
    return CriterionResult(7, "isotopy invariance", drift < 1e-4,
                           {"relative_drift": drift, "t": t}, {"relative_drift": 1e-4}, budget=60)


def _random_mobius(rng, keep_out: float):
    a, b, c, d = rng.normal(size=4) + 1j * rng.normal(size=4)
    pole = -d / c
    if abs(pole) < keep_out:
        d = -c * pole / abs(pole) * keep_out
    return lambda z: (a * z + b) / (c * z + d)


@_timed
def schwarzian_checks(samples: int = 100, n: int = 128, seed: int = 5) -> CriterionResult:
    """Moebius kernel, cocycle and the developing-map round trip."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.5, 0.5, 200) + 1j * rng.uniform(-0.5, 0.5, 200)
    mob = 0.0
    for _ in range(samples):
        mob = max(mob, float(np.abs(schwarzian_at(_random_mobius(rng, 1.0), pts)).max()))
    coc = 0.0
    for _ in range(20):
        m = _random_mobius(rng, 1.6)
        eps = 0.1 * rng.normal()
        f = (lambda m, eps: lambda z: m(z + eps * z ** 3))(m, eps)
        A = complex(*(0.5 * rng.normal(size=2)))
        Bc = complex(*(0.3 * rng.normal(size=2)))
        gmap = (lambda A, Bc: lambda z: A * z + Bc)(A, Bc)
        lhs = schwarzian_at(lambda z: f(gmap(z)), pts)
        rhs = schwarzian_at(f, gmap(pts)) * A ** 2 + schwarzian_at(gmap, pts)
        coc = max(coc, float(np.abs(lhs - rhs).max()))
    grid = Grid.square(0.5, n)
    zc = grid.centers()
    rt = 0.0
    for _ in range(3):
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        s = (lambda c: lambda z: c[0] + c[1] * z + c[2] * z ** 2)(c)
        dev = develop_from_schwarzian(s, grid)
        S = schwarzian(dev.chart, "fd")
        m = S.meta["valid"] & (np.abs(zc) < 0.5)
        rt = max(rt, float(np.abs(S.values - s(zc))[m].max()))
    return CriterionResult(8, "Schwarzian kernel, cocycle, round trip",
                           mob < 1e-8 and coc < 1e-7 and rt < 1e-6,
                           {"mobius": mob, "cocycle": coc, "round_trip": rt},
                           {"mobius": 1e-8, "cocycle": 1e-7, "round_trip": 1e-6}, budget=30)


@_timed
def group_and_area(resolution: int = 512) -> CriterionResult:
    """Relator and the hyperbolic area of the octagon."""
    G = build_genus2_group()
    rel = G.relator_residual()
    area = hyperbolic_area(fundamental_mesh(G, resolution))
    err = abs(area - 4 * np.pi)
    return CriterionResult(9, "relator and area", rel < 1e-9 and err < 1e-3,
                           {"relator": rel, "abs_area_minus_4pi": err},
                           {"relator": 1e-9, "abs_area_minus_4pi": 1e-3}, budget=10)


@_timed
def ball_certificates(n: int = 512, samples: int = 50, seed: int = 6,
                      fraction: float = 0.5) -> CriterionResult:
    """Random q inside the R-ball at a deformed point."""
    rng = np.random.default_rng(seed)
    B = hqd_basis()
    base = fuchsian_bers(Grid.square(1.05, n))
    qa = sample_hqd(B[0], base)
    g = deform(base, qa, "plus", fraction * max_ray_parameter(base, qa))
    R = compute_R(g)
    held = witnessed = 0
    spread = 0.0
    for _ in range(samples):
        q = sample_hqd(_random_hqd(rng, B), g)
        q = q.scaled(float(rng.uniform(0.05, 0.999)) * R / sup_norm(q, g))
        cert = ball_certificate(g, q)
        held += cert.holds
        witnessed += bool(cert.witness_positive)
        spread = max(spread, cert.form_spread)
    return CriterionResult(10, "ball certificates", held == samples and witnessed == samples,
                           {"R": R, "certified": held, "g_minus_2q_positive": witnessed,
                            "samples": samples, "form_spread": spread},
                           {"certified": samples, "g_minus_2q_positive": samples}, budget=120)


CRITERIA = (curvature, fuchsian_bounds, margin_equivalence, epstein_identities, gram_matrices,
            mcmullen, isotopy, schwarzian_checks, group_and_area, ball_certificates)


def run_all(select=None, log=print, resolution: int | None = None, grid: int | None = None) -> list:
    """Run the selected criteria (all by default).

    ``resolution`` overrides the mesh resolution of criteria 1 and 9 and
    ``grid`` the solver grid of criterion 6.
    """
    overrides = {1: {"resolution": resolution}, 9: {"resolution": resolution}, 6: {"n": grid}}
    out = []
    for k, check in enumerate(CRITERIA, start=1):
        if select is not None and k not in select:
            continue
        kw = {a: v for a, v in overrides.get(k, {}).items() if v is not None}
        res = check(**kw)
        if log is not None:
            log(res.line())
        out.append(res)
    return out
