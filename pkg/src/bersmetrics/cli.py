"""Command-line driver.

    bersmetrics <subcommand> [--config PATH] [--resolution N] [--words L]
                [--grid N] [--tol X] [--out DIR] [--stamp]

Every subcommand writes ``report.json`` plus CSV tables and SVG heatmaps to
the output directory.  Outputs are byte-identical for identical
configurations; wall-clock data (timings, a timestamp) is written only with
``--stamp``.  Exit status: 0 ok, 2 configuration error, 3 numerical failure
(including a failed check), 4 exhausted budget.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acceptance
from .autoforms import automorphy_residual, check_tt, combine, linf_norm, poincare_basis
from .bersdeform import deform, fuchsian_bers, ray_point, sample_hqd, second_chart
from .bounds import (ball_certificate, compute_R, max_ray_parameter, positivity_margin,
                     ray_parameter_bisection, sup_norm)
from .epstein import (bers_from_immersion, bers_from_infinity, data_at_infinity, random_admissible,
                      random_nearly_fuchsian, reconstruct_from_infinity, shift_check)
from .errors import BersError, BudgetExceeded, ConfigError
from .fields import Grid
from .fuchsia import (build_genus2_group, enumerate_group, fundamental_mesh, hyperbolic_area,
                      hyperbolic_density, orbit_ball, partition_mesh_on_grid, rho0)
from .geomcore import ComplexMetricField, curvature_field
from .schwarz import (develop_from_schwarzian, fuchsian_schwarzian, schw_of_deformation, schwarzian,
                      schwarzian_at)
from .wpmetric import (basis_on_quadrature, classical_wp_gram, goldman, gram, mcmullen_check,
                       quadrature, same_side_gram)

SUBCOMMANDS = ("group", "hqd", "deform", "pair", "bounds", "schwarzian", "epstein", "all")


@dataclass
class PipelineConfig:
    """Settings shared by all subcommands.

    ``deformations`` lists ``[side, seed_index, fraction]`` with the
    parameter ``t = fraction * t*``; fractions must not exceed
    ``safety_fraction``.  ``words`` bounds the word length of the group
    enumeration and ``orbit_radius`` the displacement of the Poincare-series
    orbit.  ``element_cap`` limits every group enumeration; exceeding it is
    a budget failure.
    """

    resolution: int = 256
    words: int = 3
    grid: int = 512
    tol: float = 1e-10
    consistency_tol: float = 1e-4
    seeds: list = field(default_factory=lambda: [[1.0], [0.0, 1.0], [0.0, 0.0, 1.0]])
    orbit_radius: float = 10.0
    deformations: list = field(default_factory=lambda: [["plus", 0, 0.3], ["minus", 1, 0.5]])
    safety_fraction: float = 0.9
    samples: int = 200
    rng_seed: int = 0
    element_cap: int = 2_000_000
    out: str = "out"
    stamp: bool = False
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    def validate(self) -> "PipelineConfig":
        for name in ("resolution", "grid"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 32:
                raise ConfigError(f"{name} must be an integer >= 32, got {v!r}")
        if not isinstance(self.words, int) or self.words < 0:
            raise ConfigError(f"words must be a non-negative integer, got {self.words!r}")
        for name in ("tol", "consistency_tol", "orbit_radius"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if not 0 < self.safety_fraction < 1:
            raise ConfigError("safety_fraction must lie in (0, 1)")
        if not isinstance(self.element_cap, int) or self.element_cap < 1:
            raise ConfigError("element_cap must be a positive integer")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise ConfigError("samples must be a positive integer")
        if not self.seeds or not all(isinstance(s, list) and s for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of coefficient lists")
        for entry in self.deformations:
            if not (isinstance(entry, list) and len(entry) == 3):
                raise ConfigError(f"each deformation must be [side, seed_index, fraction]: {entry!r}")
            side, k, frac = entry
            if side not in ("plus", "minus"):
                raise ConfigError(f"deformation side must be plus or minus, got {side!r}")
            if not isinstance(k, int) or not 0 <= k < len(self.seeds):
                raise ConfigError(f"deformation seed index {k!r} out of range")
            if not isinstance(frac, (int, float)) or not 0 <= frac <= self.safety_fraction:
                raise ConfigError(f"deformation fraction {frac!r} outside [0, {self.safety_fraction}]")
        return self

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)} - {"explicit"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data, explicit=frozenset(data))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("stamp", "out", "explicit"):
            d.pop(k)
        return d


# ---- output helpers -------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if np.isfinite(v) else repr(v)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


class Output:
    """Collects artifacts in the output directory."""

    def __init__(self, cfg: PipelineConfig, command: str):
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.command = command
        self.files = []
        self.over_budget = False
        self.t0 = time.perf_counter()

    def csv(self, name: str, header, rows):
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.files.append(name)

    def svg(self, name: str, values, title: str, mask=None):
        (self.dir / name).write_text(heatmap_svg(values, title, mask,
                                                 stamp=_stamp() if self.cfg.stamp else None))
        self.files.append(name)

    def report(self, body: dict) -> Path:
        rep = {"command": self.command, "config": self.cfg.to_dict(), "result": body,
               "files": sorted(self.files)}
        if self.cfg.stamp:
            rep["stamp"] = {"time": _stamp(), "elapsed_s": time.perf_counter() - self.t0}
        path = self.dir / "report.json"
        path.write_text(json.dumps(_jsonable(rep), indent=2, sort_keys=True) + "\n")
        return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"{float(v.real)!r}{float(v.imag):+.17g}j"
    return v


def _stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


_PALETTE = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]],
                    float)


def _color(t):
    t = min(max(t, 0.0), 1.0) * (len(_PALETTE) - 1)
    i = min(int(t), len(_PALETTE) - 2)
    c = _PALETTE[i] + (t - i) * (_PALETTE[i + 1] - _PALETTE[i])
    return "#%02x%02x%02x" % tuple(int(round(x)) for x in c)


def heatmap_svg(values, title: str, mask=None, max_cells: int = 128, stamp: str | None = None) -> str:
    """A real 2D array as an SVG of coloured squares (row 0 at the bottom)."""
    v = np.asarray(values, float).copy()
    if mask is not None:
        v[~np.asarray(mask, bool)] = np.nan
    step = max(1, int(np.ceil(max(v.shape) / max_cells)))
    ny, nx = v.shape[0] // step, v.shape[1] // step
    blocks = v[:ny * step, :nx * step].reshape(ny, step, nx, step)
    finite = np.isfinite(blocks)
    counts = finite.sum(axis=(1, 3))
    sums = np.where(finite, blocks, 0).sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        cells = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    ok = np.isfinite(cells)
    lo, hi = (float(cells[ok].min()), float(cells[ok].max())) if ok.any() else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    px = 4
    width, height = nx * px, ny * px + 24
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    if stamp:
        out.append(f"<!-- generated {stamp} -->")
    out.append(f'<text x="2" y="14" font-family="monospace" font-size="11">{_escape(title)} '
               f'[{lo:.4g}, {hi:.4g}]</text>')
    for j in range(ny):
        y = 24 + (ny - 1 - j) * px
        for i in range(nx):
            if ok[j, i]:
                out.append(f'<rect x="{i * px}" y="{y}" width="{px}" height="{px}" '
                           f'fill="{_color((cells[j, i] - lo) / span)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---- pipelines ------------------------------------------------------------

def _basis(cfg: PipelineConfig):
    return poincare_basis(build_genus2_group(), [list(s) for s in cfg.seeds], cfg.orbit_radius,
                          cap=cfg.element_cap)


def run_group(cfg: PipelineConfig, out: Output) -> dict:
    G = build_genus2_group()
    words = enumerate_group(G, cfg.words, cap=cfg.element_cap)
    out.csv("group_words.csv", ["word", "trace_re", "trace_im", "displacement"],
            [(w or "e", m.trace.real, m.trace.imag,
              2 * np.arccosh(max(1.0, abs(m.trace) / 2))) for w, m in words])
    mesh = fundamental_mesh(G, cfg.resolution)
    part = partition_mesh_on_grid(G, Grid.square(0.9, cfg.resolution))
    r0 = rho0(np.where(mesh.inside, mesh.centers, 0))
    out.svg("domain_weights.svg", mesh.weights / mesh.grid.spacing ** 2, "octagon cell coverage",
            mesh.inside)
    out.svg("log_rho0.svg", np.log(r0), "log rho0 on the octagon", mesh.inside)
    rp = rho0(np.where(part.inside, part.centers, 0))
    area_part = float(np.sum(part.weights * rp))
    return {"relator_residual": G.relator_residual(), "words": len(words), "max_len": cfg.words,
            "orbit_elements_radius_6": len(orbit_ball(6.0)),
            "area_cut_cells": hyperbolic_area(mesh), "area_partition": area_part,
            "area_target": 4 * np.pi, "group": G.to_dict(cfg.words)}


def run_hqd(cfg: PipelineConfig, out: Output) -> dict:
    G = build_genus2_group()
    basis = _basis(cfg)
    mesh = fundamental_mesh(G, cfg.resolution)
    z = np.where(mesh.inside, mesh.centers, 0)
    r0 = hyperbolic_density(mesh)
    rz = rho0(z)
    g0 = ComplexMetricField(0, rz / 2, 0, mesh.grid)
    rows, items = [], []
    for k, q in enumerate(basis):
        vals = q(z)
        tt = check_tt(q.on_grid(mesh.grid), g0, mask=mesh.inside & (np.abs(mesh.centers) < 0.8))
        items.append({"label": q.label, "sup_norm": linf_norm(vals, r0, mesh.inside),
                      "automorphy_residual": automorphy_residual(q, G), "tail": q.tail,
                      "holomorphy_residual": q.holomorphy_residual,
                      "tt_residuals": list(tt) if isinstance(tt, tuple) else tt})
        for n, c in enumerate(q.coeffs[:40]):
            rows.append((k, n, c.real, c.imag))
        out.svg(f"hqd_{k}.svg", np.abs(vals) / rz, f"|phi_{k}| / rho0", mesh.inside)
    out.csv("hqd_coefficients.csv", ["basis", "n", "re", "im"], rows)
    W = np.array([[mesh.integrate(a(z) * np.conj(b(z)) / rz) for b in basis] for a in basis])
    out.csv("classical_wp.csv", ["i", "j", "re", "im"],
            [(i, j, W[i, j].real, W[i, j].imag) for i in range(len(basis)) for j in range(len(basis))])
    return {"basis": items, "wp_singular_values": np.linalg.svd(W, compute_uv=False)}


def _deformation_list(cfg, base, basis):
    out = []
    for side, k, frac in cfg.deformations:
        q = sample_hqd(basis[k], base, side, label=f"q{k}")
        ts = max_ray_parameter(base, q, side)
        out.append((side, k, frac, q, ts, frac * ts))
    return out


def run_deform(cfg: PipelineConfig, out: Output) -> dict:
    basis = _basis(cfg)
    base = fuchsian_bers(Grid.square(1.05, cfg.grid))
    G = build_genus2_group()
    mesh = fundamental_mesh(G, cfg.resolution)
    zc = np.where(np.abs(mesh.centers) < 0.95, mesh.centers, 0)
    items = []
    for i, (side, k, frac, q, ts, t) in enumerate(_deformation_list(cfg, base, basis)):
        g = deform(base, q, side, t)
        rep = positivity_margin(base, q, side, t)
        phi = t * basis[k](zc)
        r = rho0(zc)
        if side == "plus":
            gm = ComplexMetricField(phi, r / 2, 0 * phi, mesh.grid)
        else:
            gm = ComplexMetricField(0 * phi, r / 2, np.conj(phi), mesh.grid)
        kdev = curvature_field(gm, 4).max_deviation(mask=mesh.inside)
        plus = g if side == "plus" else deform(base, q.conj(), "plus", t)
        sc = second_chart(plus, tol=cfg.tol, consistency_tol=cfg.consistency_tol)
        items.append({"side": side, "seed": k, "fraction": frac, "t_star": ts, "t": t,
                      "margin_min": rep.margin, "worst_cell": rep.worst_cell,
                      "max_abs_K_plus_1": kdev, "solver_iterations": sc.solution.iterations,
                      "solver_residual": sc.solution.residual, "chart_consistency": sc.consistency,
                      "provenance": g.provenance})
        out.svg(f"margin_{i}.svg", rep.margin_field.values.real, f"margin {side} q{k} t={t:.4g}",
                g.inside)
    out.csv("deformations.csv", ["side", "seed", "fraction", "t_star", "t", "margin_min",
                                 "max_abs_K_plus_1", "solver_residual", "chart_consistency"],
            [(d["side"], d["seed"], d["fraction"], d["t_star"], d["t"], d["margin_min"],
              d["max_abs_K_plus_1"], d["solver_residual"], d["chart_consistency"]) for d in items])
    return {"deformations": items}


def run_pair(cfg: PipelineConfig, out: Output) -> dict:
    basis = _basis(cfg)
    base = fuchsian_bers(Grid.square(1.05, cfg.grid))
    quad = quadrature(base.grid, 1)
    z = base.points()
    P = [np.where(base.inside, b(z), 0) for b in basis]
    Pb = [np.conj(p) for p in P]
    mixed = gram(base, P, Pb, quad)
    chart = gram(base, P, Pb, quad, route="chart")
    W = classical_wp_gram(P, quad)
    same = max(float(np.abs(same_side_gram(base, P, "plus", quad).entries).max()),
               float(np.abs(same_side_gram(base, Pb, "minus", quad).entries).max()))
    n = len(P)
    out.csv("gram.csv", ["i", "j", "metric_re", "metric_im", "chart_re", "chart_im", "classical_wp"],
            [(i, j, mixed.entries[i, j].real, mixed.entries[i, j].imag, chart.entries[i, j].real,
              chart.entries[i, j].imag, W[i, j]) for i in range(n) for j in range(n)])
    rng = np.random.default_rng(cfg.rng_seed)
    samples = []
    for _ in range(5):
        # tangent vectors q + conj(q') with independent plus and minus parts
        u, v = ((rng.normal(size=n) + 1j * rng.normal(size=n),
                 rng.normal(size=n) + 1j * rng.normal(size=n)) for _ in range(2))
        samples.append({"omega": goldman(u, v, lambda x, y: x @ mixed.entries @ y)})
    return {"gram": mixed.to_dict(), "gram_chart_route": chart.to_dict(),
            "route_gap": float(np.abs(mixed.entries - chart.entries).max()),
            "classical_wp": W, "max_abs_2G_minus_W": float(np.abs(2 * mixed.entries - W).max()),
            "same_side_max": same, "goldman_samples": samples,
            "mcmullen": _mcmullen_report(cfg, basis)}


def _mcmullen_report(cfg, basis):
    minus = [d for d in cfg.deformations if d[0] == "minus"]
    if not minus:
        return None
    _, k, frac = minus[0]
    ref = fuchsian_bers(Grid.square(1.05, cfg.grid))
    s = frac * max_ray_parameter(ref, sample_hqd(basis[k], ref))
    rp = ray_point(basis[k], s, n=cfg.grid, tol=cfg.tol, consistency_tol=cfg.consistency_tol)
    quad = quadrature(rp.plus.grid, 3)
    psi = np.where(rp.base.inside, basis[0](rp.base.points()), 0)
    phit = basis_on_quadrature(rp, quad, cfg.orbit_radius)[0]
    r = mcmullen_check(rp.minus, phit, np.conj(psi), quad, plus_chart=rp.eta)
    d = r.to_dict()
    d.update({"point": {"side": "minus", "seed": k, "fraction": frac, "t": s},
              "relative_spread": r.spread / abs(r.route_c),
              "solver_residual": rp.chart.solution.residual})
    return d


def run_bounds(cfg: PipelineConfig, out: Output) -> dict:
    basis = _basis(cfg)
    base = fuchsian_bers(Grid.square(1.05, cfg.grid))
    rays = []
    for k, b in enumerate(basis):
        q = sample_hqd(b, base)
        ts = max_ray_parameter(base, q)
        rays.append({"seed": k, "t_star": ts, "sup_norm": sup_norm(q, base),
                     "t_star_times_norm": ts * sup_norm(q, base),
                     "t_star_bisection": ray_parameter_bisection(base, q)})
    points = []
    for i, (side, k, frac, q, ts, t) in enumerate(_deformation_list(cfg, base, basis)):
        g = deform(base, q, side, t)
        R = compute_R(g, side)
        rng = np.random.default_rng(cfg.rng_seed + i)
        qq = sample_hqd(combine(basis, rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))),
                        g, side)
        qq = qq.scaled(0.5 * R / sup_norm(qq, g))
        cert = ball_certificate(g, qq, side)
        rep = positivity_margin(g, qq, side, 0.0)
        points.append({"side": side, "seed": k, "fraction": frac, "t": t, "R": R,
                       "worst_cell": rep.worst_cell, "certificate_at_half_R": cert.to_dict()})
        out.svg(f"bound_margin_{i}.svg", rep.margin_field.values.real,
                f"margin of g ({side} q{k}, t={t:.4g})", g.inside)
    out.csv("rays.csv", ["seed", "t_star", "sup_norm", "t_star_times_norm", "t_star_bisection"],
            [(r["seed"], r["t_star"], r["sup_norm"], r["t_star_times_norm"], r["t_star_bisection"])
             for r in rays])
    return {"fuchsian": {"R": compute_R(base), "R_minus": compute_R(base, "minus")},
            "rays": rays, "deformed_points": points}


def run_schwarzian(cfg: PipelineConfig, out: Output) -> dict:
    rng = np.random.default_rng(cfg.rng_seed)
    grid = Grid.square(0.5, min(cfg.resolution, 256))
    zc = grid.centers()
    trips = []
    for i in range(3):
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        s = (lambda c: lambda z: c[0] + c[1] * z + c[2] * z ** 2)(c)
        dev = develop_from_schwarzian(s, grid)
        S = schwarzian(dev.chart, "fd")
        m = S.meta["valid"] & (np.abs(zc) < 0.5)
        err = np.where(m, np.abs(S.values - s(zc)), np.nan)
        trips.append({"coefficients": c, "round_trip": float(np.nanmax(err)),
                      "pole_free_fraction": float(dev.pole_free.mean())})
        if i == 0:
            out.svg("round_trip_error.svg", np.log10(err + 1e-18), "log10 round-trip error", m)
    pts = rng.uniform(-0.5, 0.5, 100) + 1j * rng.uniform(-0.5, 0.5, 100)
    mob = 0.0
    for _ in range(100):
        a, b, c, d = rng.normal(size=4) + 1j * rng.normal(size=4)
        if abs(d / c) < 1:
            d = d / abs(d / c)
        mob = max(mob, float(np.abs(schwarzian_at(lambda z: (a * z + b) / (c * z + d), pts)).max()))
    basis = _basis(cfg)
    base = fuchsian_bers(Grid.square(1.05, min(cfg.grid, 256)))
    ledger = []
    for side, k, frac, q, ts, t in _deformation_list(cfg, base, basis):
        S0 = fuchsian_schwarzian(base.grid, side)
        S1 = schw_of_deformation(S0, q, side, t)
        ledger.append({"side": side, "seed": k, "t": t,
                       "sup_norm_over_rho0": sup_norm(S1 if side == "plus" else S1.conj(), base),
                       "provenance": S1.meta["provenance"]})
    out.csv("schwarzian_ledger.csv", ["side", "seed", "t", "sup_norm_over_rho0"],
            [(e["side"], e["seed"], e["t"], e["sup_norm_over_rho0"]) for e in ledger])
    return {"round_trips": trips, "mobius_kernel": mob, "ledger": ledger}


def run_epstein(cfg: PipelineConfig, out: Output) -> dict:
    rng = np.random.default_rng(cfg.rng_seed)
    rows = []
    worst = {"round_trip": 0.0, "infinity_formula": 0.0, "shift": 0.0}
    for i in range(cfg.samples):
        p = random_nearly_fuchsian(rng)
        d = data_at_infinity(p)
        back = reconstruct_from_infinity(d.Istar, d.Bstar)
        rt = max(float(np.abs(back.I - p.I).max()), float(np.abs(back.B - p.B).max()))
        g = bers_from_immersion(p)
        lf = float(np.abs(bers_from_infinity(d) - g).max() / np.abs(g).max())
        sh = shift_check(*random_admissible(rng)).residual
        rows.append((i, rt, lf, sh))
        worst = {"round_trip": max(worst["round_trip"], rt),
                 "infinity_formula": max(worst["infinity_formula"], lf),
                 "shift": max(worst["shift"], sh)}
    out.csv("epstein_residuals.csv", ["sample", "round_trip", "infinity_formula", "shift"], rows)
    edges = np.logspace(-18, -8, 11)
    hist = {k: np.histogram(np.maximum([r[j] for r in rows], 1e-18), edges)[0]
            for j, k in ((1, "round_trip"), (2, "infinity_formula"), (3, "shift"))}
    out.csv("epstein_histogram.csv", ["lower", "upper", "round_trip", "infinity_formula", "shift"],
            [(edges[i], edges[i + 1], hist["round_trip"][i], hist["infinity_formula"][i],
              hist["shift"][i]) for i in range(len(edges) - 1)])
    return {"samples": cfg.samples, "max_residuals": worst}


def run_all(cfg: PipelineConfig, out: Output) -> dict:
    # only explicit settings override the acceptance resolutions
    results = acceptance.run_all(log=print,
                                 resolution=cfg.resolution if "resolution" in cfg.explicit else None,
                                 grid=cfg.grid if "grid" in cfg.explicit else None)
    out.csv("acceptance.csv", ["criterion", "title", "passed"],
            [(r.number, r.title, r.passed) for r in results])
    out.over_budget = not all(r.within_budget for r in results)
    return {"criteria": [r.to_dict(timing=cfg.stamp) for r in results],
            "all_passed": all(r.passed for r in results)}


PIPELINES = {"group": run_group, "hqd": run_hqd, "deform": run_deform, "pair": run_pair,
             "bounds": run_bounds, "schwarzian": run_schwarzian, "epstein": run_epstein,
             "all": run_all}


# ---- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--resolution", type=int, help="fundamental-domain mesh resolution")
    common.add_argument("--words", type=int, help="word-length bound for group enumeration")
    common.add_argument("--grid", type=int, help="solver grid size")
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--stamp", action="store_true", help="record timestamps and timings")
    p = argparse.ArgumentParser(prog="bersmetrics", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    explicit = set(cfg.explicit)
    for name in ("resolution", "words", "grid", "tol", "out"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
            explicit.add(name)
    cfg.explicit = frozenset(explicit)
    if args.stamp:
        cfg.stamp = True
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        out = Output(cfg, args.command)
        body = PIPELINES[args.command](cfg, out)
        path = out.report(body)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return e.exit_code
    except BudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return e.exit_code
    except BersError as e:
        print(f"numerical failure ({type(e).__name__}): {e}", file=sys.stderr)
        return e.exit_code
    print(f"wrote {path}")
    if args.command == "all" and not body["all_passed"]:
        return 3
    if out.over_budget:
        print("time budget exceeded", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
