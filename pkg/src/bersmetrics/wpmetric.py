"""The holomorphic Weil-Petersson pairing and the checks built on it.

For ``q1 = phi dZ^2`` holomorphic for ``c+`` and ``q2bar = sigmabar dWbar^2``
for ``c-`` of ``g = rho dZ.dWbar``::

    <q1, q2bar>_g = (1/8) int <q1, q2bar>_g dA_g            (metric route)
                  = (i/4) int phi sigmabar / rho dZ ^ dWbar   (chart route)

Integrals run over the quotient surface.  Every integrand here is a
Gamma-invariant density, so by default they are taken against a smooth
partition of unity on the grid of the metric (spectrally accurate); the
octagon cut-cell mesh is available as ``method="cut"``.  Either may be
subsampled with an odd stride so that coarse cell centres coincide with
fine ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bersdeform import (BersMetric, RayPoint, _chart_wedge, chart_jacobian, chart_tensor,
                         deformation_beltrami, fuchsian_bers, ray_point)
from .errors import ChartMismatch, FlowEscape, RouteMismatch
from .fields import Grid, d_z, d_zbar
from .fuchsia import (FundamentalMesh, build_genus2_group, mesh_on_grid, partition_mesh_on_grid,
                      reduce_to_domain, rho0)
from .geomcore import SymTensor, area_density, sym2_inner
from .qcsolve import BeltramiField


def _vals(x):
    return np.asarray(x.values if hasattr(x, "values") else x)


@dataclass(frozen=True)
class Quadrature:
    """Octagon mesh on a strided copy of a fine grid.

    ``take(a)`` restricts a fine-grid array to the coarse cells.
    """

    mesh: FundamentalMesh
    stride: int
    offset: int

    def take(self, a):
        a = np.asarray(a)
        n = self.mesh.grid.nx
        sl = slice(self.offset, self.offset + self.stride * n, self.stride)
        return a[..., sl, sl]

    def integrate(self, fine_values) -> complex:
        return self.mesh.integrate(self.take(fine_values))


def quadrature(grid: Grid, stride: int = 1, method: str = "partition",
               subsamples: int = 8) -> Quadrature:
    """Quadrature on ``grid`` using every ``stride``-th cell (``stride`` odd)."""
    if stride % 2 == 0:
        raise ValueError("stride must be odd so that coarse and fine centres coincide")
    n = grid.nx // stride
    coarse = Grid(grid.origin, grid.spacing * stride, n, n)
    G = build_genus2_group()
    if method == "partition":
        mesh = partition_mesh_on_grid(G, coarse)
    elif method == "cut":
        mesh = mesh_on_grid(G, coarse, subsamples)
    else:
        raise ValueError(f"unknown quadrature method {method!r}")
    return Quadrature(mesh, stride, (stride - 1) // 2)


def pair_qd_beltrami(q, beta, quad: Quadrature, jacobian=None) -> complex:
    """``q(beta) = int phi mu (i/2) dz^dzbar``; ``jacobian`` integrates in another chart."""
    mu = beta.mu if isinstance(beta, BeltramiField) else np.asarray(beta)
    integrand = _vals(q) * mu
    if jacobian is not None:
        integrand = integrand * jacobian
    return quad.integrate(integrand)


@dataclass(frozen=True)
class PairingValue:
    chart: complex
    metric: complex

    @property
    def value(self) -> complex:
        return self.metric

    @property
    def route_gap(self) -> float:
        return abs(self.chart - self.metric)


def holo_wp_pair(bm: BersMetric, phi1, sigma2bar, quad: Quadrature, tol: float | None = None,
                 plus_derivs=None, minus_derivs=None) -> PairingValue:
    """``<q1, q2bar>_g`` by both routes.

    ``phi1`` and ``sigma2bar`` are the coefficients in the charts of ``bm``.
    Chart derivatives default to the ones stored on ``bm``; pass others (for
    instance finite differences) to make the metric route independent.
    """
    if bm.rho is None or bm.plus_derivs is None or bm.minus_derivs is None:
        raise ChartMismatch("pairing needs both charts")
    p, s = _vals(phi1), _vals(sigma2bar)
    pd = plus_derivs or bm.plus_derivs
    md = minus_derivs or bm.minus_derivs
    chart = 0.5 * quad.integrate(p * s * _chart_wedge(bm) / bm.rho)
    metric = metric_pair(bm.g, chart_tensor(p, *pd, bm.grid), chart_tensor(s, *md, bm.grid), quad)
    out = PairingValue(chart, metric)
    if tol is not None and out.route_gap > tol * max(abs(chart), 1e-300):
        raise RouteMismatch(f"routes differ by {out.route_gap:.3e}")
    return out


def metric_pair(g: SymTensor, alpha: SymTensor, beta: SymTensor, quad: Quadrature) -> complex:
    """``(1/8) int <alpha, beta>_g dA_g`` over the octagon."""
    m = quad.mesh.inside
    sub = lambda t: SymTensor(*(np.where(m, quad.take(c), 0) for c in t.components()), quad.mesh.grid)
    # Euclidean filler off the mesh keeps the pointwise algebra defined
    gs = SymTensor(*(np.where(m, quad.take(c), f) for c, f in zip(g.components(), (0, 0.5, 0))),
                   quad.mesh.grid)
    return quad.mesh.integrate(sym2_inner(sub(alpha), sub(beta), gs) * area_density(gs)) / 8


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    labels: tuple = ()

    @property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values.min())

    def to_dict(self) -> dict:
        e = self.entries
        return {"re": e.real.tolist(), "im": e.imag.tolist(), "labels": list(self.labels),
                "singular_values": self.singular_values.tolist()}


def gram(bm: BersMetric, plus_vals, minus_vals, quad: Quadrature, route: str = "metric") -> GramMatrix:
    """``G_ij = <q_i, qbar_j>_g`` for coefficient arrays in the charts of ``bm``."""
    n, m = len(plus_vals), len(minus_vals)
    G = np.empty((n, m), dtype=complex)
    for i, p in enumerate(plus_vals):
        for j, s in enumerate(minus_vals):
            v = holo_wp_pair(bm, p, s, quad)
            G[i, j] = v.metric if route == "metric" else v.chart
    return GramMatrix(G)


def same_side_gram(bm: BersMetric, vals, side: str, quad: Quadrature) -> GramMatrix:
    """Pairings of differentials on one side (zero on a Bers metric)."""
    k = 0 if side == "plus" else 1
    derivs = (bm.plus_derivs, bm.minus_derivs)[k]
    tens = [chart_tensor(_vals(v), *derivs, bm.grid) for v in vals]
    G = np.array([[metric_pair(bm.g, a, b, quad) for b in tens] for a in tens])
    return GramMatrix(G)


def classical_wp_gram(phis, quad: Quadrature) -> np.ndarray:
    """``Re int phi_i conj(phi_j) / rho0 dx dy`` via harmonic Beltrami differentials."""
    z = quad.mesh.grid.centers()
    r0 = np.where(np.abs(z) < 1, rho0(np.where(np.abs(z) < 1, z, 0)), np.inf)
    ph = [quad.take(_vals(p)) for p in phis]
    W = np.array([[quad.mesh.integrate(a * np.conj(b) / r0) for b in ph] for a in ph])
    return W.real


def real_tangent_gram(bm: BersMetric, phis, quad: Quadrature) -> np.ndarray:
    """``<q_i + qbar_i, q_j + qbar_j>_g`` at a Fuchsian metric (metric route)."""
    tens = [SymTensor(_vals(p), 0, np.conj(_vals(p)), bm.grid) for p in phis]
    return np.array([[metric_pair(bm.g, a, b, quad) for b in tens] for a in tens])


def goldman(u, v, pair) -> complex:
    """``omega(u, v) = 8i (<u+, v-> - <v+, u->)`` for tangent pairs ``(plus, minus)``.

    ``pair(plus, minus)`` evaluates the mixed pairing; a zero component may be
    passed as ``None``.
    """
    def p(a, b):
        return 0j if a is None or b is None else complex(pair(a, b))
    return 8j * (p(u[0], v[1]) - p(v[0], u[1]))


@dataclass(frozen=True)
class McMullenRoutes:
    route_a: complex
    route_b: complex
    route_c: complex

    @property
    def spread(self) -> float:
        v = (self.route_a, self.route_b, self.route_c)
        return max(abs(x - y) for x in v for y in v)

    def to_dict(self) -> dict:
        return {k: [getattr(self, k).real, getattr(self, k).imag]
                for k in ("route_a", "route_b", "route_c")} | {"spread": self.spread}


def mcmullen_check(bm: BersMetric, phi_plus, sigma_minus, quad: Quadrature, fd_order: int = 6,
                   plus_chart=None) -> McMullenRoutes:
    """Three evaluations of ``-<q_plus, q_minus_bar>_g``.

    a. ``-1/2 q_minus_bar(beta_plus)`` integrated in the ``w`` chart with the
       stored chart derivatives;
    b. ``-1/2 q_plus(beta_minus)`` integrated in the ``Z`` chart, with chart
       derivatives from finite differences of ``plus_chart`` samples;
    c. the metric route ``-(1/8) int <alpha, beta>_g dA_g`` on the raw
       metric components.
    """
    p, s = _vals(phi_plus), _vals(sigma_minus)
    beta_p = deformation_beltrami(bm, p, "plus")
    route_a = -0.5 * pair_qd_beltrami(s, beta_p, quad, chart_jacobian(bm, "minus"))

    Z = bm.plus_chart if plus_chart is None else plus_chart
    h = bm.grid.spacing
    zz, zb = d_z(Z, h, fd_order), d_zbar(Z, h, fd_order)
    (wz, wb) = bm.minus_derivs
    jac = np.abs(zz) ** 2 - np.abs(zb) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):  # NaN stencil band, off the mesh
        dWbar_dZbar = (wb * zz - wz * zb) / jac
    beta_m = np.where(bm.inside & np.isfinite(dWbar_dZbar), s * dWbar_dZbar / bm.rho, 0)
    route_b = -0.5 * pair_qd_beltrami(p, beta_m, quad, jac)

    alpha = chart_tensor(p, *bm.plus_derivs, bm.grid)
    beta = chart_tensor(s, wz, wb, bm.grid)
    route_c = -metric_pair(bm.g, alpha, beta, quad)
    return McMullenRoutes(complex(route_a), complex(route_b), complex(route_c))


def basis_on_quadrature(rp: RayPoint, quad: Quadrature, radius: float = 10.0) -> np.ndarray:
    """Deformed basis ``tau_k(eta)`` on the fine grid, filled only at quadrature cells."""
    grid = rp.plus.grid
    m = quad.mesh.inside
    vals = rp.basis(radius)(quad.take(rp.eta)[m])
    out = np.zeros((len(vals),) + grid.shape, dtype=complex)
    sub = quad.take(np.arange(grid.nx * grid.ny).reshape(grid.shape))
    out.reshape(len(vals), -1)[:, sub[m]] = vals
    return out


def slice_constancy_check(q_a, phis, psi, s_values, n: int = 512, stride: int = 3,
                          radius: float = 10.0, fd_order: int = 6) -> tuple:
    """``<L, R>`` along the ray ``g0 + s q_a`` (plus chart frozen).

    ``L = q1`` (here ``phis[0]``).  At each sample the minus basis is the
    conjugated-group series ``tau_k(eta) detabar^2`` and ``R = sum c_k tau_k``
    is fixed by ``q1^j(beta_R) = q1^j(beta_{psibar})`` for every basis element
    ``q1^j`` (the Beltrami class of ``psibar`` at the base).  The value is
    then evaluated by the metric route with finite-difference chart
    derivatives.  Returns ``(values, reference)``: one complex value per
    ``s`` and the base value ``(1/2) q1(beta_{psibar})``.
    """
    out = []
    grid = Grid.square(1.05, n)
    base = fuchsian_bers(grid)
    quad = quadrature(grid, stride)
    z = base.points()
    P = [np.where(base.inside, ph(z), 0) for ph in phis]
    psibar = np.where(base.inside, np.conj(psi(z)), 0)
    beta0 = deformation_beltrami(base, psibar, "minus")
    b = np.array([pair_qd_beltrami(pj, beta0, quad) for pj in P])
    for s in s_values:
        rp = ray_point(q_a, s, n=n)
        bm = rp.plus
        tau = np.conj(basis_on_quadrature(rp, quad, radius)[:len(phis)])
        M = np.array([[pair_qd_beltrami(pj, deformation_beltrami(bm, tk, "minus"), quad)
                       for tk in tau] for pj in P])
        c = np.linalg.solve(M, b)
        R = np.tensordot(c, tau, axes=1)
        h = grid.spacing
        fd = (d_z(bm.minus_chart, h, fd_order), d_zbar(bm.minus_chart, h, fd_order))
        val = metric_pair(bm.g, chart_tensor(P[0], *bm.plus_derivs, grid),
                          chart_tensor(R, *fd, grid), quad)
        out.append(complex(val))
    return out, complex(0.5 * b[0])


def invariant_flow_field(q, peak: float = 0.5):
    """Gamma-equivariant vector field ``v = c (4/rho0) d_zbar u`` with ``u = |phi|^2 / rho0^2``.

    ``u`` is invariant, so ``v(g z) = g'(z) v(z)``.  The constant ``c`` makes
    the largest Euclidean speed over the octagon equal to ``peak``.  ``q`` must
    expose ``taylor``/``taylor_derivative`` (an
    :class:`~bersmetrics.autoforms.HQD`).  Outside its Taylor disk the field is
    continued by equivariance; :class:`FlowEscape` is raised off the unit disk.
    """
    from .autoforms import TAYLOR_RADIUS

    def local(z):
        phi, dphi = q.taylor(z), q.taylor_derivative(z)
        w = 1 - np.abs(z) ** 2
        dzb_u = phi * np.conj(dphi) * w ** 4 / 16 - np.abs(phi) ** 2 * z * w ** 3 / 4
        return w ** 2 * dzb_u  # 4 / rho0 = (1 - |z|^2)^2

    def raw(z):
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) >= 1) or not np.all(np.isfinite(z)):
            raise FlowEscape("flow left the disk")
        far = np.abs(z) > TAYLOR_RADIUS
        if not np.any(far):
            return local(z)
        out = np.empty(z.shape, dtype=complex)
        out[~far] = local(z[~far])
        # v(g z) = g'(z) v(z)
        w, (_, _, c, d) = reduce_to_domain(build_genus2_group(), z[far])
        out[far] = local(w) * (c * z[far] + d) ** 2
        return out

    probe = Grid.square(0.85, 96).centers()
    probe = probe[build_genus2_group().octagon.contains(probe)]
    c = peak / np.abs(raw(probe)).max()
    return lambda z: c * raw(z)


def flow_map(v, z, t: float, steps: int = 8):
    """Time-``t`` map of ``dz/dt = v(z)`` by classical RK4."""
    z = np.asarray(z, dtype=complex).copy()
    dt = t / steps
    for _ in range(steps):
        k1 = v(z)
        k2 = v(z + 0.5 * dt * k1)
        k3 = v(z + 0.5 * dt * k2)
        k4 = v(z + dt * k3)
        z = z + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return z


def isotopy_invariance_check(phi, psi, flow, t: float, n: int = 512, half_width: float = 0.95,
                             fd_order: int = 6, steps: int = 8):
    """Pairing ``<q1, q2bar>_{g0}`` before and after pulling all data back by the flow.

    Returns ``(before, after)``.  The pullbacks of ``q1 = phi dz^2``,
    ``q2bar = psibar dzbar^2`` and ``g0`` are formed from the flow map and its
    finite-difference derivatives, then paired by the metric route.
    """
    grid = Grid.square(half_width, n)
    quad = quadrature(grid, 1)
    z = grid.centers()
    zin = np.where(np.abs(z) < 0.95, z, 0)
    r0 = rho0(zin)
    zero = np.zeros(grid.shape, dtype=complex)
    g0 = SymTensor(zero, 0.5 * r0, zero, grid)
    before = metric_pair(g0, SymTensor(phi(zin), 0, 0, grid),
                         SymTensor(0, 0, np.conj(psi(zin)), grid), quad)
    F = flow_map(flow, np.where(quad.mesh.inside | _halo(quad.mesh.inside, fd_order), zin, 0), t, steps)
    h = grid.spacing
    a, b = d_z(F, h, fd_order), d_zbar(F, h, fd_order)
    rf = rho0(F)
    g = SymTensor(rf * a * np.conj(b), 0.5 * rf * (np.abs(a) ** 2 + np.abs(b) ** 2),
                  rf * b * np.conj(a), grid)
    alpha = chart_tensor(phi(F), a, b, grid)
    beta = chart_tensor(np.conj(psi(F)), np.conj(b), np.conj(a), grid)
    after = metric_pair(g, alpha, beta, quad)
    return complex(before), complex(after)


def _halo(mask, width):
    from scipy import ndimage
    return ndimage.binary_dilation(mask, iterations=width // 2 + 1)
