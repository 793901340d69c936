"""Complex metrics on a planar grid.

A complex metric is a complex-valued symmetric bilinear form stored through
its components in the frame ``(d/dz, d/dzbar)``::

    g11 = g(dz, dz),  g12 = g(dz, dzbar),  g22 = g(dzbar, dzbar)

The symmetric product is ``a.b = (a(x)b + b(x)a) / 2``.  With it the metric
``rho dz.dwbar`` has ``g11 = rho dw/dz``, ``g12 = rho dwbar/dzbar / 2`` and
``g22 = 0``, and the hyperbolic disk metric has ``g12 = rho0 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoincidentValues, DegenerateMetric, OrientationViolation
from .fields import Grid, ScalarField, d_z, d_zbar, interior_mask

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class SymTensor:
    """Symmetric complex 2-tensor with components in the (dz, dzbar) frame."""

    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    grid: Grid

    def __post_init__(self):
        shape = self.grid.shape
        for name in ("g11", "g12", "g22"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=complex), shape)
            object.__setattr__(self, name, arr)

    def components(self):
        return self.g11, self.g12, self.g22

    def __add__(self, other: "SymTensor") -> "SymTensor":
        return type(self)(self.g11 + other.g11, self.g12 + other.g12,
                          self.g22 + other.g22, self.grid)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "SymTensor":
        return type(self)(c * self.g11, c * self.g12, c * self.g22, self.grid)

    def as_fields(self, chart: str = "z"):
        return tuple(ScalarField(np.array(c), self.grid, chart) for c in self.components())

    def to_dict(self) -> dict:
        return {k: f.to_dict() for k, f in zip(("g11", "g12", "g22"), self.as_fields())}


class ComplexMetricField(SymTensor):
    """A nondegenerate :class:`SymTensor`; see :func:`check_nondegenerate`."""


def quadratic_differential(phi: np.ndarray, grid: Grid, side: str = "plus") -> SymTensor:
    """The tensor ``phi dz^2`` (plus) or ``phi dzbar^2`` (minus)."""
    zero = np.zeros(grid.shape, dtype=complex)
    if side == "plus":
        return SymTensor(phi, zero, zero, grid)
    if side == "minus":
        return SymTensor(zero, zero, phi, grid)
    raise ValueError(f"unknown side {side!r}")


def determinant(g: SymTensor) -> np.ndarray:
    return g.g11 * g.g22 - g.g12 ** 2


def check_nondegenerate(g: SymTensor, mask=None) -> None:
    det = determinant(g)
    scale = np.maximum.reduce([np.abs(g.g11), np.abs(g.g12), np.abs(g.g22)])
    bad = np.abs(det) < DEGENERACY_TOL * scale ** 2
    if mask is not None:
        bad &= mask
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DegenerateMetric(f"degenerate metric at cell {idx}")


def conjugate_metric(g: SymTensor) -> SymTensor:
    """``gbar(X, Y) = conj(g(Xbar, Ybar))``: swaps and conjugates g11, g22."""
    return type(g)(np.conj(g.g22), np.conj(g.g12), np.conj(g.g11), g.grid)


def _principal_root(g: SymTensor) -> np.ndarray:
    """``sqrt(g12^2 - g11 g22)`` on the branch closest to ``g12``."""
    d = np.sqrt(g.g12 ** 2 - g.g11 * g.g22 + 0j)
    flip = (np.conj(g.g12) * d).real < 0
    return np.where(flip, -d, d)


@dataclass(frozen=True)
class IsotropicRatioPair:
    """Ratios ``r = alpha/beta`` of isotropic vectors ``alpha dz + beta dzbar``.

    ``r_minus`` has the smaller modulus.  ``r_plus`` may be ``inf`` when
    ``g11 = 0`` (the direction ``d/dz`` itself is isotropic).
    """

    r_minus: np.ndarray
    r_plus: np.ndarray
    inv_r_plus: np.ndarray

    def residual(self, g: SymTensor) -> float:
        """Largest relative residual of the isotropy quadratic over both roots."""
        scale = np.maximum.reduce([np.abs(g.g11), np.abs(g.g12), np.abs(g.g22)])
        r = self.r_minus
        res1 = np.abs(g.g11 * r ** 2 + 2 * g.g12 * r + g.g22) / scale
        s = self.inv_r_plus  # evaluate the reversed quadratic at 1/r
        res2 = np.abs(g.g11 + 2 * g.g12 * s + g.g22 * s ** 2) / scale
        return float(max(res1.max(), res2.max()))


def isotropic_ratios(g: SymTensor) -> IsotropicRatioPair:
    check_nondegenerate(g)
    q = -(g.g12 + _principal_root(g))
    r_minus = g.g22 / q
    inv_r_plus = g.g11 / q
    with np.errstate(divide="ignore"):
        r_plus = np.where(inv_r_plus == 0, np.inf, 1.0 / np.where(inv_r_plus == 0, 1, inv_r_plus))
    return IsotropicRatioPair(r_minus, r_plus, inv_r_plus)


@dataclass(frozen=True)
class PositivityCertificate:
    positive: bool
    margin: float
    worst_index: tuple
    margin_field: np.ndarray

    def __bool__(self):
        return self.positive


def is_positive(g: SymTensor, mask=None) -> PositivityCertificate:
    """Check that one isotropic ratio lies inside and one outside the unit circle.

    The margin at a cell is ``min(1 - |r_minus|, 1 - 1/|r_plus|)``.  The
    metric is positive iff the minimum margin over the (masked) cells is > 0.
    """
    ratios = isotropic_ratios(g)
    margin = np.minimum(1 - np.abs(ratios.r_minus), 1 - np.abs(ratios.inv_r_plus))
    m = np.where(mask, margin, np.inf) if mask is not None else margin
    idx = np.unravel_index(int(np.argmin(m)), m.shape)
    worst = float(m[idx])
    return PositivityCertificate(worst > 0, worst, tuple(int(i) for i in idx), margin)


def area_density(g: SymTensor) -> np.ndarray:
    """Density ``a`` with ``dA_g = a dx dy``; equals ``2 g12`` when ``g22 = 0``."""
    check_nondegenerate(g)
    return 2.0 * _principal_root(g)


def area_form(g: SymTensor, chart: str = "z") -> ScalarField:
    return ScalarField(area_density(g), g.grid, chart)


def sym2_inner(alpha: SymTensor, beta: SymTensor, g: SymTensor) -> np.ndarray:
    """Pointwise ``alpha_ij beta_kl g^ik g^jl``."""
    det = determinant(g)
    inv11, inv12, inv22 = g.g22 / det, -g.g12 / det, g.g11 / det
    a = [[alpha.g11, alpha.g12], [alpha.g12, alpha.g22]]
    b = [[beta.g11, beta.g12], [beta.g12, beta.g22]]
    gi = [[inv11, inv12], [inv12, inv22]]
    # contract alpha with g^-1 on both slots, then pair with beta
    out = 0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    out = out + a[i][j] * b[k][l] * gi[i][k] * gi[j][l]
    return out


def _wirtinger(h, order):
    return (lambda f: d_z(f, h, order), lambda f: d_zbar(f, h, order))


def christoffel(g: SymTensor, order: int = 4):
    """``Gamma[k][i][j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)``, index 0 = z, 1 = zbar."""
    D = _wirtinger(g.grid.spacing, order)
    G = [[g.g11, g.g12], [g.g12, g.g22]]
    det = determinant(g)
    Gi = [[g.g22 / det, -g.g12 / det], [-g.g12 / det, g.g11 / det]]
    dG = [[[D[k](G[i][j]) for k in range(2)] for j in range(2)] for i in range(2)]
    return [[[sum(0.5 * Gi[k][l] * (dG[j][l][i] + dG[i][l][j] - dG[i][j][l]) for l in range(2))
              for j in range(2)] for i in range(2)] for k in range(2)]


def divergence(T: SymTensor, g: SymTensor, order: int = 4):
    """Components ``(div T)_j = g^{ik} nabla_i T_kj`` for ``j = z, zbar``; NaN on the outer band."""
    D = _wirtinger(g.grid.spacing, order)
    Gam = christoffel(g, order)
    det = determinant(g)
    Gi = [[g.g22 / det, -g.g12 / det], [-g.g12 / det, g.g11 / det]]
    Tm = [[T.g11, T.g12], [T.g12, T.g22]]
    out = []
    for j in range(2):
        acc = 0
        for i in range(2):
            for k in range(2):
                cov = D[i](Tm[k][j])
                for m in range(2):
                    cov = cov - Gam[m][i][k] * Tm[m][j] - Gam[m][i][j] * Tm[k][m]
                acc = acc + Gi[i][k] * cov
        out.append(acc)
    return out


def trace(T: SymTensor, g: SymTensor):
    det = determinant(g)
    return (g.g22 * T.g11 - 2 * g.g12 * T.g12 + g.g11 * T.g22) / det


@dataclass(frozen=True)
class CurvatureField:
    values: np.ndarray  # NaN outside the interior mask
    interior: np.ndarray
    grid: Grid

    def max_deviation(self, target: float = -1.0, mask=None) -> float:
        m = self.interior if mask is None else (self.interior & mask)
        return float(np.max(np.abs(self.values[m] - target)))


def curvature_field(g: SymTensor, order: int = 4) -> CurvatureField:
    """Gaussian curvature by complex Christoffel symbols in the (z, zbar) frame.

    ``K = g(R(dz, dzb) dzb, dz) / (g11 g22 - g12^2)`` with
    ``R(X, Y) = [nabla_X, nabla_Y]`` and centred differences of the given
    order applied twice.  A band of ``order`` cells on each side is excluded.
    """
    check_nondegenerate(g)
    D = _wirtinger(g.grid.spacing, order)
    G = [[g.g11, g.g12], [g.g12, g.g22]]
    det = determinant(g)
    Gam = christoffel(g, order)
    i, j, k = 0, 1, 1
    V = []
    for l in range(2):
        term = D[i](Gam[l][j][k]) - D[j](Gam[l][i][k])
        for m in range(2):
            term = term + Gam[m][j][k] * Gam[l][i][m] - Gam[m][i][k] * Gam[l][j][m]
        V.append(term)
    num = V[0] * G[0][0] + V[1] * G[1][0]
    K = num / det
    mask = interior_mask(g.grid.shape, order)
    K = np.where(mask, K, np.nan)
    return CurvatureField(K, mask, g.grid)


def pullback_G_metric(f1, f2bar, grid: Grid, derivatives=None, order: int = 4) -> ComplexMetricField:
    """Pull back ``-4 (z1 - z2)^-2 dz1.dz2`` along ``(f1, f2bar)``.

    Parameters
    ----------
    f1, f2bar : ndarray
        Samples of the developing pair on ``grid``.
    derivatives : tuple, optional
        ``(dz f1, dzb f1, dz f2bar, dzb f2bar)``.  Finite differences of the
        given order are used when omitted (the outer band is then NaN).
    """
    f1 = np.asarray(f1, dtype=complex)
    f2bar = np.asarray(f2bar, dtype=complex)
    diff = f1 - f2bar
    scale = max(np.abs(f1).max(), np.abs(f2bar).max(), 1.0)
    if np.any(np.abs(diff) < 1e-14 * scale):
        raise CoincidentValues("f1 and f2bar coincide at some cell")
    if derivatives is None:
        h = grid.spacing
        derivatives = (d_z(f1, h, order), d_zbar(f1, h, order),
                       d_z(f2bar, h, order), d_zbar(f2bar, h, order))
    a1, b1, a2, b2 = derivatives
    ok = np.isfinite(a1)
    if np.any((np.abs(b1) >= np.abs(a1)) & ok):
        raise OrientationViolation("f1 is not orientation preserving")
    if np.any((np.abs(a2) >= np.abs(b2)) & ok):
        raise OrientationViolation("f2bar is not orientation reversing")
    c = -4.0 / diff ** 2
    return ComplexMetricField(c * a1 * a2, 0.5 * c * (a1 * b2 + b1 * a2), c * b1 * b2, grid)


def bers_metric_from_rho(rho, dz_wbar, dzb_wbar, grid: Grid) -> ComplexMetricField:
    """Components of ``rho dz.dwbar``."""
    zero = np.zeros(grid.shape, dtype=complex)
    return ComplexMetricField(rho * dz_wbar, 0.5 * rho * dzb_wbar, zero, grid)
