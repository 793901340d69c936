"""Immersion data and data at infinity, pointwise and on grids.

A point carries the first fundamental form ``I`` (2x2 SPD, real
coordinates ``x, y``) and the shape operator ``B`` (``I``-self-adjoint).
Bilinear forms are stored as matrices ``M`` with ``form(u, v) = u^T M v``.
``J`` is the rotation by +90 degrees for ``I`` compatible with the
orientation of ``(x, y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, SingularShift
from .fields import _partial

_ID = np.eye(2)


def rotation(I: np.ndarray) -> np.ndarray:
    """``J`` with ``J^2 = -id``, ``I(Ju, Jv) = I(u, v)`` and ``I(u, Ju) = 0``, oriented."""
    I = np.asarray(I, float)
    det = I[..., 0, 0] * I[..., 1, 1] - I[..., 0, 1] ** 2
    s = np.sqrt(det)
    J = np.empty(I.shape)
    J[..., 0, 0] = -I[..., 0, 1] / s
    J[..., 0, 1] = -I[..., 1, 1] / s
    J[..., 1, 0] = I[..., 0, 0] / s
    J[..., 1, 1] = I[..., 0, 1] / s
    return J


def _check_spd(M, name):
    ev = np.linalg.eigvalsh(M)
    if ev.min() <= 0:
        raise NotPositiveDefinite(f"{name} is not positive definite (eigenvalue {ev.min():.3e})")


def _solve_shift(A, name):
    if abs(np.linalg.det(A)) < 1e-14 * max(1.0, np.abs(A).max() ** 2):
        raise SingularShift(f"{name} is singular")
    return np.linalg.inv(A)


@dataclass(frozen=True)
class ImmersionDataPoint:
    I: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "I", np.asarray(self.I, float))
        object.__setattr__(self, "B", np.asarray(self.B, float))
        _check_spd(self.I, "I")

    @property
    def J(self) -> np.ndarray:
        return rotation(self.I)

    @property
    def II(self) -> np.ndarray:
        return self.I @ self.B

    def self_adjoint_residual(self) -> float:
        return float(np.abs(self.I @ self.B - self.B.T @ self.I).max())

    def nearly_fuchsian(self) -> bool:
        return bool(np.abs(np.linalg.eigvals(self.B)).max() < 1)

    def to_dict(self) -> dict:
        return {"I": self.I.tolist(), "B": self.B.tolist()}


@dataclass(frozen=True)
class InfinityData:
    Istar: np.ndarray
    Bstar: np.ndarray
    IIstar: np.ndarray

    def to_dict(self) -> dict:
        return {"Istar": self.Istar.tolist(), "Bstar": self.Bstar.tolist(),
                "IIstar": self.IIstar.tolist()}


def data_at_infinity(p: ImmersionDataPoint, sign: str = "plus") -> InfinityData:
    """``I* = (1/2) I((id+B).,(id+B).)``, ``B* = (id+B)^-1 (id-B)``, ``II* = I*(B*.,.)``.

    ``sign="minus"`` replaces ``B`` by ``-B``.
    """
    B = p.B if sign == "plus" else -p.B
    A = _ID + B
    Istar = 0.5 * A.T @ p.I @ A
    Bstar = _solve_shift(A, "id + B") @ (_ID - B)
    IIstar = Istar @ Bstar
    return InfinityData(Istar, Bstar, 0.5 * (IIstar + IIstar.T))


def reconstruct_from_infinity(Istar, Bstar) -> ImmersionDataPoint:
    """Inverse of :func:`data_at_infinity` (plus side)."""
    Istar, Bstar = np.asarray(Istar, float), np.asarray(Bstar, float)
    A = _ID + Bstar
    B = (_ID - Bstar) @ _solve_shift(A, "id + B*")
    I = 0.5 * A.T @ Istar @ A
    return ImmersionDataPoint(I, B)


def bers_from_immersion(p: ImmersionDataPoint) -> np.ndarray:
    """``g = I((id - iJB).,(id - iJB).)`` as a complex symmetric matrix."""
    T = _ID - 1j * p.J @ p.B
    return T.T @ p.I @ T


def bers_from_infinity(d: InfinityData) -> np.ndarray:
    """``2 II* - i (I*(B*., J*.) + I*(J*., B*.))``."""
    J = rotation(d.Istar)
    M = d.Bstar.T @ d.Istar @ J
    return 2 * d.IIstar - 1j * (M + M.T)


def conformal_coframe(Istar) -> np.ndarray:
    """Row vector ``c`` of a holomorphic coordinate for ``I*``: ``c J* = i c``."""
    L = np.linalg.cholesky(np.asarray(Istar, float))
    return np.array([1.0, 1j]) @ L.T


def qd_matrix(Istar, phi: complex) -> np.ndarray:
    """Complex symmetric matrix of ``phi dzeta^2`` in the conformal coframe of ``I*``."""
    c = conformal_coframe(Istar)
    return phi * np.outer(c, c)


@dataclass(frozen=True)
class ShiftResult:
    residual: float
    g: np.ndarray
    g_shifted: np.ndarray
    q: np.ndarray

    def to_dict(self) -> dict:
        return {"residual": self.residual}


def shift_check(Istar, IIstar, phi: complex) -> ShiftResult:
    """Compare the Bers metrics of the immersions with data ``(I*, II*)`` and
    ``(I*, II* + Re q)``; the second exceeds the first by ``2q``."""
    Istar, IIstar = np.asarray(Istar, float), np.asarray(IIstar, float)
    q = qd_matrix(Istar, phi)
    shifted = IIstar + q.real
    _check_spd(IIstar, "II*")
    _check_spd(shifted, "II* + Re q")
    Iinv = np.linalg.inv(Istar)
    g0 = bers_from_immersion(reconstruct_from_infinity(Istar, Iinv @ IIstar))
    g1 = bers_from_immersion(reconstruct_from_infinity(Istar, Iinv @ shifted))
    res = float(np.abs(g1 - g0 - 2 * q).max() / max(1.0, np.abs(g0).max()))
    return ShiftResult(res, g0, g1, q)


def random_admissible(rng: np.random.Generator, spread: float = 0.5):
    """Random ``(I*, II*, phi)`` with ``II*`` and ``II* + Re q`` positive definite."""
    while True:
        A = rng.normal(size=(2, 2))
        Istar = A @ A.T + 0.2 * _ID
        Bmat = rng.normal(size=(2, 2))
        IIstar = Bmat @ Bmat.T + 0.2 * _ID
        phi = spread * complex(rng.normal(), rng.normal())
        shifted = IIstar + qd_matrix(Istar, phi).real
        if np.linalg.eigvalsh(shifted).min() > 1e-3:
            return Istar, IIstar, phi


def random_nearly_fuchsian(rng: np.random.Generator) -> ImmersionDataPoint:
    """``I`` SPD and ``B = I^-1 S`` with eigenvalues in ``(-1, 1)``."""
    A = rng.normal(size=(2, 2))
    I = A @ A.T + 0.2 * _ID
    L = np.linalg.cholesky(I)
    # self-adjoint for I: B = L^-T D L^T with D symmetric, |eig| < 1
    Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    D = Q @ np.diag(rng.uniform(-0.95, 0.95, 2)) @ Q.T
    B = np.linalg.solve(L.T, D @ L.T)
    return ImmersionDataPoint(I, B)


# ---- field level ----------------------------------------------------------

def _christoffel(M, h, order):
    """``Gamma[k, i, j]`` of a real metric field ``M[..., 2, 2]`` (indices last)."""
    dM = (_dx(M, h, order), _dy(M, h, order))  # dM[l][..., i, j] = d_l M_ij
    inv = np.linalg.inv(M)
    gam = np.empty((2, 2, 2) + M.shape[:-2])
    for k in range(2):
        for i in range(2):
            for j in range(2):
                s = 0
                for l in range(2):
                    s = s + 0.5 * inv[..., k, l] * (dM[i][..., l, j] + dM[j][..., l, i]
                                                     - dM[l][..., i, j])
                gam[k, i, j] = s
    return gam


def _dx(F, h, order, grid_axes=(0, 1)):
    """x-derivative of a field whose grid axes are ``grid_axes`` (y, x)."""
    return _partial(F, h, order, axis=grid_axes[1])


def _dy(F, h, order, grid_axes=(0, 1)):
    return _partial(F, h, order, axis=grid_axes[0])


def gaussian_curvature(M, h, order: int = 6) -> np.ndarray:
    """Curvature of the real metric field ``M[ny, nx, 2, 2]`` by finite differences."""
    gam = _christoffel(M, h, order)
    d1 = _dx(gam, h, order, (3, 4))
    d2 = _dy(gam, h, order, (3, 4))
    # R^k_{212} = d1 G^k_22 - d2 G^k_12 + G^k_1m G^m_22 - G^k_2m G^m_12
    R = np.empty((2,) + M.shape[:-2])
    for k in range(2):
        R[k] = d1[k, 1, 1] - d2[k, 0, 1] + sum(gam[k, 0, m] * gam[m, 1, 1] - gam[k, 1, m] * gam[m, 0, 1]
                                               for m in range(2))
    R1212 = M[..., 0, 0] * R[0] + M[..., 0, 1] * R[1]
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] ** 2
    return R1212 / det


@dataclass(frozen=True)
class GaussCodazziResidual:
    gauss: np.ndarray
    codazzi: np.ndarray

    def max(self, mask=None):
        m = np.isfinite(self.gauss) & np.isfinite(self.codazzi)
        if mask is not None:
            m &= mask
        return float(np.abs(self.gauss[m]).max()), float(np.abs(self.codazzi[m]).max())


def gauss_codazzi_residual_at_infinity(Istar, Bstar, h: float, order: int = 6) -> GaussCodazziResidual:
    """``tr B* + K*`` and ``|d^nabla B*|`` (Euclidean size of the vector
    ``(nabla_x B*) e_y - (nabla_y B*) e_x``) on a grid with spacing ``h``.

    Fields have shape ``(ny, nx, 2, 2)``; ``Bstar[..., k, i]`` is the
    ``e_k`` component of ``B* e_i``.  Band cells are NaN.
    """
    Istar = np.asarray(Istar, float)
    Bstar = np.asarray(Bstar, float)
    K = gaussian_curvature(Istar, h, order)
    gauss = np.trace(Bstar, axis1=-2, axis2=-1) + K
    gam = _christoffel(Istar, h, order)
    dB = [_dx(Bstar, h, order), _dy(Bstar, h, order)]
    cod = np.zeros((2,) + Istar.shape[:-2])
    for k in range(2):
        cod[k] = dB[0][..., k, 1] - dB[1][..., k, 0]
        for m in range(2):
            cod[k] += gam[k, 0, m] * Bstar[..., m, 1] - gam[k, 1, m] * Bstar[..., m, 0]
    return GaussCodazziResidual(gauss, np.hypot(cod[0], cod[1]))


def conformal_metric_field(rho) -> np.ndarray:
    """``rho |dz|^2`` as a real matrix field."""
    rho = np.asarray(rho, float)
    M = np.zeros(rho.shape + (2, 2))
    M[..., 0, 0] = rho
    M[..., 1, 1] = rho
    return M


def qd_real_part_field(phi) -> np.ndarray:
    """``Re(phi dz^2)`` as a real matrix field."""
    phi = np.asarray(phi, complex)
    M = np.empty(phi.shape + (2, 2))
    M[..., 0, 0] = phi.real
    M[..., 1, 1] = -phi.real
    M[..., 0, 1] = M[..., 1, 0] = -phi.imag
    return M
