import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bersmetrics.epstein import (ImmersionDataPoint, bers_from_immersion, bers_from_infinity,
                                 conformal_coframe, conformal_metric_field, data_at_infinity,
                                 gauss_codazzi_residual_at_infinity, gaussian_curvature, qd_matrix,
                                 random_admissible, random_nearly_fuchsian,
                                 reconstruct_from_infinity, rotation, shift_check)
from bersmetrics.errors import NotPositiveDefinite, SingularShift
from bersmetrics.fields import Grid
from bersmetrics.fuchsia import rho0

seeds = st.integers(0, 2 ** 31)


@given(seed=seeds)
def test_rotation_is_an_isometric_complex_structure(seed):
    p = random_nearly_fuchsian(np.random.default_rng(seed))
    J = rotation(p.I)
    np.testing.assert_allclose(J @ J, -np.eye(2), atol=1e-10)
    np.testing.assert_allclose(J.T @ p.I @ J, p.I, atol=1e-10)
    u = np.array([1.0, 0.0])
    assert abs(u @ p.I @ (J @ u)) < 1e-10
    # positively oriented: (u, Ju) has positive determinant
    assert np.linalg.det(np.column_stack([u, J @ u])) > 0


@given(seed=seeds)
def test_round_trip_and_bers_metric(seed):
    p = random_nearly_fuchsian(np.random.default_rng(seed))
    assert p.self_adjoint_residual() < 1e-10 and p.nearly_fuchsian()
    d = data_at_infinity(p)
    back = reconstruct_from_infinity(d.Istar, d.Bstar)
    np.testing.assert_allclose(back.I, p.I, atol=1e-9 * np.abs(p.I).max())
    np.testing.assert_allclose(back.B, p.B, atol=1e-9)
    g = bers_from_immersion(p)
    np.testing.assert_allclose(bers_from_infinity(d), g, atol=1e-9 * np.abs(g).max())
    # the Bers metric is complex symmetric with real part I - II B ... and
    # its conjugate corresponds to the opposite normal
    np.testing.assert_allclose(g, g.T, atol=1e-12 * np.abs(g).max())
    gm = bers_from_immersion(ImmersionDataPoint(p.I, -p.B))
    np.testing.assert_allclose(gm, np.conj(g), atol=1e-12 * np.abs(g).max())


def test_totally_geodesic_point():
    # B = 0: I* = I/2, B* = id, and g = I
    I = np.array([[2.0, 0.3], [0.3, 1.0]])
    p = ImmersionDataPoint(I, np.zeros((2, 2)))
    d = data_at_infinity(p)
    np.testing.assert_allclose(d.Istar, I / 2)
    np.testing.assert_allclose(d.Bstar, np.eye(2))
    np.testing.assert_allclose(bers_from_immersion(p), I)


def test_errors():
    with pytest.raises(NotPositiveDefinite):
        ImmersionDataPoint(-np.eye(2), np.zeros((2, 2)))
    with pytest.raises(SingularShift):
        data_at_infinity(ImmersionDataPoint(np.eye(2), -np.eye(2)))


@given(seed=seeds)
def test_conformal_coframe(seed):
    Istar, _, phi = random_admissible(np.random.default_rng(seed))
    c = conformal_coframe(Istar)
    J = rotation(Istar)
    np.testing.assert_allclose(c @ J, 1j * c, atol=1e-10 * np.abs(c).max())
    # c is isotropic and |c|^2 recovers I*
    np.testing.assert_allclose(c @ np.linalg.inv(Istar) @ c, 0, atol=1e-10)
    np.testing.assert_allclose(np.outer(c, np.conj(c)).real, Istar, atol=1e-10 * np.abs(Istar).max())
    q = qd_matrix(Istar, phi)
    np.testing.assert_allclose(np.trace(np.linalg.inv(Istar) @ q), 0, atol=1e-10)


@given(seed=seeds)
def test_shift_by_quadratic_differential(seed):
    res = shift_check(*random_admissible(np.random.default_rng(seed)))
    assert res.residual < 1e-10


def _rho0_field(n=96, w=0.5):
    g = Grid.square(w, n)
    return g, rho0(g.centers())


def test_model_curvatures():
    g, r = _rho0_field()
    K = gaussian_curvature(conformal_metric_field(r), g.spacing)
    m = np.isfinite(K)
    assert np.abs(K[m] + 1).max() < 1e-5
    z = g.centers()
    Ks = gaussian_curvature(conformal_metric_field(4 / (1 + np.abs(z) ** 2) ** 2), g.spacing)
    assert np.abs(Ks[m] - 1).max() < 1e-5


def test_gauss_codazzi_at_infinity_of_a_totally_geodesic_plane():
    # I = hyperbolic, B = 0 gives I* = I/2 and B* = id: tr B* + K* = 2 - 2 = 0
    g, r = _rho0_field()
    Istar = conformal_metric_field(r / 2)
    Bstar = np.broadcast_to(np.eye(2), r.shape + (2, 2)).copy()
    res = gauss_codazzi_residual_at_infinity(Istar, Bstar, g.spacing)
    gauss, cod = res.max()
    assert gauss < 1e-5 and cod < 1e-12
    # a wrong B* is detected
    bad = gauss_codazzi_residual_at_infinity(Istar, 2 * Bstar, g.spacing)
    assert bad.max()[0] > 1
