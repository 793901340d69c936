import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bersmetrics.autoforms import QuadraticDifferentialField
from bersmetrics.errors import ChartMismatch, CriticalPoint, PoleEncountered
from bersmetrics.fields import Grid, ScalarField
from bersmetrics.schwarz import (ProjectiveChartField, develop_from_schwarzian, fuchsian_schwarzian,
                                 schw_of_deformation, schwarzian, schwarzian_at, taylor_derivatives)

cplx = st.complex_numbers(min_magnitude=0.2, max_magnitude=3, allow_nan=False, allow_infinity=False)
PTS = np.array([0.1 + 0.2j, -0.3j, 0.25])


def test_taylor_derivatives_of_exponential():
    d = taylor_derivatives(np.exp, PTS, 3)
    for k in range(4):
        np.testing.assert_allclose(d[k], np.exp(PTS), rtol=1e-12)


@given(a=cplx, b=cplx, c=cplx)
def test_mobius_maps_have_zero_schwarzian(a, b, c):
    d = 2.0 + 1j  # keeps the pole away from the sample points
    f = lambda z: (a * z + b) / (c * z + d * abs(c) * 3)
    if abs(a * d * abs(c) * 3 - b * c) < 1e-3:
        return
    assert np.abs(schwarzian_at(f, PTS)).max() < 1e-8


@pytest.mark.parametrize("f, s", [
    (np.exp, lambda z: -0.5 + 0 * z),
    (np.tan, lambda z: 2 + 0 * z),
    (lambda z: (z + 2) ** 3, lambda z: -4 / (z + 2) ** 2),
    (lambda z: np.log(z + 2), lambda z: 0.5 / (z + 2) ** 2),
])
def test_schwarzian_of_classical_functions(f, s):
    # S(z^a) = (1 - a^2) / (2 z^2), S(exp) = -1/2, S(tan) = 2
    np.testing.assert_allclose(schwarzian_at(f, PTS), s(PTS), rtol=1e-9, atol=1e-9)


def test_chain_rule_cocycle():
    f, g = np.exp, lambda z: z + 0.3 * z ** 2
    dg = lambda z: 1 + 0.6 * z
    lhs = schwarzian_at(lambda z: f(g(z)), PTS)
    rhs = schwarzian_at(f, g(PTS)) * dg(PTS) ** 2 + schwarzian_at(g, PTS)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9)


def test_critical_point_is_reported():
    with pytest.raises(CriticalPoint):
        schwarzian_at(lambda z: z ** 2, np.array([0j]))


def test_grid_routes_agree():
    grid = Grid.square(0.4, 96)
    f = ProjectiveChartField.from_function(lambda z: np.exp(z) + 0.1 * z ** 3, grid)
    spectral = schwarzian(f, "spectral")
    fd = schwarzian(f, "fd")
    m = fd.meta["valid"]
    assert np.abs(spectral.values - fd.values)[m].max() < 1e-5
    assert spectral.meta["method"] == "spectral" and fd.meta["method"] == "fd"
    assert f.holomorphy_residual() < 1e-8
    with pytest.raises(ChartMismatch):
        schwarzian(ProjectiveChartField(f.f), "spectral")


def test_developing_map_of_constant_schwarzian_is_tangent():
    # s = 2 with f(0) = 0, f'(0) = 1 develops to tan
    grid = Grid.square(0.6, 64)
    dev = develop_from_schwarzian(lambda z: 2 + 0 * z, grid)
    z = grid.centers()
    np.testing.assert_allclose(dev.chart.f.values, np.tan(z), rtol=1e-8)
    assert dev.pole_free.all()


def test_pole_detection():
    grid = Grid.square(2.0, 64)
    dev = develop_from_schwarzian(lambda z: 2 + 0 * z, grid)
    assert not dev.pole_free.all()
    z = grid.centers()
    # the excluded cells sit next to the poles of tan at +-pi/2
    bad = z[~dev.pole_free]
    assert np.abs(np.abs(bad.real) - np.pi / 2).max() < 0.1
    with pytest.raises(PoleEncountered) as err:
        develop_from_schwarzian(lambda z: 2 + 0 * z, grid, strict=True)
    assert err.value.partial.pole_free.sum() == dev.pole_free.sum()


def test_round_trip_through_developing_map():
    s = lambda z: 0.3 - 0.5j * z + 0.2 * z ** 2
    grid = Grid.square(0.5, 128)
    back = schwarzian(develop_from_schwarzian(s, grid).chart, "fd")
    m = back.meta["valid"]
    assert np.abs(back.values - s(grid.centers()))[m].max() < 1e-6


def test_affine_deformation_law():
    grid = Grid.square(0.5, 8)
    s0 = fuchsian_schwarzian(grid)
    q = QuadraticDifferentialField(ScalarField(grid.centers(), grid, "z"), "plus", "q")
    s1 = schw_of_deformation(s0, q, "plus", 0.4)
    np.testing.assert_allclose(s1.values, -0.2 * grid.centers())
    assert s1.meta["provenance"]["deformations"] == [["plus", "q", 0.4]]
    s2 = schw_of_deformation(s1, q, "plus", -0.4)
    assert np.abs(s2.values).max() < 1e-15
    assert len(s2.meta["provenance"]["deformations"]) == 2
    with pytest.raises(ChartMismatch):
        schw_of_deformation(s0, q.conj(), "plus", 0.1)
    with pytest.raises(ChartMismatch):
        schw_of_deformation(fuchsian_schwarzian(grid, "minus"), q, "minus", 0.1)
