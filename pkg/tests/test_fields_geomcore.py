import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bersmetrics.errors import CoincidentValues, DegenerateMetric, OrientationViolation
from bersmetrics.fields import Grid, ScalarField, d_z, d_zbar, interior_mask, partial_x, partial_y
from bersmetrics.fuchsia import rho0
from bersmetrics.geomcore import (ComplexMetricField, SymTensor, area_density, check_nondegenerate,
                                  conjugate_metric, curvature_field, is_positive, isotropic_ratios,
                                  pullback_G_metric, quadratic_differential)

coef = st.floats(-3, 3, allow_nan=False)


def test_grid_centres_and_roundtrip():
    g = Grid.square(1.0, 4)
    z = g.centers()
    assert z.shape == (4, 4)
    assert z[0, 0] == complex(-0.75, -0.75)
    assert z[3, 0] == complex(-0.75, 0.75)
    assert Grid.from_dict(g.to_dict()) == g
    assert g.subgrid(2) == Grid(g.origin, 1.0, 2, 2)


def test_scalar_field_validation_and_roundtrip(tmp_path):
    g = Grid.square(1.0, 3)
    with pytest.raises(ValueError):
        ScalarField(np.zeros((2, 3)), g)
    with pytest.raises(ValueError):
        ScalarField(np.full((3, 3), np.nan), g)
    f = ScalarField(g.centers() ** 2, g, "z", {"role": "test"})
    back = ScalarField.from_dict(f.to_dict())
    assert back.chart == "z" and back.meta == {"role": "test"}
    np.testing.assert_array_equal(back.values, f.values)
    f.write_csv(tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "cell,re,im"


@pytest.mark.parametrize("order", [2, 4, 6])
@given(c=st.lists(coef, min_size=7, max_size=7))
def test_centred_differences_exact_on_polynomials(order, c):
    # a stencil of order p differentiates polynomials of degree p exactly
    g = Grid.square(1.0, 16)
    z = g.centers()
    x, y = z.real, z.imag
    f = sum(c[k] * x ** k for k in range(order + 1)) + c[6] * y ** 2 * x
    fx = sum(k * c[k] * x ** (k - 1) for k in range(1, order + 1)) + c[6] * y ** 2
    fy = 2 * c[6] * y * x
    m = interior_mask(g.shape, order // 2)
    scale = 1 + np.abs(f).max()
    assert np.abs(partial_x(f, g.spacing, order) - fx)[m].max() < 1e-10 * scale
    assert np.abs(partial_y(f, g.spacing, order) - fy)[m].max() < 1e-10 * scale
    assert np.isnan(partial_x(f, g.spacing, order)[:, 0]).all()


def test_wirtinger_derivatives_of_holomorphic_polynomial():
    g = Grid.square(1.0, 32)
    z = g.centers()
    f = z ** 3 - 2j * z
    m = interior_mask(g.shape, 3)
    assert np.abs(d_z(f, g.spacing, 6) - (3 * z ** 2 - 2j))[m].max() < 1e-10
    assert np.abs(d_zbar(f, g.spacing, 6))[m].max() < 1e-10
    assert np.abs(d_zbar(np.conj(z) * z, g.spacing, 2) - z)[m].max() < 1e-12


def _hyperbolic(grid):
    z = grid.centers()
    return ComplexMetricField(0, rho0(z) / 2, 0, grid)


@given(a=coef, b=coef, c=coef, d=coef, e=coef, f=coef)
def test_isotropic_ratios_solve_the_quadratic(a, b, c, d, e, f):
    g = Grid.square(1.0, 1)
    t = SymTensor(complex(a, b), complex(c, d) + 4, complex(e, f), g)
    r = isotropic_ratios(t)
    assert r.residual(t) < 1e-10
    assert np.all(np.abs(r.r_minus * r.inv_r_plus) <= 1 + 1e-12)


def test_conjugation_is_an_involution(rng):
    g = Grid.square(1.0, 4)
    comps = [rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(3)]
    t = SymTensor(*comps, g)
    tt = conjugate_metric(conjugate_metric(t))
    for u, v in zip(t.components(), tt.components()):
        np.testing.assert_array_equal(u, v)
    np.testing.assert_array_equal(conjugate_metric(t).g11, np.conj(t.g22))


def test_positivity_of_riemannian_and_degenerate_cases():
    g = Grid.square(0.5, 8)
    hyp = _hyperbolic(g)
    cert = is_positive(hyp)
    assert cert.positive and cert.margin == pytest.approx(1.0)
    # |g11| > |2 g12| swaps the roles of the isotropic directions
    bad = ComplexMetricField(3.0, 1.0, 0, g)
    assert not is_positive(bad)
    with pytest.raises(DegenerateMetric):
        check_nondegenerate(SymTensor(1.0, 1.0, 1.0, g))
    q = quadratic_differential(np.ones(g.shape), g, "minus")
    assert np.all(q.g22 == 1) and np.all(q.g11 == 0)


def test_area_density_of_hyperbolic_metric():
    g = Grid.square(0.5, 8)
    np.testing.assert_allclose(area_density(_hyperbolic(g)), rho0(g.centers()))


def test_pullback_of_fuchsian_pair_is_hyperbolic_metric():
    # (z, 1/zbar) develops the hyperbolic metric rho0 |dz|^2 with g12 = rho0 / 2
    g = Grid.square(0.2, 32, center=0.3 + 0.2j)
    z = g.centers()
    one, zero = np.ones_like(z), np.zeros_like(z)
    exact = (one, zero, zero, -1 / np.conj(z) ** 2)
    pb = pullback_G_metric(z, 1 / np.conj(z), g, exact)
    np.testing.assert_allclose(pb.g12, rho0(z) / 2, rtol=1e-12)
    assert np.abs(pb.g11).max() == 0 and np.abs(pb.g22).max() == 0
    fd = pullback_G_metric(z, 1 / np.conj(z), g)
    m = interior_mask(g.shape, 2)
    assert (np.abs(fd.g12 - pb.g12) / np.abs(pb.g12))[m].max() < 1e-3


def test_pullback_errors():
    g = Grid.square(0.5, 8)
    z = g.centers()
    with pytest.raises(CoincidentValues):
        pullback_G_metric(z, z, g)
    with pytest.raises(OrientationViolation):
        pullback_G_metric(np.conj(z), 1 / np.conj(z), g)


@pytest.mark.parametrize("n", [64, 128])
def test_curvature_of_model_metrics(n):
    g = Grid.square(0.6, n)
    z = g.centers()
    hyp = curvature_field(_hyperbolic(g), 4)
    sphere = curvature_field(ComplexMetricField(0, 2 / (1 + np.abs(z) ** 2) ** 2, 0, g), 4)
    flat = curvature_field(ComplexMetricField(0.3, 0.5, 0.1j, g), 4)
    tol = 2e-3 * (64 / n) ** 4
    assert hyp.max_deviation(-1.0) < tol
    assert sphere.max_deviation(1.0) < tol
    assert flat.max_deviation(0.0) < 1e-10


def test_curvature_converges_at_fourth_order():
    # measured on a fixed region so the stencil band does not move with n
    errs = []
    for n in (64, 128):
        g = Grid.square(0.6, n)
        errs.append(curvature_field(_hyperbolic(g), 4).max_deviation(-1.0, np.abs(g.centers()) < 0.5))
    assert np.log2(errs[0] / errs[1]) > 3.7
