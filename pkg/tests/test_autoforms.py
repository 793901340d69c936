import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from bersmetrics.autoforms import (QuadraticDifferentialField, _conj_label, automorphy_residual,
                                   check_tt, combine, poincare_basis)
from bersmetrics.fields import Grid, ScalarField
from bersmetrics.fuchsia import rho0
from bersmetrics.geomcore import ComplexMetricField

FOUR_SEEDS = [[1.0], [0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0]]


def _disk_sample(n=300, r=0.7):
    rng = np.random.default_rng(0)
    return r * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))


def test_basis_is_automorphic(group, basis):
    assert len(basis) == 3
    for q in basis:
        assert automorphy_residual(q, group) < 1e-12
        assert q.tail < 1e-3


def test_residual_detects_non_automorphic_functions(group):
    assert automorphy_residual(lambda z: 1 + 0 * z, group) > 0.1


def test_raw_poincare_series_span_three_dimensions(group):
    # genus two carries a 3-dimensional space of holomorphic quadratic
    # differentials, so four raw series are dependent up to truncation
    raw = poincare_basis(group, FOUR_SEEDS, refine=False)
    for q in raw:
        assert automorphy_residual(q, group) < 10 * q.tail + 1e-12
    A = np.stack([q(_disk_sample()) for q in raw], axis=1)
    s = np.linalg.svd(A / np.abs(A).max(axis=0), compute_uv=False)
    assert s[2] > 1.0
    assert s[3] < 10 * max(q.tail for q in raw)


def test_refined_series_lie_in_the_automorphic_subspace(group):
    ref = poincare_basis(group, FOUR_SEEDS)
    A = np.stack([q(_disk_sample()) for q in ref], axis=1)
    s = np.linalg.svd(A / np.abs(A).max(axis=0), compute_uv=False)
    assert s[3] < 1e-12 * s[0]


def test_evaluation_outside_taylor_disk_uses_automorphy(group, basis):
    q = basis[1]
    g = group.generators[0]
    z = np.array([0j, 0.05, 0.04j])
    # g moves these points outside the Taylor radius
    w = g.inverse()(z)
    assert np.all(np.abs(w) > 0.88)
    np.testing.assert_allclose(q(w) * g.inverse().derivative(z) ** 2, q(z), rtol=1e-9, atol=1e-12)


@given(c=st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                  min_size=3, max_size=3))
def test_combine_is_linear(basis, c):
    z = _disk_sample(20)
    q = combine(basis, c)
    expected = sum(ci * b(z) for ci, b in zip(c, basis))
    np.testing.assert_allclose(q(z), expected, atol=1e-12 * (1 + np.abs(expected).max()))


def test_conjugate_differential():
    g = Grid.square(0.5, 4)
    q = QuadraticDifferentialField(ScalarField(g.centers(), g, "z"), "plus", "q")
    qc = q.conj()
    assert qc.side == "minus" and qc.phi.chart == "zbar" and qc.label == "conj(q)"
    assert qc.conj().label == "q"
    np.testing.assert_array_equal(qc.values, np.conj(q.values))
    assert qc.tensor().g22[0, 0] == np.conj(q.values[0, 0])
    assert _conj_label("conj(a)+conj(b)") == "conj(conj(a)+conj(b))"


def test_real_part_is_transverse_traceless(basis):
    g = Grid.square(0.7, 256)
    z = g.centers()
    g0 = ComplexMetricField(0, rho0(z) / 2, 0, g)
    tr, dv = check_tt(basis[0].on_grid(g), g0, mask=np.abs(z) < 0.6)
    assert tr == 0.0
    assert dv < 1e-6
    # a non-holomorphic perturbation is not divergence free
    bad = QuadraticDifferentialField(ScalarField(np.abs(z) ** 2 + 0j, g, "z"), "plus", "bad")
    assert check_tt(bad, g0, mask=np.abs(z) < 0.6)[1] > 1e-2
