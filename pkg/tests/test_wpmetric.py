import numpy as np
import pytest

from bersmetrics.errors import FlowEscape
from bersmetrics.fuchsia import rho0
from bersmetrics.wpmetric import (classical_wp_gram, flow_map, goldman, gram, invariant_flow_field,
                                  mcmullen_check, quadrature, same_side_gram)


@pytest.fixture(scope="module")
def fuchsian_setup(base256, basis):
    quad = quadrature(base256.grid)
    z = base256.points()
    P = [np.where(base256.inside, b(z), 0) for b in basis]
    return base256, quad, P


def test_quadrature_methods(base256):
    # integrating rho0 over the quotient gives the area 4 pi
    r = np.where(base256.inside, rho0(base256.points()), 0)
    part = quadrature(base256.grid).integrate(r)
    cut = quadrature(base256.grid, method="cut").integrate(r)
    assert abs(part - 4 * np.pi) < 1e-6
    assert abs(cut - 4 * np.pi) < 1e-2
    assert abs(quadrature(base256.grid, 3).integrate(r) - 4 * np.pi) < 1e-2
    with pytest.raises(ValueError):
        quadrature(base256.grid, 2)
    with pytest.raises(ValueError):
        quadrature(base256.grid, method="simpson")


def test_classical_wp_gram_is_an_inner_product(fuchsian_setup):
    _, quad, P = fuchsian_setup
    W = classical_wp_gram(P, quad)
    np.testing.assert_allclose(W, W.T, rtol=1e-10)
    assert np.linalg.eigvalsh(W).min() > 0


def test_fuchsian_gram_matches_classical_pairing(fuchsian_setup):
    bm, quad, P = fuchsian_setup
    Pb = [np.conj(p) for p in P]
    G = gram(bm, P, Pb, quad)
    Gc = gram(bm, P, Pb, quad, route="chart")
    W = classical_wp_gram(P, quad)
    assert np.abs(G.entries - Gc.entries).max() < 1e-12 * np.abs(W).max()
    assert np.abs(2 * G.entries - W).max() < 1e-5 * np.abs(W).max()
    assert G.sigma_min > 0
    assert np.abs(same_side_gram(bm, P, "plus", quad).entries).max() == 0
    assert np.abs(same_side_gram(bm, Pb, "minus", quad).entries).max() == 0


def test_mcmullen_routes_at_the_fuchsian_point(fuchsian_setup):
    bm, quad, P = fuchsian_setup
    scale = np.abs(classical_wp_gram(P, quad)).max()
    for i, j in ((0, 0), (1, 1), (0, 2)):
        r = mcmullen_check(bm, P[i], np.conj(P[j]), quad)
        assert r.spread < 1e-6 * scale


def test_goldman_form():
    pair = lambda a, b: a * b
    assert goldman((1.0, None), (2.0, None), pair) == 0
    assert goldman((1.0, 3.0), (2.0, 5.0), pair) == 8j * (5.0 - 6.0)


def test_invariant_flow_is_equivariant(group, basis):
    v = invariant_flow_field(basis[0])
    z = np.array([0.1 + 0.05j, -0.2 + 0.1j, 0.05j])
    for g in group.generators:
        for m in (g, g.inverse()):
            np.testing.assert_allclose(v(m(z)), m.derivative(z) * v(z), rtol=1e-9, atol=1e-13)
    probe = np.array([0.3, 0.5j])
    assert np.abs(v(probe)).max() <= 0.5 + 1e-12
    with pytest.raises(FlowEscape):
        v(np.array([1.2]))


def test_flow_map_integrates_exactly_for_linear_fields():
    z = np.array([0.1, 0.2j])
    np.testing.assert_allclose(flow_map(lambda w: 0.3 + 0 * w, z, 1.0), z + 0.3)
    np.testing.assert_allclose(flow_map(lambda w: 1j * w, z, 0.5, steps=64), z * np.exp(0.5j),
                               rtol=1e-10)
