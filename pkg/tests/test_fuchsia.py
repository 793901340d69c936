import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bersmetrics.errors import BudgetExceeded
from bersmetrics.fields import Grid
from bersmetrics.fuchsia import (IDENTITY, MobiusMap, enumerate_group, fundamental_mesh,
                                 hyperbolic_area, orbit_ball, partition_mesh_on_grid,
                                 partition_weights, reduce_to_domain, rho0)

disk_point = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(0, 0.97), st.floats(0, 2 * np.pi))


def test_octagon_matches_right_triangle_trigonometry(group):
    # the triangle (centre, side midpoint, vertex) has angles pi/8, pi/2, pi/8
    geo = group.octagon
    assert np.cosh(geo.inradius) == pytest.approx(1 + np.sqrt(2), rel=1e-12)
    assert np.cosh(geo.circumradius) == pytest.approx((1 + np.sqrt(2)) ** 2, rel=1e-12)


def test_relator_and_generators(group):
    assert group.relator_residual() < 1e-12
    theta = np.linspace(0, 2 * np.pi, 17)
    for g in group.generators:
        assert np.linalg.det(g.matrix) == pytest.approx(1)
        # preserves the unit circle and the disk
        assert np.abs(np.abs(g(np.exp(1j * theta))) - 1).max() < 1e-12
        assert abs(g(0.0)) < 1
        assert g.distance(IDENTITY) > 1


def test_side_pairings_glue_the_octagon(group):
    geo = group.octagon
    centers, r = geo.side_circles()
    # side k is the arc on circle k; its image lies on the paired circle and the
    # tile beyond side k maps back onto the octagon
    for k, m in enumerate(group.side_maps):
        mid = geo.midpoint_radius * np.exp(1j * k * np.pi / 4)
        img = m(mid)
        assert np.min(np.abs(np.abs(img - centers) - r)) < 1e-12
        beyond = mid * 1.05
        assert geo.contains(m(beyond))


def test_word_counts_match_free_group_below_half_relator(group):
    # the relator has length 8, so reduced words of length <= 3 are distinct
    counts = [len(enumerate_group(group, n)) for n in range(4)]
    assert counts == [1, 9, 65, 457]
    words = enumerate_group(group, 2)
    for w, m in words[:20]:
        assert group.word_map(w).distance(m) < 1e-12
    with pytest.raises(BudgetExceeded):
        enumerate_group(group, 5, cap=1000)


def test_mobius_inverse_and_derivative():
    m = MobiusMap.from_coeffs(2, 1j, 0.5, 1)
    z = np.array([0.1 + 0.2j, -0.3j])
    np.testing.assert_allclose(m.inverse()(m(z)), z)
    h = 1e-6
    np.testing.assert_allclose(m.derivative(z), (m(z + h) - m(z - h)) / (2 * h), rtol=1e-8)


def test_orbit_ball_displacements(group):
    orb = orbit_ball(6.0)
    d = 2 * np.arctanh(np.abs(orb.matrices[:, 0, 1] / orb.matrices[:, 1, 1]))
    np.testing.assert_allclose(d, orb.displacement, atol=1e-9)
    assert orb.displacement.max() <= 6.0
    replay = orb.replay([g.matrix for g in group.generators])
    assert np.abs(replay - orb.matrices).max() < 1e-8


@given(z=disk_point)
def test_reduce_to_domain(group, z):
    w, (a, b, c, d) = reduce_to_domain(group, np.array([z]))
    assert abs((a * z + b) / (c * z + d) - w)[0] < 1e-8 * max(1, abs(w[0]))
    # on or inside the boundary circles
    centers, r = group.octagon.side_circles()
    assert np.min(np.abs(w[0] - centers)) >= r - 1e-9
    assert np.abs(a * d - b * c - 1)[0] < 1e-8


@given(z=disk_point)
def test_partition_of_unity(group, z):
    mats = orbit_ball(8.0).matrices
    imgs = (mats[:, 0, 0] * z + mats[:, 0, 1]) / (mats[:, 1, 0] * z + mats[:, 1, 1])
    total = partition_weights(group, imgs).sum()
    assert total == pytest.approx(1.0, abs=1e-12)


def test_partition_radius_must_cover(group):
    with pytest.raises(ValueError):
        partition_weights(group, np.zeros(1), radius=2.0)
    with pytest.raises(ValueError):
        partition_mesh_on_grid(group, Grid.square(0.5, 32))


def test_area_is_gauss_bonnet(group):
    # genus two: area 4 pi; the cut-cell mesh converges at first order
    errs = [abs(hyperbolic_area(fundamental_mesh(group, n)) - 4 * np.pi) for n in (128, 256)]
    assert errs[1] < errs[0] < 2e-2
    # the smooth partition of unity converges spectrally
    errs = []
    for n in (128, 256, 512):
        part = partition_mesh_on_grid(group, Grid.square(0.9, n))
        errs.append(abs(part.integrate(rho0(np.where(part.inside, part.centers, 0))) - 4 * np.pi))
    assert errs[2] < 1e-10 and errs[2] < 1e-2 * errs[1] < 1e-4 * errs[0]
    assert part.to_dict()["weights"] == "partition"
