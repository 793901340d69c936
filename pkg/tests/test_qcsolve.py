import numpy as np
import pytest

from bersmetrics.errors import (AliasingWarningError, DegenerateProbes, EquivarianceViolation,
                                NotContracting)
from bersmetrics.fields import Grid
from bersmetrics.fuchsia import MobiusMap
from bersmetrics.qcsolve import (BeltramiField, conjugate_group, disk_support_weights, fit_mobius,
                                 normalize_solution, solve_beltrami)


def _disk_problem(n, k=0.3):
    g = Grid.square(1.5, n)
    return g, BeltramiField(k * disk_support_weights(g), g)


@pytest.mark.parametrize("k", [0.3, 0.5j])
def test_constant_coefficient_on_disk(k):
    # exact: f = z + k zbar inside the unit disk, z + k / z outside
    errs = []
    for n in (128, 256):
        g, mu = _disk_problem(n, k)
        sol = solve_beltrami(mu)
        z = g.centers()
        exact = np.where(np.abs(z) < 1, z + k * np.conj(z), z + k / z)
        away = np.abs(np.abs(z) - 1) > 0.05
        errs.append(np.abs(sol.f - exact)[away].max())
        assert sol.residual < 1e-9
    assert errs[1] < 2e-3
    assert errs[1] < 0.7 * errs[0]


def test_zero_coefficient_gives_identity():
    g = Grid.square(1.0, 32)
    sol = solve_beltrami(BeltramiField(np.zeros(g.shape), g))
    np.testing.assert_array_equal(sol.f, g.centers())
    assert sol.iterations == 0


def test_smooth_coefficient_satisfies_equation():
    g = Grid.square(1.5, 256)
    z = g.centers()
    mu = 0.4 * np.exp(-8 * np.abs(z - 0.1) ** 2) * (np.abs(z) < 1.2)
    sol = solve_beltrami(BeltramiField(mu, g))
    assert sol.fd_residual(np.abs(z) < 0.8, order=4) < 1e-4
    # direct evaluation agrees with the FFT reconstruction at cell centres
    idx = (100, 140)
    assert abs(sol.evaluate([z[idx]])[0] - sol.f[idx]) < 1e-3


def test_solver_guards():
    g = Grid.square(1.5, 64)
    with pytest.raises(NotContracting):
        solve_beltrami(BeltramiField(1.0 * disk_support_weights(g), g))
    mu = np.zeros(g.shape)
    mu[0, 10] = 0.1
    with pytest.raises(AliasingWarningError):
        solve_beltrami(BeltramiField(mu, g))


def test_normalization_pins_two_points():
    g, mu = _disk_problem(128)
    sol = normalize_solution(solve_beltrami(mu), 0j, 0.5)
    np.testing.assert_allclose(sol.evaluate([0j, 0.5]), [0, 1], atol=1e-12)


def test_fit_mobius_recovers_map(rng):
    m = MobiusMap.from_coeffs(1 + 1j, 0.3, -0.2j, 1.1)
    src = rng.normal(size=6) + 1j * rng.normal(size=6)
    fit = fit_mobius(src, m(src))
    assert fit.distance(m) < 1e-10
    with pytest.raises(DegenerateProbes):
        fit_mobius(src[:2], m(src[:2]))


def test_conjugating_by_identity_returns_the_group(group):
    g = Grid.square(1.5, 64)
    sol = solve_beltrami(BeltramiField(np.zeros(g.shape), g))
    cg = conjugate_group(sol, group)
    for a, b in zip(cg.generators, group.generators):
        assert a.distance(b) < 1e-9
    assert cg.relator_residual < 1e-9


def test_conjugation_rejects_non_equivariant_maps(group):
    # a Beltrami coefficient that is not Gamma-compatible
    g, mu = _disk_problem(128, 0.3)
    with pytest.raises(EquivarianceViolation):
        conjugate_group(solve_beltrami(mu), group)
