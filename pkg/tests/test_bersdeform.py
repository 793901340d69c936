import numpy as np
import pytest

from bersmetrics.bersdeform import (conjugate_bers, deform, deformation_ratio, fuchsian_bers,
                                    sample_hqd, second_chart)
from bersmetrics.bounds import max_ray_parameter
from bersmetrics.errors import ChartMismatch, NotPositive
from bersmetrics.fields import Grid
from bersmetrics.fuchsia import rho0
from bersmetrics.geomcore import ComplexMetricField, curvature_field
from bersmetrics.qcsolve import conjugate_group


def test_fuchsian_metric(base256):
    g = base256
    z = g.points()[g.inside]
    np.testing.assert_allclose(g.g.g12[g.inside], rho0(z) / 2)
    assert not np.any(g.g.g11) and not np.any(g.g.g22)
    assert g.chart_residual() == 0.0
    assert g.provenance == {"base": "fuchsian", "deformations": []}


def test_conjugation_swaps_charts(base256):
    c = conjugate_bers(base256)
    assert (c.plus_name, c.minus_name) == ("z", "zbar")
    assert c.provenance["conjugated"]
    cc = conjugate_bers(c)
    np.testing.assert_array_equal(cc.g.g12, base256.g.g12)
    assert not cc.provenance["conjugated"]


def test_plus_and_minus_deformations(base256, basis):
    q = sample_hqd(basis[0], base256)
    plus = deform(base256, q, "plus", 1.0)
    np.testing.assert_array_equal(plus.g.g11, q.values)
    assert plus.rho is None and plus.minus_name == "etabar"
    assert plus.provenance["deformations"] == [["plus", q.label, 1.0]]
    qm = sample_hqd(basis[0], base256, "minus")
    minus = deform(base256, qm, "minus", 1.0)
    np.testing.assert_array_equal(minus.g.g22, np.conj(q.values))
    assert minus.provenance["deformations"][0][0] == "minus"
    with pytest.raises(ChartMismatch):
        deform(base256, qm, "plus", 1.0)
    with pytest.raises(ChartMismatch):
        deform(base256, q, "minus", 1.0)


def test_positivity_fails_past_the_ray_limit(base256, basis):
    q = sample_hqd(basis[1], base256)
    ts = max_ray_parameter(base256, q)
    deform(base256, q, "plus", 0.99 * ts)
    with pytest.raises(NotPositive) as err:
        deform(base256, q, "plus", 1.01 * ts)
    assert err.value.margin < 0 and err.value.worst_index is not None


def test_second_chart_is_equivariant(base256, basis, group):
    q = sample_hqd(basis[0], base256)
    t = 0.3 * max_ray_parameter(base256, q)
    plus = deform(base256, q, "plus", t)
    sc = second_chart(plus)
    assert sc.solution.residual < 1e-9
    assert sc.consistency < 1e-4
    assert sc.metric.chart_residual(np.abs(plus.grid.centers()) < 0.9) < 1e-3
    np.testing.assert_allclose(deformation_ratio(plus)[plus.inside],
                               (q.values / rho0(plus.points()))[plus.inside] * t)
    # the new chart conjugates the group into PSL(2, C); the commutator
    # amplifies fitting errors, so only its decay under refinement is checked
    cg = conjugate_group(sc.solution, group, tol=1e-3)
    fine = fuchsian_bers(Grid.square(1.05, 512))
    qf = sample_hqd(basis[0], fine)
    cg_fine = conjugate_group(second_chart(deform(fine, qf, "plus", t)).solution, group, tol=1e-3)
    assert cg_fine.residual < cg.residual
    assert cg_fine.relator_residual < 0.5 * cg.relator_residual


def test_deformed_metric_has_curvature_minus_one(basis, group):
    # g0 + t q is a Bers metric, so its curvature is -1 wherever it is sampled
    grid = Grid.square(0.7, 512)
    z = np.where(np.abs(grid.centers()) < 0.95, grid.centers(), 0)
    phi = 0.3 * basis[0](z) / abs(basis[0](np.zeros(1))[0])
    g = ComplexMetricField(phi, rho0(z) / 2, 0, grid)
    k = curvature_field(g, 4)
    assert k.max_deviation(-1.0, np.abs(grid.centers()) < 0.6) < 1e-5
