"""Convergence studies on the three test problems. Run with ``pytest -m slow``."""

import numpy as np
import pytest

from hdg_ip.services import model
from hdg_ip.services.mesh import Region
from hdg_ip.services.postprocess import l2_error_cells
from hdg_ip.services.stabilization import StabilizationConfig
from hdg_ip.services.orchestrator import get_experiment_runner
from hdg_ip.services.vtk_writer import build_field_mesh

pytestmark = pytest.mark.slow

LEVELS = [4, 8, 16, 32, 64]


def _study(problem, scheme, stab, degrees, levels, **config):
    runner = get_experiment_runner(problem, StabilizationConfig.from_labels(scheme, stab, **config))
    return [r.record for r in runner.uniform_study(degrees, levels)]


def _within_factor(actual, expected, factor):
    return expected / factor <= actual <= expected * factor


def test_layer_problem_sip_sg_quadratic():
    records = _study(model.get_testcase("A", kappa_scalar=0.5), "sip", "sg", [2], LEVELS)
    expected = [1.7e-4, 2.1e-5, 2.7e-6, 3.4e-7, 4.2e-8]
    for record, value in zip(records, expected):
        assert _within_factor(record.l2_error, value, 2.0), (record.level, record.l2_error)
    assert records[-1].ecr == pytest.approx(3.0, abs=0.1)


def test_layer_problem_linear_on_coarse_mesh():
    (record,) = _study(model.get_testcase("A", kappa_scalar=0.5), "sip", "sg", [1], [8])
    assert record.l2_error == pytest.approx(5.3e-4, rel=0.3)


@pytest.mark.parametrize("scheme", ["nip", "iip"])
@pytest.mark.parametrize("k,tolerance", [(1, 0.1), (2, 0.2)])
def test_nonsymmetric_schemes_converge_at_suboptimal_rate(scheme, k, tolerance):
    records = _study(model.get_testcase("A", kappa_scalar=0.5), scheme, "sg", [k], [32, 64])
    assert records[-1].ecr == pytest.approx(2.0, abs=tolerance)


def test_thin_layer_linear_rate():
    records = _study(model.get_testcase("A", kappa_scalar=5e-2), "sip", "sg", [1], [32, 64])
    assert records[-1].ecr == pytest.approx(2.0, abs=0.2)
    assert _within_factor(records[-1].l2_error, 7.2e-4, 3.0)


def test_exponential_fitting_beats_additive_in_advective_regime():
    problem = model.get_testcase("A", kappa_scalar=5e-3)
    (sg,) = _study(problem, "sip", "sg", [1], [32])
    (add,) = _study(problem, "sip", "add", [1], [32])
    assert sg.l2_error <= add.l2_error


@pytest.mark.parametrize("k", [1, 2, 3])
def test_hole_problem_optimal_rates(k):
    records = _study(model.get_testcase("C"), "sip", "sg", [k], [4, 8, 16, 32])
    for record in records[1:]:
        assert record.ecr == pytest.approx(k + 1, abs=0.25), (record.level, record.ecr)
    if k == 1:
        expected = [2.1e-1, 5.2e-2, 1.3e-2, 3.1e-3]
        for record, value in zip(records, expected):
            assert _within_factor(record.l2_error, value, 3.0), (record.level, record.l2_error)


def test_hole_problem_linear_on_coarse_mesh():
    (record,) = _study(model.get_testcase("C"), "sip", "sg", [1], [8])
    assert record.l2_error == pytest.approx(5.2e-2, rel=0.5)


def test_hole_problem_converges_on_both_sides_of_the_interface():
    problem = model.get_testcase("C")
    runner = get_experiment_runner(problem, StabilizationConfig.from_labels("sip", "sg"))
    errors = {}
    for result in runner.uniform_study([1], [4, 8]):
        cells = l2_error_cells(result.solution, problem)
        for region in Region:
            mask = result.mesh.regions == region
            errors[result.level, region] = float(np.sqrt(np.sum(cells[mask] ** 2)))
    # second order on each side, with slack for the coarse pair
    for region in Region:
        assert errors["4", region] / errors["8", region] >= 3.0, (region, errors)


def test_discontinuity_adaptive_refinement():
    problem = model.get_testcase("B")
    runner = get_experiment_runner(problem, StabilizationConfig.from_labels("sip", theta=1.0))
    results = runner.adaptive_study(1, 8, cycles=6, fraction=0.3)
    assert len(results) == 6
    final = results[-1]

    values = build_field_mesh(final.solution).point_data["u_h"]
    assert values.min() >= -0.3
    assert values.max() <= 1.3

    # finest level: the smallest cells, h their largest diameter
    mesh = final.mesh
    finest = np.flatnonzero(mesh.areas <= mesh.areas.min() * (1.0 + 1e-6))
    h = mesh.diameters[finest].max()
    assert h < 1.0 / 8 / 8
    hits = 0
    for e in finest:
        corners = mesh.vertices[mesh.element_vertices(e)]
        signed = (-corners[:, 0] + 2.0 * corners[:, 1] - 1.0) / np.sqrt(5.0)
        # a convex cell meets the band |d| <= 2h iff its corner distances reach it
        hits += signed.max() >= -2.0 * h and signed.min() <= 2.0 * h
    assert hits / len(finest) >= 0.8


def test_large_theta_smears_the_discontinuity():
    problem = model.get_testcase("B")
    (sharp,) = _study(problem, "sip", "sg", [1], [16], theta=1.0)
    (smeared,) = _study(problem, "sip", "sg", [1], [16], theta=100.0)
    assert smeared.l2_error > sharp.l2_error
