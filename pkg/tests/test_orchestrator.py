import numpy as np
import pytest

from hdg_ip.config import Settings
from hdg_ip.errors import CapabilityError, InvalidArgumentError, MeshValidationError
from hdg_ip.services import model
from hdg_ip.services.mesh import Region, generate_holed_square
from hdg_ip.services.mesh_io import write_mesh
from hdg_ip.services.orchestrator import build_mesh, get_experiment_runner
from hdg_ip.services.stabilization import StabilizationConfig


def test_build_mesh_from_level_number():
    label, mesh = build_mesh(model.get_testcase("A", kappa_scalar=0.5), 4, shape="tri")
    assert label == "4"
    assert mesh.n_elements == 32
    label, mesh = build_mesh(model.get_testcase("C"), "2")
    assert label == "2"
    assert len(mesh.circles) == 16


def test_build_mesh_from_data_directory(tmp_path):
    write_mesh(generate_holed_square(2), tmp_path / "annulus_h2.msh2")
    label, mesh = build_mesh(model.get_testcase("C"), "annulus_h2.msh2", data_dir=tmp_path)
    assert label == "annulus_h2"
    assert mesh.h == pytest.approx(0.5)


def test_build_mesh_rejects_nonpositive_level():
    with pytest.raises(InvalidArgumentError):
        build_mesh(model.get_testcase("B"), 0)


def test_generated_levels_are_tagged_from_the_problem():
    _, mesh = build_mesh(model.get_testcase("B"), 2)
    assert np.all(mesh.regions == Region.HYPERBOLIC)
    _, mesh = build_mesh(model.get_testcase("A", kappa_scalar=0.5), 2)
    assert np.all(mesh.regions == Region.ELLIPTIC)


def test_file_region_tags_survive_the_solve(tmp_path):
    path = write_mesh(generate_holed_square(2), tmp_path / "annulus_h2.msh2")
    _, mesh = build_mesh(model.get_testcase("C"), str(path))
    stored = mesh.regions.copy()
    assert set(stored.tolist()) == {Region.ELLIPTIC, Region.HYPERBOLIC}

    runner = get_experiment_runner(model.get_testcase("C"), StabilizationConfig())
    result = runner.solve_on(mesh, 1, "annulus_h2")
    np.testing.assert_array_equal(result.mesh.regions, stored)


def test_file_region_tags_must_agree_with_the_problem(tmp_path):
    mesh = generate_holed_square(2)
    flipped = mesh.with_regions(1 - mesh.regions)
    path = write_mesh(flipped, tmp_path / "flipped.msh2")
    with pytest.raises(MeshValidationError, match="tagged"):
        build_mesh(model.get_testcase("C"), str(path))


def test_missing_mesh_file_names_the_mesh_command(tmp_path):
    with pytest.raises(InvalidArgumentError, match="hdg-ip mesh"):
        build_mesh(model.get_testcase("C"), "annulus_h4.msh2", data_dir=tmp_path)


def test_data_dir_has_no_default(monkeypatch):
    monkeypatch.delenv("HDG_DATA_DIR", raising=False)
    assert Settings(_env_file=None).data_dir is None


def test_uniform_study_records_rates():
    runner = get_experiment_runner(
        model.get_testcase("A", kappa_scalar=0.5), StabilizationConfig.from_labels("sip", "sg")
    )
    results = runner.uniform_study([1], [2, 4])
    records = [r.record for r in results]
    assert [r.level for r in records] == ["2", "4"]
    assert records[0].ecr is None
    assert records[1].ecr is not None and records[1].ecr > 0
    assert records[1].l2_error < records[0].l2_error
    assert all(r.dofs == r_.solution.system.size for r, r_ in zip(records, results))
    assert records[0].test == "A" and records[0].scheme == "sip" and records[0].stabilization == "sg"


def test_uniform_study_writes_fields(tmp_path):
    runner = get_experiment_runner(
        model.get_testcase("B"), StabilizationConfig(), vtk_dir=tmp_path
    )
    results = runner.uniform_study([1], [2])
    assert results[0].vtk_path == tmp_path / "fields_B_1_2.vtk"
    assert results[0].vtk_path.exists()


def test_adaptive_study_refines_towards_discontinuity():
    runner = get_experiment_runner(model.get_testcase("B"), StabilizationConfig.from_labels("iip"))
    results = runner.adaptive_study(1, 4, cycles=3, fraction=0.3)
    assert [r.level for r in results] == ["a0", "a1", "a2"]
    counts = [r.mesh.n_elements for r in results]
    assert counts[0] < counts[1] < counts[2]
    assert np.isfinite(results[-1].record.l2_error)


def test_studies_need_exact_solution():
    problem = model.ProblemSpec(
        name="data-only",
        kappa=lambda p, r: np.zeros((len(p), 2, 2)),
        beta=lambda p, r: np.ones((len(p), 2)),
        gamma=lambda p, r: np.ones(len(p)),
        source=lambda p, r: np.zeros(len(p)),
        dirichlet=lambda p, r: np.zeros(len(p)),
    )
    runner = get_experiment_runner(problem, StabilizationConfig())
    with pytest.raises(CapabilityError):
        runner.uniform_study([1], [2])


def test_parallel_study_matches_serial():
    problem = model.get_testcase("A", kappa_scalar=0.5)
    config = StabilizationConfig.from_labels("sip", "sg")
    serial = get_experiment_runner(problem, config, jobs=1).uniform_study([1, 2], [2, 4])
    parallel = get_experiment_runner(problem, config, jobs=2).uniform_study([1, 2], [2, 4])
    assert [(r.record.k, r.record.level) for r in parallel] == [(1, "2"), (1, "4"), (2, "2"), (2, "4")]
    for a, b in zip(serial, parallel):
        assert (a.record.k, a.record.level, a.record.dofs) == (b.record.k, b.record.level, b.record.dofs)
        assert b.record.l2_error == pytest.approx(a.record.l2_error, rel=1e-12)
    assert parallel[1].record.ecr == pytest.approx(serial[1].record.ecr, rel=1e-9)
