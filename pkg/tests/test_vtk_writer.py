import meshio
import numpy as np

from hdg_ip.services.mesh import generate_structured
from hdg_ip.services.vtk_writer import build_field_mesh, sample_points_per_element, write_fields


def test_single_bilinear_element(solve_on, quadratic_problem):
    solution = solve_on(generate_structured(1, 1), quadratic_problem, 1)
    field_mesh = build_field_mesh(solution)
    assert len(field_mesh.points) == 4
    assert [block.type for block in field_mesh.cells] == ["quad"]
    assert len(field_mesh.cells[0].data) == 1
    assert set(field_mesh.point_data) == {"u_h"}


def test_quadratic_triangles_with_exact_fields(solve_on, quadratic_problem):
    solution = solve_on(generate_structured(2, 2, shape="tri"), quadratic_problem, 2)
    field_mesh = build_field_mesh(solution, quadratic_problem)
    assert sample_points_per_element("tri", 2) == 6
    assert len(field_mesh.points) == 8 * 6
    assert len(field_mesh.cells[0].data) == 8 * 4
    assert field_mesh.point_data["error"].max() <= 1e-9
    np.testing.assert_allclose(field_mesh.point_data["u_h"], field_mesh.point_data["exact"], atol=1e-9)
    assert set(field_mesh.cell_data) == {"region", "element", "l2_density"}


def test_sample_points_cover_element(solve_on, quadratic_problem):
    solution = solve_on(generate_structured(1, 1), quadratic_problem, 3)
    points = build_field_mesh(solution).points
    assert len(points) == sample_points_per_element("quad", 3) == 16
    np.testing.assert_allclose(points[:, :2].min(axis=0), [0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(points[:, :2].max(axis=0), [1.0, 1.0], atol=1e-14)


def test_write_ascii_legacy_vtk(tmp_path, solve_on, quadratic_problem):
    solution = solve_on(generate_structured(2, 2), quadratic_problem, 2)
    path = write_fields(solution, tmp_path / "fields" / "fields_poly_2_2.vtk", quadratic_problem)
    assert path.read_text().startswith("# vtk DataFile")
    loaded = meshio.read(path)
    assert len(loaded.points) == 4 * 9
    expected = build_field_mesh(solution).point_data["u_h"]
    np.testing.assert_allclose(loaded.point_data["u_h"].ravel(), expected, atol=1e-9)
