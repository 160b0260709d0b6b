"""Shared fixtures: isolated settings, small meshes and manufactured problems."""

from typing import Callable, Optional

import numpy as np
import pytest

from hdg_ip.config import get_settings
from hdg_ip.services.assembly import assemble
from hdg_ip.services.fespace import FeSpace
from hdg_ip.services.mesh import Mesh, classify_boundary, generate_structured, tag_regions
from hdg_ip.services.model import ProblemSpec, testcase_polynomial
from hdg_ip.services.solver import Solution, solve
from hdg_ip.services.stabilization import StabilizationConfig

# u = 1 + 2x - y + x y / 2 + x^2, rows are powers of x
QUADRATIC = [[1.0, -1.0, 0.0], [2.0, 0.5, 0.0], [1.0, 0.0, 0.0]]


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("HDG_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.setenv("HDG_DATA_DIR", str(tmp_path / "data"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def quadratic_problem() -> ProblemSpec:
    return testcase_polynomial(QUADRATIC, kappa=1.0, beta=(1.0, 0.5), gamma=1.0)


@pytest.fixture
def advection_problem() -> ProblemSpec:
    return testcase_polynomial(QUADRATIC, kappa=0.0, beta=(1.0, 0.5), gamma=1.0)


@pytest.fixture
def unit_square_quad() -> Mesh:
    return generate_structured(4, 4, shape="quad")


@pytest.fixture
def unit_square_tri() -> Mesh:
    return generate_structured(4, 4, shape="tri")


def prepare(mesh: Mesh, problem: ProblemSpec) -> Mesh:
    return classify_boundary(tag_regions(mesh, problem.region_of), problem)


def build_space(mesh: Mesh, problem: ProblemSpec, k: int) -> FeSpace:
    return FeSpace(prepare(mesh, problem), k, problem.quadrature_boost)


@pytest.fixture
def solve_on() -> Callable[..., Solution]:
    def run(
        mesh: Mesh,
        problem: ProblemSpec,
        k: int,
        config: Optional[StabilizationConfig] = None,
        **solve_kwargs,
    ) -> Solution:
        space = build_space(mesh, problem, k)
        system = assemble(space, problem, config or StabilizationConfig())
        return solve(system, **solve_kwargs)

    return run


def random_composite(space: FeSpace, free_dofs: np.ndarray, rng: np.random.Generator):
    """Random interior vector and full trace vector vanishing on Gamma- faces."""
    interior = rng.standard_normal(space.n_interior_dofs)
    trace = np.zeros(space.n_trace_dofs)
    trace[free_dofs] = rng.standard_normal(len(free_dofs))
    return interior, trace
