"""
HDG-IP Solver - Experiment Orchestrator

Handles:
- Mesh levels: structured grids, the holed square, or mesh files from disk
- One solve per (k, level): classify, build the space, assemble, solve,
  measure errors, optionally write fields
- Uniform convergence studies and adaptive refinement cycles
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from hdg_ip.config import Settings, get_settings
from hdg_ip.errors import CapabilityError, InvalidArgumentError
from hdg_ip.services.assembly import assemble
from hdg_ip.services.fespace import FeSpace
from hdg_ip.services.mesh import (
    Mesh,
    check_regions,
    classify_boundary,
    generate_holed_square,
    generate_structured,
    tag_regions,
)
from hdg_ip.services.mesh_io import read_mesh
from hdg_ip.services.model import ProblemSpec
from hdg_ip.services.postprocess import (
    ConvergenceRecord,
    energy_error,
    fill_rates,
    jump_indicator,
    l2_error,
)
from hdg_ip.services.refinement import refine_adaptive
from hdg_ip.services.solver import Solution, solve
from hdg_ip.services.stabilization import StabilizationConfig
from hdg_ip.services.vtk_writer import write_fields

logger = logging.getLogger(__name__)

Level = Union[int, str, Path]


@dataclass
class LevelResult:
    """Outcome of one solve."""

    level: str
    mesh: Mesh
    solution: Solution
    record: ConvergenceRecord
    vtk_path: Optional[Path] = None


def build_mesh(
    problem: ProblemSpec,
    level: Level,
    shape: str = "quad",
    data_dir: Optional[Path] = None,
) -> Tuple[str, Mesh]:
    """
    Mesh for one level: an integer n gives the problem's mesh family with
    h = 1/n, tagged from the problem's region indicator. Anything else is read
    as a mesh file (relative paths are also looked up in the data directory)
    and keeps the region tags stored in the file, which must agree with the
    problem.
    """
    if isinstance(level, int) or (isinstance(level, str) and level.isdigit()):
        n = int(level)
        if n < 1:
            raise InvalidArgumentError(f"mesh level must be positive, got {n}")
        if problem.mesh_family == "holed":
            mesh = generate_holed_square(n)
        else:
            mesh = generate_structured(n, n, shape=shape)
        return str(n), tag_regions(mesh, problem.region_of)

    path = Path(level)
    if not path.exists() and data_dir is not None and (data_dir / path).exists():
        path = data_dir / path
    if not path.exists():
        where = f" (also looked in {data_dir})" if data_dir is not None else ""
        raise InvalidArgumentError(
            f"mesh file {level} not found{where}; write it with "
            f"'hdg-ip mesh --levels <n,...> --out <dir>' and set HDG_DATA_DIR=<dir>"
        )
    return path.stem, check_regions(read_mesh(path), problem.region_of)


class ExperimentRunner:
    """
    Runs a problem with one stabilization configuration over degrees and
    mesh levels.
    """

    def __init__(
        self,
        problem: ProblemSpec,
        config: StabilizationConfig,
        settings: Optional[Settings] = None,
        solver_method: Optional[str] = None,
        tol: Optional[float] = None,
        jobs: Optional[int] = None,
        vtk_dir: Optional[Path] = None,
    ):
        self.problem = problem
        self.config = config
        self.settings = settings or get_settings()
        self.solver_method = solver_method or self.settings.solver_method
        self.tol = self.settings.solver_tol if tol is None else tol
        self.jobs = self.settings.jobs if jobs is None else jobs
        self.vtk_dir = vtk_dir

    @property
    def stabilization_label(self) -> str:
        return self.config.elliptic_scheme

    # =========================================================================
    # Single solve
    # =========================================================================

    def prepare(self, mesh: Mesh) -> Mesh:
        """Fichera classification; region tags are taken from the mesh as given."""
        return classify_boundary(mesh, self.problem, self.settings.classification_tol)

    def solve_on(self, mesh: Mesh, k: int, level: str) -> LevelResult:
        mesh = self.prepare(mesh)
        space = FeSpace(mesh, k, self.problem.quadrature_boost)
        space.coefficient_bounds(self.problem)

        start = time.perf_counter()
        system = assemble(space, self.problem, self.config)
        solution = solve(system, method=self.solver_method, tol=self.tol)
        seconds = time.perf_counter() - start

        l2 = l2_error(solution, self.problem)
        energy = energy_error(solution, self.problem)
        record = ConvergenceRecord(
            test=self.problem.name,
            scheme=self.config.scheme,
            stabilization=self.stabilization_label,
            k=k,
            level=level,
            h=mesh.h,
            l2_error=l2,
            energy_error=energy,
            dofs=system.size,
            solve_seconds=seconds,
        )
        logger.info(
            f"Test {self.problem.name} {self.config.scheme}/{self.stabilization_label} "
            f"k={k} level={level}: L2 {l2:.3e}, energy {energy:.3e}, {system.size} DOFs"
        )

        vtk_path = None
        if self.vtk_dir is not None:
            vtk_path = write_fields(
                solution,
                self.vtk_dir / f"fields_{self.problem.name}_{k}_{level}.vtk",
                self.problem,
            )
        return LevelResult(level=level, mesh=mesh, solution=solution, record=record, vtk_path=vtk_path)

    # =========================================================================
    # Studies
    # =========================================================================

    def uniform_study(
        self,
        degrees: Sequence[int],
        levels: Sequence[Level],
        shape: str = "quad",
    ) -> List[LevelResult]:
        """
        Every degree on every level; ECR filled per degree.

        The (k, level) solves are independent; with ``jobs`` > 1 they run on a
        thread pool and the results keep degree-major order.
        """
        if not self.problem.has_exact:
            raise CapabilityError(f"problem '{self.problem.name}' has no exact solution")
        meshes = [build_mesh(self.problem, lvl, shape, self.settings.data_dir) for lvl in levels]
        tasks = [(k, label, mesh) for k in degrees for label, mesh in meshes]

        def run(task: Tuple[int, str, Mesh]) -> LevelResult:
            k, label, mesh = task
            return self.solve_on(mesh, k, label)

        if self.jobs > 1 and len(tasks) > 1:
            logger.info(f"Running {len(tasks)} solves on {self.jobs} threads")
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                results = list(pool.map(run, tasks))
        else:
            results = [run(task) for task in tasks]
        return _with_rates(results)

    def adaptive_study(
        self,
        k: int,
        level: Level,
        cycles: Optional[int] = None,
        fraction: Optional[float] = None,
        shape: str = "quad",
        marking: Optional[str] = None,
    ) -> List[LevelResult]:
        """Solve, mark by the jump indicator, refine; ``cycles`` solves in total."""
        cycles = self.settings.adaptive_cycles if cycles is None else cycles
        fraction = self.settings.adaptive_fraction if fraction is None else fraction
        marking = marking or self.settings.adaptive_marking
        if cycles < 1:
            raise InvalidArgumentError("cycles must be positive")

        _, mesh = build_mesh(self.problem, level, shape, self.settings.data_dir)
        results: List[LevelResult] = []
        for cycle in range(cycles):
            result = self.solve_on(mesh, k, f"a{cycle}")
            results.append(result)
            if cycle == cycles - 1:
                break
            refined = refine_adaptive(
                result.mesh, jump_indicator(result.solution), fraction, marking
            )
            if refined is result.mesh:
                break
            mesh = refined
        return _with_rates(results)


def _with_rates(results: List[LevelResult]) -> List[LevelResult]:
    records = fill_rates([r.record for r in results])
    for result, record in zip(results, records):
        result.record = record
    return results


def get_experiment_runner(
    problem: ProblemSpec, config: StabilizationConfig, **kwargs
) -> ExperimentRunner:
    """Factory for the experiment runner."""
    return ExperimentRunner(problem, config, **kwargs)
