# Services package
from hdg_ip.services.assembly import CondensedSystem, FullSystem, assemble, assemble_full
from hdg_ip.services.fespace import FeSpace
from hdg_ip.services.mesh import Mesh, classify_boundary, generate_holed_square, generate_structured
from hdg_ip.services.model import ProblemSpec, get_testcase
from hdg_ip.services.orchestrator import ExperimentRunner, get_experiment_runner
from hdg_ip.services.solver import Solution, solve
from hdg_ip.services.stabilization import StabilizationConfig

__all__ = [
    "CondensedSystem",
    "FullSystem",
    "assemble",
    "assemble_full",
    "FeSpace",
    "Mesh",
    "classify_boundary",
    "generate_holed_square",
    "generate_structured",
    "ProblemSpec",
    "get_testcase",
    "ExperimentRunner",
    "get_experiment_runner",
    "Solution",
    "solve",
    "StabilizationConfig",
]
