"""
HDG-IP Solver - Run Command

Handles:
- hdg-ip run: convergence studies and adaptive runs for Tests A, B and C

Outputs (under --out):
- convergence.csv - one row per (k, level)
- fields_<test>_<k>_<level>.vtk - with --vtk
- run.json - the resolved configuration
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from hdg_ip.config import get_settings
from hdg_ip.errors import HdgError, InvalidArgumentError
from hdg_ip.services.basis import MAX_DEGREE
from hdg_ip.services.model import ProblemSpec, get_testcase
from hdg_ip.services.orchestrator import LevelResult, get_experiment_runner
from hdg_ip.services.postprocess import convergence_table
from hdg_ip.services.stabilization import StabilizationConfig

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """Resolved configuration of one run."""

    testcase: Literal["A", "B", "C"]
    kappa: Optional[float] = Field(default=None, description="Test A diffusion coefficient")
    beta: Optional[List[float]] = Field(default=None, description="Test A advection field")
    scheme: Literal["nip", "iip", "sip"] = "sip"
    stabilization: Literal["add", "sg"] = "sg"
    theta: float = 1.0
    theta_ell: Optional[float] = None
    theta_hyp: Optional[float] = None
    alpha0: Optional[float] = None
    degrees: List[int] = Field(default_factory=lambda: [1])
    levels: List[Union[int, str]] = Field(default_factory=lambda: [4, 8, 16])
    shape: Literal["tri", "quad"] = "quad"
    adaptive: bool = False
    cycles: Optional[int] = Field(default=None, ge=1)
    fraction: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    marking: Optional[Literal["bulk", "fraction"]] = None
    solver: Optional[Literal["direct", "iterative"]] = None
    tol: Optional[float] = Field(default=None, gt=0.0)
    jobs: Optional[int] = Field(default=None, ge=1)
    vtk: bool = False
    out: Optional[Path] = None

    @field_validator("degrees")
    @classmethod
    def check_degrees(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one degree is required")
        for k in v:
            if not 1 <= k <= MAX_DEGREE:
                raise ValueError(f"degree {k} outside 1..{MAX_DEGREE}")
        return v

    @field_validator("levels")
    @classmethod
    def check_levels(cls, v: List[Union[int, str]]) -> List[Union[int, str]]:
        if not v:
            raise ValueError("at least one mesh level is required")
        out: List[Union[int, str]] = []
        for level in v:
            if isinstance(level, str) and level.isdigit():
                level = int(level)
            if isinstance(level, int) and level < 1:
                raise ValueError(f"mesh level {level} must be positive")
            out.append(level)
        return out

    @field_validator("kappa")
    @classmethod
    def check_kappa(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not v > 0:
            raise ValueError("kappa must be positive")
        return v

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        if self.testcase != "A" and (self.kappa is not None or self.beta is not None):
            raise ValueError("kappa and beta only apply to test A")
        if self.beta is not None and len(self.beta) != 2:
            raise ValueError("beta needs two components")
        # fails here, before any mesh is built
        self.stabilization_config()
        return self

    def stabilization_config(self) -> StabilizationConfig:
        return StabilizationConfig.from_labels(
            self.scheme,
            self.stabilization,
            theta=self.theta,
            theta_ell=self.theta_ell,
            theta_hyp=self.theta_hyp,
            alpha0=self.alpha0,
        )

    def problem(self) -> ProblemSpec:
        params: Dict[str, Any] = {}
        if self.testcase == "A":
            params["kappa_scalar"] = 0.5 if self.kappa is None else self.kappa
            if self.beta is not None:
                params["beta"] = tuple(self.beta)
        return get_testcase(self.testcase, **params)

    def output_dir(self) -> Path:
        return self.out if self.out is not None else get_settings().output_dir


# ============================================================================
# Flag parsing
# ============================================================================


def parse_degrees(text: str) -> List[int]:
    """'1,2' or '1..3'."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            first, last = int(lo), int(hi)
            if last < first:
                raise InvalidArgumentError(f"empty degree range '{text}'")
            return list(range(first, last + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InvalidArgumentError(f"cannot parse degrees '{text}'") from None


def parse_levels(text: str) -> List[Union[int, str]]:
    """Comma-separated integers n (h = 1/n) or mesh file paths."""
    out: List[Union[int, str]] = []
    for token in text.split(","):
        token = token.strip()
        if token:
            out.append(int(token) if token.isdigit() else token)
    return out


def _on_off(text: str) -> bool:
    value = text.strip().lower()
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def add_parser(subparsers: Any) -> None:
    parser = subparsers.add_parser("run", help="Run a convergence study or an adaptive run")
    parser.add_argument("--config", type=Path, help="JSON run configuration; flags override it")
    parser.add_argument("--test", dest="testcase", choices=["A", "B", "C"])
    parser.add_argument("--kappa", type=float)
    parser.add_argument("--scheme", choices=["nip", "iip", "sip"])
    parser.add_argument("--stab", dest="stabilization", choices=["add", "sg"])
    parser.add_argument("--theta", type=float)
    parser.add_argument("--theta-ell", dest="theta_ell", type=float)
    parser.add_argument("--theta-hyp", dest="theta_hyp", type=float)
    parser.add_argument("--alpha0", type=float)
    parser.add_argument("--k", dest="degrees", type=parse_degrees)
    parser.add_argument("--levels", type=parse_levels)
    parser.add_argument("--shape", choices=["tri", "quad"])
    parser.add_argument("--adaptive", type=_on_off)
    parser.add_argument("--cycles", type=int)
    parser.add_argument("--fraction", type=float)
    parser.add_argument("--marking", choices=["bulk", "fraction"])
    parser.add_argument("--solver", choices=["direct", "iterative"])
    parser.add_argument("--tol", type=float)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--vtk", action="store_true", default=None)
    parser.add_argument("--out", type=Path)
    parser.set_defaults(func=handle)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    File values first, then every flag given on the command line; the merged
    mapping is validated once, so a file may leave out what the flags supply.
    """
    data: Dict[str, Any] = {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as e:
            raise HdgError(f"cannot read config {args.config}: {e}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"config {args.config} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise InvalidArgumentError(f"config {args.config} must hold a JSON object")
    for name in RunConfig.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if "testcase" not in data:
        raise InvalidArgumentError("a test case is required (--test or config file)")
    return RunConfig.model_validate(data)


# ============================================================================
# Handler
# ============================================================================


def execute(config: RunConfig) -> List[LevelResult]:
    """Run the configured study and write its artifacts."""
    out_dir = config.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(config.model_dump_json(indent=2))

    runner = get_experiment_runner(
        config.problem(),
        config.stabilization_config(),
        solver_method=config.solver,
        tol=config.tol,
        jobs=config.jobs,
        vtk_dir=out_dir if config.vtk else None,
    )
    results: List[LevelResult] = []
    if config.adaptive:
        for k in config.degrees:
            results.extend(
                runner.adaptive_study(
                    k,
                    config.levels[0],
                    config.cycles,
                    config.fraction,
                    config.shape,
                    config.marking,
                )
            )
    else:
        results = runner.uniform_study(config.degrees, config.levels, config.shape)

    table = convergence_table([r.record for r in results])
    csv_path = out_dir / "convergence.csv"
    table.to_csv(csv_path, index=False, float_format="%.10e")
    logger.info(f"Wrote {len(table)} rows to {csv_path}")
    print(table.to_string(index=False))
    return results


def handle(args: argparse.Namespace) -> int:
    execute(resolve_config(args))
    return 0
