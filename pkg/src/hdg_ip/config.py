"""
HDG-IP Solver - Configuration

Process-wide settings loaded from environment variables (prefix ``HDG_``) or a
``.env`` file. Run-level options live in ``commands.run.RunConfig``.
"""

from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Application
    app_name: str = "HDG-IP Solver"
    log_level: str = "INFO"

    # Data & output
    data_dir: Optional[Path] = None  # HDG_DATA_DIR, written by `hdg-ip mesh`
    output_dir: Path = Path("out")

    # Linear solver
    solver_method: str = "direct"
    solver_tol: float = 1e-10
    gmres_restart: int = 60
    gmres_max_iterations: int = 2000
    ilu_drop_tol: float = 1e-6
    ilu_fill_factor: float = 20.0

    # Assembly
    condition_limit: float = 1e14  # local A_uu above this is treated as singular
    classification_tol: float = 1e-12  # relative, for Fichera sign tests

    # Adaptive refinement
    adaptive_fraction: float = 0.3
    adaptive_cycles: int = 6
    adaptive_marking: str = "bulk"  # or "fraction"

    # Parallelism
    jobs: int = 1

    model_config = SettingsConfigDict(
        env_prefix="HDG_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        """Accept lower-case level names from the environment."""
        return str(v).upper()

    @field_validator("solver_method")
    @classmethod
    def check_solver_method(cls, v: str) -> str:
        if v not in ("direct", "iterative"):
            raise ValueError("solver_method must be 'direct' or 'iterative'")
        return v

    @field_validator("adaptive_marking")
    @classmethod
    def check_adaptive_marking(cls, v: str) -> str:
        if v not in ("bulk", "fraction"):
            raise ValueError("adaptive_marking must be 'bulk' or 'fraction'")
        return v


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
