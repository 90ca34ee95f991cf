"""
Settings for grids, tolerances, solver limits and logging.

Values come from environment variables or a ``.env`` file through
python-decouple, or from an explicit ``key = value`` file given on the command
line. Command-line flags are applied last as overrides.
"""

import logging
import os
from dataclasses import dataclass, fields, replace

from decouple import Config, RepositoryEnv, UndefinedValueError, config

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class Settings:
    """Resolved configuration of a run."""

    n_theta: int = 32
    n_phi: int = 64
    tolerance: float = 1e-8
    seed: int = 0
    threads: int = 1
    kernel_tau: float = 1e-6
    gap_ratio: float = 10.0
    dense_limit: int = 6000
    max_iterations: int = 60
    geodesic_points: int = 96
    geodesic_random_seeds: int = 10
    strict: bool = False
    log_level: str = "INFO"

    # Environment/file key for each field
    KEYS = {
        "n_theta": ("N_THETA", int),
        "n_phi": ("N_PHI", int),
        "tolerance": ("TOLERANCE", float),
        "seed": ("SEED", int),
        "threads": ("THREADS", int),
        "kernel_tau": ("KERNEL_TAU", float),
        "gap_ratio": ("GAP_RATIO", float),
        "dense_limit": ("DENSE_LIMIT", int),
        "max_iterations": ("MAX_ITERATIONS", int),
        "geodesic_points": ("GEODESIC_POINTS", int),
        "geodesic_random_seeds": ("GEODESIC_RANDOM_SEEDS", int),
        "strict": ("STRICT", _as_bool),
        "log_level": ("LOG_LEVEL", str),
    }

    def __post_init__(self):
        problems = []
        if self.n_theta < 4:
            problems.append(f"N_THETA must be at least 4, got {self.n_theta}")
        if self.n_phi < 8 or self.n_phi % 2:
            problems.append(f"N_PHI must be even and at least 8, got {self.n_phi}")
        if self.tolerance <= 0:
            problems.append(f"TOLERANCE must be positive, got {self.tolerance}")
        if self.threads < 1:
            problems.append(f"THREADS must be at least 1, got {self.threads}")
        if not 0 < self.kernel_tau < 1:
            problems.append(f"KERNEL_TAU must lie in (0, 1), got {self.kernel_tau}")
        if self.gap_ratio <= 1:
            problems.append(f"GAP_RATIO must exceed 1, got {self.gap_ratio}")
        if self.geodesic_points < 12:
            problems.append(
                f"GEODESIC_POINTS must be at least 12, got {self.geodesic_points}"
            )
        if self.geodesic_random_seeds < 0:
            problems.append("GEODESIC_RANDOM_SEEDS must be non-negative")
        if not isinstance(logging.getLevelName(str(self.log_level).upper()), int):
            problems.append(f"LOG_LEVEL is not a logging level: {self.log_level}")
        if problems:
            for problem in problems:
                logger.error(problem)
            raise ConfigurationError("; ".join(problems))

    @classmethod
    def load(cls, path: str | None = None, **overrides) -> "Settings":
        """
        Resolve settings from the environment, an optional file and overrides.

        Args:
            path: Optional ``key = value`` file read with decouple's RepositoryEnv
            **overrides: Field values that win over every other source (None is ignored)

        Returns:
            The resolved Settings
        """
        if path is not None:
            if not os.path.isfile(path):
                logger.error(f"Config file not found: {path}")
                raise ConfigurationError(f"Config file not found: {path}")
            source = Config(RepositoryEnv(path))
        else:
            source = config

        values = {}
        for field in fields(cls):
            key, cast = cls.KEYS[field.name]
            try:
                values[field.name] = source(key, default=field.default, cast=cast)
            except (ValueError, UndefinedValueError) as e:
                logger.error(f"Invalid value for {key}: {e}")
                raise ConfigurationError(f"Invalid value for {key}: {e}") from e

        settings = cls(**values)
        return settings.with_overrides(**overrides)

    def with_overrides(self, **overrides) -> "Settings":
        """Return a copy with the non-None overrides applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigurationError(f"Unknown settings: {', '.join(sorted(unknown))}")
        applied = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **applied) if applied else self
