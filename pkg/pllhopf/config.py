"""Layered configuration: files, programmatic values, environment and defaults."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .exceptions import ConfigurationError, DomainError
from .utils import parse_mu_range, parse_n_range, parse_offsets

logger = logging.getLogger(__name__)

ENV_PREFIX = "PLLHOPF_"

COMMANDS = ("equilibria", "hopf", "lyapunov", "verify", "simulate")


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one CLI invocation or analyzer session."""

    command: str | None = None
    K: float = 1.05
    mu: float = 0.15
    tau: float | None = None
    N: int | None = None
    mu_range: tuple[float, float, float] = (0.05, 0.005, 0.5)
    n_range: tuple[int, int] = (0, 6)
    branch: str = "minus"
    output_path: str | None = None
    format: str = "csv"
    dt: float | None = None
    steps_per_delay: int = 40
    t_end: float | None = None
    eps: float = 1e-2
    scan_amplitude: float = 5e-2
    settle_fraction: float = 0.5
    offsets: tuple[float, ...] | None = None
    identical_history: bool = False
    published_weights: bool = False
    workers: int = 1
    point: str | None = None

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> RunConfig:
        """Build a config from a merged mapping, coercing string values."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            logger.warning(f"⚠️ Ignoring unknown configuration keys: {', '.join(unknown)}")

        kwargs: dict[str, Any] = {}
        for name, value in values.items():
            if name not in known or value is None:
                continue
            try:
                kwargs[name] = _COERCE[name](value)
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"Invalid value for '{name}': {value!r} ({e})") from e

        config = cls(**kwargs)
        config.validate()
        return config

    def validate(self) -> None:
        """Check every field against the preconditions of the module that consumes it."""
        if self.command is not None and self.command not in COMMANDS:
            raise ConfigurationError(
                f"Unknown command '{self.command}'. Valid commands: {', '.join(COMMANDS)}"
            )
        if self.K <= 0:
            raise DomainError(f"K must be > 0, got {self.K}")
        if self.mu <= 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        if self.tau is not None and self.tau < 0:
            raise DomainError(f"tau must be >= 0, got {self.tau}")
        if self.N is not None and self.N < 2:
            raise DomainError(f"N must be >= 2, got {self.N}")
        if self.branch not in ("plus", "minus"):
            raise ConfigurationError(f"branch must be 'plus' or 'minus', got '{self.branch}'")
        if self.format not in ("csv", "json"):
            raise ConfigurationError(f"format must be 'csv' or 'json', got '{self.format}'")

        start, step, stop = self.mu_range
        if step <= 0 or stop < start or start <= 0:
            raise DomainError(
                f"mu range needs 0 < start <= stop and step > 0, got {start}:{step}:{stop}"
            )
        lo, hi = self.n_range
        if lo < 0 or hi < lo:
            raise DomainError(f"n range needs 0 <= lo <= hi, got {lo}..{hi}")

        if self.steps_per_delay < 20:
            raise DomainError(f"steps_per_delay must be >= 20, got {self.steps_per_delay}")
        if self.dt is not None and self.dt <= 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.t_end is not None and self.t_end <= 0:
            raise DomainError(f"t_end must be > 0, got {self.t_end}")
        if self.eps < 0:
            raise DomainError(f"eps must be >= 0, got {self.eps}")
        if self.scan_amplitude <= 0:
            raise DomainError(f"scan_amplitude must be > 0, got {self.scan_amplitude}")
        if not 0 <= self.settle_fraction < 1:
            raise DomainError(f"settle_fraction must lie in [0, 1), got {self.settle_fraction}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")
        if self.point is not None and self.point.upper() not in ("A", "B", "C"):
            raise ConfigurationError(f"point must be one of A, B, C, got '{self.point}'")


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    parsed = _parse_bool(str(value))
    if parsed is None:
        raise ValueError("expected a boolean")
    return parsed


def _to_mu_range(value: Any) -> tuple[float, float, float]:
    if isinstance(value, str):
        return parse_mu_range(value)
    start, step, stop = (float(v) for v in value)
    return start, step, stop


def _to_n_range(value: Any) -> tuple[int, int]:
    if isinstance(value, str):
        return parse_n_range(value)
    if isinstance(value, int):
        return value, value
    lo, hi = (int(v) for v in value)
    return lo, hi


def _to_offsets(value: Any) -> tuple[float, ...]:
    if isinstance(value, str):
        return parse_offsets(value)
    return tuple(float(v) for v in value)


_COERCE: dict[str, Any] = {
    "command": str,
    "K": float,
    "mu": float,
    "tau": float,
    "N": int,
    "mu_range": _to_mu_range,
    "n_range": _to_n_range,
    "branch": lambda v: str(v).lower(),
    "output_path": str,
    "format": lambda v: str(v).lower(),
    "dt": float,
    "steps_per_delay": int,
    "t_end": float,
    "eps": float,
    "scan_amplitude": float,
    "settle_fraction": float,
    "offsets": _to_offsets,
    "identical_history": _to_bool,
    "published_weights": _to_bool,
    "workers": int,
    "point": lambda v: str(v).upper(),
}


def load_config(
    config_path: str | None = None,
    config_dict: dict[str, Any] | None = None,
    use_env: bool = True,
) -> dict[str, Any]:
    """
    Load configuration with layered priority.

    Priority (highest first): programmatic dict, explicit or discovered config
    file, ``PLLHOPF_*`` environment variables. Missing keys fall back to the
    ``RunConfig`` defaults when the mapping is turned into a ``RunConfig``.
    """
    config: dict[str, Any] = {}

    if config_path:
        file_config = _load_config_file(config_path)
        config.update(_normalize_config(file_config))
        logger.info(f"✓ Loaded configuration from {config_path}")

    else:
        default_paths = [
            Path.cwd() / "pllhopf.json",
            Path.cwd() / "pllhopf.yaml",
            Path.cwd() / "pllhopf.yml",
            Path.home() / ".config" / "pllhopf" / "config.json",
            Path.home() / ".config" / "pllhopf" / "config.yaml",
            Path.home() / ".config" / "pllhopf" / "config.yml",
        ]

        for path in default_paths:
            if path.exists():
                file_config = _load_config_file(str(path))
                config.update(_normalize_config(file_config))
                logger.info(f"✓ Loaded configuration from discovered file: {path}")
                break

    if config_dict:
        config.update(_normalize_config(config_dict))
        logger.debug("✓ Loaded configuration from programmatic dict")

    if use_env:
        env_config = _load_env_config()
        for key, value in env_config.items():
            if key not in config or config[key] is None:
                config[key] = value

    return config


def build_run_config(
    config_path: str | None = None,
    config_dict: dict[str, Any] | None = None,
    use_env: bool = True,
) -> RunConfig:
    """Load, merge and validate configuration into a ``RunConfig``."""
    return RunConfig.from_mapping(load_config(config_path, config_dict, use_env))


def _load_config_file(path: str) -> dict[str, Any] | Any:
    """Load configuration from JSON or YAML file."""
    path_obj = Path(path).expanduser().resolve()

    if not path_obj.exists():
        raise ConfigurationError(f"Config file not found: {path}")

    try:
        content = path_obj.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Failed to read config file {path}: {e}") from e
    if not content.strip():
        return {}

    if path_obj.suffix in (".yaml", ".yml"):
        try:
            import yaml
        except ImportError:
            raise ConfigurationError(  # noqa: B904
                "YAML support requires 'pyyaml' package. Install with: pip install pyyaml"
            )
        try:
            return yaml.safe_load(content) or {}
        except Exception as e:
            raise ConfigurationError(f"Invalid YAML in {path}: {e}") from e

    try:
        return json.loads(content)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in {path}: {e}") from e


def _load_env_config() -> dict[str, Any]:
    """Collect ``PLLHOPF_<FIELD>`` environment variables."""
    try:
        from dotenv import load_dotenv

        load_dotenv()
    except ImportError:
        pass

    env_config: dict[str, Any] = {}
    for field in dataclasses.fields(RunConfig):
        value = os.getenv(f"{ENV_PREFIX}{field.name.upper()}")
        if value is not None and value.strip():
            env_config[field.name] = value.strip()
    return env_config


def _parse_bool(value: str) -> bool | None:
    """Parse a boolean flag written as text."""
    value_lower = value.lower()
    if value_lower in ("true", "1", "yes", "on", "y"):
        return True
    if value_lower in ("false", "0", "no", "off", "n"):
        return False
    return None


def _normalize_config(config: dict[str, Any]) -> dict[str, Any]:
    """Normalize config keys to the ``RunConfig`` field names."""
    if not isinstance(config, dict):
        raise ConfigurationError(f"Invalid configuration: expected dict, got {type(config)}")

    key_mapping = {
        "K": ["K", "k", "gain"],
        "mu": ["mu", "loop_parameter"],
        "tau": ["tau", "delay"],
        "N": ["N", "nodes", "node_count"],
        "mu_range": ["mu_range", "mu_sweep"],
        "n_range": ["n_range", "n", "branches"],
        "output_path": ["output_path", "output"],
        "identical_history": ["identical_history", "identical"],
    }
    aliases = {alias: std for std, names in key_mapping.items() for alias in names}

    normalized: dict[str, Any] = {}
    for key, value in config.items():
        std_key = aliases.get(key, key)
        if std_key in normalized and key != std_key:
            continue
        normalized[std_key] = value
    return normalized
