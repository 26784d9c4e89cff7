"""
Experiment configuration
Dotenv-style KEY=VALUE files with a schema version, validated into an
ExperimentConfig, plus environment-variable defaults
"""

import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from dotenv import dotenv_values

from codband.errors import CodbandError, ConfigError
from codband.policies import POLICY_REGISTRY, PolicySettings
from codband.services.environment import EnvConfig

SCHEMA_VERSION = "1"
DEFAULT_POLICIES = ("codband", "linucb", "thompson", "restart_ts", "oracle_linucb")


@dataclass(frozen=True)
class GridRow:
    """One environment variation: N, K, S_min, S_max, T, sigma"""

    n_users: int
    n_models: int
    s_min: int
    s_max: int
    horizon: int
    noise_sd: float

    def apply(self, env: EnvConfig) -> EnvConfig:
        return replace(env, n_users=self.n_users, n_models=self.n_models, s_min=self.s_min,
                       s_max=self.s_max, horizon=self.horizon, noise_sd=self.noise_sd,
                       mixture_weights=None)


# Table of regret under varying K, stationary-period bounds and noise, at desk
# scale: N=20, horizon and period bounds divided by 3
DEFAULT_GRID = (
    GridRow(20, 10, 167, 1000, 1000, 0.1),
    GridRow(20, 50, 167, 1000, 1000, 0.1),
    GridRow(20, 100, 167, 1000, 1000, 0.1),
    GridRow(20, 10, 67, 167, 1000, 0.1),
    GridRow(20, 10, 167, 267, 1000, 0.1),
    GridRow(20, 10, 267, 367, 1000, 0.1),
    GridRow(20, 10, 167, 1000, 1000, 0.13),
    GridRow(20, 10, 167, 1000, 1000, 0.16),
)


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    policies: Tuple[str, ...] = DEFAULT_POLICIES
    settings: PolicySettings = field(default_factory=PolicySettings)
    # None means the policies assume the environment's noise level
    policy_noise_sd: Optional[float] = None
    replications: int = 1
    seed: int = 0
    output_dir: Path = field(default_factory=lambda: Path(os.getenv("CODBAND_OUTPUT_DIR", "results")))
    n_jobs: int = field(default_factory=lambda: int(os.getenv("CODBAND_N_JOBS", "1")))
    grid: Optional[Tuple[GridRow, ...]] = None
    source: Optional[str] = None

    def __post_init__(self):
        if not self.policies:
            raise ConfigError("policy list is empty")
        unknown = [name for name in self.policies if name not in POLICY_REGISTRY]
        if unknown:
            raise ConfigError(f"unknown policies: {', '.join(unknown)}; "
                              f"choose from {', '.join(sorted(POLICY_REGISTRY))}")
        if self.replications < 1:
            raise ConfigError(f"replications must be at least 1, got {self.replications}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed}")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must be a worker count or negative (-1 uses every core), got 0")
        envs = [self.env] + [row.apply(self.env) for row in self.grid or ()]
        for env in envs:
            noise_sd = self.policy_settings(env).noise_sd
            if not noise_sd > 0:
                raise ConfigError(f"policy noise_sd must be positive, got {noise_sd}; "
                                  "set POLICY_NOISE_SD when the environment is noiseless")
        self.output_dir = Path(self.output_dir)

    def policy_settings(self, env: EnvConfig) -> PolicySettings:
        noise_sd = self.policy_noise_sd if self.policy_noise_sd is not None else env.noise_sd
        return replace(self.settings, noise_sd=noise_sd)

    def to_dict(self) -> Dict[str, Any]:
        """Resolved configuration for the manifest"""
        settings = asdict(self.policy_settings(self.env))
        settings["window"] = self.policy_settings(self.env).resolved_window
        return {
            "schema_version": SCHEMA_VERSION,
            "source": self.source,
            "env": asdict(self.env),
            "policies": list(self.policies),
            "policy_settings": settings,
            "replications": self.replications,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "n_jobs": self.n_jobs,
            "grid": [asdict(row) for row in self.grid] if self.grid else None,
        }


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _grid(text: str) -> Tuple[GridRow, ...]:
    rows = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 6:
            raise ValueError(f"grid row {chunk!r} needs N,K,S_MIN,S_MAX,T,SIGMA")
        n, k, s_min, s_max, horizon = (int(p) for p in parts[:5])
        rows.append(GridRow(n, k, s_min, s_max, horizon, float(parts[5])))
    if not rows:
        raise ValueError("grid has no rows")
    return tuple(rows)


# key -> (section, field, parser)
KEYS: Dict[str, Tuple[str, str, Callable[[str], Any]]] = {
    "N_USERS": ("env", "n_users", int),
    "HORIZON": ("env", "horizon", int),
    "DIM": ("env", "dim", int),
    "POOL_SIZE": ("env", "pool_size", int),
    "CANDIDATES": ("env", "candidates_per_round", int),
    "S_MIN": ("env", "s_min", int),
    "S_MAX": ("env", "s_max", int),
    "NOISE_SD": ("env", "noise_sd", float),
    "SETTING": ("env", "setting", str.strip),
    "N_MODELS": ("env", "n_models", int),
    "MIXTURE_WEIGHTS": ("env", "mixture_weights", _floats),
    "DP_ALPHA": ("env", "dp_alpha", float),
    "RIDGE": ("settings", "ridge", float),
    "DELTA1": ("settings", "delta1", float),
    "DELTA2": ("settings", "delta2", float),
    "WINDOW": ("settings", "window", int),
    "TAU_RHO": ("settings", "tau_rho", float),
    "GAMMA_A": ("settings", "gamma_a", float),
    "GAMMA_B": ("settings", "gamma_b", float),
    "ALPHA0": ("settings", "alpha0", float),
    "GIBBS_EVERY": ("settings", "gibbs_every", int),
    "POLICIES": ("top", "policies", _names),
    "POLICY_NOISE_SD": ("top", "policy_noise_sd", float),
    "REPLICATIONS": ("top", "replications", int),
    "SEED": ("top", "seed", int),
    "OUTPUT_DIR": ("top", "output_dir", Path),
    "N_JOBS": ("top", "n_jobs", int),
    "GRID": ("top", "grid", _grid),
}


def _line_of(path: Path, key: str) -> Optional[int]:
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            stripped = line.strip()
            if stripped.startswith("export "):
                stripped = stripped[len("export "):].lstrip()
            if stripped.split("=", 1)[0].strip() == key:
                return number
    return None


def _fail(path: Path, key: str, message: str):
    line = _line_of(path, key)
    where = f"{path}:{line}" if line is not None else str(path)
    raise ConfigError(f"{where}: {key}: {message}")


def _check_resolved(path: Path, file_keys, env: EnvConfig, top: Dict[str, Any], overrides: Dict[str, Any]):
    """Reject values that parse but cannot run, naming the line they came from"""
    if top.get("n_jobs") == 0 and "N_JOBS" in file_keys and overrides.get("n_jobs") is None:
        _fail(path, "N_JOBS", "must be a worker count or negative (-1 uses every core), got 0")
    overridden = top.get("policy_noise_sd") is not None
    noise_sd = top["policy_noise_sd"] if overridden else env.noise_sd
    key = "POLICY_NOISE_SD" if overridden else "NOISE_SD"
    if not noise_sd > 0 and key in file_keys and overrides.get("policy_noise_sd") is None:
        _fail(path, key, f"policy noise level must be positive, got {noise_sd}; "
                         "set POLICY_NOISE_SD to the noise level the policies should assume")


def load_config(path=None, **overrides) -> ExperimentConfig:
    """
    Read an experiment configuration file

    Args:
        path: KEY=VALUE file with SCHEMA_VERSION=1, or None for defaults
        **overrides: ExperimentConfig fields taking precedence over the file
            (None values are ignored)

    Returns:
        Validated ExperimentConfig
    """
    sections: Dict[str, Dict[str, Any]] = {"env": {}, "settings": {}, "top": {}}
    file_keys = set()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values = dotenv_values(path)
        file_keys = set(values)
        version = values.pop("SCHEMA_VERSION", None)
        if version is None:
            raise ConfigError(f"{path}: SCHEMA_VERSION is required")
        if version.strip() != SCHEMA_VERSION:
            _fail(path, "SCHEMA_VERSION", f"unsupported version {version!r}, expected {SCHEMA_VERSION}")
        for key, raw in values.items():
            if key not in KEYS:
                _fail(path, key, "unknown key")
            if raw is None or not raw.strip():
                _fail(path, key, "missing value")
            section, name, parse = KEYS[key]
            try:
                sections[section][name] = parse(raw)
            except ValueError as e:
                _fail(path, key, f"cannot parse {raw!r}: {e}")
        sections["top"]["source"] = str(path)

    sections["top"].update({k: v for k, v in overrides.items() if v is not None})
    try:
        env = EnvConfig(**sections["env"])
        settings = PolicySettings(**sections["settings"])
        if path is not None:
            _check_resolved(path, file_keys, env, sections["top"], overrides)
        config = ExperimentConfig(env=env, settings=settings, **sections["top"])
        config.policy_settings(env).detector_config()
        return config
    except ConfigError:
        raise
    except CodbandError as e:
        raise ConfigError(str(e)) from e


def grid_rows(config: ExperimentConfig) -> List[GridRow]:
    return list(config.grid) if config.grid else list(DEFAULT_GRID)
