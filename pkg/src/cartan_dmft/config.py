"""
Run configuration: a JSON file of run parameters, validated before any computation.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from . import (DEFAULT_CNOT_ERROR, DEFAULT_ETA, DEFAULT_F_CNOT, DEFAULT_MAX_ITER, DEFAULT_MAX_RERUNS,
               DEFAULT_RATE_MULTIPLIER, DEFAULT_SETTLE_STEPS, DEFAULT_SHOTS, DEFAULT_SOLUTIONS,
               DEFAULT_TIME_POINTS, DEFAULT_TOLERANCE, DEFAULT_V0, OUTPUT_DIR, RATE_BAND)
from .dmft import MeasurementConfig
from .sim import NoiseModel
from .validation import InputValidator, ValidationError

logger = logging.getLogger(__name__)

# Fields that do not change any computed number
UNHASHED_KEYS = ("jobs", "output_dir")


class ConfigError(Exception):
    """Raised for unreadable config files, unknown keys or invalid values."""
    pass


@dataclass
class RunConfig:
    U: float = 2.0
    V: float = 0.944
    U_list: List[float] = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 8.0, 10.0])
    V0: float = DEFAULT_V0
    tolerance: float = DEFAULT_TOLERANCE
    max_iter: int = DEFAULT_MAX_ITER
    settle_steps: int = DEFAULT_SETTLE_STEPS
    mixing: float = 0.0
    exact: bool = True
    shots: int = DEFAULT_SHOTS
    noise: bool = False
    cnot_error: float = DEFAULT_CNOT_ERROR
    readout_p10: float = 0.0
    readout_p01: float = 0.0
    n_solutions: int = DEFAULT_SOLUTIONS
    n_points: int = DEFAULT_TIME_POINTS
    rate_multiplier: float = DEFAULT_RATE_MULTIPLIER
    max_attempts: int = DEFAULT_MAX_RERUNS
    seed: int = 0
    eta: float = DEFAULT_ETA
    f_cnot: float = DEFAULT_F_CNOT
    t_grid: List[float] = field(default_factory=lambda: [float(t) for t in range(1, 9)])
    r_grid: List[int] = field(default_factory=lambda: [4, 8, 16, 32, 64])
    landscape_r: List[int] = field(default_factory=lambda: list(range(1, 65)))
    trotter_U: float = 2.0
    trotter_V: float = 0.94
    output_dir: str = str(OUTPUT_DIR)
    jobs: int = 1

    def validate(self) -> 'RunConfig':
        """Normalize every field in place.

        Raises:
            ConfigError: wrapping the first ValidationError
        """
        try:
            v = InputValidator
            self.U = v.validate_interaction(self.U)
            self.V = v.validate_hybridization(self.V)
            self.U_list = v.validate_u_list(self.U_list)
            self.V0 = v.validate_hybridization(self.V0)
            self.tolerance = v.validate_float(self.tolerance, 'tolerance', min_val=0.0, allow_min=False)
            self.max_iter = v.validate_integer(self.max_iter, min_val=1)
            self.settle_steps = v.validate_integer(self.settle_steps, min_val=1)
            self.mixing = v.validate_float(self.mixing, 'mixing', 0.0, 1.0)
            if self.mixing >= 1.0:
                raise ValidationError("mixing must be below 1")
            self.exact = self._flag(self.exact, 'exact')
            self.noise = self._flag(self.noise, 'noise')
            self.shots = v.validate_shots(self.shots)
            self.cnot_error = v.validate_probability(self.cnot_error, 'cnot_error')
            self.readout_p10 = v.validate_probability(self.readout_p10, 'readout_p10')
            self.readout_p01 = v.validate_probability(self.readout_p01, 'readout_p01')
            self.n_solutions = v.validate_integer(self.n_solutions, min_val=1)
            self.n_points = v.validate_integer(self.n_points, min_val=8)
            self.rate_multiplier = v.validate_rate_multiplier(self.rate_multiplier, RATE_BAND)
            self.max_attempts = v.validate_integer(self.max_attempts, min_val=1)
            self.seed = v.validate_seed(self.seed)
            self.eta = v.validate_float(self.eta, 'eta', min_val=0.0, allow_min=False)
            self.f_cnot = v.validate_probability(self.f_cnot, 'f_cnot')
            self.t_grid = [v.validate_float(t, 't', min_val=0.0) for t in self._list(self.t_grid, 't_grid')]
            self.r_grid = [v.validate_integer(r, min_val=1) for r in self._list(self.r_grid, 'r_grid')]
            self.landscape_r = [v.validate_integer(r, min_val=1) for r in self._list(self.landscape_r, 'landscape_r')]
            self.trotter_U = v.validate_interaction(self.trotter_U)
            self.trotter_V = v.validate_hybridization(self.trotter_V)
            self.jobs = v.validate_integer(self.jobs, min_val=1)
            if not isinstance(self.output_dir, str) or not self.output_dir.strip():
                raise ValidationError("output_dir must be a nonempty string")
        except ValidationError as e:
            raise ConfigError(str(e)) from e
        return self

    @staticmethod
    def _flag(value, name: str) -> bool:
        if not isinstance(value, bool):
            raise ValidationError(f"{name} must be true or false")
        return value

    @staticmethod
    def _list(value, name: str) -> list:
        if not isinstance(value, (list, tuple)) or not value:
            raise ValidationError(f"{name} must be a nonempty list")
        return list(value)

    def noise_model(self) -> Optional[NoiseModel]:
        if not self.noise:
            return None
        return NoiseModel.uniform_readout(self.cnot_error, self.readout_p10, self.readout_p01, 5)

    def measurement(self) -> MeasurementConfig:
        return MeasurementConfig(n_points=self.n_points,
                                 shots=None if self.exact else self.shots,
                                 noise=self.noise_model(),
                                 n_solutions=self.n_solutions,
                                 seed=self.seed,
                                 rate_multiplier=self.rate_multiplier,
                                 max_attempts=self.max_attempts)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def canonical_json(self) -> str:
        """Canonical JSON of the fields that affect results (not jobs or output_dir)."""
        data = {k: v for k, v in self.to_dict().items() if k not in UNHASHED_KEYS}
        return json.dumps(data, sort_keys=True, separators=(',', ':'))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)


def known_keys() -> Tuple[str, ...]:
    return tuple(f.name for f in fields(RunConfig))


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    """Build and validate a RunConfig; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("Config must be a JSON object")
    unknown = sorted(set(data) - set(known_keys()))
    if unknown:
        raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")
    return RunConfig(**data).validate()


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a JSON config file (optional) and apply command-line overrides on top."""
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("Config must be a JSON object")
        logger.info(f"Loaded config from {path}")
    data = dict(data)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(data)
