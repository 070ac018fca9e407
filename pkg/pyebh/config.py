"""Run configurations for the command line tool.

Each subcommand reads one JSON object. Keys map one to one onto the fields of the
matching dataclass below; unknown keys are rejected before anything is computed.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type, TypeVar

from pyebh.analyze.methods import ALL_METHODS, check_methods
from pyebh.core.calibrators import CalibratorSpecError, parse_calibrator
from pyebh.simulate.harness import DEFAULT_GAMMAS, SimSetting, extended_settings, sparse_settings

C = TypeVar("C", bound="BaseConfig")

PRESETS = ("single", "sparse", "extended")
KNOCKOFF_SOURCES = ("simulate", "bundle", "dataset")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BaseConfig:
    output_dir: str = "output"
    seed: int = 0

    @classmethod
    def from_dict(cls: Type[C], values: Mapping[str, Any]) -> C:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown} for {cls.__name__}; allowed: {sorted(names)}")
        coerced = {key: tuple(value) if isinstance(value, list) else value for key, value in values.items()}
        try:
            config = cls(**coerced)  # type: ignore
            config.validate()
        except TypeError as e:
            raise ConfigError(f"bad value type in config: {e}") from e
        return config

    def validate(self) -> None:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")

    def to_dict(self) -> Dict[str, Any]:
        values = dataclasses.asdict(self)
        return {key: list(value) if isinstance(value, tuple) else value for key, value in values.items()}

    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")


def _check_calibrator(spec: str) -> None:
    try:
        parse_calibrator(spec)
    except CalibratorSpecError as e:
        raise ConfigError(str(e)) from e


@dataclass(frozen=True)
class SimulateConfig(BaseConfig):
    preset: str = "single"
    n: int = 200
    m: int = 40
    k: int = 8
    rho: float = 0.5
    gammas: Tuple[float, ...] = DEFAULT_GAMMAS
    sigma: float = 1.0
    alpha: float = 0.05
    lam: float = 0.5
    methods: Tuple[str, ...] = ALL_METHODS
    reps: int = 500
    calibrator: str = "bounded_poly"
    random_signs: bool = False
    sigma_known: bool = False
    knockoff_d: Optional[Tuple[float, ...]] = None
    grid_size: int = 100
    grid_ratio: float = 1e-3
    threads: int = 1
    plot: bool = True

    def validate(self) -> None:
        super().validate()
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}, got '{self.preset}'")
        if not isinstance(self.reps, int) or self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if not self.gammas:
            raise ConfigError("gammas must not be empty")
        self.settings()

    def _common(self) -> Dict[str, Any]:
        return dict(
            sigma=self.sigma,
            lam=self.lam,
            methods=self.methods,
            reps=self.reps,
            master_seed=self.seed,
            calibrator=self.calibrator,
            random_signs=self.random_signs,
            sigma_known=self.sigma_known,
            knockoff_d=self.knockoff_d,
            grid_size=self.grid_size,
            grid_ratio=self.grid_ratio,
        )

    def settings(self) -> List[SimSetting]:
        """Settings to run, each over every gamma in `gammas`."""
        try:
            if self.preset == "sparse":
                return sparse_settings(self.alpha, self.rho, **self._common())
            if self.preset == "extended":
                return extended_settings(self.alpha, **self._common())
            return [SimSetting(n=self.n, m=self.m, k=self.k, rho=self.rho, alpha=self.alpha, **self._common())]
        except (ValueError, CalibratorSpecError) as e:
            raise ConfigError(str(e)) from e


@dataclass(frozen=True)
class AnalyzeConfig(BaseConfig):
    resistance_csv: str = ""
    mutation_csv: str = ""
    panel_csv: Optional[str] = None
    drugs: Tuple[str, ...] = ()
    alpha: float = 0.05
    lam: float = 0.5
    methods: Tuple[str, ...] = ALL_METHODS
    calibrator: str = "bounded_poly"
    log_transform: bool = False
    min_count: int = 3
    grid_size: int = 100
    grid_ratio: float = 1e-3
    plot: bool = True

    def validate(self) -> None:
        super().validate()
        if not self.resistance_csv or not self.mutation_csv:
            raise ConfigError("resistance_csv and mutation_csv are required")
        if not self.drugs:
            raise ConfigError("drugs must list at least one drug column")
        _check_alpha(self.alpha)
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lam must lie in (0, 1), got {self.lam}")
        if self.min_count < 1:
            raise ConfigError(f"min_count must be >= 1, got {self.min_count}")
        try:
            check_methods(self.methods)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        _check_calibrator(self.calibrator)


@dataclass(frozen=True)
class CalibratorCheckConfig(BaseConfig):
    calibrators: Tuple[str, ...] = ("bounded_poly", "all_or_nothing(r=0.5)", "power(kappa=0.3)", "inverse_sqrt")
    alpha: float = 0.05
    tol: float = 1e-9

    def validate(self) -> None:
        super().validate()
        _check_alpha(self.alpha)
        if not self.calibrators:
            raise ConfigError("calibrators must not be empty")
        for spec in self.calibrators:
            _check_calibrator(spec)
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class KnockoffCheckConfig(BaseConfig):
    source: str = "simulate"
    n: int = 60
    m: int = 10
    rho: float = 0.5
    bundle_dir: Optional[str] = None
    resistance_csv: Optional[str] = None
    mutation_csv: Optional[str] = None
    drug: Optional[str] = None
    min_count: int = 3
    tol: float = 1e-8
    save_bundle: bool = False

    def validate(self) -> None:
        super().validate()
        if self.source not in KNOCKOFF_SOURCES:
            raise ConfigError(f"source must be one of {KNOCKOFF_SOURCES}, got '{self.source}'")
        if self.source == "simulate":
            if self.m < 1 or self.n < 2 * self.m:
                raise ConfigError(f"need n >= 2m >= 2, got n={self.n}, m={self.m}")
            if not 0.0 <= self.rho < 1.0:
                raise ConfigError(f"rho must lie in [0, 1), got {self.rho}")
        if self.source == "bundle" and not self.bundle_dir:
            raise ConfigError("source 'bundle' needs bundle_dir")
        if self.source == "dataset" and not (self.resistance_csv and self.mutation_csv and self.drug):
            raise ConfigError("source 'dataset' needs resistance_csv, mutation_csv and drug")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")


CONFIGS: Dict[str, Type[BaseConfig]] = {
    "simulate": SimulateConfig,
    "analyze": AnalyzeConfig,
    "calibrator-check": CalibratorCheckConfig,
    "knockoff-check": KnockoffCheckConfig,
}


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        try:
            values = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return values


def parse_assignment(assignment: str) -> Tuple[str, Any]:
    """'key=value' with a JSON value; bare words are taken as strings."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects key=value, got '{assignment}'")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(
    subcommand: str, path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> BaseConfig:
    values = read_config_file(path)
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return CONFIGS[subcommand].from_dict(values)
