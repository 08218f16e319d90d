"""Experiment configuration: nested dataclasses with strict JSON round-trip.

Every default matches the hyperparameter tables the experiments run with;
a configuration file only needs to state deviations.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..cad import PHI_CHOICES, CadParams
from ..errors import ConfigError
from .tasks import TASKS


@dataclass
class DatasetConfig:
    """The task id picks the rule models; ``csv_path`` (when set) supplies the
    data in place of the builtin generator, with an optional schema override."""

    id: str = "compas"  # compas | german | cc
    csv_path: str | None = None
    label_column: str | None = None
    schema: list[dict] | None = None
    n_rows: int = 2000  # generation size for builtin datasets
    train_fraction: float = 0.9
    n_uncorrelated: int | None = None  # None -> task default
    seed_offset: int = 0


@dataclass
class AttackConfig:
    enabled: bool = False
    n_harmless: int = 1
    scheme: str | None = None  # None -> mirror the audited explainer
    copies: int = 1
    scale: float = 1.0


@dataclass
class LimeConfig:
    kernel_width_rule: str = "sqrt"  # "sqrt": 0.75*sqrt(F); "linear": 0.75*F
    kernel_width: float | None = None  # explicit override wins
    num_features: int = 10
    num_samples: int = 5000
    ridge: float = 1.0


@dataclass
class ShapConfig:
    background_k: int = 20
    budget: int | None = None  # None -> min(2^F - 2, 2F + 2048)


@dataclass
class CadConfig:
    k: int = 15
    phi: str = "max"
    epsilon: float = 0.1
    minkowski_p: float = 1.0
    include_self: bool = True
    tau_global: float = 0.115
    tau_defend: float = 0.75
    n_train_fraction: float = 0.9
    n_p_cap: int | None = None  # None -> min(full pool, 10x reference size)
    max_recursion: int = 8

    def params(self) -> CadParams:
        return CadParams(
            k=self.k,
            phi=self.phi,
            epsilon=self.epsilon,
            minkowski_p=self.minkowski_p,
            include_self=self.include_self,
            tau_defend=self.tau_defend,
        )


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    explainer: str = "lime"  # lime | shap
    lime: LimeConfig = field(default_factory=LimeConfig)
    shap: ShapConfig = field(default_factory=ShapConfig)
    cad: CadConfig = field(default_factory=CadConfig)
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    explain_cap: int | None = None  # None -> explain every held-out row
    defended_n_p: int | None = None  # None -> same as the plain neighborhood
    output_dir: str = "runs"

    def validate(self) -> "ExperimentConfig":
        if self.explainer not in ("lime", "shap"):
            raise ConfigError(f"unknown explainer {self.explainer!r}")
        if self.dataset.id not in TASKS:
            raise ConfigError(f"unknown dataset id {self.dataset.id!r}")
        if self.attack.n_harmless not in (1, 2):
            raise ConfigError("attack.n_harmless must be 1 or 2")
        if self.cad.phi not in PHI_CHOICES:
            raise ConfigError(f"cad.phi must be one of {PHI_CHOICES}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.lime.kernel_width_rule not in ("sqrt", "linear"):
            raise ConfigError("lime.kernel_width_rule must be 'sqrt' or 'linear'")
        return self


_SECTIONS = {
    "dataset": DatasetConfig,
    "attack": AttackConfig,
    "lime": LimeConfig,
    "shap": ShapConfig,
    "cad": CadConfig,
}


def _build_section(cls, data: dict, path: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {', '.join(sorted(unknown))}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            section = data.pop(name)
            if not isinstance(section, dict):
                raise ConfigError(f"section {name!r} must be an object")
            kwargs[name] = _build_section(cls, section, name)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    kwargs.update(data)
    return ExperimentConfig(**kwargs).validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")
