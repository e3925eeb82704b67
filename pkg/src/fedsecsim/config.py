"""Experiment configuration: one YAML file, schema-validated, every default explicit.

Unknown sections or keys are rejected so a typo cannot silently fall back
to a default. ``configs/reference.yaml`` in the repository lists every
knob with its default value.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml

from .adversarial import AttackConfig, AttackKind, PerturbSpec, PNorm
from .baselines import DPConfig, MethodId
from .coordinator import CoordinatorKnobs, ScorerKind, ScorerPolicy
from .data import SynthSpec
from .models import ModelKind, ModelSpec
from .paillier import MIN_KEY_BITS, FixedPointEncoding
from .simnet import CostModel, LinkProfile


class ConfigError(ValueError):
    """Raised for unknown keys, bad types, or invalid field combinations."""


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    JSONL = "jsonl"


class DataSource(str, enum.Enum):
    SYNTH = "synth"
    CSV = "csv"


@dataclass(frozen=True)
class RunSettings:
    method: MethodId = MethodId.OURS
    nodes: int = 10
    rounds: int = 100
    local_epochs: int = 1
    batch_size: int = 32
    learning_rate: float = 0.05
    eval_epsilon: float = 0.1
    seeds: tuple[int, ...] = (1,)
    output: str = "results.csv"
    format: OutputFormat = OutputFormat.CSV

    def __post_init__(self) -> None:
        if self.nodes < 1:
            raise ConfigError("nodes must be >= 1")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.local_epochs < 1:
            raise ConfigError("local_epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.eval_epsilon < 0:
            raise ConfigError("eval_epsilon must be >= 0")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")


@dataclass(frozen=True)
class ModelConfig:
    kind: ModelKind = ModelKind.LOGREG
    hidden_dim: int = 16

    def __post_init__(self) -> None:
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")

    def spec(self, input_dim: int, num_classes: int) -> ModelSpec:
        return ModelSpec(
            kind=self.kind,
            input_dim=input_dim,
            num_classes=num_classes,
            hidden_dim=self.hidden_dim,
        )


@dataclass(frozen=True)
class DataConfig:
    source: DataSource = DataSource.SYNTH
    csv_path: str | None = None
    test_fraction: float = 0.2
    num_samples: int = 2000
    input_dim: int = 16
    num_classes: int = 2
    cluster_separation: float = 3.0
    label_noise: float = 0.0
    non_iid_skew: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.source == DataSource.CSV and not self.csv_path:
            raise ConfigError("csv source requires csv_path")

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(
            num_samples=self.num_samples,
            input_dim=self.input_dim,
            num_classes=self.num_classes,
            cluster_separation=self.cluster_separation,
            label_noise=self.label_noise,
            non_iid_skew=self.non_iid_skew,
        )


@dataclass(frozen=True)
class AdvTrainConfig:
    lam: float = 1.0
    epsilon: float = 0.1
    p_norm: PNorm = PNorm.INF
    steps: int = 3
    step_size: float | None = None

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")

    def perturb_spec(self) -> PerturbSpec:
        return PerturbSpec(
            epsilon=self.epsilon,
            p_norm=self.p_norm,
            steps=self.steps,
            step_size=self.step_size,
        )


@dataclass(frozen=True)
class CryptoConfig:
    key_bits: int = 512
    scale_bits: int = 24
    clamp_abs: float = 64.0

    def __post_init__(self) -> None:
        if self.key_bits < MIN_KEY_BITS:
            raise ConfigError(f"key_bits must be >= {MIN_KEY_BITS}")

    def encoding(self) -> FixedPointEncoding:
        return FixedPointEncoding(scale_bits=self.scale_bits, clamp_abs=self.clamp_abs)


@dataclass(frozen=True)
class SimnetConfig:
    base_ms: float = 10.0
    bytes_per_ms: float = 1000.0
    jitter_ms: float = 2.0
    encrypt_ms_per_elem: float = 0.2
    decrypt_ms_per_elem: float = 0.2
    homadd_ms_per_elem: float = 0.01
    mask_ms_per_elem: float = 0.001

    def link_profile(self) -> LinkProfile:
        return LinkProfile(
            base_ms=self.base_ms,
            bytes_per_ms=self.bytes_per_ms,
            jitter_ms=self.jitter_ms,
        )

    def cost_model(self) -> CostModel:
        return CostModel(
            encrypt_ms_per_elem=self.encrypt_ms_per_elem,
            decrypt_ms_per_elem=self.decrypt_ms_per_elem,
            homadd_ms_per_elem=self.homadd_ms_per_elem,
            mask_ms_per_elem=self.mask_ms_per_elem,
        )


@dataclass(frozen=True)
class ScorerConfig:
    kind: ScorerKind = ScorerKind.HEURISTIC
    endpoint_url: str | None = None
    timeout_s: float = 10.0
    auth_token: str | None = None
    prompt_template: str = "scorer_prompt_v1"

    def policy(self) -> ScorerPolicy:
        return ScorerPolicy(
            kind=self.kind,
            endpoint_url=self.endpoint_url or "",
            timeout_s=self.timeout_s,
            auth_token=self.auth_token or "",
            prompt_template=self.prompt_template,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSettings = field(default_factory=RunSettings)
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    adv_train: AdvTrainConfig = field(default_factory=AdvTrainConfig)
    crypto: CryptoConfig = field(default_factory=CryptoConfig)
    coordinator: CoordinatorKnobs = field(default_factory=CoordinatorKnobs)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    dp: DPConfig = field(default_factory=DPConfig)
    simnet: SimnetConfig = field(default_factory=SimnetConfig)

    def __post_init__(self) -> None:
        check_wraparound_guard(self.run.nodes, self.crypto)

    def replace(self, **kwargs: Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **kwargs)

    def with_run(self, **kwargs: Any) -> "ExperimentConfig":
        return self.replace(run=dataclasses.replace(self.run, **kwargs))


# Quantized node weights widen encoded values by this many bits before the
# homomorphic sum; the guard below must account for them.
WEIGHT_GUARD_BITS = 16


def check_wraparound_guard(num_nodes: int, crypto: CryptoConfig) -> None:
    """Conservative overflow check decidable before key generation.

    The modulus of a key_bits key satisfies n >= 2^(key_bits - 1), so
    requiring N * clamp * 2^(scale_bits + 16) < 2^(key_bits - 2) guarantees
    the encoded weighted sum stays below n/2 for any generated key.
    """
    bound = num_nodes * crypto.clamp_abs * 2.0 ** (crypto.scale_bits + WEIGHT_GUARD_BITS)
    if bound >= 2.0 ** (crypto.key_bits - 2):
        raise ConfigError(
            "wraparound guard failed: "
            f"{num_nodes} nodes * clamp {crypto.clamp_abs} * 2^{crypto.scale_bits + WEIGHT_GUARD_BITS} "
            f"must stay below 2^{crypto.key_bits - 2}; raise key_bits or lower scale_bits/clamp_abs"
        )


_SECTION_TYPES: dict[str, type] = {
    "experiment": RunSettings,
    "model": ModelConfig,
    "data": DataConfig,
    "attack": AttackConfig,
    "adversarial_training": AdvTrainConfig,
    "crypto": CryptoConfig,
    "coordinator": CoordinatorKnobs,
    "scorer": ScorerConfig,
    "dp": DPConfig,
    "simnet": SimnetConfig,
}

_SECTION_FIELD: dict[str, str] = {
    "experiment": "run",
    "model": "model",
    "data": "data",
    "attack": "attack",
    "adversarial_training": "adv_train",
    "crypto": "crypto",
    "coordinator": "coordinator",
    "scorer": "scorer",
    "dp": "dp",
    "simnet": "simnet",
}

_CONVERTERS: dict[tuple[str, str], Callable[[Any], Any]] = {
    ("experiment", "method"): lambda v: MethodId(str(v)),
    ("experiment", "format"): lambda v: OutputFormat(str(v)),
    ("experiment", "seeds"): lambda v: tuple(int(x) for x in v),
    ("model", "kind"): lambda v: ModelKind(str(v)),
    ("data", "source"): lambda v: DataSource(str(v)),
    ("attack", "kind"): lambda v: AttackKind(str(v)),
    ("adversarial_training", "p_norm"): lambda v: PNorm(str(v)),
    ("scorer", "kind"): lambda v: ScorerKind(str(v)),
}


def _coerce(section: str, fld: dataclasses.Field, value: Any) -> Any:
    conv = _CONVERTERS.get((section, fld.name))
    if conv is not None:
        try:
            return conv(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{section}.{fld.name}: {exc}") from exc
    if value is None:
        return None
    if isinstance(value, bool):
        raise ConfigError(f"{section}.{fld.name}: boolean not valid here")
    if fld.type in ("float", "float | None") and isinstance(value, (int, float)):
        return float(value)
    if fld.type == "int" and isinstance(value, int):
        return value
    if fld.type in ("str", "str | None") and isinstance(value, str):
        return value
    if isinstance(value, (int, float, str)):
        return value
    raise ConfigError(f"{section}.{fld.name}: unsupported value {value!r}")


def _build_section(section: str, raw: Mapping[str, Any]) -> Any:
    cls = _SECTION_TYPES[section]
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}' in section '{section}'")
    kwargs: dict[str, Any] = {}
    for fld in dataclasses.fields(cls):
        if fld.name in raw:
            kwargs[fld.name] = _coerce(section, fld, raw[fld.name])
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"section '{section}': {exc}") from exc


def config_from_dict(doc: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be a mapping of sections")
    unknown = sorted(set(doc) - set(_SECTION_TYPES))
    if unknown:
        raise ConfigError(f"unknown section '{unknown[0]}'")
    kwargs: dict[str, Any] = {}
    for section, raw in doc.items():
        if raw is None:
            continue
        if not isinstance(raw, Mapping):
            raise ConfigError(f"section '{section}' must be a mapping")
        kwargs[_SECTION_FIELD[section]] = _build_section(section, raw)
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if doc is None:
        doc = {}
    return config_from_dict(doc)
