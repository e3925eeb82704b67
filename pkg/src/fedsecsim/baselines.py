"""Method profiles: the adaptive scheme and the four reference baselines."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .aggregation import AggregationMode
from .rng import np_rng


class MethodId(str, Enum):
    OURS = "ours"
    VFL = "vfl"
    DP_FL = "dp_fl"
    SMC_FL = "smc_fl"
    HE_FL = "he_fl"


@dataclass(frozen=True)
class DPConfig:
    clip_norm: float = 1.0
    noise_multiplier: float = 1.0

    def __post_init__(self) -> None:
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        if self.noise_multiplier < 0:
            raise ValueError("noise_multiplier must be >= 0")


@dataclass(frozen=True)
class MethodProfile:
    """Which mechanisms a method runs each round.

    ``fixed_mode`` pins the aggregation transport; None lets the
    coordinator escalate per round based on the anomaly risk.
    """

    method: MethodId
    performance_weighting: bool
    participation_gating: bool
    anomaly_detection: bool
    adversarial_training: bool
    fixed_mode: AggregationMode | None
    dp: DPConfig | None = None


_PROFILES: dict[MethodId, MethodProfile] = {
    MethodId.OURS: MethodProfile(
        method=MethodId.OURS,
        performance_weighting=True,
        participation_gating=True,
        anomaly_detection=True,
        adversarial_training=True,
        fixed_mode=None,
    ),
    MethodId.VFL: MethodProfile(
        method=MethodId.VFL,
        performance_weighting=False,
        participation_gating=False,
        anomaly_detection=False,
        adversarial_training=False,
        fixed_mode=AggregationMode.PLAIN,
    ),
    MethodId.DP_FL: MethodProfile(
        method=MethodId.DP_FL,
        performance_weighting=False,
        participation_gating=False,
        anomaly_detection=False,
        adversarial_training=False,
        fixed_mode=AggregationMode.PLAIN,
        dp=DPConfig(clip_norm=1.0, noise_multiplier=1.0),
    ),
    MethodId.SMC_FL: MethodProfile(
        method=MethodId.SMC_FL,
        performance_weighting=False,
        participation_gating=False,
        anomaly_detection=False,
        adversarial_training=False,
        fixed_mode=AggregationMode.MASKED,
    ),
    MethodId.HE_FL: MethodProfile(
        method=MethodId.HE_FL,
        performance_weighting=False,
        participation_gating=False,
        anomaly_detection=False,
        adversarial_training=False,
        fixed_mode=AggregationMode.FULL_SMC,
    ),
}


def configure_method(method: MethodId, dp: DPConfig | None = None) -> MethodProfile:
    """Profile for a method id; ``dp`` overrides the DP-FL noise settings."""
    profile = _PROFILES[MethodId(method)]
    if dp is not None:
        if profile.method != MethodId.DP_FL:
            raise ValueError("dp overrides only apply to the dp_fl method")
        return MethodProfile(
            method=profile.method,
            performance_weighting=profile.performance_weighting,
            participation_gating=profile.participation_gating,
            anomaly_detection=profile.anomaly_detection,
            adversarial_training=profile.adversarial_training,
            fixed_mode=profile.fixed_mode,
            dp=dp,
        )
    return profile


def dp_clip(update: np.ndarray, clip_norm: float) -> np.ndarray:
    """Scale the update down to L2 norm <= clip_norm (no-op when under)."""
    update = np.asarray(update, dtype=np.float64)
    norm = float(np.linalg.norm(update))
    if norm <= clip_norm or norm == 0.0:
        return update.copy()
    return update * (clip_norm / norm)


def dp_noise(
    update: np.ndarray,
    cfg: DPConfig,
    experiment_seed: int,
    round_index: int,
    node_id: int,
) -> np.ndarray:
    """Clip then add per-coordinate Gaussian noise N(0, (sigma * clip)^2).

    With noise_multiplier = 0 the clipped update is returned without
    touching the noise stream, so a zero-noise DP run is bitwise equal
    to the plain baseline when nothing exceeds the clip norm.
    """
    clipped = dp_clip(update, cfg.clip_norm)
    if cfg.noise_multiplier == 0.0:
        return clipped
    rng = np_rng("dp-noise", experiment_seed, round_index, node_id)
    sigma = cfg.noise_multiplier * cfg.clip_norm
    return clipped + rng.normal(0.0, sigma, size=clipped.shape)
