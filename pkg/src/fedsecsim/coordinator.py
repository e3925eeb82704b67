"""Round coordinator: node scoring, softmax weighting, anomaly detection,
participation gating, and the aggregation-mode switch.

The scorer is pluggable. The deterministic heuristic is the reference;
an external chat-endpoint scorer can be configured and falls back to the
heuristic on any transport or validation failure, so a round never aborts
because the endpoint misbehaved.
"""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .aggregation import AggregationMode, WeightVector

logger = logging.getLogger(__name__)

MAD_CONSISTENCY = 1.4826  # scales MAD to the stddev of a normal population
Z_GUARD = 1e-12


class ScorerKind(str, Enum):
    HEURISTIC = "heuristic"
    EXTERNAL_LLM = "external_llm"


@dataclass(frozen=True)
class ScorerPolicy:
    kind: ScorerKind = ScorerKind.HEURISTIC
    endpoint_url: str = ""
    timeout_s: float = 10.0
    auth_token: str = ""
    prompt_template: str = "scorer_prompt_v1"

    def __post_init__(self) -> None:
        if self.kind == ScorerKind.EXTERNAL_LLM and not self.endpoint_url:
            raise ValueError("external scorer requires an endpoint URL")


@dataclass(frozen=True)
class CoordinatorKnobs:
    alpha: float = 5.0  # softmax sensitivity
    z_threshold: float = 3.0  # robust z-score flag level
    drift_cap: float = 1.5  # cosine-distance flag level
    tau_risk: float = 3.0  # risk above this escalates to FULL_SMC
    tau_part: float = 1e-6  # squared-update-change gate
    max_silent: int = 5  # staleness override for gating
    w_drift: float = 0.25  # drift penalty in the heuristic score
    w_flag: float = 1.0  # flag penalty in the heuristic score
    cold_start_score: float = 0.5

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.z_threshold <= 0 or self.tau_risk < 0:
            raise ValueError("alpha and tau_risk must be >= 0, z_threshold > 0")
        if self.tau_part < 0 or self.max_silent < 1:
            raise ValueError("tau_part must be >= 0 and max_silent >= 1")


@dataclass
class NodeSummary:
    """Per-round metadata one node reports to the coordinator."""

    node_id: int
    performance: float  # previous-round validation accuracy in [0, 1]
    update_l2: float
    drift: float  # cosine distance to previous global update, [0, 2]
    delay_ms: float = 0.0
    rounds_since_upload: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.performance <= 1.0:
            raise ValueError("performance must lie in [0, 1]")
        if not np.isfinite(self.update_l2) or self.update_l2 < 0:
            raise ValueError("update_l2 must be finite and >= 0")


@dataclass(frozen=True)
class AnomalyReport:
    flagged: frozenset[int]
    z_scores: dict[int, float]
    skipped: bool = False

    @property
    def risk(self) -> float:
        """Max robust z-score across nodes; 0 when detection was skipped."""
        return max(self.z_scores.values(), default=0.0)


@dataclass(frozen=True)
class RoundPlan:
    weights: WeightVector  # covers exactly the participating nodes
    participation: dict[int, int]  # node_id -> f_i in {0, 1}
    mode: AggregationMode
    risk: float
    flagged_nodes: frozenset[int]

    def __post_init__(self) -> None:
        participants = {i for i, f in self.participation.items() if f == 1}
        if set(self.weights.node_ids) != participants:
            raise ValueError("weights must cover exactly the participating nodes")


def softmax_weights(
    performances: Sequence[float], alpha: float, node_ids: Sequence[int] | None = None
) -> WeightVector:
    """exp(alpha * perf_i) / sum_j exp(alpha * perf_j), max-subtracted."""
    perf = np.asarray(performances, dtype=np.float64)
    if perf.size == 0:
        raise ValueError("need at least one node to weight")
    if not np.all(np.isfinite(perf)):
        raise ValueError("performances must be finite")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    z = alpha * perf
    e = np.exp(z - z.max())
    w = e / e.sum()
    ids = tuple(node_ids) if node_ids is not None else tuple(range(perf.size))
    return WeightVector(ids, w)


def heuristic_scores(
    summaries: Sequence[NodeSummary],
    flagged: frozenset[int] = frozenset(),
    knobs: CoordinatorKnobs = CoordinatorKnobs(),
) -> dict[int, float]:
    """performance - w_drift*drift - w_flag*flagged, clamped to [0, 1]."""
    if not summaries:
        raise ValueError("need at least one summary")
    scores: dict[int, float] = {}
    for s in summaries:
        raw = s.performance - knobs.w_drift * s.drift - knobs.w_flag * (s.node_id in flagged)
        scores[s.node_id] = min(1.0, max(0.0, raw))
    return scores


def detect_anomalies(
    summaries: Sequence[NodeSummary],
    z_threshold: float,
    drift_cap: float = 1.5,
) -> AnomalyReport:
    """Flag nodes whose update norm is a robust outlier or whose drift is extreme.

    Uses median/MAD so a poisoned outlier cannot hide by corrupting the
    statistics. Needs >= 3 nodes; otherwise detection is skipped with a
    warning and nobody is flagged.
    """
    if z_threshold <= 0:
        raise ValueError("z_threshold must be > 0")
    if len(summaries) < 3:
        logger.warning("anomaly detection skipped: %d nodes (< 3)", len(summaries))
        return AnomalyReport(frozenset(), {}, skipped=True)
    norms = np.array([s.update_l2 for s in summaries])
    med = float(np.median(norms))
    mad = float(np.median(np.abs(norms - med)))
    z_scores: dict[int, float] = {}
    flagged = set()
    for s, x in zip(summaries, norms):
        z = abs(float(x) - med) / (MAD_CONSISTENCY * mad + Z_GUARD)
        z_scores[s.node_id] = z
        if z > z_threshold or s.drift > drift_cap:
            flagged.add(s.node_id)
    return AnomalyReport(frozenset(flagged), z_scores)


def decide_mode(risk: float, tau_risk: float) -> AggregationMode:
    """FULL_SMC above the risk threshold, MASKED otherwise (privacy floor).

    PLAIN is never chosen here; baseline pipelines opt into it explicitly.
    """
    if risk < 0:
        raise ValueError("risk must be >= 0")
    return AggregationMode.FULL_SMC if risk > tau_risk else AggregationMode.MASKED


def participation_gate(
    deltas: Mapping[int, float],
    tau_part: float,
    rounds_since_upload: Mapping[int, int],
    max_silent: int,
) -> dict[int, int]:
    """Lazy-upload gating: skip nodes whose update barely changed.

    A node skips (f_i = 0) only while its squared update change stays
    below ``tau_part`` AND it has not been silent ``max_silent`` rounds.
    If everyone would skip, the node with the largest delta (ties to the
    smallest id) is forced in so every round has a participant.
    """
    if tau_part < 0 or max_silent < 1:
        raise ValueError("tau_part must be >= 0 and max_silent >= 1")
    flags = {
        i: 0 if (deltas[i] < tau_part and rounds_since_upload.get(i, 0) < max_silent) else 1
        for i in deltas
    }
    if flags and not any(flags.values()):
        forced = max(sorted(deltas), key=lambda i: deltas[i])
        flags[forced] = 1
    return flags


# ---------------------------------------------------------------------------
# pluggable scorer


def load_prompt(template_id: str = "scorer_prompt_v1") -> str:
    return resources.files("fedsecsim.assets").joinpath(f"{template_id}.txt").read_text()


def external_llm_score(
    summaries: Sequence[NodeSummary],
    policy: ScorerPolicy,
    round_index: int,
) -> list[float]:
    """One JSON request per round; any violation of the reply contract raises."""
    body = json.dumps(
        {
            "round": round_index,
            "summaries": [
                {
                    "node_id": s.node_id,
                    "performance": s.performance,
                    "update_l2": s.update_l2,
                    "drift": s.drift,
                    "delay_ms": s.delay_ms,
                    "rounds_since_upload": s.rounds_since_upload,
                }
                for s in summaries
            ],
            "instructions": load_prompt(policy.prompt_template),
        }
    ).encode("utf-8")
    req = urllib.request.Request(
        policy.endpoint_url, data=body, headers={"Content-Type": "application/json"}
    )
    if policy.auth_token:
        req.add_header("Authorization", f"Bearer {policy.auth_token}")
    with urllib.request.urlopen(req, timeout=policy.timeout_s) as resp:
        payload = resp.read()
    scores = json.loads(payload)
    if not isinstance(scores, list) or len(scores) != len(summaries):
        raise ValueError(f"scorer returned {scores!r}, expected {len(summaries)} numbers")
    out = []
    for v in scores:
        if not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0:
            raise ValueError(f"score {v!r} outside [0, 1]")
        out.append(float(v))
    return out


def score_nodes(
    policy: ScorerPolicy,
    summaries: Sequence[NodeSummary],
    flagged: frozenset[int],
    knobs: CoordinatorKnobs,
    round_index: int,
) -> tuple[dict[int, float], bool]:
    """Scores per node id, plus whether the external scorer fell back."""
    if policy.kind == ScorerKind.EXTERNAL_LLM:
        try:
            raw = external_llm_score(summaries, policy, round_index)
            return {s.node_id: v for s, v in zip(summaries, raw)}, False
        except (urllib.error.URLError, ValueError, json.JSONDecodeError, OSError) as e:
            logger.warning("round %d: external scorer fell back to heuristic: %s", round_index, e)
            return heuristic_scores(summaries, flagged, knobs), True
    return heuristic_scores(summaries, flagged, knobs), False


def plan_round(
    summaries: Sequence[NodeSummary],
    deltas: Mapping[int, float],
    knobs: CoordinatorKnobs,
    policy: ScorerPolicy = ScorerPolicy(),
    round_index: int = 0,
    detection_enabled: bool = True,
) -> tuple[RoundPlan, bool]:
    """Full per-round policy: detect, score, gate, weight, pick the mode."""
    if detection_enabled:
        report = detect_anomalies(summaries, knobs.z_threshold, knobs.drift_cap)
    else:
        report = AnomalyReport(frozenset(), {}, skipped=True)
    scores, fell_back = score_nodes(policy, summaries, report.flagged, knobs, round_index)
    rsu = {s.node_id: s.rounds_since_upload for s in summaries}
    flags = participation_gate(deltas, knobs.tau_part, rsu, knobs.max_silent)
    participants = sorted(i for i, f in flags.items() if f == 1)
    weights = softmax_weights([scores[i] for i in participants], knobs.alpha, participants)
    plan = RoundPlan(
        weights=weights,
        participation=flags,
        mode=decide_mode(report.risk, knobs.tau_risk),
        risk=report.risk,
        flagged_nodes=report.flagged,
    )
    return plan, fell_back


class GatingState:
    """Tracks per-node silence streaks across rounds."""

    def __init__(self, node_ids: Sequence[int]):
        self.rounds_since_upload: dict[int, int] = {i: 0 for i in node_ids}

    def observe(self, participation: Mapping[int, int]) -> None:
        for i in self.rounds_since_upload:
            if participation.get(i, 0) == 1:
                self.rounds_since_upload[i] = 0
            else:
                self.rounds_since_upload[i] += 1
