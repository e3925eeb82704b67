"""Experiment orchestration: synchronous federated rounds, metrics, and emission.

One run = one (method, seed) pair. Every stochastic choice is drawn from a
stream keyed by purpose and seed but never by method, so the five methods
consume identical datasets, initial parameters, and poisoning schedules and
differ only in their aggregation/privacy pipeline.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import adversarial, baselines, models, paillier
from .adversarial import AttackKind, PerturbSpec, PNorm
from .aggregation import AggregationMode, WeightVector, secure_weighted_aggregate, weighted_aggregate
from .baselines import MethodId, MethodProfile, configure_method
from .config import DataSource, ExperimentConfig, OutputFormat
from .coordinator import GatingState, NodeSummary, RoundPlan, plan_round
from .data import Dataset, dirichlet_partition, feature_box, load_csv, make_synthetic, train_test_split
from .masking import MaskSeeds, fixed_point_sum, masked_sum
from .models import ModelSpec
from .rng import np_rng, py_rng
from .simnet import message_bytes, payload_kind_for_mode, round_latency

logger = logging.getLogger(__name__)

VAL_FRACTION = 0.2  # coordinator-held slice that feeds the performance score
MAX_COORD_VAL = 512  # cap so large corpora do not starve the training shards


class ExperimentError(RuntimeError):
    """A round failed; the message names seed, method, round, and node."""


@dataclass
class MetricsRecord:
    seed: int
    method: str
    round: int
    global_accuracy: float
    global_loss: float
    adv_accuracy: float
    round_latency_ms: float
    uplink_bytes: int
    mode: str
    flagged_count: int
    fallback_events: int


COLUMNS = [
    "seed",
    "method",
    "round",
    "global_accuracy",
    "global_loss",
    "adv_accuracy",
    "round_latency_ms",
    "uplink_bytes",
    "mode",
    "flagged_count",
    "fallback_events",
]

_FLOAT_FIELDS = {"global_accuracy", "global_loss", "adv_accuracy", "round_latency_ms"}
_INT_FIELDS = {"seed", "round", "uplink_bytes", "flagged_count", "fallback_events"}


def load_or_synthesize(cfg: ExperimentConfig, seed: int) -> tuple[list[Dataset], Dataset, Dataset]:
    """Per-node training shards, a coordinator validation slice, and a test set.

    The validation slice is carved from the training pool before partitioning:
    the coordinator scores every node model on the same data, so performance
    scores are comparable even when the shards themselves are highly skewed.
    """
    if cfg.data.source == DataSource.CSV:
        full = load_csv(cfg.data.csv_path)
    else:
        full = make_synthetic(cfg.data.synth_spec(), np_rng("synth-data", seed))
    train, test = train_test_split(full, cfg.data.test_fraction, np_rng("train-test-split", seed))
    n_val = min(int(round(train.n * VAL_FRACTION)), MAX_COORD_VAL)
    if n_val < 1 or train.n - n_val < cfg.run.nodes:
        pool, coord_val = train, train  # tiny corpus: score on the full pool
    else:
        order = np_rng("coordinator-val-split", seed).permutation(train.n)
        coord_val = train.subset(order[:n_val])
        pool = train.subset(order[n_val:])
    parts = dirichlet_partition(
        pool, cfg.run.nodes, cfg.data.non_iid_skew, np_rng("dirichlet-partition", seed)
    )
    return [pool.subset(p) for p in parts], coord_val, test


def local_train(
    spec: ModelSpec,
    theta_start: np.ndarray,
    shard: Dataset,
    *,
    epochs: int,
    batch_size: int,
    eta: float,
    seed: int,
    round_index: int,
    node_id: int,
    adv: tuple[PerturbSpec, float, tuple[np.ndarray, np.ndarray]] | None = None,
) -> np.ndarray:
    """Mini-batch SGD from the broadcast parameters on one node's shard."""
    theta = np.asarray(theta_start, dtype=np.float64).copy()
    for epoch in range(epochs):
        order = np_rng("batch-order", seed, round_index, node_id, epoch).permutation(shard.n)
        for start in range(0, shard.n, batch_size):
            batch = shard.subset(order[start : start + batch_size])
            if adv is None:
                _, grad = models.loss_and_grad(spec, theta, batch)
            else:
                pspec, lam, box = adv
                _, grad = adversarial.total_loss(spec, theta, batch, pspec, lam, box)
            theta = models.local_sgd_step(theta, grad, eta)
    return theta


def _cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(1.0 - float(a @ b) / (na * nb), 0.0, 2.0))


def _baseline_plan(node_ids: Sequence[int], mode: AggregationMode) -> RoundPlan:
    return RoundPlan(
        weights=WeightVector.uniform(node_ids),
        participation={int(i): 1 for i in node_ids},
        mode=mode,
        risk=0.0,
        flagged_nodes=frozenset(),
    )


def _aggregate(
    cfg: ExperimentConfig,
    plan: RoundPlan,
    uploads: dict[int, np.ndarray],
    keys: paillier.KeyPair | None,
    seed: int,
    round_index: int,
) -> np.ndarray:
    """Combine participant uploads into the global update, per the round's mode."""
    participants = list(plan.weights.node_ids)
    vectors = [uploads[i] for i in participants]
    enc = cfg.crypto.encoding()
    if plan.mode == AggregationMode.PLAIN:
        return weighted_aggregate(vectors, plan.weights)
    if plan.mode == AggregationMode.MASKED:
        scaled = [w * v for w, v in zip(plan.weights.weights, vectors)]
        if len(scaled) < 2:
            return fixed_point_sum(scaled, enc)
        return masked_sum(scaled, MaskSeeds(seed, round_index), enc, node_ids=participants)
    assert keys is not None, "FULL_SMC round without key material"
    ciphers = [
        paillier.encode_vector(uploads[i], enc, keys.public, py_rng("encrypt-r", seed, round_index, i))
        for i in participants
    ]
    return secure_weighted_aggregate(ciphers, plan.weights, keys, enc)


def run_single(cfg: ExperimentConfig, method: MethodId, seed: int) -> list[MetricsRecord]:
    """Execute one full (method, seed) run and return its per-round records."""
    profile: MethodProfile = configure_method(method, dp=cfg.dp if method == MethodId.DP_FL else None)
    shards, coord_val, test_set = load_or_synthesize(cfg, seed)
    num_nodes = cfg.run.nodes
    node_ids = list(range(num_nodes))

    poisoned = adversarial.poisoned_node_ids(num_nodes, cfg.attack, seed)
    if cfg.attack.kind == AttackKind.LABEL_FLIP:
        for i in poisoned:
            shards[i] = Dataset(
                shards[i].X,
                adversarial.flip_labels(shards[i].y, shards[i].num_classes),
                shards[i].num_classes,
            )

    spec = cfg.model.spec(input_dim=test_set.input_dim, num_classes=test_set.num_classes)
    theta_global = models.init_params(spec, np_rng("init-params", seed))
    dim = spec.param_count

    keys = None
    if profile.fixed_mode == AggregationMode.FULL_SMC or profile.fixed_mode is None:
        keys = paillier.keygen(cfg.crypto.key_bits, seed=seed)

    adv_train_spec = None
    if profile.adversarial_training and cfg.adv_train.lam > 0 and cfg.adv_train.epsilon > 0:
        adv_train_spec = cfg.adv_train.perturb_spec()
    train_boxes = [feature_box(shards[i]) for i in node_ids]

    eval_spec = PerturbSpec(epsilon=cfg.run.eval_epsilon, p_norm=PNorm.INF, steps=1)
    eval_box = feature_box(test_set)

    gating = GatingState(node_ids)
    last_upload_theta = {i: theta_global.copy() for i in node_ids}
    last_delay_ms = {i: 0.0 for i in node_ids}
    perf: dict[int, float] = {}
    prev_global_update = np.zeros(dim)
    links = {i: cfg.simnet.link_profile() for i in node_ids}
    cost = cfg.simnet.cost_model()

    records: list[MetricsRecord] = []
    for t in range(cfg.run.rounds):
        uploads: dict[int, np.ndarray] = {}
        deltas: dict[int, float] = {}
        summaries: list[NodeSummary] = []
        thetas: dict[int, np.ndarray] = {}
        for i in node_ids:
            try:
                adv = None
                if adv_train_spec is not None:
                    adv = (adv_train_spec, cfg.adv_train.lam, train_boxes[i])
                theta_i = local_train(
                    spec,
                    theta_global,
                    shards[i],
                    epochs=cfg.run.local_epochs,
                    batch_size=cfg.run.batch_size,
                    eta=cfg.run.learning_rate,
                    seed=seed,
                    round_index=t,
                    node_id=i,
                    adv=adv,
                )
                update = theta_i - theta_global
                if i in poisoned and cfg.attack.kind in (AttackKind.GRAD_SCALE, AttackKind.GRAD_NEGATE):
                    update = adversarial.poison_update(update, cfg.attack)
                if profile.dp is not None:
                    update = baselines.dp_noise(update, profile.dp, seed, t, i)
            except Exception as exc:
                raise ExperimentError(
                    f"seed {seed} method {method.value} round {t} node {i}: {exc}"
                ) from exc
            thetas[i] = theta_i
            uploads[i] = update
            deltas[i] = float(np.sum((theta_i - last_upload_theta[i]) ** 2))
            summaries.append(
                NodeSummary(
                    node_id=i,
                    performance=perf.get(i, cfg.coordinator.cold_start_score),
                    update_l2=float(np.linalg.norm(update)),
                    drift=_cosine_distance(update, prev_global_update),
                    delay_ms=last_delay_ms[i],
                    rounds_since_upload=gating.rounds_since_upload[i],
                )
            )

        fallback = 0
        if profile.fixed_mode is not None:
            plan = _baseline_plan(node_ids, profile.fixed_mode)
        else:
            plan, fell_back = plan_round(
                summaries,
                deltas,
                cfg.coordinator,
                cfg.scorer.policy(),
                round_index=t,
                detection_enabled=profile.anomaly_detection,
            )
            fallback = int(fell_back)

        try:
            global_update = _aggregate(cfg, plan, uploads, keys, seed, t)
        except Exception as exc:
            raise ExperimentError(
                f"seed {seed} method {method.value} round {t} aggregation: {exc}"
            ) from exc
        theta_global = theta_global + global_update
        prev_global_update = global_update

        participants = list(plan.weights.node_ids)
        kind = payload_kind_for_mode(plan.mode)
        payload = {i: message_bytes(kind, dim, cfg.crypto.key_bits) for i in participants}
        reply = message_bytes(payload_kind_for_mode(AggregationMode.PLAIN), dim)
        lat = round_latency(plan, payload, reply, links, cost, dim, seed, t)
        for i in participants:
            last_delay_ms[i] = lat.uplink_ms[i]
            last_upload_theta[i] = thetas[i]
        gating.observe(plan.participation)
        for i in node_ids:
            acc_i, _ = models.evaluate(spec, thetas[i], coord_val)
            perf[i] = acc_i

        clean_acc, clean_loss = models.evaluate(spec, theta_global, test_set)
        if cfg.run.eval_epsilon > 0:
            X_adv = adversarial.perturb_batch(
                spec, theta_global, test_set.X, test_set.y, eval_spec, box=eval_box
            )
            adv_acc, _ = models.evaluate(
                spec, theta_global, Dataset(X_adv, test_set.y, test_set.num_classes)
            )
        else:
            adv_acc = clean_acc

        records.append(
            MetricsRecord(
                seed=seed,
                method=method.value,
                round=t,
                global_accuracy=clean_acc,
                global_loss=clean_loss,
                adv_accuracy=adv_acc,
                round_latency_ms=lat.round_ms,
                uplink_bytes=sum(payload.values()),
                mode=plan.mode.value,
                flagged_count=len(plan.flagged_nodes),
                fallback_events=fallback,
            )
        )
    return records


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """All seeds for the configured method, in seed order."""
    out: list[MetricsRecord] = []
    for seed in cfg.run.seeds:
        out.extend(run_single(cfg, cfg.run.method, seed))
    return out


def run_sweep(cfg: ExperimentConfig, methods: Sequence[MethodId] | None = None) -> list[MetricsRecord]:
    """Every method over every seed; record order is (method, seed, round)."""
    if methods is None:
        methods = list(MethodId)
    out: list[MetricsRecord] = []
    for method in methods:
        for seed in cfg.run.seeds:
            out.extend(run_single(cfg, method, seed))
    return out


def _fmt(name: str, value) -> str:
    if name in _FLOAT_FIELDS:
        return f"{value:.9g}"
    return str(value)


def emit(records: Iterable[MetricsRecord], fmt: OutputFormat, path: str | Path) -> None:
    """Write records with a fixed column order; floats carry 9 significant digits."""
    path = Path(path)
    if fmt == OutputFormat.CSV:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for r in records:
                writer.writerow([_fmt(c, getattr(r, c)) for c in COLUMNS])
        return
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            obj = {}
            for c in COLUMNS:
                v = getattr(r, c)
                obj[c] = float(f"{v:.9g}") if c in _FLOAT_FIELDS else v
            fh.write(json.dumps(obj, separators=(", ", ": ")) + "\n")


def read_records(path: str | Path, fmt: OutputFormat) -> list[MetricsRecord]:
    """Parse an emitted file back into records (the emit round-trip reader)."""
    path = Path(path)
    rows: list[dict] = []
    if fmt == OutputFormat.CSV:
        with path.open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rows.append(row)
    else:
        with path.open(encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
    out = []
    for row in rows:
        kwargs = {}
        for c in COLUMNS:
            v = row[c]
            if c in _FLOAT_FIELDS:
                kwargs[c] = float(v)
            elif c in _INT_FIELDS:
                kwargs[c] = int(v)
            else:
                kwargs[c] = str(v)
        out.append(MetricsRecord(**kwargs))
    return out
