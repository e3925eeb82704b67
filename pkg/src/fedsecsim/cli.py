"""Command-line entry points: run, sweep, and crypto microbenchmarks."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time

from .baselines import MethodId
from .config import ConfigError, ExperimentConfig, OutputFormat, load_config
from .coordinator import ScorerKind
from .experiment import ExperimentError, emit, run_experiment, run_sweep
from .paillier import add_ciphertexts, encrypt, keygen, scalar_mul
from .paillier import decrypt as paillier_decrypt
from .rng import py_rng

SCORER_URL_ENV = "FEDSECSIM_SCORER_URL"
SCORER_TOKEN_ENV = "FEDSECSIM_SCORER_TOKEN"


def parse_seeds(text: str) -> tuple[int, ...]:
    """Accepts '3', '1,2,9', or the inclusive range form '1..5'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        start, end = int(lo), int(hi)
        if end < start:
            raise ValueError(f"empty seed range '{text}'")
        return tuple(range(start, end + 1))
    return tuple(int(part) for part in text.split(","))


def parse_methods(text: str) -> list[MethodId]:
    if text.strip().lower() == "all":
        return list(MethodId)
    return [MethodId(part.strip()) for part in text.split(",")]


def _apply_env_scorer(cfg: ExperimentConfig) -> ExperimentConfig:
    url = os.environ.get(SCORER_URL_ENV)
    if not url:
        return cfg
    scorer = dataclasses.replace(
        cfg.scorer,
        kind=ScorerKind.EXTERNAL_LLM,
        endpoint_url=url,
        auth_token=os.environ.get(SCORER_TOKEN_ENV, cfg.scorer.auth_token),
    )
    return cfg.replace(scorer=scorer)


def _load(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "method", None):
        overrides["method"] = MethodId(args.method)
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = (args.seed,)
    if getattr(args, "seeds", None):
        overrides["seeds"] = parse_seeds(args.seeds)
    if getattr(args, "out", None):
        overrides["output"] = args.out
    if getattr(args, "format", None):
        overrides["format"] = OutputFormat(args.format)
    if overrides:
        cfg = cfg.with_run(**overrides)
    return _apply_env_scorer(cfg)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    records = run_experiment(cfg)
    emit(records, cfg.run.format, cfg.run.output)
    print(f"wrote {len(records)} records to {cfg.run.output}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    methods = parse_methods(args.methods)
    records = run_sweep(cfg, methods)
    emit(records, cfg.run.format, cfg.run.output)
    print(f"wrote {len(records)} records ({len(methods)} methods x {len(cfg.run.seeds)} seeds) to {cfg.run.output}")
    return 0


def cmd_bench_crypto(args: argparse.Namespace) -> int:
    """Wall-clock microbenchmarks; informational, not part of any metric."""
    keys = keygen(args.key_bits, seed=0)
    rng = py_rng("bench-crypto", args.key_bits)
    n = keys.public.n

    t0 = time.perf_counter()
    cts = [encrypt(keys.public, rng.randrange(n), rng) for _ in range(args.trials)]
    encrypt_ms = (time.perf_counter() - t0) * 1000 / args.trials

    t0 = time.perf_counter()
    for c in cts:
        paillier_decrypt(keys, c)
    decrypt_ms = (time.perf_counter() - t0) * 1000 / args.trials

    t0 = time.perf_counter()
    acc = cts[0]
    for c in cts[1:]:
        acc = add_ciphertexts(keys.public, acc, c)
    homadd_ms = (time.perf_counter() - t0) * 1000 / max(args.trials - 1, 1)

    t0 = time.perf_counter()
    for c in cts:
        scalar_mul(keys.public, c, 1 << 16)
    scalarmul_ms = (time.perf_counter() - t0) * 1000 / args.trials

    print(f"key_bits={args.key_bits} trials={args.trials}")
    print(f"encrypt_ms_per_op    {encrypt_ms:.4f}")
    print(f"decrypt_ms_per_op    {decrypt_ms:.4f}")
    print(f"homadd_ms_per_op     {homadd_ms:.4f}")
    print(f"scalar_mul_ms_per_op {scalarmul_ms:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsecsim",
        description="Deterministic secure-federated-learning simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one method over the configured seeds")
    run_p.add_argument("--config", required=True, help="YAML experiment config")
    run_p.add_argument("--method", choices=[m.value for m in MethodId])
    run_p.add_argument("--seed", type=int, help="override with a single seed")
    run_p.add_argument("--out", help="output path (default from config)")
    run_p.add_argument("--format", choices=[f.value for f in OutputFormat])
    run_p.set_defaults(fn=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run several methods over several seeds")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--methods", default="all", help="'all' or comma-separated ids")
    sweep_p.add_argument("--seeds", help="'1..5' range or comma-separated list")
    sweep_p.add_argument("--out")
    sweep_p.add_argument("--format", choices=[f.value for f in OutputFormat])
    sweep_p.set_defaults(fn=cmd_sweep)

    bench_p = sub.add_parser("bench-crypto", help="wall-clock crypto microbenchmarks")
    bench_p.add_argument("--key-bits", type=int, default=512)
    bench_p.add_argument("--trials", type=int, default=200)
    bench_p.set_defaults(fn=cmd_bench_crypto)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ExperimentError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
