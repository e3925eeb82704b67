"""Deterministic desk-scale simulator of a secure federated learning system.

Nodes train small classifiers locally; a coordinator scores them, weights
their updates, gates low-information uploads, and switches the round's
aggregation between pairwise masking and additively homomorphic encryption
when anomaly risk spikes. A virtual-time network charges every message so
latency comparisons across methods are reproducible.

SECURITY NOTE: the cryptography here is simulation-grade (small keys,
non-constant-time big-integer arithmetic, no threshold decryption). It
exists to measure protocol behavior and cost, not to protect real data.
"""

from .aggregation import AggregationMode, WeightVector
from .baselines import MethodId, configure_method
from .config import ExperimentConfig, load_config
from .experiment import MetricsRecord, run_experiment, run_single, run_sweep

__version__ = "0.1.0"

__all__ = [
    "AggregationMode",
    "ExperimentConfig",
    "MethodId",
    "MetricsRecord",
    "WeightVector",
    "configure_method",
    "load_config",
    "run_experiment",
    "run_single",
    "run_sweep",
    "__version__",
]
