"""Python bindings for the qfx trading core."""

import json

from ._qfx import (
    MissingArtifactError,
    ValidationError,
    compute_metrics,
    compute_reward,
    forward_label,
    indicators,
    load_quotes,
    max_drawdown_pct,
    param_counts,
    selftest,
    vqc_forward,
    vqc_gradient,
    write_synthetic,
)
from . import _qfx

STAGES = ("preprocess", "train-qlstm", "train-agent", "backtest", "report", "pipeline")


def default_config():
    return json.loads(_qfx.default_config())


def run_stage(stage, config, *, trace=False, dump_features=False, benchmarks=None, trace_state=None):
    """Run a stage with a config dict (merged over the defaults by the core)."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    _qfx.run_stage(stage, json.dumps(config, default=str), trace, dump_features, benchmarks, trace_state)


__all__ = [
    "MissingArtifactError",
    "STAGES",
    "ValidationError",
    "compute_metrics",
    "compute_reward",
    "default_config",
    "forward_label",
    "indicators",
    "load_quotes",
    "max_drawdown_pct",
    "param_counts",
    "run_stage",
    "selftest",
    "vqc_forward",
    "vqc_gradient",
    "write_synthetic",
]
