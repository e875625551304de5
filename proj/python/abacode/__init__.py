"""Contextual bandits with context-dependent embeddings and adaptive compression."""

from ._abacode import (
    AbacodeAgent,
    Autoencoder,
    ClusterModel,
    CompressionAgent,
    CtsBandit,
    Error,
    ExperimentConfig,
    LinearEncoder,
    TrainReport,
    assign_reward,
    build_stream,
    compare,
    compression_width,
    config_template,
    derive_seed,
    exploration_scale,
    fit_linear_encoder,
    kmeans_fit,
    load_config,
    parse_config,
    pretrain_snapshot,
    run_experiment,
    train_autoencoder,
)

__all__ = [
    "AbacodeAgent",
    "Autoencoder",
    "ClusterModel",
    "CompressionAgent",
    "CtsBandit",
    "Error",
    "ExperimentConfig",
    "LinearEncoder",
    "TrainReport",
    "assign_reward",
    "build_stream",
    "compare",
    "compression_width",
    "config_template",
    "derive_seed",
    "exploration_scale",
    "fit_linear_encoder",
    "kmeans_fit",
    "load_config",
    "parse_config",
    "pretrain_snapshot",
    "run_experiment",
    "train_autoencoder",
]
