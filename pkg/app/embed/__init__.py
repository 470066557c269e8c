"""Latent-space embedding and cluster analysis."""

from app.embed.clusters import ClusterReport, cluster_report
from app.embed.tsne import (
    LatentSet,
    TsneConfig,
    TsneResult,
    conditional_affinities,
    kl_divergence,
    realized_perplexity,
    stratified_subsample,
    tsne,
)

__all__ = [
    "ClusterReport",
    "LatentSet",
    "TsneConfig",
    "TsneResult",
    "cluster_report",
    "conditional_affinities",
    "kl_divergence",
    "realized_perplexity",
    "stratified_subsample",
    "tsne",
]
