"""Sparse binary word embeddings from a winner-take-all network."""

from ._core import (
    EpochReport,
    FlyhashError,
    Model,
    Vocabulary,
    agglomerative_cluster,
    binarize_topk,
    binary_similarity,
    build_vocabulary,
    cluster_quality,
    cluster_vocabulary,
    encode_wgram,
    energy,
    evaluate_wordsim,
    init_weights,
    learning_rate,
    occurrence_probabilities,
    shuffle_epoch,
    spearman,
    split_sentences,
    tokenize,
    train,
    update_delta,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
