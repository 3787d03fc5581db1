"""Python access to the dialectbert C++ core: preprocessing, WordPiece, sizing and metrics."""

from ._dialectbert import (
    Vocabulary,
    anonymize,
    clean_text,
    contains_raw_entities,
    count_parameters,
    disk_estimate_mb,
    macro_scores,
    preprocess,
    round_to_millions,
    train_wordpiece,
)

__all__ = [
    "Vocabulary",
    "anonymize",
    "clean_text",
    "contains_raw_entities",
    "count_parameters",
    "disk_estimate_mb",
    "macro_scores",
    "preprocess",
    "round_to_millions",
    "train_wordpiece",
]
