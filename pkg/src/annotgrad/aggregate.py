"""Collapse per-annotator records into per-verbatim soft labels.

Soft labels are stored as exact vote counts and exposed as proportions, so
that mean-value levels stay on the exact k/m grid used by the confusion
grids downstream.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .corpus import Corpus, Dimension, values_by_verbatim


class AggregationError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class SoftLabel:
    """Vote tallies for one (verbatim, dimension)."""

    n_neg: int
    n_zero: int
    n_pos: int

    def __post_init__(self):
        if min(self.n_neg, self.n_zero, self.n_pos) < 0:
            raise ValueError("vote counts must be non-negative")
        if self.m == 0:
            raise ValueError("at least one vote required")

    @property
    def m(self) -> int:
        return self.n_neg + self.n_zero + self.n_pos

    @property
    def p_neg(self) -> float:
        return self.n_neg / self.m

    @property
    def p_zero(self) -> float:
        return self.n_zero / self.m

    @property
    def p_pos(self) -> float:
        return self.n_pos / self.m

    @property
    def mean(self) -> float:
        """p_pos - p_neg, evaluated as (n_pos - n_neg)/m so the result is
        exactly the float nearest the rational level k/m."""
        return (self.n_pos - self.n_neg) / self.m

    @property
    def level_index(self) -> int:
        """k such that the mean is exactly k/m."""
        return self.n_pos - self.n_neg

    def as_distribution(self) -> tuple[float, float, float]:
        return (self.p_neg, self.p_zero, self.p_pos)


def aggregate(corpus: Corpus, dimension: Dimension) -> dict[str, SoftLabel]:
    """Per-verbatim vote tallies for one dimension.

    Only present records count; verbatims with no record for the dimension
    are omitted (not imputed neutral).
    """
    labels: dict[str, SoftLabel] = {}
    for verbatim_id, votes in values_by_verbatim(corpus, dimension).items():
        n_neg = sum(1 for v in votes.values() if v < 0)
        n_pos = sum(1 for v in votes.values() if v > 0)
        n_zero = len(votes) - n_neg - n_pos
        labels[verbatim_id] = SoftLabel(n_neg=n_neg, n_zero=n_zero, n_pos=n_pos)
    return labels


def mean_value(label: SoftLabel) -> float:
    """Mean annotation value p_pos - p_neg, in [-1, 1]."""
    return label.mean


@dataclass
class GradientHistogram:
    """Verbatim counts over the 2m+1 exact mean-value levels k/m."""

    dimension: Dimension
    m: int
    counts: dict[int, int]  # level index k in [-m, m] -> count

    @property
    def levels(self) -> list[float]:
        return [k / self.m for k in range(-self.m, self.m + 1)]


def gradient_histogram(corpus: Corpus, dimension: Dimension) -> GradientHistogram:
    """Histogram of mean-value levels; requires a uniform annotator count."""
    labels = aggregate(corpus, dimension)
    if not labels:
        raise AggregationError(f"no annotations for dimension {dimension.code}")
    ms = {label.m for label in labels.values()}
    if len(ms) > 1:
        raise AggregationError(
            f"mixed annotator counts {sorted(ms)} for dimension {dimension.code}; "
            "build one sub-histogram per annotator count"
        )
    m = ms.pop()
    counts = {k: 0 for k in range(-m, m + 1)}
    for label in labels.values():
        counts[label.level_index] += 1
    return GradientHistogram(dimension=dimension, m=m, counts=counts)


def aggregate_to_csv(labels_by_dimension: dict[Dimension, dict[str, SoftLabel]]) -> str:
    """Rows (verbatim_id, dimension, m, n_neg, n_zero, n_pos, mean)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["verbatim_id", "dimension", "m", "n_neg", "n_zero", "n_pos", "mean"])
    for dimension, labels in labels_by_dimension.items():
        for verbatim_id in sorted(labels):
            label = labels[verbatim_id]
            writer.writerow(
                [
                    verbatim_id,
                    dimension.code,
                    label.m,
                    label.n_neg,
                    label.n_zero,
                    label.n_pos,
                    repr(label.mean),
                ]
            )
    return buf.getvalue()
