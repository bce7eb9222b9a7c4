"""Project-grouped cross-validation, gradient confusion grids and
threshold precision/recall reports.

Folds partition projects, never verbatims, so no model is ever evaluated
on a project it saw during training. Continuous predictions are compared
to exact vote-mean levels either on the 2m+1 grid (confusion grid) or
through cutoffs at -1/3 and +1/3 (threshold report).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .aggregate import SoftLabel, aggregate
from .corpus import Corpus, Dimension
from .probe import TrainConfig, _as_matrix, predict_dist_matrix, train_probe
from .seeds import derive_seed

THRESHOLD = 1.0 / 3.0


class EvaluationError(Exception):
    pass


@dataclass
class FoldPlan:
    """Disjoint project folds covering every project exactly once."""

    folds: list[list[str]]
    seed: int

    @property
    def projects(self) -> list[str]:
        return sorted(p for fold in self.folds for p in fold)

    def train_projects(self, fold_index: int) -> list[str]:
        held_out = set(self.folds[fold_index])
        return sorted(p for p in self.projects if p not in held_out)


def make_folds(projects: Iterable[str], fold_count: int, seed: int) -> FoldPlan:
    """Shuffle projects by seed, then partition into near-equal folds
    (sizes differ by at most one)."""
    project_list = sorted(set(projects))
    n = len(project_list)
    if not 2 <= fold_count <= n:
        raise EvaluationError(
            f"fold_count {fold_count} out of range [2, {n}] for {n} projects"
        )
    rng = np.random.default_rng(seed)
    order = [project_list[i] for i in rng.permutation(n)]
    base, extra = divmod(n, fold_count)
    folds = []
    start = 0
    for i in range(fold_count):
        size = base + (1 if i < extra else 0)
        folds.append(sorted(order[start : start + size]))
        start += size
    return FoldPlan(folds=folds, seed=seed)


@dataclass(frozen=True)
class PredictionOutcome:
    true_label: SoftLabel
    predicted_value: float
    predicted_dist: tuple[float, float, float]


@dataclass
class FoldProvenance:
    fold_index: int
    test_projects: list[str]
    train_projects: list[str]
    n_train: int
    n_test: int


@dataclass
class CrossValidationResult:
    dimension: Dimension
    predictions: dict[str, PredictionOutcome]
    folds: list[FoldProvenance]
    skipped: dict[str, int]  # reason -> count


def cross_validate(
    corpus: Corpus,
    features: Mapping,
    dimension: Dimension,
    train_config: TrainConfig,
    fold_plan: FoldPlan,
) -> CrossValidationResult:
    """Predict every labeled verbatim with the one model whose training
    split excluded its project.

    Verbatims with features but no label (or vice versa) are excluded and
    counted in the skip report. Each fold trains with a seed derived from
    (train_config.seed, "fold", index).
    """
    labels = aggregate(corpus, dimension)
    project_of = corpus.project_of_verbatim()
    plan_projects = set(plan_p for fold in fold_plan.folds for plan_p in fold)

    skipped = {"no_features": 0, "no_label": 0}
    eval_ids = []
    for v in corpus.verbatims:
        has_features = v.id in features
        has_label = v.id in labels
        if has_features and has_label:
            eval_ids.append(v.id)
        elif has_label:
            skipped["no_features"] += 1
        elif has_features:
            skipped["no_label"] += 1

    missing = sorted({project_of[i] for i in eval_ids} - plan_projects)
    if missing:
        raise EvaluationError(f"projects not covered by the fold plan: {missing}")

    predictions: dict[str, PredictionOutcome] = {}
    provenance: list[FoldProvenance] = []
    for fold_index, fold in enumerate(fold_plan.folds):
        test_projects = set(fold)
        train_projects = set(fold_plan.train_projects(fold_index))
        train_ids = [i for i in eval_ids if project_of[i] in train_projects]
        test_ids = [i for i in eval_ids if project_of[i] in test_projects]
        provenance.append(
            FoldProvenance(
                fold_index=fold_index,
                test_projects=sorted(test_projects),
                train_projects=sorted(train_projects),
                n_train=len(train_ids),
                n_test=len(test_ids),
            )
        )
        if not test_ids:
            continue
        if not train_ids:
            raise EvaluationError(f"fold {fold_index} has no training verbatims")
        fold_config = replace(
            train_config, seed=derive_seed(train_config.seed, "fold", fold_index)
        )
        model = train_probe(
            {i: features[i] for i in train_ids},
            {i: labels[i] for i in train_ids},
            fold_config,
            dimension=dimension,
        )
        X_test = _as_matrix([features[i] for i in test_ids], d_expected=model.d)
        Q = predict_dist_matrix(model, X_test)
        for row, verbatim_id in enumerate(test_ids):
            q = (float(Q[row, 0]), float(Q[row, 1]), float(Q[row, 2]))
            predictions[verbatim_id] = PredictionOutcome(
                true_label=labels[verbatim_id],
                predicted_value=q[2] - q[0],
                predicted_dist=q,
            )
    return CrossValidationResult(
        dimension=dimension, predictions=predictions, folds=provenance, skipped=skipped
    )


def nearest_level_index(value: float, m: int) -> int:
    """Snap a continuous value to the nearest k/m level index, exact
    arithmetic, ties toward the lower index."""
    t = Fraction(value) * m
    k = t.numerator // t.denominator  # floor
    frac = t - k
    if frac > Fraction(1, 2):
        k += 1
    return max(-m, min(m, k))


@dataclass
class ConfusionGrid:
    """True-vs-predicted counts over the 2m+1 exact gradient levels."""

    m: int
    counts: np.ndarray  # (2m+1, 2m+1) ints, rows = true level
    row_normalized: np.ndarray

    @property
    def bin_centers(self) -> list[float]:
        return [k / self.m for k in range(-self.m, self.m + 1)]

    def diagonal_mass(self, band: int = 0) -> float:
        """Share of counts within ``band`` bins of the diagonal."""
        total = int(self.counts.sum())
        if total == 0:
            return 0.0
        hit = sum(
            int(self.counts[i, j])
            for i in range(self.counts.shape[0])
            for j in range(self.counts.shape[1])
            if abs(i - j) <= band
        )
        return hit / total


def confusion_grid(predictions: Mapping[str, PredictionOutcome], m: int) -> ConfusionGrid:
    """Bin true vote means (exact levels) against predicted values snapped
    to the nearest level. All true labels must have annotator count m."""
    size = 2 * m + 1
    counts = np.zeros((size, size), dtype=np.int64)
    for outcome in predictions.values():
        label = outcome.true_label
        if label.m != m:
            raise EvaluationError(
                f"mixed annotator counts: expected m={m}, found m={label.m}"
            )
        row = label.level_index + m
        col = nearest_level_index(outcome.predicted_value, m) + m
        counts[row, col] += 1
    row_sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        row_normalized = np.where(row_sums > 0, counts / np.maximum(row_sums, 1), 0.0)
    return ConfusionGrid(m=m, counts=counts, row_normalized=row_normalized)


def threshold_classify(value: float) -> int:
    """+1 above 1/3, -1 below -1/3, else 0 (boundaries are neutral)."""
    if value > THRESHOLD:
        return 1
    if value < -THRESHOLD:
        return -1
    return 0


@dataclass(frozen=True)
class ClassMetrics:
    precision: float | None  # None when the class was never predicted
    recall: float | None  # None when the class never occurs
    support: int


@dataclass
class ThresholdReport:
    per_class: dict[int, ClassMetrics]  # keys -1, 0, +1
    global_accuracy: float
    n_evaluated: int


def threshold_report(predictions: Mapping[str, PredictionOutcome]) -> ThresholdReport:
    """Per-class precision/recall and overall accuracy after thresholding
    both true means and predicted values at -1/3 and +1/3."""
    if not predictions:
        raise EvaluationError("empty results")
    classes = (-1, 0, 1)
    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    support = {c: 0 for c in classes}
    correct = 0
    for outcome in predictions.values():
        true_class = threshold_classify(outcome.true_label.mean)
        pred_class = threshold_classify(outcome.predicted_value)
        support[true_class] += 1
        if true_class == pred_class:
            tp[true_class] += 1
            correct += 1
        else:
            fp[pred_class] += 1
            fn[true_class] += 1
    per_class = {}
    for c in classes:
        predicted = tp[c] + fp[c]
        actual = tp[c] + fn[c]
        per_class[c] = ClassMetrics(
            precision=tp[c] / predicted if predicted else None,
            recall=tp[c] / actual if actual else None,
            support=support[c],
        )
    return ThresholdReport(
        per_class=per_class,
        global_accuracy=correct / len(predictions),
        n_evaluated=len(predictions),
    )


def _center_labels(m: int) -> list[str]:
    return [f"{k}/{m}" for k in range(-m, m + 1)]


def grid_to_csv(grid: ConfusionGrid) -> str:
    """Counts matrix with bin-center header row and column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    labels = _center_labels(grid.m)
    writer.writerow(["true\\predicted"] + labels)
    for i, label in enumerate(labels):
        writer.writerow([label] + [int(x) for x in grid.counts[i]])
    return buf.getvalue()


def grid_to_json_payload(grid: ConfusionGrid) -> dict:
    return {
        "m": grid.m,
        "bin_centers": grid.bin_centers,
        "counts": [[int(x) for x in row] for row in grid.counts],
        "row_normalized": [[float(x) for x in row] for row in grid.row_normalized],
    }


def threshold_reports_to_csv(reports: Mapping[Dimension, ThresholdReport]) -> str:
    """Rows = metrics, columns = dimensions; undefined cells print NA."""
    dims = [d for d in Dimension if d in reports]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric"] + [d.code for d in dims])

    def fmt(x: float | None) -> str:
        return "NA" if x is None else repr(x)

    writer.writerow(["global_accuracy"] + [repr(reports[d].global_accuracy) for d in dims])
    for class_value, tag in ((1, "pos"), (-1, "neg"), (0, "zero")):
        writer.writerow(
            [f"precision_{tag}"] + [fmt(reports[d].per_class[class_value].precision) for d in dims]
        )
        writer.writerow(
            [f"recall_{tag}"] + [fmt(reports[d].per_class[class_value].recall) for d in dims]
        )
        writer.writerow(
            [f"support_{tag}"] + [reports[d].per_class[class_value].support for d in dims]
        )
    writer.writerow(["n_evaluated"] + [reports[d].n_evaluated for d in dims])
    return buf.getvalue()
