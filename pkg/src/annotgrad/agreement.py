"""Krippendorff's alpha over rater-by-unit tables.

alpha = 1 - D_o / D_e, where D_o is the observed disagreement read off a
coincidence matrix of within-unit value pairs and D_e the disagreement
expected by chance from the value marginals. Three projection modalities
turn a {-1, 0, +1} annotation layer into reliability data: the raw values,
polarity only (zeros treated as missing), or pertinence only (presence vs
absence).

The coincidence matrix is accumulated as integer pair counts per unit size
and the final coefficient evaluated in exact rational arithmetic, so
relabelings, sign flips and zero-record edits that should not move alpha
leave it bit-for-bit unchanged.
"""

from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .corpus import CANONICAL_DIMENSIONS, Corpus, Dimension


class InsufficientDataError(Exception):
    """No unit carries two or more present values."""


class Modality(Enum):
    GLOBAL = "global"
    POLARITY = "polarity"
    PERTINENCE = "pertinence"


#: Canonical ordering (Global, Polarity, Pertinence) used by every report.
CANONICAL_MODALITIES: tuple[Modality, ...] = tuple(Modality)


class DistanceMetric(Enum):
    """Squared difference between two domain values."""

    NOMINAL = "nominal"
    INTERVAL = "interval"

    def squared_difference(self, c: int, k: int) -> int:
        if self is DistanceMetric.NOMINAL:
            return 0 if c == k else 1
        return (c - k) ** 2


@dataclass
class ReliabilityData:
    """Units x coders value table with missing cells.

    ``cells`` maps (unit_id, coder_id) to a value from ``domain``.
    """

    unit_ids: list[str]
    coder_ids: list[str]
    domain: tuple[int, ...]
    cells: dict[tuple[str, str], int]

    def __post_init__(self):
        if not self.unit_ids:
            raise ValueError("at least one unit required")
        domain = set(self.domain)
        for (unit_id, coder_id), value in self.cells.items():
            if value not in domain:
                raise ValueError(
                    f"value {value!r} at ({unit_id!r}, {coder_id!r}) "
                    f"outside domain {self.domain}"
                )


@dataclass
class CoincidenceMatrix:
    """Symmetric value-pair counts; entries are exact rationals.

    Every ordered pair of distinct ratings within a unit of size m
    contributes 1/(m-1), so each unit contributes m values in total.
    """

    domain: tuple[int, ...]
    o: list[list[Fraction]]
    n_units_used: int

    @property
    def marginals(self) -> list[Fraction]:
        return [sum(row, Fraction(0)) for row in self.o]

    @property
    def total(self) -> Fraction:
        return sum(self.marginals, Fraction(0))

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.o])


@dataclass(frozen=True)
class AlphaResult:
    """alpha is NaN and must not be reported when ``degenerate`` is set."""

    alpha: float
    n_units_used: int
    degenerate: bool


def project_modality(
    corpus: Corpus, dimension: Dimension, modality: Modality
) -> ReliabilityData:
    """Build reliability data for one dimension under a modality.

    Global keeps {-1, 0, +1} as-is; Polarity drops zeros (domain {-1, +1});
    Pertinence maps nonzero to 1 and zero to 0 (domain {0, 1}).
    """
    unit_ids = corpus.verbatim_ids
    coder_ids = corpus.annotators
    cells: dict[tuple[str, str], int] = {}
    for r in corpus.records:
        if r.dimension is not dimension:
            continue
        key = (r.verbatim_id, r.annotator_id)
        if modality is Modality.GLOBAL:
            cells[key] = r.value
        elif modality is Modality.POLARITY:
            if r.value != 0:
                cells[key] = r.value
        else:
            cells[key] = 1 if r.value != 0 else 0
    domain = {
        Modality.GLOBAL: (-1, 0, 1),
        Modality.POLARITY: (-1, 1),
        Modality.PERTINENCE: (0, 1),
    }[modality]
    return ReliabilityData(
        unit_ids=list(unit_ids), coder_ids=list(coder_ids), domain=domain, cells=cells
    )


def coincidence_matrix(data: ReliabilityData) -> CoincidenceMatrix:
    """Accumulate within-unit value pair counts.

    Units with fewer than two present values are excluded. Raises
    InsufficientDataError when nothing remains.
    """
    index = {v: i for i, v in enumerate(data.domain)}
    size = len(data.domain)

    values_by_unit: dict[str, list[int]] = defaultdict(list)
    for (unit_id, _), value in data.cells.items():
        values_by_unit[unit_id].append(value)

    # integer ordered-pair counts, grouped by unit size m so the 1/(m-1)
    # weights can be applied exactly afterwards
    pair_counts: dict[int, list[list[int]]] = {}
    n_units_used = 0
    for values in values_by_unit.values():
        m = len(values)
        if m < 2:
            continue
        n_units_used += 1
        mat = pair_counts.get(m)
        if mat is None:
            mat = [[0] * size for _ in range(size)]
            pair_counts[m] = mat
        tally = Counter(values)
        items = [(index[v], c) for v, c in tally.items()]
        for i, ci in items:
            for j, cj in items:
                mat[i][j] += ci * cj - (ci if i == j else 0)

    if n_units_used == 0:
        raise InsufficientDataError("insufficient paired data")

    o = [[Fraction(0)] * size for _ in range(size)]
    for m, mat in pair_counts.items():
        weight = Fraction(1, m - 1)
        for i in range(size):
            for j in range(size):
                if mat[i][j]:
                    o[i][j] += mat[i][j] * weight
    return CoincidenceMatrix(domain=data.domain, o=o, n_units_used=n_units_used)


def krippendorff_alpha(
    data: ReliabilityData, metric: DistanceMetric = DistanceMetric.NOMINAL
) -> AlphaResult:
    """alpha = 1 - D_o/D_e on the coincidence matrix.

    D_o = (1/n) sum_ck o[c][k] d2(c,k); D_e = (1/(n(n-1))) sum_ck
    n_c n_k d2(c,k). When D_e is zero (all ratings identical), chance
    disagreement is undefined and the result is flagged degenerate.
    """
    cm = coincidence_matrix(data)
    size = len(cm.domain)
    marginals = cm.marginals
    n = sum(marginals, Fraction(0))

    do_num = Fraction(0)
    de_num = Fraction(0)
    for i in range(size):
        for j in range(size):
            d2 = metric.squared_difference(cm.domain[i], cm.domain[j])
            if d2:
                do_num += cm.o[i][j] * d2
                de_num += marginals[i] * marginals[j] * d2

    if de_num == 0:
        return AlphaResult(alpha=float("nan"), n_units_used=cm.n_units_used, degenerate=True)
    alpha = 1 - (do_num * (n - 1)) / de_num
    return AlphaResult(alpha=float(alpha), n_units_used=cm.n_units_used, degenerate=False)


@dataclass(frozen=True)
class ReportCell:
    result: AlphaResult | None = None
    error: str | None = None


@dataclass
class AgreementReport:
    metric: DistanceMetric
    cells: dict[tuple[Dimension, Modality], ReportCell]


def agreement_report(
    corpus: Corpus, metric: DistanceMetric = DistanceMetric.NOMINAL
) -> AgreementReport:
    """4 x 3 table of alpha per (dimension, modality), canonical order.

    Per-cell failures (e.g. no pairable data after projection) are recorded
    in the cell; the report is always produced.
    """
    cells: dict[tuple[Dimension, Modality], ReportCell] = {}
    for dimension in CANONICAL_DIMENSIONS:
        for modality in CANONICAL_MODALITIES:
            data = project_modality(corpus, dimension, modality)
            try:
                cells[(dimension, modality)] = ReportCell(
                    result=krippendorff_alpha(data, metric)
                )
            except InsufficientDataError as exc:
                cells[(dimension, modality)] = ReportCell(error=str(exc))
    return AgreementReport(metric=metric, cells=cells)


def report_to_csv(report: AgreementReport) -> str:
    """Columns (dimension, modality, alpha, n_units_used, degenerate);
    degenerate and error cells print NA for alpha."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dimension", "modality", "alpha", "n_units_used", "degenerate"])
    for dimension in CANONICAL_DIMENSIONS:
        for modality in CANONICAL_MODALITIES:
            cell = report.cells[(dimension, modality)]
            if cell.error is not None:
                writer.writerow([dimension.code, modality.value, "NA", 0, "NA"])
            elif cell.result.degenerate:
                writer.writerow(
                    [dimension.code, modality.value, "NA", cell.result.n_units_used, "true"]
                )
            else:
                writer.writerow(
                    [
                        dimension.code,
                        modality.value,
                        repr(cell.result.alpha),
                        cell.result.n_units_used,
                        "false",
                    ]
                )
    return buf.getvalue()
