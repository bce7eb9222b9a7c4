"""Domain model, JSONL ingestion and descriptive statistics for
multi-annotator appraisal corpora.

A corpus holds projects, posts and verbatims (sentence-sized text segments),
plus one judgment in {-1, 0, +1} per (verbatim, annotator, dimension).
Missing judgments are real data and are never imputed as 0.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

VALID_VALUES = (-1, 0, 1)


class CorpusError(Exception):
    """Base error for corpus construction and analysis."""


class CorpusFormatError(CorpusError):
    """Malformed or inconsistent corpus file content."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class Dimension(Enum):
    """The four appraisal dimensions, in canonical report order."""

    FAMILIARITY = "F"
    PLEASANTNESS = "P"
    UTILITY = "U"
    LEGITIMACY = "L"

    @property
    def code(self) -> str:
        return self.value

    @classmethod
    def from_code(cls, code: str) -> "Dimension":
        try:
            return cls(code)
        except ValueError:
            raise CorpusError(f"unknown dimension code {code!r}") from None


#: Canonical ordering (F, P, U, L) used by every report.
CANONICAL_DIMENSIONS: tuple[Dimension, ...] = tuple(Dimension)


@dataclass(frozen=True, slots=True)
class Post:
    id: str
    project_id: str
    participant_id: str


@dataclass(frozen=True, slots=True)
class Verbatim:
    id: str
    project_id: str
    post_id: str
    text: str
    position: int


@dataclass(frozen=True, slots=True)
class AnnotationRecord:
    verbatim_id: str
    annotator_id: str
    dimension: Dimension
    value: int


@dataclass
class Corpus:
    """Immutable-by-convention container; safe to share once built."""

    projects: dict[str, str]  # id -> name
    posts: dict[str, Post]
    verbatims: list[Verbatim]
    records: list[AnnotationRecord]

    @property
    def annotators(self) -> list[str]:
        return sorted({r.annotator_id for r in self.records})

    @property
    def verbatim_ids(self) -> list[str]:
        return [v.id for v in self.verbatims]

    def verbatim_by_id(self) -> dict[str, Verbatim]:
        return {v.id: v for v in self.verbatims}

    def project_of_verbatim(self) -> dict[str, str]:
        return {v.id: v.project_id for v in self.verbatims}


def values_by_verbatim(corpus: Corpus, dimension: Dimension) -> dict[str, dict[str, int]]:
    """Map verbatim_id -> {annotator_id -> value} for one dimension."""
    out: dict[str, dict[str, int]] = defaultdict(dict)
    for r in corpus.records:
        if r.dimension is dimension:
            out[r.verbatim_id][r.annotator_id] = r.value
    return dict(out)


def _canonical_sort(corpus: Corpus) -> None:
    dim_index = {d: i for i, d in enumerate(CANONICAL_DIMENSIONS)}
    corpus.verbatims.sort(key=lambda v: v.id)
    corpus.records.sort(
        key=lambda r: (r.verbatim_id, r.annotator_id, dim_index[r.dimension])
    )


def _require(obj: dict, key: str, line_number: int):
    if key not in obj:
        raise CorpusFormatError(f"missing field {key!r}", line_number)
    return obj[key]


def _require_str(obj: dict, key: str, line_number: int) -> str:
    value = _require(obj, key, line_number)
    if not isinstance(value, str):
        raise CorpusFormatError(f"field {key!r} must be a string", line_number)
    return value


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    # file-like: may yield bytes or text
    return (
        line.decode("utf-8") if isinstance(line, (bytes, bytearray)) else line
        for line in source
    )


def load_corpus(source, format: str = "jsonl") -> Corpus:
    """Parse a line-delimited corpus stream into a validated Corpus.

    ``source`` may be a file object (text or binary), a str, or bytes.
    Entities are buffered and cross-references resolved at end of stream,
    so record order within the file does not matter.
    """
    if format != "jsonl":
        raise CorpusFormatError(f"unsupported format {format!r}")

    projects: dict[str, str] = {}
    posts: dict[str, Post] = {}
    verbatims: dict[str, Verbatim] = {}
    records: list[AnnotationRecord] = []
    seen_triples: set[tuple[str, str, Dimension]] = set()
    record_lines: list[int] = []

    for line_number, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"invalid JSON ({exc.msg})", line_number) from None
        if not isinstance(obj, dict):
            raise CorpusFormatError("each line must be a JSON object", line_number)

        kind = _require_str(obj, "kind", line_number)
        if kind == "project":
            pid = _require_str(obj, "id", line_number)
            if pid in projects:
                raise CorpusFormatError(f"duplicate project id {pid!r}", line_number)
            projects[pid] = _require_str(obj, "name", line_number)
        elif kind == "post":
            pid = _require_str(obj, "id", line_number)
            if pid in posts:
                raise CorpusFormatError(f"duplicate post id {pid!r}", line_number)
            posts[pid] = Post(
                id=pid,
                project_id=_require_str(obj, "project_id", line_number),
                participant_id=_require_str(obj, "participant_id", line_number),
            )
        elif kind == "verbatim":
            vid = _require_str(obj, "id", line_number)
            if vid in verbatims:
                raise CorpusFormatError(f"duplicate verbatim id {vid!r}", line_number)
            position = _require(obj, "position", line_number)
            if not isinstance(position, int) or isinstance(position, bool) or position < 0:
                raise CorpusFormatError("position must be a non-negative integer", line_number)
            verbatims[vid] = Verbatim(
                id=vid,
                project_id=_require_str(obj, "project_id", line_number),
                post_id=_require_str(obj, "post_id", line_number),
                text=_require_str(obj, "text", line_number),
                position=position,
            )
        elif kind == "annotation":
            vid = _require_str(obj, "verbatim_id", line_number)
            aid = _require_str(obj, "annotator_id", line_number)
            dim_code = _require_str(obj, "dimension", line_number)
            try:
                dimension = Dimension(dim_code)
            except ValueError:
                raise CorpusFormatError(
                    f"unknown dimension {dim_code!r}", line_number
                ) from None
            value = _require(obj, "value", line_number)
            if not isinstance(value, int) or isinstance(value, bool) or value not in VALID_VALUES:
                raise CorpusFormatError(
                    f"annotation value {value!r} outside {{-1, 0, +1}}", line_number
                )
            triple = (vid, aid, dimension)
            if triple in seen_triples:
                raise CorpusFormatError(
                    f"duplicate annotation for verbatim {vid!r}, annotator {aid!r}, "
                    f"dimension {dim_code}",
                    line_number,
                )
            seen_triples.add(triple)
            records.append(AnnotationRecord(vid, aid, dimension, value))
            record_lines.append(line_number)
        else:
            raise CorpusFormatError(f"unknown record kind {kind!r}", line_number)

    # resolve references now that the whole stream is buffered
    for post in posts.values():
        if post.project_id not in projects:
            raise CorpusFormatError(
                f"post {post.id!r} references missing project {post.project_id!r}"
            )
    for verbatim in verbatims.values():
        if verbatim.project_id not in projects:
            raise CorpusFormatError(
                f"verbatim {verbatim.id!r} references missing project {verbatim.project_id!r}"
            )
        if verbatim.post_id not in posts:
            raise CorpusFormatError(
                f"verbatim {verbatim.id!r} references missing post {verbatim.post_id!r}"
            )
    for record, line_number in zip(records, record_lines):
        if record.verbatim_id not in verbatims:
            raise CorpusFormatError(
                f"annotation references missing verbatim {record.verbatim_id!r}",
                line_number,
            )

    corpus = Corpus(
        projects=projects,
        posts=posts,
        verbatims=list(verbatims.values()),
        records=records,
    )
    _canonical_sort(corpus)
    return corpus


def save_corpus(corpus: Corpus) -> str:
    """Serialize to the JSONL interchange format, in canonical order."""
    dim_index = {d: i for i, d in enumerate(CANONICAL_DIMENSIONS)}
    lines = []
    for pid in sorted(corpus.projects):
        lines.append({"kind": "project", "id": pid, "name": corpus.projects[pid]})
    for pid in sorted(corpus.posts):
        post = corpus.posts[pid]
        lines.append(
            {
                "kind": "post",
                "id": post.id,
                "project_id": post.project_id,
                "participant_id": post.participant_id,
            }
        )
    for v in sorted(corpus.verbatims, key=lambda v: v.id):
        lines.append(
            {
                "kind": "verbatim",
                "id": v.id,
                "post_id": v.post_id,
                "project_id": v.project_id,
                "position": v.position,
                "text": v.text,
            }
        )
    for r in sorted(
        corpus.records,
        key=lambda r: (r.verbatim_id, r.annotator_id, dim_index[r.dimension]),
    ):
        lines.append(
            {
                "kind": "annotation",
                "verbatim_id": r.verbatim_id,
                "annotator_id": r.annotator_id,
                "dimension": r.dimension.code,
                "value": r.value,
            }
        )
    return "".join(json.dumps(obj, ensure_ascii=False) + "\n" for obj in lines)


@dataclass(frozen=True, slots=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    code: str
    message: str
    entity_id: str


def validate(corpus: Corpus) -> list[ValidationIssue]:
    """Check all corpus invariants; problems are reported, never raised.

    Errors cover broken references, duplicate annotations and domain
    violations. Verbatims covered by fewer annotators than the corpus-wide
    modal annotator count get a non-fatal "incomplete coverage" warning.
    """
    issues: list[ValidationIssue] = []
    verbatim_ids = {v.id for v in corpus.verbatims}

    for post in corpus.posts.values():
        if post.project_id not in corpus.projects:
            issues.append(
                ValidationIssue(
                    "error",
                    "dangling_project",
                    f"post {post.id!r} references missing project {post.project_id!r}",
                    post.id,
                )
            )
    for v in corpus.verbatims:
        if v.project_id not in corpus.projects:
            issues.append(
                ValidationIssue(
                    "error",
                    "dangling_project",
                    f"verbatim {v.id!r} references missing project {v.project_id!r}",
                    v.id,
                )
            )
        if v.post_id not in corpus.posts:
            issues.append(
                ValidationIssue(
                    "error",
                    "dangling_post",
                    f"verbatim {v.id!r} references missing post {v.post_id!r}",
                    v.id,
                )
            )
        elif corpus.posts[v.post_id].project_id != v.project_id:
            issues.append(
                ValidationIssue(
                    "error",
                    "project_mismatch",
                    f"verbatim {v.id!r} belongs to project {v.project_id!r} but its "
                    f"post {v.post_id!r} belongs to {corpus.posts[v.post_id].project_id!r}",
                    v.id,
                )
            )
        if v.position < 0:
            issues.append(
                ValidationIssue(
                    "error", "bad_position", f"verbatim {v.id!r} has negative position", v.id
                )
            )
        if not v.text:
            issues.append(
                ValidationIssue(
                    "warning", "empty_text", f"verbatim {v.id!r} has empty text", v.id
                )
            )

    seen_triples: set[tuple[str, str, Dimension]] = set()
    for r in corpus.records:
        if r.verbatim_id not in verbatim_ids:
            issues.append(
                ValidationIssue(
                    "error",
                    "dangling_verbatim",
                    f"annotation references missing verbatim {r.verbatim_id!r}",
                    r.verbatim_id,
                )
            )
        if r.value not in VALID_VALUES:
            issues.append(
                ValidationIssue(
                    "error",
                    "bad_value",
                    f"annotation value {r.value!r} outside {{-1, 0, +1}} "
                    f"on verbatim {r.verbatim_id!r}",
                    r.verbatim_id,
                )
            )
        triple = (r.verbatim_id, r.annotator_id, r.dimension)
        if triple in seen_triples:
            issues.append(
                ValidationIssue(
                    "error",
                    "duplicate_annotation",
                    f"duplicate annotation for verbatim {r.verbatim_id!r}, "
                    f"annotator {r.annotator_id!r}, dimension {r.dimension.code}",
                    r.verbatim_id,
                )
            )
        seen_triples.add(triple)

    # coverage: distinct annotators per verbatim vs the corpus-wide mode
    annotators_per_verbatim: dict[str, set[str]] = defaultdict(set)
    for r in corpus.records:
        if r.verbatim_id in verbatim_ids:
            annotators_per_verbatim[r.verbatim_id].add(r.annotator_id)
    counts = [len(annotators_per_verbatim.get(vid, ())) for vid in sorted(verbatim_ids)]
    if counts:
        modal_count = Counter(counts).most_common(1)[0][0]
        for vid in sorted(verbatim_ids):
            have = len(annotators_per_verbatim.get(vid, ()))
            if have < modal_count:
                issues.append(
                    ValidationIssue(
                        "warning",
                        "incomplete_coverage",
                        f"verbatim {vid!r} covered by {have} annotators "
                        f"(modal count is {modal_count})",
                        vid,
                    )
                )
    return issues


def has_errors(issues: list[ValidationIssue]) -> bool:
    return any(i.severity == "error" for i in issues)


@dataclass(frozen=True, slots=True)
class DimensionStats:
    fraction_unannotated: float
    fraction_any_negative: float
    fraction_any_positive: float


@dataclass(frozen=True, slots=True)
class GroupStats:
    proportion_positive: float
    proportion_negative: float


@dataclass
class CorpusStats:
    n_verbatims: int
    per_dimension: dict[Dimension, DimensionStats]
    # (annotator_id, project_id, dimension) -> proportions over the
    # project's verbatim count
    per_annotator_project: dict[tuple[str, str, Dimension], GroupStats]
    # share of (verbatim, dimension) pairs carrying at least one -1,
    # over n_verbatims * 4
    fraction_negative_global: float


def descriptive_stats(corpus: Corpus) -> CorpusStats:
    """Corpus-level annotation shares.

    A verbatim counts as unannotated for a dimension iff no annotator gave
    it a nonzero value there (verbatims with no records at all included).
    """
    if not corpus.verbatims:
        raise CorpusError("no verbatims")

    n_verbatims = len(corpus.verbatims)
    project_of = corpus.project_of_verbatim()
    project_sizes = Counter(project_of.values())

    nonzero: dict[Dimension, set[str]] = {d: set() for d in CANONICAL_DIMENSIONS}
    negative: dict[Dimension, set[str]] = {d: set() for d in CANONICAL_DIMENSIONS}
    positive: dict[Dimension, set[str]] = {d: set() for d in CANONICAL_DIMENSIONS}
    group_pos: Counter = Counter()
    group_neg: Counter = Counter()
    groups_seen: set[tuple[str, str, Dimension]] = set()

    for r in corpus.records:
        project_id = project_of.get(r.verbatim_id)
        if project_id is None:
            continue
        groups_seen.add((r.annotator_id, project_id, r.dimension))
        if r.value != 0:
            nonzero[r.dimension].add(r.verbatim_id)
        if r.value < 0:
            negative[r.dimension].add(r.verbatim_id)
            group_neg[(r.annotator_id, project_id, r.dimension)] += 1
        elif r.value > 0:
            positive[r.dimension].add(r.verbatim_id)
            group_pos[(r.annotator_id, project_id, r.dimension)] += 1

    per_dimension = {
        d: DimensionStats(
            fraction_unannotated=(n_verbatims - len(nonzero[d])) / n_verbatims,
            fraction_any_negative=len(negative[d]) / n_verbatims,
            fraction_any_positive=len(positive[d]) / n_verbatims,
        )
        for d in CANONICAL_DIMENSIONS
    }

    per_annotator_project = {}
    for key in groups_seen:
        _, project_id, _ = key
        size = project_sizes[project_id]
        per_annotator_project[key] = GroupStats(
            proportion_positive=group_pos.get(key, 0) / size,
            proportion_negative=group_neg.get(key, 0) / size,
        )

    negative_pairs = sum(len(negative[d]) for d in CANONICAL_DIMENSIONS)
    fraction_negative_global = negative_pairs / (n_verbatims * len(CANONICAL_DIMENSIONS))

    return CorpusStats(
        n_verbatims=n_verbatims,
        per_dimension=per_dimension,
        per_annotator_project=per_annotator_project,
        fraction_negative_global=fraction_negative_global,
    )


def stats_to_csv(stats: CorpusStats) -> str:
    """Render CorpusStats as CSV: one row per dimension, one per
    (annotator, project, dimension), plus one global row."""
    dim_index = {d: i for i, d in enumerate(CANONICAL_DIMENSIONS)}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "scope",
            "dimension",
            "annotator_id",
            "project_id",
            "fraction_unannotated",
            "fraction_any_negative",
            "fraction_any_positive",
            "proportion_positive",
            "proportion_negative",
            "fraction_negative_global",
        ]
    )
    for d in CANONICAL_DIMENSIONS:
        s = stats.per_dimension[d]
        writer.writerow(
            [
                "dimension",
                d.code,
                "",
                "",
                repr(s.fraction_unannotated),
                repr(s.fraction_any_negative),
                repr(s.fraction_any_positive),
                "",
                "",
                "",
            ]
        )
    for (annotator_id, project_id, d) in sorted(
        stats.per_annotator_project, key=lambda k: (k[0], k[1], dim_index[k[2]])
    ):
        g = stats.per_annotator_project[(annotator_id, project_id, d)]
        writer.writerow(
            [
                "annotator_project",
                d.code,
                annotator_id,
                project_id,
                "",
                "",
                "",
                repr(g.proportion_positive),
                repr(g.proportion_negative),
                "",
            ]
        )
    writer.writerow(
        ["global", "", "", "", "", "", "", "", "", repr(stats.fraction_negative_global)]
    )
    return buf.getvalue()
