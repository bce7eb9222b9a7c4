import json

import numpy as np
import pytest

from annotgrad.corpus import (
    CANONICAL_DIMENSIONS,
    Corpus,
    CorpusError,
    CorpusFormatError,
    Dimension,
    descriptive_stats,
    has_errors,
    load_corpus,
    save_corpus,
    stats_to_csv,
    validate,
)
from annotgrad.aggregate import aggregate

from helpers import build_corpus, random_corpus, single_dimension_corpus


def jsonl(*objs) -> str:
    return "".join(json.dumps(o) + "\n" for o in objs)


BASE_ENTITIES = [
    {"kind": "project", "id": "p1", "name": "demo"},
    {"kind": "post", "id": "post1", "project_id": "p1", "participant_id": "m1"},
    {
        "kind": "verbatim",
        "id": "v1",
        "post_id": "post1",
        "project_id": "p1",
        "position": 0,
        "text": "tres utile au quotidien",
    },
]


def test_empty_stream_gives_empty_corpus():
    corpus = load_corpus("")
    assert corpus.projects == {}
    assert corpus.verbatims == []
    assert corpus.records == []
    assert validate(corpus) == []


def test_load_one_verbatim_two_annotators():
    text = jsonl(
        *BASE_ENTITIES,
        {"kind": "annotation", "verbatim_id": "v1", "annotator_id": "a1", "dimension": "U", "value": 1},
        {"kind": "annotation", "verbatim_id": "v1", "annotator_id": "a2", "dimension": "U", "value": 0},
    )
    corpus = load_corpus(text)
    assert len(corpus.records) == 2
    assert corpus.annotators == ["a1", "a2"]
    label = aggregate(corpus, Dimension.UTILITY)["v1"]
    assert label.p_pos == 0.5
    assert label.p_zero == 0.5


def test_load_is_order_independent():
    objs = BASE_ENTITIES + [
        {"kind": "annotation", "verbatim_id": "v1", "annotator_id": "a1", "dimension": "U", "value": 1}
    ]
    forward = load_corpus(jsonl(*objs))
    backward = load_corpus(jsonl(*reversed(objs)))
    assert forward == backward


def test_value_outside_domain_names_line():
    text = jsonl(
        *BASE_ENTITIES,
        {"kind": "annotation", "verbatim_id": "v1", "annotator_id": "a1", "dimension": "U", "value": 2},
    )
    with pytest.raises(CorpusFormatError, match="line 4"):
        load_corpus(text)


def test_malformed_json_names_line():
    text = jsonl(*BASE_ENTITIES) + "{not json\n"
    with pytest.raises(CorpusFormatError, match="line 4"):
        load_corpus(text)


def test_duplicate_annotation_rejected():
    ann = {"kind": "annotation", "verbatim_id": "v1", "annotator_id": "a1", "dimension": "U", "value": 1}
    with pytest.raises(CorpusFormatError, match="duplicate annotation"):
        load_corpus(jsonl(*BASE_ENTITIES, ann, ann))


def test_dangling_verbatim_reference_rejected():
    text = jsonl(
        *BASE_ENTITIES,
        {"kind": "annotation", "verbatim_id": "ghost", "annotator_id": "a1", "dimension": "U", "value": 1},
    )
    with pytest.raises(CorpusFormatError, match="ghost"):
        load_corpus(text)


def test_unknown_dimension_rejected():
    text = jsonl(
        *BASE_ENTITIES,
        {"kind": "annotation", "verbatim_id": "v1", "annotator_id": "a1", "dimension": "X", "value": 1},
    )
    with pytest.raises(CorpusFormatError, match="dimension"):
        load_corpus(text)


def test_bytes_input_accepted():
    corpus = load_corpus(jsonl(*BASE_ENTITIES).encode("utf-8"))
    assert len(corpus.verbatims) == 1


def test_round_trip_reloads_to_equal_corpus():
    rng = np.random.default_rng(42)
    corpus = random_corpus(rng, n_verbatims=12, n_annotators=5)
    reloaded = load_corpus(save_corpus(corpus))
    assert save_corpus(reloaded) == save_corpus(corpus)
    assert reloaded == load_corpus(save_corpus(reloaded))


def test_dimension_canonical_order():
    assert [d.code for d in CANONICAL_DIMENSIONS] == ["F", "P", "U", "L"]
    assert len(CANONICAL_DIMENSIONS) == 4


def test_validate_consistent_corpus_is_clean():
    votes = {
        f"v{i}": {f"a{j}": {d: 0 for d in CANONICAL_DIMENSIONS} for j in range(6)}
        for i in range(3)
    }
    corpus = build_corpus(votes)
    assert validate(corpus) == []


def test_validate_warns_on_incomplete_coverage():
    votes = {
        f"v{i}": {f"a{j}": {Dimension.UTILITY: 0} for j in range(6)} for i in range(4)
    }
    del votes["v0"]["a5"]  # 5 of 6 annotators
    corpus = build_corpus(votes)
    issues = validate(corpus)
    assert not has_errors(issues)
    assert any(i.code == "incomplete_coverage" and i.entity_id == "v0" for i in issues)


def test_validate_reports_post_project_mismatch():
    corpus = single_dimension_corpus({"v1": {"a1": 1, "a2": 1}})
    post = corpus.posts["post_v1"]
    corpus.projects["p9"] = "other"
    corpus.posts["post_v1"] = post.__class__(post.id, "p9", post.participant_id)
    issues = validate(corpus)
    assert any(i.code == "project_mismatch" for i in issues)


def test_validate_reports_dangling_record():
    corpus = single_dimension_corpus({"v1": {"a1": 1, "a2": 1}})
    corpus.records.append(corpus.records[0].__class__("missing", "a1", Dimension.UTILITY, 1))
    issues = validate(corpus)
    assert any(i.code == "dangling_verbatim" and i.entity_id == "missing" for i in issues)
    assert has_errors(issues)


def test_stats_all_zero_corpus_fully_unannotated():
    votes = {
        f"v{i}": {f"a{j}": {d: 0 for d in CANONICAL_DIMENSIONS} for j in range(3)}
        for i in range(5)
    }
    stats = descriptive_stats(build_corpus(votes))
    for d in CANONICAL_DIMENSIONS:
        assert stats.per_dimension[d].fraction_unannotated == 1.0
        assert stats.per_dimension[d].fraction_any_negative == 0.0
    assert stats.fraction_negative_global == 0.0


def test_stats_hand_counted_fixture():
    U, F = Dimension.UTILITY, Dimension.FAMILIARITY
    votes = {
        "v1": {"a1": {U: 1, F: 0}, "a2": {U: 1, F: 0}},
        "v2": {"a1": {U: 0, F: 0}, "a2": {U: -1, F: 0}},
        "v3": {"a1": {U: 0, F: 1}, "a2": {U: 0, F: 0}},
        "v4": {"a1": {U: 0, F: 0}, "a2": {U: 0, F: 0}},
    }
    stats = descriptive_stats(build_corpus(votes))
    u = stats.per_dimension[U]
    assert u.fraction_unannotated == pytest.approx(2 / 4)
    assert u.fraction_any_negative == pytest.approx(1 / 4)
    assert u.fraction_any_positive == pytest.approx(1 / 4)
    f = stats.per_dimension[F]
    assert f.fraction_unannotated == pytest.approx(3 / 4)
    # negatives: only (v2, U) over 4 verbatims x 4 dimensions
    assert stats.fraction_negative_global == pytest.approx(1 / 16)
    # per annotator/project: a1 marked 1 of 4 verbatims positive on U? a1 has v1 only
    g = stats.per_annotator_project[("a1", "p0", U)]
    assert g.proportion_positive == pytest.approx(1 / 4)
    assert g.proportion_negative == 0.0


def test_stats_unannotated_complement_property():
    rng = np.random.default_rng(7)
    corpus = random_corpus(rng, n_verbatims=20, n_annotators=4)
    stats = descriptive_stats(corpus)
    for d in CANONICAL_DIMENSIONS:
        marked = {
            r.verbatim_id for r in corpus.records if r.dimension is d and r.value != 0
        }
        assert stats.per_dimension[d].fraction_unannotated == pytest.approx(
            1 - len(marked) / len(corpus.verbatims)
        )


def test_stats_permutation_invariant():
    rng = np.random.default_rng(11)
    corpus = random_corpus(rng, n_verbatims=15, n_annotators=4)
    shuffled = Corpus(
        projects=corpus.projects,
        posts=corpus.posts,
        verbatims=corpus.verbatims,
        records=list(reversed(corpus.records)),
    )
    assert descriptive_stats(corpus) == descriptive_stats(shuffled)


def test_stats_empty_corpus_raises():
    corpus = Corpus(projects={}, posts={}, verbatims=[], records=[])
    with pytest.raises(CorpusError, match="no verbatims"):
        descriptive_stats(corpus)


def test_stats_csv_has_expected_rows():
    votes = {"v1": {"a1": {Dimension.UTILITY: 1}}}
    csv_text = stats_to_csv(descriptive_stats(build_corpus(votes)))
    lines = csv_text.strip().splitlines()
    assert lines[0].startswith("scope,dimension")
    assert sum(1 for l in lines if l.startswith("dimension,")) == 4
    assert sum(1 for l in lines if l.startswith("annotator_project,")) == 1
    assert lines[-1].startswith("global,")
