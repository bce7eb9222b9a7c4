import dataclasses
import hashlib

import numpy as np
import pytest

from annotgrad.aggregate import aggregate
from annotgrad.agreement import Modality, krippendorff_alpha, project_modality
from annotgrad.corpus import CANONICAL_DIMENSIONS, Dimension, save_corpus, validate
from annotgrad.corpus import descriptive_stats, has_errors
from annotgrad.simulator import (
    DimensionBehavior,
    ExpectedSoftLabel,
    LatentState,
    SimulatorConfig,
    SimulatorError,
    expected_soft_label,
    generate,
    ground_truth_to_jsonl,
    marker_token,
    realistic_config,
)


def uniform_behaviors(**kwargs):
    return {d: DimensionBehavior(**kwargs) for d in CANONICAL_DIMENSIONS}


def test_config_validation():
    with pytest.raises(ValueError):
        SimulatorConfig(n_annotators=1)
    with pytest.raises(ValueError):
        SimulatorConfig(sign_flip_prob=0.5)
    with pytest.raises(ValueError):
        SimulatorConfig(annotator_thresholds=(0.5,))  # wrong arity
    with pytest.raises(ValueError):
        DimensionBehavior(zero_salience_weight=1.5)


def test_noiseless_saturated_salience_is_unanimous():
    config = SimulatorConfig(
        n_projects=2,
        verbatims_per_project=20,
        noise_sigma=0.0,
        sign_flip_prob=0.0,
        annotator_thresholds=(0.5,) * 6,
        dimensions=uniform_behaviors(zero_salience_weight=0.0, salience_alpha=200.0, salience_beta=0.1),
        seed=5,
    )
    corpus, ground_truth = generate(config)
    for d in CANONICAL_DIMENSIONS:
        for vid, label in aggregate(corpus, d).items():
            state = ground_truth[(vid, d)].state
            if state.salience > 0.5:  # threshold rule is strict
                assert label.m == 6
                assert label.n_zero == 0
                expected_sign = 1 if state.mu > 0 else -1
                assert (label.n_pos == 6) == (expected_sign == 1)
                assert (label.n_neg == 6) == (expected_sign == -1)


def test_zero_salience_everywhere_gives_all_zero_corpus():
    config = SimulatorConfig(
        n_projects=2,
        verbatims_per_project=15,
        dimensions=uniform_behaviors(zero_salience_weight=1.0),
        seed=1,
    )
    corpus, ground_truth = generate(config)
    assert all(r.value == 0 for r in corpus.records)
    stats = descriptive_stats(corpus)
    for d in CANONICAL_DIMENSIONS:
        assert stats.per_dimension[d].fraction_unannotated == 1.0
    for entry in ground_truth.values():
        assert entry.expected == ExpectedSoftLabel(0.0, 1.0, 0.0)


def test_generated_corpus_is_valid_and_fully_covered():
    config = SimulatorConfig(n_projects=3, verbatims_per_project=10, seed=2)
    corpus, _ = generate(config)
    issues = validate(corpus)
    assert not has_errors(issues)
    assert len(corpus.verbatims) == 30
    assert len(corpus.records) == 30 * 4 * 6
    for d in CANONICAL_DIMENSIONS:
        assert all(label.m == 6 for label in aggregate(corpus, d).values())


def test_generated_posts_stay_within_projects():
    # odd verbatim count per project: posts must not straddle projects
    config = SimulatorConfig(n_projects=3, verbatims_per_project=5, seed=2)
    corpus, _ = generate(config)
    assert validate(corpus) == []
    for v in corpus.verbatims:
        assert corpus.posts[v.post_id].project_id == v.project_id


def test_expected_below_all_thresholds_noiseless():
    config = SimulatorConfig(noise_sigma=0.0)
    label = expected_soft_label(LatentState(mu=0.5, salience=0.1), config)
    assert label == ExpectedSoftLabel(0.0, 1.0, 0.0)


def test_expected_saturated_noiseless_positive():
    config = SimulatorConfig(noise_sigma=0.0, sign_flip_prob=0.0)
    label = expected_soft_label(LatentState(mu=0.5, salience=1.0), config)
    assert label == ExpectedSoftLabel(0.0, 0.0, 1.0)


def test_expected_at_threshold_probability_half():
    config = SimulatorConfig(noise_sigma=0.1, sign_flip_prob=0.0, annotator_thresholds=(0.5,) * 6)
    label = expected_soft_label(LatentState(mu=0.3, salience=0.5), config)
    assert label.p_pos == pytest.approx(0.5, abs=1e-12)
    assert label.p_neg == 0.0


def test_expected_sign_flip_splits_mass():
    config = SimulatorConfig(noise_sigma=0.0, sign_flip_prob=0.25, annotator_thresholds=(0.0,) * 6)
    label = expected_soft_label(LatentState(mu=-0.9, salience=0.9), config)
    assert label.p_neg == pytest.approx(0.75)
    assert label.p_pos == pytest.approx(0.25)


def test_expected_zero_intensity_with_salience_raises():
    config = SimulatorConfig()
    with pytest.raises(SimulatorError, match="sign undefined"):
        expected_soft_label(LatentState(mu=0.0, salience=0.5), config)


def test_expected_monotone_in_salience():
    config = SimulatorConfig(noise_sigma=0.05)
    last = -1.0
    for s in np.linspace(0.01, 1.0, 25):
        label = expected_soft_label(LatentState(mu=0.4, salience=float(s)), config)
        pertinence = label.p_pos + label.p_neg
        assert pertinence >= last - 1e-12
        last = pertinence


def test_generation_deterministic_and_seed_sensitive():
    config = SimulatorConfig(n_projects=2, verbatims_per_project=10, seed=11)
    corpus_a, gt_a = generate(config)
    corpus_b, gt_b = generate(config)
    assert save_corpus(corpus_a) == save_corpus(corpus_b)
    assert ground_truth_to_jsonl(gt_a) == ground_truth_to_jsonl(gt_b)
    corpus_c, _ = generate(dataclasses.replace(config, seed=12))
    digest = lambda c: hashlib.sha256(save_corpus(c).encode()).hexdigest()
    assert digest(corpus_a) != digest(corpus_c)


def test_empirical_labels_converge_to_expectation():
    corpus, ground_truth = generate(SimulatorConfig(seed=7))
    deltas = []
    for d in CANONICAL_DIMENSIONS:
        for vid, label in aggregate(corpus, d).items():
            deltas.append(abs(label.mean - ground_truth[(vid, d)].expected.mean))
    assert float(np.mean(deltas)) < 0.03


def test_polarity_alpha_is_one_without_sign_flips():
    corpus, _ = generate(SimulatorConfig(n_projects=4, verbatims_per_project=50, seed=9))
    for d in CANONICAL_DIMENSIONS:
        result = krippendorff_alpha(project_modality(corpus, d, Modality.POLARITY))
        assert result.degenerate or result.alpha == 1.0


def test_sign_flips_reduce_polarity_alpha():
    config = SimulatorConfig(n_projects=4, verbatims_per_project=100, sign_flip_prob=0.2, seed=13)
    corpus, _ = generate(config)
    result = krippendorff_alpha(project_modality(corpus, Dimension.UTILITY, Modality.POLARITY))
    assert not result.degenerate
    assert result.alpha < 0.9


def test_marker_tokens_encode_dimension_sign_and_level():
    assert marker_token(Dimension.UTILITY, 1, 3) == "utipos03"
    assert marker_token(Dimension.FAMILIARITY, -1, 11) == "famneg11"
    corpus, ground_truth = generate(SimulatorConfig(n_projects=1, verbatims_per_project=40, seed=3))
    for v in corpus.verbatims:
        for d in CANONICAL_DIMENSIONS:
            state = ground_truth[(v.id, d)].state
            stem = marker_token(d, 1 if state.mu > 0 else -1, 0)[:6]
            assert (stem in v.text) == (state.salience > 0)


def test_ground_truth_jsonl_layout():
    corpus, ground_truth = generate(SimulatorConfig(n_projects=1, verbatims_per_project=2, seed=1))
    text = ground_truth_to_jsonl(ground_truth)
    lines = text.strip().splitlines()
    assert len(lines) == 2 * 4
    import json

    first = json.loads(lines[0])
    assert set(first) == {"verbatim_id", "dimension", "mu", "salience", "expected"}
    assert len(first["expected"]) == 3


def test_realistic_config_is_valid():
    config = realistic_config(seed=3)
    assert config.sign_flip_prob == 0.0
    corpus, _ = generate(dataclasses.replace(config, n_projects=2, verbatims_per_project=50))
    assert len(corpus.verbatims) == 100
