"""Generative model of annotator behavior over latent appraisal gradients.

Each (verbatim, dimension) carries a latent salience s in [0, 1] (how
markedly the dimension is expressed) and a signed intensity mu. Annotator j
notices the dimension iff s + eps_j > tau_j with eps_j ~ Normal(0, sigma);
when noticed, the emitted sign is sign(mu), flipped with probability rho.
Zero-salience pairs are inert: the dimension simply is not there, so no
annotator reacts. Verbatim text is synthesized from marker tokens whose
identity encodes (dimension, sign, salience level) and whose repetition
grows with salience, plus filler tokens.

This is one concrete instantiation of the hypothesis that annotation
variability follows a stable underlying gradient; it is a verification
oracle, not a claim about real annotators.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    CANONICAL_DIMENSIONS,
    AnnotationRecord,
    Corpus,
    Dimension,
    Post,
    Verbatim,
)
from .seeds import derive_seed


class SimulatorError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class LatentState:
    mu: float  # signed intensity in [-1, 1]; 0 only when salience is 0
    salience: float  # markedness in [0, 1]


@dataclass(frozen=True)
class DimensionBehavior:
    """Per-dimension generative parameters."""

    zero_salience_weight: float = 0.3  # share of verbatims where the dimension is absent
    salience_alpha: float = 2.0  # Beta shape over (0, 1] for salient verbatims
    salience_beta: float = 2.0
    positive_share: float = 0.75  # P(mu > 0) for salient verbatims

    def __post_init__(self):
        if not 0.0 <= self.zero_salience_weight <= 1.0:
            raise ValueError("zero_salience_weight must be in [0, 1]")
        if self.salience_alpha <= 0 or self.salience_beta <= 0:
            raise ValueError("salience Beta shapes must be positive")
        if not 0.0 <= self.positive_share <= 1.0:
            raise ValueError("positive_share must be in [0, 1]")


def _default_behaviors() -> dict[Dimension, DimensionBehavior]:
    return {d: DimensionBehavior() for d in CANONICAL_DIMENSIONS}


@dataclass(frozen=True)
class SimulatorConfig:
    n_projects: int = 21
    verbatims_per_project: int = 200
    n_annotators: int = 6
    dimensions: dict[Dimension, DimensionBehavior] = field(default_factory=_default_behaviors)
    # one noticing threshold per annotator; heterogeneity is what drives
    # pertinence disagreement while polarity agreement stays high
    annotator_thresholds: tuple[float, ...] | None = None
    noise_sigma: float = 0.02
    sign_flip_prob: float = 0.0
    marker_levels: int = 12
    filler_tokens: int = 3
    filler_vocab: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.n_projects < 1 or self.verbatims_per_project < 1:
            raise ValueError("need at least one project and one verbatim per project")
        if self.n_annotators < 2:
            raise ValueError("need at least two annotators")
        if set(self.dimensions) != set(CANONICAL_DIMENSIONS):
            raise ValueError("dimension behaviors must cover exactly the four dimensions")
        if self.annotator_thresholds is not None:
            if len(self.annotator_thresholds) != self.n_annotators:
                raise ValueError("one threshold per annotator required")
            if any(not 0.0 <= t <= 1.0 for t in self.annotator_thresholds):
                raise ValueError("thresholds must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.sign_flip_prob < 0.5:
            raise ValueError("sign_flip_prob must lie in [0, 0.5)")
        if self.marker_levels < 1 or self.filler_tokens < 0 or self.filler_vocab < 1:
            raise ValueError("bad text synthesis parameters")

    def thresholds(self) -> tuple[float, ...]:
        if self.annotator_thresholds is not None:
            return self.annotator_thresholds
        return tuple(np.linspace(0.15, 0.9, self.n_annotators))


@dataclass(frozen=True)
class ExpectedSoftLabel:
    """Closed-form vote distribution under the generative law."""

    p_neg: float
    p_zero: float
    p_pos: float

    @property
    def mean(self) -> float:
        return self.p_pos - self.p_neg


@dataclass(frozen=True)
class GroundTruthEntry:
    state: LatentState
    expected: ExpectedSoftLabel


GroundTruth = dict[tuple[str, Dimension], GroundTruthEntry]


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def expected_soft_label(state: LatentState, config: SimulatorConfig) -> ExpectedSoftLabel:
    """Expected (p_neg, p_zero, p_pos) for one latent state.

    Annotator j notices with probability Phi((s - tau_j)/sigma), a step
    function when sigma is 0. Noticing emits sign(mu), flipped with
    probability rho. Zero salience never triggers a notice.
    """
    s = state.salience
    if s == 0.0:
        return ExpectedSoftLabel(0.0, 1.0, 0.0)
    if state.mu == 0.0:
        raise SimulatorError("sign undefined: zero intensity with positive salience")
    taus = config.thresholds()
    sigma = config.noise_sigma
    if sigma == 0.0:
        mean_notice = sum(1.0 for t in taus if s > t) / len(taus)
    else:
        mean_notice = sum(_phi((s - t) / sigma) for t in taus) / len(taus)
    rho = config.sign_flip_prob
    if state.mu > 0:
        p_pos = mean_notice * (1.0 - rho)
        p_neg = mean_notice * rho
    else:
        p_neg = mean_notice * (1.0 - rho)
        p_pos = mean_notice * rho
    return ExpectedSoftLabel(p_neg=p_neg, p_zero=1.0 - p_pos - p_neg, p_pos=p_pos)


_MARKER_STEMS = {
    Dimension.FAMILIARITY: "fam",
    Dimension.PLEASANTNESS: "ple",
    Dimension.UTILITY: "uti",
    Dimension.LEGITIMACY: "leg",
}


def marker_token(dimension: Dimension, sign: int, level: int) -> str:
    suffix = "pos" if sign > 0 else "neg"
    return f"{_MARKER_STEMS[dimension]}{suffix}{level:02d}"


def _salience_level(s: float, n_levels: int) -> int:
    return min(n_levels - 1, int(s * n_levels))


def generate(config: SimulatorConfig) -> tuple[Corpus, GroundTruth]:
    """Sample a corpus and its ground truth, deterministically by seed.

    Randomness is split into independent streams (latent states per
    dimension, annotation noise per dimension, filler text) derived from
    the master seed, so any one stream can be reasoned about in isolation.
    """
    n_verbatims = config.n_projects * config.verbatims_per_project
    taus = np.array(config.thresholds())
    rho = config.sign_flip_prob

    project_ids = [f"proj{p:03d}" for p in range(config.n_projects)]
    verbatim_ids = [f"v{i:06d}" for i in range(n_verbatims)]
    project_of = [i // config.verbatims_per_project for i in range(n_verbatims)]

    # latent draw and annotation draw per dimension, in canonical order
    mus: dict[Dimension, np.ndarray] = {}
    saliences: dict[Dimension, np.ndarray] = {}
    values: dict[Dimension, np.ndarray] = {}
    for dimension in CANONICAL_DIMENSIONS:
        behavior = config.dimensions[dimension]
        rng_latent = np.random.default_rng(derive_seed(config.seed, "latent", dimension.code))
        inert = rng_latent.random(n_verbatims) < behavior.zero_salience_weight
        s = rng_latent.beta(behavior.salience_alpha, behavior.salience_beta, n_verbatims)
        s = np.maximum(s, 1e-9)  # Beta mass at exactly 0 is measure-zero; keep s > 0
        sign = np.where(rng_latent.random(n_verbatims) < behavior.positive_share, 1.0, -1.0)
        magnitude = rng_latent.uniform(0.05, 1.0, n_verbatims)  # keep |mu| away from 0
        mu = sign * magnitude
        s[inert] = 0.0
        mu[inert] = 0.0

        rng_annot = np.random.default_rng(derive_seed(config.seed, "annot", dimension.code))
        if config.noise_sigma > 0:
            eps = rng_annot.normal(0.0, config.noise_sigma, (n_verbatims, config.n_annotators))
        else:
            eps = np.zeros((n_verbatims, config.n_annotators))
        noticed = (s[:, None] + eps) > taus[None, :]
        noticed[inert] = False
        flip = rng_annot.random((n_verbatims, config.n_annotators)) < rho
        emitted_sign = np.where(flip, -np.sign(mu)[:, None], np.sign(mu)[:, None])
        values[dimension] = np.where(noticed, emitted_sign, 0.0).astype(np.int64)
        mus[dimension] = mu
        saliences[dimension] = s

    rng_text = np.random.default_rng(derive_seed(config.seed, "text"))
    filler = rng_text.integers(0, config.filler_vocab, (n_verbatims, config.filler_tokens))

    verbatims: list[Verbatim] = []
    posts: dict[str, Post] = {}
    records: list[AnnotationRecord] = []
    ground_truth: GroundTruth = {}
    annotator_ids = [f"a{j}" for j in range(config.n_annotators)]

    for i, verbatim_id in enumerate(verbatim_ids):
        project_id = project_ids[project_of[i]]
        # two verbatims per post, grouped within the project
        local = i % config.verbatims_per_project
        post_id = f"post{project_of[i]:03d}_{local // 2:05d}"
        if post_id not in posts:
            posts[post_id] = Post(
                id=post_id,
                project_id=project_id,
                participant_id=f"part{(i // 2) % 37:03d}",
            )
        tokens: list[str] = []
        for dimension in CANONICAL_DIMENSIONS:
            s = float(saliences[dimension][i])
            mu = float(mus[dimension][i])
            if s > 0:
                level = _salience_level(s, config.marker_levels)
                tokens.extend([marker_token(dimension, 1 if mu > 0 else -1, level)] * (level + 1))
        tokens.extend(f"fil{int(f):02d}" for f in filler[i])
        verbatims.append(
            Verbatim(
                id=verbatim_id,
                project_id=project_id,
                post_id=post_id,
                text=" ".join(tokens),
                position=local % 2,
            )
        )
        for dimension in CANONICAL_DIMENSIONS:
            state = LatentState(mu=float(mus[dimension][i]), salience=float(saliences[dimension][i]))
            ground_truth[(verbatim_id, dimension)] = GroundTruthEntry(
                state=state, expected=expected_soft_label(state, config)
            )
            row = values[dimension][i]
            for j, annotator_id in enumerate(annotator_ids):
                records.append(
                    AnnotationRecord(
                        verbatim_id=verbatim_id,
                        annotator_id=annotator_id,
                        dimension=dimension,
                        value=int(row[j]),
                    )
                )

    corpus = Corpus(
        projects={pid: f"concept study {pid}" for pid in project_ids},
        posts=posts,
        verbatims=verbatims,
        records=records,
    )
    return corpus, ground_truth


def ground_truth_to_jsonl(ground_truth: GroundTruth) -> str:
    """One line per (verbatim, dimension): latent state and expected label."""
    dim_index = {d: i for i, d in enumerate(CANONICAL_DIMENSIONS)}
    lines = []
    for (verbatim_id, dimension) in sorted(
        ground_truth, key=lambda k: (k[0], dim_index[k[1]])
    ):
        entry = ground_truth[(verbatim_id, dimension)]
        lines.append(
            json.dumps(
                {
                    "verbatim_id": verbatim_id,
                    "dimension": dimension.code,
                    "mu": entry.state.mu,
                    "salience": entry.state.salience,
                    "expected": [
                        entry.expected.p_neg,
                        entry.expected.p_zero,
                        entry.expected.p_pos,
                    ],
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n" if lines else ""


def realistic_config(seed: int = 0) -> SimulatorConfig:
    """Preset mimicking a production opinion corpus: rare negatives
    (about 3% of verbatim-dimension pairs), one dominant dimension
    annotated on roughly 55% of verbatims and one weak dimension on
    roughly 24%, with heterogeneous annotator thresholds.

    Tuned against 50k-verbatim draws; see tests for the checked targets.
    """
    return SimulatorConfig(
        dimensions={
            Dimension.FAMILIARITY: DimensionBehavior(
                zero_salience_weight=0.742, positive_share=0.928
            ),
            Dimension.PLEASANTNESS: DimensionBehavior(
                zero_salience_weight=0.484, positive_share=0.928
            ),
            Dimension.UTILITY: DimensionBehavior(
                zero_salience_weight=0.409, positive_share=0.928
            ),
            Dimension.LEGITIMACY: DimensionBehavior(
                zero_salience_weight=0.570, positive_share=0.928
            ),
        },
        noise_sigma=0.1,
        sign_flip_prob=0.0,
        seed=seed,
    )
