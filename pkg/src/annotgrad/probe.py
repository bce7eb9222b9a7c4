"""Text featurization and a 3-class softmax head trained on soft labels.

Features come either from the built-in character n-gram hashing featurizer
or from externally computed embedding vectors loaded from JSONL. The probe
is a single linear-softmax layer over class order (neg, zero, pos),
minimizing soft-target cross-entropy with L2 penalty by mini-batch gradient
descent. Training is fully deterministic given data, config and seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit

from .aggregate import SoftLabel
from .corpus import Corpus, Dimension

#: Featurizer hash identity, recorded in saved models.
HASH_NAME = "blake2b64"
FEATURIZER_VERSION = "1"

CLASS_ORDER = ("neg", "zero", "pos")


class ProbeError(Exception):
    pass


@dataclass(frozen=True)
class FeaturizerConfig:
    ngram_min: int = 3
    ngram_max: int = 5
    buckets: int = 2**15
    signed: bool = True
    lowercase: bool = True

    def __post_init__(self):
        if not (1 <= self.ngram_min <= self.ngram_max):
            raise ValueError("need 1 <= ngram_min <= ngram_max")
        if self.buckets < 2 or self.buckets & (self.buckets - 1):
            raise ValueError("buckets must be a power of two >= 2")


@dataclass
class FeatureVector:
    """Sparse L2-normalized feature weights over ``d`` hash buckets."""

    d: int
    weights: dict[int, float]

    def __post_init__(self):
        for index, weight in self.weights.items():
            if not 0 <= index < self.d:
                raise ValueError(f"feature index {index} outside [0, {self.d})")
            if not math.isfinite(weight):
                raise ValueError(f"non-finite weight at index {index}")


def _hash64(gram: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest(), "big"
    )


def hash_featurize(text: str, config: FeaturizerConfig | None = None) -> FeatureVector:
    """Hash character n-grams of ``text`` into a signed, L2-normalized
    sparse vector. Deterministic across runs and platforms; empty text
    gives the zero vector.
    """
    config = config or FeaturizerConfig()
    s = text.lower() if config.lowercase else text

    gram_counts: dict[str, int] = {}
    for n in range(config.ngram_min, config.ngram_max + 1):
        for i in range(len(s) - n + 1):
            gram = s[i : i + n]
            gram_counts[gram] = gram_counts.get(gram, 0) + 1

    weights: dict[int, float] = {}
    mask = config.buckets - 1
    for gram, count in gram_counts.items():
        h = _hash64(gram)
        bucket = h & mask
        sign = -1.0 if config.signed and (h >> 63) & 1 else 1.0
        weights[bucket] = weights.get(bucket, 0.0) + sign * count
    weights = {k: v for k, v in weights.items() if v != 0.0}

    norm = math.sqrt(sum(v * v for v in weights.values()))
    if norm > 0:
        weights = {k: v / norm for k, v in weights.items()}
    return FeatureVector(d=config.buckets, weights=weights)


def featurize_corpus(
    corpus: Corpus, config: FeaturizerConfig | None = None
) -> dict[str, FeatureVector]:
    config = config or FeaturizerConfig()
    return {v.id: hash_featurize(v.text, config) for v in corpus.verbatims}


@dataclass
class EmbeddingTable:
    """Externally computed dense vectors keyed by verbatim id."""

    d: int
    vectors: dict[str, np.ndarray]


def load_embeddings(source) -> EmbeddingTable:
    """Parse JSONL lines {"id": str, "vec": [floats]} into an EmbeddingTable.

    Rejects dimension mismatches (naming the offending id), duplicate ids
    and non-finite entries.
    """
    if isinstance(source, (bytes, bytearray)):
        lines = bytes(source).decode("utf-8").splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source

    d: int | None = None
    vectors: dict[str, np.ndarray] = {}
    for line_number, raw in enumerate(lines, start=1):
        if isinstance(raw, (bytes, bytearray)):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProbeError(f"line {line_number}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict) or "id" not in obj or "vec" not in obj:
            raise ProbeError(f'line {line_number}: expected {{"id", "vec"}} object')
        vid = obj["id"]
        if not isinstance(vid, str):
            raise ProbeError(f"line {line_number}: id must be a string")
        if vid in vectors:
            raise ProbeError(f"duplicate embedding id {vid!r}")
        vec = np.asarray(obj["vec"], dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ProbeError(f"embedding for id {vid!r} must be a non-empty flat list")
        if d is None:
            d = int(vec.size)
        elif vec.size != d:
            raise ProbeError(
                f"embedding for id {vid!r} has {vec.size} entries, expected {d}"
            )
        if not np.isfinite(vec).all():
            raise ProbeError(f"non-finite entry in embedding for id {vid!r}")
        vectors[vid] = vec
    if d is None:
        raise ProbeError("no embeddings in stream")
    return EmbeddingTable(d=d, vectors=vectors)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    l2_lambda: float = 1e-4
    batch_size: int = 64
    seed: int = 0
    # stop when the full-data loss moved by less than this relative amount
    # over the trailing 10 epochs
    early_stop_tol: float = 1e-6

    def __post_init__(self):
        if self.learning_rate <= 0 or self.l2_lambda < 0:
            raise ValueError("learning_rate must be positive, l2_lambda non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.early_stop_tol <= 0:
            raise ValueError("early_stop_tol must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class ProbeModel:
    W: np.ndarray  # (d, 3), class columns in CLASS_ORDER
    b: np.ndarray  # (3,)
    d: int
    dimension: Dimension | None = None
    config: TrainConfig = field(default_factory=TrainConfig)
    epochs_run: int = 0
    final_loss: float = float("nan")
    class_order: tuple[str, str, str] = CLASS_ORDER
    feature_hash: str | None = None


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_gradients(
    W: np.ndarray, b: np.ndarray, X, P: np.ndarray, l2_lambda: float
):
    """Soft-target cross-entropy with L2 penalty, and its gradients.

    L = -(1/N) sum_i sum_c P[i,c] log q[i,c] + l2_lambda * ||W||^2 with
    q = softmax(X W + b). Returns (loss, dW, db).
    """
    n = P.shape[0]
    logits = np.asarray(X @ W) + b
    logq = _log_softmax(logits)
    loss = -(P * logq).sum() / n + l2_lambda * float((W * W).sum())
    G = (np.exp(logq) - P) / n
    dW = np.asarray(X.T @ G) + 2.0 * l2_lambda * W
    db = G.sum(axis=0)
    return loss, dW, db


def _as_matrix(vectors: Sequence, d_expected: int | None = None):
    """Stack per-id vectors into one matrix: CSR for FeatureVectors,
    dense float64 otherwise."""
    if all(isinstance(v, FeatureVector) for v in vectors):
        ds = {v.d for v in vectors}
        if len(ds) > 1:
            raise ProbeError(f"inconsistent feature dimensionalities {sorted(ds)}")
        d = ds.pop()
        if d_expected is not None and d != d_expected:
            raise ProbeError(f"feature dimensionality {d} does not match model ({d_expected})")
        indptr = [0]
        indices: list[int] = []
        values: list[float] = []
        for v in vectors:
            for index in sorted(v.weights):
                indices.append(index)
                values.append(v.weights[index])
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(values, dtype=np.float64), np.array(indices), np.array(indptr)),
            shape=(len(vectors), d),
        )
    rows = [np.asarray(v, dtype=np.float64) for v in vectors]
    ds = {row.shape for row in rows}
    if len(ds) > 1 or rows[0].ndim != 1:
        raise ProbeError("inconsistent embedding dimensionalities")
    X = np.vstack(rows)
    if d_expected is not None and X.shape[1] != d_expected:
        raise ProbeError(
            f"feature dimensionality {X.shape[1]} does not match model ({d_expected})"
        )
    return X


def _target_matrix(labels: Sequence[SoftLabel]) -> np.ndarray:
    return np.array([label.as_distribution() for label in labels], dtype=np.float64)


@njit(cache=True)
def _full_loss(indptr, cols, vals, P, V, b, scale, lam):
    n = P.shape[0]
    d = V.shape[0]
    ce = 0.0
    for r in range(n):
        z0 = b[0]
        z1 = b[1]
        z2 = b[2]
        for t in range(indptr[r], indptr[r + 1]):
            c = cols[t]
            x = vals[t] * scale
            z0 += x * V[c, 0]
            z1 += x * V[c, 1]
            z2 += x * V[c, 2]
        m = max(z0, max(z1, z2))
        lse = m + np.log(np.exp(z0 - m) + np.exp(z1 - m) + np.exp(z2 - m))
        ce -= P[r, 0] * (z0 - lse) + P[r, 1] * (z1 - lse) + P[r, 2] * (z2 - lse)
    w2 = 0.0
    for i in range(d):
        w2 += V[i, 0] ** 2 + V[i, 1] ** 2 + V[i, 2] ** 2
    return ce / n + lam * scale * scale * w2


@njit(cache=True)
def _sgd_epochs(indptr, cols, vals, P, perms, d, lr, lam, bs, tol, epochs):
    """Mini-batch gradient descent on the soft-target cross-entropy.

    The L2 term is applied as a multiplicative decay folded into a lazy
    scale factor (W = scale * V), so each batch only touches the rows it
    references; the math is the plain update W -= lr * (X_B'G/|B| + 2*lam*W)
    up to float association.
    """
    n = P.shape[0]
    V = np.zeros((d, 3))
    b = np.zeros(3)
    scale = 1.0
    decay = 1.0 - 2.0 * lam * lr
    history = np.empty(epochs + 1)
    history[0] = _full_loss(indptr, cols, vals, P, V, b, scale, lam)
    epochs_run = 0
    G = np.empty((bs, 3))
    for e in range(epochs):
        perm = perms[e]
        for start in range(0, n, bs):
            stop = min(start + bs, n)
            nb = stop - start
            for i in range(nb):
                r = perm[start + i]
                z0 = b[0]
                z1 = b[1]
                z2 = b[2]
                for t in range(indptr[r], indptr[r + 1]):
                    c = cols[t]
                    x = vals[t] * scale
                    z0 += x * V[c, 0]
                    z1 += x * V[c, 1]
                    z2 += x * V[c, 2]
                m = max(z0, max(z1, z2))
                e0 = np.exp(z0 - m)
                e1 = np.exp(z1 - m)
                e2 = np.exp(z2 - m)
                s = e0 + e1 + e2
                G[i, 0] = (e0 / s - P[r, 0]) / nb
                G[i, 1] = (e1 / s - P[r, 1]) / nb
                G[i, 2] = (e2 / s - P[r, 2]) / nb
            scale *= decay
            coef = lr / scale
            for i in range(nb):
                r = perm[start + i]
                g0 = G[i, 0]
                g1 = G[i, 1]
                g2 = G[i, 2]
                for t in range(indptr[r], indptr[r + 1]):
                    c = cols[t]
                    x = vals[t]
                    V[c, 0] -= coef * x * g0
                    V[c, 1] -= coef * x * g1
                    V[c, 2] -= coef * x * g2
                b[0] -= lr * g0
                b[1] -= lr * g1
                b[2] -= lr * g2
            if scale < 1e-100:  # refold before the lazy scale underflows
                for i in range(d):
                    V[i, 0] *= scale
                    V[i, 1] *= scale
                    V[i, 2] *= scale
                scale = 1.0
        epochs_run = e + 1
        history[epochs_run] = _full_loss(indptr, cols, vals, P, V, b, scale, lam)
        if not np.isfinite(history[epochs_run]):
            break
        if epochs_run >= 10:
            anchor = history[epochs_run - 10]
            if abs(anchor - history[epochs_run]) <= tol * max(abs(anchor), 1e-30):
                break
    return V * scale, b, epochs_run, history[: epochs_run + 1]


def train_probe(
    features: Mapping[str, FeatureVector | np.ndarray | Sequence[float]],
    labels: Mapping[str, SoftLabel],
    config: TrainConfig | None = None,
    dimension: Dimension | None = None,
    feature_hash: str | None = None,
) -> ProbeModel:
    """Fit the softmax head on the intersection of feature and label keys.

    W and b start at zero (the objective is convex, so no random init is
    needed); the seed only drives epoch shuffling. Same inputs and seed
    reproduce the model bit for bit.
    """
    config = config or TrainConfig()
    ids = sorted(set(features) & set(labels))
    if not ids:
        raise ProbeError("feature and label key sets do not intersect")
    X = _as_matrix([features[i] for i in ids])
    P = _target_matrix([labels[i] for i in ids])
    n, d = X.shape[0], X.shape[1]
    if not sp.issparse(X):
        X = sp.csr_matrix(X)
    X.sort_indices()

    rng = np.random.default_rng(config.seed)
    perms = np.empty((config.epochs, n), dtype=np.int64)
    for e in range(config.epochs):
        perms[e] = rng.permutation(n)

    W, b, epochs_run, history = _sgd_epochs(
        X.indptr.astype(np.int64),
        X.indices.astype(np.int64),
        X.data.astype(np.float64),
        P,
        perms,
        d,
        config.learning_rate,
        config.l2_lambda,
        config.batch_size,
        config.early_stop_tol,
        config.epochs,
    )
    final_loss = float(history[-1])
    if not math.isfinite(final_loss):
        raise ProbeError(
            f"non-finite loss after epoch {epochs_run}; lower the learning rate"
        )
    return ProbeModel(
        W=W,
        b=b,
        d=d,
        dimension=dimension,
        config=config,
        epochs_run=int(epochs_run),
        final_loss=final_loss,
        feature_hash=feature_hash,
    )


def _as_row(model: ProbeModel, x):
    if isinstance(x, FeatureVector):
        return _as_matrix([x], d_expected=model.d)
    row = np.asarray(x, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != model.d:
        raise ProbeError(
            f"input dimensionality {row.shape} does not match model ({model.d})"
        )
    return row.reshape(1, -1)


def predict_dist_matrix(model: ProbeModel, X) -> np.ndarray:
    """Softmax class distributions for a stacked feature matrix."""
    logits = np.asarray(X @ model.W) + model.b
    return np.exp(_log_softmax(logits))


def predict_dist(model: ProbeModel, x) -> tuple[float, float, float]:
    """(q_neg, q_zero, q_pos); each in (0, 1), summing to 1."""
    q = predict_dist_matrix(model, _as_row(model, x))[0]
    return (float(q[0]), float(q[1]), float(q[2]))


def predict_value(model: ProbeModel, x) -> float:
    """Continuous predicted gradient q_pos - q_neg, in (-1, 1)."""
    q_neg, _, q_pos = predict_dist(model, x)
    return q_pos - q_neg


def model_to_json(model: ProbeModel) -> str:
    payload = {
        "dimension": model.dimension.code if model.dimension else None,
        "d": model.d,
        "class_order": list(model.class_order),
        "W": [float(w) for w in model.W.reshape(-1)],  # row-major
        "b": [float(v) for v in model.b],
        "config": {
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "l2_lambda": model.config.l2_lambda,
            "batch_size": model.config.batch_size,
            "seed": model.config.seed,
            "early_stop_tol": model.config.early_stop_tol,
        },
        "seed": model.config.seed,
        "epochs_run": model.epochs_run,
        "final_loss": model.final_loss,
        "feature_hash": model.feature_hash,
        "hash_name": HASH_NAME,
        "featurizer_version": FEATURIZER_VERSION,
    }
    return json.dumps(payload, ensure_ascii=False)


def model_from_json(text: str) -> ProbeModel:
    payload = json.loads(text)
    d = int(payload["d"])
    W = np.array(payload["W"], dtype=np.float64).reshape(d, 3)
    b = np.array(payload["b"], dtype=np.float64)
    config = TrainConfig(**payload["config"])
    dimension = Dimension(payload["dimension"]) if payload["dimension"] else None
    model = ProbeModel(
        W=W,
        b=b,
        d=d,
        dimension=dimension,
        config=config,
        epochs_run=int(payload["epochs_run"]),
        final_loss=float(payload["final_loss"]),
        class_order=tuple(payload["class_order"]),
        feature_hash=payload.get("feature_hash"),
    )
    return model
