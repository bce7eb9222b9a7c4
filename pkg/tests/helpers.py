"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np

from annotgrad.corpus import (
    CANONICAL_DIMENSIONS,
    AnnotationRecord,
    Corpus,
    Dimension,
    Post,
    Verbatim,
)


def build_corpus(
    votes: dict[str, dict[str, dict[Dimension, int]]],
    texts: dict[str, str] | None = None,
    project_of: dict[str, str] | None = None,
) -> Corpus:
    """Corpus from votes[verbatim_id][annotator_id][dimension] = value."""
    texts = texts or {}
    project_of = project_of or {}
    verbatim_ids = sorted(votes)
    projects = sorted(set(project_of.values()) | {"p0"})
    posts = {}
    verbatims = []
    records = []
    for vid in verbatim_ids:
        project_id = project_of.get(vid, "p0")
        post_id = f"post_{vid}"
        posts[post_id] = Post(id=post_id, project_id=project_id, participant_id="member0")
        verbatims.append(
            Verbatim(
                id=vid,
                project_id=project_id,
                post_id=post_id,
                text=texts.get(vid, f"text of {vid}"),
                position=0,
            )
        )
        for annotator_id in sorted(votes[vid]):
            for dimension, value in votes[vid][annotator_id].items():
                records.append(AnnotationRecord(vid, annotator_id, dimension, value))
    return Corpus(
        projects={pid: f"project {pid}" for pid in projects},
        posts=posts,
        verbatims=verbatims,
        records=records,
    )


def single_dimension_corpus(
    votes: dict[str, dict[str, int]], dimension: Dimension = Dimension.UTILITY
) -> Corpus:
    """Corpus where every annotation belongs to one dimension."""
    return build_corpus(
        {vid: {aid: {dimension: v} for aid, v in row.items()} for vid, row in votes.items()}
    )


def random_corpus(rng: np.random.Generator, n_verbatims=8, n_annotators=4, missing=0.2) -> Corpus:
    """Small random corpus over all four dimensions with missing records."""
    votes: dict[str, dict[str, dict[Dimension, int]]] = {}
    for i in range(n_verbatims):
        vid = f"v{i}"
        votes[vid] = {}
        for j in range(n_annotators):
            row = {}
            for dimension in CANONICAL_DIMENSIONS:
                if rng.random() >= missing:
                    row[dimension] = int(rng.integers(-1, 2))
            if row:
                votes[vid][f"a{j}"] = row
    return build_corpus(votes)
