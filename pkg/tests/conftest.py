"""Shared synthetic fixtures.

Estimation tests run on corpora generated from distributions with
analytically known expected kernel values, so every asserted number has
an independent derivation. Embeddings are synthetic unit vectors; no
encoder is required anywhere in this suite.
"""

from __future__ import annotations

import numpy as np
import pytest

from crowdbench import EmbeddingTable, Response, SamplingUnit, build_corpus


def orthonormal_pair(dim: int = 4) -> tuple[np.ndarray, np.ndarray]:
    e1 = np.zeros(dim)
    e2 = np.zeros(dim)
    e1[0] = 1.0
    e2[1] = 1.0
    return e1, e2


def make_response(i, source="human", condition="c1", family="fam", **kw) -> Response:
    return Response(
        id=f"{source}-{i}",
        source=source,
        task_family=family,
        condition_id=condition,
        text=kw.pop("text", f"text {i}"),
        **kw,
    )


def singleton_units(responses) -> list[SamplingUnit]:
    return [SamplingUnit(r.id, (r,)) for r in responses]


def two_point_mixture(
    seed: int,
    n: int,
    q: float,
    source: str,
    condition: str = "c1",
    family: str = "fam",
    dim: int = 4,
):
    """Responses whose embeddings are e1 with probability q, else e2.

    For orthogonal unit vectors the semantic kernel is 1 on same-point
    pairs and 0.5 on cross pairs, so E[K] = 1 - q(1-q) for independent
    draws. Bucket ids follow the same Bernoulli, giving E[K] =
    q^2 + (1-q)^2 under the bucket kernel. Texts repeat one of two
    strings, so the lexical kernels see the same two-point structure.
    """
    rng = np.random.default_rng(seed)
    e1, e2 = orthonormal_pair(dim)
    texts = ("alpha beta gamma", "delta epsilon zeta")
    responses = []
    vectors = {}
    for i in range(n):
        point = int(rng.random() < q)
        r = Response(
            id=f"{source}-{i}",
            source=source,
            task_family=family,
            condition_id=condition,
            text=texts[0] if point else texts[1],
            synopsis=f"synopsis of {source}-{i}",
            bucket_id=point,
        )
        responses.append(r)
        vec = e1 if point else e2
        vectors[r.id] = vec
        vectors[f"{r.id}#synopsis"] = vec
    return responses, vectors


def mixture_table(vector_maps: list[dict], dim: int = 4) -> EmbeddingTable:
    table = EmbeddingTable(dimension=dim)
    for vectors in vector_maps:
        for key, vec in vectors.items():
            table.add(key, vec)
    return table


UNIFORM_WORDS = ("aaaaaa", "bbbbbb", "cccccc", "dddddd", "eeeeee", "ffffff", "gggggg", "hhhhhh")


def uniform_mixture(
    seed: int,
    n: int,
    k: int,
    source: str,
    condition: str = "c1",
    family: str = "fam",
    dim: int = 8,
    id_prefix: str | None = None,
    participants: int | None = None,
):
    """Responses drawn uniformly over k orthonormal idea points.

    Every kernel sees the same structure: same-point pairs score 1
    (semantic) or 1 (bucket/lexical), cross pairs 0.5 (semantic) or 0.
    Analytic expectations: E[K_sem] = 0.5 + 0.5/k, E[K_bucket] = 1/k.
    The per-point conditional mean is constant, so resampled means have
    tiny variance; handy for parity and ordering fixtures.
    """
    assert k <= len(UNIFORM_WORDS) and k <= dim
    rng = np.random.default_rng(seed)
    prefix = id_prefix or source
    responses = []
    vectors = {}
    for i in range(n):
        point = int(rng.integers(0, k))
        rid = f"{prefix}-{i}"
        responses.append(
            Response(
                id=rid,
                source=source,
                task_family=family,
                condition_id=condition,
                text=UNIFORM_WORDS[point],
                synopsis=f"plot {UNIFORM_WORDS[point]}",
                bucket_id=point,
                participant_id=None if participants is None else f"{prefix}-p{i % participants}",
            )
        )
        vec = np.zeros(dim)
        vec[point] = 1.0
        vectors[rid] = vec
        vectors[f"{rid}#synopsis"] = vec
    return responses, vectors


@pytest.fixture
def slogan_shaped_corpus():
    """The human-baseline shape of the bundled slogan study: 659 responses,
    95 participants, 650 unique texts (9 duplicate instances)."""
    responses = []
    k = 0
    for i in range(659):
        participant = f"p{k % 95:02d}"
        k += 1
        text = f"slogan number {i}" if i < 650 else f"slogan number {i - 650}"
        responses.append(
            Response(
                id=f"s{i:03d}",
                source="human",
                task_family="slogans",
                condition_id="smartphone",
                text=text,
                participant_id=participant,
            )
        )
    return build_corpus(responses)
