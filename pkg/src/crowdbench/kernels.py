"""Crowding kernels: symmetric pairwise functions scoring, in [0, 1], how
much two outputs occupy the same region of idea-space.

Five kernels are supported:

* ``semantic``            -- (1 + cos(f(x), f(y))) / 2 over text embeddings
* ``plot_synopsis``       -- the same map applied to synopsis embeddings
* ``word_jaccard``        -- Jaccard over non-stopword token sets
* ``char_trigram_jaccard``-- Jaccard over character-trigram sets
* ``bucket``              -- indicator of concept-bucket co-membership

Lexical kernels operate on normalized text (lowercased, punctuation
stripped, whitespace collapsed). Embedding kernels require unit-norm
vectors supplied through an embedding table.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

KERNEL_KINDS = ("semantic", "plot_synopsis", "word_jaccard", "char_trigram_jaccard", "bucket")

DEFAULT_STOPWORD_LIST = "english-v1"
_BUNDLED_STOPWORDS = {"english-v1": "stopwords_english_v1.txt"}

UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to evaluate, plus the stopword list for the word kernel."""

    kind: str = "semantic"
    stopword_list_id: str = DEFAULT_STOPWORD_LIST

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")

    @property
    def needs_embeddings(self) -> bool:
        return self.kind in ("semantic", "plot_synopsis")


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one token per line, ``#`` starts a comment."""
    words = set()
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token and not token.startswith("#"):
                words.add(token)
    return frozenset(words)


@lru_cache(maxsize=8)
def resolve_stopwords(list_id: str = DEFAULT_STOPWORD_LIST) -> frozenset[str]:
    """Stopword set for a list id: a bundled id or a path to a custom file."""
    if list_id in _BUNDLED_STOPWORDS:
        ref = resources.files("crowdbench").joinpath("data", _BUNDLED_STOPWORDS[list_id])
        with resources.as_file(ref) as path:
            return load_stopwords(path)
    path = Path(list_id)
    if path.exists():
        return load_stopwords(path)
    raise ValueError(
        f"unknown stopword list {list_id!r}: not a bundled id "
        f"({sorted(_BUNDLED_STOPWORDS)}) and not an existing file"
    )


def normalize_text(s: str) -> str:
    """Lowercase, strip Unicode punctuation, collapse whitespace.

    Punctuation characters are removed outright (``"A-B"`` becomes ``"ab"``),
    not replaced by spaces.
    """
    lowered = s.lower()
    kept = "".join(ch for ch in lowered if not unicodedata.category(ch).startswith("P"))
    return " ".join(kept.split())


def tokens(s: str, stopwords: frozenset[str] = frozenset()) -> frozenset[str]:
    """Non-stopword token set of the normalized text."""
    return frozenset(t for t in normalize_text(s).split(" ") if t and t not in stopwords)


def char_trigrams(s: str) -> frozenset[str]:
    """Character-trigram set of the normalized text, spaces included.

    A nonempty normalized string shorter than 3 characters contributes
    itself as a single gram, so short outputs still compare.
    """
    norm = normalize_text(s)
    if not norm:
        return frozenset()
    if len(norm) < 3:
        return frozenset((norm,))
    return frozenset(norm[i : i + 3] for i in range(len(norm) - 2))


def _jaccard(a: frozenset, b: frozenset) -> float:
    # Both empty: identical (degenerate) outputs crowd maximally.
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def _check_unit(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{what} must be a 1-d vector, got shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{what} is not unit-norm (norm={norm!r})")
    return v


def semantic_kernel(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity mapped to [0, 1]: (1 + cos(u, v)) / 2.

    Both inputs must be unit-norm vectors of equal dimension. Antipodal
    vectors score exactly 0.
    """
    u = _check_unit(u, "first vector")
    v = _check_unit(v, "second vector")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    k = (1.0 + float(np.dot(u, v))) / 2.0
    # Unit-norm tolerance can push the raw value a hair outside [0, 1].
    return min(1.0, max(0.0, k))


def word_jaccard(x: str, y: str, stopwords: frozenset[str] | None = None) -> float:
    """Jaccard similarity over non-stopword token sets of normalized text."""
    if stopwords is None:
        stopwords = resolve_stopwords()
    return _jaccard(tokens(x, stopwords), tokens(y, stopwords))


def char_trigram_jaccard(x: str, y: str) -> float:
    """Jaccard similarity over character-trigram sets of normalized text."""
    return _jaccard(char_trigrams(x), char_trigrams(y))


def bucket_kernel(bx: int | None, by: int | None) -> int:
    """Concept-bucket co-membership indicator: 1 if both ids equal, else 0."""
    if bx is None or by is None:
        raise ValueError("bucket kernel requires a bucket id on both responses")
    return 1 if bx == by else 0


def resolve_feature(spec: KernelSpec, response, table=None):
    """Extract the kernel-relevant feature of a response.

    semantic / plot_synopsis -> unit vector from the table (synopsis vectors
    are keyed ``<id>#synopsis``); word_jaccard -> token set;
    char_trigram_jaccard -> trigram set; bucket -> (condition_id, bucket_id).
    """
    kind = spec.kind
    if kind == "semantic" or kind == "plot_synopsis":
        if table is None:
            raise ValueError(f"{kind} kernel requires an embedding table")
        key = response.id if kind == "semantic" else f"{response.id}#synopsis"
        try:
            return table[key]
        except KeyError:
            raise ValueError(
                f"no {'text' if kind == 'semantic' else 'synopsis'} embedding "
                f"for response {response.id!r} (key {key!r})"
            ) from None
    if kind == "word_jaccard":
        return tokens(response.text, resolve_stopwords(spec.stopword_list_id))
    if kind == "char_trigram_jaccard":
        return char_trigrams(response.text)
    if response.bucket_id is None:
        raise ValueError(f"response {response.id!r} has no bucket id")
    return (response.condition_id, response.bucket_id)


def feature_kernel(spec: KernelSpec, fa, fb) -> float:
    """Kernel value on two features produced by :func:`resolve_feature`."""
    kind = spec.kind
    if kind == "semantic" or kind == "plot_synopsis":
        return semantic_kernel(fa, fb)
    if kind == "word_jaccard" or kind == "char_trigram_jaccard":
        return _jaccard(fa, fb)
    cond_a, bucket_a = fa
    cond_b, bucket_b = fb
    if cond_a != cond_b:
        raise ValueError(
            f"bucket ids are condition-local; cannot compare across "
            f"conditions {cond_a!r} and {cond_b!r}"
        )
    return float(bucket_kernel(bucket_a, bucket_b))


def kernel_for(spec: KernelSpec, a, b, table=None) -> float:
    """Evaluate the kernel named by ``spec`` on two responses."""
    return feature_kernel(spec, resolve_feature(spec, a, table), resolve_feature(spec, b, table))
