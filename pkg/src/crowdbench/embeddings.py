"""Embedding tables: id -> unit-norm vector, with file and remote loaders.

File format is line-delimited JSON: an optional first meta line
``{"meta": {"dim": <int>, "model": <str>}}`` followed by one
``{"id": ..., "vector": [...]}`` record per line. Synopsis embeddings live
in the same table under ``<response_id>#synopsis`` keys.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from .errors import EmbeddingError

RENORM_WARN_TOL = 1e-3
REMOTE_PROTOCOL_VERSION = 1
REMOTE_ATTEMPTS = 3


@dataclass
class EmbeddingTable:
    """Dimension-consistent map from id to unit-norm vector."""

    dimension: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    model: str | None = None

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __getitem__(self, key: str) -> np.ndarray:
        return self.entries[key]

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, key: str, vector, warn_context: str = "") -> None:
        """Validate, renormalize, and insert one vector."""
        if key in self.entries:
            raise EmbeddingError(f"duplicate embedding id {key!r}")
        v = np.asarray(vector, dtype=float)
        if v.ndim != 1:
            raise EmbeddingError(f"embedding {key!r} is not a flat vector")
        if v.shape[0] != self.dimension:
            raise EmbeddingError(
                f"embedding {key!r} has dimension {v.shape[0]}, expected {self.dimension}"
            )
        if not np.all(np.isfinite(v)):
            raise EmbeddingError(f"embedding {key!r} contains non-finite components")
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise EmbeddingError(f"embedding {key!r} is the zero vector")
        if abs(norm - 1.0) > RENORM_WARN_TOL:
            warnings.warn(
                f"embedding {key!r}{warn_context} has norm {norm:.6g}; renormalizing",
                stacklevel=2,
            )
        self.entries[key] = v / norm


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load an embedding file, renormalizing every vector to unit norm.

    Vectors whose original norm deviates from 1 by more than 1e-3 trigger
    a warning. Dimension is taken from the meta line when present,
    otherwise from the first record, and enforced for every entry.
    """
    path = Path(path)
    table: EmbeddingTable | None = None
    model = None
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingError(f"line {line_no}: malformed record ({exc.msg})") from exc
            if "meta" in record:
                if table is not None:
                    raise EmbeddingError(f"line {line_no}: meta line must come first")
                meta = record["meta"]
                model = meta.get("model")
                dim = meta.get("dim")
                if dim is not None:
                    table = EmbeddingTable(dimension=int(dim), model=model)
                continue
            if "id" not in record or "vector" not in record:
                raise EmbeddingError(f"line {line_no}: record needs 'id' and 'vector'")
            if table is None:
                table = EmbeddingTable(dimension=len(record["vector"]), model=model)
            try:
                table.add(record["id"], record["vector"], warn_context=f" (line {line_no})")
            except EmbeddingError as exc:
                raise EmbeddingError(f"line {line_no}: {exc}") from None
    if table is None:
        raise EmbeddingError(f"{path}: no embedding records found")
    return table


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write a table in the embedding file format, meta line first."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        meta: dict = {"dim": table.dimension}
        if table.model is not None:
            meta["model"] = table.model
        fh.write(json.dumps({"meta": meta}) + "\n")
        for key, vector in table.entries.items():
            fh.write(json.dumps({"id": key, "vector": vector.tolist()}) + "\n")


def _post_batch(endpoint: str, batch: list[tuple[str, str]], timeout: float) -> list[dict]:
    payload = {
        "version": REMOTE_PROTOCOL_VERSION,
        "texts": [{"id": rid, "text": text} for rid, text in batch],
    }
    last_exc: Exception | None = None
    for attempt in range(REMOTE_ATTEMPTS):
        if attempt:
            time.sleep(0.25 * 2 ** (attempt - 1))
        try:
            resp = requests.post(endpoint, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if resp.status_code >= 500:
            last_exc = EmbeddingError(f"server error {resp.status_code} from {endpoint}")
            continue
        if resp.status_code != 200:
            raise EmbeddingError(f"embedding endpoint returned status {resp.status_code}")
        body = resp.json()
        if body.get("version") != REMOTE_PROTOCOL_VERSION:
            raise EmbeddingError(f"unsupported response version {body.get('version')!r}")
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(batch):
            got = len(vectors) if isinstance(vectors, list) else "none"
            raise EmbeddingError(
                f"count mismatch: requested {len(batch)} embeddings, got {got}"
            )
        return vectors
    raise EmbeddingError(
        f"embedding endpoint {endpoint} failed after {REMOTE_ATTEMPTS} attempts: {last_exc}"
    )


def fetch_embeddings_remote(
    endpoint: str,
    texts: list[tuple[str, str]],
    batch_size: int = 100,
    timeout: float = 30.0,
) -> EmbeddingTable:
    """Fetch embeddings for (id, text) pairs from a conforming endpoint.

    Issues one POST per batch, retries transient failures with exponential
    backoff, and never returns a partial table: any failed batch aborts the
    whole fetch. The assembled table preserves input id order.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    table: EmbeddingTable | None = None
    for start in range(0, len(texts), batch_size):
        batch = texts[start : start + batch_size]
        vectors = _post_batch(endpoint, batch, timeout)
        for (rid, _), record in zip(batch, vectors):
            if record.get("id") != rid:
                raise EmbeddingError(
                    f"response order mismatch: expected id {rid!r}, got {record.get('id')!r}"
                )
            if table is None:
                table = EmbeddingTable(dimension=len(record["vector"]))
            table.add(rid, record["vector"])
    return table if table is not None else EmbeddingTable(dimension=0)


@dataclass(frozen=True)
class CoverageReport:
    kind: str
    required: int
    missing: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.missing


def coverage_check(corpus, table: EmbeddingTable | None, spec) -> CoverageReport:
    """List the embedding keys the kernel needs that the table lacks.

    The semantic kernel needs a text embedding per response id; the
    plot-synopsis kernel needs ``<id>#synopsis`` keys. Other kernels need
    no embeddings and always pass.
    """
    if spec.kind == "semantic":
        keys = [r.id for r in corpus.responses]
    elif spec.kind == "plot_synopsis":
        keys = [f"{r.id}#synopsis" for r in corpus.responses]
    else:
        return CoverageReport(kind=spec.kind, required=0, missing=())
    missing = tuple(k for k in keys if table is None or k not in table)
    return CoverageReport(kind=spec.kind, required=len(keys), missing=missing)
