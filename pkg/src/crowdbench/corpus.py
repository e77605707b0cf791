"""Data model for creative-output corpora.

A corpus is a flat list of responses, each tagged with a source label
(``human`` or a model-condition label), a task family, and a condition id.
Responses are grouped into sampling units for estimation: one unit per
participant when participant ids are present, otherwise one unit per
response. Duplicate texts are deliberately retained; repeated outputs are
part of the crowding signal, not noise.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorpusError

REQUIRED_KEYS = ("id", "source", "task_family", "condition", "text")
OPTIONAL_KEYS = ("participant", "synopsis", "bucket", "protocol")


@dataclass(frozen=True)
class Response:
    """One creative output."""

    id: str
    source: str
    task_family: str
    condition_id: str
    text: str
    participant_id: str | None = None
    synopsis: str | None = None
    bucket_id: int | None = None
    protocol: str | None = None


@dataclass(frozen=True)
class SamplingUnit:
    """The resampling atom: a participant's responses, or a single response.

    All member responses share source and condition.
    """

    unit_id: str
    responses: tuple[Response, ...]

    def __post_init__(self):
        if not self.responses:
            raise CorpusError(f"sampling unit {self.unit_id!r} has no responses")
        sources = {r.source for r in self.responses}
        conditions = {r.condition_id for r in self.responses}
        if len(sources) > 1 or len(conditions) > 1:
            raise CorpusError(
                f"sampling unit {self.unit_id!r} mixes sources {sources} "
                f"or conditions {conditions}"
            )


@dataclass(frozen=True)
class Corpus:
    """Immutable, validated collection of responses.

    ``conditions`` maps condition_id to free-form metadata; estimation keys
    only on the condition id itself.
    """

    responses: tuple[Response, ...]
    conditions: dict = field(default_factory=dict)

    def group(self, source: str, condition_id: str) -> list[Response]:
        """All responses of one (source, condition) group, in corpus order."""
        return [
            r
            for r in self.responses
            if r.source == source and r.condition_id == condition_id
        ]

    def sources(self) -> list[str]:
        seen = dict.fromkeys(r.source for r in self.responses)
        return list(seen)

    def condition_ids(self, source: str | None = None) -> list[str]:
        seen = dict.fromkeys(
            r.condition_id
            for r in self.responses
            if source is None or r.source == source
        )
        return list(seen)


@dataclass(frozen=True)
class GroupReport:
    """Validation facts for one (source, condition) group."""

    source: str
    condition_id: str
    task_family: str
    unit_count: int
    response_count: int
    unique_text_count: int
    estimable: bool
    issues: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    groups: tuple[GroupReport, ...]

    @property
    def estimable(self) -> bool:
        return all(g.estimable for g in self.groups)

    def blocking_issues(self) -> list[str]:
        out = []
        for g in self.groups:
            if not g.estimable:
                reasons = "; ".join(g.issues) or "not estimable"
                out.append(f"({g.source}, {g.condition_id}): {reasons}")
        return out


def _build_response(record: dict, line_no: int) -> Response:
    for key in REQUIRED_KEYS:
        if key not in record:
            raise CorpusError(f"line {line_no}: missing required field {key!r}")
    unknown = set(record) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        warnings.warn(
            f"line {line_no}: ignoring unknown keys {sorted(unknown)}",
            stacklevel=3,
        )
    rid = record["id"]
    if not isinstance(rid, str) or not rid:
        raise CorpusError(f"line {line_no}: 'id' must be a nonempty string")
    condition = record["condition"]
    if not isinstance(condition, str) or not condition:
        raise CorpusError(f"line {line_no}: 'condition' must be a nonempty string")
    for key in ("source", "task_family"):
        if not isinstance(record[key], str) or not record[key]:
            raise CorpusError(f"line {line_no}: {key!r} must be a nonempty string")
    if not isinstance(record["text"], str):
        raise CorpusError(f"line {line_no}: 'text' must be a string")
    bucket = record.get("bucket")
    if bucket is not None and (isinstance(bucket, bool) or not isinstance(bucket, int)):
        raise CorpusError(f"line {line_no}: 'bucket' must be an integer")
    participant = record.get("participant")
    if participant is not None and (not isinstance(participant, str) or not participant):
        raise CorpusError(f"line {line_no}: 'participant' must be a nonempty string")
    return Response(
        id=rid,
        source=record["source"],
        task_family=record["task_family"],
        condition_id=condition,
        text=record["text"],
        participant_id=participant,
        synopsis=record.get("synopsis"),
        bucket_id=bucket,
        protocol=record.get("protocol"),
    )


def build_corpus(responses: list[Response]) -> Corpus:
    """Assemble a Corpus from responses, checking id uniqueness and
    condition/task-family consistency."""
    seen_ids: set[str] = set()
    conditions: dict[str, dict] = {}
    for r in responses:
        if r.id in seen_ids:
            raise CorpusError(f"duplicate response id {r.id!r}")
        seen_ids.add(r.id)
        meta = conditions.setdefault(r.condition_id, {"task_family": r.task_family})
        if meta["task_family"] != r.task_family:
            raise CorpusError(
                f"condition {r.condition_id!r} appears under task families "
                f"{meta['task_family']!r} and {r.task_family!r}"
            )
    return Corpus(responses=tuple(responses), conditions=conditions)


def load_corpus(path: str | Path) -> Corpus:
    """Load a line-delimited corpus file.

    Every record is kept, in file order; duplicate texts are retained.
    Raises CorpusError for malformed lines (with line number), duplicate
    ids, or missing required fields.
    """
    path = Path(path)
    responses: list[Response] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: malformed record ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"line {line_no}: record is not an object")
            responses.append(_build_response(record, line_no))
    return build_corpus(responses)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to the line-delimited format (one record per line)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in corpus.responses:
            record: dict = {
                "id": r.id,
                "source": r.source,
                "task_family": r.task_family,
                "condition": r.condition_id,
                "text": r.text,
            }
            if r.participant_id is not None:
                record["participant"] = r.participant_id
            if r.synopsis is not None:
                record["synopsis"] = r.synopsis
            if r.bucket_id is not None:
                record["bucket"] = r.bucket_id
            if r.protocol is not None:
                record["protocol"] = r.protocol
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def partition_units(corpus: Corpus, source: str, condition_id: str) -> list[SamplingUnit]:
    """Partition one (source, condition) group into sampling units.

    Participant ids present on every response: one unit per participant.
    Absent on every response: one singleton unit per response. A mix of
    the two is undefined and rejected. Units are sorted by unit_id and
    responses within a unit by response id, so the partition does not
    depend on file order.
    """
    group = corpus.group(source, condition_id)
    if not group:
        raise CorpusError(f"no responses for source {source!r}, condition {condition_id!r}")
    with_pid = [r for r in group if r.participant_id is not None]
    if with_pid and len(with_pid) != len(group):
        missing = sorted(r.id for r in group if r.participant_id is None)
        raise CorpusError(
            f"group ({source!r}, {condition_id!r}) mixes responses with and "
            f"without participant ids (missing on {missing[:5]}...)"
            if len(missing) > 5
            else f"group ({source!r}, {condition_id!r}) mixes responses with and "
            f"without participant ids (missing on {missing})"
        )
    if with_pid:
        by_pid: dict[str, list[Response]] = {}
        for r in group:
            by_pid.setdefault(r.participant_id, []).append(r)
        units = [
            SamplingUnit(pid, tuple(sorted(members, key=lambda r: r.id)))
            for pid, members in by_pid.items()
        ]
    else:
        units = [SamplingUnit(r.id, (r,)) for r in group]
    return sorted(units, key=lambda u: u.unit_id)


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Report per-group statistics and estimation preconditions.

    Never mutates or rejects the corpus; an empty corpus yields an empty
    report.
    """
    keys = dict.fromkeys((r.source, r.condition_id) for r in corpus.responses)
    groups = []
    for source, condition_id in keys:
        members = corpus.group(source, condition_id)
        issues = []
        try:
            units = partition_units(corpus, source, condition_id)
            unit_count = len(units)
        except CorpusError as exc:
            issues.append(str(exc))
            unit_count = 0
        if 0 < unit_count < 2:
            issues.append("fewer than 2 sampling units; off-diagonal pairs undefined")
        groups.append(
            GroupReport(
                source=source,
                condition_id=condition_id,
                task_family=members[0].task_family,
                unit_count=unit_count,
                response_count=len(members),
                unique_text_count=len({r.text for r in members}),
                estimable=unit_count >= 2 and not issues,
                issues=tuple(issues),
            )
        )
    return ValidationReport(groups=tuple(groups))
