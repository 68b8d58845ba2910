"""Append-only, hash-chained event log per case with deterministic replay.

The log is the source of truth: the first record of every case captures
the opening parameters (report reference and thresholds) and each further
record is one lifecycle transition. Records chain through sha-256 — each
hash covers the canonical serialization of the record plus the previous
hash — so altering any byte anywhere is detected on replay, along with the
first offending sequence number. Replay is a pure fold of ``kernel.step``
over the recorded outcomes and must reproduce the live case exactly.

Log file format: UTF-8 JSON lines, fixed key order
``{seq, case_id, stage_before, outcome, effects, actor, counters_after,
timestamp, record_hash}``, lowercase hex hashes, LF terminators.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import kernel
from .broker import utc_now
from .kernel import BugCase, Effect, Stage, StageOutcome, Thresholds

GENESIS_HASH = "0" * 64
CASE_OPENED = "CaseOpened"

_FIELD_ORDER = (
    "seq",
    "case_id",
    "stage_before",
    "outcome",
    "effects",
    "actor",
    "counters_after",
    "timestamp",
    "record_hash",
)


class PersistenceError(Exception):
    pass


class StaleWrite(PersistenceError):
    """stage_before did not match the current head; a lost race."""


class DuplicateCase(PersistenceError):
    pass


class UnknownCaseLog(PersistenceError):
    pass


class CorruptChain(PersistenceError):
    """Integrity violation, reporting the first bad sequence number."""

    def __init__(self, seq: int, reason: str) -> None:
        super().__init__(f"corrupt chain at seq {seq}: {reason}")
        self.seq = seq
        self.reason = reason


@dataclass(frozen=True, slots=True)
class EventRecord:
    seq: int
    case_id: str
    stage_before: Optional[str]
    outcome: dict
    effects: list
    actor: dict
    counters_after: dict
    timestamp: str
    record_hash: str

    def body_dict(self) -> dict:
        return {
            "seq": self.seq,
            "case_id": self.case_id,
            "stage_before": self.stage_before,
            "outcome": self.outcome,
            "effects": self.effects,
            "actor": self.actor,
            "counters_after": self.counters_after,
            "timestamp": self.timestamp,
        }

    def as_dict(self) -> dict:
        data = self.body_dict()
        data["record_hash"] = self.record_hash
        return data

    def to_line(self) -> str:
        return canonical_json(self.as_dict())


def canonical_json(data: dict) -> str:
    """Compact JSON with the contract's fixed key order."""
    ordered = {key: data[key] for key in _FIELD_ORDER if key in data}
    return json.dumps(ordered, ensure_ascii=False, separators=(",", ":"))


def chain_hash(body: dict, previous_hash: str) -> str:
    payload = previous_hash + canonical_json(body)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def parse_log(data: bytes) -> list[EventRecord]:
    """Parse serialized records; structural damage names the bad line."""
    records: list[EventRecord] = []
    for index, raw in enumerate(data.decode("utf-8", "replace").splitlines(), start=1):
        if not raw.strip():
            raise CorruptChain(index, "blank line")
        try:
            obj = json.loads(raw)
            record = EventRecord(
                seq=int(obj["seq"]),
                case_id=str(obj["case_id"]),
                stage_before=obj["stage_before"],
                outcome=dict(obj["outcome"]),
                effects=list(obj["effects"]),
                actor=dict(obj["actor"]),
                counters_after=dict(obj["counters_after"]),
                timestamp=str(obj["timestamp"]),
                record_hash=str(obj["record_hash"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptChain(index, f"unparseable record: {exc}") from exc
        records.append(record)
    return records


def verify_chain(records: Sequence[EventRecord]) -> None:
    previous = GENESIS_HASH
    for position, record in enumerate(records, start=1):
        if record.seq != position:
            raise CorruptChain(position, f"expected seq {position}, found {record.seq}")
        expected = chain_hash(record.body_dict(), previous)
        if record.record_hash != expected:
            raise CorruptChain(position, "record hash mismatch")
        previous = record.record_hash


def serialize_log(records: Sequence[EventRecord]) -> bytes:
    return "".join(record.to_line() + "\n" for record in records).encode("utf-8")


def fold_records(records: Sequence[EventRecord], verify: bool = True) -> BugCase:
    """Replay a verified record sequence into the resulting case state."""
    if verify:
        verify_chain(records)
    if not records:
        raise UnknownCaseLog("empty log")
    opener = records[0]
    if opener.outcome.get("kind") != CASE_OPENED:
        raise CorruptChain(1, "first record must open the case")
    payload = opener.outcome.get("payload", {})
    try:
        case = kernel.init_case(
            payload["report_ref"],
            Thresholds.from_dict(payload["thresholds"]),
            case_id=opener.case_id,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptChain(1, f"bad opening payload: {exc}") from exc
    for record in records[1:]:
        if record.stage_before != case.stage.value:
            raise CorruptChain(
                record.seq,
                f"stage_before {record.stage_before!r} != replayed {case.stage.value!r}",
            )
        outcome = StageOutcome(record.outcome["kind"], dict(record.outcome.get("payload", {})))
        try:
            case, _ = kernel.step(case, outcome)
        except kernel.KernelError as exc:
            raise CorruptChain(record.seq, f"illegal transition: {exc}") from exc
    return case


@dataclass(frozen=True, slots=True)
class Snapshot:
    case_id: str
    as_of_seq: int
    case: BugCase


class EventStore:
    """Single-writer-per-case event log, optionally backed by JSONL files."""

    def __init__(
        self,
        directory: Optional[str | Path] = None,
        clock: Optional[Callable[[], str]] = None,
    ) -> None:
        self._records: dict[str, list[EventRecord]] = {}
        self._heads: dict[str, BugCase] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._global = threading.Lock()
        self._clock = clock or utc_now
        self._directory = Path(directory) if directory is not None else None
        if self._directory is not None:
            self._directory.mkdir(parents=True, exist_ok=True)
            for path in sorted(self._directory.glob("*.jsonl")):
                records = parse_log(path.read_bytes())
                case = fold_records(records)
                case_id = records[0].case_id
                self._records[case_id] = records
                self._heads[case_id] = case
                self._locks[case_id] = threading.RLock()

    # -- helpers ------------------------------------------------------------

    def _lock_for(self, case_id: str) -> threading.RLock:
        lock = self._locks.get(case_id)
        if lock is None:
            raise UnknownCaseLog(case_id)
        return lock

    def _persist(self, case_id: str, record: EventRecord) -> None:
        if self._directory is None:
            return
        path = self._directory / f"{case_id}.jsonl"
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(record.to_line() + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def cases(self) -> list[str]:
        return sorted(self._records)

    def exists(self, case_id: str) -> bool:
        return case_id in self._records

    def events(self, case_id: str) -> list[EventRecord]:
        if case_id not in self._records:
            raise UnknownCaseLog(case_id)
        return list(self._records[case_id])

    def head(self, case_id: str) -> BugCase:
        if case_id not in self._heads:
            raise UnknownCaseLog(case_id)
        return self._heads[case_id]

    # -- writes -------------------------------------------------------------

    def open_case(
        self,
        case: BugCase,
        actor: dict,
        report_ref: Optional[str] = None,
    ) -> EventRecord:
        with self._global:
            if case.case_id in self._records:
                raise DuplicateCase(case.case_id)
            record = self._complete(
                case.case_id,
                stage_before=None,
                outcome={
                    "kind": CASE_OPENED,
                    "payload": {
                        "report_ref": report_ref or case.report_ref,
                        "thresholds": case.thresholds.as_dict(),
                    },
                },
                effects=[kernel.effect_to_dict(kernel.InvokeAgent(kernel.CHATBOT_INTAKE))],
                actor=actor,
                counters_after=case.counters(),
                previous=GENESIS_HASH,
                seq=1,
            )
            self._records[case.case_id] = [record]
            self._heads[case.case_id] = case
            self._locks[case.case_id] = threading.RLock()
            self._persist(case.case_id, record)
            return record

    def append(
        self,
        case_id: str,
        stage_before: Stage,
        outcome: StageOutcome,
        effects: Sequence[Effect],
        actor: dict,
        new_case: BugCase,
    ) -> EventRecord:
        """Append one transition; the caller provides the kernel's result."""
        with self._lock_for(case_id):
            head = self._heads[case_id]
            if head.stage is not stage_before:
                raise StaleWrite(
                    f"stage_before {stage_before.value} != head {head.stage.value}"
                )
            records = self._records[case_id]
            record = self._complete(
                case_id,
                stage_before=stage_before.value,
                outcome={"kind": outcome.kind, "payload": outcome.payload},
                effects=[kernel.effect_to_dict(e) for e in effects],
                actor=actor,
                counters_after=new_case.counters(),
                previous=records[-1].record_hash,
                seq=len(records) + 1,
            )
            records.append(record)
            self._heads[case_id] = new_case
            self._persist(case_id, record)
            return record

    def _complete(
        self,
        case_id: str,
        stage_before: Optional[str],
        outcome: dict,
        effects: list,
        actor: dict,
        counters_after: dict,
        previous: str,
        seq: int,
    ) -> EventRecord:
        body = {
            "seq": seq,
            "case_id": case_id,
            "stage_before": stage_before,
            "outcome": outcome,
            "effects": effects,
            "actor": actor,
            "counters_after": counters_after,
            "timestamp": self._clock(),
        }
        return EventRecord(record_hash=chain_hash(body, previous), **body)

    # -- replay and transfer --------------------------------------------------

    def replay(self, case_id: str, up_to_seq: Optional[int] = None) -> BugCase:
        records = self.events(case_id)
        if up_to_seq is not None:
            records = [r for r in records if r.seq <= up_to_seq]
        return fold_records(records)

    def snapshot(self, case_id: str, as_of_seq: Optional[int] = None) -> Snapshot:
        records = self.events(case_id)
        seq = as_of_seq if as_of_seq is not None else records[-1].seq
        return Snapshot(case_id, seq, self.replay(case_id, up_to_seq=seq))

    def replay_from(self, snapshot: Snapshot) -> BugCase:
        """Resume a snapshot and fold only the events past it."""
        records = self.events(snapshot.case_id)
        verify_chain(records)
        case = snapshot.case
        for record in records:
            if record.seq <= snapshot.as_of_seq:
                continue
            if record.stage_before != case.stage.value:
                raise CorruptChain(record.seq, "snapshot does not align with the log")
            case, _ = kernel.step(
                case, StageOutcome(record.outcome["kind"], dict(record.outcome.get("payload", {})))
            )
        return case

    def export_log(self, case_id: str) -> bytes:
        return serialize_log(self.events(case_id))

    def import_log(self, data: bytes) -> str:
        records = parse_log(data)
        case = fold_records(records)  # verifies the chain
        case_id = records[0].case_id
        with self._global:
            if case_id in self._records:
                raise DuplicateCase(case_id)
            self._records[case_id] = records
            self._heads[case_id] = case
            self._locks[case_id] = threading.RLock()
        if self._directory is not None:
            path = self._directory / f"{case_id}.jsonl"
            path.write_bytes(serialize_log(records))
        return case_id
