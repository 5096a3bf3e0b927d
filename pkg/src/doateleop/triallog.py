"""Append-only trial logs: one JSON header line, then one record per tick.

The header embeds the full scenario document plus its hash, the run seed and
the session configuration, so a log is self-contained: replays and reports
need no files besides the log itself. Records are newline-delimited JSON with
strictly increasing timestamps. Serialization is canonical (sorted keys, no
whitespace), which makes write(read(path)) byte-identical and lets tests
compare logs by bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

FORMAT_VERSION = 1


class LogError(ValueError):
    """Structured log failure; carries the last valid record index."""

    def __init__(self, message: str, last_valid_record: int = -1):
        super().__init__(message)
        self.last_valid_record = last_valid_record


def canonical_json(doc: object) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def scenario_hash(scenario_doc: dict) -> str:
    return hashlib.sha256(canonical_json(scenario_doc).encode("utf-8")).hexdigest()


@dataclass
class TrialLog:
    header: dict
    records: list[dict] = field(default_factory=list)

    def append(self, record: dict) -> None:
        if self.records and record["t"] <= self.records[-1]["t"]:
            raise LogError(
                f"non-monotone timestamp {record['t']!r}", len(self.records) - 1
            )
        self.records.append(record)

    def to_bytes(self) -> bytes:
        lines = [canonical_json(self.header)]
        lines.extend(canonical_json(r) for r in self.records)
        return ("\n".join(lines) + "\n").encode("utf-8")


def new_header(scenario_doc: dict, seed: int, config: dict) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "scenario": scenario_doc,
        "scenario_hash": scenario_hash(scenario_doc),
        "seed": seed,
        "config": config,
    }


def write_log(log: TrialLog, path: str | Path) -> None:
    Path(path).write_bytes(log.to_bytes())


def read_log(path: str | Path) -> TrialLog:
    raw = Path(path).read_bytes()
    lines = raw.decode("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise LogError("empty log file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise LogError(f"corrupt header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format_version") != FORMAT_VERSION:
        raise LogError("missing or unsupported format_version in header")
    for key in ("scenario", "scenario_hash", "seed", "config"):
        if key not in header:
            raise LogError(f"header missing '{key}'")
    if scenario_hash(header["scenario"]) != header["scenario_hash"]:
        raise LogError("scenario hash mismatch: log header is inconsistent")
    records: list[dict] = []
    last_t: float | None = None
    for i, line in enumerate(lines[1:]):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogError(
                f"corrupt record at line {i + 2}: {exc}", last_valid_record=i - 1
            ) from exc
        if not isinstance(rec, dict) or "t" not in rec:
            raise LogError(f"record {i} lacks a timestamp", last_valid_record=i - 1)
        if last_t is not None and rec["t"] <= last_t:
            raise LogError(
                f"non-monotone timestamp at record {i}", last_valid_record=i - 1
            )
        last_t = rec["t"]
        records.append(rec)
    return TrialLog(header=header, records=records)
