"""Dataset and report file formats.

Dataset: JSON Lines.  The first record is the manifest::

    {"record": "manifest", "schema": "rppkit.dataset/1", "window_end": 20.0, "time_unit": "year"}

and every following line is one event::

    {"item_id": "d000001", "event_time": 3.25}

An item with no events is written as one record with ``"event_time": null``
so that it survives a round trip.  A record may carry ``"window_end"`` to
override the corpus window for its item.  Unknown fields are ignored with a
warning.  Items keep the order of their first appearance.

Reports are single JSON documents written with sorted keys; only the fields
under ``"timing"`` depend on the wall clock.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .errors import RPPError
from .model import EventSequence, ItemParams

log = logging.getLogger(__name__)

DATASET_SCHEMA = "rppkit.dataset/1"
TRUTH_SCHEMA = "rppkit.truth/1"
REPORT_SCHEMA = "rppkit.report/1"

_EVENT_FIELDS = {"item_id", "event_time", "window_end"}
_MANIFEST_FIELDS = {"record", "schema", "window_end", "time_unit", "meta"}

__all__ = [
    "DataError",
    "Dataset",
    "read_dataset",
    "write_dataset",
    "write_truth",
    "read_truth",
    "write_report",
    "read_report",
    "file_digest",
    "input_digest",
    "Timer",
]


class DataError(RPPError, ValueError):
    """Malformed or inconsistent input data; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class Dataset:
    def __init__(self, sequences: list[EventSequence], window_end: float,
                 time_unit: str = "unit", meta: dict | None = None):
        self.sequences = sequences
        self.window_end = float(window_end)
        self.time_unit = time_unit
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.sequences)

    @property
    def ids(self):
        return [s.item_id for s in self.sequences]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(path: str, sequences: Sequence[EventSequence], window_end: float,
                  time_unit: str = "unit", meta: dict | None = None) -> None:
    manifest = {"record": "manifest", "schema": DATASET_SCHEMA,
                "window_end": float(window_end), "time_unit": time_unit}
    if meta:
        manifest["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True) + "\n")
        for s in sequences:
            extra = ""
            if s.window_end != window_end:
                extra = f', "window_end": {_fmt(s.window_end)}'
            ident = json.dumps(s.item_id)
            if s.n == 0:
                fh.write(f'{{"item_id": {ident}, "event_time": null{extra}}}\n')
            for t in s.arrivals:
                fh.write(f'{{"item_id": {ident}, "event_time": {_fmt(t)}{extra}}}\n')


def _number(value, name, path, lineno):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataError(f"{name} must be a number, got {value!r}", path, lineno)
    if not math.isfinite(value):
        raise DataError(f"{name} must be finite", path, lineno)
    return float(value)


def read_dataset(path: str) -> Dataset:
    items: dict[str, list[float]] = {}
    windows: dict[str, float] = {}
    warned: set[str] = set()
    manifest = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(rec, dict):
                raise DataError("record is not an object", path, lineno)
            if manifest is None:
                if rec.get("record") != "manifest":
                    raise DataError("first record must be the manifest", path, lineno)
                if rec.get("schema") != DATASET_SCHEMA:
                    raise DataError(f"unsupported schema {rec.get('schema')!r}", path, lineno)
                T = _number(rec.get("window_end"), "window_end", path, lineno)
                if T <= 0:
                    raise DataError("window_end must be > 0", path, lineno)
                manifest = rec
                _warn_unknown(rec, _MANIFEST_FIELDS, warned, path, lineno)
                continue
            if rec.get("record") == "manifest":
                raise DataError("duplicate manifest", path, lineno)
            _warn_unknown(rec, _EVENT_FIELDS, warned, path, lineno)
            item_id = rec.get("item_id")
            if not isinstance(item_id, str) or not item_id:
                raise DataError("item_id must be a non-empty string", path, lineno)
            times = items.setdefault(item_id, [])
            if "window_end" in rec:
                w = _number(rec["window_end"], "window_end", path, lineno)
                if windows.setdefault(item_id, w) != w:
                    raise DataError(f"conflicting window_end for {item_id}", path, lineno)
            if "event_time" not in rec:
                raise DataError("missing event_time", path, lineno)
            if rec["event_time"] is None:
                continue
            t = _number(rec["event_time"], "event_time", path, lineno)
            T_item = windows.get(item_id, float(manifest["window_end"]))
            if t < 0 or t > T_item:
                raise DataError(f"event_time {t} outside [0, {T_item}] for {item_id}", path, lineno)
            times.append(t)
    if manifest is None:
        raise DataError("missing manifest record", path)
    T = float(manifest["window_end"])
    seqs = []
    for item_id, times in items.items():
        try:
            seqs.append(EventSequence.from_unsorted(item_id, times, windows.get(item_id, T)))
        except ValueError as exc:
            raise DataError(str(exc), path) from None
    return Dataset(seqs, T, manifest.get("time_unit", "unit"), manifest.get("meta"))


def _warn_unknown(rec, known, warned, path, lineno):
    for key in rec.keys() - known:
        if key not in warned:
            warned.add(key)
            log.warning("%s:%d: ignoring unknown field %r", path, lineno, key)


def write_truth(path: str, ids: Sequence[str], truth: Sequence[ItemParams], extra: dict) -> None:
    doc = {"schema": TRUTH_SCHEMA, **extra,
           "items": {i: {"fitness": p.fitness, "mu": p.mu, "sigma": p.sigma}
                     for i, p in zip(ids, truth)}}
    _dump(path, doc)


def read_truth(path: str) -> dict:
    doc = _load(path)
    if doc.get("schema") != TRUTH_SCHEMA:
        raise DataError(f"unsupported truth schema {doc.get('schema')!r}", path)
    doc["items"] = {k: ItemParams(v["fitness"], v["mu"], v["sigma"]) for k, v in doc["items"].items()}
    return doc


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def input_digest(path: str) -> str:
    """Digest of an input file; for our own reports the ``timing`` block is left out,
    so a rerun that differs only in wall clock yields the same digest downstream."""
    if path.endswith(".json"):
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError):
            doc = None
        if isinstance(doc, dict) and doc.get("schema_version") == REPORT_SCHEMA:
            doc.pop("timing", None)
            blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
            return "sha256-content:" + hashlib.sha256(blob).hexdigest()
    return file_digest(path)


class Timer:
    def __init__(self):
        self.started = datetime.now(timezone.utc)
        self._t0 = time.perf_counter()

    def block(self) -> dict:
        return {"created_at": self.started.isoformat(timespec="seconds"),
                "elapsed_seconds": round(time.perf_counter() - self._t0, 6)}


def write_report(path: str, kind: str, body: dict, *, tool_version: str, seed: int | None,
                 config: dict, inputs: Iterable[str] = (), timer: Timer | None = None) -> dict:
    doc = {
        "schema_version": REPORT_SCHEMA,
        "kind": kind,
        "tool_version": tool_version,
        "seed": seed,
        "config": config,
        "inputs": {os.path.basename(p): input_digest(p) for p in inputs},
        "timing": (timer or Timer()).block(),
        **body,
    }
    _dump(path, doc)
    return doc


def read_report(path: str, kind: str | None = None) -> dict:
    doc = _load(path)
    if doc.get("schema_version") != REPORT_SCHEMA:
        raise DataError(f"unsupported report schema {doc.get('schema_version')!r}", path)
    if kind is not None and doc.get("kind") != kind:
        raise DataError(f"expected a {kind} report, got {doc.get('kind')!r}", path)
    return doc


def _plain(obj):
    # numpy scalars and arrays that slipped into a report
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1, allow_nan=False, default=_plain)
        fh.write("\n")


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON ({exc.msg})", path, exc.lineno) from None
