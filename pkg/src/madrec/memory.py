"""File-backed store for profiles and the append-only recommendation log.

Layout under ``root``::

    user/<owner>.json   item/<owner>.json   profile summaries + version
    user/<owner>.emb    item/<owner>.emb    uint32 dim header, float32 LE values
    log.jsonl                               {seq, ts, kind, payload} per line
    quarantine/                             corrupt files moved aside on read
"""
from __future__ import annotations

import json
import logging
import os
import shutil
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from urllib.parse import quote, unquote

import numpy as np

from .profiles import Profile

logger = logging.getLogger(__name__)

LOG_KINDS = ("recommendation", "feedback", "weight_change")


class CorruptRecordError(IOError):
    pass


@dataclass(frozen=True)
class LogEntry:
    seq: int
    ts: float
    kind: str
    payload: object

    def to_json(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload}


def write_embedding(path: Path, vec: np.ndarray) -> None:
    vec = np.asarray(vec, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", vec.shape[0]))
        fh.write(vec.tobytes())


def read_embedding(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 4:
        raise CorruptRecordError(f"{path}: missing dim header")
    (dim,) = struct.unpack_from("<I", raw)
    if len(raw) != 4 + 4 * dim:
        raise CorruptRecordError(f"{path}: expected {dim} floats, got {(len(raw) - 4) / 4}")
    return np.frombuffer(raw, dtype="<f4", offset=4).astype(np.float32)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class MemoryStore:
    """Profiles plus an append-only log; one writer at a time, readers never wait on it."""

    def __init__(self, root: str | Path, clock: Callable[[], float] = time.time):
        self.root = Path(root)
        self.clock = clock
        self._write_lock = threading.Lock()
        self._cache: dict[tuple[str, str], Profile] = {}
        self.errors: list[str] = []
        for sub in ("user", "item"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / "log.jsonl"
        self._seq = self._recover_log()

    # -- profiles ---------------------------------------------------------

    def _paths(self, kind: str, owner_id: str) -> tuple[Path, Path]:
        if kind not in ("user", "item"):
            raise ValueError(f"unknown profile kind {kind!r}")
        stem = quote(owner_id, safe="")
        base = self.root / kind
        return base / f"{stem}.json", base / f"{stem}.emb"

    def put_profile(self, profile: Profile) -> int:
        """Write ``profile``; returns its new version number."""
        jpath, epath = self._paths(profile.kind, profile.owner_id)
        with self._write_lock:
            version = 1
            if jpath.exists():
                try:
                    version = int(json.loads(jpath.read_text(encoding="utf-8")).get("version", 0)) + 1
                except (ValueError, OSError):
                    version = 1
            record = dict(profile.to_json(), version=version)
            write_embedding(epath, profile.embedding)
            # summaries keep insertion order: prompts render them in that order
            _atomic_write(jpath, (json.dumps(record, ensure_ascii=False) + "\n").encode("utf-8"))
            self._cache[(profile.kind, profile.owner_id)] = profile
        return version

    def get_profile(self, kind: str, owner_id: str) -> Profile | None:
        cached = self._cache.get((kind, owner_id))
        if cached is not None:
            return cached
        jpath, epath = self._paths(kind, owner_id)
        if not jpath.exists():
            return None
        try:
            record = json.loads(jpath.read_text(encoding="utf-8"))
            profile = Profile(
                owner_id=record["owner_id"],
                kind=record["kind"],
                summaries=dict(record["summaries"]),
                embedding=read_embedding(epath),
                built_at=int(record["built_at"]),
            )
        except (ValueError, KeyError, TypeError, OSError) as exc:
            self._quarantine(jpath, epath, exc=exc)
            return None
        self._cache[(kind, owner_id)] = profile
        return profile

    def owners(self, kind: str) -> list[str]:
        return sorted(unquote(p.stem) for p in (self.root / kind).glob("*.json"))

    def _quarantine(self, *paths: Path, exc: Exception) -> None:
        qdir = self.root / "quarantine"
        qdir.mkdir(exist_ok=True)
        for p in paths:
            if p.exists():
                shutil.move(str(p), qdir / f"{p.parent.name}__{p.name}")
        msg = f"quarantined {paths[0].name}: {exc}"
        logger.error(msg)
        self.errors.append(msg)

    # -- log --------------------------------------------------------------

    def _recover_log(self) -> int:
        """Scan the log for the last good seq; a torn final line is dropped and reported."""
        if not self.log_path.exists():
            return 0
        raw = self.log_path.read_bytes()
        good_end = 0
        seq = 0
        pos = 0
        for line in raw.splitlines(keepends=True):
            pos += len(line)
            try:
                if not line.endswith(b"\n"):
                    raise ValueError("unterminated record")
                seq = int(json.loads(line)["seq"])
            except (ValueError, KeyError, TypeError):
                msg = f"dropped torn log record at byte {good_end} of {self.log_path.name}"
                logger.warning(msg)
                self.errors.append(msg)
                break
            good_end = pos
        if good_end != len(raw):
            with open(self.log_path, "r+b") as fh:
                fh.truncate(good_end)
        return seq

    def append_log(self, kind: str, payload) -> int:
        if kind not in LOG_KINDS:
            raise ValueError(f"unknown log kind {kind!r}")
        with self._write_lock:
            self._seq += 1
            entry = LogEntry(self._seq, self.clock(), kind, payload)
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
            return entry.seq

    def read_log(self, kind: str | None = None, where: Callable[[LogEntry], bool] | None = None) -> list[LogEntry]:
        if not self.log_path.exists():
            return []
        out = []
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.endswith("\n"):
                    break  # a write still in flight
                rec = json.loads(line)
                entry = LogEntry(rec["seq"], rec["ts"], rec["kind"], rec["payload"])
                if kind is not None and entry.kind != kind:
                    continue
                if where is not None and not where(entry):
                    continue
                out.append(entry)
        return sorted(out, key=lambda e: e.seq)
