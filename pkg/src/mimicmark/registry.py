"""Append-only JSON-lines registry of watermark records.

A record ties an artist to a payload, a role (authorized/unauthorized)
and the codec settings needed to verify later. Keys are stored as
references to key files by default; inline hex keys are for explicitly
opted-in use only, since registries may be shared with a certifying
party. Writes take an exclusive lock, then rewrite via temp-file rename,
so concurrent registrations from separate processes both land.
"""

from __future__ import annotations

import fcntl
import json
import os
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import DuplicateRecordError, RecordNotFoundError, RegistryFormatError
from .watermark import CodecConfig, WatermarkPayload


@dataclass(frozen=True)
class RegistryRecord:
    artist_id: str
    role: str
    payload_hex: str
    method: str
    payload_length: int = 32
    redundancy: int = 5
    strength: float | None = None
    key_ref: str | None = None
    key_hex: str | None = None
    record_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    notes: str = ""
    group_label: str = ""
    signature: str | None = None  # reserved for future notarization

    def __post_init__(self) -> None:
        if self.role not in ("authorized", "unauthorized"):
            raise RegistryFormatError(f"unknown role {self.role!r}")
        if (self.key_ref is None) == (self.key_hex is None):
            raise RegistryFormatError("record needs exactly one of key_ref / key_hex")
        if len(self.payload_hex) * 4 != self.payload_length:
            raise RegistryFormatError(
                f"payload is {len(self.payload_hex) * 4} bits but record says "
                f"{self.payload_length}"
            )

    @property
    def payload(self) -> WatermarkPayload:
        return WatermarkPayload.from_hex(self.payload_hex, role=self.role)

    def key_bytes(self) -> bytes:
        if self.key_hex is not None:
            return bytes.fromhex(self.key_hex)
        raw = Path(self.key_ref).read_text().strip()
        return bytes.fromhex(raw)

    @property
    def codec(self) -> CodecConfig:
        return CodecConfig(
            method=self.method,
            key=self.key_bytes(),
            strength=self.strength,
            payload_length=self.payload_length,
            redundancy=self.redundancy,
        )

    def to_dict(self) -> dict:
        d = {
            "record_id": self.record_id,
            "artist_id": self.artist_id,
            "role": self.role,
            "payload_hex": self.payload_hex,
            "method": self.method,
            "payload_length": self.payload_length,
            "redundancy": self.redundancy,
            "strength": self.strength,
            "created_at": self.created_at,
            "notes": self.notes,
            "group_label": self.group_label,
            "signature": self.signature,
        }
        if self.key_ref is not None:
            d["key_ref"] = self.key_ref
        else:
            d["key_hex"] = self.key_hex
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegistryRecord":
        return cls(
            artist_id=d["artist_id"],
            role=d["role"],
            payload_hex=d["payload_hex"],
            method=d["method"],
            payload_length=int(d.get("payload_length", 32)),
            redundancy=int(d.get("redundancy", 5)),
            strength=d.get("strength"),
            key_ref=d.get("key_ref"),
            key_hex=d.get("key_hex"),
            record_id=d["record_id"],
            created_at=d.get("created_at", ""),
            notes=d.get("notes", ""),
            group_label=d.get("group_label", ""),
            signature=d.get("signature"),
        )


def load_all(store: str | Path) -> list[RegistryRecord]:
    """Every record in the store, in file order."""
    path = Path(store)
    if not path.exists():
        return []
    records = []
    with path.open("r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(RegistryRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, RegistryFormatError) as exc:
                raise RegistryFormatError(f"{path}: bad record at line {lineno}: {exc}") from exc
    return records


def register(store: str | Path, record: RegistryRecord, allow_duplicate: bool = False) -> str:
    """Append one record atomically; returns its record_id."""
    path = Path(store)
    path.parent.mkdir(parents=True, exist_ok=True)
    lock_path = path.with_suffix(path.suffix + ".lock")
    with open(lock_path, "w") as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        try:
            existing = load_all(path)
            if not allow_duplicate and any(
                r.artist_id == record.artist_id and r.role == record.role for r in existing
            ):
                raise DuplicateRecordError(
                    f"({record.artist_id}, {record.role}) already registered"
                )
            if any(r.record_id == record.record_id for r in existing):
                raise DuplicateRecordError(f"record_id {record.record_id} already present")
            tmp = path.with_suffix(path.suffix + f".tmp.{os.getpid()}")
            with tmp.open("w") as fh:
                for r in existing:
                    fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)
    return record.record_id


def lookup(store: str | Path, artist_id: str) -> list[RegistryRecord]:
    """All records for an artist, newest first."""
    matches = [r for r in load_all(store) if r.artist_id == artist_id]
    if not matches:
        raise RecordNotFoundError(f"no records for artist {artist_id!r}")
    return sorted(matches, key=lambda r: r.created_at, reverse=True)


def find_record(store: str | Path, record_id: str) -> RegistryRecord:
    for r in load_all(store):
        if r.record_id == record_id:
            return r
    raise RecordNotFoundError(f"no record with id {record_id!r}")
