"""JSON-lines registry: atomic appends, lookups, fault handling."""

import json
import multiprocessing as mp

import pytest

from conftest import KEY
from mimicmark import registry as reg
from mimicmark.errors import DuplicateRecordError, RecordNotFoundError, RegistryFormatError


def _record(artist="hollie", role="unauthorized", **kw):
    kw.setdefault("key_hex", KEY.hex())
    return reg.RegistryRecord(
        artist_id=artist,
        role=role,
        payload_hex="deadbeef",
        method="dwt-dct-svd",
        **kw,
    )


def test_register_and_lookup(tmp_path):
    store = tmp_path / "reg.jsonl"
    rid = reg.register(store, _record())
    assert rid
    records = reg.lookup(store, "hollie")
    assert len(records) == 1
    assert records[0].record_id == rid
    assert store.read_text().count("\n") == 1


def test_duplicate_artist_role_rejected(tmp_path):
    store = tmp_path / "reg.jsonl"
    reg.register(store, _record())
    with pytest.raises(DuplicateRecordError):
        reg.register(store, _record())
    # same artist, different role is fine
    reg.register(store, _record(role="authorized"))
    # explicit opt-in allows duplicates
    reg.register(store, _record(), allow_duplicate=True)
    assert len(reg.lookup(store, "hollie")) == 3


def test_lookup_unknown_artist(tmp_path):
    store = tmp_path / "reg.jsonl"
    reg.register(store, _record())
    with pytest.raises(RecordNotFoundError):
        reg.lookup(store, "nobody")


def test_lookup_newest_first(tmp_path):
    store = tmp_path / "reg.jsonl"
    reg.register(store, _record(created_at="2026-01-01T00:00:00+00:00"))
    reg.register(
        store, _record(role="authorized", created_at="2026-02-01T00:00:00+00:00")
    )
    records = reg.lookup(store, "hollie")
    assert records[0].role == "authorized"


def test_corrupt_line_reports_line_number(tmp_path):
    store = tmp_path / "reg.jsonl"
    reg.register(store, _record())
    with store.open("a") as fh:
        fh.write("{not json\n")
    with pytest.raises(RegistryFormatError, match="line 2"):
        reg.load_all(store)


def test_key_reference_resolution(tmp_path):
    key_file = tmp_path / "artist.key"
    key_file.write_text(KEY.hex() + "\n")
    store = tmp_path / "reg.jsonl"
    rid = reg.register(store, _record(key_hex=None, key_ref=str(key_file)))
    rec = reg.find_record(store, rid)
    assert rec.codec.key == KEY
    assert "key_hex" not in json.loads(store.read_text().splitlines()[0])


def test_record_requires_exactly_one_key_form():
    with pytest.raises(RegistryFormatError):
        reg.RegistryRecord(
            artist_id="a", role="authorized", payload_hex="00ff00ff", method="dwt-dct"
        )


def _worker(store, artist, out):
    try:
        rid = reg.register(store, _record(artist=artist))
        out.put(rid)
    except Exception as exc:  # pragma: no cover
        out.put(exc)


def test_concurrent_registers_both_land(tmp_path):
    store = str(tmp_path / "reg.jsonl")
    out = mp.Queue()
    procs = [
        mp.Process(target=_worker, args=(store, f"artist{i}", out)) for i in range(4)
    ]
    for p in procs:
        p.start()
    for p in procs:
        p.join(timeout=30)
    results = [out.get(timeout=5) for _ in procs]
    assert all(isinstance(r, str) for r in results)
    assert len(reg.load_all(store)) == 4
