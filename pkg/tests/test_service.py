"""HTTP service: every endpoint via the in-process test client."""

import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from conftest import KEY, KEY_B
from mimicmark.service.app import create_app

PAYLOAD_HEX = "0f1e2d3c"


@pytest.fixture()
def client(tmp_path):
    app = create_app(registry_path=str(tmp_path / "registry.jsonl"))
    return TestClient(app)


def _png_upload(img):
    buf = io.BytesIO()
    Image.fromarray(img.data).save(buf, format="PNG")
    buf.seek(0)
    return {"file": ("img.png", buf, "image/png")}


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_presets_catalog(client):
    r = client.get("/presets")
    assert r.status_code == 200
    cat = r.json()
    assert cat["t1-artist-watermarked"]["avg_bits"] == 19.54
    assert cat["t1-artist-watermarked"]["provenance"] == "paper-table"


def test_embed_extract_roundtrip(client, small_images):
    r = client.post(
        "/embed",
        files=_png_upload(small_images[0]),
        data={"payload_hex": PAYLOAD_HEX, "method": "dwt-dct-svd", "key_hex": KEY.hex()},
    )
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert float(r.headers["X-Psnr-Db"]) >= 38.0

    marked = np.asarray(Image.open(io.BytesIO(r.content)))
    from mimicmark.imagecore import ImageBuffer

    r2 = client.post(
        "/extract",
        files=_png_upload(ImageBuffer.from_array(marked)),
        data={
            "method": "dwt-dct-svd",
            "key_hex": KEY.hex(),
            "payload_length": "32",
            "reference_hex": PAYLOAD_HEX,
        },
    )
    assert r2.status_code == 200
    body = r2.json()
    assert body["accuracy"] == 1.0
    assert len(body["bits"]) == 32


def test_embed_rejects_tiny_image(client):
    from mimicmark.imagecore import ImageBuffer

    tiny = ImageBuffer.from_array(np.zeros((16, 16, 3), dtype=np.uint8))
    r = client.post(
        "/embed",
        files=_png_upload(tiny),
        data={"payload_hex": PAYLOAD_HEX, "key_hex": KEY.hex()},
    )
    assert r.status_code == 422


def test_attack_endpoint(client, small_images):
    r = client.post(
        "/attack",
        files=_png_upload(small_images[1]),
        data={"spec": "jpeg:q=60", "seed": "0"},
    )
    assert r.status_code == 200
    assert r.headers["X-Attack"] == "jpeg:q=60"
    assert float(r.headers["X-Psnr-Vs-Source-Db"]) > 25.0


def test_attack_bad_spec(client, small_images):
    r = client.post(
        "/attack", files=_png_upload(small_images[1]), data={"spec": "jpeg:q=0"}
    )
    assert r.status_code == 422


def test_simulate_and_verify_flow(client):
    r = client.post(
        "/simulate",
        json={"preset": "t1-artist-watermarked", "n": 1000, "seed": 11},
    )
    assert r.status_code == 200
    doc = r.json()
    assert len(doc["samples"]) == 1000
    assert abs(np.mean(doc["samples"]) - 19.54) < 0.5

    r2 = client.post(
        "/verify",
        json={"samples": doc, "null": {"kind": "theoretical-chance"}, "alpha": 1e-4},
    )
    assert r2.status_code == 200
    verdict = r2.json()
    assert verdict["decision"] == "theft-detected"
    assert verdict["sample_count"] == 1000

    r3 = client.post(
        "/simulate",
        json={"preset": "t1-artist-clean", "n": 1000, "seed": 12},
    )
    r4 = client.post("/verify", json={"samples": r3.json()})
    assert r4.json()["decision"] == "no-evidence"


def test_simulate_unknown_preset_404(client):
    assert client.post("/simulate", json={"preset": "nope"}).status_code == 404


def test_match_endpoint(client):
    r = client.post(
        "/match",
        json={
            "extracted_bits": "1" * 30 + "00",
            "authorized_hex": "ffffffff",
            "unauthorized_hex": "00000000",
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["ruling"] == "authorized"
    assert body["acc_vs_authorized"] == pytest.approx(30 / 32)


def test_registry_endpoints(client):
    r = client.post(
        "/registry/records",
        json={
            "artist_id": "mei",
            "role": "unauthorized",
            "payload_hex": PAYLOAD_HEX,
            "method": "dwt-dct",
            "key_hex": KEY_B.hex(),
        },
    )
    assert r.status_code == 201
    record_id = r.json()["record_id"]

    r2 = client.get("/registry/records/mei")
    assert r2.status_code == 200
    records = r2.json()
    assert records[0]["record_id"] == record_id
    assert records[0]["has_inline_key"] is True

    # duplicate without opt-in conflicts
    r3 = client.post(
        "/registry/records",
        json={
            "artist_id": "mei",
            "role": "unauthorized",
            "payload_hex": PAYLOAD_HEX,
            "method": "dwt-dct",
            "key_hex": KEY_B.hex(),
        },
    )
    assert r3.status_code == 409

    assert client.get("/registry/records/ghost").status_code == 404
