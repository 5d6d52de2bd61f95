"""FastAPI service wrapping the core package.

Image-carrying endpoints speak multipart/PNG; statistics endpoints speak
JSON. The CLI covers local batch jobs; this service covers the
multi-client deployment where a watermarking agency holds the registry
and verifies on demand.
"""

from __future__ import annotations

import io
import json
import math

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, Response, UploadFile
from PIL import Image, UnidentifiedImageError

from .. import __version__, attacks, channel, registry, verify, watermark
from ..errors import MimicmarkError, RecordNotFoundError, UnknownPresetError
from ..imagecore import ImageBuffer
from . import models


def _decode_upload(data: bytes) -> ImageBuffer:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode == "L":
                return ImageBuffer.from_array(np.asarray(im, dtype=np.uint8))
            return ImageBuffer.from_array(np.asarray(im.convert("RGB"), dtype=np.uint8))
    except (UnidentifiedImageError, OSError) as exc:
        raise HTTPException(status_code=422, detail=f"cannot decode image: {exc}") from exc


def _png_bytes(img: ImageBuffer) -> bytes:
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def _codec(method: str, key_hex: str, strength: float | None,
           payload_length: int, redundancy: int) -> watermark.CodecConfig:
    try:
        return watermark.CodecConfig(
            method=method,
            key=bytes.fromhex(key_hex),
            strength=strength,
            payload_length=payload_length,
            redundancy=redundancy,
        )
    except (ValueError, MimicmarkError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app(registry_path: str = "registry.jsonl") -> FastAPI:
    app = FastAPI(
        title="mimicmark",
        version=__version__,
        description="Watermark embedding, extraction, attack benchmarking and "
        "mimicry-theft verification.",
    )
    app.state.registry_path = registry_path

    @app.get("/health", response_model=models.HealthResponse)
    def health():
        return models.HealthResponse(status="ok", version=__version__)

    @app.get("/presets", response_model=dict[str, models.PresetEntry])
    def presets():
        return channel.preset_catalog()

    @app.post("/embed")
    async def embed_endpoint(
        file: UploadFile = File(...),
        payload_hex: str = Form(...),
        method: str = Form("dwt-dct-svd"),
        key_hex: str = Form(...),
        strength: float | None = Form(None),
        redundancy: int = Form(watermark.DEFAULT_REDUNDANCY),
    ):
        img = _decode_upload(await file.read())
        try:
            payload = watermark.WatermarkPayload.from_hex(payload_hex)
            cfg = _codec(method, key_hex, strength, len(payload), redundancy)
            marked, stats = watermark.embed(img, payload, cfg)
        except MimicmarkError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return Response(
            content=_png_bytes(marked),
            media_type="image/png",
            headers={
                "X-Psnr-Db": f"{stats.psnr:.3f}",
                "X-Blocks-Used": str(stats.blocks_used),
            },
        )

    @app.post("/extract", response_model=models.ExtractionResponse)
    async def extract_endpoint(
        file: UploadFile = File(...),
        method: str = Form("dwt-dct-svd"),
        key_hex: str = Form(...),
        strength: float | None = Form(None),
        payload_length: int = Form(32),
        redundancy: int = Form(watermark.DEFAULT_REDUNDANCY),
        reference_hex: str | None = Form(None),
    ):
        img = _decode_upload(await file.read())
        cfg = _codec(method, key_hex, strength, payload_length, redundancy)
        try:
            result = watermark.extract(img, cfg)
        except MimicmarkError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        resp = models.ExtractionResponse(
            bits="".join(str(b) for b in result.bits),
            confidences=list(result.confidences),
            method=result.method,
            payload_length=result.payload_length,
        )
        if reference_hex:
            acc = watermark.bit_accuracy(
                result, watermark.WatermarkPayload.from_hex(reference_hex)
            )
            resp.correct_bits = acc.correct_bits
            resp.total_bits = acc.total_bits
            resp.accuracy = acc.acc
        return resp

    @app.post("/attack")
    async def attack_endpoint(
        file: UploadFile = File(...),
        spec: str = Form(...),
        seed: int = Form(0),
    ):
        img = _decode_upload(await file.read())
        try:
            parsed = attacks.parse_attack_spec(spec, seed=seed)
            attacked = attacks.apply_attack(img, parsed)
        except MimicmarkError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        p = attacked.psnr_vs_source
        return Response(
            content=_png_bytes(attacked.image),
            media_type="image/png",
            headers={
                "X-Attack": attacked.applied.canonical(),
                "X-Psnr-Vs-Source-Db": "inf" if math.isinf(p) else f"{p:.3f}",
            },
        )

    @app.post("/simulate", response_model=models.SamplesDocument)
    def simulate_endpoint(req: models.SimulateRequest):
        try:
            model = channel.preset(req.preset)
            if req.two_stage:
                model = channel.two_stage(model)
            label = model.label
            provenance = model.provenance
            if req.mix_p is not None:
                if not req.clean_preset:
                    raise HTTPException(status_code=422, detail="mix_p requires clean_preset")
                model = channel.mix(model, channel.preset(req.clean_preset), req.mix_p)
                label = model.label
            samples = channel.sample_accuracies(model, req.n, seed=req.seed)
        except UnknownPresetError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        doc = samples.to_dict()
        doc.setdefault("label", label)
        return models.SamplesDocument(**doc, provenance=provenance)

    @app.post("/verify", response_model=models.VerdictResponse)
    def verify_endpoint(req: models.VerifyRequest):
        samples = channel.AccuracySampleSet.from_dict(req.samples.model_dump(exclude_none=True))
        try:
            if req.null.kind == "empirical-reference":
                if req.null.reference is None:
                    raise HTTPException(
                        status_code=422, detail="empirical-reference null needs reference samples"
                    )
                ref = channel.AccuracySampleSet.from_dict(
                    req.null.reference.model_dump(exclude_none=True)
                )
                null = verify.NullModel.from_reference(ref)
            else:
                null = verify.NullModel.chance(samples.n_bits, p0=req.null.p0, rho=req.null.rho)
            verdict = verify.detect(samples, null, alpha=req.alpha)
        except MimicmarkError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return models.VerdictResponse(**verdict.to_dict())

    @app.post("/match", response_model=models.MatchResponse)
    def match_endpoint(req: models.MatchRequest):
        try:
            m = verify.match_authorization(
                [int(c) for c in req.extracted_bits],
                watermark.WatermarkPayload.from_hex(req.authorized_hex, role="authorized"),
                watermark.WatermarkPayload.from_hex(req.unauthorized_hex),
                threshold=req.threshold,
            )
        except MimicmarkError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return models.MatchResponse(
            ruling=m.ruling,
            acc_vs_authorized=m.acc_vs_authorized.acc,
            acc_vs_unauthorized=m.acc_vs_unauthorized.acc,
        )

    @app.post("/registry/records", response_model=models.RegisterResponse, status_code=201)
    def register_endpoint(req: models.RegisterRequest):
        payload_hex = req.payload_hex
        if payload_hex is None:
            payload_hex = watermark.WatermarkPayload.random(
                req.payload_length, seed=req.seed
            ).to_hex()
        try:
            record = registry.RegistryRecord(
                artist_id=req.artist_id,
                role=req.role,
                payload_hex=payload_hex,
                method=req.method,
                payload_length=req.payload_length,
                redundancy=req.redundancy,
                strength=req.strength,
                key_ref=req.key_ref,
                key_hex=req.key_hex,
                notes=req.notes,
                group_label=req.group_label,
            )
            record_id = registry.register(
                app.state.registry_path, record, allow_duplicate=req.allow_duplicate
            )
        except MimicmarkError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return models.RegisterResponse(record_id=record_id)

    @app.get("/registry/records/{artist_id}", response_model=list[models.RecordResponse])
    def lookup_endpoint(artist_id: str):
        try:
            records = registry.lookup(app.state.registry_path, artist_id)
        except RecordNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return [
            models.RecordResponse(
                record_id=r.record_id,
                artist_id=r.artist_id,
                role=r.role,
                payload_hex=r.payload_hex,
                method=r.method,
                payload_length=r.payload_length,
                redundancy=r.redundancy,
                strength=r.strength,
                created_at=r.created_at,
                notes=r.notes,
                group_label=r.group_label,
                key_ref=r.key_ref,
                has_inline_key=r.key_hex is not None,
            )
            for r in records
        ]

    return app


app = create_app()
