"""Pydantic request/response schemas for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ExtractionResponse(BaseModel):
    bits: str
    confidences: list[float]
    method: str
    payload_length: int
    correct_bits: int | None = None
    total_bits: int | None = None
    accuracy: float | None = None


class PresetEntry(BaseModel):
    n_bits: int
    bin_counts: list[int]
    avg_bits: float
    best_bits: int
    alpha: float
    beta: float
    source: str
    provenance: str


class SimulateRequest(BaseModel):
    preset: str
    n: int = Field(default=1000, ge=1, le=1_000_000)
    seed: int = 0
    mix_p: float | None = Field(default=None, ge=0.0, le=1.0)
    clean_preset: str | None = None
    two_stage: bool = False


class SamplesDocument(BaseModel):
    n_bits: int
    seed: int | None = None
    samples: list[int]
    groups: list[str] | None = None
    label: str = ""
    provenance: str | None = None


class NullSpec(BaseModel):
    kind: str = "theoretical-chance"
    p0: float = Field(default=0.5, gt=0.0, lt=1.0)
    rho: float = Field(default=0.05, ge=0.0, lt=1.0)
    reference: SamplesDocument | None = None


class VerifyRequest(BaseModel):
    samples: SamplesDocument
    null: NullSpec = NullSpec()
    alpha: float = Field(default=1e-4, gt=0.0, lt=1.0)


class VerdictResponse(BaseModel):
    avg_bits: float
    best_bits: int
    histogram_5bin: list[int]
    histogram_10bin: list[int]
    p_mean: float
    p_max: float
    p_ks: float | None
    decision: str
    alpha_used: float
    sample_count: int
    n_bits: int
    null_kind: str
    provenance: str = ""


class RegisterRequest(BaseModel):
    artist_id: str
    role: str = "unauthorized"
    payload_hex: str | None = None
    payload_length: int = 32
    method: str = "dwt-dct-svd"
    key_ref: str | None = None
    key_hex: str | None = None
    strength: float | None = None
    redundancy: int = 5
    notes: str = ""
    group_label: str = ""
    allow_duplicate: bool = False
    seed: int | None = None


class RegisterResponse(BaseModel):
    record_id: str


class RecordResponse(BaseModel):
    record_id: str
    artist_id: str
    role: str
    payload_hex: str
    method: str
    payload_length: int
    redundancy: int
    strength: float | None
    created_at: str
    notes: str = ""
    group_label: str = ""
    key_ref: str | None = None
    has_inline_key: bool = False


class MatchRequest(BaseModel):
    extracted_bits: str
    authorized_hex: str
    unauthorized_hex: str
    threshold: float = Field(default=0.75, gt=0.0, le=1.0)


class MatchResponse(BaseModel):
    ruling: str
    acc_vs_authorized: float
    acc_vs_unauthorized: float
