"""Turn per-image extraction outcomes into verdicts.

The detector runs two complementary tests against a null model of
chance-level extraction:

* mean test - one-sided test that the population mean accuracy exceeds the
  null per-bit accuracy, with an overdispersion-corrected standard error
  (bit errors within one image are correlated). Normal approximation for
  N >= 30; exact convolution of the null pmf below that.
* max test - exact null tail probability that the best-of-N correct-bit
  count reaches the observed maximum.

Theft is declared when either test falls below the significance level.
Verification is accusatory, so the default alpha prices false positives
at 1e-4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    AccuracySampleSet,
    FIVE_BIN_EDGES,
    TEN_BIN_EDGES,
    bin_supports,
)
from .errors import (
    EmptySampleSetError,
    IdenticalPayloadsError,
    NullMismatchError,
    TooFewSamplesError,
)
from .imagecore import ImageBuffer
from .stats import (
    betabinom_pmf_vector,
    ks_2samp,
    normal_sf,
    overdispersion_from_samples,
)
from .watermark import BitAccuracy, CodecConfig, WatermarkPayload, bit_accuracy, extract

DEFAULT_ALPHA = 1e-4
DEFAULT_RHO = 0.05
MATCH_THRESHOLD = 0.75

BINNINGS = {"five-20pct": FIVE_BIN_EDGES, "ten-10pct": TEN_BIN_EDGES}


@dataclass(frozen=True)
class NullModel:
    """What extraction from an innocent model should look like."""

    kind: str  # theoretical-chance | empirical-reference
    n_bits: int
    p0: float = 0.5
    rho: float = DEFAULT_RHO
    reference_samples: AccuracySampleSet | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("theoretical-chance", "empirical-reference"):
            raise NullMismatchError(f"unknown null kind {self.kind!r}")
        if not (0.0 < self.p0 < 1.0):
            raise NullMismatchError("p0 must be in (0, 1)")
        if not (0.0 <= self.rho < 1.0):
            raise NullMismatchError("rho must be in [0, 1)")
        if self.kind == "empirical-reference":
            if self.reference_samples is None or len(self.reference_samples) < 100:
                raise TooFewSamplesError("empirical-reference null needs >= 100 samples")

    @classmethod
    def chance(cls, n_bits: int, p0: float = 0.5, rho: float = DEFAULT_RHO) -> "NullModel":
        return cls(kind="theoretical-chance", n_bits=n_bits, p0=p0, rho=rho)

    @classmethod
    def from_reference(cls, samples: AccuracySampleSet) -> "NullModel":
        p0 = float(np.mean(samples.samples)) / samples.n_bits
        p0 = min(max(p0, 1e-6), 1 - 1e-6)
        rho = overdispersion_from_samples(samples.samples, samples.n_bits)
        return cls(
            kind="empirical-reference",
            n_bits=samples.n_bits,
            p0=p0,
            rho=min(rho, 0.999),
            reference_samples=samples,
        )

    def pmf(self) -> np.ndarray:
        """Per-image correct-bit pmf under the null."""
        if self.rho <= 0.0:
            # binomial limit
            from math import comb

            return np.array(
                [
                    comb(self.n_bits, k) * self.p0**k * (1 - self.p0) ** (self.n_bits - k)
                    for k in range(self.n_bits + 1)
                ]
            )
        s = 1.0 / self.rho - 1.0
        return betabinom_pmf_vector(self.n_bits, self.p0 * s, (1.0 - self.p0) * s)


@dataclass(frozen=True)
class VerificationVerdict:
    avg_bits: float
    best_bits: int
    histogram_5bin: tuple[int, ...]
    histogram_10bin: tuple[int, ...]
    p_mean: float
    p_max: float
    p_ks: float | None
    decision: str  # theft-detected | no-evidence
    alpha_used: float
    sample_count: int
    n_bits: int
    null_kind: str = "theoretical-chance"
    provenance: str = ""

    def to_dict(self) -> dict:
        return {
            "avg_bits": self.avg_bits,
            "best_bits": self.best_bits,
            "histogram_5bin": list(self.histogram_5bin),
            "histogram_10bin": list(self.histogram_10bin),
            "p_mean": self.p_mean,
            "p_max": self.p_max,
            "p_ks": self.p_ks,
            "decision": self.decision,
            "alpha_used": self.alpha_used,
            "sample_count": self.sample_count,
            "n_bits": self.n_bits,
            "null_kind": self.null_kind,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class AuthorizationMatch:
    acc_vs_authorized: BitAccuracy
    acc_vs_unauthorized: BitAccuracy
    ruling: str  # authorized | unauthorized | indeterminate


def histogram(samples: AccuracySampleSet, binning: str = "five-20pct") -> tuple[int, ...]:
    """Counts per accuracy bin (left-closed right-open, last bin closed)."""
    if len(samples) == 0:
        raise EmptySampleSetError("empty sample set")
    edges = BINNINGS[binning]
    sup = bin_supports(samples.n_bits, edges)
    arr = np.asarray(samples.samples)
    return tuple(int(np.isin(arr, s).sum()) for s in sup)


def summary(samples: AccuracySampleSet) -> dict:
    """avg(bits) and best(bits) of a sample population."""
    if len(samples) == 0:
        raise EmptySampleSetError("empty sample set")
    arr = np.asarray(samples.samples)
    return {"avg_bits": float(arr.mean()), "best_bits": int(arr.max())}


def _p_mean(samples: np.ndarray, null: NullModel) -> float:
    n = len(samples)
    n_bits = null.n_bits
    observed_acc = float(samples.mean()) / n_bits
    se = math.sqrt(
        null.p0 * (1 - null.p0) * (1.0 + (n_bits - 1) * null.rho) / (n * n_bits)
    )
    if n >= 30:
        return normal_sf((observed_acc - null.p0) / se)
    # exact: convolve the null per-image pmf N times, take the upper tail
    pmf = null.pmf()
    total = pmf.copy()
    for _ in range(n - 1):
        total = np.convolve(total, pmf)
    observed_sum = int(samples.sum())
    return float(total[observed_sum:].sum())


def _p_max(samples: np.ndarray, null: NullModel) -> float:
    best = int(samples.max())
    if best <= 0:
        return 1.0
    pmf = null.pmf()
    cdf_below = float(pmf[:best].sum())
    cdf_below = min(max(cdf_below, 0.0), 1.0)
    return 1.0 - cdf_below ** len(samples)


def detect(
    samples: AccuracySampleSet, null: NullModel, alpha: float = DEFAULT_ALPHA
) -> VerificationVerdict:
    """Decide whether a sample population shows watermark carry-over."""
    if null.n_bits != samples.n_bits:
        raise NullMismatchError(
            f"null n_bits {null.n_bits} != samples n_bits {samples.n_bits}"
        )
    arr = np.asarray(samples.samples, dtype=np.int64)
    if arr.size < 1:
        raise TooFewSamplesError("max test needs at least one sample")

    # below 10 samples the mean test is unreliable and abstains (p=1)
    p_mean = _p_mean(arr, null) if arr.size >= 10 else 1.0
    p_max = _p_max(arr, null)
    p_ks = None
    if null.reference_samples is not None:
        _, p_ks = ks_2samp(
            arr / samples.n_bits,
            np.asarray(null.reference_samples.samples) / null.n_bits,
        )
    decision = "theft-detected" if min(p_mean, p_max) < alpha else "no-evidence"
    return VerificationVerdict(
        avg_bits=float(arr.mean()),
        best_bits=int(arr.max()),
        histogram_5bin=histogram(samples, "five-20pct"),
        histogram_10bin=histogram(samples, "ten-10pct"),
        p_mean=p_mean,
        p_max=p_max,
        p_ks=p_ks,
        decision=decision,
        alpha_used=alpha,
        sample_count=int(arr.size),
        n_bits=samples.n_bits,
        null_kind=null.kind,
        provenance=samples.label,
    )


def extract_and_detect(
    images: list[ImageBuffer],
    config: CodecConfig,
    payload: WatermarkPayload,
    null: NullModel | None = None,
    alpha: float = DEFAULT_ALPHA,
) -> VerificationVerdict:
    """Blind-extract every image, score against the payload, run detect.

    Below 10 images only the max-statistic test is in play (detect's mean
    test abstains), so small seizures still produce a usable verdict.
    """
    if len(images) < 1:
        raise TooFewSamplesError("extract_and_detect needs at least one image")
    counts = []
    for img in images:
        res = extract(img, config)
        counts.append(bit_accuracy(res, payload).correct_bits)
    samples = AccuracySampleSet(
        samples=np.asarray(counts, dtype=np.int64),
        n_bits=config.payload_length,
        label="extracted",
    )
    if null is None:
        null = NullModel.chance(config.payload_length)
    return detect(samples, null, alpha)


def match_authorization(
    extracted,
    authorized: WatermarkPayload,
    unauthorized: WatermarkPayload,
    threshold: float = MATCH_THRESHOLD,
) -> AuthorizationMatch:
    """Which registered payload does an extraction agree with?"""
    if authorized.bits == unauthorized.bits:
        raise IdenticalPayloadsError("authorized and unauthorized payloads are identical")
    acc_a = bit_accuracy(extracted, authorized)
    acc_u = bit_accuracy(extracted, unauthorized)
    a_hit = acc_a.acc >= threshold
    u_hit = acc_u.acc >= threshold
    if a_hit and (not u_hit or acc_a.acc > acc_u.acc):
        ruling = "authorized"
    elif u_hit and (not a_hit or acc_u.acc > acc_a.acc):
        ruling = "unauthorized"
    else:
        ruling = "indeterminate"
    return AuthorizationMatch(acc_vs_authorized=acc_a, acc_vs_unauthorized=acc_u, ruling=ruling)


def multi_artist_verify(
    images: list[ImageBuffer],
    records,
    null: NullModel | None = None,
    alpha: float = DEFAULT_ALPHA,
    groups: list[str] | None = None,
) -> dict[str, VerificationVerdict | Exception]:
    """Run extract_and_detect independently per registry record.

    Records need .artist_id, .codec (CodecConfig) and .payload attributes.
    When per-image ``groups`` labels are supplied, a record whose
    ``group_label`` matches some label only sees its own group's images
    (prompt-grouped verification); otherwise every record sees the shared
    set. One failing record reports its error without aborting the others.
    """
    if groups is not None and len(groups) != len(images):
        raise NullMismatchError("groups must label every image")
    verdicts: dict[str, VerificationVerdict | Exception] = {}
    for record in records:
        try:
            subset = images
            label = getattr(record, "group_label", "")
            if groups is not None and label and label in groups:
                subset = [im for im, g in zip(images, groups) if g == label]
            verdicts[record.artist_id] = extract_and_detect(
                subset, record.codec, record.payload, null=null, alpha=alpha
            )
        except Exception as exc:  # noqa: BLE001 - per-record isolation is the contract
            verdicts[record.artist_id] = exc
    return verdicts
