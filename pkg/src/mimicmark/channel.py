"""Calibrated stochastic surrogate for the mimicry fine-tune pipeline.

Real fine-tuning is out of scope; instead, each shipped preset is a
distribution over per-image correct-bit counts calibrated against one row
of the bundled extraction-study calibration tables. Two model kinds share
one interface:

* ``beta-binomial`` — two-parameter family used for fitted/user channels
  and for verification nulls.
* ``binned`` — the preset form: bin masses are pinned exactly to the
  source row's proportions and the within-bin mass is exponentially
  tilted so the distribution mean equals the row's avg(bits), with the
  top bin truncated at the row's best(bits). The calibration rows are
  *under*-dispersed relative to a binomial, which no beta-binomial can
  reproduce, so presets do not force the beta-binomial shape; the
  moment-matched (alpha, beta) equivalents are still carried for
  reporting and refitting.

An image-level surrogate (``surrogate_degrade``) stands in for the
generation pipeline so end-to-end tests can run on real pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import (
    BadParameterError,
    BitLengthMismatchError,
    DegenerateHistogramError,
    MimicmarkError,
    UnknownPresetError,
)
from .imagecore import ImageBuffer, encode_jpeg, plane_to_u8
from .attacks import bilinear_resize
from .stats import betabinom_params_from_moments, betabinom_pmf_vector

FIVE_BIN_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
TEN_BIN_EDGES = tuple(i / 10 for i in range(11))

# Degradation stacks standing in for fine-tune + generation. Parameters are
# (down/up scale, additive noise sigma, jpeg quality, luma jitter spread);
# 'standard' is tuned so corpus-mean extraction accuracy of the default QIM
# codec lands in the 55-70% band.
SURROGATE_STACKS = {
    "mild": {"scale": 0.70, "noise": 3.0, "jpeg_q": 75, "jitter": 0.001},
    "standard": {"scale": 0.31, "noise": 16.0, "jpeg_q": 26, "jitter": 0.002},
    "harsh": {"scale": 0.25, "noise": 22.0, "jpeg_q": 20, "jitter": 0.003},
}


def bin_supports(n_bits: int, edges: tuple[float, ...]) -> list[list[int]]:
    """Integer correct-bit values per accuracy bin.

    Bins are left-closed right-open on acc = K/n_bits, except the last,
    which is closed.
    """
    sup: list[list[int]] = []
    n_bins = len(edges) - 1
    for b in range(n_bins):
        lo, hi = edges[b], edges[b + 1]
        ks = [
            k
            for k in range(n_bits + 1)
            if (lo <= k / n_bits < hi) or (b == n_bins - 1 and k == n_bits)
        ]
        sup.append(ks)
    return sup


def _tilted_pmf(
    n_bits: int,
    bin_counts: tuple[int, ...],
    avg_bits: float,
    best_bits: int,
    edges: tuple[float, ...],
) -> np.ndarray:
    """Bin-anchored pmf: exact bin masses, within-bin exponential tilt
    solved so the mean equals avg_bits; top active bin truncated at best."""
    counts = np.asarray(bin_counts, dtype=np.float64)
    props = counts / counts.sum()
    sup = bin_supports(n_bits, edges)
    top = int(np.max(np.nonzero(counts)[0]))
    sup[top] = [k for k in sup[top] if k <= best_bits]
    if best_bits not in sup[top]:
        raise MimicmarkError(f"best {best_bits} outside its bin {sup[top]}")
    lo_mean = sum(p * min(s) for p, s in zip(props, sup) if p > 0)
    hi_mean = sum(p * max(s) for p, s in zip(props, sup) if p > 0)
    if not (lo_mean - 1e-9 <= avg_bits <= hi_mean + 1e-9):
        raise MimicmarkError(
            f"avg {avg_bits} infeasible for bins (range {lo_mean:.2f}..{hi_mean:.2f})"
        )

    def mean_at(lam: float) -> float:
        m = 0.0
        for p, s in zip(props, sup):
            if p <= 0:
                continue
            ks = np.asarray(s, dtype=np.float64)
            w = np.exp(lam * (ks - ks.max()))
            m += p * float((ks * w).sum() / w.sum())
        return m

    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_at(mid) < avg_bits:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    pmf = np.zeros(n_bits + 1)
    for p, s in zip(props, sup):
        if p <= 0:
            continue
        ks = np.asarray(s, dtype=np.float64)
        w = np.exp(lam * (ks - ks.max()))
        w /= w.sum()
        pmf[np.asarray(s, dtype=int)] += p * w
    return pmf


@dataclass(frozen=True)
class PromptSpec:
    """Generation-prompt metadata attached to simulated samples."""

    content_prompt: str
    special_tag: str
    group_label: str = ""

    def __post_init__(self) -> None:
        if not self.special_tag:
            raise MimicmarkError("special_tag must be nonempty for tag-conditioned simulation")


@dataclass(frozen=True)
class ChannelModel:
    """Distribution over per-image correct-bit counts."""

    n_bits: int
    alpha: float
    beta: float
    label: str = "user"
    provenance: str = "user"  # paper-table | paper-figure | fitted | user
    pmf: np.ndarray | None = None  # set for binned (preset) models
    source: str = ""
    avg_bits: float | None = None
    best_bits: int | None = None

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.beta <= 0:
            raise BadParameterError("alpha and beta must be positive")
        if self.n_bits <= 0:
            raise BadParameterError("n_bits must be positive")

    @property
    def mean_accuracy(self) -> float:
        if self.pmf is not None:
            return float(np.dot(np.arange(self.n_bits + 1), self.pmf)) / self.n_bits
        return self.alpha / (self.alpha + self.beta)

    @property
    def mean_bits(self) -> float:
        return self.mean_accuracy * self.n_bits

    def full_pmf(self) -> np.ndarray:
        if self.pmf is not None:
            return self.pmf
        return betabinom_pmf_vector(self.n_bits, self.alpha, self.beta)

    def moments(self) -> tuple[float, float]:
        p = self.full_pmf()
        ks = np.arange(self.n_bits + 1)
        m = float(np.dot(ks, p))
        v = float(np.dot((ks - m) ** 2, p))
        return m, v


@dataclass(frozen=True)
class ChannelMixture:
    """Two-component mixture: watermarked model with probability q, clean otherwise."""

    model_w: ChannelModel
    model_clean: ChannelModel
    p_watermarked: float

    def __post_init__(self) -> None:
        if self.model_w.n_bits != self.model_clean.n_bits:
            raise BitLengthMismatchError("mixture components must share n_bits")
        if not (0.0 <= self.p_watermarked <= 1.0):
            raise BadParameterError("p_watermarked must be in [0, 1]")

    @property
    def n_bits(self) -> int:
        return self.model_w.n_bits

    @property
    def label(self) -> str:
        return f"mix({self.model_w.label},{self.model_clean.label},p={self.p_watermarked})"

    @property
    def provenance(self) -> str:
        return "fitted"

    def full_pmf(self) -> np.ndarray:
        q = self.p_watermarked
        return q * self.model_w.full_pmf() + (1 - q) * self.model_clean.full_pmf()

    @property
    def mean_bits(self) -> float:
        return float(np.dot(np.arange(self.n_bits + 1), self.full_pmf()))


@dataclass(frozen=True)
class AccuracySampleSet:
    """Per-image correct-bit counts plus provenance metadata."""

    samples: np.ndarray  # int64 counts in [0, n_bits]
    n_bits: int
    seed: int | None = None
    groups: tuple[str, ...] | None = None
    label: str = ""

    def __post_init__(self) -> None:
        s = np.asarray(self.samples)
        if s.size and (s.min() < 0 or s.max() > self.n_bits):
            raise BadParameterError("sample counts must lie in [0, n_bits]")
        if self.groups is not None and len(self.groups) != s.size:
            raise BadParameterError("group labels must match sample count")

    def __len__(self) -> int:
        return int(np.asarray(self.samples).size)

    @classmethod
    def from_accuracies(cls, accs, n_bits: int, **kw) -> "AccuracySampleSet":
        counts = np.rint(np.asarray(accs, dtype=np.float64) * n_bits).astype(np.int64)
        return cls(samples=counts, n_bits=n_bits, **kw)

    def to_dict(self) -> dict:
        d = {
            "n_bits": self.n_bits,
            "seed": self.seed,
            "samples": [int(k) for k in np.asarray(self.samples)],
        }
        if self.groups is not None:
            d["groups"] = list(self.groups)
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AccuracySampleSet":
        return cls(
            samples=np.asarray(d["samples"], dtype=np.int64),
            n_bits=int(d["n_bits"]),
            seed=d.get("seed"),
            groups=tuple(d["groups"]) if d.get("groups") else None,
            label=d.get("label", ""),
        )


def _load_catalog() -> dict:
    with resources.files("mimicmark").joinpath("presets.json").open("r") as fh:
        return json.load(fh)


_CATALOG_CACHE: dict | None = None


def preset_catalog() -> dict:
    """preset-id -> raw catalog entry (bins, avg/best, equivalents, source)."""
    global _CATALOG_CACHE
    if _CATALOG_CACHE is None:
        _CATALOG_CACHE = _load_catalog()
    return _CATALOG_CACHE


def preset(name: str) -> ChannelModel:
    """A shipped calibrated channel."""
    cat = preset_catalog()
    if name not in cat:
        raise UnknownPresetError(
            f"unknown preset {name!r}; available: {', '.join(sorted(cat))}"
        )
    e = cat[name]
    edges = FIVE_BIN_EDGES if len(e["bin_counts"]) == 5 else TEN_BIN_EDGES
    pmf = _tilted_pmf(
        e["n_bits"], tuple(e["bin_counts"]), e["avg_bits"], e["best_bits"], edges
    )
    return ChannelModel(
        n_bits=e["n_bits"],
        alpha=e["alpha"],
        beta=e["beta"],
        label=name,
        provenance=e["provenance"],
        pmf=pmf,
        source=e["source"],
        avg_bits=e["avg_bits"],
        best_bits=e["best_bits"],
    )


def fit_channel(histogram, n_bits: int, edges: tuple[float, ...] | None = None) -> ChannelModel:
    """Fit a beta-binomial to bin counts over accuracy ranges.

    Moment matching on bin midpoints seeds the fit; a coarse grid search
    around the seed then minimizes chi-square distance between model bin
    mass and observed proportions.
    """
    counts = np.asarray(histogram, dtype=np.float64)
    if counts.sum() <= 0:
        raise DegenerateHistogramError("histogram is empty")
    if edges is None:
        edges = FIVE_BIN_EDGES if len(counts) == 5 else TEN_BIN_EDGES
    if len(edges) != len(counts) + 1:
        raise BadParameterError("edges must bound every bin")
    props = counts / counts.sum()
    active = np.nonzero(props)[0]
    if len(active) == 1 and active[0] in (0, len(props) - 1):
        raise DegenerateHistogramError("all mass in one extreme bin")

    mids = np.array([(edges[i] + edges[i + 1]) / 2 for i in range(len(counts))]) * n_bits
    mean = float(np.dot(props, mids))
    var = float(np.dot(props, (mids - mean) ** 2))
    a0, b0 = betabinom_params_from_moments(n_bits, mean, var)

    sup = bin_supports(n_bits, edges)
    best = (np.inf, a0, b0)
    for fa in np.geomspace(0.25, 4.0, 17):
        for fb in np.geomspace(0.25, 4.0, 17):
            a, b = a0 * fa, b0 * fb
            pmf = betabinom_pmf_vector(n_bits, a, b)
            mass = np.array([pmf[s].sum() for s in sup])
            denom = np.where(props > 0, props, 1.0)
            stat = float(np.sum((mass - props) ** 2 / denom) + mass[props == 0].sum())
            if stat < best[0]:
                best = (stat, a, b)
    _, a, b = best
    return ChannelModel(n_bits=n_bits, alpha=a, beta=b, label="fitted", provenance="fitted")


def sample_accuracies(
    model: ChannelModel | ChannelMixture,
    count: int,
    seed: int,
    prompt: PromptSpec | None = None,
) -> AccuracySampleSet:
    """``count`` i.i.d. draws of correct-bit counts, deterministic under seed."""
    if count < 1:
        raise BadParameterError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(model, ChannelMixture):
        pick_w = rng.random(count) < model.p_watermarked
        out = np.empty(count, dtype=np.int64)
        out[pick_w] = _draw(model.model_w, int(pick_w.sum()), rng)
        out[~pick_w] = _draw(model.model_clean, int((~pick_w).sum()), rng)
    else:
        out = _draw(model, count, rng)
    groups = (prompt.group_label,) * count if prompt is not None else None
    return AccuracySampleSet(
        samples=out, n_bits=model.n_bits, seed=seed, groups=groups, label=model.label
    )


def _draw(model: ChannelModel, count: int, rng: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if model.pmf is not None:
        return rng.choice(model.n_bits + 1, size=count, p=model.pmf).astype(np.int64)
    p = rng.beta(model.alpha, model.beta, size=count)
    return rng.binomial(model.n_bits, p).astype(np.int64)


def mix(
    model_w: ChannelModel, model_clean: ChannelModel, p_watermarked: float
) -> ChannelMixture:
    """Mixture channel for partially-watermarked training sets."""
    return ChannelMixture(model_w=model_w, model_clean=model_clean, p_watermarked=p_watermarked)


# Mean shift of the two-stage row relative to the single-stage row.
_TWO_STAGE_LABEL = {"t3-normal-finetune": "t3-two-stage-finetune"}
_TWO_STAGE_MEAN_RATIO = 19.02 / 19.96


def two_stage(model: ChannelModel) -> ChannelModel:
    """Degrade a channel the way a second fine-tuning round does."""
    mapped = _TWO_STAGE_LABEL.get(model.label)
    if mapped is not None:
        return preset(mapped)
    mean, var = model.moments()
    ref_normal = preset("t3-normal-finetune").moments()
    ref_two = preset("t3-two-stage-finetune").moments()
    new_mean = mean * _TWO_STAGE_MEAN_RATIO
    new_var = var * (ref_two[1] / ref_normal[1])
    a, b = betabinom_params_from_moments(model.n_bits, new_mean, new_var)
    return ChannelModel(
        n_bits=model.n_bits,
        alpha=a,
        beta=b,
        label=f"two-stage({model.label})",
        provenance="fitted",
    )


def surrogate_degrade(img_w: ImageBuffer, severity: str = "standard", seed: int = 0) -> ImageBuffer:
    """Deterministic image-space stand-in for the fine-tune + generate loop.

    Fixed stack: bilinear down/up scaling, additive Gaussian noise, baseline
    JPEG recompression and a slight seeded luma jitter.
    """
    if severity not in SURROGATE_STACKS:
        raise BadParameterError(f"severity must be one of {sorted(SURROGATE_STACKS)}")
    cfg = SURROGATE_STACKS[severity]
    rng = np.random.default_rng(seed)

    arr = img_w.data.astype(np.float64)
    h2 = max(2, round(img_w.height * cfg["scale"]))
    w2 = max(2, round(img_w.width * cfg["scale"]))
    arr = bilinear_resize(bilinear_resize(arr, h2, w2), img_w.height, img_w.width)
    arr = arr + rng.normal(0.0, cfg["noise"], arr.shape)
    jitter = 1.0 + rng.normal(0.0, cfg["jitter"])
    arr = arr * jitter
    degraded = ImageBuffer.from_array(plane_to_u8(arr))
    return encode_jpeg(degraded, cfg["jpeg_q"])
