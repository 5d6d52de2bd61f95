"""Image-level attack suite used to benchmark watermark robustness.

Every attack returns an image with the *source* dimensions so extraction
grids stay aligned: crops are upscaled back, rotations are resampled in
place. Geometric attacks therefore act as resampling noise rather than
desynchronization. All attacks are deterministic given (image, spec, seed).

Canonical string forms (CLI / service): ``jpeg:q=75``, ``blur:sigma=1.0,kernel=5``,
``brightness:f=1.1``, ``contrast:f=1.1``, ``hue:deg=10``, ``crop:keep=0.98``,
``resize:scale=0.75``, ``rotation:deg=0.5``, ``meme:band=0.12``,
``overlay:method=dwt-dct,key=<hex>[,payload=<hex>]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameterError, CapacityExceededError
from .imagecore import ImageBuffer, encode_jpeg, plane_to_u8, psnr, rgb_to_yuv, yuv_to_rgb
from . import watermark as wm

ATTACK_KINDS = (
    "jpeg",
    "gaussian_blur",
    "brightness",
    "contrast",
    "hue",
    "center_crop",
    "resize",
    "rotation",
    "meme",
    "overlay",
)

_ALIASES = {"blur": "gaussian_blur", "crop": "center_crop"}

# Declared default parameters for the benchmark attack battery. The source
# material reports attack names without parameters, so these are the
# toolkit's documented choices.
DEFAULT_ATTACK_BATTERY: tuple[tuple[str, str], ...] = (
    ("jpeg", "jpeg:q=75"),
    ("gaussian_blur", "blur:sigma=1.0,kernel=5"),
    ("brightness", "brightness:f=1.1"),
    ("contrast", "contrast:f=1.1"),
    ("hue", "hue:deg=10"),
    ("center_crop", "crop:keep=0.98"),
    ("resize", "resize:scale=0.75"),
    ("rotation", "rotation:deg=0.5"),
    ("meme", "meme:band=0.12"),
)


@dataclass(frozen=True)
class AttackSpec:
    """One attack with parameters; overlay carries a codec config + payload."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in ATTACK_KINDS:
            raise BadParameterError(f"unknown attack kind {self.kind!r}")
        _VALIDATORS[kind](self.params)

    def canonical(self) -> str:
        if self.kind == "overlay":
            cfg: wm.CodecConfig = self.params["config"]
            s = f"overlay:method={cfg.method},key={cfg.key.hex()}"
            if "payload" in self.params:
                s += f",payload={self.params['payload'].to_hex()}"
            return s
        name, keys = _CANONICAL[self.kind]
        parts = ",".join(f"{k}={self.params[p]}" for k, p in keys)
        return f"{name}:{parts}"


@dataclass(frozen=True)
class AttackedImage:
    image: ImageBuffer
    applied: AttackSpec
    psnr_vs_source: float


def _positive(name):
    def check(params, key=name):
        v = params.get(key)
        if v is None or not (float(v) > 0):
            raise BadParameterError(f"{key} must be positive")
    return check


def _v_jpeg(p):
    q = p.get("q")
    if q is None or not (1 <= int(q) <= 100):
        raise BadParameterError("jpeg quality must be in 1..100")


def _v_blur(p):
    if not (float(p.get("sigma", 0)) > 0):
        raise BadParameterError("blur sigma must be > 0")
    k = int(p.get("kernel", 0))
    if k < 1 or k % 2 == 0:
        raise BadParameterError("blur kernel must be odd and >= 1")


def _v_hue(p):
    d = float(p.get("deg", 1e9))
    if not (-180.0 <= d <= 180.0):
        raise BadParameterError("hue degrees must be in [-180, 180]")


def _v_crop(p):
    r = float(p.get("keep", 0))
    if not (0.0 < r <= 1.0):
        raise BadParameterError("crop keep ratio must be in (0, 1]")


def _v_rotation(p):
    float(p.get("deg", 0.0))


def _v_meme(p):
    r = float(p.get("band", 0))
    if not (0.0 < r <= 0.3):
        raise BadParameterError("meme band ratio must be in (0, 0.3]")


def _v_overlay(p):
    cfg = p.get("config")
    if not isinstance(cfg, wm.CodecConfig):
        raise BadParameterError("overlay attack requires a CodecConfig")
    payload = p.get("payload")
    if payload is not None and len(payload) != cfg.payload_length:
        raise BadParameterError("overlay payload length does not match its config")


_VALIDATORS = {
    "jpeg": _v_jpeg,
    "gaussian_blur": _v_blur,
    "brightness": _positive("f"),
    "contrast": _positive("f"),
    "hue": _v_hue,
    "center_crop": _v_crop,
    "resize": _positive("scale"),
    "rotation": _v_rotation,
    "meme": _v_meme,
    "overlay": _v_overlay,
}

_CANONICAL = {
    "jpeg": ("jpeg", [("q", "q")]),
    "gaussian_blur": ("blur", [("sigma", "sigma"), ("kernel", "kernel")]),
    "brightness": ("brightness", [("f", "f")]),
    "contrast": ("contrast", [("f", "f")]),
    "hue": ("hue", [("deg", "deg")]),
    "center_crop": ("crop", [("keep", "keep")]),
    "resize": ("resize", [("scale", "scale")]),
    "rotation": ("rotation", [("deg", "deg")]),
    "meme": ("meme", [("band", "band")]),
}


def parse_attack_spec(text: str, seed: int | None = None) -> AttackSpec:
    """Parse the canonical ``kind:key=value,...`` string form."""
    if ":" not in text:
        raise BadParameterError(f"attack spec {text!r} must look like 'kind:key=value'")
    name, _, rest = text.partition(":")
    name = _ALIASES.get(name.strip(), name.strip())
    raw: dict[str, str] = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if "=" not in item:
            raise BadParameterError(f"malformed attack parameter {item!r}")
        k, _, v = item.partition("=")
        raw[k.strip()] = v.strip()
    if name == "overlay":
        method = raw.get("method", "dwt-dct")
        key_hex = raw.get("key")
        if key_hex is None:
            raise BadParameterError("overlay spec requires key=<hex>")
        cfg = wm.CodecConfig(method=method, key=bytes.fromhex(key_hex))
        params: dict = {"config": cfg}
        if "payload" in raw:
            params["payload"] = wm.WatermarkPayload.from_hex(raw["payload"])
        return AttackSpec(kind="overlay", params=params, seed=seed)
    casts = {
        "jpeg": {"q": int},
        "gaussian_blur": {"sigma": float, "kernel": int},
        "brightness": {"f": float},
        "contrast": {"f": float},
        "hue": {"deg": float},
        "center_crop": {"keep": float},
        "resize": {"scale": float},
        "rotation": {"deg": float},
        "meme": {"band": float},
    }.get(name)
    if casts is None:
        raise BadParameterError(f"unknown attack kind {name!r}")
    params = {}
    for k, v in raw.items():
        if k not in casts:
            raise BadParameterError(f"unknown parameter {k!r} for attack {name}")
        params[k] = casts[k](v)
    if name == "gaussian_blur":
        params.setdefault("sigma", 1.0)
        params.setdefault("kernel", 5)
    return AttackSpec(kind=name, params=params, seed=seed)


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centered bilinear resize of an (H, W[, C]) float array."""
    h, w = arr.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    if arr.ndim == 3:
        fy = fy[:, :, None]
        fx = fx[:, :, None]
    a = arr[np.ix_(y0, x0)]
    b = arr[np.ix_(y0, x1)]
    c = arr[np.ix_(y1, x0)]
    d = arr[np.ix_(y1, x1)]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


def _bilinear_sample(arr: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample float array at fractional coordinates with edge clamping."""
    h, w = arr.shape[:2]
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    if arr.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    return (
        arr[y0, x0] * (1 - fy) * (1 - fx)
        + arr[y0, x1] * (1 - fy) * fx
        + arr[y1, x0] * fy * (1 - fx)
        + arr[y1, x1] * fy * fx
    )


def _gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve_reflect(plane: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    half = len(kernel) // 2
    pad = [(0, 0)] * plane.ndim
    pad[axis] = (half, half)
    padded = np.pad(plane, pad, mode="reflect")
    out = np.zeros_like(plane, dtype=np.float64)
    for i, kv in enumerate(kernel):
        sl = [slice(None)] * plane.ndim
        sl[axis] = slice(i, i + plane.shape[axis])
        out += kv * padded[tuple(sl)]
    return out


def gaussian_blur(arr: np.ndarray, sigma: float, kernel: int) -> np.ndarray:
    k = _gaussian_kernel(sigma, kernel)
    return _convolve_reflect(_convolve_reflect(arr, k, 0), k, 1)


def _apply_pixels(img: ImageBuffer, fn) -> ImageBuffer:
    out = fn(img.data.astype(np.float64))
    return ImageBuffer.from_array(plane_to_u8(out))


def apply_attack(img: ImageBuffer, spec: AttackSpec) -> AttackedImage:
    """Apply one attack; output dimensions always equal the input's."""
    kind = spec.kind
    p = spec.params
    if kind == "jpeg":
        out = encode_jpeg(img, int(p["q"]))
    elif kind == "gaussian_blur":
        out = _apply_pixels(img, lambda a: gaussian_blur(a, float(p["sigma"]), int(p["kernel"])))
    elif kind == "brightness":
        out = _apply_pixels(img, lambda a: a * float(p["f"]))
    elif kind == "contrast":
        out = _apply_pixels(img, lambda a: (a - 128.0) * float(p["f"]) + 128.0)
    elif kind == "hue":
        out = _hue_rotate(img, float(p["deg"]))
    elif kind == "center_crop":
        out = _center_crop(img, float(p["keep"]))
    elif kind == "resize":
        out = _resize_roundtrip(img, float(p["scale"]))
    elif kind == "rotation":
        out = _rotate(img, float(p["deg"]))
    elif kind == "meme":
        out = _meme_bands(img, float(p["band"]))
    elif kind == "overlay":
        cfg: wm.CodecConfig = p["config"]
        payload = p.get("payload")
        if payload is None:
            payload = wm.WatermarkPayload.random(
                cfg.payload_length, seed=spec.seed if spec.seed is not None else 0
            )
        try:
            out, _ = wm.embed(img, payload, cfg)
        except CapacityExceededError as exc:
            raise CapacityExceededError(f"overlay: {exc}") from exc
    else:  # pragma: no cover
        raise BadParameterError(kind)
    return AttackedImage(image=out, applied=spec, psnr_vs_source=psnr(img, out))


def _hue_rotate(img: ImageBuffer, degrees: float) -> ImageBuffer:
    if img.channels != 3:
        return img
    y, u, v = rgb_to_yuv(img)
    cu = u.data - 128.0
    cv = v.data - 128.0
    th = math.radians(degrees)
    ru = cu * math.cos(th) - cv * math.sin(th) + 128.0
    rv = cu * math.sin(th) + cv * math.cos(th) + 128.0
    return yuv_to_rgb(y, type(u).from_array(ru), type(v).from_array(rv))


def _center_crop(img: ImageBuffer, keep_area: float) -> ImageBuffer:
    if keep_area == 1.0:
        return img
    lin = math.sqrt(keep_area)
    ch = max(2, round(img.height * lin))
    cw = max(2, round(img.width * lin))
    y0 = (img.height - ch) // 2
    x0 = (img.width - cw) // 2
    crop = img.data[y0 : y0 + ch, x0 : x0 + cw].astype(np.float64)
    back = bilinear_resize(crop, img.height, img.width)
    return ImageBuffer.from_array(plane_to_u8(back))


def _resize_roundtrip(img: ImageBuffer, scale: float) -> ImageBuffer:
    if scale == 1.0:
        return img
    h2 = max(2, round(img.height * scale))
    w2 = max(2, round(img.width * scale))
    small = bilinear_resize(img.data.astype(np.float64), h2, w2)
    back = bilinear_resize(small, img.height, img.width)
    return ImageBuffer.from_array(plane_to_u8(back))


def _rotate(img: ImageBuffer, degrees: float) -> ImageBuffer:
    if degrees % 360 == 0:
        return img
    th = math.radians(degrees)
    cy = (img.height - 1) / 2.0
    cx = (img.width - 1) / 2.0
    yy, xx = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    dy = yy - cy
    dx = xx - cx
    src_y = cy + dy * math.cos(th) - dx * math.sin(th)
    src_x = cx + dy * math.sin(th) + dx * math.cos(th)
    out = _bilinear_sample(img.data.astype(np.float64), src_y, src_x)
    return ImageBuffer.from_array(plane_to_u8(out))


def _meme_bands(img: ImageBuffer, band_ratio: float) -> ImageBuffer:
    band = max(1, round(img.height * band_ratio))
    out = img.data.copy()
    out[:band] = 255
    out[img.height - band :] = 255
    return ImageBuffer.from_array(out)


def attack_then_extract(
    img_w: ImageBuffer,
    spec: AttackSpec,
    config: wm.CodecConfig,
    payload: wm.WatermarkPayload,
) -> wm.BitAccuracy:
    """Convenience composition: attack, extract, score against the payload."""
    if spec.kind == "overlay":
        over: wm.CodecConfig = spec.params["config"]
        if over.method == config.method and over.key == config.key:
            raise BadParameterError(
                "overlay config must differ from the victim codec in key or method"
            )
    attacked = apply_attack(img_w, spec)
    result = wm.extract(attacked.image, config)
    return wm.bit_accuracy(result, payload)
