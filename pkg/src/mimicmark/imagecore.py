"""Image buffers, color conversion, quality metrics and file I/O.

Everything downstream (codecs, attacks, verification) works on the two
types defined here: 8-bit ``ImageBuffer`` at the API boundary and float64
``PlanarF64`` working planes inside the frequency-domain pipelines.
Quantization to 8 bits happens exactly once, when a plane is converted
back into a buffer.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptImageError,
    DimensionMismatchError,
    UnsupportedFormatError,
    WrongChannelCountError,
)

# BT.601 full-range luma weights; chroma planes are offset by 128 so an
# achromatic pixel maps to (Y, 128, 128).
_KR, _KG, _KB = 0.299, 0.587, 0.114
_CHROMA_OFFSET = 128.0

_SAVE_FORMATS = {"png", "jpeg"}
_LOAD_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit raster image, row-major, 1 (gray) or 3 (RGB) channels."""

    width: int
    height: int
    channels: int
    data: np.ndarray  # uint8, shape (height, width, channels)

    def __post_init__(self) -> None:
        if self.channels not in (1, 3):
            raise WrongChannelCountError(f"channels must be 1 or 3, got {self.channels}")
        if self.data.shape != (self.height, self.width, self.channels):
            raise DimensionMismatchError(
                f"data shape {self.data.shape} != {(self.height, self.width, self.channels)}"
            )
        if self.data.dtype != np.uint8:
            raise UnsupportedFormatError(f"samples must be uint8, got {self.data.dtype}")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        """Wrap an (H, W) or (H, W, C) uint8 array."""
        a = np.asarray(arr)
        if a.ndim == 2:
            a = a[:, :, None]
        a = np.ascontiguousarray(a.astype(np.uint8, copy=False))
        h, w, c = a.shape
        return cls(width=w, height=h, channels=c, data=a)

    def plane(self, index: int = 0) -> "PlanarF64":
        """One channel as a float64 working plane."""
        return PlanarF64.from_array(self.data[:, :, index].astype(np.float64))

    def same_shape(self, other: "ImageBuffer") -> bool:
        return (self.width, self.height, self.channels) == (
            other.width,
            other.height,
            other.channels,
        )


@dataclass(frozen=True)
class PlanarF64:
    """Single real-valued plane used by the transform pipelines."""

    width: int
    height: int
    data: np.ndarray  # float64, shape (height, width)

    def __post_init__(self) -> None:
        if self.data.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"plane shape {self.data.shape} != {(self.height, self.width)}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "PlanarF64":
        a = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
        h, w = a.shape
        return cls(width=w, height=h, data=a)


def plane_to_u8(plane: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round to nearest: the single quantization step."""
    return np.clip(np.rint(plane), 0.0, 255.0).astype(np.uint8)


def load_image(path: str | Path) -> ImageBuffer:
    """Load PNG/JPEG/BMP into an 8-bit RGB or grayscale buffer.

    16-bit sources are downconverted with rounding; palette and RGBA images
    are normalized to RGB.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    if p.suffix.lower() not in _LOAD_SUFFIXES:
        raise UnsupportedFormatError(f"unsupported file type: {p.suffix!r}")
    try:
        with Image.open(p) as im:
            im.load()
            if im.mode in ("I", "I;16", "I;16B", "I;16L"):
                arr16 = np.asarray(im, dtype=np.float64)
                arr = np.clip(np.rint(arr16 / 257.0), 0, 255).astype(np.uint8)
                return ImageBuffer.from_array(arr)
            if im.mode in ("L",):
                return ImageBuffer.from_array(np.asarray(im, dtype=np.uint8))
            im = im.convert("RGB")
            return ImageBuffer.from_array(np.asarray(im, dtype=np.uint8))
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"cannot decode {p}") from exc
    except OSError as exc:
        raise CorruptImageError(f"truncated or unreadable image {p}") from exc


def save_image(
    img: ImageBuffer,
    path: str | Path,
    format: str = "png",
    quality: int = 90,
) -> None:
    """Write PNG (lossless) or baseline JPEG at the given quality."""
    fmt = format.lower()
    if fmt not in _SAVE_FORMATS:
        raise UnsupportedFormatError(f"unsupported save format {format!r}")
    if fmt == "jpeg" and not (1 <= quality <= 100):
        raise UnsupportedFormatError(f"jpeg quality must be in 1..100, got {quality}")
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    pil = Image.fromarray(arr)
    try:
        if fmt == "png":
            pil.save(path, format="PNG")
        else:
            pil.save(path, format="JPEG", quality=quality, subsampling=0)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def encode_jpeg(img: ImageBuffer, quality: int) -> ImageBuffer:
    """Baseline JPEG encode/decode round trip in memory (used by attacks)."""
    if not (1 <= quality <= 100):
        raise UnsupportedFormatError(f"jpeg quality must be in 1..100, got {quality}")
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="JPEG", quality=quality, subsampling=0)
    buf.seek(0)
    with Image.open(buf) as im:
        decoded = np.asarray(im.convert("RGB") if img.channels == 3 else im.convert("L"))
    return ImageBuffer.from_array(decoded)


def rgb_to_yuv(img: ImageBuffer) -> tuple[PlanarF64, PlanarF64, PlanarF64]:
    """BT.601 full-range RGB -> (Y, U, V) float planes, chroma offset 128."""
    if img.channels != 3:
        raise WrongChannelCountError("rgb_to_yuv requires a 3-channel image")
    rgb = img.data.astype(np.float64)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = _KR * r + _KG * g + _KB * b
    u = (b - y) / (2.0 * (1.0 - _KB)) + _CHROMA_OFFSET
    v = (r - y) / (2.0 * (1.0 - _KR)) + _CHROMA_OFFSET
    return (
        PlanarF64.from_array(y),
        PlanarF64.from_array(u),
        PlanarF64.from_array(v),
    )


def yuv_to_rgb(y: PlanarF64, u: PlanarF64, v: PlanarF64) -> ImageBuffer:
    """Inverse BT.601 conversion, clamped to [0, 255] and rounded once."""
    if not (y.data.shape == u.data.shape == v.data.shape):
        raise DimensionMismatchError("Y/U/V planes must share dimensions")
    yy = y.data
    cb = u.data - _CHROMA_OFFSET
    cr = v.data - _CHROMA_OFFSET
    r = yy + 2.0 * (1.0 - _KR) * cr
    b = yy + 2.0 * (1.0 - _KB) * cb
    g = (yy - _KR * r - _KB * b) / _KG
    rgb = np.stack([r, g, b], axis=-1)
    return ImageBuffer.from_array(plane_to_u8(rgb))


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB; math.inf when images are identical."""
    if not a.same_shape(b):
        raise DimensionMismatchError("psnr requires equal dimensions and channels")
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 * 255.0 / mse)
