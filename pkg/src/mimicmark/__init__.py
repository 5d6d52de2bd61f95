"""mimicmark: blind image watermarking + statistical mimicry-theft verification.

Embed multi-bit watermarks with classical frequency-domain codecs, simulate
the bit-accuracy degradation a watermark suffers when watermarked art is
used to fine-tune a style-mimicry model, and statistically verify from
many suspect outputs whether unauthorized fine-tuning occurred.
"""

__version__ = "0.1.0"

from .imagecore import ImageBuffer, PlanarF64, load_image, psnr, rgb_to_yuv, save_image, yuv_to_rgb
from .watermark import (
    BitAccuracy,
    CodecConfig,
    ExtractionResult,
    WatermarkPayload,
    bit_accuracy,
    derive_streams,
    embed,
    extract,
)
from .attacks import AttackSpec, AttackedImage, apply_attack, attack_then_extract, parse_attack_spec
from .channel import (
    AccuracySampleSet,
    ChannelMixture,
    ChannelModel,
    PromptSpec,
    fit_channel,
    mix,
    preset,
    preset_catalog,
    sample_accuracies,
    surrogate_degrade,
    two_stage,
)
from .verify import (
    AuthorizationMatch,
    NullModel,
    VerificationVerdict,
    detect,
    extract_and_detect,
    histogram,
    match_authorization,
    multi_artist_verify,
    summary,
)
from .registry import RegistryRecord, find_record, load_all, lookup, register

__all__ = [
    "__version__",
    "ImageBuffer",
    "PlanarF64",
    "load_image",
    "save_image",
    "psnr",
    "rgb_to_yuv",
    "yuv_to_rgb",
    "WatermarkPayload",
    "CodecConfig",
    "ExtractionResult",
    "BitAccuracy",
    "embed",
    "extract",
    "bit_accuracy",
    "derive_streams",
    "AttackSpec",
    "AttackedImage",
    "apply_attack",
    "attack_then_extract",
    "parse_attack_spec",
    "ChannelModel",
    "ChannelMixture",
    "AccuracySampleSet",
    "PromptSpec",
    "preset",
    "preset_catalog",
    "fit_channel",
    "sample_accuracies",
    "mix",
    "two_stage",
    "surrogate_degrade",
    "NullModel",
    "VerificationVerdict",
    "AuthorizationMatch",
    "detect",
    "extract_and_detect",
    "histogram",
    "summary",
    "match_authorization",
    "multi_artist_verify",
    "RegistryRecord",
    "register",
    "lookup",
    "load_all",
    "find_record",
]
