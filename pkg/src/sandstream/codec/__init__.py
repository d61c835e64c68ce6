from .tiles import (
    TILE,
    ContentClass,
    DirtyMap,
    classify_tile,
    diff_frame,
    tile_grid,
)
from .config import ControllerMode, EncoderConfig, adapt_quality
from .regions import (
    CODEC_DELTA_DCT,
    CODEC_PALETTE_RLE,
    CODEC_QUANT_DCT,
    EncodedRegion,
    decode_region,
    encode_keyframe,
    encode_region,
)

__all__ = [
    "CODEC_DELTA_DCT",
    "CODEC_PALETTE_RLE",
    "CODEC_QUANT_DCT",
    "ContentClass",
    "ControllerMode",
    "DirtyMap",
    "EncodedRegion",
    "EncoderConfig",
    "TILE",
    "adapt_quality",
    "classify_tile",
    "decode_region",
    "diff_frame",
    "encode_keyframe",
    "encode_region",
    "tile_grid",
]
