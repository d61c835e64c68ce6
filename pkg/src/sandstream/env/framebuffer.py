"""Virtual framebuffer: plain RGBA8 pixels plus frame bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_WIDTH = 1280
DEFAULT_HEIGHT = 720


@dataclass
class VirtualFramebuffer:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 4) uint8, row-major RGBA
    frame_index: int
    timestamp_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.height, self.width, 4):
            raise ValueError(
                f"pixels shape {self.pixels.shape} != ({self.height}, {self.width}, 4)"
            )
        if self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be uint8 RGBA")

    @classmethod
    def blank(cls, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT) -> "VirtualFramebuffer":
        return cls(
            width=width,
            height=height,
            pixels=np.zeros((height, width, 4), dtype=np.uint8),
            frame_index=0,
        )

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def content_hash(self) -> int:
        import zlib

        return zlib.crc32(self.tobytes())
