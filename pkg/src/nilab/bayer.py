"""Bayer mosaic layouts and packed raw tensors.

A raw frame is a single-channel h x w mosaic in [0, 1]. Packing folds each
2x2 cell into 4 channels at half resolution, reading the cell row-major, so
channel k holds site (k // 2, k % 2). Both supported patterns are described
by their 2x2 color layout (0=R, 1=G, 2=B).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError

R, G, B = 0, 1, 2


class BayerPattern(Enum):
    RGGB = "RGGB"
    GBRG = "GBRG"

    @property
    def layout(self) -> np.ndarray:
        """2x2 array of color indices at each cell site."""
        return np.array(_LAYOUTS[self], dtype=np.int64)


_LAYOUTS = {
    BayerPattern.RGGB: [[R, G], [G, B]],
    BayerPattern.GBRG: [[G, B], [R, G]],
}


@dataclass
class RawBayerFrame:
    """Full-resolution mosaic, values in [0, 1], even dimensions."""

    values: np.ndarray
    pattern: BayerPattern

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise DimensionError(f"raw frame must be 2-D, got shape {v.shape}")
        if v.shape[0] % 2 or v.shape[1] % 2:
            raise DimensionError(f"raw frame dimensions must be even, got {v.shape}")
        self.values = v

    @property
    def shape(self):
        return self.values.shape


@dataclass
class RawBayerStack:
    """Packed (n, h/2, w/2, 4) tensor of one or more mosaics."""

    values: np.ndarray
    pattern: BayerPattern

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 4 or v.shape[-1] != 4:
            raise DimensionError(f"stack must be (n, h/2, w/2, 4), got shape {v.shape}")
        self.values = v

    @property
    def shape(self):
        return self.values.shape


def pack_bayer(frame: RawBayerFrame) -> RawBayerStack:
    """Fold a mosaic into 4 half-resolution channels, cell-site row-major."""
    v = frame.values
    planes = [v[i::2, j::2] for i in (0, 1) for j in (0, 1)]
    return RawBayerStack(np.stack(planes, axis=-1)[None], frame.pattern)


def unpack_bayer(stack: RawBayerStack, index: int = 0) -> RawBayerFrame:
    """Inverse of :func:`pack_bayer` for one stack entry."""
    v = stack.values[index]
    hh, ww, _ = v.shape
    frame = np.empty((2 * hh, 2 * ww), dtype=v.dtype)
    for k in range(4):
        frame[k // 2 :: 2, k % 2 :: 2] = v[..., k]
    return RawBayerFrame(frame, stack.pattern)


def color_site_masks(pattern: BayerPattern, height: int, width: int) -> np.ndarray:
    """(3, h, w) binary masks marking where each color is measured."""
    if height % 2 or width % 2:
        raise DimensionError(f"mask dimensions must be even, got {(height, width)}")
    layout = pattern.layout
    tiled = np.tile(layout, (height // 2, width // 2))
    return np.stack([(tiled == c).astype(np.float32) for c in (R, G, B)])


def mosaic_rgb(rgb: np.ndarray, pattern: BayerPattern) -> np.ndarray:
    """Sample an (h, w, 3) image down to its single measured color per site."""
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise DimensionError(f"expected (h, w, 3) image, got shape {rgb.shape}")
    masks = color_site_masks(pattern, rgb.shape[0], rgb.shape[1])
    return np.einsum("chw,hwc->hw", masks, rgb.astype(np.float32))


def channel_colors(pattern: BayerPattern) -> np.ndarray:
    """Color index of each packed channel, in packing order."""
    return pattern.layout.reshape(-1)
