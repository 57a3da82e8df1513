"""Differentiable JPEG transform: BT.601 color conversion, 8x8 block DCT as
matrix products, quality-scaled quantization tables, and continuous rounding
surrogates. Pixels in, pixels out; there is no entropy coder or bitstream.

Rounding surrogates replace the hard quantizer:

* ``hard``        nearest integer, half away from zero (not differentiable)
* ``sinusoidal``  x - sin(2*pi*x) / (2*pi)
* ``harmonic``    x + sum_k (-1)^k sin(2*pi*k*x) / (k*pi), k = 1..terms
* ``identity``    x (no quantization error at all)

All surrogates fix integers exactly, so a fully quantized signal passes
through unchanged.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import torch

from .errors import DimensionError, DomainError

ROUNDING_MODES = ("hard", "sinusoidal", "harmonic", "identity")
HARMONIC_TERMS_DEFAULT = 5

# ITU-T81 Annex K reference tables (quality 50).
BASE_TABLE_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)
BASE_TABLE_CHROMA = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)

# BT.601 full-range RGB -> YCbCr on the [0, 255] scale.
_RGB_TO_YCC = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735892, -0.331264108, 0.5],
        [0.5, -0.418687589, -0.081312411],
    ],
    dtype=np.float64,
)
_YCC_OFFSET = np.array([0.0, 128.0, 128.0], dtype=np.float64)
_YCC_TO_RGB = np.linalg.inv(_RGB_TO_YCC)


@dataclass(frozen=True)
class QuantizationPair:
    """Luma/chroma step tables derived from one quality level."""

    luma: np.ndarray
    chroma: np.ndarray
    quality: int


def dct_matrix() -> np.ndarray:
    """Orthonormal 8x8 type-II DCT matrix; row 0 is the constant 1/sqrt(8)."""
    d = np.zeros((8, 8), dtype=np.float64)
    for k in range(8):
        scale = math.sqrt(1 / 8) if k == 0 else math.sqrt(2 / 8)
        for n in range(8):
            d[k, n] = scale * math.cos(math.pi * (2 * n + 1) * k / 16)
    return d


@lru_cache(maxsize=None)
def quality_to_tables(quality: int) -> QuantizationPair:
    """Scale the reference tables by the conventional quality rule."""
    if not 1 <= int(quality) <= 100:
        raise DomainError(f"quality must be in 1..100, got {quality}")
    quality = int(quality)
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality

    def scaled(base):
        return np.clip((base * scale + 50) // 100, 1, 255)

    return QuantizationPair(scaled(BASE_TABLE_LUMA), scaled(BASE_TABLE_CHROMA), quality)


def rho(x, mode: str, terms: int = HARMONIC_TERMS_DEFAULT):
    """Apply a rounding surrogate elementwise; numpy in, numpy out (torch idem)."""
    if mode not in ROUNDING_MODES:
        raise DomainError(f"unknown rounding mode {mode!r}")
    is_tensor = isinstance(x, torch.Tensor)
    lib = torch if is_tensor else np
    if not is_tensor:
        x = np.asarray(x, dtype=np.float64)

    if mode == "identity":
        return x * 1
    if mode == "hard":
        return lib.trunc(x + 0.5 * lib.sign(x))
    if mode == "sinusoidal":
        return x - lib.sin(2 * math.pi * x) / (2 * math.pi)
    if terms < 1:
        raise DomainError(f"harmonic terms must be >= 1, got {terms}")
    out = x * 1
    for k in range(1, terms + 1):
        out = out + ((-1) ** k) * lib.sin(2 * math.pi * k * x) / (k * math.pi)
    return out


def _blockify(plane: torch.Tensor) -> torch.Tensor:
    """(B, H, W) -> (B, nblocks, 8, 8), row-major block order."""
    b, h, w = plane.shape
    return plane.view(b, h // 8, 8, w // 8, 8).permute(0, 1, 3, 2, 4).reshape(b, -1, 8, 8)


def _unblockify(blocks: torch.Tensor, h: int, w: int) -> torch.Tensor:
    b = blocks.shape[0]
    return blocks.view(b, h // 8, w // 8, 8, 8).permute(0, 1, 3, 2, 4).reshape(b, h, w)


def rgb_to_ycbcr(x255: torch.Tensor) -> torch.Tensor:
    """(B, 3, H, W) in [0, 255] -> YCbCr on the same scale."""
    m = torch.as_tensor(_RGB_TO_YCC, dtype=x255.dtype, device=x255.device)
    off = torch.as_tensor(_YCC_OFFSET, dtype=x255.dtype, device=x255.device)
    return torch.einsum("ij,bjhw->bihw", m, x255) + off.view(1, 3, 1, 1)


def ycbcr_to_rgb(ycc: torch.Tensor) -> torch.Tensor:
    m = torch.as_tensor(_YCC_TO_RGB, dtype=ycc.dtype, device=ycc.device)
    off = torch.as_tensor(_YCC_OFFSET, dtype=ycc.dtype, device=ycc.device)
    return torch.einsum("ij,bjhw->bihw", m, ycc - off.view(1, 3, 1, 1))


def jpeg_transform(
    x: torch.Tensor, quality: int, mode: str = "sinusoidal", terms: int = HARMONIC_TERMS_DEFAULT
) -> torch.Tensor:
    """Quantization round trip for a (B, 3, H, W) tensor in [0, 1].

    4:4:4 throughout (no chroma subsampling). Differentiable w.r.t. the
    input for every mode except ``hard``.
    """
    if x.ndim != 4 or x.shape[1] != 3:
        raise DimensionError(f"expected (B, 3, H, W), got {tuple(x.shape)}")
    _, _, h, w = x.shape
    if h % 8 or w % 8:
        raise DimensionError(f"spatial dims must be multiples of 8, got {(h, w)}")

    tables = quality_to_tables(quality)
    d = torch.as_tensor(dct_matrix(), dtype=x.dtype, device=x.device)
    ycc = rgb_to_ycbcr(x * 255.0) - 128.0

    planes = []
    for c in range(3):
        q = torch.as_tensor(
            tables.luma if c == 0 else tables.chroma, dtype=x.dtype, device=x.device
        )
        blocks = _blockify(ycc[:, c])
        coeffs = d @ blocks @ d.T
        quantized = rho(coeffs / q, mode, terms) * q
        restored = d.T @ quantized @ d
        planes.append(_unblockify(restored, h, w))

    rgb = ycbcr_to_rgb(torch.stack(planes, dim=1) + 128.0) / 255.0
    return torch.clamp(rgb, 0.0, 1.0)


def djpeg_round_trip(
    img: np.ndarray, quality: int, mode: str = "sinusoidal", terms: int = HARMONIC_TERMS_DEFAULT
) -> np.ndarray:
    """Numpy (h, w, 3) wrapper around :func:`jpeg_transform`."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 3 or img.shape[-1] != 3:
        raise DimensionError(f"expected (h, w, 3) image, got shape {img.shape}")
    t = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))[None]
    with torch.no_grad():
        out = jpeg_transform(t, quality, mode, terms)
    return out[0].permute(1, 2, 0).numpy()
