"""Reference imaging pipeline: white balance, bilinear demosaic, color matrix,
sRGB transfer. Produces the training targets for the learned developers.

All stages clip (never rescale) at their boundaries, so saturated content
stays saturated instead of shifting the whole tone scale.
"""

import numpy as np
from scipy.ndimage import convolve

from .bayer import RawBayerStack, channel_colors, color_site_masks, unpack_bayer
from .errors import DomainError, NumericError

# Rec.601 luma weights, used for patch statistics and grayscale reduction.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float32)

# Bilinear interpolation kernels over sparse color planes: green sites form a
# quincunx (plus-shaped neighbors); red/blue live on rectangular grids
# (cross + corner neighbors).
KERNEL_G = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float32) / 4.0
KERNEL_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float32) / 4.0


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luminance of an (h, w, 3) image."""
    return rgb.astype(np.float32) @ LUMA_WEIGHTS


def srgb_gamma(x: np.ndarray) -> np.ndarray:
    """Forward sRGB transfer: linear segment below 0.0031308, 1/2.4 exponent above."""
    x = np.asarray(x, dtype=np.float32)
    if x.min() < -1e-6 or x.max() > 1 + 1e-6:
        raise DomainError(f"srgb_gamma input outside [0,1]: [{x.min()}, {x.max()}]")
    x = np.clip(x, 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1 / 2.4) - 0.055).astype(np.float32)


def srgb_gamma_inverse(y: np.ndarray) -> np.ndarray:
    """Inverse sRGB transfer, exact inverse of :func:`srgb_gamma` on [0, 1]."""
    y = np.asarray(y, dtype=np.float32)
    if y.min() < -1e-6 or y.max() > 1 + 1e-6:
        raise DomainError(f"srgb_gamma_inverse input outside [0,1]: [{y.min()}, {y.max()}]")
    y = np.clip(y, 0.0, 1.0)
    return np.where(y <= 0.04045, y / 12.92, np.power((y + 0.055) / 1.055, 2.4)).astype(np.float32)


def bilinear_demosaic(stack: RawBayerStack, index: int = 0) -> np.ndarray:
    """Interpolate a packed mosaic to a full (h, w, 3) image.

    Measured sites pass through exactly; missing sites are bilinear averages
    of their nearest same-color neighbors. Borders use whole-sample mirror
    padding, which preserves the 2x2 phase of the mosaic.
    """
    frame = unpack_bayer(stack, index)
    h, w = frame.shape
    masks = color_site_masks(stack.pattern, h, w)
    sparse = masks * frame.values[None]

    out = np.empty((h, w, 3), dtype=np.float32)
    for c, kernel in ((0, KERNEL_RB), (1, KERNEL_G), (2, KERNEL_RB)):
        out[..., c] = convolve(sparse[c], kernel, mode="mirror")
    return out


def develop_reference(stack: RawBayerStack, profile) -> np.ndarray:
    """Classic development: WB gains at Bayer sites, demosaic, 3x3 color
    matrix, sRGB gamma, clip to [0, 1]."""
    gains = np.asarray(profile.wb_gains, dtype=np.float32)
    chan_gain = gains[channel_colors(stack.pattern)]
    balanced = RawBayerStack(
        np.clip(stack.values * chan_gain, 0.0, 1.0), stack.pattern
    )

    rgb = bilinear_demosaic(balanced)
    if not np.isfinite(rgb).all():
        raise NumericError("non-finite value after demosaic stage")

    matrix = np.asarray(profile.color_matrix, dtype=np.float32)
    rgb = np.clip(rgb @ matrix.T, 0.0, 1.0)
    if not np.isfinite(rgb).all():
        raise NumericError("non-finite value after color matrix stage")

    return np.clip(srgb_gamma(rgb), 0.0, 1.0)
