"""Procedural desk-scale image corpus.

Small, fully seeded stand-in for a photographic dataset: layered low-pass
noise fields for texture, soft geometric shapes for edges, and a global
gradient for slow shading. Enough spatial statistics for patch sampling,
compression studies and classifier training without shipping image data.
"""

import os

import numpy as np
from PIL import Image
from scipy.ndimage import zoom

from .bayer import BayerPattern
from .rawdata import DatasetManifest, ManifestEntry, SyntheticCameraProfile, zero_mean_unit_pattern

# Mild cross-talk, rows sum to 1 exactly.
DEFAULT_COLOR_MATRIX = np.array(
    [
        [1.22, -0.14, -0.08],
        [-0.10, 1.24, -0.14],
        [-0.04, -0.22, 1.26],
    ],
    dtype=np.float32,
)
DEFAULT_WB_GAINS = np.array([1.9, 1.0, 1.6], dtype=np.float32)


def _smooth_field(size: int, cells: int, rng) -> np.ndarray:
    grid = rng.standard_normal((cells, cells))
    f = zoom(grid, size / cells, order=3)[:size, :size]
    return (f - f.min()) / (f.max() - f.min() + 1e-9)


def synth_image(size: int, rng: np.random.Generator) -> np.ndarray:
    """One (size, size, 3) image in [0, 1]."""
    octaves = [(4, 0.5), (12, 0.3), (40, 0.2)]
    field = sum(w * _smooth_field(size, c, rng) for c, w in octaves)

    # Two random anchor colors blended by the noise field, plus a slow ramp.
    c0 = rng.uniform(0.15, 0.85, 3)
    c1 = rng.uniform(0.15, 0.85, 3)
    img = field[..., None] * c0 + (1 - field[..., None]) * c1
    yy, xx = np.mgrid[0:size, 0:size] / size
    direction = rng.uniform(-1, 1, 2)
    ramp = 0.15 * (direction[0] * yy + direction[1] * xx)
    img += ramp[..., None]

    # Soft-edged shapes give strong local gradients and occlusion boundaries.
    for _ in range(int(rng.integers(3, 7))):
        cy, cx = rng.uniform(0.1, 0.9, 2) * size
        ry, rx = rng.uniform(0.05, 0.25, 2) * size
        color = rng.uniform(0.05, 0.95, 3)
        alpha = rng.uniform(0.4, 0.9)
        d = ((yy * size - cy) / ry) ** 2 + ((xx * size - cx) / rx) ** 2
        mask = np.clip(1.5 - d, 0.0, 1.0)[..., None]
        img = img * (1 - alpha * mask) + color * alpha * mask

    img += 0.015 * rng.standard_normal(img.shape)
    return np.clip(img, 0.01, 0.99).astype(np.float32)


def default_profile(
    size: int,
    pattern: BayerPattern = BayerPattern.RGGB,
    prnu_strength: float = 0.0,
    prnu_seed: int = 7,
    noise_sigma: float = 0.002,
) -> SyntheticCameraProfile:
    prnu = zero_mean_unit_pattern((size, size), prnu_seed) if prnu_strength > 0 else None
    return SyntheticCameraProfile(
        wb_gains=DEFAULT_WB_GAINS,
        color_matrix=DEFAULT_COLOR_MATRIX,
        pattern=pattern,
        prnu_pattern=prnu,
        prnu_strength=prnu_strength,
        noise_sigma=noise_sigma,
    )


def build_corpus(
    out_dir: str,
    n_train: int = 20,
    n_val: int = 6,
    size: int = 256,
    seed: int = 0,
    profile: SyntheticCameraProfile | None = None,
    profile_id: str = "cam0",
) -> DatasetManifest:
    """Write PNGs plus a manifest; returns the loaded-equivalent manifest."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    if profile is None:
        profile = default_profile(size)

    entries = []
    for i in range(n_train + n_val):
        img = synth_image(size, rng)
        name = f"img{i:03d}.png"
        path = os.path.join(out_dir, name)
        Image.fromarray((img * 255).round().astype(np.uint8)).save(path)
        split = "train" if i < n_train else "validation"
        entries.append(ManifestEntry(path, profile_id, split))

    manifest = DatasetManifest(profiles={profile_id: profile}, entries=entries, seed=seed)
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return manifest
