"""Synthetic raw capture and dataset plumbing.

The simulator runs the reference pipeline backwards (inverse gamma, inverse
color matrix, inverse white balance, mosaic), then layers on the sensor
effects a real capture would carry: a fixed multiplicative PRNU pattern and
Gaussian read noise. Any RGB corpus therefore yields raw/target training
pairs with a known ground-truth fingerprint.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import tensorio
from .bayer import BayerPattern, RawBayerFrame, RawBayerStack, mosaic_rgb, pack_bayer
from .errors import DimensionError, DomainError, ProfileError, SamplingError
from .isp import develop_reference, luminance, srgb_gamma_inverse

VARIANCE_REJECT = 0.01
VARIANCE_COINFLIP = 0.02
DRAW_CAP_PER_PATCH = 1000


@dataclass
class SyntheticCameraProfile:
    """Parameters of a simulated sensor and its reference development.

    ``color_matrix`` rows sum to 1 (white-point preserving); ``prnu_pattern``
    is a zero-mean map of per-pixel gain deviations, scaled by
    ``prnu_strength`` at capture time.
    """

    wb_gains: np.ndarray
    color_matrix: np.ndarray
    pattern: BayerPattern = BayerPattern.RGGB
    prnu_pattern: np.ndarray | None = None
    prnu_strength: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.wb_gains = np.asarray(self.wb_gains, dtype=np.float32)
        self.color_matrix = np.asarray(self.color_matrix, dtype=np.float32)
        if self.wb_gains.shape != (3,) or (self.wb_gains <= 0).any():
            raise ProfileError(f"wb_gains must be 3 positive reals, got {self.wb_gains}")
        if self.color_matrix.shape != (3, 3):
            raise ProfileError(f"color_matrix must be 3x3, got {self.color_matrix.shape}")
        row_sums = self.color_matrix.sum(axis=1)
        if np.abs(row_sums - 1.0).max() > 1e-6:
            raise ProfileError(f"color_matrix rows must sum to 1, got {row_sums}")
        if self.prnu_strength < 0 or self.noise_sigma < 0:
            raise ProfileError("prnu_strength and noise_sigma must be >= 0")
        if self.prnu_pattern is not None:
            self.prnu_pattern = np.asarray(self.prnu_pattern, dtype=np.float32)
            if abs(float(self.prnu_pattern.mean())) > 1e-6:
                raise ProfileError("prnu_pattern must be zero-mean")

    def to_dict(self) -> dict:
        return {
            "wb_gains": self.wb_gains.tolist(),
            "color_matrix": self.color_matrix.tolist(),
            "pattern": self.pattern.value,
            "prnu_strength": float(self.prnu_strength),
            "noise_sigma": float(self.noise_sigma),
        }

    @classmethod
    def from_dict(cls, d: dict, prnu_pattern=None) -> "SyntheticCameraProfile":
        return cls(
            wb_gains=d["wb_gains"],
            color_matrix=d["color_matrix"],
            pattern=BayerPattern(d["pattern"]),
            prnu_pattern=prnu_pattern,
            prnu_strength=d.get("prnu_strength", 0.0),
            noise_sigma=d.get("noise_sigma", 0.0),
        )

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        digest = hashlib.sha256(payload)
        if self.prnu_pattern is not None:
            digest.update(self.prnu_pattern.tobytes())
        return digest.hexdigest()[:16]


def zero_mean_unit_pattern(shape, seed: int) -> np.ndarray:
    """Unit-variance, exactly zero-mean Gaussian map for PRNU injection."""
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(shape).astype(np.float32)
    p -= p.mean()
    p /= p.std()
    p -= p.mean()  # re-centre after the scale, keeps mean < 1e-7
    return p


def simulate_raw(rgb: np.ndarray, profile: SyntheticCameraProfile, seed: int) -> RawBayerFrame:
    """Turn a display-referred RGB image into a simulated raw mosaic.

    Inverse sRGB gamma, inverse color matrix, inverse white balance, mosaic
    by the profile's Bayer pattern, multiply by (1 + strength * PRNU), add
    Gaussian read noise, clip to [0, 1]. Deterministic for a given seed.
    """
    rgb = np.asarray(rgb, dtype=np.float32)
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise DimensionError(f"expected (h, w, 3) image, got shape {rgb.shape}")
    if rgb.shape[0] % 2 or rgb.shape[1] % 2:
        raise DimensionError(f"image dimensions must be even, got {rgb.shape[:2]}")
    if rgb.min() < -1e-6 or rgb.max() > 1 + 1e-6:
        raise DomainError(f"rgb values outside [0,1]: [{rgb.min()}, {rgb.max()}]")

    lin = srgb_gamma_inverse(np.clip(rgb, 0.0, 1.0))
    inv_matrix = np.linalg.inv(profile.color_matrix).astype(np.float32)
    cam = np.clip(lin @ inv_matrix.T, 0.0, 1.0)
    cam = np.clip(cam / profile.wb_gains, 0.0, 1.0)

    mosaic = mosaic_rgb(cam, profile.pattern)

    if profile.prnu_pattern is not None and profile.prnu_strength > 0:
        if profile.prnu_pattern.shape != mosaic.shape:
            raise ProfileError(
                f"prnu_pattern shape {profile.prnu_pattern.shape} does not match image {mosaic.shape}"
            )
        mosaic = mosaic * (1.0 + profile.prnu_strength * profile.prnu_pattern)

    if profile.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        mosaic = mosaic + rng.normal(0.0, profile.noise_sigma, mosaic.shape).astype(np.float32)

    return RawBayerFrame(np.clip(mosaic, 0.0, 1.0), profile.pattern)


@dataclass
class ManifestEntry:
    image_path: str
    profile_id: str
    split: str  # "train" or "validation"


@dataclass
class DatasetManifest:
    """Image corpus, camera profiles, and the train/validation split."""

    profiles: dict
    entries: list
    seed: int = 0

    def __post_init__(self):
        train = {e.image_path for e in self.entries if e.split == "train"}
        val = {e.image_path for e in self.entries if e.split == "validation"}
        overlap = train & val
        if overlap:
            raise DomainError(f"splits not disjoint: {sorted(overlap)[:3]}")

    def split_entries(self, split: str) -> list:
        return [e for e in self.entries if e.split == split]

    def entry_seed(self, index: int) -> int:
        """Stable capture seed for entry ``index`` under the manifest seed."""
        return int(np.random.SeedSequence([self.seed, index]).generate_state(1)[0])

    def save(self, path: str) -> None:
        """Write JSON; PRNU maps go to sidecar tensors next to the manifest."""
        base = os.path.splitext(path)[0]
        profiles = {}
        for pid, prof in self.profiles.items():
            d = prof.to_dict()
            if prof.prnu_pattern is not None:
                sidecar = f"{base}.prnu-{pid}.bin"
                tensorio.save_tensor(sidecar, prof.prnu_pattern)
                d["prnu_pattern"] = os.path.basename(sidecar)
            profiles[pid] = d
        doc = {
            "seed": self.seed,
            "profiles": profiles,
            "entries": [
                {"path": e.image_path, "profile": e.profile_id, "split": e.split}
                for e in self.entries
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "DatasetManifest":
        with open(path) as fh:
            doc = json.load(fh)
        root = os.path.dirname(os.path.abspath(path))
        profiles = {}
        for pid, d in doc["profiles"].items():
            pattern = None
            if "prnu_pattern" in d:
                pattern = tensorio.load_tensor(os.path.join(root, d["prnu_pattern"]))
            profiles[pid] = SyntheticCameraProfile.from_dict(d, prnu_pattern=pattern)
        entries = []
        for e in doc["entries"]:
            img = e["path"]
            if not os.path.isabs(img):
                img = os.path.join(root, img)
            if not os.path.exists(img):
                raise DomainError(f"manifest references missing image: {img}")
            entries.append(ManifestEntry(img, e["profile"], e["split"]))
        return cls(profiles=profiles, entries=entries, seed=doc.get("seed", 0))


def load_rgb(path: str) -> np.ndarray:
    """8-bit image file to float32 (h, w, 3) in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr


class PatchSampler:
    """Draws raw/target patch pairs from one split of a manifest.

    Each entry's capture (simulate + reference development) is materialized
    once and kept; repeated sampling only crops. With NIL_CACHE_DIR set, the
    materialized tensors are also cached on disk keyed by image, profile and
    capture seed, so parameter sweeps over the same data skip re-simulation.
    """

    def __init__(self, manifest: DatasetManifest, split: str = "train"):
        self.manifest = manifest
        self.split = split
        self.entries = manifest.split_entries(split)
        if not self.entries:
            raise DomainError(f"manifest has no '{split}' entries")
        self.indices = [manifest.entries.index(e) for e in self.entries]
        self._store = {}

    def _materialize(self, k: int):
        if k in self._store:
            return self._store[k]
        entry = self.entries[k]
        profile = self.manifest.profiles[entry.profile_id]
        seed = self.manifest.entry_seed(self.indices[k])

        cached = None
        root = tensorio.cache_dir()
        if root is not None:
            key = hashlib.sha256(
                f"{os.path.abspath(entry.image_path)}|{profile.content_hash()}|{seed}".encode()
            ).hexdigest()[:24]
            raw_p = os.path.join(root, f"{key}.raw.bin")
            tgt_p = os.path.join(root, f"{key}.tgt.bin")
            if os.path.exists(raw_p) and os.path.exists(tgt_p):
                cached = (tensorio.load_tensor(raw_p), tensorio.load_tensor(tgt_p))

        if cached is None:
            rgb = load_rgb(entry.image_path)
            frame = simulate_raw(rgb, profile, seed)
            target = develop_reference(pack_bayer(frame), profile)
            cached = (frame.values, target)
            if root is not None:
                tensorio.save_tensor(raw_p, cached[0])
                tensorio.save_tensor(tgt_p, cached[1])

        pair = (cached[0], cached[1], profile.pattern)
        self._store[k] = pair
        return pair

    def sample(self, batch: int, patch_px: int, rng: np.random.Generator):
        """Draw ``batch`` (RawBayerStack, target) pairs, variance-filtered."""
        if patch_px % 2:
            raise DimensionError(f"patch_px must be even, got {patch_px}")
        out = []
        draws = 0
        cap = DRAW_CAP_PER_PATCH * batch
        while len(out) < batch:
            if draws >= cap:
                raise SamplingError(
                    f"exhausted {cap} draws with {len(out)}/{batch} patches accepted"
                )
            draws += 1
            k = int(rng.integers(len(self.entries)))
            raw, target, pattern = self._materialize(k)
            h, w = raw.shape
            if h < patch_px or w < patch_px:
                raise DimensionError(
                    f"image {self.entries[k].image_path} smaller than patch {patch_px}"
                )
            y = 2 * int(rng.integers((h - patch_px) // 2 + 1))
            x = 2 * int(rng.integers((w - patch_px) // 2 + 1))
            tgt = target[y : y + patch_px, x : x + patch_px]
            var = float(luminance(tgt).var())
            if var < VARIANCE_REJECT:
                continue
            if var < VARIANCE_COINFLIP and rng.random() >= 0.5:
                continue
            crop = RawBayerFrame(raw[y : y + patch_px, x : x + patch_px], pattern)
            out.append((pack_bayer(crop), tgt.copy()))
        return out


def sample_patches(manifest: DatasetManifest, batch: int, patch_px: int, seed: int, split: str = "train"):
    """One-shot patch draw; see :class:`PatchSampler` for the loop form."""
    sampler = PatchSampler(manifest, split)
    return sampler.sample(batch, patch_px, np.random.default_rng(seed))
