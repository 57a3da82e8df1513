"""Learned raw-to-RGB developers.

Three fully convolutional architectures share one contract: packed
(B, 4, h/2, w/2) mosaics in, (B, 3, h, w) images out, any even input size.

* inet: a thin mirror of the reference pipeline (sparse-plane demosaic
  convolution, 1x1 color matrix, tiny per-pixel tone net), initialized so a
  fresh model already develops close to the reference output.
* unet: encoder-decoder with skip connections, 5 scales from width 32,
  transposed-convolution upsampling, depth-to-space output head.
* dnet: a deep single-scale trunk for joint demosaic-style processing,
  15 conv layers at width 64 with a depth-to-space head.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from . import tensorio
from .bayer import RawBayerStack, channel_colors
from .errors import DimensionError, NumericError
from .isp import KERNEL_G, KERNEL_RB

ARCHITECTURES = ("inet", "unet", "dnet")

# Per-pixel tone curve 1->5->1 tanh net, pre-fitted to the sRGB transfer
# (max abs error 7.4e-4 on [0,1]).
GAMMA_NET_INIT = {
    "w1": [198.3586251288, 38.0876123977, 8.3873319201, 1.8430297415, 0.5129067561],
    "b1": [-0.1584037762, 0.3720556193, 0.3366336669, 0.3477664233, -0.4379487321],
    "w2": [0.0312351286, 0.132936638, 0.2201927279, 0.5478131305, 0.7790849135],
    "b2": [0.023338505],
}


def _sparse_planes(x: torch.Tensor) -> torch.Tensor:
    """Spread packed channels onto full-resolution planes, zeros elsewhere."""
    b, _, hh, ww = x.shape
    out = x.new_zeros(b, 4, 2 * hh, 2 * ww)
    for k in range(4):
        out[:, k, k // 2 :: 2, k % 2 :: 2] = x[:, k]
    return out


class INet(nn.Module):
    """Pipeline-shaped developer; stages stay interpretable after training."""

    def __init__(self, profile):
        super().__init__()
        self.demosaic = nn.Conv2d(4, 3, 5, padding=2, padding_mode="reflect")
        self.color = nn.Conv2d(3, 3, 1)
        self.tone_in = nn.Conv2d(1, 5, 1)
        self.tone_out = nn.Conv2d(5, 1, 1)
        self._init_from_profile(profile)

    def _init_from_profile(self, profile):
        colors = channel_colors(profile.pattern)
        gains = np.asarray(profile.wb_gains, dtype=np.float32)
        weight = np.zeros((3, 4, 5, 5), dtype=np.float32)
        for k in range(4):
            c = int(colors[k])
            kernel = KERNEL_G if c == 1 else KERNEL_RB
            weight[c, k, 1:4, 1:4] = kernel * gains[c]
        with torch.no_grad():
            self.demosaic.weight.copy_(torch.from_numpy(weight))
            self.demosaic.bias.zero_()
            self.color.weight.copy_(
                torch.as_tensor(profile.color_matrix, dtype=torch.float32).view(3, 3, 1, 1)
            )
            self.color.bias.zero_()
            g = GAMMA_NET_INIT
            self.tone_in.weight.copy_(torch.tensor(g["w1"]).view(5, 1, 1, 1))
            self.tone_in.bias.copy_(torch.tensor(g["b1"]))
            self.tone_out.weight.copy_(torch.tensor(g["w2"]).view(1, 5, 1, 1))
            self.tone_out.bias.copy_(torch.tensor(g["b2"]))

    def forward(self, x):
        y = self.color(self.demosaic(_sparse_planes(x)))
        b, c, h, w = y.shape
        v = y.reshape(b * c, 1, h, w)
        v = self.tone_out(torch.tanh(self.tone_in(v)))
        return v.reshape(b, c, h, w)


class _ConvPair(nn.Module):
    def __init__(self, n_in, n_out):
        super().__init__()
        self.a = nn.Conv2d(n_in, n_out, 3, padding=1)
        self.b = nn.Conv2d(n_out, n_out, 3, padding=1)

    def forward(self, x):
        x = F.leaky_relu(self.a(x), 0.2)
        return F.leaky_relu(self.b(x), 0.2)


class UNet(nn.Module):
    def __init__(self, base_width: int = 32):
        super().__init__()
        w = base_width
        widths = [w, 2 * w, 4 * w, 8 * w, 16 * w]
        self.enc = nn.ModuleList(
            [_ConvPair(4 if i == 0 else widths[i - 1], widths[i]) for i in range(5)]
        )
        self.up = nn.ModuleList(
            [nn.ConvTranspose2d(widths[i + 1], widths[i], 2, stride=2, bias=False) for i in range(4)]
        )
        self.dec = nn.ModuleList([_ConvPair(2 * widths[i], widths[i]) for i in range(4)])
        self.head = nn.Conv2d(w, 12, 1)

    def forward(self, x):
        hh, ww = x.shape[-2:]
        pad_h = (-hh) % 16
        pad_w = (-ww) % 16
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="reflect")

        skips = []
        for i in range(4):
            x = self.enc[i](x)
            skips.append(x)
            x = F.max_pool2d(x, 2)
        x = self.enc[4](x)
        for i in range(3, -1, -1):
            x = torch.cat([self.up[i](x), skips[i]], dim=1)
            x = self.dec[i](x)
        out = F.pixel_shuffle(self.head(x), 2)
        return out[..., : 2 * hh, : 2 * ww]


class DNet(nn.Module):
    def __init__(self, width: int = 64, depth: int = 15):
        super().__init__()
        layers = [nn.Conv2d(4, width, 3, padding=1)]
        for _ in range(depth - 2):
            layers.append(nn.Conv2d(width, width, 3, padding=1))
        self.trunk = nn.ModuleList(layers)
        self.head = nn.Conv2d(width, 12, 3, padding=1)

    def forward(self, x):
        for conv in self.trunk:
            x = F.relu(conv(x))
        return F.pixel_shuffle(self.head(x), 2)


@dataclass
class NipModel:
    """A developer network plus the metadata checkpoints carry."""

    arch: str
    module: nn.Module
    seed: int | None = None

    @property
    def param_count(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    def parameters(self):
        return self.module.parameters()


def _seeded_reinit(module: nn.Module, seed: int) -> None:
    """Deterministic re-initialization of conv weights, in parameter order."""
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.kaiming_uniform_(m.weight, a=5**0.5, generator=gen)
            if m.bias is not None:
                fan_in = m.weight.shape[1] * m.weight.shape[2] * m.weight.shape[3]
                bound = 1 / fan_in**0.5
                nn.init.uniform_(m.bias, -bound, bound, generator=gen)


def build_inet(profile) -> NipModel:
    return NipModel("inet", INet(profile))


def build_unet(seed: int) -> NipModel:
    net = UNet()
    _seeded_reinit(net, seed)
    return NipModel("unet", net, seed)


def build_dnet(seed: int) -> NipModel:
    net = DNet()
    _seeded_reinit(net, seed)
    return NipModel("dnet", net, seed)


def stack_to_tensor(stack: RawBayerStack) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(stack.values.transpose(0, 3, 1, 2)))


def nip_forward(model: NipModel, stack: RawBayerStack) -> np.ndarray:
    """Develop a packed stack to (n, h, w, 3) in [0, 1].

    Export path: output is clipped here, never inside the training graph.
    """
    with torch.no_grad():
        out = model.module(stack_to_tensor(stack))
    if not torch.isfinite(out).all():
        raise NumericError(f"{model.arch} produced non-finite output")
    return np.clip(out.permute(0, 2, 3, 1).numpy(), 0.0, 1.0)


def save_checkpoint(model: NipModel, out_dir: str, extra_meta: dict | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, p in model.module.state_dict().items():
        tensorio.save_tensor(os.path.join(out_dir, name.replace(".", "__") + ".bin"), p.numpy())
    meta = {"arch": model.arch, "seed": model.seed, "param_count": model.param_count}
    meta.update(extra_meta or {})
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)


def load_checkpoint(ckpt_dir: str, profile=None) -> NipModel:
    with open(os.path.join(ckpt_dir, "meta.json")) as fh:
        meta = json.load(fh)
    arch = meta["arch"]
    if arch == "inet":
        if profile is None:
            raise DimensionError("loading an inet checkpoint requires the camera profile")
        model = build_inet(profile)
    elif arch == "unet":
        model = build_unet(meta.get("seed") or 0)
    elif arch == "dnet":
        model = build_dnet(meta.get("seed") or 0)
    else:
        raise DimensionError(f"unknown architecture {arch!r}")
    state = {}
    for name, p in model.module.state_dict().items():
        arr = tensorio.load_tensor(os.path.join(ckpt_dir, name.replace(".", "__") + ".bin"))
        state[name] = torch.from_numpy(arr.reshape(p.shape))
    model.module.load_state_dict(state)
    model.seed = meta.get("seed")
    return model
