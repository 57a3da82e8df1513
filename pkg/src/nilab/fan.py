"""Manipulation classifier with a constrained residual-filter front end.

The first layer learns 5x5 residual filters: after every optimizer step the
kernels are projected so the center tap is -1 and the remaining 24 taps sum
to +1. Zero-sum kernels suppress image content and expose the noise-level
traces the five manipulation classes leave behind.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .errors import DimensionError, NumericError

NUM_CLASSES = 5
LEAKY_SLOPE = 0.2
MIN_INPUT_PX = 32


class FanNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.constrained = nn.Conv2d(3, 3, 5, padding=2, padding_mode="reflect", bias=False)
        self.conv1 = nn.Conv2d(3, 32, 5, padding=2)
        self.conv2 = nn.Conv2d(32, 64, 5, padding=2)
        self.conv3 = nn.Conv2d(64, 128, 5, padding=2)
        self.conv4 = nn.Conv2d(128, 256, 5, padding=2)
        self.proj = nn.Conv2d(256, 256, 1)
        self.fc1 = nn.Linear(256, 512)
        self.fc2 = nn.Linear(512, 128)
        self.fc3 = nn.Linear(128, NUM_CLASSES)

    def forward(self, x):
        if x.shape[-1] < MIN_INPUT_PX or x.shape[-2] < MIN_INPUT_PX:
            raise DimensionError(f"input below {MIN_INPUT_PX}px: {tuple(x.shape)}")
        x = self.constrained(x)
        for conv in (self.conv1, self.conv2, self.conv3, self.conv4):
            x = F.max_pool2d(F.leaky_relu(conv(x), LEAKY_SLOPE), 2)
        x = F.leaky_relu(self.proj(x), LEAKY_SLOPE)
        x = x.mean(dim=(2, 3))
        x = F.leaky_relu(self.fc1(x), LEAKY_SLOPE)
        x = F.leaky_relu(self.fc2(x), LEAKY_SLOPE)
        return self.fc3(x)


@dataclass
class FanModel:
    module: FanNet
    seed: int | None = None
    num_classes: int = NUM_CLASSES

    @property
    def param_count(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    @property
    def constrained_filters(self) -> torch.Tensor:
        return self.module.constrained.weight

    def parameters(self):
        return self.module.parameters()


def build_fan(seed: int) -> FanModel:
    net = FanNet()
    gen = torch.Generator().manual_seed(seed)
    for m in net.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_uniform_(m.weight, a=5**0.5, generator=gen)
            if m.bias is not None:
                fan_in = m.weight.shape[1:].numel()
                bound = 1 / fan_in**0.5
                nn.init.uniform_(m.bias, -bound, bound, generator=gen)
    model = FanModel(net, seed)
    constrain_residual_filters(model)
    return model


def constrain_residual_filters(model: FanModel, _reinit_scale: float = 0.1) -> None:
    """Project every first-layer 5x5 kernel onto the residual-filter set.

    Per (out, in) kernel: center tap forced to -1, the other 24 taps rescaled
    to sum to +1. Idempotent. A kernel whose off-center taps sum to ~0 cannot
    be rescaled and is re-drawn from a small uniform distribution instead.
    """
    weight = model.module.constrained.weight
    with torch.no_grad():
        k = weight.shape[-1]
        c = k // 2
        for o in range(weight.shape[0]):
            for i in range(weight.shape[1]):
                kernel = weight[o, i]
                kernel[c, c] = 0.0
                s = float(kernel.sum())
                if abs(s) < 1e-8:
                    kernel.uniform_(-_reinit_scale, _reinit_scale)
                    kernel[c, c] = 0.0
                    s = float(kernel.sum())
                kernel /= s
                kernel[c, c] = -1.0


def fan_forward(model: FanModel, img: np.ndarray) -> np.ndarray:
    """Class probabilities for an (h, w, 3) image or (n, h, w, 3) batch."""
    img = np.asarray(img, dtype=np.float32)
    single = img.ndim == 3
    if single:
        img = img[None]
    if img.ndim != 4 or img.shape[-1] != 3:
        raise DimensionError(f"expected (h, w, 3) or (n, h, w, 3), got {img.shape}")
    t = torch.from_numpy(np.ascontiguousarray(img.transpose(0, 3, 1, 2)))
    with torch.no_grad():
        logits = model.module(t)
        if not torch.isfinite(logits).all():
            raise NumericError("non-finite logits")
        probs = torch.softmax(logits, dim=1).numpy()
    return probs[0] if single else probs
