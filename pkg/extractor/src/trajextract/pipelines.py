"""Small self-contained denoising pipelines with named hook targets.

Each registry entry builds a deterministic torch module (weights seeded
from the model id) and names the submodule whose output counts as "the
final layer" — that choice is architecture-specific, so it lives here as
per-model configuration rather than being inferred.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import torch
from torch import nn


def stable_seed(*parts: str) -> int:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class TinyUNet(nn.Module):
    """Conv denoiser over a small latent; `head` is the final layer."""

    def __init__(self, channels: int = 4, width: int = 16, cond_dim: int = 8):
        super().__init__()
        self.inp = nn.Conv2d(channels + 1, width, 3, padding=1)
        self.mid = nn.Conv2d(width, width, 3, padding=1)
        self.cond_proj = nn.Linear(cond_dim, width)
        self.head = nn.Conv2d(width, channels, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, latent: torch.Tensor, t_frac: torch.Tensor, cond: torch.Tensor):
        b, _, h, w = latent.shape
        t_plane = t_frac.view(b, 1, 1, 1).expand(b, 1, h, w)
        x = self.act(self.inp(torch.cat([latent, t_plane], dim=1)))
        x = x + self.cond_proj(cond).view(b, -1, 1, 1)
        x = self.act(self.mid(x))
        return self.head(x)


class TinyMlp(nn.Module):
    """MLP denoiser over a flat latent; `head` is the final layer."""

    def __init__(self, dim: int = 24, width: int = 48, cond_dim: int = 8):
        super().__init__()
        self.body = nn.Sequential(nn.Linear(dim + 1 + cond_dim, width), nn.SiLU(),
                                  nn.Linear(width, width), nn.SiLU())
        self.head = nn.Linear(width, dim)

    def forward(self, latent: torch.Tensor, t_frac: torch.Tensor, cond: torch.Tensor):
        x = torch.cat([latent, t_frac.view(-1, 1), cond], dim=1)
        return self.head(self.body(x))


@dataclass(frozen=True)
class PipelineSpec:
    model_id: str
    builder: Callable[[], nn.Module]
    latent_shape: tuple[int, ...]
    cond_dim: int
    hook_target: str  # dotted submodule path of the final layer

    def build(self, device: str = "cpu") -> nn.Module:
        torch.manual_seed(stable_seed("weights", self.model_id))
        model = self.builder()
        model.eval()
        return model.to(device)


PIPELINES = {
    "tiny-unet": PipelineSpec(
        model_id="tiny-unet",
        builder=lambda: TinyUNet(channels=4, width=16, cond_dim=8),
        latent_shape=(4, 8, 8),
        cond_dim=8,
        hook_target="head",
    ),
    "tiny-mlp": PipelineSpec(
        model_id="tiny-mlp",
        builder=lambda: TinyMlp(dim=24, width=48, cond_dim=8),
        latent_shape=(24,),
        cond_dim=8,
        hook_target="head",
    ),
}
