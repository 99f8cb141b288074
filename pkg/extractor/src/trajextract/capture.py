"""Hook-based feature capture along a full sampling run.

For every prompt the pipeline denoises for T steps; a forward hook on the
registered final layer records its output per step. Features are flattened
(mean-pooled over spatial positions when a map exceeds the size cap) and
written as one trajectory file per prompt, with the sentinel slot t = 0
duplicated from the last computed feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .format import write_trajectory_file
from .pipelines import PIPELINES, stable_seed


class ExtractionError(RuntimeError):
    """Model lookup/load or hook registration failed."""


@dataclass
class ExtractionConfig:
    model: str
    prompts: list[str]
    total_steps: int = 10
    out_dir: str | Path = "."
    device: str = "cpu"
    seed: int = 0
    pool_cap: int = 4096  # flatten up to this many values, else mean-pool spatially

    def __post_init__(self) -> None:
        if self.total_steps < 2:
            raise ValueError(f"total_steps must be >= 2, got {self.total_steps}")
        if not self.prompts:
            raise ValueError("prompt list is empty")


def _flatten(feature: torch.Tensor, pool_cap: int) -> np.ndarray:
    arr = feature.squeeze(0)
    if arr.numel() > pool_cap and arr.dim() >= 2:
        arr = arr.mean(dim=tuple(range(1, arr.dim())))  # pool to per-channel means
    return arr.reshape(-1).to(torch.float32).cpu().numpy()


def extract(config: ExtractionConfig) -> list[Path]:
    """Run the pipeline per prompt and write one trajectory file each."""
    spec = PIPELINES.get(config.model)
    if spec is None:
        raise ExtractionError(
            f"unknown model {config.model!r}; available: {sorted(PIPELINES)}"
        )
    try:
        model = spec.build(config.device)
    except Exception as exc:  # construction or device placement failed
        raise ExtractionError(f"could not load model {config.model!r}: {exc}") from exc
    try:
        target = model.get_submodule(spec.hook_target)
    except AttributeError as exc:
        raise ExtractionError(
            f"hook target {spec.hook_target!r} not found in {config.model!r}"
        ) from exc

    captured: list[torch.Tensor] = []
    handle = target.register_forward_hook(lambda mod, inp, out: captured.append(out.detach()))
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    try:
        for index, prompt in enumerate(config.prompts):
            gen = torch.Generator(device="cpu")
            gen.manual_seed(stable_seed("latent", config.model, str(config.seed), prompt))
            latent = torch.randn((1, *spec.latent_shape), generator=gen)
            cond_gen = torch.Generator(device="cpu")
            cond_gen.manual_seed(stable_seed("cond", prompt))
            cond = torch.randn((1, spec.cond_dim), generator=cond_gen)
            latent = latent.to(config.device)
            cond = cond.to(config.device)

            captured.clear()
            with torch.no_grad():
                for t in range(config.total_steps, 0, -1):
                    t_frac = torch.full((1,), t / config.total_steps, device=config.device)
                    eps = model(latent, t_frac, cond)
                    latent = latent - eps / config.total_steps
            rows = [_flatten(feat, config.pool_cap) for feat in captured]
            if len(rows) != config.total_steps:
                raise ExtractionError(
                    f"hook captured {len(rows)} features, expected {config.total_steps}"
                )
            rows.append(rows[-1].copy())  # sentinel slot duplicates the last feature
            features = np.stack(rows)
            path = out_dir / f"{config.model}_{index:03d}.dptj"
            write_trajectory_file(
                path,
                features,
                metadata={
                    "model": config.model,
                    "prompt": prompt,
                    "T": config.total_steps,
                    "seed": config.seed,
                },
            )
            paths.append(path)
    finally:
        handle.remove()
    return paths
