"""Synthetic test sequences: a dark square or disc moving over a light background."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trainer import BoundingBox


@dataclass(frozen=True)
class SyntheticSpec:
    width: int = 240
    height: int = 48
    n_frames: int = 100
    size: int = 20
    start: tuple[int, int] = (10, 14)
    velocity: tuple[float, float] = (2.0, 0.0)
    shape: str = "square"
    background: int = 255
    foreground: int = 0
    texture: float = 0.0
    vanish_at: int | None = None
    seed: int = 0


def generate(spec: SyntheticSpec = SyntheticSpec()):
    """Return (frames as uint8 arrays, ground-truth boxes).

    Positions are rounded to whole cells.  ``texture`` adds seeded uniform
    gray noise of that amplitude to the background.  From ``vanish_at`` on
    the object is not drawn, but its box keeps moving.
    """
    rng = np.random.default_rng(spec.seed)
    frames, boxes = [], []
    yy, xx = np.mgrid[0:spec.size, 0:spec.size]
    half = (spec.size - 1) / 2
    disc = (yy - half) ** 2 + (xx - half) ** 2 <= half * half + 0.5
    for t in range(spec.n_frames):
        x = int(round(spec.start[0] + spec.velocity[0] * t))
        y = int(round(spec.start[1] + spec.velocity[1] * t))
        box = BoundingBox(x, y, spec.size, spec.size)
        if not box.inside(spec.height, spec.width):
            raise ValueError(f"object leaves the {spec.width}x{spec.height} frame at frame {t}")
        img = np.full((spec.height, spec.width), float(spec.background))
        if spec.texture:
            img += rng.uniform(-spec.texture, spec.texture, img.shape)
        if spec.vanish_at is None or t < spec.vanish_at:
            patch = img[y:y + spec.size, x:x + spec.size]
            if spec.shape == "square":
                patch[:] = spec.foreground
            elif spec.shape == "disc":
                patch[disc] = spec.foreground
            else:
                raise ValueError(f"unknown shape {spec.shape!r}")
        frames.append(np.clip(np.round(img), 0, 255).astype(np.uint8))
        boxes.append(box)
    return frames, boxes
