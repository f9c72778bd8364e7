"""Offline training of the DoG feature model on the first frame.

Training runs on the host: every DoG response is still produced by the
simulated CeNN templates, but feature ranking, the genetic search and the
threshold scan are plain numpy.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Boundary, CellGrid, SolverConfig, quantize_array, run
from .templates import (POOL_DIFFUSION_NS, DoGKernel, apply_dog, diffusion, recall_image,
                        threshold_image)

log = logging.getLogger(__name__)

POOL_LEVELS = tuple(k / 5 for k in range(-4, 5))
TARGET_SPARSITY = 0.05
STEP_LEVELS = (10, 20, 35, 50, 75)
ORIENTATIONS = (None, 0.0, 45.0, 90.0, 135.0)


def kernel_enumeration() -> list[DoGKernel]:
    """Fixed order of every candidate kernel.

    Orientation varies slowest, then ordered pairs of distinct step counts
    (both polarities, so light and dark targets are covered).
    """
    return [DoGKernel(s1, s2, a, a)
            for a in ORIENTATIONS
            for s1, s2 in itertools.permutations(STEP_LEVELS, 2)]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in 0-based cell coordinates; (x, y) is the top-left cell."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box needs w, h >= 1, got {self}")

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)

    def inside(self, height: int, width: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x + self.w <= width and self.y + self.h <= height

    def mask(self, height: int, width: int) -> np.ndarray:
        """Binary image: +1 inside the box, -1 elsewhere."""
        m = -np.ones((height, width))
        m[max(self.y, 0):max(self.y + self.h, 0), max(self.x, 0):max(self.x + self.w, 0)] = 1.0
        return m

    @property
    def centre(self):
        return (self.x + (self.w - 1) / 2, self.y + (self.h - 1) / 2)


@dataclass
class Descriptor:
    index: int
    kernel: DoGKernel
    pool_threshold: float | None
    image: np.ndarray


@dataclass
class FeaturePool:
    descriptors: list[Descriptor]
    frame_id: int = 0


@dataclass(frozen=True)
class GAConfig:
    population: int = 20
    generations: int = 100
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.1
    weight_range: tuple[float, float] = (-2.0, 2.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_rate <= 1):
            raise ValueError("rates must be probabilities")
        lo, hi = self.weight_range
        if not lo < hi:
            raise ValueError("weight_range must satisfy lo < hi")


@dataclass(frozen=True)
class TrainerConfig:
    n_kernels: int = 25
    n_keep: int = 6
    seed: int = 0
    ga: GAConfig = GAConfig()
    adc_bits: int | None = 8


@dataclass
class TrainedModel:
    kernels: list[DoGKernel]
    pool_thresholds: list[float | None]
    weights: list[float]
    final_threshold: float
    reference_response_area: float
    ground_truth_box: BoundingBox
    fitness_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.kernels or len(self.kernels) != len(self.weights):
            raise ValueError("model needs as many weights as kernels (at least one)")
        if len(self.pool_thresholds) != len(self.kernels):
            raise ValueError("one pooling threshold per kernel")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if not -1.0 <= self.final_threshold <= 1.0:
            raise ValueError("final threshold must lie in [-1, 1]")

    def to_json(self) -> str:
        doc = {
            "format": "cenntrack-model/1",
            "kernels": [dict(k.to_dict(), pool_threshold=level)
                        for k, level in zip(self.kernels, self.pool_thresholds)],
            "weights": [float(w) for w in self.weights],
            "final_threshold": float(self.final_threshold),
            "reference_response_area": float(self.reference_response_area),
            "ground_truth_box": list(self.ground_truth_box.as_tuple()),
            "fitness_history": [float(f) for f in self.fitness_history],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        if doc.get("format") != "cenntrack-model/1":
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        try:
            return cls(
                kernels=[DoGKernel.from_dict(k) for k in doc["kernels"]],
                pool_thresholds=[k.get("pool_threshold") for k in doc["kernels"]],
                weights=[float(w) for w in doc["weights"]],
                final_threshold=float(doc["final_threshold"]),
                reference_response_area=float(doc["reference_response_area"]),
                ground_truth_box=BoundingBox(*(int(v) for v in doc["ground_truth_box"])),
                fitness_history=[float(f) for f in doc.get("fitness_history", [])],
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed model: {exc!r}") from None


# -- pooling ---------------------------------------------------------------

def choose_pool_threshold(response) -> float | None:
    """Candidate level whose foreground fraction is closest to 5%.

    Levels that give an all-white or all-black image carry no information
    and are skipped; None means every level was degenerate.  Ties go to
    the smallest absolute level, then the smallest level.
    """
    response = np.asarray(response)
    best, best_key = None, None
    for level in POOL_LEVELS:
        frac = float(np.mean(response > level))
        if frac == 0.0 or frac == 1.0:
            continue
        key = (abs(frac - TARGET_SPARSITY), abs(level), level)
        if best_key is None or key < best_key:
            best, best_key = float(level), key
    return best


def pool_with(response, level: float | None, cfg: SolverConfig = SolverConfig()):
    """Threshold at ``level`` and diffuse into soft blobs."""
    response = np.asarray(response, dtype=np.float64)
    if level is None:
        binary = -np.ones_like(response)
    else:
        binary = threshold_image(response, level, cfg)
    grid = CellGrid(binary, np.zeros_like(binary), Boundary.ZERO_FLUX)
    return run(grid, diffusion(None, POOL_DIFFUSION_NS), cfg).outputs


def pool_response(response: CellGrid, cfg: SolverConfig = SolverConfig()) -> CellGrid:
    img = response.outputs
    out = pool_with(img, choose_pool_threshold(img), cfg)
    return CellGrid(out, np.zeros_like(out), response.boundary)


# -- feature pool ----------------------------------------------------------

def generate_pool(frame: CellGrid, n_kernels: int, seed: int = 0,
                  cfg: SolverConfig = SolverConfig()) -> FeaturePool:
    """Run ``n_kernels`` DoG kernels on the frame and pool each response.

    Kernels are the first ``n_kernels`` of the enumeration after a seeded
    permutation; each descriptor keeps its enumeration index.
    """
    candidates = kernel_enumeration()
    if not 1 <= n_kernels <= len(candidates):
        raise ValueError(f"n_kernels must be in [1, {len(candidates)}]")
    order = np.random.default_rng(seed).permutation(len(candidates))[:n_kernels]
    descriptors = []
    for idx in order:
        k = candidates[idx]
        resp = apply_dog(frame, k, cfg).outputs
        level = choose_pool_threshold(resp)
        descriptors.append(Descriptor(int(idx), k, level, pool_with(resp, level, cfg)))
    return FeaturePool(descriptors)


def feature_score(image, box: BoundingBox) -> float:
    """Mean response inside the box minus mean response outside."""
    H, W = image.shape
    inside = box.mask(H, W) > 0
    if not inside.any():
        raise ValueError("box does not cover any cell")
    outside = image[~inside]
    return float(image[inside].mean() - (outside.mean() if outside.size else 0.0))


def select_features(pool: FeaturePool, box: BoundingBox, n_keep: int) -> FeaturePool:
    if not 1 <= n_keep <= len(pool.descriptors):
        raise ValueError(f"n_keep must be in [1, {len(pool.descriptors)}]")
    scored = [(-feature_score(d.image, box), d.index, d) for d in pool.descriptors]
    scored.sort(key=lambda s: (s[0], s[1]))
    return FeaturePool([d for _, _, d in scored[:n_keep]], pool.frame_id)


# -- genetic weighting -----------------------------------------------------

def combine(weights, images):
    """Weighted sum of descriptor images, clamped to [-1, 1]."""
    w = np.asarray(weights, dtype=np.float64)
    return np.clip(np.tensordot(w, np.asarray(images), axes=(-1, 0)), -1.0, 1.0)


def fitness(weights, descriptors, gt_mask) -> float:
    """Mean squared error between the clamped weighted sum and the mask."""
    images = np.asarray(descriptors, dtype=np.float64)
    gt = np.asarray(gt_mask, dtype=np.float64)
    if images.shape[1:] != gt.shape or len(weights) != len(images):
        raise ValueError("weights, descriptors and mask dimensions disagree")
    return float(np.mean((combine(weights, images) - gt) ** 2))


def _population_fitness(pop, images, gt):
    flat = images.reshape(len(images), -1)
    sums = np.clip(pop @ flat, -1.0, 1.0)
    return np.mean((sums - gt.ravel()) ** 2, axis=1)


def ga_optimize(descriptors, gt_mask, cfg: GAConfig = GAConfig()):
    """Generational GA over weight vectors; returns (best weights, best-so-far history).

    Tournament selection of size 2, uniform crossover, per-gene Gaussian
    mutation, one elite carried over unchanged.
    """
    images = np.asarray(descriptors, dtype=np.float64)
    if images.ndim != 3 or len(images) == 0:
        raise ValueError("need at least one descriptor image")
    gt = np.asarray(gt_mask, dtype=np.float64)
    rng = np.random.default_rng(cfg.rng_seed)
    lo, hi = cfg.weight_range
    n, P = len(images), cfg.population
    pop = rng.uniform(lo, hi, size=(P, n))
    fit = _population_fitness(pop, images, gt)
    best_i = int(np.argmin(fit))
    best_w, best_f = pop[best_i].copy(), float(fit[best_i])
    history = [best_f]
    for _ in range(cfg.generations):
        children = [pop[best_i].copy()]
        while len(children) < P:
            parents = []
            for _ in range(2):
                a, b = rng.integers(P, size=2)
                parents.append(pop[a] if fit[a] <= fit[b] else pop[b])
            if rng.random() < cfg.crossover_rate:
                child = np.where(rng.random(n) < 0.5, parents[0], parents[1])
            else:
                child = parents[0].copy()
            mutate = rng.random(n) < cfg.mutation_rate
            child = child + mutate * rng.normal(0.0, cfg.mutation_sigma, size=n)
            children.append(np.clip(child, lo, hi))
        pop = np.array(children)
        fit = _population_fitness(pop, images, gt)
        best_i = int(np.argmin(fit))
        if fit[best_i] < best_f:
            best_w, best_f = pop[best_i].copy(), float(fit[best_i])
        history.append(best_f)
    return best_w, history


# -- final threshold -------------------------------------------------------

THRESHOLD_SCAN = (np.arange(101) - 50) / 50.0


def select_final_threshold(weighted_sum, gt_mask) -> float:
    """Level in a 101-point scan of [-1, 1] minimising the thresholded MSE."""
    ws = np.asarray(weighted_sum, dtype=np.float64)
    gt = np.asarray(gt_mask, dtype=np.float64)
    errs = [np.mean((np.where(ws > level, 1.0, -1.0) - gt) ** 2) for level in THRESHOLD_SCAN]
    return float(THRESHOLD_SCAN[int(np.argmin(errs))])


def normalized_sum(weights, images):
    """Weighted sum scaled into [-1, 1] by max(1, max |sum|)."""
    s = np.tensordot(np.asarray(weights, dtype=np.float64), np.asarray(images), axes=(-1, 0))
    return s / max(1.0, float(np.max(np.abs(s))))


def featured_from(weights, images, adc_bits: int | None):
    img = normalized_sum(weights, images)
    return img if adc_bits is None else quantize_array(img, adc_bits)


# -- end to end ------------------------------------------------------------

def train(frame: CellGrid, box: BoundingBox, cfg: TrainerConfig = TrainerConfig(),
          solver: SolverConfig = SolverConfig()) -> TrainedModel:
    H, W = frame.height, frame.width
    if not box.inside(H, W):
        raise ValueError(f"ground-truth box {box} outside {W}x{H} frame")
    gt = box.mask(H, W)
    pool = generate_pool(frame, cfg.n_kernels, cfg.seed, solver)
    kept = select_features(pool, box, min(cfg.n_keep, len(pool.descriptors)))
    images = np.array([d.image for d in kept.descriptors])
    weights, history = ga_optimize(images, gt, cfg.ga)
    log.info("GA best fitness %.5f after %d generations", history[-1], len(history) - 1)
    featured = featured_from(weights, images, cfg.adc_bits)
    level = select_final_threshold(featured, gt)
    binary = threshold_image(featured, level, solver)
    seeds = np.where((binary > 0) & (gt > 0), 1.0, -1.0)
    area = float(np.sum(recall_image(seeds, binary, solver) > 0))
    if area == 0:
        area = float(box.w * box.h)
    return TrainedModel(
        kernels=[d.kernel for d in kept.descriptors],
        pool_thresholds=[d.pool_threshold for d in kept.descriptors],
        weights=[float(w) for w in weights],
        final_threshold=level,
        reference_response_area=area,
        ground_truth_box=box,
        fitness_history=[float(f) for f in history],
    )
