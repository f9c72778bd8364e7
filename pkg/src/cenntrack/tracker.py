"""Per-frame tracking loop: CeNN feature extraction and localisation, host-side
weighted sum, and two constant-velocity Kalman filters (centroid and size)."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import Boundary, CellGrid, SolverConfig, run
from .templates import (dilate, diffusion, logic_and_image, recall_image, shadow_image,
                        subtract, threshold_image)
from .trainer import BoundingBox, TrainedModel, featured_from, pool_with

__all__ = ["BoundingBox", "KalmanFilter", "TrackState", "TrackerConfig", "TargetLost",
           "kalman_step", "init", "featured_image", "localize", "resize_rule",
           "process_frame", "track"]

MIN_SIZE = 4

_F = np.array([[1.0, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]])
_H = np.array([[1.0, 0, 0, 0], [0, 1, 0, 0]])


class TargetLost(Exception):
    """Localisation found no object support connected to the location mask."""


@dataclass(frozen=True)
class TrackerConfig:
    dilation_radius: int = 3
    weak_q: float = 1.0
    weak_r: float = 4.0
    strong_q: float = 0.01
    strong_r: float = 25.0
    initial_velocity_var: float = 10.0
    adc_bits: int | None = 8

    def __post_init__(self):
        if self.dilation_radius < 1:
            raise ValueError("dilation_radius must be >= 1")
        for name in ("weak_q", "weak_r", "strong_q", "strong_r", "initial_velocity_var"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class KalmanFilter:
    """State (p1, p2, v1, v2) under a constant-velocity model, unit frame step."""

    mean: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name, shape in (("mean", (4,)), ("P", (4, 4)), ("Q", (4, 4)), ("R", (2, 2))):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        _require_psd(self.P, "P")
        for name in ("Q", "R"):
            if np.min(np.linalg.eigvalsh(getattr(self, name))) <= 0:
                raise ValueError(f"{name} must be positive definite")

    @classmethod
    def create(cls, position, q: float, noise: float, velocity_var: float = 10.0):
        mean = np.array([position[0], position[1], 0.0, 0.0])
        P = np.diag([noise, noise, velocity_var, velocity_var])
        return cls(mean, P, q * np.eye(4), noise * np.eye(2))

    @property
    def position(self):
        return float(self.mean[0]), float(self.mean[1])

    def predict(self) -> "KalmanFilter":
        return kalman_step(self, None)


def _require_psd(P, name="P"):
    if not np.allclose(P, P.T, rtol=0, atol=1e-9 * max(1.0, np.abs(P).max())):
        raise ValueError(f"{name} is not symmetric")
    if np.min(np.linalg.eigvalsh(P)) < -1e-9 * max(1.0, np.abs(P).max()):
        raise ValueError(f"{name} is not positive semidefinite")


def kalman_step(kf: KalmanFilter, measurement=None) -> KalmanFilter:
    """Predict one frame ahead, then update if a 2-vector measurement is given."""
    mean = _F @ kf.mean
    P = _F @ kf.P @ _F.T + kf.Q
    if measurement is not None:
        meas = np.asarray(measurement, dtype=np.float64)
        if meas.shape != (2,) or not np.all(np.isfinite(meas)):
            raise ValueError(f"measurement must be two finite numbers, got {measurement!r}")
        innov_cov = _H @ P @ _H.T + kf.R
        K = np.linalg.solve(innov_cov, _H @ P).T
        mean = mean + K @ (meas - _H @ mean)
        # Joseph form keeps P positive semidefinite
        I_KH = np.eye(4) - K @ _H
        P = I_KH @ P @ I_KH.T + K @ kf.R @ K.T
    P = (P + P.T) / 2
    return KalmanFilter(mean, P, kf.Q, kf.R)


@dataclass
class TrackState:
    model: TrainedModel
    box: BoundingBox
    location_mask: np.ndarray
    motion_kf: KalmanFilter
    size_kf: KalmanFilter
    frame_index: int = 0
    config: TrackerConfig = field(default_factory=TrackerConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def shape(self):
        return self.location_mask.shape


def _as_grid(frame) -> CellGrid:
    if isinstance(frame, CellGrid):
        return frame
    return CellGrid(np.asarray(frame, dtype=np.float64), None, Boundary.ZERO_FLUX)


def init(model: TrainedModel, first_frame, box: BoundingBox,
         config: TrackerConfig = TrackerConfig(), solver: SolverConfig = SolverConfig()) -> TrackState:
    grid = _as_grid(first_frame)
    H, W = grid.height, grid.width
    if not box.inside(H, W):
        raise ValueError(f"box {box} outside {W}x{H} frame")
    mask = dilate(box.mask(H, W), config.dilation_radius, solver)
    motion = KalmanFilter.create(box.centre, config.weak_q, config.weak_r, config.initial_velocity_var)
    size = KalmanFilter.create((box.w, box.h), config.strong_q, config.strong_r,
                               config.initial_velocity_var)
    return TrackState(model, box, mask, motion, size, 0, config, solver)


def _dog_responses(grid: CellGrid, kernels, cfg: SolverConfig):
    """DoG response per kernel.

    Diffusions of one orientation are run once each, continuing from the
    shorter run; Euler integration composes, so this equals running every
    diffusion from the frame.
    """
    wanted = {}
    for k in kernels:
        wanted.setdefault(k.angle1, set()).add(k.steps1)
        wanted.setdefault(k.angle2, set()).add(k.steps2)
    diffused = {}
    for angle, steps in wanted.items():
        state, done = grid, 0
        tmpl = diffusion(angle)
        for s in sorted(steps):
            state = run(state, tmpl, cfg, duration_ns=float(s - done))
            done = s
            diffused[angle, s] = state.outputs
    return [subtract(diffused[k.angle1, k.steps1], diffused[k.angle2, k.steps2], cfg)
            for k in kernels]


def featured_image(frame, model: TrainedModel, cfg: SolverConfig = SolverConfig(),
                   adc_bits: int | None = 8) -> np.ndarray:
    """Normalised weighted sum of pooled DoG responses, read out through the ADC."""
    grid = _as_grid(frame)
    grid = CellGrid(grid.state, None, grid.boundary)
    responses = _dog_responses(grid, model.kernels, cfg)
    pooled = [pool_with(resp, lvl, cfg) for resp, lvl in zip(responses, model.pool_thresholds)]
    return featured_from(model.weights, np.array(pooled), adc_bits)


def _extent(line) -> tuple[int, int] | None:
    idx = np.flatnonzero(np.asarray(line) > 0)
    if idx.size == 0:
        return None
    return int(idx[0]), int(idx[-1])


def localize(state: TrackState, featured):
    """Return (measured box, object mask); raises TargetLost on an empty object."""
    cfg = state.solver
    featured = np.asarray(featured, dtype=np.float64)
    if featured.shape != state.shape:
        raise ValueError(f"featured image {featured.shape} vs mask {state.shape}")
    binary = threshold_image(featured, state.model.final_threshold, cfg)
    markers = logic_and_image(binary, state.location_mask, cfg)
    obj = recall_image(markers, binary, cfg)
    if not np.any(obj > 0):
        raise TargetLost(f"frame {state.frame_index}: no object support")
    rows = _extent(shadow_image(obj, "left", cfg)[:, 0])
    cols = _extent(shadow_image(obj, "down", cfg)[-1, :])
    box = BoundingBox(cols[0], rows[0], cols[1] - cols[0] + 1, rows[1] - rows[0] + 1)
    return box, obj


def resize_rule(state: TrackState, object_mask) -> tuple[float, float] | None:
    """Size proposal scaled by the square root of the relative response area.

    None for an empty mask: the size filter then coasts.
    """
    ref = state.model.reference_response_area
    if not ref > 0:
        raise ValueError("reference response area must be positive")
    area = float(np.sum(np.asarray(object_mask) > 0))
    if area == 0:
        return None
    scale = np.sqrt(area / ref)
    H, W = state.shape
    gt = state.model.ground_truth_box
    return (float(np.clip(gt.w * scale, MIN_SIZE, W)), float(np.clip(gt.h * scale, MIN_SIZE, H)))


def _box_from(centre, size, H, W) -> BoundingBox:
    w = int(np.clip(round(size[0]), 1, W))
    h = int(np.clip(round(size[1]), 1, H))
    x = int(np.clip(round(centre[0] - (w - 1) / 2), 0, W - w))
    y = int(np.clip(round(centre[1] - (h - 1) / 2), 0, H - h))
    return BoundingBox(x, y, w, h)


@dataclass(frozen=True)
class FrameResult:
    frame: int
    box: BoundingBox
    lost: bool
    area: int
    object_mask: np.ndarray | None = None


def process_frame(state: TrackState, frame) -> tuple[TrackState, FrameResult]:
    grid = _as_grid(frame)
    H, W = state.shape
    if (grid.height, grid.width) != (H, W):
        raise ValueError(f"frame {grid.width}x{grid.height} does not match tracker {W}x{H}")
    cfg = state.solver
    featured = featured_image(grid, state.model, cfg, state.config.adc_bits)
    try:
        _, obj = localize(state, featured)
    except TargetLost:
        obj = None
    if obj is None:
        motion = kalman_step(state.motion_kf, None)
        size = kalman_step(state.size_kf, None)
        area = 0
    else:
        ys, xs = np.nonzero(obj > 0)
        motion = kalman_step(state.motion_kf, (xs.mean(), ys.mean()))
        size = kalman_step(state.size_kf, resize_rule(state, obj))
        area = int(xs.size)
    box = _box_from(motion.position, size.position, H, W)
    support = obj if obj is not None else box.mask(H, W)
    mask = dilate(support, state.config.dilation_radius, cfg)
    new = replace(state, box=box, location_mask=mask, motion_kf=motion, size_kf=size,
                  frame_index=state.frame_index + 1)
    return new, FrameResult(new.frame_index, box, obj is None, area, obj)


def track(model: TrainedModel, frames, box: BoundingBox, config: TrackerConfig = TrackerConfig(),
          solver: SolverConfig = SolverConfig(), keep_masks: bool = False):
    """Initialise on frame 0 with ``box`` and track the remaining frames.

    Frame 0 is reported as the given box.  Yields FrameResult per frame.
    """
    frames = iter(frames)
    first = next(frames)
    state = init(model, first, box, config, solver)
    yield FrameResult(0, box, False, int(box.w * box.h), None)
    for frame in frames:
        state, res = process_frame(state, frame)
        yield res if keep_masks else replace(res, object_mask=None)
