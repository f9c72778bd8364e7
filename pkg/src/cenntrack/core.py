"""Template-level simulator of a cellular neural network array.

Each cell state relaxes towards the weighted sum of its neighbours' outputs
(feedback weights), its neighbours' inputs (control weights) and a constant
offset, with unit leak and time constant ``tau_ns``.  The cell output clips
the state to [-1, 1].  The state is integrated with explicit Euler.  Arrays
may carry leading batch dimensions; the last two axes are always
(height, width).

Pixel convention: +1 is black / foreground, -1 is white / background.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import _fallback

if os.environ.get("CENNTRACK_PURE"):
    from . import _fallback as _backend
else:
    try:
        from . import _kernels as _backend
    except ImportError:  # extension not built
        from . import _fallback as _backend

BACKEND = "compiled" if _backend.__name__.endswith("_kernels") else "python"


class Boundary(enum.Enum):
    """How out-of-grid neighbours are resolved.

    ZERO_FLUX: an off-grid neighbour reads the centre cell's own value, so no
    link crosses the edge with a nonzero difference and symmetric diffusion
    conserves the mean.  FIXED_*: off-grid cells hold -1 or +1.
    """

    ZERO_FLUX = "zero_flux"
    FIXED_LOW = "fixed_low"
    FIXED_HIGH = "fixed_high"

    @property
    def fixed_value(self):
        return {Boundary.FIXED_LOW: -1.0, Boundary.FIXED_HIGH: 1.0}.get(self)


@dataclass(frozen=True)
class Template:
    """One CeNN instruction.

    Attributes:
        feedback: weights on neighbour outputs, shape (2k+1, 2k+1).
        control: weights on neighbour inputs, same shape.
        offset: constant bias.
        duration_ns: run time; 0 leaves the grid untouched.
        name: label used by the cost model.
    """

    feedback: np.ndarray
    control: np.ndarray
    offset: float = 0.0
    duration_ns: float = 0.0
    name: str = ""

    def __post_init__(self):
        fb = np.array(self.feedback, dtype=np.float64)
        ctl = np.array(self.control, dtype=np.float64)
        if fb.ndim != 2 or fb.shape[0] != fb.shape[1] or fb.shape[0] % 2 == 0:
            raise ValueError(f"feedback must be square with odd side, got {fb.shape}")
        if ctl.shape != fb.shape:
            raise ValueError(f"feedback and control shapes differ: {fb.shape} vs {ctl.shape}")
        if fb.shape[0] < 3:
            raise ValueError("neighbourhood radius must be >= 1")
        if not (np.all(np.isfinite(fb)) and np.all(np.isfinite(ctl)) and math.isfinite(self.offset)):
            raise ValueError("template entries must be finite")
        if not self.duration_ns >= 0:
            raise ValueError(f"duration_ns must be >= 0, got {self.duration_ns}")
        fb.setflags(write=False)
        ctl.setflags(write=False)
        object.__setattr__(self, "feedback", fb)
        object.__setattr__(self, "control", ctl)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "duration_ns", float(self.duration_ns))

    @property
    def radius(self) -> int:
        return self.feedback.shape[0] // 2

    def with_duration(self, duration_ns: float) -> "Template":
        return replace(self, duration_ns=duration_ns)

    def magnitude(self) -> float:
        """Sum of absolute template weights (the bias is excluded)."""
        return float(np.abs(self.feedback).sum() + np.abs(self.control).sum())

    def __eq__(self, other):
        if not isinstance(other, Template):
            return NotImplemented
        return (np.array_equal(self.feedback, other.feedback)
                and np.array_equal(self.control, other.control)
                and self.offset == other.offset and self.duration_ns == other.duration_ns
                and self.name == other.name)

    def __hash__(self):
        return hash((self.feedback.tobytes(), self.control.tobytes(), self.offset,
                     self.duration_ns, self.name))


@dataclass(frozen=True)
class SolverConfig:
    dt_ns: float = 0.1
    tau_ns: float = 1.0

    def __post_init__(self):
        if not (self.dt_ns > 0 and self.tau_ns > 0):
            raise ValueError("dt_ns and tau_ns must be positive")
        if self.dt_ns > self.tau_ns / 2:
            raise ValueError(f"dt_ns={self.dt_ns} exceeds tau_ns/2={self.tau_ns / 2}")

    @property
    def h(self) -> float:
        return self.dt_ns / self.tau_ns

    def n_steps(self, duration_ns: float) -> int:
        if duration_ns <= 0:
            return 0
        # guard against 1.1/0.1 = 11.000000000000002
        return int(math.ceil(duration_ns / self.dt_ns - 1e-9))


@dataclass
class CellGrid:
    """Cell states and inputs of an array of cells.

    ``inputs`` must stay in [-1, 1]; ``state`` may transiently leave it.
    """

    state: np.ndarray
    inputs: np.ndarray = None
    boundary: Boundary = Boundary.ZERO_FLUX

    def __post_init__(self):
        self.state = np.array(self.state, dtype=np.float64)
        if self.inputs is None:
            self.inputs = np.zeros_like(self.state)
        else:
            self.inputs = np.array(self.inputs, dtype=np.float64)
        if self.state.ndim < 2:
            raise ValueError("grid needs at least two dimensions")
        if self.inputs.shape != self.state.shape:
            raise ValueError(f"state {self.state.shape} and input {self.inputs.shape} differ in shape")
        if np.any(np.abs(self.inputs) > 1.0):
            raise ValueError("inputs must lie in [-1, 1]")
        self.boundary = Boundary(self.boundary)

    @property
    def height(self) -> int:
        return self.state.shape[-2]

    @property
    def width(self) -> int:
        return self.state.shape[-1]

    @property
    def outputs(self) -> np.ndarray:
        return output(self.state)

    def copy(self) -> "CellGrid":
        return CellGrid(self.state.copy(), self.inputs.copy(), self.boundary)

    def with_state(self, state) -> "CellGrid":
        return CellGrid(state, self.inputs, self.boundary)


def output(state):
    """Piecewise-linear saturation, the cell output nonlinearity."""
    return _backend.saturate(np.asarray(state, dtype=np.float64))


def _check_finite(grid: CellGrid):
    if not np.all(np.isfinite(grid.state)):
        raise FloatingPointError("non-finite cell state")
    if not np.all(np.isfinite(grid.inputs)):
        raise FloatingPointError("non-finite cell input")


def feedforward(inputs, control, offset, boundary: Boundary):
    """Constant drive of every cell: control-weighted neighbour inputs plus offset."""
    inputs = np.asarray(inputs, dtype=np.float64)
    taps, radius = _fallback._taps(np.asarray(control, dtype=np.float64))
    fixed = boundary.fixed_value
    acc = _fallback.neighbour_sum(inputs, taps, radius, fixed is not None,
                                  0.0 if fixed is None else fixed)
    return acc + offset


def _integrate(grid: CellGrid, template: Template, cfg: SolverConfig, n_steps: int) -> CellGrid:
    _check_finite(grid)
    if n_steps == 0:
        return grid.copy()
    shape = grid.state.shape
    x3 = grid.state.reshape((-1,) + shape[-2:])
    bias = feedforward(grid.inputs, template.control, template.offset, grid.boundary).reshape(x3.shape)
    fixed = grid.boundary.fixed_value
    x_new = _backend.euler(x3, bias, template.feedback, cfg.h, n_steps,
                           fixed is not None, 0.0 if fixed is None else fixed)
    out = CellGrid(np.asarray(x_new).reshape(shape), grid.inputs.copy(), grid.boundary)
    _check_finite(out)
    return out


def step(grid: CellGrid, template: Template, cfg: SolverConfig = SolverConfig()) -> CellGrid:
    """One explicit Euler update of every cell."""
    return _integrate(grid, template, cfg, 1)


def run(grid: CellGrid, template: Template, cfg: SolverConfig = SolverConfig(),
        duration_ns: float | None = None) -> CellGrid:
    """Integrate for ``template.duration_ns`` (or the override) nanoseconds."""
    duration = template.duration_ns if duration_ns is None else duration_ns
    if duration < 0:
        raise ValueError("duration must be >= 0")
    return _integrate(grid, template, cfg, cfg.n_steps(duration))


def quantize(grid: CellGrid, bits: int = 8) -> CellGrid:
    """Snap states to ``2**bits`` uniform levels on [-1, 1] (ADC/DAC round trip)."""
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    return grid.with_state(quantize_array(grid.state, bits))


def quantize_array(values, bits: int = 8):
    lsb = 2.0 / (2 ** bits - 1)
    return np.round((np.clip(values, -1.0, 1.0) + 1.0) / lsb) * lsb - 1.0


def gray_to_cell(gray):
    """Map 8-bit gray values to cell values (black -> +1, white -> -1)."""
    return 1.0 - 2.0 * np.asarray(gray, dtype=np.float64) / 255.0


def cell_to_gray(values):
    v = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    return np.round((1.0 - v) * 127.5).astype(np.uint8)


def state_bound(template: Template) -> float:
    """Upper bound on the absolute state reachable from states within [-1, 1]."""
    return 1.0 + template.magnitude() + abs(template.offset)
