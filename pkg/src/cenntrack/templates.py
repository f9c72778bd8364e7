"""Named CeNN templates for every operation of the tracking pipeline.

Template entries are not copied from any external table; each one is
pinned by the image-processing result it must produce once settled (see
the oracle tests).  Durations are simulator nanoseconds with tau = 1 ns.

Binary operations use a self-feedback of 2, which makes the cell bistable:
once a cell leaves [-1, 1] its output is exactly +1 or -1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Boundary, CellGrid, SolverConfig, Template, run

# ns of simulated time allowed per cell of shadow/recall front travel; the
# measured front speed is ~1.85 ns/cell (tests/test_templates.py)
K_PROP_NS = 3.0
# start-up and settling allowance on top of the travel time
PROP_MARGIN_NS = 20.0
# a pixel exactly at the threshold level must resolve to background; this
# shifts the unstable equilibrium of the threshold cell just above the level
TIE_BIAS = 1e-12

THRESHOLD_NS = 50.0
LOGIC_NS = 10.0
DILATION_NS = 10.0
POOL_DIFFUSION_NS = 25.0

DIRECTIONAL_FLOOR = 0.1
ISOTROPIC_WEIGHTS = np.array([[0.1, 0.15, 0.1],
                              [0.15, 0.0, 0.15],
                              [0.1, 0.15, 0.1]])

_ZERO = np.zeros((3, 3))


def _centre(value):
    m = np.zeros((3, 3))
    m[1, 1] = value
    return m


def diffusion(angle: float | None = None, duration_ns: float = 0.0) -> Template:
    """Diffusion template; ``angle=None`` is isotropic, otherwise degrees from +x.

    Off-centre weights sum to one and the centre is 1 - 1 = 0, so in the
    linear region the cell computes a discrete Laplacian and conserves mass.
    Directional kernels damp the weight of neighbours whose direction is
    off-axis by ``floor + (1 - floor) * cos^2``.
    """
    if angle is None:
        fb = ISOTROPIC_WEIGHTS.copy()
        name = "DIFFUS"
    else:
        theta = math.radians(angle)
        # one weight per opposite-neighbour pair, on a 2**-24 grid so the
        # kernel is exactly point-symmetric and sums to exactly one
        pairs = [(-1, -1), (-1, 0), (-1, 1), (0, -1)]
        raw = []
        for dr, dc in pairs:
            phi = math.atan2(-dr, dc)
            gain = DIRECTIONAL_FLOOR + (1 - DIRECTIONAL_FLOOR) * math.cos(phi - theta) ** 2
            raw.append(ISOTROPIC_WEIGHTS[dr + 1, dc + 1] * gain)
        half = 2 ** 23
        units = [round(half * w / sum(raw)) for w in raw]
        units[int(np.argmax(units))] += half - sum(units)
        fb = np.zeros((3, 3))
        for (dr, dc), n in zip(pairs, units):
            fb[1 + dr, 1 + dc] = fb[1 - dr, 1 - dc] = n / 2 ** 24
        name = f"DIFFUS{angle:g}"
    return Template(fb, _ZERO, 0.0, duration_ns, name)


def subtraction(tau_ns: float = 1.0) -> Template:
    """Initial state = minuend, input = subtrahend.

    A unit self-feedback cancels the leak in the linear region, so the state
    falls at the rate of the input and after one time constant holds
    minuend - subtrahend; saturation clamps the output.
    """
    return Template(_centre(1.0), _centre(-1.0), 0.0, tau_ns, "SUB")


def threshold(level: float) -> Template:
    """Initial state = image; output +1 where the image exceeds ``level``, else -1."""
    if not -1.0 <= level <= 1.0:
        raise ValueError(f"threshold level must be in [-1, 1], got {level}")
    return Template(_centre(2.0), _ZERO, -(level + TIE_BIAS), THRESHOLD_NS, "THRES")


def logic_and() -> Template:
    """Initial state and input are the operands; output is +1 only where both are +1."""
    return Template(_centre(2.0), _centre(2.0), -2.0, LOGIC_NS, "LOGAND")


def shadow(direction: str, extent: int = 0) -> Template:
    """Propagating shadow.

    ``left``: a pixel turns black when any pixel at or to its right is
    black, so column 0 ends up holding row occupancy.  ``down``: a pixel
    turns black when any pixel at or above it is black, so the bottom row
    holds column occupancy.  ``extent`` (cells along the propagation axis)
    sizes the run time.
    """
    fb = _centre(2.0)
    if direction == "left":
        fb[1, 2] = 2.0
        name = "SHADOWL"
    elif direction == "down":
        fb[0, 1] = 2.0
        name = "SHADOWD"
    else:
        raise ValueError(f"unknown shadow direction {direction!r}")
    return Template(fb, _centre(2.0), 2.0, propagation_ns(extent), name)


def dilation(radius_steps: int = 1) -> Template:
    """One 3x3 dilation step; apply ``radius_steps`` times (see :func:`dilate`).

    Initial state 0, input = image.  The drive (neighbourhood input sum
    plus 8) is -1 only when the whole neighbourhood is white, and at least
    +1 otherwise.
    """
    if radius_steps < 1:
        raise ValueError("radius_steps must be >= 1")
    return Template(_centre(2.0), np.ones((3, 3)), 8.0, DILATION_NS, "DILATION")


def recall(extent: int = 0) -> Template:
    """Reconstruction: initial state = markers, input = reference (8-connected).

    Inside the reference a white cell with k black neighbours has its
    unstable equilibrium at -2k: it stays white at k = 0 unless pushed
    past 0, and flips for k >= 1.  Outside the reference the drive is
    negative for any neighbourhood.  Markers must lie inside the reference
    (:func:`recall_image` enforces it), otherwise a decaying marker can
    transiently flip its neighbours.
    """
    fb = np.ones((3, 3))
    fb[1, 1] = 2.0
    return Template(fb, _centre(10.0), -2.0, propagation_ns(extent), "RECALL")


def propagation_ns(extent: int) -> float:
    return K_PROP_NS * extent + PROP_MARGIN_NS


# -- image level helpers ---------------------------------------------------

def is_binary(img, tol: float = 1e-6) -> bool:
    return bool(np.all(np.abs(np.abs(img) - 1.0) <= tol))


def _require_binary(*imgs):
    for img in imgs:
        if not is_binary(img):
            raise ValueError("operand is not a binary (+1/-1) image")


def _require_same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"operand shapes differ: {np.shape(a)} vs {np.shape(b)}")


def diffuse(img, angle: float | None, duration_ns: float, cfg: SolverConfig = SolverConfig()):
    grid = CellGrid(img, np.zeros_like(img), Boundary.ZERO_FLUX)
    return run(grid, diffusion(angle, duration_ns), cfg).outputs


def subtract(minuend, subtrahend, cfg: SolverConfig = SolverConfig()):
    """clamp(minuend - subtrahend) computed by the SUB template."""
    _require_same_shape(minuend, subtrahend)
    n = cfg.n_steps(cfg.tau_ns)
    if not math.isclose(n * cfg.dt_ns, cfg.tau_ns, rel_tol=1e-9):
        raise ValueError("SUB needs tau_ns to be a whole number of Euler steps")
    grid = CellGrid(minuend, subtrahend, Boundary.ZERO_FLUX)
    return run(grid, subtraction(cfg.tau_ns), cfg).outputs


def threshold_image(img, level: float, cfg: SolverConfig = SolverConfig()):
    grid = CellGrid(img, np.zeros_like(img), Boundary.FIXED_LOW)
    return run(grid, threshold(level), cfg).outputs


def logic_and_image(a, b, cfg: SolverConfig = SolverConfig()):
    _require_same_shape(a, b)
    _require_binary(a, b)
    grid = CellGrid(a, b, Boundary.FIXED_LOW)
    return run(grid, logic_and(), cfg).outputs


def shadow_image(img, direction: str, cfg: SolverConfig = SolverConfig()):
    img = np.asarray(img, dtype=np.float64)
    extent = img.shape[-1] if direction == "left" else img.shape[-2]
    grid = CellGrid(img, img, Boundary.FIXED_LOW)
    return run(grid, shadow(direction, extent), cfg).outputs


def dilate(img, radius_steps: int = 1, cfg: SolverConfig = SolverConfig()):
    img = np.asarray(img, dtype=np.float64)
    tmpl = dilation(radius_steps)
    for _ in range(radius_steps):
        grid = CellGrid(np.zeros_like(img), img, Boundary.FIXED_LOW)
        img = run(grid, tmpl, cfg).outputs
    return img


def recall_image(markers, reference, cfg: SolverConfig = SolverConfig(), max_rounds: int | None = None):
    """Components of ``reference`` touching ``markers``.

    A front may follow a winding path longer than the grid extent, so after
    the first full-extent run the template keeps running in short probes
    until a probe leaves the binary output unchanged.
    """
    _require_same_shape(markers, reference)
    _require_binary(markers, reference)
    markers = logic_and_image(markers, reference, cfg)
    extent = max(markers.shape[-2:])
    tmpl = recall(extent)
    probe_ns = 2 * K_PROP_NS
    if max_rounds is None:
        max_rounds = int(markers.shape[-2] * markers.shape[-1] * K_PROP_NS / probe_ns) + 2
    grid = run(CellGrid(markers, reference, Boundary.FIXED_LOW), tmpl, cfg)
    prev = grid.outputs
    for _ in range(max_rounds):
        grid = run(grid, tmpl, cfg, duration_ns=probe_ns)
        out = grid.outputs
        if np.array_equal(out, prev) and is_binary(out, 0.0):
            return out
        prev = out
    raise RuntimeError("recall did not settle")


@dataclass(frozen=True)
class DoGKernel:
    """Two diffusions of the same image followed by SUB.

    ``angle1``/``angle2`` of None mean isotropic.  The response is
    diffusion1 - diffusion2, so steps1 < steps2 gives a centre-positive
    blob detector for black (+1) objects.
    """

    steps1: int
    steps2: int
    angle1: float | None = None
    angle2: float | None = None

    def __post_init__(self):
        for s in (self.steps1, self.steps2):
            if not 10 <= s <= 75:
                raise ValueError(f"DoG step count {s} outside [10, 75]")
        if self.steps1 == self.steps2 and self.angle1 == self.angle2:
            raise ValueError("identical diffusions give a zero DoG response")

    @property
    def diffuse1(self) -> Template:
        return diffusion(self.angle1, float(self.steps1))

    @property
    def diffuse2(self) -> Template:
        return diffusion(self.angle2, float(self.steps2))

    def to_dict(self) -> dict:
        return {"steps1": self.steps1, "steps2": self.steps2,
                "angle1": self.angle1, "angle2": self.angle2}

    @classmethod
    def from_dict(cls, d: dict) -> "DoGKernel":
        return cls(int(d["steps1"]), int(d["steps2"]), d.get("angle1"), d.get("angle2"))


def apply_dog(grid: CellGrid, k: DoGKernel, cfg: SolverConfig = SolverConfig()) -> CellGrid:
    """Band-pass response of the grid state; both diffusions start from it."""
    img = grid.state
    d1 = run(CellGrid(img, np.zeros_like(img), grid.boundary), k.diffuse1, cfg).outputs
    d2 = run(CellGrid(img, np.zeros_like(img), grid.boundary), k.diffuse2, cfg).outputs
    return CellGrid(subtract(d1, d2, cfg), np.zeros_like(img), grid.boundary)


# -- plain-text template table ---------------------------------------------

def dump_table(templates) -> str:
    """One line per 3x3 template: name, 9 feedback, 9 control, offset, duration."""
    lines = ["# name fb00 fb01 fb02 fb10 fb11 fb12 fb20 fb21 fb22 "
             "ct00 ct01 ct02 ct10 ct11 ct12 ct20 ct21 ct22 offset duration_ns"]
    for t in templates:
        if t.feedback.shape != (3, 3):
            raise ValueError("the text table holds 3x3 templates only")
        if not t.name or any(c.isspace() for c in t.name):
            raise ValueError(f"template name {t.name!r} must be a single token")
        fields = [t.name] + [repr(float(v)) for v in t.feedback.ravel()]
        fields += [repr(float(v)) for v in t.control.ravel()]
        fields += [repr(t.offset), repr(t.duration_ns)]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def load_table(text: str) -> list[Template]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 21:
            raise ValueError(f"line {lineno}: expected 21 fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        out.append(Template(np.reshape(vals[:9], (3, 3)), np.reshape(vals[9:18], (3, 3)),
                            vals[18], vals[19], parts[0]))
    return out


def library() -> list[Template]:
    """Canonical instances of every shipped template."""
    return [diffusion(None, POOL_DIFFUSION_NS), diffusion(0.0), diffusion(45.0),
            diffusion(90.0), diffusion(135.0), subtraction(), threshold(0.0),
            logic_and(), shadow("left"), shadow("down"), dilation(), recall()]
