"""Energy/delay model of the CeNN co-processor.

Units: time in microseconds, per-cell power in microwatts, energy in
microjoules (1 uW x 1 us = 1e-6 uJ).

OTA power scales with the transconductance, which scales with template
weight magnitude, so a template's per-cell OTA power is a unit power times
its weight magnitude relative to the isotropic diffusion template.  Each
cell also pays a fixed overhead (converter/register/multiplexer static
share).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from importlib import resources

from .core import Template
from .templates import diffusion, library

# per-cell OTA power by operation name, used by the "lookup" power mode
OTA_POWER_UW = {
    "Init": 1.5,
    "DIFFUS": 1.5,
    "SUB": 3.0,
    "THRES": 3.0,
    "LOGAND": 6.0,
    "RECALL": 21.8,
    "SHADOWL": 9.0,
    "SHADOWD": 9.0,
    "DILATION": 13.5,
}


@dataclass(frozen=True)
class CostParams:
    p_ota_unit_uW: float = 1.5
    p_overhead_uW: float = 0.08
    adc_bits: int = 8
    # energy of one 8-bit conversion; calibration constant, not a contract
    e_adc_conv_pJ: float = 0.5
    n_cells: int = 352 * 240
    power_mode: str = "lookup"

    def __post_init__(self):
        for name in ("p_ota_unit_uW", "p_overhead_uW", "e_adc_conv_pJ"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.adc_bits < 1 or self.n_cells < 1:
            raise ValueError("adc_bits and n_cells must be positive")
        if self.power_mode not in ("lookup", "template"):
            raise ValueError(f"unknown power_mode {self.power_mode!r}")


@dataclass(frozen=True)
class PipelineStep:
    """One row of a per-frame schedule.

    ``cells`` overrides the frame cell count for ops run on a sub-region;
    ``ota_power_uW`` pins the OTA power; ``adc`` marks a result read out to
    the host through the ADC.
    """

    name: str
    duration_us: float
    template: str | None = None
    cells: int | None = None
    ota_power_uW: float | None = None
    adc: bool = False

    def __post_init__(self):
        if not self.duration_us > 0:
            raise ValueError(f"step {self.name}: duration must be positive")
        if self.cells is not None and self.cells < 1:
            raise ValueError(f"step {self.name}: cells must be positive")


@dataclass(frozen=True)
class CostRow:
    name: str
    duration_us: float
    ota_power_uW: float
    total_power_uW: float
    energy_uJ: float


@dataclass
class CostReport:
    rows: list[CostRow]
    n_cells: int
    total_time_us: float = 0.0
    total_power_uW: float = 0.0
    total_energy_uJ: float = 0.0
    adc_accesses: int = 0
    adc_frequency_hz: float = 0.0
    adc_energy_uJ: float = 0.0
    frames: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def edp_uJ_us(self) -> float:
        return self.total_energy_uJ * self.total_time_us

    @property
    def sequence_time_s(self) -> float:
        return self.total_time_us * self.frames * 1e-6

    @property
    def sequence_energy_J(self) -> float:
        return self.total_energy_uJ * self.frames * 1e-6

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["operation", "time_us", "ota_power_uW", "total_power_uW", "energy_uJ"])
        for r in self.rows:
            w.writerow([r.name, f"{r.duration_us:.6g}", f"{r.ota_power_uW:.6g}",
                        f"{r.total_power_uW:.6g}", f"{r.energy_uJ:.6g}"])
        w.writerow(["Total/frame", f"{self.total_time_us:.6g}", "",
                    f"{self.total_power_uW:.6g}", f"{self.total_energy_uJ:.6g}"])
        w.writerow([f"Total ({self.frames} frames)", f"{self.sequence_time_s * 1e6:.6g}", "", "",
                    f"{self.sequence_energy_J * 1e6:.6g}"])
        return buf.getvalue()

    def to_text(self) -> str:
        head = ("Operation", "Time/frame (us)", "OTA power (uW)", "Total power (uW)",
                "Energy/frame (uJ)")
        body = [(r.name, f"{r.duration_us:.4g}", f"{r.ota_power_uW:.4g}",
                 f"{r.total_power_uW:.4g}", f"{r.energy_uJ:.4g}") for r in self.rows]
        body.append(("Total/frame", f"{self.total_time_us:.4g}", "",
                     f"{self.total_power_uW:.4g}", f"{self.total_energy_uJ:.4g}"))
        body.append((f"Total ({self.frames} frames)", f"{self.sequence_time_s:.4g} s", "", "",
                     f"{self.sequence_energy_J:.4g} J"))
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        fmt = lambda row: "  ".join(c.rjust(w) if i else c.ljust(w)
                                    for i, (c, w) in enumerate(zip(row, widths)))
        lines = [fmt(head), "-" * (sum(widths) + 2 * (len(widths) - 1))]
        lines += [fmt(row) for row in body]
        lines.append(f"n_cells={self.n_cells}  ADC: {self.adc_accesses} accesses/frame, "
                     f"{self.adc_frequency_hz / 1e3:.4g} kHz, {self.adc_energy_uJ:.4g} uJ/frame "
                     f"(not in row totals)")
        lines.append(f"EDP/frame = {self.edp_uJ_us:.4g} uJ*us")
        return "\n".join(lines) + "\n"


_REFERENCE_MAGNITUDE = diffusion(None).magnitude()


def op_power_per_cell(t: Template, params: CostParams = CostParams()) -> float:
    """Per-cell power (uW) of running template ``t``, scaled from its weights."""
    return params.p_ota_unit_uW * t.magnitude() / _REFERENCE_MAGNITUDE + params.p_overhead_uW


def op_energy(duration_us: float, power_per_cell_uW: float, n_cells: int) -> float:
    """Energy in uJ of ``n_cells`` cells drawing the given power for the duration."""
    if duration_us < 0 or power_per_cell_uW < 0 or n_cells < 0:
        raise ValueError("cost arguments must be non-negative")
    return power_per_cell_uW * n_cells * duration_us * 1e-6


def adc_schedule(n_accesses: int, total_runtime_us: float, params: CostParams = CostParams()):
    """Per-cell ADC clock (Hz, the register runs at the same rate) and energy (uJ)."""
    if not total_runtime_us > 0:
        raise ValueError("runtime must be positive")
    freq = n_accesses / (total_runtime_us * 1e-6)
    energy = n_accesses * params.e_adc_conv_pJ * 1e-6
    return freq, energy


def _lookup_power(name: str) -> float:
    if name in OTA_POWER_UW:
        return OTA_POWER_UW[name]
    if name.startswith("DIFFUS"):
        return OTA_POWER_UW["DIFFUS"]
    raise KeyError(f"no OTA power on record for operation {name!r}")


def _template_by_name() -> dict[str, Template]:
    out = {}
    for t in library():
        out.setdefault(t.name, t)
    return out


def step_ota_power(step: PipelineStep, params: CostParams) -> float:
    if step.ota_power_uW is not None:
        return step.ota_power_uW
    if params.power_mode == "lookup":
        return _lookup_power(step.name)
    name = step.template or step.name
    if name == "Init" or name.startswith("DIFFUS"):
        name = "DIFFUS"
    table = _template_by_name()
    if name not in table:
        raise KeyError(f"no template named {name!r} for power scaling")
    return op_power_per_cell(table[name], params) - params.p_overhead_uW


def frame_report(pipeline, params: CostParams = CostParams(), frames: int = 1) -> CostReport:
    """Cost rows and totals for one frame of ``pipeline`` (PipelineStep list)."""
    steps = list(pipeline)
    if not steps:
        raise ValueError("pipeline is empty")
    rows = []
    for s in steps:
        ota = step_ota_power(s, params)
        total = ota + params.p_overhead_uW
        cells = params.n_cells if s.cells is None else s.cells
        rows.append(CostRow(s.name, s.duration_us, ota, total, op_energy(s.duration_us, total, cells)))
    report = CostReport(rows, params.n_cells, frames=frames)
    report.total_time_us = sum(r.duration_us for r in rows)
    report.total_power_uW = sum(r.total_power_uW for r in rows)
    report.total_energy_uJ = sum(r.energy_uJ for r in rows)
    report.adc_accesses = sum(1 for s in steps if s.adc)
    freq, e_cell = adc_schedule(report.adc_accesses, report.total_time_us, params)
    report.adc_frequency_hz = freq
    report.adc_energy_uJ = e_cell * params.n_cells
    return report


def edp_compare(cenn: CostReport, cpu_energy_uJ: float, cpu_delay_us: float) -> float:
    """EDP improvement factor (CPU EDP over CeNN EDP); both per frame."""
    denom = cenn.total_energy_uJ * cenn.total_time_us
    if denom == 0:
        raise ZeroDivisionError("CeNN energy-delay product is zero")
    if cpu_energy_uJ <= 0 or cpu_delay_us <= 0:
        raise ValueError("CPU energy and delay must be positive")
    return cpu_energy_uJ * cpu_delay_us / denom


# -- pipeline JSON ---------------------------------------------------------

def load_pipeline(obj) -> tuple[list[PipelineStep], dict]:
    """Parse a pipeline JSON document (dict or text).

    Returns the steps and the document-level settings (``n_cells``,
    ``frames``) so callers can build matching CostParams.
    """
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "steps" not in obj:
        raise ValueError("pipeline JSON needs a top-level 'steps' list")
    steps = []
    for i, d in enumerate(obj["steps"]):
        try:
            steps.append(PipelineStep(**d))
        except TypeError as exc:
            raise ValueError(f"step {i}: {exc}") from None
    settings = {k: v for k, v in obj.items() if k != "steps"}
    return steps, settings


def dump_pipeline(steps, **settings) -> str:
    doc = dict(settings)
    doc["steps"] = [{k: v for k, v in asdict(s).items() if v is not None and v is not False}
                    for s in steps]
    return json.dumps(doc, indent=2) + "\n"


def default_pipeline() -> tuple[list[PipelineStep], dict]:
    """The shipped 14-step per-frame schedule of the tracking loop."""
    text = resources.files("cenntrack").joinpath("data/pipeline_tracking.json").read_text()
    return load_pipeline(text)
