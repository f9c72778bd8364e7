import pytest

from cenntrack.cost import (CostParams, PipelineStep, adc_schedule, default_pipeline,
                            dump_pipeline, edp_compare, frame_report, load_pipeline,
                            op_energy, op_power_per_cell, step_ota_power)
from cenntrack.templates import diffusion, logic_and, threshold


def test_op_energy_units():
    # 1 uW on 1e6 cells for 1 us is 1 uJ
    assert op_energy(1.0, 1.0, 10 ** 6) == 1.0
    with pytest.raises(ValueError):
        op_energy(-1.0, 1.0, 1)


def test_template_power_scaling():
    p = CostParams()
    assert op_power_per_cell(diffusion(), p) == pytest.approx(1.5 + 0.08)
    assert op_power_per_cell(threshold(0.0), p) == pytest.approx(3.0 + 0.08)
    assert op_power_per_cell(logic_and(), p) == pytest.approx(6.0 + 0.08)


def test_lookup_and_pinned_power():
    p = CostParams()
    assert step_ota_power(PipelineStep("DIFFUS2", 1.0), p) == 1.5
    assert step_ota_power(PipelineStep("X", 1.0, ota_power_uW=7.0), p) == 7.0
    with pytest.raises(KeyError):
        step_ota_power(PipelineStep("UNKNOWN", 1.0), p)


def test_adc_schedule():
    f, e = adc_schedule(3, 150.0, CostParams(e_adc_conv_pJ=1.0))
    assert f == pytest.approx(20000.0) and e == pytest.approx(3e-6)
    with pytest.raises(ValueError):
        adc_schedule(1, 0.0)


def test_report_totals_are_row_sums():
    steps = [PipelineStep("THRES", 2.0), PipelineStep("LOGAND", 1.0, cells=10)]
    r = frame_report(steps, CostParams(n_cells=100), frames=5)
    assert r.total_time_us == 3.0
    assert r.rows[0].energy_uJ == pytest.approx(3.08 * 100 * 2e-6)
    assert r.rows[1].energy_uJ == pytest.approx(6.08 * 10 * 1e-6)
    assert r.total_energy_uJ == pytest.approx(sum(x.energy_uJ for x in r.rows))
    assert r.sequence_time_s == pytest.approx(15e-6)
    assert "Total/frame" in r.to_text() and r.to_csv().startswith("operation,")


def test_empty_pipeline_rejected():
    with pytest.raises(ValueError):
        frame_report([])
    with pytest.raises(ValueError):
        load_pipeline("{}")
    with pytest.raises(ValueError):
        load_pipeline('{"steps": [{"name": "A", "duration_us": 1, "bogus": 2}]}')
    with pytest.raises(ValueError):
        PipelineStep("A", 0.0)


def test_pipeline_round_trip():
    steps, settings = default_pipeline()
    again, settings2 = load_pipeline(dump_pipeline(steps, **settings))
    assert again == steps and settings2 == settings


def test_edp_ratio():
    r = frame_report([PipelineStep("THRES", 2.0)])
    assert edp_compare(r, r.total_energy_uJ, r.total_time_us) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        edp_compare(r, 0.0, 1.0)


def test_template_mode_runs_default_pipeline():
    steps, settings = default_pipeline()
    r = frame_report(steps, CostParams(power_mode="template", n_cells=settings["n_cells"]))
    by_name = {row.name: row.ota_power_uW for row in r.rows}
    assert by_name["THRES"] == pytest.approx(3.0) and by_name["LOGAND"] == pytest.approx(6.0)
    assert by_name["SHADOWL"] == pytest.approx(9.0)


def test_params_validation():
    with pytest.raises(ValueError):
        CostParams(power_mode="guess")
    with pytest.raises(ValueError):
        CostParams(n_cells=0)
