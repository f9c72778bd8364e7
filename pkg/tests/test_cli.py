import json

import pytest

from cenntrack.cli import main
from cenntrack.trainer import TrainedModel


@pytest.fixture(scope="module")
def seq(tmp_path_factory):
    d = tmp_path_factory.mktemp("seq")
    assert main(["synth", "--out", str(d), "--n-frames", "5"]) == 0
    return d


@pytest.fixture(scope="module")
def model_path(seq, tmp_path_factory):
    out = tmp_path_factory.mktemp("m") / "model.json"
    cfg = tmp_path_factory.mktemp("c") / "cfg.json"
    cfg.write_text(json.dumps({"trainer": {"n_kernels": 8, "ga": {"generations": 20}}}))
    assert main(["train", "--frames", str(seq), "--gt", str(seq / "groundtruth.txt"),
                 "--config", str(cfg), "--out", str(out)]) == 0
    return out


def test_synth_writes_frames(seq):
    assert len(list(seq.glob("*.pgm"))) == 5
    assert (seq / "groundtruth.txt").read_text().splitlines()[0] == "11,15,20,20"


def test_train_model_parses(model_path):
    m = TrainedModel.from_json(model_path.read_text())
    assert len(m.kernels) >= 1 and len(m.fitness_history) == 21


def test_track_and_score(seq, model_path, tmp_path, capsys):
    res = tmp_path / "r.csv"
    assert main(["track", "--frames", str(seq), "--gt", str(seq / "groundtruth.txt"),
                 "--model", str(model_path), "--out", str(res), "--masks", str(tmp_path / "m")]) == 0
    lines = res.read_text().splitlines()
    assert lines[0] == "frame,x,y,w,h,lost,area" and len(lines) == 6
    assert len(list((tmp_path / "m").glob("*.pgm"))) == 4
    curve = tmp_path / "c.csv"
    assert main(["score", "--results", str(res), "--gt", str(seq / "groundtruth.txt"),
                 "--out", str(curve)]) == 0
    assert "AUC" in capsys.readouterr().out
    assert len(curve.read_text().splitlines()) == 102


def test_score_identical_boxes(seq, tmp_path, capsys):
    rows = ["frame,x,y,w,h,lost,area"]
    for i, line in enumerate((seq / "groundtruth.txt").read_text().split()):
        x, y, w, h = (int(v) for v in line.split(","))
        rows.append(f"{i},{x - 1},{y - 1},{w},{h},0,{w * h}")
    p = tmp_path / "r.csv"
    p.write_text("\n".join(rows) + "\n")
    assert main(["score", "--results", str(p), "--gt", str(seq / "groundtruth.txt")]) == 0
    assert capsys.readouterr().out.strip() == "AUC 1.0000"


def test_score_disjoint_boxes(seq, tmp_path, capsys):
    p = tmp_path / "r.csv"
    p.write_text("frame,x,y,w,h,lost,area\n" + "".join(f"{i},200,0,5,5,0,25\n" for i in range(5)))
    assert main(["score", "--results", str(p), "--gt", str(seq / "groundtruth.txt")]) == 0
    assert float(capsys.readouterr().out.split()[1]) <= 0.005


def test_missing_ground_truth_is_usage_error(seq, tmp_path):
    assert main(["train", "--frames", str(seq), "--gt", str(tmp_path / "none.txt"),
                 "--out", str(tmp_path / "m.json")]) == 2


def test_corrupt_model_is_usage_error(seq, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["track", "--frames", str(seq), "--gt", str(seq / "groundtruth.txt"),
                 "--model", str(bad), "--out", str(tmp_path / "r.csv")]) == 2
    assert "invalid model" in capsys.readouterr().err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["cost", "--cpu", "1"])
    assert exc.value.code == 2


def test_cost_default_and_cpu(tmp_path, capsys):
    csv_path = tmp_path / "cost.csv"
    assert main(["cost", "--cpu", "112.69934,159.7", "--csv", str(csv_path)]) == 0
    out = capsys.readouterr().out
    assert "EDP improvement (CPU / CeNN) = 1.00" in out
    assert csv_path.read_text().startswith("operation,")


def test_cost_empty_pipeline(tmp_path):
    p = tmp_path / "p.json"
    p.write_text('{"steps": []}')
    assert main(["cost", "--pipeline", str(p)]) == 2
