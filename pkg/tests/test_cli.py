import json

import numpy as np
import pytest

from pnpf.bundle import save_model
from pnpf.cli import main
from pnpf.datasets import load_task


@pytest.fixture(scope="module")
def bundle_path(tmp_path_factory, line_model):
    p = tmp_path_factory.mktemp("cli") / "line.pnpf"
    save_model(line_model, p)
    return p


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["rollout", "--frobnicate"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_gen_data_roundtrip(tmp_path, capsys):
    out = tmp_path / "eight.json"
    rc = main(["gen-data", "--shape", "figure-eight", "--out", str(out),
               "--demos", "3", "--noise", "0.01", "--seed", "5"])
    assert rc == 0
    assert "eight.json" in capsys.readouterr().out
    task = load_task(out)
    assert len(task.demos) == 3
    assert task.mode == "point-to-point"


def test_gen_data_periodic_and_lasa(tmp_path):
    out = tmp_path / "p.json"
    assert main(["gen-data", "--shape", "periodic-eight", "--out", str(out),
                 "--demos", "2"]) == 0
    assert load_task(out).mode == "periodic"
    out2 = tmp_path / "l.json"
    assert main(["gen-data", "--shape", "lasa:gshape", "--out", str(out2)]) == 0
    assert load_task(out2).units == "cm"


def test_gen_data_bad_shape_exits_1(capsys):
    rc = main(["gen-data", "--shape", "dodecagon", "--out", "/tmp/x.json"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_rollout_writes_traces(tmp_path, bundle_path, line_model, capsys):
    m = line_model
    start = ",".join(repr(float(v)) for v in m.nominal.point_at_phase(m.s0))
    csv_out = tmp_path / "t.csv"
    jsonl_out = tmp_path / "t.jsonl"
    svg_out = tmp_path / "t.svg"
    rc = main(["rollout", "--model", str(bundle_path), "--start", start,
               "--horizon", "60", "--out-csv", str(csv_out),
               "--out-jsonl", str(jsonl_out), "--plot", str(svg_out)])
    assert rc == 0
    assert "final_s=" in capsys.readouterr().out
    assert csv_out.read_text().startswith("step,")
    rows = [json.loads(line) for line in jsonl_out.read_text().splitlines()]
    assert rows[0]["s"] == m.s0
    assert svg_out.read_text().startswith("<svg")


def test_rollout_with_schedule(tmp_path, bundle_path, line_model):
    m = line_model
    sched = tmp_path / "sched.json"
    sched.write_text(json.dumps([[5, "teleport", [0.05, 0.0]]]))
    out = tmp_path / "t.jsonl"
    rc = main(["rollout", "--model", str(bundle_path),
               "--start", ",".join(repr(float(v)) for v in m.nominal.point_at_phase(m.s0)),
               "--horizon", "30", "--schedule", str(sched),
               "--out-jsonl", str(out)])
    assert rc == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert "perturbation:teleport" in rows[6]["events"]


def test_rollout_bad_start_exits_1(bundle_path, capsys):
    rc = main(["rollout", "--model", str(bundle_path), "--start", "a,b"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_rollout_missing_bundle_exits_1(capsys):
    rc = main(["rollout", "--model", "/nonexistent.pnpf", "--start", "0,0"])
    assert rc == 1


def test_stability_subcommand(tmp_path, bundle_path, capsys):
    out = tmp_path / "sweep.json"
    svg = tmp_path / "sweep.svg"
    rc = main(["stability", "--model", str(bundle_path), "--out", str(out),
               "--phases", "4", "--samples", "6", "--horizon", "25",
               "--plot", str(svg)])
    assert rc == 0
    rec = json.loads(out.read_text())
    assert rec["n_phases"] == 4 and rec["n_samples"] == 6
    assert "success_fraction=" in capsys.readouterr().out
    assert svg.read_text().startswith("<svg")


def test_bench_subcommand_with_failing_cells(tmp_path, capsys):
    # a deliberately undertrained config: the report must still be written,
    # with the per-cell errors recorded
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "version": 1,
        "task": {"generator": {"kind": "figure-eight", "n_demos": 3,
                               "n_points": 100}},
        "seeds": [0, 1],
        "pipeline": {
            "n_candidates": 4,
            "generator": {"epochs": 2, "fit_tolerance": 1e-4},
            "nominal_field": {"epochs": 2},
            "safety_field": {"epochs": 2},
        },
    }))
    rep_json = tmp_path / "report.json"
    rep_csv = tmp_path / "report.csv"
    rc = main(["bench", "--config", str(cfg), "--out", str(rep_json),
               "--out-csv", str(rep_csv)])
    assert rc == 0
    rep = json.loads(rep_json.read_text())
    assert len(rep["cells"]) == 2
    assert all("error" in c for c in rep["cells"])
    lines = rep_csv.read_text().splitlines()
    assert lines[0].startswith("seed,heldout")
    assert len(lines) == 3


def test_bench_bad_config_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"version": 1, "mystery": True}))
    rc = main(["bench", "--config", str(cfg), "--out", "/tmp/r.json"])
    assert rc == 1
    assert "unknown key" in capsys.readouterr().err
