import json
import subprocess
import sys

import pytest

from plane_sample.cli import main


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen") / "nested" / "data"
    assert main(["generate", "--out-dir", str(out), "--seed", "7"]) == 0
    return out


def _run(args, capsys):
    code = main([str(a) for a in args])
    return code, capsys.readouterr().err


def test_generate_outputs(data_dir):
    rows = (data_dir / "scenarios.csv").read_text().strip().split("\n")
    assert rows[0] == "scenario_id,traffic,town,route"
    assert len(rows) == 133
    assert len((data_dir / "observations.csv").read_text().strip().split("\n")) == 133
    manifest = json.loads((data_dir / "manifest.json").read_text())
    assert manifest["command"] == "generate" and manifest["seed"] == 7
    assert len(manifest["config_hash"]) == 64
    assert {"inputs", "outputs", "tool_version", "duration_s"} <= set(manifest)


def test_generate_is_reproducible(tmp_path, data_dir):
    assert main(["generate", "--out-dir", str(tmp_path), "--seed", "7"]) == 0
    for name in ("scenarios.csv", "observations.csv"):
        assert (tmp_path / name).read_bytes() == (data_dir / name).read_bytes()


def test_generate_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_hyperplanes": 3, "scenarios_per_hyperplane": 4, "seed": 1}))
    code, _ = _run(["generate", "--config", cfg, "--out-dir", tmp_path / "o"], capsys)
    assert code == 0
    assert len((tmp_path / "o" / "scenarios.csv").read_text().strip().split("\n")) == 13
    cfg.write_text(json.dumps({"n_hyperplanes": 3, "true_rates": [1.0]}))
    code, err = _run(["generate", "--config", cfg, "--out-dir", tmp_path / "p", "--seed", 1], capsys)
    assert code == 1 and err.startswith("plane-sample: error:") and err.count("\n") == 1


def test_generate_needs_seed(tmp_path, capsys):
    code, err = _run(["generate", "--out-dir", tmp_path], capsys)
    assert code == 1 and "seed" in err


def test_select_budget(tmp_path, data_dir):
    out = tmp_path / "sel"
    assert main(["select", "--scenarios", str(data_dir / "scenarios.csv"), "--budget", "3", "--out", str(out)]) == 0
    trace = json.loads((out / "trace.json").read_text())
    assert len(trace["steps"]) == 3 and trace["stopped_reason"] == "budget"
    assert (out / "gain_curve.csv").read_text().startswith("step,gain_mean,gain_lo,gain_hi\n")
    assert (out / "gain_curve.svg").read_text().startswith("<svg")
    assert json.loads((out / "manifest.json").read_text())["command"] == "select"


def test_select_defaults_stop_on_plateau(tmp_path, data_dir):
    out = tmp_path / "sel"
    assert main(["select", "--scenarios", str(data_dir / "scenarios.csv"), "--out", str(out)]) == 0
    trace = json.loads((out / "trace.json").read_text())
    assert trace["stopped_reason"] == "plateau"
    assert 1 <= len(trace["steps"]) <= 20


def test_select_bytes_independent_of_workers(tmp_path, data_dir):
    outs = []
    for w in (1, 2):
        out = tmp_path / f"w{w}"
        args = ["select", "--scenarios", data_dir / "scenarios.csv", "--budget", 2, "--seed", 3,
                "--workers", w, "--out", out]
        assert main([str(a) for a in args]) == 0
        outs.append(out)
    for name in ("trace.json", "gain_curve.csv", "gain_curve.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_select_hyperplane_objective(tmp_path, data_dir, capsys):
    code, _ = _run(["select", "--scenarios", data_dir / "scenarios.csv", "--budget", 1,
                    "--objective", "hyperplane:Town03", "--out", tmp_path / "a"], capsys)
    assert code == 0
    code, err = _run(["select", "--scenarios", data_dir / "scenarios.csv",
                      "--objective", "hyperplane:Town09", "--out", tmp_path / "b"], capsys)
    assert code == 1 and "Town09" in err and err.count("\n") == 1


@pytest.mark.parametrize("flags", [["--confidence", "1.5"], ["--abs-error", "0"], ["--budget", "-1"], ["--bogus"]])
def test_select_bad_flags(tmp_path, data_dir, capsys, flags):
    code, err = _run(["select", "--scenarios", data_dir / "scenarios.csv", "--out", tmp_path, *flags], capsys)
    assert code == 1 and err.startswith("plane-sample: error:")


def test_missing_input_file(tmp_path, capsys):
    code, err = _run(["select", "--scenarios", tmp_path / "nope.csv", "--out", tmp_path], capsys)
    assert code == 1 and err.count("\n") == 1


def test_compare(tmp_path, data_dir):
    outs = []
    for w in (1, 2):
        out = tmp_path / f"c{w}"
        args = ["compare", "--scenarios", data_dir / "scenarios.csv", "--runs", 1, "--max-size", 4,
                "--seed", 2, "--workers", w, "--out", out]
        assert main([str(a) for a in args]) == 0
        outs.append(out)
    report = json.loads((outs[0] / "comparison.json").read_text())
    assert set(report["methods"]) == {"greedy", "lhs", "random"}
    for m in report["methods"].values():
        assert m["band_min"] == m["band_max"]
    for name in ("comparison.json", "comparison.svg", "greedy.csv", "lhs.csv", "random.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_ppc(tmp_path, data_dir, capsys):
    out = tmp_path / "ppc"
    code, _ = _run(["ppc", "--scenarios", data_dir / "scenarios.csv", "--observations",
                    data_dir / "observations.csv", "--replicates", 200, "--out", out], capsys)
    assert code == 0
    report = json.loads((out / "ppc.json").read_text())
    assert report["agreement_fraction"] > 0.5
    assert (out / "ppc.svg").exists()


def test_ppc_errors(tmp_path, data_dir, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("scenario_id,count\n")
    code, err = _run(["ppc", "--scenarios", data_dir / "scenarios.csv", "--observations", empty,
                      "--out", tmp_path / "o"], capsys)
    assert code == 1 and "nothing to check" in err
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("scenario_id,count\n500,1\n")
    code, err = _run(["ppc", "--scenarios", data_dir / "scenarios.csv", "--observations", wrong,
                      "--out", tmp_path / "o"], capsys)
    assert code == 1 and "line 2" in err


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "plane_sample.cli", "generate", "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode != 0
    assert proc.stderr.strip().count("\n") == 0 and "seed" in proc.stderr
