import json
from pathlib import Path

import numpy as np
import pytest

from qrngsim import cli
from qrngsim import io as qio

ROOT = Path(__file__).resolve().parents[1]


def kv(path):
    return dict(line.split("=", 1) for line in Path(path).read_text().splitlines())


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    assert cli.main(["simulate", "--seed", "4", "--bits", "20000", "--out", str(d), "--quiet"]) == 0
    return d


def test_simulate_outputs(run_dir):
    for name in ("stream.bits", "events.csv", "feedback.csv", "run-manifest.json"):
        assert (run_dir / name).exists()
    m = json.loads((run_dir / "run-manifest.json").read_text())
    assert m["seed"] == 4 and m["bit_count"] == 20000
    assert m["stream_sha256"] == qio.file_sha256(run_dir / "stream.bits")
    assert m["counters"]["emitted_bits"] == 20000
    assert "qrngsim-" in m["build"] and len(m["config_hash"]) == 64
    assert "[device]" in m["config"]


def test_simulate_is_reproducible(run_dir, tmp_path):
    assert cli.main(["simulate", "--seed", "4", "--bits", "20000", "--out", str(tmp_path), "--quiet"]) == 0
    assert (tmp_path / "stream.bits").read_bytes() == (run_dir / "stream.bits").read_bytes()


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "envout"))
    assert cli.main(["simulate", "--seed", "1", "--cycles", "1000", "--quiet", "--no-events"]) == 0
    assert (tmp_path / "envout" / "stream.bits").exists()


def test_simulate_requires_seed(tmp_path):
    assert cli.main(["simulate", "--bits", "10", "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_simulate_length_flags_exclusive(tmp_path):
    assert cli.main(["simulate", "--seed", "1", "--bits", "10", "--cycles", "10", "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_bad_set_is_usage_error(tmp_path):
    args = ["simulate", "--seed", "1", "--bits", "10", "--out", str(tmp_path), "--set", "device.nope=1"]
    assert cli.main(args) == cli.EXIT_USAGE
    assert cli.main(args[:-2] + ["--set", "garbage"]) == cli.EXIT_USAGE


def test_bad_config_file_is_io_error(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("no section here\n")
    assert cli.main(["simulate", "--config", str(cfg), "--seed", "1", "--bits", "10", "--out", str(tmp_path)]) == cli.EXIT_IO
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.ini"), "--seed", "1", "--bits", "10"]) == cli.EXIT_IO


def test_config_file_run(tmp_path):
    assert cli.main(["simulate", "--config", str(ROOT / "configs" / "darkness.ini"), "--seconds", "0.5",
                     "--out", str(tmp_path), "--quiet"]) == 0
    m = qio.read_manifest(tmp_path / "run-manifest.json")
    assert m["counters"]["dark_originated_bits"] == m["counters"]["emitted_bits"]


def test_analyze_bits(run_dir, tmp_path):
    out = tmp_path / "kv.txt"
    rc = cli.main(["analyze", "bits", str(run_dir / "stream.bits"), "--quiet", "--kv-out", str(out)])
    values = kv(out)
    assert rc in (0, 1)
    assert int(values["n0"]) + int(values["n1"]) == 20000
    assert int(values["n_hold"]) + int(values["n_flip"]) == 19999
    assert "flip_excess_per_cycle" in values


def test_analyze_bits_bad_stream(tmp_path):
    p = tmp_path / "s.bits"
    p.write_bytes(bytes([0xFF]))
    assert cli.main(["analyze", "bits", str(p), "--bit-count", "4", "--quiet"]) == cli.EXIT_IO
    assert cli.main(["analyze", "bits", str(tmp_path / "missing.bits")]) == cli.EXIT_IO


def test_analyze_counts_reference_table(tmp_path):
    out = tmp_path / "kv.txt"
    rc = cli.main(["analyze", "counts", str(ROOT / "data" / "reference_counts.csv"), "--quiet", "--kv-out", str(out)])
    values = kv(out)
    # the most biased reference device sits about 12 sigma out, so the run reports FAIL
    assert rc == cli.EXIT_FAIL
    assert values["0701132A210.rel_dev_flip.status"] == "FAIL"
    assert values["0701100A210.rel_dev_flip.status"] == "PASS"
    assert f"{float(values['0701132A210.rel_dev_flip']):.1e}" == "3.8e-04"
    assert f"{float(values['0701100A210.rel_dev_balance']):.1e}" == "5.4e-06"


def test_analyze_counts_flags_bias(tmp_path):
    rc = cli.main(["analyze", "counts", "--counts", "500000,500000,490000,509999", "--quiet"])
    assert rc == cli.EXIT_FAIL
    assert cli.main(["analyze", "counts", "--counts", "1,2,3"]) == cli.EXIT_USAGE
    assert cli.main(["analyze", "counts"]) == cli.EXIT_USAGE


def test_analyze_events(run_dir, tmp_path):
    assert cli.main(["analyze", "events", str(run_dir / "events.csv"), "--out", str(tmp_path), "--quiet"]) == 0
    for name in ("autocorr_ch1.csv", "autocorr_ch2.csv", "crosscorr.csv"):
        lo, counts = qio.read_histogram(tmp_path / name)
        assert lo.size > 0


def test_analyze_empty_events_warns(tmp_path, capsys):
    p = tmp_path / "e.csv"
    p.write_text("t_ns,channel,kind\n")
    assert cli.main(["analyze", "events", str(p), "--out", str(tmp_path), "--quiet"]) == 0
    assert "warning" in capsys.readouterr().err


def test_analyze_events_parse_error(tmp_path, capsys):
    p = tmp_path / "e.csv"
    p.write_text("t_ns,channel,kind\n1,1,prompt\nx,1,prompt\n")
    assert cli.main(["analyze", "events", str(p)]) == cli.EXIT_IO
    assert "line 3" in capsys.readouterr().err


def test_analyze_feedback(tmp_path):
    d = tmp_path / "fb"
    assert cli.main(["simulate", "--seed", "2", "--seconds", "0.3", "--no-events", "--out", str(d), "--quiet"]) == 0
    out = tmp_path / "kv.txt"
    assert cli.main(["analyze", "feedback", str(d / "feedback.csv"), "--out", str(d), "--quiet", "--kv-out", str(out)]) == 0
    assert (d / "spectrum.csv").exists()
    assert float(kv(out)["sample_rate_hz"]) == pytest.approx(1000.0)


def test_predict(tmp_path):
    out = tmp_path / "kv.txt"
    assert cli.main(["predict", "--p1", "0.3", "--p2", "0.26", "--quiet", "--kv-out", str(out)]) == 0
    v = kv(out)
    assert float(v["bias_per_cycle"]) >= float(v["bias_lower_bound"])
    assert float(v["p_flip_per_output"]) + float(v["p_hold_per_output"]) == pytest.approx(1.0, abs=1e-5)


def test_predict_invert_round_trip(tmp_path):
    out = tmp_path / "kv.txt"
    cli.main(["predict", "--p1", "0.29", "--p2", "0.27", "--quiet", "--kv-out", str(out)])
    bias = kv(out)["bias_per_cycle"]
    cli.main(["predict", "--invert", "--bias", bias, "--pavg", "0.28", "--quiet", "--kv-out", str(out)])
    assert float(kv(out)["abs_p1_minus_p2"]) == pytest.approx(0.02, rel=1e-3)


@pytest.mark.parametrize(
    "args",
    [
        ["predict", "--p1", "1.5", "--p2", "0.2"],
        ["predict", "--p1", "0.2"],
        ["predict", "--invert", "--bias", "-1e-4", "--pavg", "0.3"],
        ["predict", "--invert", "--bias", "1e-4", "--pavg", "1.2"],
        ["predict", "--invert", "--bias", "1e-4"],
        ["nosuchcommand"],
    ],
)
def test_usage_errors(args):
    assert cli.main(args) == cli.EXIT_USAGE


def test_sweep(tmp_path):
    csv = tmp_path / "s.csv"
    assert cli.main(["sweep", "temperature", "30:70:3", "dark_rate", "--csv", str(csv), "--quiet"]) == 0
    rows = csv.read_text().splitlines()
    assert rows[0] == "temperature,dark_rate"
    vals = [float(r.split(",")[1]) for r in rows[1:]]
    assert vals[-1] == pytest.approx(1000.0) and np.all(np.diff(vals) > 0)
    assert cli.main(["sweep", "gain", "1:2:x", "oscillation_peak"]) == cli.EXIT_USAGE


def test_validate_subset(capsys):
    assert cli.main(["validate", "quick", "--only", "1m,9a"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] 1m" in out and "[PASS] 9a" in out and "2/2" in out


def test_version(capsys):
    assert cli.main(["--version"]) == 0
    assert "qrngsim-" in capsys.readouterr().out
