import json

import pytest

from tucff import bundled
from tucff.cli import main
from tucff.scenario import dumps_scenario, parse_scenario


@pytest.fixture
def grid_files(tmp_path):
    assert main(["make-example", "grid4", "--out", str(tmp_path)]) == 0
    sc = parse_scenario(bundled.pulse_scenario(horizon_s=1200))
    (tmp_path / "short.scenario.json").write_text(dumps_scenario(sc))
    return tmp_path


def test_make_example_idempotent(tmp_path):
    for kind in ("chain2", "grid4"):
        assert main(["make-example", kind, "--out", str(tmp_path / "a")]) == 0
        assert main(["make-example", kind, "--out", str(tmp_path / "b")]) == 0
        for f in (tmp_path / "a").glob(f"{kind}.*"):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TUCFF_OUT", str(tmp_path))
    assert main(["make-example", "chain2"]) == 0
    assert (tmp_path / "chain2.network.json").exists()


def test_gains(grid_files):
    out = grid_files / "gains.json"
    assert main(["-v", "gains", "--network", str(grid_files / "grid4.network.json"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["K"]) == 8 and len(doc["K"][0]) == 16
    assert doc["metadata"]["rank_B_g"] == 8
    assert doc["metadata"]["dare_residual"] < 1e-9


def test_gains_rank_failure(tmp_path, capsys):
    raw = bundled.chain2()
    raw["junctions"][0]["stages"].append({"id": 3, "g_min": 10, "links": [1]})
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    assert main(["gains", "--network", str(path)]) == 1
    assert "linearly dependent" in capsys.readouterr().err


def test_usage_errors(tmp_path, grid_files):
    assert main(["gains", "--network", str(tmp_path / "missing.json")]) == 2
    assert main(["gains", "--network", str(grid_files / "grid4.network.json"), "--R", "-1"]) == 2
    assert main(["frobnicate"]) == 2
    bad = tmp_path / "bad.scenario.json"
    bad.write_text(json.dumps({"horizon_s": 60, "demand": {"mode": "synthetic", "e_hist": []}, "extra": 1}))
    assert main(["simulate", "--network", str(grid_files / "grid4.network.json"), "--scenario", str(bad)]) == 2


def test_simulate_metrics_compare(grid_files, capsys):
    net = str(grid_files / "grid4.network.json")
    sc = str(grid_files / "short.scenario.json")
    out = grid_files / "run"
    assert main(["simulate", "--network", net, "--scenario", sc, "--controller", "all", "--out", str(out)]) == 0
    for v in ("tuc-ideal", "tuc-ff-ideal", "tuc-ff", "tuc"):
        for f in ("trace.csv", "greens.csv", "metrics.json", "manifest.json"):
            assert (out / v / f).exists()
    capsys.readouterr()

    m_out = grid_files / "m.json"
    assert main(["metrics", "--trace", str(out / "tuc" / "trace.csv"), "--network", net, "--method", "tuc",
                 "--out", str(m_out)]) == 0
    recomputed = json.loads(m_out.read_text())
    original = json.loads((out / "tuc" / "metrics.json").read_text())
    assert recomputed["tts"] == pytest.approx(original["tts"], rel=1e-12)
    assert recomputed["rqb"] == pytest.approx(original["rqb"], rel=1e-12)

    reports = [str(out / v / "metrics.json") for v in ("tuc-ideal", "tuc-ff-ideal")]
    assert main(["compare", *reports, "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("Method,TTS")
    assert [l.split(",")[0] for l in lines[1:]] == ["tuc-ideal", "tuc-ff-ideal"]


def test_simulate_deterministic(grid_files):
    net = str(grid_files / "grid4.network.json")
    sc = str(grid_files / "short.scenario.json")
    for d in ("a", "b"):
        assert main(["simulate", "--network", net, "--scenario", sc, "--controller", "tuc-ff", "--seed", "3",
                     "--out", str(grid_files / d)]) == 0
    for f in ("trace.csv", "greens.csv", "metrics.json"):
        assert (grid_files / "a" / f).read_bytes() == (grid_files / "b" / f).read_bytes()


def test_compare_warns_on_horizon_mismatch(tmp_path, capsys):
    from tucff.metrics import MetricsReport

    for name, h in (("a", 100.0), ("b", 200.0)):
        (tmp_path / f"{name}.json").write_text(MetricsReport(name, 1.0, 1.0, 0.0, 5.0, h, []).to_json())
    assert main(["compare", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 0
    assert "different horizons" in capsys.readouterr().err
