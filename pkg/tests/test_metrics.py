import numpy as np
import pytest

from tucff.metrics import MetricsReport, compare_table, evaluate, read_trace_csv, rqb, ttb, tts


def test_hand_computed():
    x = np.array([[10.0, 20.0], [30.0, 40.0]])
    x_b = np.array([[0.0, 1.0], [2.0, 0.0]])
    x_max = np.array([100.0, 50.0])
    T = 5.0
    assert tts(x, x_b, T) == pytest.approx(5 * 103 / 3600)
    assert ttb(x_b, T) == pytest.approx(5 * 3 / 3600)
    assert rqb(x, x_max) == pytest.approx(100 / 100 + 400 / 50 + 900 / 100 + 1600 / 50)


def test_empty():
    assert tts(np.zeros((0, 3)), np.zeros((0, 3)), 5) == 0.0
    assert rqb(np.zeros((0, 3)), np.ones(3)) == 0.0


def test_scaling():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 50, (100, 4))
    x_b = rng.uniform(0, 5, (100, 4))
    x_max = np.full(4, 60.0)
    assert tts(x, x_b, 10) == pytest.approx(2 * tts(x, x_b, 5))
    assert rqb(2 * x, x_max) == pytest.approx(4 * rqb(x, x_max))
    assert tts(x, x_b, 5) >= ttb(x_b, 5)


def test_report_roundtrip():
    r = evaluate("demo", np.ones((3, 2)), np.zeros((3, 2)), np.full(2, 10.0), 5.0)
    assert r.horizon_s == 15.0
    assert r.total_vehicles == [2.0, 2.0, 2.0]
    assert MetricsReport.from_json(r.to_json()) == r


def test_read_trace_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "time_s,link,x,x_b,y,x_hat,e_hat,e_true\n"
        "0.0,1,1.0,0.0,nan,nan,nan,0.1\n"
        "0.0,2,2.0,0.5,nan,nan,nan,0.1\n"
        "5.0,1,3.0,0.0,nan,nan,nan,0.1\n"
        "5.0,2,4.0,0.0,nan,nan,nan,0.1\n"
    )
    t, x, x_b = read_trace_csv(path)
    np.testing.assert_array_equal(t, [0, 5])
    np.testing.assert_array_equal(x, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(x_b, [[0, 0.5], [0, 0]])


def test_compare_table():
    a = MetricsReport("tuc", 72.2, 4377e3, 0.0, 5, 14400, [])
    b = MetricsReport("tuc-ff", 61.8, 1188e3, 0.0, 5, 14400, [])
    text = compare_table([a, b])
    assert "RQB x1e-3 (veh)" in text
    assert text.index("tuc ") < text.index("tuc-ff")
    csv = compare_table([a, b], "csv").splitlines()
    assert csv[0] == "Method,TTS (veh.h),RQB x1e-3 (veh),TTB (veh.h)"
    assert csv[2] == "tuc-ff,61.800,1188.000,0.000"
