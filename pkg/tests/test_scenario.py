import numpy as np
import pytest

from tucff import bundled
from tucff.scenario import (
    Pulse,
    ScenarioError,
    dumps_scenario,
    historic_rates,
    load_scenario,
    parse_scenario,
    profile_demand,
    save_scenario,
    synthetic_demand,
)


def test_synthetic_is_seeded():
    e = np.array([0.1, 0.2, 0.0])
    a = synthetic_demand(e, 3600, 5, seed=4)
    b = synthetic_demand(e, 3600, 5, seed=4)
    c = synthetic_demand(e, 3600, 5, seed=5)
    np.testing.assert_array_equal(a.rates, b.rates)
    assert not np.array_equal(a.rates, c.rates)
    assert a.rates.shape == (721, 3)
    assert a.ticks().shape == (720, 3)
    # a link with no historic demand gets no sinusoid either
    assert not a.rates[:, 2].any()


def test_synthetic_amplitude_bounds():
    e = np.full(50, 0.2)
    d = synthetic_demand(e, 14400, 5, amplitude_frac=(0.25, 0.5), period_s=(1800, 7200), seed=0)
    dev = np.abs(d.rates - 0.2).max(axis=0)
    assert np.all(dev <= 0.5 * 0.2 + 1e-12)
    # four hours cover at least two full periods, so the peak is reached
    assert np.all(dev >= 0.25 * 0.2 * 0.99)


def test_rectangular_pulse_and_taper():
    e = np.array([0.1, 0.1])
    p = Pulse((1,), 100.0, 50.0, 0.3)
    d = synthetic_demand(e, 400, 5, amplitude_frac=(0, 0), pulses=[p], taper_s=100)
    t = d.times
    np.testing.assert_allclose(d.rates[(t >= 100) & (t < 150), 0], 0.4)
    np.testing.assert_allclose(d.rates[(t < 100) | ((t >= 150) & (t <= 300)), 0], 0.1)
    np.testing.assert_allclose(d.rates[:, 1][t <= 300], 0.1)
    np.testing.assert_allclose(d.rates[-1], 0.0)
    np.testing.assert_allclose(d.rates[t == 350, 1], 0.05)


def test_profile_pulse_is_smooth():
    base = np.full((3, 1), 0.2)
    p = Pulse((1,), 0.0, 600.0, 0.1)
    d = profile_demand(base, 600, 1200, 5, perturbation_max=0.0, pulses=[p])
    t = d.times
    np.testing.assert_allclose(d.rates[t == 300, 0], 0.3)
    np.testing.assert_allclose(d.rates[t == 0, 0], 0.2)
    np.testing.assert_allclose(d.rates[t >= 600, 0], 0.2)


def test_profile_perturbation_bounded():
    base = np.full((5, 4), 0.2)
    d = profile_demand(base, 600, 2400, 5, perturbation_max=0.1, seed=2)
    assert np.all(np.abs(d.rates / 0.2 - 1) <= 0.1 + 1e-12)
    np.testing.assert_allclose(d.e_hist, 0.2)


def test_profile_too_short():
    with pytest.raises(ScenarioError, match="shorter"):
        profile_demand(np.ones((2, 1)), 600, 3600, 5)


def test_horizon_not_multiple_of_tick():
    with pytest.raises(ScenarioError, match="multiple"):
        synthetic_demand(np.ones(1), 12, 5)


def test_historic_rates():
    e = historic_rates([{"links": [1, 3], "rate": 0.2}], 4)
    np.testing.assert_array_equal(e, [0.2, 0, 0.2, 0])
    with pytest.raises(ScenarioError, match="two e_hist groups"):
        historic_rates([{"links": [1], "rate": 0.2}, {"links": [1], "rate": 0.1}], 2)
    with pytest.raises(ScenarioError, match="unknown link"):
        historic_rates([{"links": [5], "rate": 0.2}], 2)


def test_minimal_scenario_gets_defaults():
    sc = parse_scenario({"horizon_s": 600, "demand": {"mode": "synthetic", "e_hist": []}})
    assert sc.variant == "tuc-ff"
    assert sc.dt == 5 and sc.E == 20 and sc.c_ug == 0.85 and sc.R_weight == 1e-4
    assert sc.raw["seeds"] == {"demand": 0, "sensor": 1}


@pytest.mark.parametrize(
    "patch, msg",
    [
        ({"bogus": 1}, "unknown key.*bogus"),
        ({"sensor": {"white": 0.1}}, "unknown key.*'sensor'.*white"),
        ({"controller": {"variant": "fast"}}, "unknown controller variant"),
        ({"simulation": {"c_ug": 1.5}}, "c_ug"),
        ({"horizon_s": -5}, "positive"),
    ],
)
def test_bad_scenarios(patch, msg):
    raw = bundled.pulse_scenario()
    raw.update(patch)
    with pytest.raises(ScenarioError, match=msg):
        parse_scenario(raw)


def test_missing_required():
    with pytest.raises(ScenarioError, match="horizon_s"):
        parse_scenario({"demand": {"mode": "synthetic", "e_hist": []}})
    with pytest.raises(ScenarioError, match="mode"):
        parse_scenario({"horizon_s": 60, "demand": {"e_hist": []}})


def test_canonical_roundtrip(tmp_path):
    sc = parse_scenario(bundled.pulse_scenario())
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    again = tmp_path / "t.json"
    save_scenario(load_scenario(path), again)
    assert path.read_bytes() == again.read_bytes()
    assert dumps_scenario(sc) == path.read_text()


def test_overrides():
    sc = parse_scenario(bundled.pulse_scenario()).with_overrides(variant="tuc", horizon_s=600, seed=7)
    assert sc.variant == "tuc" and sc.horizon_s == 600
    assert sc.raw["seeds"] == {"demand": 7, "sensor": 8}
    assert sc.sensor_config().seed == 8


def test_profile_mode_scenario():
    raw = {
        "horizon_s": 1200,
        "demand": {"mode": "profile", "e_hist": [{"links": [1, 2], "rate": 0.1}], "shape": [1, 2, 1],
                   "sample_s": 600},
    }
    d = parse_scenario(raw).demand(2)
    assert d.rates.shape == (241, 2)
    np.testing.assert_allclose(d.e_hist, 0.1)
