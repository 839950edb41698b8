import json
import math

import numpy as np
import pytest

from artifact.errors import ConfigError
from artifact.presets import CLOSED_FORMS, PRESETS, Scenario, load_scenario, preset, raised_cosine_taper, save_scenario
from artifact.transform import forward_grt

EXPECTED_KAPPA = {
    "crt2d-ramp-k0": 0.0,
    "crt2d-lambda-k1": 1.0,
    "crt2d-frac-k05": 0.5,
    "arcs2d-ramp-k0": 0.0,
    "crt2d-nongeneric": 0.0,
}


def test_preset_names():
    assert set(PRESETS) == set(EXPECTED_KAPPA)


@pytest.mark.parametrize("name", sorted(EXPECTED_KAPPA))
def test_json_round_trip(name, tmp_path):
    s = preset(name)
    assert Scenario.from_dict(json.loads(s.to_json())) == s
    path = tmp_path / f"{name}.json"
    save_scenario(s, path)
    assert load_scenario(str(path)) == s
    assert load_scenario(name) == s


def test_preset_is_a_copy():
    a = preset("crt2d-ramp-k0")
    a.eps_list.append(1e-9)
    assert preset("crt2d-ramp-k0").eps_list != a.eps_list


def test_unknown_fields_rejected():
    d = preset("crt2d-ramp-k0").to_dict()
    d["bogus"] = 1
    with pytest.raises(ConfigError):
        Scenario.from_dict(d)
    d.pop("bogus")
    d.pop("symbol")
    with pytest.raises(ConfigError):
        Scenario.from_dict(d)
    with pytest.raises(ConfigError):
        load_scenario("no-such-preset")


@pytest.mark.parametrize("name", sorted(EXPECTED_KAPPA))
def test_builds_with_expected_kappa(name, built):
    b = built(name)
    from artifact.dtb import data_constants

    const = data_constants(b.frame, b.conormal(), b.symbol)
    assert const["kappa"] == pytest.approx(EXPECTED_KAPPA[name], abs=1e-12)
    assert b.genericity.condition1_pass is (name != "crt2d-nongeneric")


@pytest.mark.parametrize("name", ["crt2d-ramp-k0", "arcs2d-ramp-k0"])
def test_closed_form_matches_quadrature(name, built):
    b = built(name)
    s = b.scenario
    g = CLOSED_FORMS[(s.family, "disk")](s.surface["center"], s.surface["radius"])
    y0 = b.frame.pair.y0
    rng = np.random.default_rng(3)
    ys = y0 + 0.2 * rng.uniform(-1, 1, size=(6, 2))
    for y in ys:
        ref = forward_grt(b.phantom, b.family, y, t_range=(-math.pi, math.pi))
        assert g(y[None])[0] == pytest.approx(ref / s.amplitude, rel=1e-6, abs=1e-9)


def test_taper_shape():
    tap = raised_cosine_taper(0.5, 0.95)
    assert tap(0.0) == 1.0 and tap(0.5) == 1.0 and tap(0.95) == 0.0 and tap(2.0) == 0.0
    assert tap(0.725) == pytest.approx(0.5)
    assert np.all(np.diff(tap(np.linspace(0.5, 0.95, 50))) <= 0)
