import json
import math

import numpy as np
import pytest

import diffeolab as dl


def test_constant_field_norm_is_its_value():
    chart = dl.Chart.unit_torus(2, 32)
    f = dl.Field(chart, "scalar", np.full(chart.node_count, 3.0))
    assert dl.lp_norm(f, 2.0) == pytest.approx(3.0, rel=1e-14)
    assert f.values().shape == (32 * 32,)


def test_field_values_round_trip_through_numpy():
    chart = dl.Chart.unit_torus(2, 16)
    x = chart.nodes()
    v = np.stack([np.sin(2 * math.pi * x[:, 0]), np.cos(2 * math.pi * x[:, 1])], axis=1)
    f = dl.Field(chart, "vector", v)
    assert np.array_equal(f.values(), v)
    assert f.kind == "vector"


def test_wrong_length_raises():
    chart = dl.Chart.unit_torus(1, 8)
    with pytest.raises(dl.DiffeolabError):
        dl.Field(chart, "scalar", np.zeros(7))


def test_pointwise_defect_vanishes_under_grid_translation():
    chart = dl.Chart.standard(64)
    h = 1.0 / 64
    phi = dl.diffeo({"constructor": "translation", "shift": [3 * h, 5 * h]}, chart)
    tanh = dl.operator({"kind": "pointwise", "params": {"rho": "tanh"}})
    for label, f in dl.standard_fields(chart):
        if f.kind == "scalar":
            assert dl.equivariance_defect(tanh, phi, f)["defect_abs"] == 0.0, label


def test_standard_bank_has_twelve_maps_that_round_trip():
    chart = dl.Chart.standard(32)
    bank = dl.standard_diffeos(chart)
    assert len(bank) == 12
    for phi in bank:
        again = dl.diffeo(json.loads(phi.to_json_text()), chart)
        u = [0.47, 0.53]
        assert again.forward(u) == phi.forward(u)


def test_config_defaults_and_validation():
    cfg = dl.default_config()
    assert cfg["levels"] == [128, 256, 512]
    assert dl.normalize_config({"p": 1})["p"] == [1.0]
    with pytest.raises(dl.DiffeolabError):
        dl.normalize_config({"levles": [64]})


def test_zoo_runs_in_process(tmp_path):
    code, console, _ = dl.run("zoo", "", tmp_path)
    assert code == 0
    assert (tmp_path / "zoo.csv").exists()
    assert "sup" in console
