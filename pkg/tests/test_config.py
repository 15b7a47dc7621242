import math

import pytest

from gridplan.formulation.config import ConfigError, PlanningConfig, config_from_mapping, load_config


def test_defaults():
    c = PlanningConfig()
    assert (c.years, c.intervals, c.dt, c.max_installed) == (1, 48, 0.5, 10)
    assert c.lco2 == math.inf and c.delta == 0.01 and c.inflation == 0.12
    assert c.reserve_fraction == {"elect": 0.03}
    assert (c.opt_ca, c.opt_cr) == (1e-2, 1e-2)


@pytest.mark.parametrize("kw, fragment", [
    ({"years": 0}, "positive"),
    ({"dt": 0.0}, "dt"),
    ({"day_weights": (100.0, 200.0)}, "sum to 300"),
    ({"day_weights": (400.0, -35.0)}, "positive"),
    ({"reserve_fraction": {"elect": 0.05}}, "reserve"),
    ({"lco2": -1.0}, "lco2"),
    ({"inflation": -1.0}, "inflation"),
    ({"import_caps": {"elect": -3.0}}, "import_caps"),
    ({"opt_cr": -0.1}, "opt_cr"),
])
def test_invalid_values_are_reported(kw, fragment):
    with pytest.raises(ConfigError, match=fragment):
        PlanningConfig(**kw)


def test_escalation_is_zero_based():
    c = PlanningConfig(inflation=0.12)
    assert c.escalation(0) == 1.0
    assert c.escalation(2) == pytest.approx(1.12 ** 2)


def test_replace_revalidates():
    c = PlanningConfig()
    assert c.replace(delta=0.0).delta == 0.0
    with pytest.raises(ConfigError):
        c.replace(intervals=-1)


def test_mapping_converts_inf_strings():
    c = config_from_mapping({"lco2": "inf", "import_caps": {"elect": "Infinity"}})
    assert c.lco2 == math.inf and c.import_caps == {"elect": math.inf}


def test_mapping_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="horizon"):
        config_from_mapping({"horizon": 3})


def test_to_dict_round_trip():
    c = PlanningConfig(years=2, day_weights=(182.0, 183.0), lco2=5e6)
    assert config_from_mapping(c.to_dict()) == c
    assert PlanningConfig().to_dict()["lco2"] == "inf"


def test_load_toml(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[planning]\nyears = 2\nday_weights = [182.0, 183.0]\nlco2 = "inf"\n'
                 'reserve_fraction = { elect = 0.02 }\n')
    c = load_config(p)
    assert c.years == 2 and c.day_weights == (182.0, 183.0) and c.reserve_fraction == {"elect": 0.02}


def test_bad_toml_names_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[planning\n")
    with pytest.raises(ConfigError, match="bad.toml"):
        load_config(p)
