import csv
import json
import math

import pytest

from orlicz_doubling.cli import main
from orlicz_doubling.config import ExperimentConfig, parse_config_text
from orlicz_doubling.errors import ContractError, DivergentSeriesError, DomainError

SMALL = ["--grid-n", "128"]


def _run(tmp_path, *args):
    code = main([*args, "--out-dir", str(tmp_path)])
    return code


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_config_parsing(tmp_path):
    text = "# sweep\nprofile = euclidean\ngrid_n = 64  # coarse\nr-min = 0.1\ngeometric = false\n"
    vals = parse_config_text(text)
    cfg = ExperimentConfig.from_mapping(vals)
    assert cfg.profile == "euclidean" and cfg.grid_n == 64 and cfg.r_min == 0.1 and not cfg.geometric
    with pytest.raises(ContractError):
        parse_config_text("just words")
    with pytest.raises(ContractError):
        ExperimentConfig.from_mapping({"colour": "red"})
    with pytest.raises(ContractError):
        ExperimentConfig.from_mapping({"grid_n": "many"})


@pytest.mark.parametrize("kw,exc", [
    ({"gamma": 1.0}, DivergentSeriesError),
    ({"r_min": 0.0}, DomainError),
    ({"r_max": 0.8}, DomainError),
    ({"epsilon": 1.0}, DomainError),
    ({"grid_n": 7}, ContractError),
    ({"sigma": 1.5}, DomainError),
])
def test_config_validation(kw, exc):
    with pytest.raises(exc):
        ExperimentConfig(**kw)


def test_flags_override_file(tmp_path):
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text("profile = euclidean\nr_count = 3\ngrid_n = 64\n")
    assert _run(tmp_path, "volume", "--config", str(cfgfile), "--r-count", "5") == 0
    data = json.loads((tmp_path / "volume.json").read_text())
    assert data["config"]["r_count"] == 5 and data["config"]["profile"] == "euclidean"
    assert len(_rows(tmp_path / "volume.csv")) == 5


def test_volume_euclidean(tmp_path):
    code = _run(tmp_path, "volume", "--profile", "euclidean", "--grid-n", "256", "--neighbors", "32",
                "--r-min", "0.15", "--r-max", "0.5")
    assert code == 0
    for row in _rows(tmp_path / "volume.csv"):
        assert float(row["ratio"]) == pytest.approx(1.0, abs=0.02)


def test_volume_exp_power_band(tmp_path):
    assert _run(tmp_path, "volume", "--sigma", "1", *SMALL) == 0
    s = json.loads((tmp_path / "volume.json").read_text())
    assert s["schema_version"] == 1
    assert 0.1 <= s["summary"]["band_min"] <= s["summary"]["band_max"] <= 10


def test_config_error_exit(tmp_path, capsys):
    assert _run(tmp_path, "volume", "--gamma", "1.0") == 2
    assert "divergent series" in capsys.readouterr().err


def test_doubling_verdicts(tmp_path, capsys):
    assert _run(tmp_path / "e", "doubling", "--profile", "euclidean", *SMALL) == 0
    out = capsys.readouterr().out
    assert "DOUBLING-CONSISTENT" in out
    s = json.loads((tmp_path / "e" / "doubling.json").read_text())["summary"]
    assert math.isfinite(s["C_D"]) and s["max_ratio"] <= s["C_D"]
    assert _run(tmp_path / "x", "doubling", "--sigma", "1", "--grid-n", "256") == 0
    assert "NON-DOUBLING-WITNESS" in capsys.readouterr().out
    s = json.loads((tmp_path / "x" / "doubling.json").read_text())["summary"]
    assert 0.8 <= s["fit"]["sigma_hat"] <= 1.2


def test_doubling_insufficient_data(tmp_path, capsys):
    assert _run(tmp_path, "doubling", "--r-count", "1") == 3
    assert "insufficient data" in capsys.readouterr().err


def test_superradius_command(tmp_path, capsys):
    assert _run(tmp_path, "superradius", "--sigma", "0.5", "--alpha", "1.5", "--r-min", "0.1",
                "--r-max", "0.4", "--r-count", "5", *SMALL) == 0
    s = json.loads((tmp_path / "superradius.json").read_text())["summary"]
    assert s["proven_slope"] < s["phi_over_r_slope"]
    assert s["proven_violations"] == []
    assert _run(tmp_path, "superradius", "--epsilon", "1.5") == 2


def test_superradius_euclidean_flat(tmp_path):
    assert _run(tmp_path, "superradius", "--profile", "euclidean", "--bump", "power", "--r-min", "0.1",
                "--r-max", "0.4", "--r-count", "5", *SMALL) == 0
    s = json.loads((tmp_path / "superradius.json").read_text())["summary"]
    assert abs(s["phi_over_r_slope"]) < 0.1


def test_json_format_and_report(tmp_path):
    assert _run(tmp_path, "report", "--format", "json", "--grid-n", "64") == 0
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["schema_version"] == 1
    assert set(data["summary"]) == {"volume", "doubling", "superradius", "sobolev"}
    assert data["summary"]["volume"]["rows"]
    assert not list(tmp_path.glob("*.csv"))


def test_determinism(tmp_path):
    for sub in ("a", "b"):
        assert _run(tmp_path / sub, "sobolev", "--grid-n", "64", "--seed", "7") == 0
    assert (tmp_path / "a" / "sobolev.csv").read_bytes() == (tmp_path / "b" / "sobolev.csv").read_bytes()
    assert (tmp_path / "a" / "sobolev.json").read_bytes() == (tmp_path / "b" / "sobolev.json").read_bytes()
