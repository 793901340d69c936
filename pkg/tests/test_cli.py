import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bersmetrics import cli
from bersmetrics.errors import ConfigError, PoleEncountered


def _run(tmp_path, *argv, config=None):
    args = list(argv) + ["--out", str(tmp_path)]
    if config is not None:
        path = tmp_path.parent / f"{tmp_path.name}.json"
        path.write_text(json.dumps(config))
        args += ["--config", str(path)]
    return cli.main(args)


def _tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_group_report_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "group") == 0
    assert _run(b, "group") == 0
    assert _tree(a) == _tree(b)
    rep = json.loads((a / "report.json").read_text())
    assert rep["command"] == "group"
    assert rep["result"]["words"] == 457
    assert abs(rep["result"]["area_partition"] - 4 * np.pi) < 1e-6
    assert "stamp" not in rep
    assert sorted(rep["files"]) == ["domain_weights.svg", "group_words.csv", "log_rho0.svg"]
    ET.fromstring((a / "domain_weights.svg").read_text())


def test_stamp_adds_timing(tmp_path):
    assert _run(tmp_path, "group", "--stamp") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert set(rep["stamp"]) == {"time", "elapsed_s"}


def test_epstein_subcommand(tmp_path):
    assert _run(tmp_path, "epstein", config={"samples": 25}) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["config"]["samples"] == 25
    assert max(rep["result"]["max_residuals"].values()) < 1e-10
    rows = (tmp_path / "epstein_histogram.csv").read_text().splitlines()
    assert rows[0] == "lower,upper,round_trip,infinity_formula,shift"
    assert sum(int(r.split(",")[2]) for r in rows[1:]) == 25


@pytest.mark.parametrize("config, message", [
    ({"grid": 16}, "grid"),
    ({"gird": 512}, "unknown"),
    ({"deformations": [["sideways", 0, 0.1]]}, "side"),
    ({"deformations": [["plus", 0, 0.95]]}, "fraction"),
    ({"deformations": [["plus", 7, 0.1]]}, "index"),
    ({"safety_fraction": 1.5}, "safety"),
])
def test_config_errors_exit_2(tmp_path, capsys, config, message):
    assert _run(tmp_path, "group", config=config) == 2
    assert message in capsys.readouterr().err


def test_malformed_json_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["group", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert cli.main(["group", "--config", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path)]) == 2


def test_budget_exit_4(tmp_path):
    assert _run(tmp_path, "group", config={"element_cap": 100}) == 4


def test_numeric_failure_exit_3(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise PoleEncountered("synthetic")
    monkeypatch.setitem(cli.PIPELINES, "schwarzian", boom)
    assert _run(tmp_path, "schwarzian") == 3


def test_failed_criterion_exit_3(tmp_path, monkeypatch):
    from bersmetrics.acceptance import CriterionResult

    def fake(**kw):
        return [CriterionResult(1, "fake", False, {}, {}, 0.0, 1.0)]
    monkeypatch.setattr(cli.acceptance, "run_all", fake)
    assert _run(tmp_path, "all") == 3
    assert (tmp_path / "acceptance.csv").read_text().splitlines()[1] == "1,fake,False"


def test_slow_criterion_exit_4(tmp_path, monkeypatch):
    from bersmetrics.acceptance import CriterionResult

    def fake(**kw):
        return [CriterionResult(1, "slow", True, {}, {}, 2.0, 1.0)]
    monkeypatch.setattr(cli.acceptance, "run_all", fake)
    assert _run(tmp_path, "all") == 4
    rep = json.loads((tmp_path / "report.json").read_text())
    assert "elapsed_s" not in rep["result"]["criteria"][0]


def test_all_forwards_only_explicit_resolutions(tmp_path, monkeypatch):
    seen = {}

    def fake(**kw):
        seen.update(kw)
        return []
    monkeypatch.setattr(cli.acceptance, "run_all", fake)
    assert _run(tmp_path, "all") == 0
    assert seen["resolution"] is None and seen["grid"] is None
    assert _run(tmp_path, "all", "--grid", "256") == 0
    assert seen["grid"] == 256 and seen["resolution"] is None


@given(n=st.integers(-5, 31))
def test_small_resolutions_rejected(n):
    with pytest.raises(ConfigError):
        cli.PipelineConfig(resolution=n).validate()


def test_config_roundtrip(tmp_path):
    cfg = cli.PipelineConfig(samples=3)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = cli.PipelineConfig.from_json(path)
    assert back.to_dict() == cfg.to_dict()
    assert back.explicit == frozenset(cfg.to_dict())


def test_heatmap_is_valid_and_stable():
    v = np.arange(300.0).reshape(15, 20)
    mask = np.ones(v.shape, bool)
    mask[0, 0] = False
    a = cli.heatmap_svg(v, "t <x>", mask, max_cells=8)
    assert a == cli.heatmap_svg(v, "t <x>", mask, max_cells=8)
    root = ET.fromstring(a)
    rects = [e for e in root if e.tag.endswith("rect")]
    assert 0 < len(rects) <= 8 * 8
    assert "t &lt;x&gt;" in a
