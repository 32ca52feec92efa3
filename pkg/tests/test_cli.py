import copy
import csv
import json
import math
from pathlib import Path

import pytest

from kobalab import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
FAST = ["distance_bidisc", "geodesic_bidisc_example", "conjecture1_bidisc", "iterate_rotation",
        "horosphere_product", "julia_bidisc", "dw_ball", "dw_bidisc_rotation"]


def load(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())


def run_raw(tmp_path, raw, *extra, command="run"):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(raw))
    out = tmp_path / "out"
    return cli.main([command, "--config", str(cfg), "--out", str(out), "--quiet", *extra]), out


@pytest.mark.parametrize("name", FAST)
def test_shipped_configs_run(tmp_path, name):
    code, out = run_raw(tmp_path, load(name))
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert result["meta"]["schema"] == "v1" and result["meta"]["seed"] == 0
    assert "tolerances" in result["meta"] and "budget" in result["meta"]
    assert json.loads((out / "config.json").read_text())["kind"] == result["meta"]["kind"]


def test_distance_example(tmp_path):
    code, out = run_raw(tmp_path, load("distance_bidisc"))
    res = json.loads((out / "result.json").read_text())["result"]
    assert res["exact"] is True
    assert res["lo"] == res["hi"] == pytest.approx(math.atanh(0.75), abs=1e-12)
    with open(out / "distances.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and float(rows[0]["lo"]) == pytest.approx(0.9729550745276566)


def test_strong_visibility_example(tmp_path):
    raw = load("visibility_bidisc_strong")
    raw["parameters"]["depth"] = 14
    code, out = run_raw(tmp_path, raw, command="visibility")
    assert code == 0
    res = json.loads((out / "result.json").read_text())["result"]
    assert res["status"] == "Escaping"


def test_rotation_has_empty_target_table(tmp_path):
    code, out = run_raw(tmp_path, load("iterate_rotation"), command="iterate")
    assert code == 0
    lines = (out / "target_set.csv").read_text().splitlines()
    assert len(lines) == 1  # header only


def test_failed_verdict_exits_two(tmp_path):
    raw = load("dw_bidisc_rotation")
    raw["parameters"]["xi"] = [-1, 0.9]
    code, out = run_raw(tmp_path, raw)
    assert code == 2
    res = json.loads((out / "result.json").read_text())
    assert res["status"] == "FAIL" and res["result"]["containment"]["status"] == "FAIL"


@pytest.mark.parametrize("mutate, path", [
    (lambda r: r.pop("seed"), "$.seed"),
    (lambda r: r.update(schema="v2"), "$.schema"),
    (lambda r: r.update(kind="plot"), "$.kind"),
    (lambda r: r.update(seed=-1), "$.seed"),
    (lambda r: r["domain"].update(dim=0), "$.domain"),
    (lambda r: r["parameters"].update(w=[1.5, 0]), "$.parameters.w"),
    (lambda r: r["parameters"].pop("z"), "$.parameters.z"),
    (lambda r: r.update(tolerances={"tol_nope": 1}), "$.tolerances.tol_nope"),
    (lambda r: r.update(budget="lots"), "$.budget"),
])
def test_config_errors_report_json_path(tmp_path, capsys, mutate, path):
    raw = copy.deepcopy(load("distance_bidisc"))
    mutate(raw)
    code, _ = run_raw(tmp_path, raw)
    assert code == 1
    assert f"config error at {path}:" in capsys.readouterr().err


def test_bad_map_reports_path(tmp_path, capsys):
    raw = load("iterate_rotation")
    raw["parameters"]["map"] = {"map": "linear", "matrix": [[3]]}
    code, _ = run_raw(tmp_path, raw)
    assert code == 1 and "$.parameters.map" in capsys.readouterr().err


def test_kind_subcommand_must_match(tmp_path, capsys):
    code, _ = run_raw(tmp_path, load("distance_bidisc"), command="julia")
    assert code == 1 and "$.kind" in capsys.readouterr().err


def test_results_are_byte_identical(tmp_path):
    raw = load("dw_bidisc_rotation")
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, out_a = run_raw(tmp_path / "a", raw)
    _, out_b = run_raw(tmp_path / "b", raw)
    assert (out_a / "result.json").read_bytes() == (out_b / "result.json").read_bytes()


def test_seed_and_budget_overrides_are_echoed(tmp_path):
    code, out = run_raw(tmp_path, load("distance_bidisc"), "--seed", "7", "--budget", "2000")
    meta = json.loads((out / "result.json").read_text())["meta"]
    echo = json.loads((out / "config.json").read_text())
    assert meta["seed"] == echo["seed"] == 7 and meta["budget"] == echo["budget"] == 2000


def test_parallel_pairs_match_serial(tmp_path):
    raw = load("distance_bidisc")
    raw["domain"] = {"type": "ball", "dim": 2}
    raw["parameters"] = {"pairs": [[[0, 0], [0.5, 0]], [[0.1, 0.2], [-0.3, 0]], [[0, 0.6], [0.2, 0.1]]]}
    (tmp_path / "s").mkdir()
    (tmp_path / "p").mkdir()
    _, out_s = run_raw(tmp_path / "s", raw)
    _, out_p = run_raw(tmp_path / "p", raw, "--jobs", "2")
    assert (out_s / "result.json").read_bytes() == (out_p / "result.json").read_bytes()


def test_non_finite_values_are_strings():
    assert cli._clean({"a": math.inf, "b": [math.nan, 1.0]}) == {"a": "inf", "b": ["nan", 1.0]}
