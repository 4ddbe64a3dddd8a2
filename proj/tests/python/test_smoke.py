import json
import math

import pytest

import pathhjb


def test_tree_value_by_hand():
    v = pathhjb.value_tree("P2", 2)
    assert v["value"] == 1.0
    assert v["std_error"] == 0.0


def test_regression_agrees_with_tree():
    reg = pathhjb.value_regression("P2", 8, paths=5000, seed=3)
    assert abs(reg["value"] - 1.0) <= 0.03 + 3 * reg["std_error"]


def test_path_norms():
    assert pathhjb.sup_norm(0.5, [[0.0], [1.5], [-2.0]]) == 2.0
    assert pathhjb.h_norm_sq(0.25, [[0.0], [0.25], [0.5], [0.75], [1.0]]) == pytest.approx(0.21875)
    assert pathhjb.d_infty(0.5, [[0.0], [1.0]], [[0.0], [1.0], [3.0]]) == pytest.approx(2.5)


def test_analytic_values():
    assert pathhjb.analytic_value("P2", 0.5, [[0.0], [0.3]]) == pytest.approx(0.8)
    assert pathhjb.analytic_value("P3", 0.25, [[0.0]]) == pytest.approx(0.5)


def test_cli_round_trip():
    code, out, err = pathhjb.run_cli(["value", "--problem", "P2", "--steps", "2"])
    assert code == 0, err
    assert json.loads(out)["value"] == 1.0
    code, _, err = pathhjb.run_cli(["value", "--problem", "P9"])
    assert code == 1
    assert "P9" in err


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        pathhjb.value_tree("P9", 2)
    with pytest.raises(ValueError):
        pathhjb.sup_norm(0.0, [[0.0]])


def test_single_criterion():
    r = pathhjb.run_criterion(7)
    assert r["id"] == 7
    assert r["pass"], r["detail"]
    assert pathhjb.criteria_count == 15
