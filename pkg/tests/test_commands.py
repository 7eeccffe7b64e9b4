import json
import math

import pytest

from app import main
from commands import command_registry
from core.config import CIRCLE_EMBEDDING_NOTE, NON_UNIMODULAR_WARNING, SCHEMA_VERSION
from core.errors import ValidationError


def run(tmp_path, *argv, name="report.json"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    text = out.read_text(encoding="utf-8") if out.exists() else None
    return code, text


def run_json(tmp_path, *argv):
    code, text = run(tmp_path, *argv)
    return code, json.loads(text) if text else None


def test_list_shows_every_command(capsys):
    assert main(["list"]) == 0
    names = {info["name"] for info in json.loads(capsys.readouterr().out)}
    assert names == {"analyze", "zeta", "heat", "measure", "distance", "form", "telescope", "pisot", "omega"}


def test_command_metadata():
    info = command_registry.get_command_info("heat")
    assert info["required_params"] == ["spec"]
    assert "t_min" in info["optional_params"]
    assert command_registry.get_command_info("nope") is None


def test_missing_required_parameter():
    with pytest.raises(ValidationError):
        command_registry.get_command("analyze").initialize({"spec": None})


def test_unknown_command_exits_with_usage_error(capsys):
    assert main(["frobnicate"]) == 2


# graph commands


def test_analyze_dyadic(tmp_path):
    code, report = run_json(tmp_path, "analyze", "dyadic")
    assert code == 0
    assert report["schema_version"] == SCHEMA_VERSION
    assert report["command"] == "analyze"
    results = report["results"]
    assert results["s0"] == pytest.approx(1.0)
    assert results["zeta"]["leading_residue"] == pytest.approx(1 / math.log(2), rel=1e-9)
    assert results["log_term"]["coefficient"] is None
    assert results["measure"]["1"] == pytest.approx(0.5)
    assert results["measure"]["0 1 1"] == pytest.approx(0.125)
    assert any("alternative_residue" in w for w in report["warnings"])


def test_analyze_flags_unit_eigenvalue(tmp_path):
    code, report = run_json(tmp_path, "analyze", "ev1")
    assert code == 0
    assert report["results"]["log_term"]["eigenvalue_one"] is True
    assert report["results"]["log_term"]["coefficient"] == pytest.approx(0.0, abs=1e-12)


def test_invalid_rho_exits_with_validation_code(tmp_path, capsys):
    code, text = run(tmp_path, "analyze", "dyadic", "--rho", "1.5")
    assert code == 2
    assert text is None
    assert "RhoOutOfRange" in capsys.readouterr().err


def test_missing_spec_file(tmp_path):
    code, _ = run(tmp_path, "analyze", str(tmp_path / "missing.json"))
    assert code == 2


def test_reports_are_deterministic(tmp_path):
    first = run(tmp_path, "analyze", "fibonacci_graph", name="a.json")
    second = run(tmp_path, "analyze", "fibonacci_graph", name="b.json")
    assert first[0] == second[0] == 0
    assert first[1] == second[1]


def test_zeta_values(tmp_path):
    code, report = run_json(tmp_path, "zeta", "dyadic", "--z", "2", "--z", "0.5")
    assert code == 0
    first, second = report["results"]["values"]
    assert first["closed"]["re"] == pytest.approx(1.0)
    assert first["series"]["re"] == pytest.approx(1.0)
    assert second["series"] is None


def test_heat_csv(tmp_path):
    code, text = run(tmp_path, "heat", "fibonacci_graph", "--points", "5", "--format", "csv", name="heat.csv")
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0] == "t,direct,expansion,residual,scaled_direct"
    assert len(lines) == 6


def test_heat_rejects_bad_grid(tmp_path):
    code, _ = run(tmp_path, "heat", "dyadic", "--t-min", "0")
    assert code == 2


def test_measure_report(tmp_path):
    code, report = run_json(tmp_path, "measure", "fibonacci_graph", "--depth", "4", "--state-depth", "2")
    assert code == 0
    assert report["results"]["additivity_error"] <= 1e-12
    assert report["results"]["state_error"] <= 1e-6


def test_telescope_dyadic(tmp_path):
    code, report = run_json(tmp_path, "telescope", "dyadic", "--samples", "40", "--depth", "6")
    assert code == 0
    results = report["results"]
    assert results["s0_invariant"] and results["counts_match"]
    assert results["lipschitz"]["all_pass"]


# metric commands


def test_distance_with_pairs_and_oracle(tmp_path):
    code, report = run_json(tmp_path, "distance", "dyadic", "--pairs", "dyadic_pairs", "--oracle")
    assert code == 0
    rows = report["results"]["distances"]
    assert [r["distance"] for r in rows] == pytest.approx([0.5, 0.75, 0.0, 0.25])
    assert all(r["oracle_match"] for r in rows)


def test_distance_matrix_without_pairs(tmp_path):
    code, report = run_json(tmp_path, "distance", "fibonacci_graph", "--samples", "4", "--depth", "8")
    assert code == 0
    matrix = report["results"]["matrix"]
    assert len(matrix) == 4 and all(matrix[i][i] == 0 for i in range(4))


def test_distance_between_different_sources(tmp_path):
    pairs = tmp_path / "pairs.json"
    pairs.write_text(json.dumps([["ba", "aa"]]), encoding="utf-8")
    code, _ = run(tmp_path, "distance", "fibonacci_graph", "--pairs", str(pairs))
    assert code == 4


def test_form_on_the_circle(tmp_path):
    code, report = run_json(tmp_path, "form", "dyadic", "--trig", "1:1", "--depth", "20", "--samples", "10")
    assert code == 0
    circle = report["results"]["circle"]
    assert circle["energy"] == pytest.approx((2 * math.pi) ** 2)
    assert circle["relative_error"] < 1e-4
    assert CIRCLE_EMBEDDING_NOTE in report["warnings"]
    assert report["results"]["markov"]["all_hold"]


def test_form_trig_needs_dyadic_graph(tmp_path):
    code, _ = run(tmp_path, "form", "fibonacci_graph", "--trig", "1:1")
    assert code == 2


# tiling commands


def test_pisot_fibonacci(tmp_path):
    code, report = run_json(tmp_path, "pisot", "fibonacci")
    assert code == 0
    results = report["results"]
    assert results["pisot"]["pisot"] and results["pisot"]["unimodular"]
    assert NON_UNIMODULAR_WARNING not in report["warnings"]
    assert len(results["eigenvalues"]) == 3
    for row in results["eigenvalues"]:
        assert row["eigenvalue_tr"] < 0 and row["eigenvalue_lg"] < 0
        assert row["q_tr_relative_error"] <= 0.01


def test_pisot_with_explicit_beta(tmp_path):
    code, report = run_json(tmp_path, "pisot", "fibonacci", "--beta", "0,1", "--beta", "0,2")
    assert code == 0
    first, second = report["results"]["eigenvalues"]
    assert second["eigenvalue_lg"] == pytest.approx(4 * first["eigenvalue_lg"])


def test_pisot_thue_morse_is_a_domain_error(tmp_path, capsys):
    code, _ = run(tmp_path, "pisot", "thue_morse")
    assert code == 3
    assert "IrrationalityViolation" in capsys.readouterr().err


def test_omega_fibonacci(tmp_path):
    code, report = run_json(tmp_path, "omega", "fibonacci")
    assert code == 0
    results = report["results"]
    assert results["omega"]["s0"] == pytest.approx(2.0)
    assert results["slope_error"] <= 0.02
    assert results["multiplicativity_error"] <= 1e-10
    assert results["omega"]["residue_positive"]
