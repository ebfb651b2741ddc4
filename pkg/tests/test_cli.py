"""Command-line behavior: parsing, flag gating, reports, exit codes, determinism."""

import json
import os
import subprocess
from pathlib import Path

import numpy as np
import pytest
import jsonschema

from solipsim.cli import UsageError, execute, main, parse_args
from solipsim.report import REPORT_VERSION, canonical_json, render_text

GOLDEN_AUDIT = Path(__file__).resolve().parent / "golden" / "fr_audit.json"
SCHEMA_PATH = (
    Path(__file__).resolve().parent.parent / "docs" / "report_schema_v1.json"
)

# biased coin: P(zero) = 0.36, P(one) = 0.64, halts on "one"
COIN_DOC = {
    "name": "coin",
    "layout": [["C", 2], ["DX", 2], ["MX", 2]],
    "steps": [
        {"kind": "prepare", "register": "C", "amplitudes": [0.6, 0.8]},
        {
            "kind": "measure_record",
            "agent": "X",
            "targets": ["C"],
            "basis": "computational",
            "labels": ["zero", "one"],
            "device": "DX",
            "memory": "MX",
            "coherence": "announced",
        },
    ],
    "halting": {"all_of": {"X": "one"}},
}


def write_coin_doc(tmp_path, halting=True):
    doc = dict(COIN_DOC)
    if not halting:
        doc = {k: v for k, v in doc.items() if k != "halting"}
    path = tmp_path / "coin.json"
    path.write_text(json.dumps(doc))
    return str(path)


def usage_exit(argv):
    with pytest.raises(SystemExit) as excinfo:
        parse_args(argv)
    assert excinfo.value.code == 2


def test_defaults_fill_in():
    config = parse_args(["fr"])
    assert config.scenario == "fr"
    assert config.mode == "unitary"
    assert config.seed == 2026
    assert config.shots == 120000
    assert config.output == "text"
    assert config.options == {"wbar_basis": "okfail"}


def test_example_invocations_parse():
    config = parse_args(["fr", "--mode", "sample", "--shots", "5000", "--seed", "7"])
    assert (config.mode, config.shots, config.seed) == ("sample", 5000, 7)

    config = parse_args(["fr", "--mode", "audit", "--output", "json"])
    assert config.output == "json"
    assert config.options == {"wbar_basis": "okfail", "intinf": "on"}

    config = parse_args(["fr", "--mode", "disclose"])
    assert config.options == {
        "wbar_basis": "okfail",
        "agent": "Fbar",
        "after_step": "auto",
    }

    config = parse_args(["fr", "--mode", "disclose", "--agent", "F", "--after-step", "6"])
    assert config.options["agent"] == "F"
    assert config.options["after_step"] == "6"

    config = parse_args(["fr", "--mode", "rounds", "--max-rounds", "50"])
    assert config.options["max_rounds"] == "50"
    assert parse_args(["fr", "--mode", "rounds"]).options["max_rounds"] == "1000"

    config = parse_args(["fr", "--mode", "disclose", "--agent", "F", "--wbar-basis", "ht"])
    assert config.options["wbar_basis"] == "ht"


def test_mode_defaults_per_scenario():
    assert parse_args(["fr-usd"]).mode == "usd"
    assert parse_args(["fr-usd", "--mode", "usd"]).mode == "usd"
    config = parse_args(["alice-bob"])
    assert config.mode == "unitary"
    assert config.options == {}  # no coin lab, no basis choice
    assert parse_args(["casino"]).options == {"wbar_basis": "okfail"}
    assert parse_args(["fr-alt-prep"]).options == {"wbar_basis": "okfail"}


def test_experiment_flag_frees_the_scenario_label(tmp_path):
    path = write_coin_doc(tmp_path)
    config = parse_args(["my-coin", "--experiment", path, "--mode", "rounds"])
    assert config.scenario == "my-coin"
    assert config.options == {"experiment": path, "max_rounds": "1000"}
    # a known label with --experiment runs the file, not the built-in bundle
    config = parse_args(["fr", "--experiment", path])
    assert config.options == {"experiment": path}


def test_unknown_scenario_exits_2(capsys):
    usage_exit(["does-not-exist"])
    assert "unknown scenario" in capsys.readouterr().err
    usage_exit([])  # scenario argument is required


def test_unavailable_modes_exit_2(tmp_path):
    usage_exit(["alice-bob", "--mode", "audit"])
    usage_exit(["alice-bob", "--mode", "rounds"])
    usage_exit(["fr-usd", "--mode", "unitary"])
    usage_exit(["fr", "--mode", "usd"])
    usage_exit(["fr-alt-prep", "--mode", "disclose"])
    usage_exit(["casino", "--mode", "disclose"])
    # a custom experiment only supports unitary, sample, rounds
    path = write_coin_doc(tmp_path)
    usage_exit(["coin", "--experiment", path, "--mode", "audit"])
    usage_exit(["coin", "--experiment", path, "--mode", "disclose"])


def test_flag_value_validation_exits_2():
    usage_exit(["fr", "--seed", "-1"])
    usage_exit(["fr", "--seed", str(2**64)])
    usage_exit(["fr", "--mode", "sample", "--shots", "0"])
    usage_exit(["fr", "--mode", "rounds", "--max-rounds", "0"])
    usage_exit(["fr", "--mode", "disclose", "--after-step", "-1"])
    usage_exit(["fr", "--mode", "sample", "--shots", "many"])


def test_flag_scope_validation_exits_2():
    usage_exit(["casino", "--wbar-basis", "ht"])  # coin-lab basis is fr only
    usage_exit(["fr", "--mode", "rounds", "--wbar-basis", "ht"])  # no halting
    usage_exit(["fr", "--mode", "audit", "--wbar-basis", "ht"])
    usage_exit(["fr", "--mode", "audit", "--agent", "F"])
    usage_exit(["fr", "--after-step", "3"])
    usage_exit(["fr", "--mode", "sample", "--intinf", "off"])
    usage_exit(["fr", "--max-rounds", "5"])


def test_execute_unitary_fr():
    report, code = execute(parse_args(["fr"]))
    assert code == 0
    assert report["version"] == REPORT_VERSION
    assert report["rng"] == {"algorithm": "philox4x64", "seed": 2026}
    assert report["config"]["scenario"] == "fr"
    results = report["results"]
    assert abs(results["final_norm"] - 1.0) <= 1e-12
    assert set(results["reference_fidelities"]) == {"init", "psi", "phi", "xi", "zeta"}
    assert all(f >= 1.0 - 1e-10 for f in results["reference_fidelities"].values())
    assert abs(results["halting_probability"] - 1.0 / 12.0) <= 1e-12
    assert results["conditional_given_okbar"]["ok"] == 0.5
    assert [c["name"] for c in report["checks"]] == [
        "final-norm",
        "reference-init",
        "reference-psi",
        "reference-phi",
        "reference-xi",
        "reference-zeta",
        "halting-probability",
        "conditional-given-okbar",
    ]
    assert all(c["passed"] for c in report["checks"])


def test_execute_unitary_alice_bob():
    report, code = execute(parse_args(["alice-bob"]))
    assert code == 0
    assert report["results"]["agreement_probability"] == 1.0
    assert all(c["passed"] for c in report["checks"])


def test_execute_usd():
    report, code = execute(parse_args(["fr-usd"]))
    assert code == 0
    results = report["results"]
    np.testing.assert_allclose(results["inconclusive_probability"], 1.0 / 3.0, atol=1e-12)
    assert [c["name"] for c in report["checks"]] == [
        "error-free",
        "inconclusive-rate",
        "discrimination-predictions-vindicated",
    ]
    assert all(c["passed"] for c in report["checks"])


def test_execute_sample_is_deterministic_and_consistent():
    argv = ["fr", "--mode", "sample", "--shots", "3000", "--seed", "11"]
    report, code = execute(parse_args(argv))
    assert code == 0
    results = report["results"]
    assert results["shots"] == 3000
    assert sum(results["counts"].values()) == 3000
    assert set(results["counts"]) == {
        "okbar,ok",
        "okbar,fail",
        "failbar,ok",
        "failbar,fail",
    }
    assert all(c["passed"] for c in report["checks"])
    # identical configuration, byte-identical report
    again, _ = execute(parse_args(argv))
    assert canonical_json(again) == canonical_json(report)


def test_execute_rounds_small():
    argv = ["fr", "--mode", "rounds", "--shots", "40", "--seed", "5", "--max-rounds", "200"]
    report, code = execute(parse_args(argv))
    assert code == 0
    results = report["results"]
    assert results["experiments"] == 40
    assert results["max_rounds"] == 200
    assert results["halted"] == 40  # (11/12)^200 leaves no realistic miss
    assert sum(results["round_histogram"].values()) == 40
    assert results["mean_rounds_to_halt"] > 1.0
    assert all(c["passed"] for c in report["checks"])


def test_execute_disclose_default_agent():
    report, code = execute(parse_args(["fr", "--mode", "disclose"]))
    assert code == 0
    results = report["results"]
    assert results["agent"] == "Fbar"
    assert results["after_step"] == 2  # earliest point: right after the coin record
    assert results["window"] == [2, 5]
    assert results["flag_register"] == "G"
    np.testing.assert_allclose(
        [results["flag_marginal"]["heads"], results["flag_marginal"]["tails"]],
        [1.0 / 3.0, 2.0 / 3.0],
        atol=1e-12,
    )
    p = results["conditionals"]["tails"]["record_w"]["fail"]
    assert abs(p - 1.0) <= 1e-10
    names = [c["name"] for c in report["checks"]]
    assert names == ["final-norm", "disclosed-w-given-tails-certain"]
    assert all(c["passed"] for c in report["checks"])


def test_execute_disclose_spin_agent_both_bases():
    report, code = execute(parse_args(["fr", "--mode", "disclose", "--agent", "F"]))
    assert code == 0
    assert report["results"]["window"] == [5, 6]
    p = report["results"]["conditionals"]["+1/2"]["record_w"]["fail"]
    assert abs(p - 0.5) <= 1e-10
    assert [c["name"] for c in report["checks"]] == [
        "final-norm",
        "disclosed-w-given-up-half",
    ]

    report, code = execute(
        parse_args(["fr", "--mode", "disclose", "--agent", "F", "--wbar-basis", "ht"])
    )
    assert code == 0
    p = report["results"]["conditionals"]["+1/2"]["record_r"]["tails"]
    assert abs(p - 1.0) <= 1e-10
    assert [c["name"] for c in report["checks"]] == [
        "final-norm",
        "disclosed-r-record-given-up-certain",
    ]
    assert all(c["passed"] for c in report["checks"])


def test_disclose_usage_errors_surface_after_parsing():
    with pytest.raises(UsageError, match="unknown agent"):
        execute(parse_args(["fr", "--mode", "disclose", "--agent", "Zed"]))
    with pytest.raises(UsageError, match=r"outside the valid window \[2, 5\]"):
        execute(parse_args(["fr", "--mode", "disclose", "--after-step", "7"]))


def test_rounds_mode_needs_a_halting_condition(tmp_path):
    path = write_coin_doc(tmp_path, halting=False)
    with pytest.raises(UsageError, match="halting condition"):
        execute(parse_args(["coin", "--experiment", path, "--mode", "rounds"]))


def test_custom_experiment_runs_all_three_modes(tmp_path):
    path = write_coin_doc(tmp_path)

    report, code = execute(parse_args(["coin", "--experiment", path]))
    assert code == 0
    np.testing.assert_allclose(
        [report["results"]["announced_joint"][k] for k in ("zero", "one")],
        [0.36, 0.64],
        atol=1e-12,
    )

    report, code = execute(
        parse_args(["coin", "--experiment", path, "--mode", "sample", "--shots", "4000", "--seed", "3"])
    )
    assert code == 0
    assert sum(report["results"]["counts"].values()) == 4000

    report, code = execute(
        parse_args(
            ["coin", "--experiment", path, "--mode", "rounds", "--shots", "50",
             "--seed", "9", "--max-rounds", "30"]
        )
    )
    assert code == 0
    assert report["results"]["halted"] == 50


def test_audit_report_matches_golden_bytes():
    report, code = execute(parse_args(["fr", "--mode", "audit", "--output", "json"]))
    assert code == 0
    assert canonical_json(report) + "\n" == GOLDEN_AUDIT.read_text()


def test_reports_validate_against_schema(tmp_path):
    schema = json.loads(SCHEMA_PATH.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    path = write_coin_doc(tmp_path)
    invocations = [
        ["fr"],
        ["fr", "--mode", "sample", "--shots", "400", "--seed", "1"],
        ["fr", "--mode", "rounds", "--shots", "10", "--seed", "1", "--max-rounds", "200"],
        ["fr", "--mode", "audit"],
        ["fr", "--mode", "disclose"],
        ["fr-usd"],
        ["alice-bob"],
        ["casino"],
        ["coin", "--experiment", path, "--mode", "sample", "--shots", "200"],
    ]
    for argv in invocations:
        report, _ = execute(parse_args(argv))
        jsonschema.validate(json.loads(canonical_json(report)), schema)


def test_canonical_json_formatting_rules():
    # insertion order is preserved, floats carry 17 significant digits
    text = canonical_json({"b": 1.0 / 3.0, "a": [True, None, 2]})
    assert text.index('"b"') < text.index('"a"')
    assert "0.33333333333333331" in text
    with pytest.raises(ValueError, match="non-finite"):
        canonical_json({"x": float("nan")})
    with pytest.raises(ValueError, match="non-finite"):
        canonical_json({"x": float("inf")})
    with pytest.raises(TypeError, match="keys must be strings"):
        canonical_json({1: "x"})


def test_render_text_is_deterministic():
    argv = ["fr", "--mode", "sample", "--shots", "500", "--seed", "42"]
    first, _ = execute(parse_args(argv))
    second, _ = execute(parse_args(argv))
    assert render_text(first) == render_text(second)
    text = render_text(first)
    assert text.splitlines()[0] == "version: report/v1"
    assert text.endswith("\n")


def test_main_exit_codes_and_streams(tmp_path, capsys):
    # usage error found after parsing: exit 2, message on stderr only
    assert main(["fr", "--mode", "disclose", "--agent", "Zed"]) == 2
    captured = capsys.readouterr()
    assert captured.out == ""
    assert captured.err.startswith("solipsim: error:")

    # a malformed experiment file surfaces as a numerical/internal failure
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"layout": [["C", 2]]}))
    assert main(["x", "--experiment", str(bad)]) == 3
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "solipsim: numerical failure:" in captured.err

    # a passing run exits 0 and prints the canonical report
    assert main(["fr", "--output", "json"]) == 0
    first = capsys.readouterr().out
    report = json.loads(first)
    assert report["version"] == REPORT_VERSION
    assert main(["fr", "--output", "json"]) == 0
    assert capsys.readouterr().out == first


def test_console_script_end_to_end():
    env = {k: v for k, v in os.environ.items() if k != "SOLIPSIM_LOG"}
    quiet = subprocess.run(
        ["solipsim", "fr", "--mode", "unitary", "--output", "json"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert quiet.returncode == 0
    assert quiet.stderr == ""
    assert json.loads(quiet.stdout)["version"] == REPORT_VERSION

    # logging goes to stderr and never contaminates the report stream
    env["SOLIPSIM_LOG"] = "info"
    logged = subprocess.run(
        ["solipsim", "fr", "--mode", "unitary", "--output", "json"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert logged.returncode == 0
    assert logged.stdout == quiet.stdout
    assert "solipsim" in logged.stderr

    bad = subprocess.run(
        ["solipsim", "no-such-scenario"], capture_output=True, text=True, env=env
    )
    assert bad.returncode == 2
