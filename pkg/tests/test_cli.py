"""Command-line surface: exit codes, outputs, manifests and determinism."""

import json

import pytest

from mcqnet.cli import main
from mcqnet.network import builtin_fixture, dump_spec, load_spec


def run_cli(*argv):
    return main(list(argv))


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_validate_fixture(tmp_path, capsys):
    code = run_cli("--out-dir", str(tmp_path), "validate", "--spec", "mm1")
    out = capsys.readouterr().out
    assert code == 0
    assert "workload 0.5" in out
    report = json.loads(read(tmp_path / "validate_report.json"))
    assert report["effective_rates"] == [1.0]
    manifest = json.loads(read(tmp_path / "validate_manifest.json"))
    assert manifest["subcommand"] == "validate"
    assert "validate_report.json" in manifest["outputs"]


def test_validate_spec_file(tmp_path):
    path = tmp_path / "net.json"
    dump_spec(builtin_fixture("tandem2"), path)
    assert run_cli("--out-dir", str(tmp_path), "validate", "--spec", str(path)) == 0


def test_validate_non_transient_exits_1(tmp_path, capsys):
    spec = {
        "classes": 2,
        "stations": [[1], [2]],
        "theta": [1.0, 0.0],
        "beta": [1.0, 1.0],
        "routing": [[0.0, 1.0], [1.0, 0.0]],
        "protocols": [
            {"policy": "fcfs", "allocation": "hq"},
            {"policy": "fcfs", "allocation": "hq"},
        ],
    }
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps(spec))
    code = run_cli("--out-dir", str(tmp_path), "validate", "--spec", str(path))
    assert code == 1
    assert "not transient" in capsys.readouterr().err


def test_unknown_fixture_exits_1(tmp_path, capsys):
    # resolves as a fixture name first, then as a path; neither exists
    code = run_cli("--out-dir", str(tmp_path), "exact", "--spec", "bogus", "--steps", "1")
    assert code in (1, 2)


def test_usage_error_exits_2(tmp_path):
    assert run_cli("--out-dir", str(tmp_path), "exact", "--spec", "mm1") == 2  # missing --steps
    assert run_cli("nonsense-subcommand") == 2


def test_fixtures_list(tmp_path, capsys):
    assert run_cli("--out-dir", str(tmp_path), "fixtures", "--list") == 0
    out = capsys.readouterr().out.split()
    assert out == ["mm1", "tandem2", "lk-prop", "lk-sbp", "fcfs-reentrant"]


def test_exact_output(tmp_path, capsys):
    code = run_cli("--out-dir", str(tmp_path), "exact", "--spec", "mm1", "--steps", "2")
    assert code == 0
    payload = json.loads(read(tmp_path / "exact_law.json"))
    assert payload["distribution"]["[[]]"] == pytest.approx(6 / 9)
    assert payload["functional"]["value"] == pytest.approx(0.7634549, abs=1e-6)


def test_exact_budget_exceeded_exits_1(tmp_path, capsys):
    code = run_cli(
        "--out-dir", str(tmp_path),
        "exact", "--spec", "mm1", "--steps", "6", "--budget", "2",
    )
    assert code == 1
    assert "budget" in capsys.readouterr().err.lower()


def test_simulate_csv(tmp_path):
    code = run_cli(
        "--seed", "5", "--out-dir", str(tmp_path),
        "simulate", "--spec", "tandem2", "--steps", "20", "--reps", "3",
    )
    assert code == 0
    lines = read(tmp_path / "paths.csv").decode().strip().splitlines()
    assert lines[0] == "rep,step,total_jobs,class_1,class_2"
    assert len(lines) == 1 + 3 * 21


def test_phi_and_cycle_json(tmp_path, capsys):
    assert run_cli(
        "--seed", "9", "--out-dir", str(tmp_path),
        "phi", "--spec", "mm1", "--steps", "4", "--reps", "500",
    ) == 0
    payload = json.loads(read(tmp_path / "phi.json"))
    assert 0.0 <= payload["value"] <= 1.0 and payload["mode"] == "mc"
    assert run_cli(
        "--seed", "9", "--out-dir", str(tmp_path),
        "phi", "--spec", "mm1", "--steps", "4", "--exact",
    ) == 0
    assert json.loads(read(tmp_path / "phi.json"))["mode"] == "exact"
    assert run_cli(
        "--seed", "4", "--out-dir", str(tmp_path),
        "cycle", "--spec", "mm1", "--cap", "5000", "--reps", "50",
    ) == 0
    cycle = json.loads(read(tmp_path / "cycle.json"))
    assert cycle["censor_fraction"] < 0.1


def test_monotone_subcommand(tmp_path, capsys):
    code = run_cli(
        "--out-dir", str(tmp_path),
        "monotone", "--spec", "mm1", "--scales", "0.5,1.0", "--steps", "2,4", "--exact",
    )
    assert code == 0
    assert "violations: 0" in capsys.readouterr().out


def test_couple_subcommand(tmp_path, capsys):
    code = run_cli(
        "--seed", "11", "--out-dir", str(tmp_path),
        "couple", "--spec", "mm1", "--lower", "[[]]", "--upper", "[[1]]",
        "--steps", "60", "--reps", "20",
    )
    assert code == 0
    payload = json.loads(read(tmp_path / "couple_report.json"))
    assert payload["invariant_failures"] == 0
    assert len(payload["runs"]) == 20


def test_couple_rejects_oi_allocation(tmp_path, capsys):
    code = run_cli(
        "--out-dir", str(tmp_path),
        "couple", "--spec", "lk-prop", "--lower", "[[],[]]", "--upper", "[[1],[]]",
        "--steps", "5",
    )
    assert code == 1


def test_threshold_synthetic_fast(tmp_path):
    # tiny statistical run just to exercise the wiring end to end
    code = run_cli(
        "--seed", "3", "--out-dir", str(tmp_path),
        "threshold", "--spec", "mm1", "--direction", "1", "--epsilon", "0.2",
        "--steps", "400", "--reps", "300",
    )
    assert code == 0
    payload = json.loads(read(tmp_path / "threshold.json"))
    assert payload["threshold"] > 0


def test_region_subcommand(tmp_path):
    code = run_cli(
        "--seed", "3", "--out-dir", str(tmp_path),
        "region", "--spec", "tandem2", "--rays", "2", "--epsilon", "0.3",
        "--steps", "300", "--reps", "200",
    )
    assert code == 0
    payload = json.loads(read(tmp_path / "region.json"))
    assert len(payload["rays"]) == 2
    assert len(payload["subcritical_polytope"]["ray_bounds"]) == 2


@pytest.mark.parametrize(
    "argv,outputs",
    [
        (("validate", "--spec", "lk-sbp"), ("validate_report.json",)),
        (("fixtures",), ("fixtures.json",)),
        (("exact", "--spec", "mm1", "--steps", "3"), ("exact_law.json",)),
        (
            ("simulate", "--spec", "fcfs-reentrant", "--steps", "30", "--reps", "2"),
            ("paths.csv",),
        ),
        (
            ("phi", "--spec", "lk-prop", "--steps", "5", "--reps", "400"),
            ("phi.json",),
        ),
        (
            ("monotone", "--spec", "mm1", "--scales", "0.5,1.0", "--steps", "2,4"),
            ("monotone_table.csv", "monotone_violations.json"),
        ),
        (
            ("couple", "--spec", "lk-sbp", "--lower", "[[],[]]", "--upper", "[[1],[]]",
             "--steps", "40", "--reps", "5"),
            ("couple_report.json",),
        ),
        (
            ("threshold", "--spec", "mm1", "--direction", "1", "--epsilon", "0.3",
             "--steps", "300", "--reps", "200"),
            ("threshold.json",),
        ),
        (
            ("region", "--spec", "tandem2", "--rays", "2", "--epsilon", "0.3",
             "--steps", "200", "--reps", "150"),
            ("region.json",),
        ),
        (
            ("cycle", "--spec", "mm1", "--cap", "2000", "--reps", "40"),
            ("cycle.json",),
        ),
    ],
)
def test_reruns_are_byte_identical(tmp_path, argv, outputs):
    dirs = (tmp_path / "a", tmp_path / "b")
    for d in dirs:
        assert run_cli("--seed", "42", "--out-dir", str(d), *argv) == 0
    for name in outputs:
        assert read(dirs[0] / name) == read(dirs[1] / name)


def test_spec_round_trip_through_files(tmp_path):
    for name in ("mm1", "lk-sbp"):
        spec = builtin_fixture(name)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        dump_spec(spec, p1)
        dump_spec(load_spec(p1), p2)
        assert read(p1) == read(p2)
        assert load_spec(p2) == spec
