import json
from pathlib import Path

from randmisfit.cli import main
from randmisfit.config import parse_config
from randmisfit.runner import parse_report_csv

DATA = Path(__file__).parent / "data"


def _write_config(tmp_path: Path, raw: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


def _noisy_config(**overrides) -> dict:
    raw = {
        "master_seed": 31,
        "problem": {"dim": 1, "bounds": [[-1.0, 1.0]], "nodes_per_dim": 17},
        "forward": {
            "kind": "mixed",
            "components": [
                {"kind": "polynomial", "terms": [[1.0, [1]]]},
                {"kind": "polynomial", "terms": [[1.0, [2]]]},
                {"kind": "trigonometric", "terms": [[1.0, [1.0], 0.0]]},
            ],
        },
        "noise": {"gamma": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]},
        "data": {"y": [0.4, 0.039999999999999994, 0.31552020666133956]},
        "family": {"kind": "sketched_quadratic", "sketch": "rademacher"},
        "sweep": {"Ns": [2, 4, 8, 16], "M": 60},
    }
    raw.update(overrides)
    return raw


def test_run_golden_schema(tmp_path):
    code = main([
        "run", "--config", str(DATA / "golden_config.json"), "--out", str(tmp_path / "o"),
    ])
    assert code == 0
    for name in ("thm1.csv", "thm2.csv"):
        produced = (tmp_path / "o" / name).read_text()
        assert produced == (DATA / f"golden_{name}").read_text()


def test_rerun_is_byte_identical(tmp_path):
    cfg = _write_config(tmp_path, _noisy_config(checks=["thm1", "thm2"]))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("thm1.csv", "thm2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_thread_count_does_not_change_outputs(tmp_path):
    cfg = _write_config(tmp_path, _noisy_config(checks=["thm1"]))
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "t1"), "--threads", "1"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "t8"), "--threads", "8"])
    assert (tmp_path / "t1" / "thm1.csv").read_bytes() == (
        tmp_path / "t8" / "thm1.csv"
    ).read_bytes()


def test_seed_flag_changes_noisy_outputs(tmp_path):
    cfg = _write_config(tmp_path, _noisy_config(checks=["thm1"]))
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "s0"), "--seed", "1"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "s1"), "--seed", "2"])
    a = parse_report_csv((tmp_path / "s0" / "thm1.csv").read_text())
    b = parse_report_csv((tmp_path / "s1" / "thm1.csv").read_text())
    assert [r["lhs"] for r in a] != [r["lhs"] for r in b]


def test_exit_codes_pass_fail_indeterminate(tmp_path):
    ok = _write_config(tmp_path, _noisy_config(checks=["thm1", "thm2"]))
    assert main(["run", "--config", str(ok), "--out", str(tmp_path / "ok")]) == 0

    fail_raw = _noisy_config(checks=["thm2"], verdicts={"ratio_cap": 0.01})
    fail_cfg = tmp_path / "fail.json"
    fail_cfg.write_text(json.dumps(fail_raw))
    assert main(["run", "--config", str(fail_cfg), "--out", str(tmp_path / "fail")]) == 1

    ind_raw = _noisy_config(checks=["corollary"], sweep={"Ns": [2], "M": 60})
    ind_cfg = tmp_path / "ind.json"
    ind_cfg.write_text(json.dumps(ind_raw))
    assert main(["run", "--config", str(ind_cfg), "--out", str(tmp_path / "ind")]) == 3


def test_exit_code_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    assert main(["run", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_exit_code_io_error(tmp_path):
    cfg = _write_config(tmp_path, _noisy_config(checks=["thm1"]))
    blocker = tmp_path / "blocked"
    blocker.write_text("a file, not a directory")
    assert main(["run", "--config", str(cfg), "--out", str(blocker / "x")]) == 4


def test_verify_detects_tampering(tmp_path):
    cfg = _write_config(tmp_path, _noisy_config(checks=["thm1"]))
    out = tmp_path / "v"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["verify", str(out / "manifest.json")]) == 0
    csv_path = out / "thm1.csv"
    text = csv_path.read_text()
    csv_path.write_text(text.replace("true", "false"))
    assert main(["verify", str(out / "manifest.json")]) == 1


def test_verify_detects_missing_file(tmp_path):
    cfg = _write_config(tmp_path, _noisy_config(checks=["thm1"]))
    out = tmp_path / "m"
    main(["run", "--config", str(cfg), "--out", str(out)])
    (out / "thm1.csv").unlink()
    assert main(["verify", str(out / "manifest.json")]) == 1


def test_sweep_subcommand_runs_single_check(tmp_path):
    cfg = _write_config(tmp_path, _noisy_config(checks=["thm1", "thm2"]))
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg), "--check", "thm1", "--out", str(out)]) == 0
    assert (out / "thm1.csv").exists()
    assert not (out / "thm2.csv").exists()
    assert (
        main(["sweep", "--config", str(cfg), "--check", "corollary", "--out", str(out)])
        == 2
    )


def test_plotdata_output(tmp_path):
    raw = _noisy_config(checks=["thm1"])
    raw["output"] = {"directory": "out", "formats": ["csv", "plotdata"]}
    cfg = _write_config(tmp_path, raw)
    out = tmp_path / "p"
    main(["run", "--config", str(cfg), "--out", str(out)])
    lines = (out / "plotdata_thm1.csv").read_text().splitlines()
    assert lines[0] == "check,N,log_N,log_lhs,log_rhs"
    assert len(lines) == 5  # header + one row per fidelity


def test_manifest_contents(tmp_path):
    cfg_path = _write_config(tmp_path, _noisy_config(checks=["thm1"]))
    out = tmp_path / "man"
    main(["run", "--config", str(cfg_path), "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["tool"] == "randmisfit"
    assert manifest["config_hash"] == parse_config(cfg_path).hash()
    assert manifest["verdicts"] == {"thm1": True}
    assert manifest["outputs"][0]["path"] == "thm1.csv"
