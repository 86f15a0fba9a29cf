import json
from pathlib import Path

import pytest

import randmisfit as rm
from randmisfit.config import ConfigError, config_from_dict, parse_config

DATA = Path(__file__).parent / "data"


def minimal_config() -> dict:
    return {
        "problem": {"dim": 1, "bounds": [[-1.0, 1.0]], "nodes_per_dim": 9},
        "forward": {"kind": "affine", "matrix": [[1.0]], "offset": [0.0]},
        "noise": {"gamma": [[1.0]]},
        "data": {"y": [0.5]},
        "family": {"kind": "sketched_quadratic", "sketch": "rademacher"},
        "sweep": {"Ns": [1, 2], "M": 4},
    }


def test_minimal_config_defaults():
    cfg = config_from_dict(minimal_config())
    assert cfg.exponents == {
        "q1": 2.0, "q2": 2.0, "p1": 2.0, "p2": 2.0, "p3": 2.0, "rho_star": 3.0,
    }
    assert cfg.master_seed == 0
    assert cfg.prior == {"kind": "uniform"}
    assert cfg.problem["rule"] == "gauss_legendre"
    assert cfg.checks == ("thm1", "thm2", "corollary")
    assert cfg.output["directory"] == "out"


def test_forward_family_defaults_to_forward_check():
    raw = minimal_config()
    raw["family"] = {"kind": "perturbed_forward", "scale": 0.5}
    cfg = config_from_dict(raw)
    assert cfg.checks == ("forward",)


def test_unknown_keys_rejected():
    raw = minimal_config()
    raw["extra"] = 1
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict(raw)
    raw = minimal_config()
    raw["sweep"]["warmup"] = 5
    with pytest.raises(ConfigError, match="sweep.*unknown key"):
        config_from_dict(raw)


def test_missing_keys_rejected():
    raw = minimal_config()
    del raw["noise"]
    with pytest.raises(ConfigError, match="missing required key"):
        config_from_dict(raw)


def test_gamma_spd_error_names_key():
    raw = minimal_config()
    raw["forward"] = {"kind": "affine", "matrix": [[1.0], [0.0]]}
    raw["noise"] = {"gamma": [[1.0, 2.0], [2.0, 1.0]]}
    raw["data"] = {"y": [0.5, 0.1]}
    with pytest.raises(ConfigError, match="noise.gamma"):
        config_from_dict(raw)


def test_dimension_inconsistency_rejected():
    raw = minimal_config()
    raw["data"] = {"y": [0.5, 0.1]}
    with pytest.raises(ConfigError, match="data.y"):
        config_from_dict(raw)
    raw = minimal_config()
    raw["problem"]["dim"] = 2
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_sweep_and_checks_validation():
    raw = minimal_config()
    raw["sweep"]["Ns"] = [4, 2]
    with pytest.raises(ConfigError, match="ascending"):
        config_from_dict(raw)
    raw = minimal_config()
    raw["sweep"]["M"] = 1
    with pytest.raises(ConfigError, match="sweep.M"):
        config_from_dict(raw)
    raw = minimal_config()
    raw["checks"] = ["forward"]
    with pytest.raises(ConfigError, match="forward requires"):
        config_from_dict(raw)
    raw = minimal_config()
    raw["checks"] = ["thm3"]
    with pytest.raises(ConfigError, match="unknown check"):
        config_from_dict(raw)


def test_malformed_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config(bad)
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.json")


def test_hash_stable_under_key_reordering(tmp_path):
    raw = minimal_config()
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(json.dumps(raw))
    reordered = {k: raw[k] for k in sorted(raw, reverse=True)}
    b.write_text(json.dumps(reordered))
    assert parse_config(a).hash() == parse_config(b).hash()
    # parsing the same file twice is also stable
    assert parse_config(a).hash() == parse_config(a).hash()


def test_hash_sensitive_to_content():
    cfg = config_from_dict(minimal_config())
    assert cfg.hash() != cfg.with_seed(1).hash()


def test_seed_override_changes_report_values():
    # a data-space dimension above 1 so sketching is genuinely random (the
    # scalar Rademacher sketch is exact for every seed)
    raw = minimal_config()
    raw["forward"] = {"kind": "affine", "matrix": [[1.0], [-0.5]], "offset": [0.0, 0.2]}
    raw["noise"] = {"gamma": [[1.0, 0.0], [0.0, 1.0]]}
    raw["data"] = {"y": [0.5, 0.1]}
    raw["sweep"] = {"Ns": [2, 4], "M": 30}
    raw["checks"] = ["thm1"]
    cfg = config_from_dict(raw)
    problem = cfg.build_problem()
    rows = {}
    for seed in (0, 1):
        fam = cfg.with_seed(seed).build_family(problem)
        row = rm.check_thm1(problem, fam, N=2, M=30)
        rows[seed] = (row.lhs, row.rhs)
    assert rows[0] != rows[1]


def test_shipped_reference_configs_parse():
    configs = Path(__file__).resolve().parents[1] / "configs"
    for name in ("tp1_exact.json", "tp2_sketched.json", "tp2_forward.json"):
        cfg = parse_config(configs / name)
        assert cfg.hash()


def test_golden_config_round_trip():
    cfg = parse_config(DATA / "golden_config.json")
    assert cfg.checks == ("thm1", "thm2")
    assert cfg.family["scale"] == 0.0
