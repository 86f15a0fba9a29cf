"""Experiment configuration: JSON parsing, validation, canonical hashing.

A config fully determines an experiment: problem geometry, prior, forward
model, noise, data, misfit family, fidelity sweep, exponents, requested
checks, and output layout. Defaults are applied during parsing and the
resolved config hashes stably under key reordering (canonical JSON).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import bounds, forward as fwd, grids, measures, misfits, posteriors

DEFAULT_EXPONENTS = {"q1": 2.0, "q2": 2.0, "p1": 2.0, "p2": 2.0, "p3": 2.0, "rho_star": 3.0}
DEFAULT_OUTPUT = {"directory": "out", "formats": ["csv"]}
DEFAULT_VERDICTS = {"ratio_cap": bounds.RATIO_CAP}
OUTPUT_FORMATS = ("csv", "plotdata")
PRIOR_KINDS = ("uniform", "truncated_gaussian")


class ConfigError(ValueError):
    """A malformed or inconsistent experiment configuration (exit code 2)."""


def _require_mapping(value: Any, where: str) -> dict:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}: expected an object")
    return dict(value)


def _check_keys(section: dict, where: str, required: tuple, optional: tuple = ()) -> None:
    unknown = set(section) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = [k for k in required if k not in section]
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {missing}")


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment configuration."""

    master_seed: int
    problem: dict
    prior: dict
    forward: dict
    noise: dict
    data: dict
    family: dict
    sweep: dict
    exponents: dict
    checks: tuple[str, ...]
    verdicts: dict
    output: dict

    def canonical_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "problem": self.problem,
            "prior": self.prior,
            "forward": self.forward,
            "noise": self.noise,
            "data": self.data,
            "family": self.family,
            "sweep": self.sweep,
            "exponents": self.exponents,
            "checks": list(self.checks),
            "verdicts": self.verdicts,
            "output": self.output,
        }

    def hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, master_seed=int(seed))

    def with_output_dir(self, directory: str) -> "ExperimentConfig":
        return replace(self, output={**self.output, "directory": str(directory)})

    def with_checks(self, checks: tuple[str, ...]) -> "ExperimentConfig":
        return replace(self, checks=tuple(checks))

    # -- builders -------------------------------------------------------------

    def build_grid(self) -> grids.GridSpace:
        p = self.problem
        try:
            return grids.build_grid(p["dim"], p["bounds"], p["nodes_per_dim"], p["rule"])
        except ValueError as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def build_prior(self, grid: grids.GridSpace) -> measures.PriorDensity:
        try:
            if self.prior["kind"] == "uniform":
                return measures.uniform_prior(grid)
            return measures.truncated_gaussian_prior(
                grid, self.prior["mean"], self.prior["sd"]
            )
        except ValueError as exc:
            raise ConfigError(f"prior: {exc}") from exc

    def build_forward(self, grid: grids.GridSpace) -> fwd.ForwardModel:
        f = self.forward
        dim = self.problem["dim"]
        try:
            if f["kind"] == fwd.AFFINE:
                model = fwd.affine_forward(f["matrix"], f.get("offset"))
            elif f["kind"] == fwd.POLYNOMIAL:
                model = fwd.polynomial_forward(f["components"], dim)
            elif f["kind"] == fwd.TRIGONOMETRIC:
                model = fwd.trigonometric_forward(f["components"], dim)
            elif f["kind"] == fwd.MIXED:
                model = fwd.mixed_forward(f["components"], dim)
            else:
                model = fwd.tabulated_forward(grid, np.asarray(f["values"], dtype=float))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"forward: {exc}") from exc
        if model.in_dim != dim:
            raise ConfigError(
                f"forward: model takes {model.in_dim}-dimensional input, problem.dim is {dim}"
            )
        if "out_dim" in f and model.out_dim != f["out_dim"]:
            raise ConfigError(
                f"forward.out_dim: declared {f['out_dim']}, model has {model.out_dim}"
            )
        return model

    def build_noise(self) -> fwd.GaussianNoise:
        try:
            return fwd.gaussian_noise(self.noise["gamma"])
        except ValueError as exc:
            raise ConfigError(f"noise.gamma: {exc}") from exc

    def build_problem(self) -> posteriors.InverseProblem:
        grid = self.build_grid()
        prior = self.build_prior(grid)
        model = self.build_forward(grid)
        noise = self.build_noise()
        y = np.asarray(self.data["y"], dtype=float).reshape(-1)
        if y.shape != (noise.dim,):
            raise ConfigError(
                f"data.y: length {y.shape[0]} does not match noise dimension {noise.dim}"
            )
        if model.out_dim != noise.dim:
            raise ConfigError(
                f"noise.gamma: dimension {noise.dim} does not match forward output "
                f"{model.out_dim}"
            )
        return posteriors.build_problem(grid, prior, model, noise, y)

    def build_family(self, problem: posteriors.InverseProblem) -> misfits.RandomMisfitFamily:
        fam = self.family
        sketch = None
        if fam["kind"] == misfits.SKETCHED_QUADRATIC:
            sketch = misfits.SketchDistribution(
                kind=fam["sketch"], ell=float(fam.get("ell", 0.0))
            )
        try:
            return misfits.misfit_family(
                kind=fam["kind"],
                forward=problem.forward,
                noise=problem.noise,
                y=problem.y,
                sketch=sketch,
                scale=fam.get("scale"),
                variant=fam.get("variant", misfits.VARIANT_UNIFORM),
                N=int(self.sweep["Ns"][0]),
                stream_root=(self.master_seed, "family"),
            )
        except ValueError as exc:
            raise ConfigError(f"family: {exc}") from exc

    def exponent_set(self) -> bounds.ExponentSet:
        try:
            return bounds.ExponentSet(**self.exponents)
        except ValueError as exc:
            raise ConfigError(f"exponents: {exc}") from exc


def _validate_sections(raw: dict, where: str = "config") -> dict:
    _check_keys(
        raw, where,
        required=("problem", "forward", "noise", "data", "family", "sweep"),
        optional=("master_seed", "prior", "exponents", "checks", "verdicts", "output"),
    )

    problem = _require_mapping(raw["problem"], "problem")
    _check_keys(problem, "problem", ("dim", "bounds", "nodes_per_dim"), ("rule",))
    problem.setdefault("rule", grids.GAUSS_LEGENDRE)
    if problem["rule"] not in grids.RULES:
        raise ConfigError(f"problem.rule: unknown rule {problem['rule']!r}")

    prior = _require_mapping(raw.get("prior", {"kind": "uniform"}), "prior")
    _check_keys(prior, "prior", ("kind",), ("mean", "sd"))
    if prior["kind"] not in PRIOR_KINDS:
        raise ConfigError(f"prior.kind: unknown kind {prior['kind']!r}")
    if prior["kind"] == "truncated_gaussian" and not ("mean" in prior and "sd" in prior):
        raise ConfigError("prior: truncated_gaussian requires mean and sd")

    forward_sec = _require_mapping(raw["forward"], "forward")
    if "kind" not in forward_sec:
        raise ConfigError("forward: missing required key(s) ['kind']")
    kind = forward_sec["kind"]
    if kind not in fwd.FORWARD_KINDS:
        raise ConfigError(f"forward.kind: unknown kind {kind!r}")
    per_kind = {
        fwd.AFFINE: (("kind", "matrix"), ("offset", "out_dim")),
        fwd.POLYNOMIAL: (("kind", "components"), ("out_dim",)),
        fwd.TRIGONOMETRIC: (("kind", "components"), ("out_dim",)),
        fwd.MIXED: (("kind", "components"), ("out_dim",)),
        fwd.TABULATED: (("kind", "values"), ("out_dim",)),
    }
    req, opt = per_kind[kind]
    _check_keys(forward_sec, "forward", req, opt)

    noise = _require_mapping(raw["noise"], "noise")
    _check_keys(noise, "noise", ("gamma",))

    data = _require_mapping(raw["data"], "data")
    _check_keys(data, "data", ("y",))

    family = _require_mapping(raw["family"], "family")
    _check_keys(family, "family", ("kind",), ("sketch", "ell", "scale", "variant"))
    if family["kind"] not in misfits.FAMILY_KINDS:
        raise ConfigError(f"family.kind: unknown kind {family['kind']!r}")
    if family["kind"] == misfits.SKETCHED_QUADRATIC:
        if "sketch" not in family:
            raise ConfigError("family: sketched_quadratic requires a sketch kind")
        if family["sketch"] not in misfits.SKETCH_KINDS:
            raise ConfigError(f"family.sketch: unknown kind {family['sketch']!r}")
    elif "scale" not in family:
        raise ConfigError(f"family: {family['kind']} requires a scale")

    sweep_sec = _require_mapping(raw["sweep"], "sweep")
    _check_keys(sweep_sec, "sweep", ("Ns", "M"))
    ns = sweep_sec["Ns"]
    if (
        not isinstance(ns, list) or not ns
        or any(not isinstance(n, int) or n < 1 for n in ns)
        or any(b <= a for a, b in zip(ns, ns[1:]))
    ):
        raise ConfigError("sweep.Ns: must be a nonempty ascending list of positive integers")
    if not isinstance(sweep_sec["M"], int) or sweep_sec["M"] < 2:
        raise ConfigError("sweep.M: must be an integer >= 2")

    exponents = dict(DEFAULT_EXPONENTS)
    user_exps = _require_mapping(raw.get("exponents", {}), "exponents")
    _check_keys(user_exps, "exponents", (), tuple(DEFAULT_EXPONENTS))
    for key, value in user_exps.items():
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"exponents.{key}: must be a finite number")
        exponents[key] = float(value)

    default_checks = (
        [bounds.FORWARD]
        if family["kind"] == misfits.PERTURBED_FORWARD
        else [bounds.THM1, bounds.THM2, bounds.COROLLARY]
    )
    checks = raw.get("checks", default_checks)
    if not isinstance(checks, list) or not checks:
        raise ConfigError("checks: must be a nonempty list")
    for c in checks:
        if c not in bounds.CHECKS:
            raise ConfigError(f"checks: unknown check {c!r}")
        if c == bounds.FORWARD and family["kind"] != misfits.PERTURBED_FORWARD:
            raise ConfigError("checks: forward requires a perturbed_forward family")

    verdicts = dict(DEFAULT_VERDICTS)
    user_verdicts = _require_mapping(raw.get("verdicts", {}), "verdicts")
    _check_keys(user_verdicts, "verdicts", (), ("ratio_cap",))
    if "ratio_cap" in user_verdicts:
        cap = user_verdicts["ratio_cap"]
        if not isinstance(cap, (int, float)) or cap <= 0:
            raise ConfigError("verdicts.ratio_cap: must be a positive number")
        verdicts["ratio_cap"] = float(cap)

    output = dict(DEFAULT_OUTPUT)
    user_output = _require_mapping(raw.get("output", {}), "output")
    _check_keys(user_output, "output", (), ("directory", "formats"))
    output.update(user_output)
    if not isinstance(output["formats"], list) or not set(output["formats"]) <= set(
        OUTPUT_FORMATS
    ):
        raise ConfigError(f"output.formats: must be a subset of {list(OUTPUT_FORMATS)}")

    master_seed = raw.get("master_seed", 0)
    if not isinstance(master_seed, int) or master_seed < 0 or master_seed >= 2**64:
        raise ConfigError("master_seed: must be an unsigned 64-bit integer")

    return {
        "master_seed": master_seed,
        "problem": problem,
        "prior": prior,
        "forward": forward_sec,
        "noise": noise,
        "data": data,
        "family": family,
        "sweep": sweep_sec,
        "exponents": exponents,
        "checks": tuple(checks),
        "verdicts": verdicts,
        "output": output,
    }


def config_from_dict(raw: Mapping) -> ExperimentConfig:
    """Validate a raw mapping, apply defaults, and build the models once.

    Building the grid, prior, forward model, and noise eagerly surfaces
    numeric inconsistencies (for example a gamma matrix that is not
    symmetric positive-definite) at parse time with the offending key named.
    """
    sections = _validate_sections(_require_mapping(raw, "config"))
    cfg = ExperimentConfig(**sections)
    problem = cfg.build_problem()
    cfg.build_family(problem)
    cfg.exponent_set()
    return cfg


def parse_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON experiment configuration file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {p}: {exc}") from exc
    return config_from_dict(raw)
