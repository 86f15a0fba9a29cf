"""Condition quantities and both sides of each posterior error inequality.

Four checks are implemented against a grid-discretized inverse problem:

* ``thm1``: the mean-square Hellinger bound for per-realization posteriors:
  lhs = E[d_H(true, realized)^2]^(1/2), rhs = (D1 + D2) times a mixed norm of
  |Phi - Phi_N|. D1 and D2 are set to the computed condition norms, which
  makes the inequality fully checkable (any valid bound works; the computed
  norms are the tightest).
* ``thm2``: the Hellinger bound for the realization-averaged posterior. Its
  constant is existential, so rows report the lhs/rhs-norm ratio and the
  verdict asserts the ratio sequence stays within a configured cap of its
  median and that the lhs decays at least as fast as the rhs norm.
* ``corollary``: joint sufficient conditions: a uniform lower bound on the
  misfits, an L1 error threshold locating N*, and exponential integrability;
  then both conclusion inequalities, ratio-capped as in thm2.
* ``forward``: the same pair of conclusions driven by forward-model error
  norms for perturbed-forward families, with the smallness threshold
  locating N*.

In every check the expectation over realizations is an empirical mean over
M explicit streams; standard errors come from a grouped jackknife over the
streams. All rhs columns for checks with existential constants hold the
error norm with the unknown constant stripped.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .grids import GridSpace
from .measures import MixedNormSpec, PriorDensity, hellinger, mixed_norm
from .misfits import PERTURBED_FORWARD, RandomMisfitFamily, misfit_table, perturbed_tables
from .posteriors import InverseProblem, marginal_from_table

THM1 = "thm1"
THM2 = "thm2"
COROLLARY = "corollary"
FORWARD = "forward"
CHECKS = (THM1, THM2, COROLLARY, FORWARD)

RATIO_CAP = 10.0
SLOPE_SLACK = 0.1
JACKKNIFE_GROUPS = 100

# Values at or below this are treated as exact zeros when forming ratios and
# fitting log-log slopes (they are quadrature/rounding dust).
_POS = 1e-13

CSV_COLUMNS = (
    "N", "M", "check", "lhs", "rhs", "ratio", "lhs_se", "rhs_se",
    "D1", "D2", "C1", "C2", "C3_lo", "C3_hi", "N_star",
    "slope_lhs", "slope_rhs", "verdict",
)


@dataclass(frozen=True)
class ExponentSet:
    """Holder exponents for the three checks; conjugates are derived.

    All exponents must be finite and > 1 so their conjugates are finite;
    ``rho_star`` must exceed 2 so the derived exponents 2r/(r-1), 2r/(r-2)
    stay finite.
    """

    q1: float = 2.0
    q2: float = 2.0
    p1: float = 2.0
    p2: float = 2.0
    p3: float = 2.0
    rho_star: float = 3.0

    def __post_init__(self) -> None:
        for name in ("q1", "q2", "p1", "p2", "p3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 1):
                raise ValueError(f"{name} must be finite and > 1, got {v}")
        if not (math.isfinite(self.rho_star) and self.rho_star > 2):
            raise ValueError(f"rho_star must be finite and > 2, got {self.rho_star}")
        for name in ("q1", "q2", "p1", "p2", "p3"):
            v = getattr(self, name)
            if abs(1.0 / v + 1.0 / _conjugate(v) - 1.0) > 1e-12:
                raise ValueError(f"conjugate identity failed for {name}")

    @property
    def q1_conj(self) -> float:
        return _conjugate(self.q1)

    @property
    def q2_conj(self) -> float:
        return _conjugate(self.q2)

    @property
    def p1_conj(self) -> float:
        return _conjugate(self.p1)

    @property
    def p2_conj(self) -> float:
        return _conjugate(self.p2)

    @property
    def p3_conj(self) -> float:
        return _conjugate(self.p3)


def _conjugate(q: float) -> float:
    return q / (q - 1.0)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def fit_rate(points: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares slope of log(value) against log(N).

    Requires at least three points with strictly positive N and values.
    """
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit a rate")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ValueError("rate fits require positive N and positive values")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    pred = intercept + slope * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r2)


# -- rows and reports ----------------------------------------------------------


@dataclass
class BoundRow:
    """One sweep row; fields not applicable to a check stay None."""

    check: str
    N: int
    M: int
    lhs: float | None = None
    rhs: float | None = None
    ratio: float | None = None
    lhs_se: float | None = None
    rhs_se: float | None = None
    d1: float | None = None
    d2: float | None = None
    c1: float | None = None
    c2: float | None = None
    c3_lo: float | None = None
    c3_hi: float | None = None
    n_star: int | None = None
    slope_lhs: float | None = None
    slope_rhs: float | None = None
    verdict: bool | None = None
    rhs_norm: float | None = None  # rhs with existential constants stripped
    exp_norm: float | None = None  # L1 norm of E[exp(rho* Phi_N)] where computed
    error: str | None = None


@dataclass
class BoundReport:
    """All rows of one check over a fidelity sweep, with fitted rates."""

    check: str
    rows: list[BoundRow] = field(default_factory=list)
    slope_lhs: float | None = None
    slope_rhs: float | None = None
    n_star: int | None = None
    sup_exp_norm: float | None = None
    verdict: bool | None = None
    notes: tuple[str, ...] = ()

    def records(self) -> list[dict]:
        return [row_record(r) for r in self.rows]


def row_record(row: BoundRow) -> dict:
    """The row as a mapping keyed by the CSV column names."""
    return {
        "N": row.N, "M": row.M, "check": row.check,
        "lhs": row.lhs, "rhs": row.rhs, "ratio": row.ratio,
        "lhs_se": row.lhs_se, "rhs_se": row.rhs_se,
        "D1": row.d1, "D2": row.d2, "C1": row.c1, "C2": row.c2,
        "C3_lo": row.c3_lo, "C3_hi": row.c3_hi, "N_star": row.n_star,
        "slope_lhs": row.slope_lhs, "slope_rhs": row.slope_rhs,
        "verdict": row.verdict,
    }


def derive_verdict(
    check: str, records: Sequence[Mapping], slope_slack: float = SLOPE_SLACK
) -> bool | None:
    """Report-level verdict from row records (also used to re-check CSVs).

    False if any row verdict is false or the lhs slope fails to dominate
    where required; None (indeterminate) if no N* was reached or an
    applicable row could not be evaluated; True otherwise. Rows below N*
    carry empty verdicts and are not claims.
    """
    recs = list(records)
    if not recs:
        return None
    if any(r["verdict"] is False for r in recs):
        return False
    if check in (COROLLARY, FORWARD):
        n_star = next((r["N_star"] for r in recs if r["N_star"] is not None), None)
        if n_star is None:
            return None
        applicable = [r for r in recs if r["N"] >= n_star]
    else:
        applicable = recs
    if any(r["verdict"] is None for r in applicable):
        return None
    if check in (THM2, FORWARD):
        for tag in sorted({r["check"] for r in applicable}):
            group = [r for r in applicable if r["check"] == tag]
            sl = next((r["slope_lhs"] for r in group if r["slope_lhs"] is not None), None)
            sr = next((r["slope_rhs"] for r in group if r["slope_rhs"] is not None), None)
            if sl is not None and sr is not None and sl > sr + slope_slack:
                return False
    return True


# -- shared numerics -----------------------------------------------------------


def _log_lq(log_values: np.ndarray, q: float, grid: GridSpace, prior: PriorDensity) -> float:
    """log of || exp(log_values) ||_{L^q} against the prior."""
    if math.isinf(q):
        return float(np.max(log_values))
    return float(logsumexp(q * log_values + np.log(prior.mass())) / q)


def _finite_exp(log_value: float) -> float:
    """exp that saturates to inf instead of raising on overflow."""
    if math.isnan(log_value):
        return math.nan
    if log_value > 709.0:
        return math.inf
    return math.exp(log_value)


def _log_power_mean(log_table: np.ndarray, q: float) -> np.ndarray:
    """Per-node log of (mean over rows of exp(log_table)^q)^(1/q)."""
    m = log_table.shape[0]
    return (logsumexp(q * log_table, axis=0) - math.log(m)) / q


def _identity(x: np.ndarray) -> np.ndarray:
    return x


def _square(x: np.ndarray) -> np.ndarray:
    return x * x


def _error_norm(
    phi: np.ndarray,
    table: np.ndarray,
    q_inner: float,
    q_outer: float,
    grid: GridSpace,
    prior: PriorDensity,
) -> float:
    spec = MixedNormSpec(q_inner=q_inner, q_outer=q_outer, omega_samples=table.shape[0])
    return mixed_norm(np.abs(phi[None, :] - table), _identity, spec, grid, prior)


def _safe_ratio(lhs: float, rhs: float) -> float:
    if lhs <= _POS:
        return 0.0
    return lhs / rhs if rhs > _POS else math.inf


def _jackknife(
    stat: Callable[[np.ndarray], tuple], m: int, n_groups: int = JACKKNIFE_GROUPS
) -> tuple[np.ndarray, np.ndarray]:
    """Full-sample statistics plus grouped delete-one jackknife errors."""
    full = np.asarray(stat(np.arange(m)), dtype=float)
    b = min(n_groups, m)
    if b < 2:
        return full, np.zeros_like(full)
    splits = np.array_split(np.arange(m), b)
    leave = []
    for i in range(b):
        idx = np.concatenate([splits[j] for j in range(b) if j != i])
        leave.append(stat(idx))
    arr = np.asarray(leave, dtype=float)
    center = arr.mean(axis=0)
    se = np.sqrt((b - 1) / b * np.sum((arr - center) ** 2, axis=0))
    return full, se


# -- per-fidelity context -------------------------------------------------------


@dataclass
class RowContext:
    """Shared realization tables for one (family, N, M) triple."""

    N: int
    M: int
    table: np.ndarray  # (M, nodes) misfit realizations
    z_per_omega: np.ndarray  # (M,) per-realization evidences
    dsq: np.ndarray  # (M,) squared Hellinger distances to the true posterior
    err_table: np.ndarray | None = None  # (M, nodes) forward-error norms


def build_row_context(
    problem: InverseProblem, family: RandomMisfitFamily, n: int, m: int
) -> RowContext:
    fam = family.at(n)
    if fam.kind == PERTURBED_FORWARD:
        table, err_table = perturbed_tables(fam, m, problem.grid.nodes)
    else:
        table, err_table = misfit_table(fam, m, problem.grid.nodes), None
    log_mass = np.log(problem.prior.mass())
    log_zn = logsumexp(-table + log_mass[None, :], axis=1)
    sqrt_true = np.exp(0.5 * (-problem.misfit_values - problem.posterior.log_normalizer))
    sqrt_real = np.exp(0.5 * (-table - log_zn[:, None]))
    diff = sqrt_real - sqrt_true[None, :]
    dsq = 0.5 * (diff * diff) @ problem.prior.mass()
    return RowContext(
        N=n, M=m, table=table, z_per_omega=np.exp(log_zn), dsq=dsq, err_table=err_table
    )


def _marginal_hellinger(problem: InverseProblem, table: np.ndarray) -> float:
    marg = marginal_from_table(table, problem.prior)
    return hellinger(problem.posterior, marg.measure, problem.prior)


# -- condition quantities -------------------------------------------------------


def thm1_conditions(
    phi: np.ndarray,
    table: np.ndarray,
    z: float,
    z_per_omega: np.ndarray,
    exps: ExponentSet,
    grid: GridSpace,
    prior: PriorDensity,
) -> tuple[float, float]:
    """The two condition norms (D1, D2) for the per-realization bound.

    D1 integrates (exp(-Phi/2) + exp(-Phi_N/2))^(2 q1) under the realization
    law before an L^{q2} norm; D2 does the same for the evidence-weighted
    square (Z_N max(Z^-3, Z_N^-3) (exp(-Phi) + exp(-Phi_N))^2)^{q1}.
    Everything runs in the log domain; an underflowing Z_N yields inf.
    """
    phi = np.asarray(phi, dtype=float)
    with np.errstate(divide="ignore"):
        log_zn = np.log(np.asarray(z_per_omega, dtype=float))
        log_z = math.log(z)
    log_f = 2.0 * np.logaddexp(-0.5 * phi[None, :], -0.5 * table)
    d1 = _finite_exp(_log_lq(_log_power_mean(log_f, exps.q1), exps.q2, grid, prior))
    # log(Z_N max(Z^-3, Z_N^-3)) = max(log Z_N - 3 log Z, -2 log Z_N); the
    # max form stays +inf (not NaN) when Z_N underflows to zero
    log_weight = np.maximum(log_zn - 3.0 * log_z, -2.0 * log_zn)
    log_g = log_weight[:, None] + 2.0 * np.logaddexp(-phi[None, :], -table)
    d2 = _finite_exp(_log_lq(_log_power_mean(log_g, exps.q1), exps.q2, grid, prior))
    return d1, d2


def thm2_conditions(
    phi: np.ndarray,
    table: np.ndarray,
    z_per_omega: np.ndarray,
    exps: ExponentSet,
    grid: GridSpace,
    prior: PriorDensity,
) -> tuple[float, float, tuple[float, float]]:
    """Condition quantities (C1, C2, evidence band) for the averaged bound.

    C1 takes the smaller of the reciprocal-mean norm and the exp(Phi) norm,
    so only one of the misfits needs to be well-behaved. The band is the
    3-standard-error interval around the empirical mean evidence.
    """
    phi = np.asarray(phi, dtype=float)
    m = table.shape[0]
    log_num = logsumexp(-table, axis=0) - math.log(m)
    recip = _finite_exp(_log_lq(-log_num, exps.p1, grid, prior))
    exp_phi = _finite_exp(_log_lq(phi, exps.p1, grid, prior))
    c1 = min(recip, exp_phi)
    log_h = np.logaddexp(-phi[None, :], -table)
    c2 = _finite_exp(
        _log_lq(_log_power_mean(log_h, exps.p2), 2.0 * exps.p1_conj * exps.p3, grid, prior)
    )
    z = np.asarray(z_per_omega, dtype=float)
    z_mean = float(z.mean())
    z_se = float(np.std(z, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return c1, c2, (z_mean - 3.0 * z_se, z_mean + 3.0 * z_se)


def _exp_norm(table: np.ndarray, rho: float, grid: GridSpace, prior: PriorDensity) -> float:
    """L1 norm against the prior of the realization mean of exp(rho * Phi_N)."""
    log_inner = logsumexp(rho * table, axis=0) - math.log(table.shape[0])
    return _finite_exp(_log_lq(log_inner, 1.0, grid, prior))


# -- row-level checks -----------------------------------------------------------


def check_thm1(
    problem: InverseProblem,
    family: RandomMisfitFamily,
    N: int | None = None,
    M: int = 1000,
    exps: ExponentSet | None = None,
    ctx: RowContext | None = None,
) -> BoundRow:
    """One sweep row of the per-realization mean-square Hellinger bound."""
    exps = exps or ExponentSet()
    n = family.N if N is None else int(N)
    ctx = ctx or build_row_context(problem, family, n, M)
    phi = problem.misfit_values
    grid, prior = problem.grid, problem.prior
    row = BoundRow(check=THM1, N=n, M=ctx.M)

    def stat(idx: np.ndarray) -> tuple[float, float]:
        t = ctx.table[idx]
        d1, d2 = thm1_conditions(phi, t, problem.z, ctx.z_per_omega[idx], exps, grid, prior)
        norm = _error_norm(phi, t, 2.0 * exps.q1_conj, 2.0 * exps.q2_conj, grid, prior)
        return math.sqrt(float(np.mean(ctx.dsq[idx]))), (d1 + d2) * norm

    d1, d2 = thm1_conditions(phi, ctx.table, problem.z, ctx.z_per_omega, exps, grid, prior)
    row.d1, row.d2 = d1, d2
    if not (math.isfinite(d1) and math.isfinite(d2)):
        row.error = "condition norms are not finite"
        return row
    (lhs, rhs), (lhs_se, rhs_se) = _jackknife(stat, ctx.M)
    row.lhs, row.rhs = float(lhs), float(rhs)
    row.lhs_se, row.rhs_se = float(lhs_se), float(rhs_se)
    row.rhs_norm = row.rhs / (d1 + d2) if d1 + d2 > 0 else 0.0
    row.ratio = _safe_ratio(row.lhs, row.rhs)
    slack = 3.0 * math.hypot(row.lhs_se, row.rhs_se)
    row.verdict = bool(row.lhs <= row.rhs + slack)
    return row


def check_thm2(
    problem: InverseProblem,
    family: RandomMisfitFamily,
    N: int | None = None,
    M: int = 1000,
    exps: ExponentSet | None = None,
    ctx: RowContext | None = None,
) -> BoundRow:
    """One sweep row of the averaged-posterior bound (rhs = error norm only)."""
    exps = exps or ExponentSet()
    n = family.N if N is None else int(N)
    ctx = ctx or build_row_context(problem, family, n, M)
    phi = problem.misfit_values
    grid, prior = problem.grid, problem.prior
    row = BoundRow(check=THM2, N=n, M=ctx.M)

    c1, c2, band = thm2_conditions(phi, ctx.table, ctx.z_per_omega, exps, grid, prior)
    row.c1, row.c2 = c1, c2
    row.c3_lo, row.c3_hi = band
    if not (math.isfinite(c1) and math.isfinite(c2)):
        row.error = "condition norms are not finite"
        return row
    if band[0] <= 0:
        row.error = "evidence band does not exclude zero"
        return row

    def stat(idx: np.ndarray) -> tuple[float, float]:
        t = ctx.table[idx]
        lhs = _marginal_hellinger(problem, t)
        norm = _error_norm(
            phi, t, exps.p2_conj, 2.0 * exps.p1_conj * exps.p3_conj, grid, prior
        )
        return lhs, norm

    (lhs, rhs), (lhs_se, rhs_se) = _jackknife(stat, ctx.M)
    row.lhs, row.rhs = float(lhs), float(rhs)
    row.rhs_norm = row.rhs
    row.lhs_se, row.rhs_se = float(lhs_se), float(rhs_se)
    row.ratio = _safe_ratio(row.lhs, row.rhs)
    return row


def _apply_ratio_cap(rows: list[BoundRow], ratio_cap: float) -> None:
    """Set verdicts so each row's ratio stays within cap * median(ratios)."""
    scored = [r for r in rows if r.ratio is not None and r.error is None]
    if not scored:
        return
    med = float(np.median([r.ratio for r in scored]))
    for r in scored:
        r.verdict = bool(r.ratio <= ratio_cap * med + _POS)


def _fit_row_slopes(
    rows: list[BoundRow], lhs_of: Callable, rhs_of: Callable
) -> tuple[float | None, float | None]:
    lhs_pts = [(r.N, lhs_of(r)) for r in rows if r.error is None and lhs_of(r) and lhs_of(r) > _POS]
    rhs_pts = [(r.N, rhs_of(r)) for r in rows if r.error is None and rhs_of(r) and rhs_of(r) > _POS]
    slope_lhs = fit_rate(lhs_pts).slope if len(lhs_pts) >= 3 else None
    slope_rhs = fit_rate(rhs_pts).slope if len(rhs_pts) >= 3 else None
    return slope_lhs, slope_rhs


def _finish_report(
    report: BoundReport, slope_slack: float = SLOPE_SLACK
) -> BoundReport:
    report.rows.sort(key=lambda r: (r.N, r.check))
    tags = sorted({r.check for r in report.rows})
    for tag in tags:
        group = [r for r in report.rows if r.check == tag]
        slope_lhs, slope_rhs = _fit_row_slopes(
            group, lambda r: r.lhs, lambda r: r.rhs_norm
        )
        for r in group:
            r.slope_lhs, r.slope_rhs = slope_lhs, slope_rhs
    if len(tags) == 1:
        report.slope_lhs = report.rows[0].slope_lhs if report.rows else None
        report.slope_rhs = report.rows[0].slope_rhs if report.rows else None
    report.verdict = derive_verdict(report.check, report.records(), slope_slack)
    return report


# -- sweep-level checks ---------------------------------------------------------


def check_corollary(
    problem: InverseProblem,
    family: RandomMisfitFamily,
    ns: Sequence[int],
    M: int = 1000,
    rho_star: float = 3.0,
    c3: float | None = None,
    ratio_cap: float = RATIO_CAP,
    contexts: Mapping[int, RowContext] | None = None,
) -> BoundReport:
    """Joint sufficient conditions and both conclusion inequalities.

    Condition (i) is certified from the family's constructive lower bound
    and verified over every sampled realization; (ii) locates the smallest
    sweep N whose L1 error norm clears the evidence-margin threshold; (iii)
    integrates exp(rho* Phi_N) per N and reports the supremum over N >= N*.
    Rows are tagged ``corollary_eq6`` / ``corollary_eq7`` for the averaged
    and mean-square conclusions.
    """
    if rho_star <= 2:
        raise ValueError("rho_star must exceed 2")
    z = problem.z
    if c3 is None:
        c3 = 2.0 * max(z, 1.0 / z)
    if not (1.0 / c3 < z < c3):
        raise ValueError("c3 must satisfy 1/c3 < Z < c3")
    grid, prior = problem.grid, problem.prior
    phi = problem.misfit_values
    report = BoundReport(check=COROLLARY)
    notes: list[str] = []

    c0 = family.certified_lower_bound
    if c0 is None:
        cond_i: bool | None = None
        notes.append("condition (i): no constructive lower bound for this family")
    else:
        cond_i = bool(np.min(phi) >= -c0 - _POS)

    contexts = dict(contexts) if contexts else {}
    for n in ns:
        if n not in contexts:
            contexts[n] = build_row_context(problem, family, n, M)
        if c0 is not None and cond_i:
            cond_i = bool(np.min(contexts[n].table) >= -c0 - _POS)
    if c0 is not None:
        notes.append(f"condition (i) with C0={c0:g}: {'holds' if cond_i else 'violated'}")

    threshold = None
    if c0 is not None:
        threshold = 0.5 * math.exp(-c0) * min(z - 1.0 / c3, c3 - z)
    l1_errors = {
        n: _error_norm(phi, contexts[n].table, 1.0, 1.0, grid, prior) for n in ns
    }
    n_star = None
    if threshold is not None:
        n_star = next((n for n in ns if l1_errors[n] <= threshold), None)
        notes.append(
            f"condition (ii) threshold {threshold:.6g}: "
            + (f"N* = {n_star}" if n_star is not None else "not reached in sweep")
        )

    exp_norms = {n: _exp_norm(contexts[n].table, rho_star, grid, prior) for n in ns}
    if n_star is not None:
        sup_norm = max(exp_norms[n] for n in ns if n >= n_star)
        report.sup_exp_norm = sup_norm
        notes.append(
            f"condition (iii): sup over N >= N* of the exp({rho_star:g} Phi_N) "
            f"L1 norm = {sup_norm:.6g}"
        )

    q_avg = 2.0 * rho_star / (rho_star - 1.0)
    q_ms = 2.0 * rho_star / (rho_star - 2.0)
    for n in ns:
        ctx = contexts[n]

        def stat(idx: np.ndarray) -> tuple[float, float, float, float]:
            t = ctx.table[idx]
            lhs_avg = _marginal_hellinger(problem, t)
            rhs_avg = _error_norm(phi, t, 1.0, q_avg, grid, prior)
            lhs_ms = math.sqrt(float(np.mean(ctx.dsq[idx])))
            rhs_ms = _error_norm(phi, t, q_ms, 1.0, grid, prior)
            return lhs_avg, rhs_avg, lhs_ms, rhs_ms

        vals, ses = _jackknife(stat, ctx.M)
        applicable = n_star is not None and n >= n_star
        for tag, (lhs, rhs, lhs_se, rhs_se) in (
            ("corollary_eq6", (vals[0], vals[1], ses[0], ses[1])),
            ("corollary_eq7", (vals[2], vals[3], ses[2], ses[3])),
        ):
            row = BoundRow(
                check=tag, N=n, M=ctx.M,
                lhs=float(lhs), rhs=float(rhs), ratio=_safe_ratio(float(lhs), float(rhs)),
                lhs_se=float(lhs_se), rhs_se=float(rhs_se),
                rhs_norm=float(rhs), c3_lo=1.0 / c3, c3_hi=c3,
                n_star=n_star, exp_norm=exp_norms[n],
            )
            if not applicable or cond_i is None:
                row.verdict = None
            report.rows.append(row)

    for tag in ("corollary_eq6", "corollary_eq7"):
        group = [
            r for r in report.rows
            if r.check == tag and n_star is not None and r.N >= n_star and cond_i is not None
        ]
        _apply_ratio_cap(group, ratio_cap)
        if cond_i is False:
            for r in group:
                r.verdict = False
    report.n_star = n_star
    report.notes = tuple(notes)
    return _finish_report(report)


def check_forward(
    problem: InverseProblem,
    family: RandomMisfitFamily,
    ns: Sequence[int],
    M: int = 1000,
    rho_star: float = 3.0,
    ratio_cap: float = RATIO_CAP,
    contexts: Mapping[int, RowContext] | None = None,
) -> BoundReport:
    """Forward-model error bounds for perturbed-forward families.

    N* is the smallest sweep N whose high-order forward-error norm drops to
    1 or below; past it, the averaged-posterior distance is compared against
    the root mean-square forward error norm (rows ``forward_marginal``) and
    the mean-square Hellinger error against the high-order norm (rows
    ``forward_meansquare``), both ratio-capped.
    """
    if family.kind != PERTURBED_FORWARD:
        raise ValueError("forward check requires a perturbed_forward family")
    if rho_star <= 2:
        raise ValueError("rho_star must exceed 2")
    grid, prior = problem.grid, problem.prior
    report = BoundReport(check=FORWARD)
    notes: list[str] = []

    contexts = dict(contexts) if contexts else {}
    for n in ns:
        if n not in contexts:
            contexts[n] = build_row_context(problem, family, n, M)

    q_outer_small = 2.0 * rho_star / (rho_star - 1.0)
    q_inner_high = 2.0 * rho_star / (rho_star - 2.0)  # applied to squared errors

    smallness = {}
    for n in ns:
        errs = contexts[n].err_table
        spec = MixedNormSpec(q_inner_high, q_outer_small, errs.shape[0])
        smallness[n] = mixed_norm(errs, _square, spec, grid, prior)
    n_star = next((n for n in ns if smallness[n] <= 1.0), None)
    notes.append(
        "smallness threshold: "
        + (f"N* = {n_star}" if n_star is not None else "not reached in sweep")
    )

    exp_norms = {n: _exp_norm(contexts[n].table, rho_star, grid, prior) for n in ns}
    if n_star is not None:
        sup_norm = max(exp_norms[n] for n in ns if n >= n_star)
        report.sup_exp_norm = sup_norm
        notes.append(
            f"sup over N >= N* of the exp({rho_star:g} Phi_N) L1 norm = {sup_norm:.6g}"
        )

    for n in ns:
        ctx = contexts[n]

        def stat(idx: np.ndarray) -> tuple[float, float, float, float]:
            t = ctx.table[idx]
            e = ctx.err_table[idx]
            m_idx = len(idx)
            lhs_avg = _marginal_hellinger(problem, t)
            rhs_avg = math.sqrt(
                mixed_norm(e, _square, MixedNormSpec(1.0, q_outer_small, m_idx), grid, prior)
            )
            lhs_ms = math.sqrt(float(np.mean(ctx.dsq[idx])))
            rhs_ms = math.sqrt(
                mixed_norm(e, _square, MixedNormSpec(q_inner_high, 2.0, m_idx), grid, prior)
            )
            return lhs_avg, rhs_avg, lhs_ms, rhs_ms

        vals, ses = _jackknife(stat, ctx.M)
        applicable = n_star is not None and n >= n_star
        for tag, (lhs, rhs, lhs_se, rhs_se) in (
            ("forward_marginal", (vals[0], vals[1], ses[0], ses[1])),
            ("forward_meansquare", (vals[2], vals[3], ses[2], ses[3])),
        ):
            row = BoundRow(
                check=tag, N=n, M=ctx.M,
                lhs=float(lhs), rhs=float(rhs), ratio=_safe_ratio(float(lhs), float(rhs)),
                lhs_se=float(lhs_se), rhs_se=float(rhs_se),
                rhs_norm=float(rhs), n_star=n_star, exp_norm=exp_norms[n],
            )
            if not applicable:
                row.verdict = None
            report.rows.append(row)

    for tag in ("forward_marginal", "forward_meansquare"):
        group = [
            r for r in report.rows
            if r.check == tag and n_star is not None and r.N >= n_star
        ]
        _apply_ratio_cap(group, ratio_cap)
    report.n_star = n_star
    report.notes = tuple(notes)
    return _finish_report(report)


def sweep(
    problem: InverseProblem,
    family: RandomMisfitFamily,
    ns: Sequence[int],
    M: int,
    exps: ExponentSet | None = None,
    checks: Sequence[str] | None = None,
    ratio_cap: float = RATIO_CAP,
    c3: float | None = None,
    threads: int = 1,
) -> dict[str, BoundReport]:
    """Run the requested checks over a fidelity sweep with shared tables.

    Realization tables are built once per fidelity and reused by every
    check. Rows that fail to evaluate are recorded with their error and the
    remaining rows still run. Thread fan-out over fidelities is permitted
    because realizations are pure functions of their stream labels; reports
    are assembled in fidelity order regardless of schedule.
    """
    ns = [int(n) for n in ns]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise ValueError("Ns must be a nonempty ascending list of positive integers")
    if M < 2:
        raise ValueError("M must be >= 2")
    exps = exps or ExponentSet()
    if checks is None:
        checks = (FORWARD,) if family.kind == PERTURBED_FORWARD else (THM1, THM2, COROLLARY)
    for c in checks:
        if c not in CHECKS:
            raise ValueError(f"unknown check {c!r}")
        if c == FORWARD and family.kind != PERTURBED_FORWARD:
            raise ValueError("forward check requires a perturbed_forward family")

    contexts: dict[int, RowContext | Exception] = {}

    def build(n: int) -> RowContext | Exception:
        try:
            return build_row_context(problem, family, n, M)
        except Exception as exc:  # noqa: BLE001 - row errors must not abort the sweep
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for n, ctx in zip(ns, pool.map(build, ns)):
                contexts[n] = ctx
    else:
        for n in ns:
            contexts[n] = build(n)

    good = {n: c for n, c in contexts.items() if isinstance(c, RowContext)}
    reports: dict[str, BoundReport] = {}

    def error_row(check_tag: str, n: int) -> BoundRow:
        return BoundRow(check=check_tag, N=n, M=M, error=str(contexts[n]))

    for check in checks:
        if check in (THM1, THM2):
            runner = check_thm1 if check == THM1 else check_thm2
            rows = []
            for n in ns:
                if n not in good:
                    rows.append(error_row(check, n))
                    continue
                try:
                    rows.append(runner(problem, family, n, M, exps, ctx=good[n]))
                except Exception as exc:  # noqa: BLE001
                    rows.append(BoundRow(check=check, N=n, M=M, error=str(exc)))
            if check == THM2:
                _apply_ratio_cap([r for r in rows if r.error is None], ratio_cap)
            report = BoundReport(check=check, rows=rows)
            reports[check] = _finish_report(report)
        elif check == COROLLARY:
            reports[check] = check_corollary(
                problem, family, [n for n in ns if n in good], M,
                rho_star=exps.rho_star, c3=c3, ratio_cap=ratio_cap, contexts=good,
            )
        else:
            reports[check] = check_forward(
                problem, family, [n for n in ns if n in good], M,
                rho_star=exps.rho_star, ratio_cap=ratio_cap, contexts=good,
            )
    return reports
