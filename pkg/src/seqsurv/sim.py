"""Trial simulation with Weibull outcomes, staggered accrual, and
Monte Carlo calibration of analysis schedules and effect sizes.

Event times follow a Weibull law whose shape may differ by arm (shape offset
nonzero means non-proportional hazards between arms) while covariates act
proportionally on the rate.  Replicates draw from counter-based random
streams keyed by (seed, replicate index), so results are reproducible and
independent of how replicates are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .adjusted import compare_sp
from .comparators import cox_wald, km_compare
from .cox import FitOptions
from .data import Columns, Snapshot, SubjectRecord, snapshot
from .errors import SeqSurvError
from .gsdesign import GSDesign, SequentialMonitor, SpendingFunction, boundaries

METHODS = ("adjusted", "km", "cox")
COVARIATE_SCHEMES = ("none", "normal1", "bernoulli2")

_MASK64 = (1 << 64) - 1
_CALIBRATION_STREAM_OFFSET = 1 << 48  # keeps calibration draws disjoint from OC draws
_MIN_INFO_GROWTH = 1.005              # monitoring guard against noisy info regressions


@dataclass(frozen=True)
class Scenario:
    """One simulated-trial configuration.

    The fixed comparison time is ``tau``; subjects accrue uniformly on
    [0, accrual] so the study runs until ``tau + accrual``.  Covariate effects
    are ``phi / sqrt(p)`` per covariate, which keeps the linear predictor
    variance equal across covariate schemes.  ``gamma0 = None`` defaults the
    baseline rate so a covariate-zero control subject has 50% survival at
    ``tau``.
    """

    n0: int
    n1: int
    tau: float
    alpha0: float = 1.0
    alpha1: float = 0.0
    gamma0: float | None = None
    beta_w: float = 0.0
    covariate_scheme: str = "none"
    phi: float = 0.0
    accrual: float = 2.0
    censor_rate: float = 0.0
    k_analyses: int = 3
    total_alpha: float = 0.05
    spending_rho: float = 3.0
    sidedness: str = "two_sided"
    target_info_fractions: tuple[float, ...] = (0.5, 0.75, 1.0)

    def __post_init__(self) -> None:
        if self.n0 < 1 or self.n1 < 1:
            raise ValueError("per-arm sizes must be at least 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.alpha0 + self.alpha1 <= 0:
            raise ValueError("alpha0 + alpha1 must be positive (treatment-arm shape)")
        if self.gamma0 is not None and self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.accrual < 0:
            raise ValueError("accrual must be >= 0")
        if self.censor_rate < 0:
            raise ValueError("censor_rate must be >= 0")
        if self.covariate_scheme not in COVARIATE_SCHEMES:
            raise ValueError(f"covariate_scheme must be one of {COVARIATE_SCHEMES}")
        if len(self.target_info_fractions) != self.k_analyses:
            raise ValueError("target_info_fractions must have k_analyses entries")
        fracs = self.target_info_fractions
        if any(b <= a for a, b in zip(fracs, fracs[1:])) or fracs[0] <= 0:
            raise ValueError("target_info_fractions must be strictly increasing and positive")
        if abs(fracs[-1] - 1.0) > 1e-9:
            raise ValueError("target_info_fractions must end at 1")

    @property
    def n_covariates(self) -> int:
        return {"none": 0, "normal1": 1, "bernoulli2": 2}[self.covariate_scheme]

    @property
    def covariate_effects(self) -> np.ndarray:
        p = self.n_covariates
        if p == 0:
            return np.zeros(0)
        return np.full(p, self.phi / math.sqrt(p))

    @property
    def gamma0_value(self) -> float:
        if self.gamma0 is not None:
            return self.gamma0
        return math.log(2.0) / self.tau**self.alpha0

    @property
    def study_length(self) -> float:
        return self.tau + self.accrual

    @property
    def n_total(self) -> int:
        return self.n0 + self.n1


def null_beta_w(scenario: Scenario) -> float:
    """Treatment log-rate offset that equalizes the arm survival curves at tau."""
    return -scenario.alpha1 * math.log(scenario.tau)


def build_design(scenario: Scenario, grid_points: int = 4001) -> GSDesign:
    """Boundaries for the scenario's spending family and planned schedule."""
    sf = SpendingFunction(
        total_alpha=scenario.total_alpha,
        family="power",
        rho=scenario.spending_rho,
        sidedness=scenario.sidedness,
    )
    return boundaries(sf, scenario.target_info_fractions, grid_points=grid_points)


def _rng(seed: int, replicate: int) -> np.random.Generator:
    key = ((seed & _MASK64) << 64) | (replicate & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


@lru_cache(maxsize=8)
def _subject_ids(n0: int, n1: int) -> tuple[str, ...]:
    return tuple(f"c{j:05d}" for j in range(n0)) + tuple(f"t{j:05d}" for j in range(n1))


def _draw_covariates(rng: np.random.Generator, scheme: str, n: int) -> np.ndarray:
    if scheme == "none":
        return np.zeros((n, 0))
    if scheme == "normal1":
        return rng.standard_normal((n, 1))
    z = np.empty((n, 2))
    for j, q in enumerate((0.3, 0.5)):
        b = rng.random(n) < q
        z[:, j] = (b - q) / math.sqrt(q * (1.0 - q))
    return z


def generate_columns(scenario: Scenario, seed: int, replicate: int = 0) -> Columns:
    """Array-valued trial draw; the fast path used by the simulation loops.

    Draw order per replicate stream: entry times, covariates, event uniforms,
    then censoring times (only when the censor rate is positive).
    """
    rng = _rng(seed, replicate)
    n = scenario.n_total
    arm = np.concatenate(
        [np.zeros(scenario.n0, dtype=np.int8), np.ones(scenario.n1, dtype=np.int8)]
    )
    entry = rng.uniform(0.0, scenario.accrual, n) if scenario.accrual > 0 else np.zeros(n)
    z = _draw_covariates(rng, scenario.covariate_scheme, n)
    shape = scenario.alpha0 + scenario.alpha1 * arm
    rate = scenario.gamma0_value * np.exp(
        scenario.beta_w * arm + z @ scenario.covariate_effects
    )
    t_event = (-np.log1p(-rng.random(n)) / rate) ** (1.0 / shape)
    if scenario.censor_rate > 0:
        t_censor = rng.exponential(1.0 / scenario.censor_rate, n)
    else:
        t_censor = np.full(n, np.inf)
    return Columns(
        ids=_subject_ids(scenario.n0, scenario.n1),
        arm=arm,
        entry=entry,
        time_on_study=np.minimum(t_event, t_censor),
        event=t_event <= t_censor,
        covariates=z,
    )


def generate_trial(scenario: Scenario, seed: int, replicate: int = 0) -> list[SubjectRecord]:
    """One simulated trial as subject records (administrative censoring is
    applied later, by snapshotting at an analysis time)."""
    cols = generate_columns(scenario, seed, replicate)
    return [
        SubjectRecord(
            id=cols.ids[i],
            arm=int(cols.arm[i]),
            entry=float(cols.entry[i]),
            time_on_study=float(cols.time_on_study[i]),
            event=bool(cols.event[i]),
            covariates=tuple(float(v) for v in cols.covariates[i]),
        )
        for i in range(scenario.n_total)
    ]


def _method_statistics(
    snap: Snapshot, t0: float, methods: Sequence[str], fit_options: FitOptions | None
) -> dict[str, tuple[float, float]]:
    """(z, information) per requested method at one snapshot; raises per method."""
    out: dict[str, tuple[float, float]] = {}
    for m in methods:
        if m == "adjusted":
            res = compare_sp(snap, t0, fit_options)
            out[m] = (res.z, res.info_level)
        elif m == "km":
            kc = km_compare(snap, t0)
            out[m] = (kc.z, kc.info_level)
        elif m == "cox":
            cw = cox_wald(snap, fit_options)
            out[m] = (cw.z, cw.info_level)
        else:
            raise ValueError(f"unknown method {m!r}")
    return out


def _monitor_replicate(
    design: GSDesign, total_info: float, zs: Sequence[float], infos: Sequence[float]
) -> int:
    """First rejection stage (1-based) for one replicate, 0 if never rejected.

    Observed information occasionally regresses through estimation noise; it
    is nudged up by a small factor so the error-spending monitor always sees
    increasing information.
    """
    mon = SequentialMonitor(design, total_info)
    prev = 0.0
    for k, (z, info) in enumerate(zip(zs, infos)):
        if not math.isfinite(info) or info <= 0.0:
            raise SeqSurvError(f"non-finite information level at stage {k + 1}")
        eff = max(info, prev * _MIN_INFO_GROWTH)
        result = mon.step(eff, z)
        prev = eff
        if result.decision == "reject":
            return k + 1
        if result.decision == "accept":
            return 0
    return 0


def _replicate_block(args) -> dict[str, np.ndarray]:
    (scenario, design, methods, analysis_times, method_totals, seed, start, stop, fit_options) = args
    count = stop - start
    reject_stage = {m: np.zeros(count, dtype=np.int16) for m in methods}
    failed = {m: np.zeros(count, dtype=bool) for m in methods}
    k_stages = len(analysis_times)
    for idx, r in enumerate(range(start, stop)):
        cols = generate_columns(scenario, seed, r)
        stats: dict[str, list[tuple[float, float]]] = {m: [] for m in methods}
        broken = {m: False for m in methods}
        for u in analysis_times:
            snap = snapshot(cols, u)
            for m in methods:
                if broken[m]:
                    continue
                try:
                    stats[m].append(_method_statistics(snap, scenario.tau, (m,), fit_options)[m])
                except SeqSurvError:
                    broken[m] = True
        for m in methods:
            if broken[m] or len(stats[m]) != k_stages:
                failed[m][idx] = True
                continue
            zs = [s[0] for s in stats[m]]
            infos = [s[1] for s in stats[m]]
            try:
                reject_stage[m][idx] = _monitor_replicate(design, method_totals[m], zs, infos)
            except (SeqSurvError, ValueError):
                failed[m][idx] = True
    return {"reject": reject_stage, "failed": failed, "start": start}


def _run_blocks(worker_args: list, workers: int):
    if workers <= 1:
        return [_replicate_block(a) for a in worker_args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replicate_block, worker_args))


@dataclass(frozen=True)
class OperatingCharacteristics:
    """Stagewise cumulative rejection rates per method, with Monte Carlo SEs."""

    methods: tuple[str, ...]
    analysis_times: tuple[float, ...]
    replicates: int
    seed: int
    cumulative_rejection: dict[str, tuple[float, ...]]
    standard_errors: dict[str, tuple[float, ...]]
    failures: dict[str, int]
    used_replicates: dict[str, int]
    method_totals: dict[str, float]

    def final_rejection(self, method: str) -> float:
        return self.cumulative_rejection[method][-1]


def run_oc(
    scenario: Scenario,
    design: GSDesign,
    methods: Sequence[str] = ("adjusted",),
    replicates: int = 2000,
    seed: int = 0,
    *,
    calibration: "CalibrationResult | None" = None,
    workers: int = 1,
    fit_options: FitOptions | None = None,
    max_failure_fraction: float = 0.005,
) -> OperatingCharacteristics:
    """Estimate stagewise cumulative rejection rates by simulation.

    Each replicate is generated, snapshotted at the calibrated analysis
    times, reduced to per-stage statistics for every requested method, and
    monitored with error spending against that method's total information.
    Results are deterministic in (scenario, seed, replicates) regardless of
    ``workers``.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    if calibration is None:
        calibration = calibrate_analysis_times(
            scenario, replicates=400, seed=seed, methods=methods, workers=workers
        )
    missing = [m for m in methods if m not in calibration.method_totals]
    if missing:
        raise ValueError(f"calibration lacks total information for method(s) {missing}")
    if len(calibration.analysis_times) != design.n_stages:
        raise ValueError(
            f"design has {design.n_stages} stages but calibration produced "
            f"{len(calibration.analysis_times)} analysis times"
        )

    block = max(1, math.ceil(replicates / max(workers, 1) / 4))
    args = [
        (
            scenario,
            design,
            methods,
            calibration.analysis_times,
            calibration.method_totals,
            seed,
            start,
            min(start + block, replicates),
            fit_options,
        )
        for start in range(0, replicates, block)
    ]
    results = _run_blocks(args, workers)
    results.sort(key=lambda r: r["start"])
    reject_stage = {m: np.concatenate([r["reject"][m] for r in results]) for m in methods}
    failed = {m: np.concatenate([r["failed"][m] for r in results]) for m in methods}

    k_stages = design.n_stages
    cumulative: dict[str, tuple[float, ...]] = {}
    ses: dict[str, tuple[float, ...]] = {}
    failures: dict[str, int] = {}
    used: dict[str, int] = {}
    for m in methods:
        n_failed = int(failed[m].sum())
        failures[m] = n_failed
        if n_failed > max_failure_fraction * replicates:
            raise SeqSurvError(
                f"method {m!r}: {n_failed} of {replicates} replicates failed "
                f"(more than {max_failure_fraction:.1%}); refusing to report rates"
            )
        ok = ~failed[m]
        r_used = int(ok.sum())
        used[m] = r_used
        stages = reject_stage[m][ok]
        cum = []
        se = []
        for k in range(1, k_stages + 1):
            p = float(np.mean((stages > 0) & (stages <= k))) if r_used else float("nan")
            cum.append(p)
            se.append(math.sqrt(p * (1.0 - p) / r_used) if r_used else float("nan"))
        cumulative[m] = tuple(cum)
        ses[m] = tuple(se)

    return OperatingCharacteristics(
        methods=methods,
        analysis_times=tuple(calibration.analysis_times),
        replicates=replicates,
        seed=seed,
        cumulative_rejection=cumulative,
        standard_errors=ses,
        failures=failures,
        used_replicates=used,
        method_totals={m: calibration.method_totals[m] for m in methods},
    )


@dataclass(frozen=True)
class CalibrationResult:
    """Monte Carlo estimate of the information growth curve and the analysis
    times hitting the target information fractions."""

    analysis_times: tuple[float, ...]
    total_information: float
    method_totals: dict[str, float]
    grid_times: tuple[float, ...]
    mean_info: tuple[float, ...]
    isotonic_applied: bool
    replicates: int
    seed: int
    failures: int


def _calibration_block(args):
    scenario, grid, methods, seed, start, stop, fit_options = args
    n_grid = len(grid)
    info_sum = np.zeros(n_grid)
    info_count = np.zeros(n_grid, dtype=np.int64)
    total_sum = {m: 0.0 for m in methods}
    total_count = {m: 0 for m in methods}
    failures = 0
    end_time = grid[-1]
    for r in range(start, stop):
        cols = generate_columns(scenario, seed, _CALIBRATION_STREAM_OFFSET + r)
        for gi, u in enumerate(grid):
            snap = snapshot(cols, u)
            try:
                res = compare_sp(snap, scenario.tau, fit_options)
            except SeqSurvError:
                failures += 1
                continue
            info_sum[gi] += res.info_level
            info_count[gi] += 1
            if u == end_time:
                for m in methods:
                    if m == "adjusted":
                        total_sum[m] += res.info_level
                        total_count[m] += 1
                    else:
                        try:
                            stat = _method_statistics(snap, scenario.tau, (m,), fit_options)[m]
                        except SeqSurvError:
                            failures += 1
                            continue
                        if math.isfinite(stat[1]):
                            total_sum[m] += stat[1]
                            total_count[m] += 1
    return {
        "info_sum": info_sum,
        "info_count": info_count,
        "total_sum": total_sum,
        "total_count": total_count,
        "failures": failures,
    }


def calibrate_analysis_times(
    scenario: Scenario,
    target_ifs: Sequence[float] | None = None,
    replicates: int = 400,
    *,
    seed: int = 0,
    grid_size: int = 13,
    methods: Sequence[str] = ("adjusted",),
    fit_options: FitOptions | None = None,
    workers: int = 1,
) -> CalibrationResult:
    """Estimate mean information versus calendar time and invert it at the
    target information fractions.

    The information curve is estimated on a uniform calendar grid between the
    comparison time and the study end; a non-monotone estimate is smoothed by
    isotonic regression before inversion.  Total information per method is
    the mean at the study end.
    """
    targets = tuple(float(f) for f in (target_ifs or scenario.target_info_fractions))
    if any(b <= a for a, b in zip(targets, targets[1:])) or targets[0] <= 0:
        raise ValueError("target information fractions must be strictly increasing and positive")
    if abs(targets[-1] - 1.0) > 1e-9:
        raise ValueError("target information fractions must end at 1")
    methods = tuple(dict.fromkeys(("adjusted",) + tuple(methods)))
    grid = tuple(np.linspace(scenario.tau, scenario.study_length, grid_size))

    block = max(1, math.ceil(replicates / max(workers, 1) / 4))
    args = [
        (scenario, grid, methods, seed, start, min(start + block, replicates), fit_options)
        for start in range(0, replicates, block)
    ]
    results = _run_blocks_calibration(args, workers)

    info_sum = sum(r["info_sum"] for r in results)
    info_count = sum(r["info_count"] for r in results)
    failures = sum(r["failures"] for r in results)
    if np.any(info_count == 0):
        raise SeqSurvError("calibration failed: no usable replicate at some grid time")
    mean_info = info_sum / info_count

    isotonic_applied = bool(np.any(np.diff(mean_info) < 0))
    curve = isotonic_regression(mean_info).x if isotonic_applied else mean_info

    method_totals = {}
    for m in methods:
        total = sum(r["total_sum"][m] for r in results)
        count = sum(r["total_count"][m] for r in results)
        if count == 0:
            raise SeqSurvError(f"calibration failed: method {m!r} never evaluated at study end")
        method_totals[m] = total / count

    total_information = method_totals["adjusted"]
    times = []
    for f in targets:
        if abs(f - 1.0) <= 1e-12:
            times.append(scenario.study_length)
        else:
            times.append(float(np.interp(f * total_information, curve, grid)))
    return CalibrationResult(
        analysis_times=tuple(times),
        total_information=float(total_information),
        method_totals=method_totals,
        grid_times=grid,
        mean_info=tuple(float(v) for v in curve),
        isotonic_applied=isotonic_applied,
        replicates=replicates,
        seed=seed,
        failures=failures,
    )


def _run_blocks_calibration(worker_args: list, workers: int):
    if workers <= 1:
        return [_calibration_block(a) for a in worker_args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_calibration_block, worker_args))


@dataclass(frozen=True)
class EffectCalibration:
    beta_delta: float
    power: float
    probes: tuple[tuple[float, float], ...]


def _local_slope(probes: Sequence[tuple[float, float]], target: float) -> float | None:
    """Slope of power in the effect near the target, from shared-stream probes.

    Common random numbers across probes cancel in differences, so the fitted
    slope is far more accurate than the probes' absolute levels.
    """
    near = [(b, p) for b, p in probes if abs(p - target) <= 0.15]
    if len(near) < 2:
        near = list(probes)
    if len(near) < 2:
        return None
    x = np.array([b for b, _ in near])
    y = np.array([p for _, p in near])
    if np.ptp(x) < 1e-9:
        return None
    slope = float(np.polyfit(x, y, 1)[0])
    return slope if abs(slope) > 1e-3 else None


def calibrate_effect(
    scenario: Scenario,
    target_power: float,
    design: GSDesign,
    *,
    calibration: CalibrationResult | None = None,
    replicates: int = 2000,
    tolerance: float = 0.01,
    seed: int = 0,
    workers: int = 1,
    max_bisections: int = 20,
    refine_replicates: int | None = None,
    fit_options: FitOptions | None = None,
) -> EffectCalibration:
    """Bisect the treatment log-rate offset until the proposed test's
    simulated group-sequential power matches the target.

    Bisection probes share replicate streams (common random numbers), which
    makes the estimated power monotone enough in the offset to bracket
    reliably; the analysis schedule is calibrated once and reused.  Because
    shared streams leave a common noise component in the probe levels,
    ``refine_replicates`` (default: three times the probe count) adds a
    level correction: one independent larger probe at the bisection
    candidate, a Newton step along the probe-fitted slope, and an independent
    confirmation at the corrected effect, whose power is reported.
    Set ``refine_replicates=0`` for plain bisection.
    """
    if not 0.0 < target_power < 1.0:
        raise ValueError("target_power must be in (0, 1)")
    if calibration is None:
        calibration = calibrate_analysis_times(scenario, replicates=400, seed=seed, workers=workers)
    if refine_replicates is None:
        refine_replicates = 3 * replicates

    probes: list[tuple[float, float]] = []

    def power_at(beta: float, probe_replicates: int = replicates, probe_seed: int = seed) -> float:
        oc = run_oc(
            replace(scenario, beta_w=beta),
            design,
            ("adjusted",),
            probe_replicates,
            probe_seed,
            calibration=calibration,
            workers=workers,
            fit_options=fit_options,
        )
        return oc.final_rejection("adjusted")

    def crn_probe(beta: float) -> float:
        p = power_at(beta)
        probes.append((beta, p))
        return p

    hi = null_beta_w(scenario)
    p_hi = crn_probe(hi)
    lo = hi
    p_lo = p_hi
    for step in (0.5, 1.0, 2.0, 4.0):
        lo = hi - step
        p_lo = crn_probe(lo)
        if p_lo >= target_power:
            break
    else:
        raise SeqSurvError(
            f"could not bracket the target power {target_power:g}; probes: {probes}"
        )

    best = (lo, p_lo) if abs(p_lo - target_power) < abs(p_hi - target_power) else (hi, p_hi)
    for _ in range(max_bisections):
        if abs(best[1] - target_power) <= tolerance or hi - lo < 1e-4:
            break
        mid = 0.5 * (lo + hi)
        p_mid = crn_probe(mid)
        if abs(p_mid - target_power) < abs(best[1] - target_power):
            best = (mid, p_mid)
        if p_mid > target_power:
            lo = mid
        else:
            hi = mid

    if refine_replicates <= 0:
        return EffectCalibration(beta_delta=best[0], power=best[1], probes=tuple(probes))

    slope = _local_slope(probes, target_power)
    candidate = best[0]
    p_ind = power_at(candidate, refine_replicates, seed + 1_000_003)
    corrected = candidate
    if slope is not None:
        corrected = candidate + (target_power - p_ind) / slope
        corrected = float(np.clip(corrected, min(lo, hi) - 0.5, max(lo, hi) + 0.5))
    p_final = power_at(corrected, refine_replicates, seed + 2_000_003)
    probes.append((corrected, p_final))
    return EffectCalibration(beta_delta=corrected, power=p_final, probes=tuple(probes))


# ---------------------------------------------------------------------------
# plain-text scenario files and CSV results

_SCENARIO_FIELDS = (
    "n0", "n1", "tau", "alpha0", "alpha1", "gamma0", "beta_w", "covariate_scheme",
    "phi", "accrual", "censor_rate", "k_analyses", "total_alpha", "spending_rho",
    "sidedness", "target_info_fractions",
)


def scenario_to_text(scenario: Scenario) -> str:
    lines = []
    for name in _SCENARIO_FIELDS:
        value = getattr(scenario, name)
        if name == "target_info_fractions":
            value = ",".join(repr(v) for v in value)
        elif name == "gamma0" and value is None:
            value = "default"
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"


def scenario_from_text(text: str) -> Scenario:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"scenario file line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCENARIO_FIELDS:
            raise ValueError(f"scenario file line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_scenario_value(key, value)
        except ValueError as exc:
            raise ValueError(f"scenario file line {lineno}: {exc}") from None
    missing = [k for k in ("n0", "n1", "tau") if k not in values]
    if missing:
        raise ValueError(f"scenario file: missing required key(s) {', '.join(missing)}")
    beta_w = values.pop("beta_w", 0.0)
    scenario = Scenario(**values)  # type: ignore[arg-type]
    if beta_w == "null":
        return replace(scenario, beta_w=null_beta_w(scenario))
    return replace(scenario, beta_w=float(beta_w))  # type: ignore[arg-type]


def _parse_scenario_value(key: str, value: str):
    if key in ("n0", "n1", "k_analyses"):
        return int(value)
    if key in ("covariate_scheme", "sidedness"):
        return value
    if key == "beta_w":
        return "null" if value == "null" else float(value)
    if key == "gamma0":
        return None if value in ("default", "") else float(value)
    if key == "target_info_fractions":
        return tuple(float(v) for v in value.split(","))
    return float(value)


def oc_to_csv(oc: OperatingCharacteristics) -> str:
    """Stagewise results as CSV; formatting is deterministic so equal runs
    produce byte-identical files."""
    lines = ["stage,method,cum_rejection,se"]
    for m in oc.methods:
        for k in range(len(oc.analysis_times)):
            lines.append(
                f"{k + 1},{m},{oc.cumulative_rejection[m][k]!r},{oc.standard_errors[m][k]!r}"
            )
    return "\n".join(lines) + "\n"


def oc_plot_data(oc: OperatingCharacteristics, design: GSDesign) -> str:
    """Per-stage plot table: calendar time, planned fraction, nominal spend,
    and each method's cumulative rejection."""
    header = ["stage", "calendar_time", "info_fraction", "nominal_spend"] + [
        f"cum_rejection_{m}" for m in oc.methods
    ]
    lines = [",".join(header)]
    for k in range(len(oc.analysis_times)):
        row = [
            str(k + 1),
            repr(oc.analysis_times[k]),
            repr(design.info_fractions[k]),
            repr(design.alpha_spent[k]),
        ]
        row += [repr(oc.cumulative_rejection[m][k]) for m in oc.methods]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
