"""Alpha-spending boundaries over the canonical joint distribution.

Sequential statistics with independent-increment information follow a
multivariate normal law with Corr(Z_k, Z_l) = sqrt(IF_k / IF_l) for k <= l.
Boundaries are found by propagating the continuation sub-density across
stages on a Simpson grid and solving each stage's critical value so the
stagewise crossing probability matches the spending increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

TWO_SIDED = "two_sided"
ONE_SIDED_UPPER = "one_sided_upper"
ONE_SIDED_LOWER = "one_sided_lower"
SIDEDNESS = (TWO_SIDED, ONE_SIDED_UPPER, ONE_SIDED_LOWER)

_TAIL_SDS = 8.0       # continuation grids truncate this many SDs from the stage mean
_MIN_IF_STEP = 1e-9   # information fractions closer than this are rejected
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _phi(t: np.ndarray) -> np.ndarray:
    return _INV_SQRT_2PI * np.exp(-0.5 * t * t)


@dataclass(frozen=True)
class SpendingFunction:
    """Cumulative type I error allowed as a function of information fraction.

    Families: ``power`` spends total_alpha * min(1, IF**rho); ``obf_like`` and
    ``pocock_like`` are the classical error-spending approximations of the
    O'Brien-Fleming and Pocock shapes; ``custom`` linearly interpolates a
    user-supplied (IF, cumulative alpha) table.
    """

    total_alpha: float
    family: str = "power"
    rho: float = 3.0
    sidedness: str = TWO_SIDED
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.total_alpha < 1.0:
            raise ValueError("total_alpha must be in (0, 1)")
        if self.family not in ("power", "obf_like", "pocock_like", "custom"):
            raise ValueError(f"unknown spending family {self.family!r}")
        if self.family == "power" and self.rho <= 0:
            raise ValueError("power family requires rho > 0")
        if self.sidedness not in SIDEDNESS:
            raise ValueError(f"sidedness must be one of {SIDEDNESS}")
        if self.family == "custom":
            if not self.table:
                raise ValueError("custom spending requires a (IF, alpha) table")
            fracs = [f for f, _ in self.table]
            alphas = [a for _, a in self.table]
            if any(f2 <= f1 for f1, f2 in zip(fracs, fracs[1:])):
                raise ValueError("custom spending table fractions must be strictly increasing")
            if any(a2 < a1 for a1, a2 in zip(alphas, alphas[1:])) or alphas[0] < 0:
                raise ValueError("custom spending table must be nondecreasing and nonnegative")
            if abs(fracs[-1] - 1.0) > 1e-12 or abs(alphas[-1] - self.total_alpha) > 1e-12:
                raise ValueError("custom spending table must end at (1, total_alpha)")


def spend(sf: SpendingFunction, info_fraction: float) -> float:
    """Cumulative alpha allowed at the given information fraction."""
    if info_fraction < 0:
        raise ValueError(f"information fraction must be >= 0, got {info_fraction!r}")
    t = min(float(info_fraction), 1.0)
    if t == 0.0:
        return 0.0
    if t == 1.0:
        return sf.total_alpha
    if sf.family == "power":
        return sf.total_alpha * t**sf.rho
    if sf.family == "obf_like":
        za = norm.ppf(1.0 - sf.total_alpha / 2.0)
        return float(2.0 - 2.0 * norm.cdf(za / math.sqrt(t)))
    if sf.family == "pocock_like":
        return sf.total_alpha * math.log(1.0 + (math.e - 1.0) * t)
    fracs = np.array([0.0] + [f for f, _ in sf.table])
    alphas = np.array([0.0] + [a for _, a in sf.table])
    return float(np.interp(t, fracs, alphas))


def _simpson_weights(a: float, b: float, npoints: int) -> np.ndarray:
    h = (b - a) / (npoints - 1)
    w = np.full(npoints, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


class _Propagator:
    """Continuation sub-density of the canonical statistic sequence.

    Tracks the (defective) density of Z_k restricted to the event that no
    earlier boundary was crossed.  ``drift`` is the expected Z at information
    fraction 1, so E[Z_k] = drift * sqrt(IF_k).
    """

    def __init__(self, sidedness: str, drift: float = 0.0, grid_points: int = 4001):
        if sidedness not in SIDEDNESS:
            raise ValueError(f"sidedness must be one of {SIDEDNESS}")
        if grid_points < 3:
            raise ValueError("grid_points must be at least 3")
        self.sidedness = sidedness
        self.drift = float(drift)
        self.grid_points = grid_points if grid_points % 2 == 1 else grid_points + 1
        self.prev_if: float | None = None
        self._x: np.ndarray | None = None     # grid over the continuation region
        self._wg: np.ndarray | None = None    # Simpson weights times sub-density
        self.dead = False                     # continuation region collapsed

    def _tails(self, if_k: float, c: float) -> tuple[np.ndarray, np.ndarray]:
        """Upper/lower stagewise tail probabilities conditional on each grid point."""
        delta = if_k - self.prev_if
        denom = math.sqrt(delta)
        s_prev = self._x * math.sqrt(self.prev_if)
        mu_inc = self.drift * delta
        upper = norm.sf((c * math.sqrt(if_k) - s_prev - mu_inc) / denom)
        lower = norm.cdf((-c * math.sqrt(if_k) - s_prev - mu_inc) / denom)
        return upper, lower

    def stage_crossing(self, if_k: float, c: float) -> float:
        """P(first crossing happens at this stage) for boundary magnitude ``c``."""
        if self.dead:
            return 0.0
        if not math.isfinite(c):
            return 0.0
        mu = self.drift * math.sqrt(if_k)
        if self.prev_if is None:
            upper = norm.sf(c - mu)
            lower = norm.cdf(-c - mu)
        else:
            if if_k <= self.prev_if + _MIN_IF_STEP:
                raise ValueError("information fractions must be strictly increasing")
            up, lo = self._tails(if_k, c)
            upper = float(self._wg @ up)
            lower = float(self._wg @ lo)
        if self.sidedness == TWO_SIDED:
            return upper + lower
        if self.sidedness == ONE_SIDED_UPPER:
            return upper
        return lower

    def solve_boundary(self, if_k: float, increment: float) -> float:
        """Boundary magnitude whose stagewise crossing equals the spending increment."""
        if increment <= 0.0 or self.dead:
            return math.inf
        if self.prev_if is None and self.drift == 0.0:
            if self.sidedness == TWO_SIDED:
                return float(norm.ppf(1.0 - increment / 2.0))
            return float(norm.ppf(1.0 - increment))
        f = lambda c: self.stage_crossing(if_k, c) - increment
        lo, hi = 0.0, 40.0
        if f(lo) <= 0.0:
            # even a zero boundary cannot spend this much; reject everything
            return 0.0
        return float(brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200))

    def advance(self, if_k: float, c: float) -> None:
        """Restrict to the continuation region at this stage and move the grid."""
        if self.dead:
            return
        mu = self.drift * math.sqrt(if_k)
        upper_bound = min(c, mu + _TAIL_SDS) if math.isfinite(c) else mu + _TAIL_SDS
        if self.sidedness == ONE_SIDED_UPPER:
            lower_bound = mu - _TAIL_SDS
        elif self.sidedness == ONE_SIDED_LOWER:
            lower_bound = max(-c, mu - _TAIL_SDS) if math.isfinite(c) else mu - _TAIL_SDS
            upper_bound = mu + _TAIL_SDS
        else:
            lower_bound = max(-c, mu - _TAIL_SDS) if math.isfinite(c) else mu - _TAIL_SDS
        if upper_bound <= lower_bound:
            self.dead = True
            self.prev_if = if_k
            return
        y = np.linspace(lower_bound, upper_bound, self.grid_points)
        w = _simpson_weights(lower_bound, upper_bound, self.grid_points)
        if self.prev_if is None:
            g = _phi(y - mu)
        else:
            delta = if_k - self.prev_if
            denom = math.sqrt(delta)
            scale = math.sqrt(if_k) / denom
            s_prev = self._x * math.sqrt(self.prev_if)
            mu_inc = self.drift * delta
            g = np.empty_like(y)
            chunk = 256
            s_next = y * math.sqrt(if_k)
            for start in range(0, y.size, chunk):
                stop = min(start + chunk, y.size)
                kern = _phi((s_next[start:stop, None] - s_prev[None, :] - mu_inc) / denom)
                g[start:stop] = kern @ self._wg * scale
        self._x = y
        self._wg = w * g
        self.prev_if = if_k


@dataclass(frozen=True)
class GSDesign:
    """Analysis schedule with spending-matched critical values.

    ``critical_values`` are boundary magnitudes: a two-sided design rejects
    when |z| >= c_k, a one-sided upper (lower) design when z >= c_k
    (z <= -c_k).  ``alpha_spent`` is cumulative; the final stage always spends
    the full budget.  ``grid_points`` records the integration resolution so
    monitoring can reproduce design boundaries exactly.
    """

    spending: SpendingFunction
    info_fractions: tuple[float, ...]
    critical_values: tuple[float, ...]
    alpha_spent: tuple[float, ...]
    grid_points: int = 4001

    @property
    def n_stages(self) -> int:
        return len(self.info_fractions)

    def correlation(self, k: int, l: int) -> float:
        """Corr(Z_k, Z_l) under the canonical joint distribution (0-based stages)."""
        lo, hi = sorted((self.info_fractions[k], self.info_fractions[l]))
        return math.sqrt(lo / hi)


def _validate_fractions(info_fractions: Sequence[float]) -> tuple[float, ...]:
    fracs = tuple(float(f) for f in info_fractions)
    if not fracs:
        raise ValueError("at least one information fraction is required")
    if fracs[0] <= 0.0 or fracs[-1] > 1.0 + 1e-12:
        raise ValueError("information fractions must lie in (0, 1]")
    if any(b - a < _MIN_IF_STEP for a, b in zip(fracs, fracs[1:])):
        raise ValueError("information fractions must be strictly increasing")
    return fracs


def boundaries(
    sf: SpendingFunction,
    info_fractions: Sequence[float],
    grid_points: int = 4001,
) -> GSDesign:
    """Solve the per-stage critical values for a spending function and schedule.

    The final stage spends whatever remains of the total budget, so designs
    whose last information fraction falls short of 1 still exhaust alpha.
    """
    fracs = _validate_fractions(info_fractions)
    k_stages = len(fracs)
    cumulative = [spend(sf, f) for f in fracs]
    cumulative[-1] = sf.total_alpha

    prop = _Propagator(sf.sidedness, drift=0.0, grid_points=grid_points)
    crit: list[float] = []
    spent: list[float] = []
    previous = 0.0
    for k, f in enumerate(fracs):
        target = max(cumulative[k], previous)
        increment = target - previous
        c = prop.solve_boundary(f, increment)
        crit.append(c)
        previous = target
        spent.append(previous)
        if k < k_stages - 1:
            prop.advance(f, c)
    return GSDesign(
        spending=sf,
        info_fractions=fracs,
        critical_values=tuple(crit),
        alpha_spent=tuple(spent),
        grid_points=grid_points,
    )


def crossing_probabilities(design: GSDesign, drift: float = 0.0) -> np.ndarray:
    """Per-stage first-crossing probabilities under a given drift.

    ``drift`` is the expected standardized statistic at full information; 0
    recovers the spending increments.
    """
    prop = _Propagator(design.spending.sidedness, drift=drift, grid_points=design.grid_points)
    probs = np.zeros(design.n_stages)
    for k, f in enumerate(design.info_fractions):
        probs[k] = prop.stage_crossing(f, design.critical_values[k])
        if k < design.n_stages - 1:
            prop.advance(f, design.critical_values[k])
    return probs


@dataclass(frozen=True)
class StageResult:
    stage: int                 # 1-based
    info_level: float
    info_fraction: float       # after clamping at 1
    boundary: float
    z: float
    decision: str              # "continue" | "reject" | "accept"
    alpha_spent: float         # cumulative spending target used through this stage


class SequentialMonitor:
    """Error-spending monitor: re-solves each stage's boundary at the observed
    information fraction, conditional on the boundaries already used.

    Observed fractions above 1 clamp to 1 and force a final analysis; the
    final stage spends all remaining alpha.  Crossing at exactly the boundary
    rejects.
    """

    def __init__(self, design: GSDesign, total_information: float):
        if total_information <= 0:
            raise ValueError("total_information must be positive")
        self.design = design
        self.total_information = float(total_information)
        self.results: list[StageResult] = []
        self._prop = _Propagator(design.spending.sidedness, 0.0, design.grid_points)
        self._spent = 0.0

    @property
    def finished(self) -> bool:
        return bool(self.results) and self.results[-1].decision != "continue"

    def step(self, info_level: float, z: float) -> StageResult:
        if self.finished:
            raise ValueError(
                f"monitoring already ended with decision {self.results[-1].decision!r}"
            )
        stage = len(self.results) + 1
        if stage > self.design.n_stages:
            raise ValueError(f"design has only {self.design.n_stages} stages")
        if self.results and info_level <= self.results[-1].info_level:
            raise ValueError(
                f"information level must increase across stages "
                f"({info_level:g} after {self.results[-1].info_level:g})"
            )
        raw_if = info_level / self.total_information
        clamped = raw_if >= 1.0
        info_fraction = min(raw_if, 1.0)
        prev_if = self._prop.prev_if or 0.0
        if info_fraction <= prev_if + _MIN_IF_STEP:
            raise ValueError(
                f"observed information fraction {info_fraction:g} does not exceed "
                f"the previous stage's {prev_if:g}"
            )
        is_final = clamped or stage == self.design.n_stages
        sf = self.design.spending
        cumulative = sf.total_alpha if is_final else spend(sf, info_fraction)
        target = max(cumulative, self._spent)
        boundary = self._prop.solve_boundary(info_fraction, target - self._spent)
        rejected = self._crossed(z, boundary)
        if rejected:
            decision = "reject"
        elif is_final:
            decision = "accept"
        else:
            decision = "continue"
        result = StageResult(
            stage=stage,
            info_level=float(info_level),
            info_fraction=float(info_fraction),
            boundary=float(boundary),
            z=float(z),
            decision=decision,
            alpha_spent=target,
        )
        self._spent = target
        if decision == "continue":
            self._prop.advance(info_fraction, boundary)
        self.results.append(result)
        return result

    def _crossed(self, z: float, boundary: float) -> bool:
        if not math.isfinite(boundary):
            return False
        side = self.design.spending.sidedness
        if side == TWO_SIDED:
            return abs(z) >= boundary
        if side == ONE_SIDED_UPPER:
            return z >= boundary
        return z <= -boundary


@dataclass
class MonitoringState:
    """Persistent record of a sequential monitoring session.

    Replays cleanly: rebuilding a monitor from the recorded stages reproduces
    the internal continuation density, so sessions can resume from disk.
    """

    design: GSDesign
    total_information: float
    calendar_times: list[float] = field(default_factory=list)
    results: list[StageResult] = field(default_factory=list)
    method: str = ""

    @property
    def finished(self) -> bool:
        return bool(self.results) and self.results[-1].decision != "continue"

    def rebuild_monitor(self) -> SequentialMonitor:
        mon = SequentialMonitor(self.design, self.total_information)
        for res in self.results:
            mon._spent = res.alpha_spent
            if res.decision == "continue":
                mon._prop.advance(res.info_fraction, res.boundary)
            mon.results.append(res)
        return mon


def monitor(state: MonitoringState, info_level: float, z: float, *, calendar_time: float | None = None) -> StageResult:
    """Run one monitoring stage against the state, mutating it.

    Refuses stages after a terminal decision and non-increasing calendar
    times or information levels.
    """
    if state.finished:
        raise ValueError(f"monitoring already ended with decision {state.results[-1].decision!r}")
    if calendar_time is not None and state.calendar_times and calendar_time <= state.calendar_times[-1]:
        raise ValueError(
            f"calendar time must increase across stages "
            f"({calendar_time:g} after {state.calendar_times[-1]:g})"
        )
    mon = state.rebuild_monitor()
    result = mon.step(info_level, z)
    state.results.append(result)
    state.calendar_times.append(float(calendar_time) if calendar_time is not None else float("nan"))
    return result


# ---------------------------------------------------------------------------
# plain-text serialization (audit formats)

def spending_to_text(sf: SpendingFunction) -> str:
    if sf.family == "power":
        return f"power:{sf.rho:g}"
    if sf.family == "custom":
        pairs = ";".join(f"{f!r}:{a!r}" for f, a in sf.table)
        return f"custom:{pairs}"
    return sf.family


def spending_from_text(text: str, total_alpha: float, sidedness: str) -> SpendingFunction:
    text = text.strip()
    if text.startswith("power"):
        rho = float(text.split(":", 1)[1]) if ":" in text else 3.0
        return SpendingFunction(total_alpha, "power", rho=rho, sidedness=sidedness)
    if text in ("obf", "obf_like"):
        return SpendingFunction(total_alpha, "obf_like", sidedness=sidedness)
    if text in ("pocock", "pocock_like"):
        return SpendingFunction(total_alpha, "pocock_like", sidedness=sidedness)
    if text.startswith("custom:"):
        pairs = []
        for item in text.split(":", 1)[1].split(";"):
            f, a = item.split(":")
            pairs.append((float(f), float(a)))
        return SpendingFunction(total_alpha, "custom", sidedness=sidedness, table=tuple(pairs))
    raise ValueError(f"unknown spending specification {text!r}")


def design_to_text(design: GSDesign) -> str:
    lines = [
        f"stages = {design.n_stages}",
        f"alpha = {design.spending.total_alpha!r}",
        f"sidedness = {design.spending.sidedness}",
        f"spending = {spending_to_text(design.spending)}",
        "info_fractions = " + ",".join(repr(f) for f in design.info_fractions),
        "critical_values = " + ",".join(repr(c) for c in design.critical_values),
        "alpha_spent = " + ",".join(repr(a) for a in design.alpha_spent),
        f"grid_points = {design.grid_points}",
    ]
    return "\n".join(lines) + "\n"


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def design_from_text(text: str) -> GSDesign:
    kv = _parse_kv(text)
    try:
        alpha = float(kv["alpha"])
        sidedness = kv["sidedness"]
        sf = spending_from_text(kv["spending"], alpha, sidedness)
        fractions = tuple(float(x) for x in kv["info_fractions"].split(","))
        critical = tuple(float(x) for x in kv["critical_values"].split(","))
        spent = tuple(float(x) for x in kv["alpha_spent"].split(","))
        grid_points = int(kv.get("grid_points", "4001"))
    except KeyError as exc:
        raise ValueError(f"design file is missing key {exc.args[0]!r}") from None
    if not len(fractions) == len(critical) == len(spent):
        raise ValueError("design file: schedule arrays have inconsistent lengths")
    return GSDesign(
        spending=sf,
        info_fractions=fractions,
        critical_values=critical,
        alpha_spent=spent,
        grid_points=grid_points,
    )


def state_to_text(state: MonitoringState) -> str:
    lines = [
        f"total_information = {state.total_information!r}",
        f"method = {state.method}",
        "design_begin",
        design_to_text(state.design).rstrip("\n"),
        "design_end",
    ]
    for t, res in zip(state.calendar_times, state.results):
        lines.append(
            "stage = "
            + ",".join(
                [
                    str(res.stage),
                    repr(t),
                    repr(res.info_level),
                    repr(res.info_fraction),
                    repr(res.boundary),
                    repr(res.z),
                    res.decision,
                    repr(res.alpha_spent),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def state_from_text(text: str) -> MonitoringState:
    lines = text.splitlines()
    try:
        start = lines.index("design_begin")
        end = lines.index("design_end")
    except ValueError:
        raise ValueError("state file: missing design block") from None
    design = design_from_text("\n".join(lines[start + 1 : end]))
    kv = _parse_kv("\n".join(lines[:start]))
    state = MonitoringState(
        design=design,
        total_information=float(kv["total_information"]),
        method=kv.get("method", ""),
    )
    for raw in lines[end + 1 :]:
        line = raw.strip()
        if not line:
            continue
        if not line.startswith("stage ="):
            raise ValueError(f"state file: unexpected line {raw!r}")
        parts = [p.strip() for p in line.split("=", 1)[1].split(",")]
        if len(parts) != 8:
            raise ValueError(f"state file: malformed stage row {raw!r}")
        state.calendar_times.append(float(parts[1]))
        state.results.append(
            StageResult(
                stage=int(parts[0]),
                info_level=float(parts[2]),
                info_fraction=float(parts[3]),
                boundary=float(parts[4]),
                z=float(parts[5]),
                decision=parts[6],
                alpha_spent=float(parts[7]),
            )
        )
    return state
