"""Covariate-adjusted survival probabilities and their sequential test statistic.

The adjusted survival probability under arm ``i`` averages the model-based
conditional survival at ``t0`` over the pooled covariate sample.  The variance
of the arm difference combines a martingale term per stratum (uncertainty in
the baseline cumulative hazard) with a delta-method term for the shared
coefficient estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .cox import FitOptions, StratifiedCoxFit, _prepare_strata, _risk_sums_raw, fit_mple
from .data import Snapshot
from .errors import DegenerateDataError

QUADRATIC_FORMS = ("inverse", "plain")


def conditional_survival(fit: StratifiedCoxFit, stratum: int, z: Sequence[float], t: float) -> float:
    """Model-based survival beyond ``t`` under arm ``stratum`` for covariates ``z``."""
    if t > fit.calendar_time:
        raise ValueError(
            f"survival time {t:g} exceeds the fit's calendar horizon {fit.calendar_time:g}"
        )
    z = np.asarray(z, dtype=np.float64)
    rel_risk = float(np.exp(fit.beta_hat @ z))
    return float(np.exp(-rel_risk * fit.baseline_cum_hazard[stratum](t)))


def adjusted_sp(fit: StratifiedCoxFit, snap: Snapshot, stratum: int, t0: float) -> float:
    """Adjusted survival probability: the conditional survival under arm
    ``stratum`` averaged over every subject's covariates (both arms pooled)."""
    if t0 > fit.calendar_time:
        raise ValueError(
            f"survival time {t0:g} exceeds the fit's calendar horizon {fit.calendar_time:g}"
        )
    rel_risk = np.exp(snap.covariates @ fit.beta_hat)
    lam = fit.baseline_cum_hazard[stratum](t0)
    return float(np.mean(np.exp(-rel_risk * lam)))


@dataclass(frozen=True)
class VarianceComponents:
    """Ingredients of the variance of the adjusted survival probability difference.

    Per-stratum arrays are indexed by arm.  ``cumhaz_variance`` estimates the
    variance of the baseline cumulative hazard estimate on [0, t0];
    ``cumhaz_beta_gradient`` is minus its derivative in the coefficients.
    ``hazard_sensitivity`` (and its covariate-weighted companion) measure how
    the adjusted survival probability responds to a baseline-hazard
    perturbation, and ``sp_beta_gradient`` is the resulting total derivative
    of the adjusted survival probability in the coefficients.
    ``mean_information`` is the observed information divided by the pooled
    sample size.
    """

    t0: float
    cumhaz_variance: np.ndarray        # (2,)
    cumhaz_beta_gradient: np.ndarray   # (2, p)
    hazard_sensitivity: np.ndarray     # (2,)
    hazard_sensitivity_z: np.ndarray   # (2, p)
    mean_information: np.ndarray       # (p, p)
    sp_beta_gradient: np.ndarray       # (2, p)
    sp_diff_beta_gradient: np.ndarray  # (p,)
    baseline_cumhaz_t0: np.ndarray     # (2,)
    adjusted_sp: np.ndarray            # (2,)
    arm_sizes: tuple[int, int]
    n: int


def variance_components(fit: StratifiedCoxFit, snap: Snapshot, t0: float) -> VarianceComponents:
    """Evaluate every variance ingredient at the fitted coefficients.

    Event sums run over (0, t0], inclusive of events at exactly t0; pooled
    averages run over all subjects in the snapshot.
    """
    if t0 > fit.calendar_time:
        raise ValueError(
            f"survival time {t0:g} exceeds the fit's calendar horizon {fit.calendar_time:g}"
        )
    p = snap.n_covariates
    n = snap.n
    beta = fit.beta_hat
    strata = _prepare_strata(snap)

    cumhaz_var = np.zeros(2)
    cumhaz_grad = np.zeros((2, p))
    lam_t0 = np.zeros(2)
    for i, st in enumerate(strata):
        if st.event_times.size == 0:
            continue
        k = int(np.searchsorted(st.event_times, t0, side="right"))
        if k == 0:
            continue
        _, r0, r1 = _risk_sums_raw(st, beta)
        r0 = r0[:k]
        r1 = r1[:k]
        if np.any(r0 <= 0.0):
            raise DegenerateDataError(f"stratum {i}: empty risk set at an event time before t0")
        dn = st.dn[:k]
        lam_t0[i] = float(np.sum(dn / r0))
        cumhaz_var[i] = st.size * float(np.sum(dn / r0**2))
        cumhaz_grad[i] = (dn[:, None] * r1 / r0[:, None] ** 2).sum(axis=0)

    rel_risk = np.exp(snap.covariates @ beta)
    sens = np.zeros(2)
    sens_z = np.zeros((2, p))
    sp = np.zeros(2)
    for i in range(2):
        cond_surv = np.exp(-rel_risk * lam_t0[i])
        weighted = cond_surv * rel_risk
        sp[i] = float(np.mean(cond_surv))
        sens[i] = float(np.mean(weighted))
        sens_z[i] = (weighted[:, None] * snap.covariates).mean(axis=0)

    sp_grad = sens[:, None] * cumhaz_grad - lam_t0[:, None] * sens_z

    return VarianceComponents(
        t0=float(t0),
        cumhaz_variance=cumhaz_var,
        cumhaz_beta_gradient=cumhaz_grad,
        hazard_sensitivity=sens,
        hazard_sensitivity_z=sens_z,
        mean_information=fit.observed_information / n,
        sp_beta_gradient=sp_grad,
        sp_diff_beta_gradient=sp_grad[1] - sp_grad[0],
        baseline_cumhaz_t0=lam_t0,
        adjusted_sp=sp,
        arm_sizes=(strata[0].size, strata[1].size),
        n=n,
    )


def sp_variance(components: VarianceComponents, quadratic_form: str = "inverse") -> float:
    """Variance of the root-n scaled adjusted-SP difference.

    ``quadratic_form`` selects how the coefficient-uncertainty term contracts
    the SP gradient with the mean information: "inverse" (the default, the
    delta-method form) or "plain" (no inversion), kept as a diagnostic for
    sensitivity checks.
    """
    if quadratic_form not in QUADRATIC_FORMS:
        raise ValueError(f"quadratic_form must be one of {QUADRATIC_FORMS}")
    n0, n1 = components.arm_sizes
    n = components.n
    if min(n0, n1) == 0:
        raise DegenerateDataError("both arms must be present to compare survival probabilities")
    total = float(
        (n / n0) * components.hazard_sensitivity[0] ** 2 * components.cumhaz_variance[0]
        + (n / n1) * components.hazard_sensitivity[1] ** 2 * components.cumhaz_variance[1]
    )
    d = components.sp_diff_beta_gradient
    if d.size:
        sigma = components.mean_information
        if quadratic_form == "plain":
            total += float(d @ sigma @ d)
        else:
            try:
                total += float(d @ cho_solve(cho_factor(sigma), d))
            except (LinAlgError, ValueError):
                total += float(d @ np.linalg.pinv(sigma) @ d)
    return total


@dataclass(frozen=True)
class SPComparison:
    """Adjusted survival probabilities, their difference, and the standardized
    statistic at one calendar analysis time."""

    t0: float
    u: float
    s_hat: tuple[float, float]
    diff: float
    sigma2_hat: float
    info_level: float
    z: float
    n: int
    components: VarianceComponents
    fit: StratifiedCoxFit


def compare_sp(
    snap: Snapshot,
    t0: float,
    fit_options: FitOptions | None = None,
    *,
    quadratic_form: str = "inverse",
) -> SPComparison:
    """Fit the stratified model at the snapshot and standardize the adjusted
    survival probability difference at ``t0``.

    The information level is the reciprocal variance of the (unscaled)
    difference estimate, ``n / sigma2_hat``.
    """
    if t0 > snap.calendar_time:
        raise ValueError(
            f"survival time {t0:g} exceeds the snapshot's calendar time {snap.calendar_time:g}"
        )
    if snap.arm_size(0) == 0 or snap.arm_size(1) == 0:
        raise DegenerateDataError("both arms must be present to compare survival probabilities")
    fit = fit_mple(snap, fit_options)
    comps = variance_components(fit, snap, t0)
    sigma2 = sp_variance(comps, quadratic_form)
    if sigma2 <= 0.0 or not np.isfinite(sigma2):
        raise DegenerateDataError(
            f"variance estimate is not positive ({sigma2:g}); "
            "no usable events in (0, t0] in either stratum"
        )
    n = snap.n
    s0, s1 = float(comps.adjusted_sp[0]), float(comps.adjusted_sp[1])
    diff = s1 - s0
    z = float(np.sqrt(n) * diff / np.sqrt(sigma2))
    return SPComparison(
        t0=float(t0),
        u=snap.calendar_time,
        s_hat=(s0, s1),
        diff=diff,
        sigma2_hat=sigma2,
        info_level=n / sigma2,
        z=z,
        n=n,
        components=comps,
        fit=fit,
    )
