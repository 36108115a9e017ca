"""The three estimators: Fourier fit, iterative moment-based, DHD eigensystem.

Shared conventions:

* nothing is ever silently clamped; a non-physical intermediate (negative
  variance under a square root, s > 1, kappa < 1) keeps its signed value
  in the output via sign(x) sqrt|x| and drops the ``physical`` flag;
* ``flags`` is a frozenset of short strings naming every anomaly that
  occurred, see the FLAG_* constants;
* ``predicted_cov`` is the model covariance evaluated at the estimate and
  is only computed for physical estimates (the information matrix means
  nothing at an unphysical point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    SingularMatrixError,
    StateParams,
    SymMatrix2,
    SymMatrix3,
    angle_distance,
    canonical_angle,
    eval_variance,
    variance_partials,
)
from .bounds import fisher_homodyne_discrete, fisher_dhd, fit_variance_prediction

__all__ = [
    "EstimateResult",
    "FourierComponents",
    "METHOD_FIT",
    "METHOD_MOM",
    "METHOD_DHD",
    "FLAG_DEGENERATE",
    "FLAG_NONPHYSICAL",
    "FLAG_SINGULAR_PRIOR",
    "FLAG_NO_CONVERGENCE",
    "FLAG_SEED_FALLBACK",
    "FLAG_SINGULAR_INFORMATION",
    "signed_sqrt",
    "fourier_components",
    "fit_estimate",
    "mom_weights",
    "mom_step",
    "mom_estimate",
    "dhd_estimate",
]

METHOD_FIT = "fit"
METHOD_MOM = "mom"
METHOD_DHD = "dhd"

FLAG_DEGENERATE = "degenerate"
FLAG_NONPHYSICAL = "nonphysical"
FLAG_SINGULAR_PRIOR = "singular-prior"
FLAG_NO_CONVERGENCE = "no-convergence"
FLAG_SEED_FALLBACK = "seed-fallback"
FLAG_SINGULAR_INFORMATION = "singular-information"

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 20
FALLBACK_PRIOR = StateParams(s=0.5, kappa=2.0, phi_s=0.0)


def signed_sqrt(x: float) -> float:
    """sqrt(|x|) carrying the sign of x, so failed roots stay visible."""
    return math.copysign(math.sqrt(abs(x)), x)


@dataclass(frozen=True)
class FourierComponents:
    """Zeroth and second Fourier components of the squared quadratures."""

    c0: float
    c2: complex


@dataclass(frozen=True)
class EstimateResult:
    params: StateParams
    predicted_cov: SymMatrix3 | None
    method: str
    physical: bool
    iterations: int
    prior_used: StateParams | None = None
    flags: frozenset = frozenset()

    def predicted_std(self) -> tuple[float, float, float] | None:
        if self.predicted_cov is None:
            return None
        d = self.predicted_cov.diag()
        return tuple(math.sqrt(v) if v >= 0 else float("nan") for v in d)


def fourier_components(scan) -> FourierComponents:
    """c0 = mean(q^2), c2 = mean(q^2 exp(-2i psi))."""
    q = np.asarray(scan.samples, dtype=float)
    psi = np.asarray(scan.phases, dtype=float)
    if q.size < 3:
        raise ValueError(f"need at least 3 samples, got {q.size}")
    x = q * q
    c0 = float(np.mean(x))
    c2 = complex(np.mean(x * np.exp(-2.0j * psi)))
    return FourierComponents(c0=c0, c2=c2)


def fit_estimate(scan) -> EstimateResult:
    """Least-squares fit of the variance model via its Fourier components.

    With m = C0 - 2|C2| and M = C0 + 2|C2| (the squeezed and anti-squeezed
    variances), s = sqrt(m/M), kappa = sqrt(m M), and the angle comes from
    the phase of C2.  The expectation of C2 carries a negative prefactor,
    -(kappa(1-s^2)/4s) exp(-2i phi_s), so the angle is recovered as
    -(1/2) Arg(-C2); using Arg(C2) directly would land on the
    anti-squeezed axis, which breaks the exact round-trip on expected
    moments.
    """
    comp = fourier_components(scan)
    amp = abs(comp.c2)
    m = comp.c0 - 2.0 * amp
    big = comp.c0 + 2.0 * amp

    flags = set()
    if comp.c2 == 0:
        # no second harmonic at all: the angle is undefined, s comes out 1
        flags.add(FLAG_DEGENERATE)
        phi = 0.0
    else:
        phi = canonical_angle(-0.5 * cmath_phase_neg(comp.c2))

    s_hat = signed_sqrt(m / big) if big != 0.0 else float("nan")
    k_hat = signed_sqrt(m * big)
    est = StateParams(s=s_hat, kappa=k_hat, phi_s=phi)

    physical = m > 0.0 and k_hat >= 1.0 and math.isfinite(s_hat)
    if not physical:
        flags.add(FLAG_NONPHYSICAL)

    cov = None
    if physical:
        pred = fit_variance_prediction(est, len(scan.samples))
        cov = SymMatrix3(ss=pred.var_s, sk=0.0, sp=0.0,
                         kk=pred.var_kappa, kp=0.0, pp=pred.var_phi)
    return EstimateResult(
        params=est,
        predicted_cov=cov,
        method=METHOD_FIT,
        physical=physical,
        iterations=0,
        flags=frozenset(flags),
    )


def cmath_phase_neg(z: complex) -> float:
    """Arg(-z) without constructing -z twice; keeps the branch explicit."""
    return math.atan2(-z.imag, -z.real)


def mom_weights(prior: StateParams, psi):
    """Optimal moment weights c_a(psi) = (1 / 2 V^2) dV/da at the prior."""
    v = eval_variance(prior, psi)
    g_s, g_k, g_p = variance_partials(prior, psi)
    w = 1.0 / (2.0 * np.asarray(v) ** 2)
    return w * g_s, w * g_k, w * g_p


def _mom_update(x2: np.ndarray, phases: np.ndarray, prior: StateParams):
    """One closed-form moment update. Returns (s, kappa, phi, flags).

    The linear combinations y_a = mean(c_a q^2) feed

        num = y1 s0 (1+s0) + y2 k0
        den = y1 (1+s0) - y2 k0
        s   = sqrt|num / den|
        k   = 2 k0 sqrt|num * den|
        phi = phi0 - y3 / (2 y1 (1 - s0^2))

    evaluated as printed, with the absolute values recorded: the physical
    branch has num > 0 and den < 0, anything else flags non-physical.
    """
    s0, k0, p0 = prior.s, prior.kappa, prior.phi_s
    c_s, c_k, c_p = mom_weights(prior, phases)
    y1 = float(np.mean(c_s * x2))
    y2 = float(np.mean(c_k * x2))
    y3 = float(np.mean(c_p * x2))

    flags = set()
    num = y1 * s0 * (1.0 + s0) + y2 * k0
    den = y1 * (1.0 + s0) - y2 * k0
    if den == 0.0:
        s_hat = float("inf")
        flags.add(FLAG_NONPHYSICAL)
    else:
        s_hat = math.sqrt(abs(num / den))
    k_hat = 2.0 * k0 * math.sqrt(abs(num * den))
    if not (num > 0.0 and den < 0.0):
        flags.add(FLAG_NONPHYSICAL)

    phi_den = 2.0 * y1 * (1.0 - s0 * s0)
    if phi_den == 0.0 or abs(1.0 - s0 * s0) < 1e-8:
        # prior at the isotropic boundary (or dead y1): no angle update exists
        flags.add(FLAG_SINGULAR_PRIOR)
        p_hat = p0
    else:
        p_hat = canonical_angle(p0 - y3 / phi_den)
    return s_hat, k_hat, p_hat, flags


def _predicted_cov_at(est: StateParams, phases) -> tuple[SymMatrix3 | None, set]:
    try:
        return fisher_homodyne_discrete(est, phases).inverse(), set()
    except SingularMatrixError:
        return None, {FLAG_SINGULAR_INFORMATION}


def mom_step(scan, prior: StateParams) -> EstimateResult:
    """Single moment-based update from an explicit prior.

    Fixed point: expected-moment input q_j^2 = V(psi_j, prior) returns the
    prior exactly.  The raw update is reported without canonicalization;
    the iterative wrapper handles the mirror image.
    """
    phases = np.asarray(scan.phases, dtype=float)
    q = np.asarray(scan.samples, dtype=float)
    if q.size < 3:
        raise ValueError(f"need at least 3 samples, got {q.size}")
    s_hat, k_hat, p_hat, flags = _mom_update(q * q, phases, prior)
    est = StateParams(s=s_hat, kappa=k_hat, phi_s=p_hat)
    physical = (
        FLAG_NONPHYSICAL not in flags
        and math.isfinite(s_hat)
        and 0.0 < s_hat <= 1.0
        and k_hat >= 1.0
    )
    if not physical:
        flags.add(FLAG_NONPHYSICAL)
    cov = None
    if physical:
        cov, extra = _predicted_cov_at(est, phases)
        flags |= extra
    return EstimateResult(
        params=est,
        predicted_cov=cov,
        method=METHOD_MOM,
        physical=physical,
        iterations=1,
        prior_used=prior,
        flags=frozenset(flags),
    )


def _mirror(s: float, kappa: float, phi: float) -> tuple[float, float, float]:
    """Gauge identity of the variance model: (s,k,phi) and (1/s,k,phi+pi/2)
    describe the same state.  Map onto the s <= 1 branch."""
    if s > 1.0:
        return 1.0 / s, kappa, canonical_angle(phi + 0.5 * math.pi)
    return s, kappa, phi


def _seed_prior(scan) -> tuple[StateParams, set]:
    """Fit-based starting point, clamped into the iteration domain."""
    fit = fit_estimate(scan)
    s, k = fit.params.s, fit.params.kappa
    if not (math.isfinite(s) and math.isfinite(k)) or s <= 0.0 or k <= 0.0:
        return FALLBACK_PRIOR, {FLAG_SEED_FALLBACK}
    return StateParams(
        s=min(max(s, 0.01), 1.0),
        kappa=min(max(k, 1.0), 100.0),
        phi_s=fit.params.phi_s,
    ), set()


def mom_estimate(
    scan,
    prior: StateParams | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    compute_cov: bool = True,
) -> EstimateResult:
    """Iterated moment-based estimator.

    Feeds each update back as the next prior until the relative change
    max(|ds|/s, |dk|/k, circ|dphi| (1-s)/s) drops below tol.  Every
    iterate is mirror-canonicalized onto s <= 1 (exact gauge move, not a
    clamp); without this, poor priors converge to the mirrored fixed
    point and never meet the tolerance.  No mid-iteration clamping:
    forcing s back inside (0, 1] deadlocks at the s = 1 boundary where
    the angle weight vanishes.
    """
    phases = np.asarray(scan.phases, dtype=float)
    q = np.asarray(scan.samples, dtype=float)
    if q.size < 3:
        raise ValueError(f"need at least 3 samples, got {q.size}")
    x2 = q * q

    run_flags = set()
    if prior is None:
        prior, run_flags = _seed_prior(scan)
    prior_used = prior

    s0, k0, p0 = prior.s, prior.kappa, prior.phi_s
    s0, k0, p0 = _mirror(s0, k0, p0)
    step_flags: set = set()
    iterations = 0
    converged = False
    for _ in range(max_iter):
        # guards: keep the iteration inside the domain where the update is defined
        if not math.isfinite(s0) or s0 <= 0.0:
            s0 = 0.01
        if s0 == 1.0:
            s0 = 1.0 - 1e-9
        if not math.isfinite(k0) or k0 <= 0.0:
            k0 = 1.0
        s1, k1, p1, step_flags = _mom_update(x2, phases, StateParams(s0, k0, p0))
        iterations += 1
        s1, k1, p1 = _mirror(s1, k1, p1)
        if math.isfinite(s1) and math.isfinite(k1) and s1 > 0.0 and k1 > 0.0:
            metric = max(
                abs(s1 - s0) / s1,
                abs(k1 - k0) / k1,
                angle_distance(p1, p0) * (1.0 - s1) / max(s1, 1e-6),
            )
            if metric < tol:
                s0, k0, p0 = s1, k1, p1
                converged = True
                break
        s0, k0, p0 = s1, k1, p1
    if not converged:
        run_flags.add(FLAG_NO_CONVERGENCE)

    est = StateParams(s=s0, kappa=k0, phi_s=p0)
    flags = run_flags | step_flags
    physical = (
        FLAG_NONPHYSICAL not in flags
        and math.isfinite(s0)
        and 0.0 < s0 <= 1.0
        and k0 >= 1.0
    )
    if not physical:
        flags.add(FLAG_NONPHYSICAL)
    cov = None
    if physical and compute_cov:
        cov, extra = _predicted_cov_at(est, phases)
        flags |= extra
    return EstimateResult(
        params=est,
        predicted_cov=cov,
        method=METHOD_MOM,
        physical=physical,
        iterations=iterations,
        prior_used=prior_used,
        flags=frozenset(flags),
    )


# eigenvalue-gap threshold below which the DHD angle is meaningless
_DEGENERATE_REL_GAP = 1e-12


def dhd_estimate(batch, compute_cov: bool = True) -> EstimateResult:
    """Eigensystem estimator for double-homodyne data.

    Sample second moments of (q1, p2) give Gamma; subtracting the vacuum
    unit added by the beamsplitter leaves Gamma_theta, whose eigensystem
    is (kappa s, kappa / s, phi_s).
    """
    q1 = np.asarray(batch.q1, dtype=float)
    p2 = np.asarray(batch.p2, dtype=float)
    if q1.size < 3:
        raise ValueError(f"need at least 3 repetitions, got {q1.size}")
    gamma = SymMatrix2(
        xx=float(np.mean(q1 * q1)) - 1.0,
        xp=float(np.mean(q1 * p2)),
        pp=float(np.mean(p2 * p2)) - 1.0,
    )
    lam_min, lam_max, angle = gamma.eigensystem()

    flags = set()
    scale = max(abs(lam_min), abs(lam_max), 1e-300)
    if (lam_max - lam_min) <= _DEGENERATE_REL_GAP * scale:
        flags.add(FLAG_DEGENERATE)
        angle = 0.0

    s_hat = signed_sqrt(lam_min / lam_max) if lam_max != 0.0 else float("nan")
    k_hat = signed_sqrt(lam_min * lam_max)
    est = StateParams(s=s_hat, kappa=k_hat, phi_s=angle)

    physical = lam_min > 0.0 and k_hat >= 1.0 and math.isfinite(s_hat) and s_hat <= 1.0
    if not physical:
        flags.add(FLAG_NONPHYSICAL)

    cov = None
    if physical and compute_cov:
        try:
            cov = SymMatrix3.from_array(
                fisher_dhd(est).as_array() * q1.size
            ).inverse()
        except SingularMatrixError:
            flags.add(FLAG_SINGULAR_INFORMATION)
    return EstimateResult(
        params=est,
        predicted_cov=cov,
        method=METHOD_DHD,
        physical=physical,
        iterations=0,
        flags=frozenset(flags),
    )
