"""Fisher information and estimator variance bounds.

All bounds come in two flavors: the discrete Fisher sum over an explicit
phase list, and closed-form per-sample expressions divided by the sample
count.  Reports should state which one they used; for equispaced phases
over [0, n pi) the two agree to machine precision because the variance
model is a low-order trigonometric polynomial.

Unattainable directions are reported as an explicit +inf sentinel (never
by overflow): var_phi at s = 1, and the quantum kappa bound collapsing to
0 at kappa = 1 where the QFI entry diverges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    StateParams,
    SymMatrix2,
    SymMatrix3,
    eval_variance,
    state_covariance,
    variance_partials,
)

__all__ = [
    "BoundVector",
    "fisher_homodyne_discrete",
    "phase_averaged_fisher",
    "crb_homodyne",
    "fit_variance_prediction",
    "fisher_dhd",
    "crb_dhd",
    "qfi_matrix",
    "crb_quantum",
]

INF = float("inf")


@dataclass(frozen=True)
class BoundVector:
    """Per-parameter variance lower bounds normalized to n_samples."""

    var_s: float
    var_kappa: float
    var_phi: float
    n_samples: int

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.var_s, self.var_kappa, self.var_phi)


def fisher_homodyne_discrete(params: StateParams, phases) -> SymMatrix3:
    """Fisher information of homodyne samples at the given phase list.

    F_ab = sum_j (1 / 2 V_j^2) (dV_j/da)(dV_j/db) for a zero-mean Gaussian
    sample of variance V_j per phase.  At s = 1 the phi_s row and column
    vanish identically and the matrix is singular; callers flag that.
    """
    psi = np.asarray(phases, dtype=float)
    if psi.size == 0:
        raise ValueError("phase list must be non-empty")
    v = eval_variance(params, psi)
    g_s, g_k, g_p = variance_partials(params, psi)
    w = 1.0 / (2.0 * v * v)
    return SymMatrix3(
        ss=float(np.sum(w * g_s * g_s)),
        sk=float(np.sum(w * g_s * g_k)),
        sp=float(np.sum(w * g_s * g_p)),
        kk=float(np.sum(w * g_k * g_k)),
        kp=float(np.sum(w * g_k * g_p)),
        pp=float(np.sum(w * g_p * g_p)),
    )


def phase_averaged_fisher(params: StateParams) -> SymMatrix3:
    """Per-sample Fisher information averaged over a uniform phase scan.

    Closed form of (1/pi) integral of the discrete summand over one period:

        F_ss = (1 + s^2) / (2 s^2 (1+s)^2)
        F_sk = -(1 - s) / (2 kappa s (1+s))
        F_kk = 1 / (2 kappa^2)
        F_pp = (1 - s)^2 / s

    phi_s decouples from (s, kappa).
    """
    s, k = params.s, params.kappa
    return SymMatrix3(
        ss=(1.0 + s * s) / (2.0 * s * s * (1.0 + s) ** 2),
        sk=-(1.0 - s) / (2.0 * k * s * (1.0 + s)),
        sp=0.0,
        kk=1.0 / (2.0 * k * k),
        kp=0.0,
        pp=(1.0 - s) ** 2 / s,
    )


def crb_homodyne(params: StateParams, n_samples: int) -> BoundVector:
    """Cramer-Rao bound for a uniform homodyne phase scan of n samples.

    (var_s, var_kappa, var_phi) = (s(1+s)^2, kappa^2(1+s^2)/s, s/(1-s)^2) / n.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s, k = params.s, params.kappa
    var_s = s * (1.0 + s) ** 2 / n_samples
    var_k = k * k * (1.0 + s * s) / (s * n_samples)
    var_p = INF if s == 1.0 else s / ((1.0 - s) ** 2 * n_samples)
    return BoundVector(var_s, var_k, var_p, n_samples)


def fit_variance_prediction(params: StateParams, n_samples: int) -> BoundVector:
    """First-order error-propagation variance of the Fourier fit estimator.

    var_s     = (1 + 6s^2 + 18s^4 + 6s^6 + s^8) / (8 s^2 n)
    var_kappa = kappa^2 (1 - 2s^2 + 18s^4 - 2s^6 + s^8) / (8 s^4 n)
    var_phi   = (5 + 6s^2 + 5s^4) / (4 (1-s^2)^2 n)

    Exceeds the homodyne CRB for every s < 1; equals it at s = 1 in the
    s and kappa components.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s, k = params.s, params.kappa
    s2 = s * s
    s4 = s2 * s2
    s6 = s4 * s2
    s8 = s4 * s4
    var_s = (1.0 + 6.0 * s2 + 18.0 * s4 + 6.0 * s6 + s8) / (8.0 * s2 * n_samples)
    var_k = k * k * (1.0 - 2.0 * s2 + 18.0 * s4 - 2.0 * s6 + s8) / (8.0 * s4 * n_samples)
    if s == 1.0:
        var_p = INF
    else:
        var_p = (5.0 + 6.0 * s2 + 5.0 * s4) / (4.0 * (1.0 - s2) ** 2 * n_samples)
    return BoundVector(var_s, var_k, var_p, n_samples)


def _cov_partials(params: StateParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic derivatives of the state covariance w.r.t. (s, kappa, phi_s)."""
    s, k, phi = params.s, params.kappa, params.phi_s
    c = math.cos(phi)
    sn = math.sin(phi)
    r = np.array([[c, -sn], [sn, c]])
    dr = np.array([[-sn, -c], [c, -sn]])
    d = np.diag([k * s, k / s])
    d_ds = np.diag([k, -k / (s * s)])
    d_dk = np.diag([s, 1.0 / s])
    g_s = r @ d_ds @ r.T
    g_k = r @ d_dk @ r.T
    g_p = dr @ d @ r.T + r @ d @ dr.T
    return g_s, g_k, g_p


def fisher_dhd(params: StateParams) -> SymMatrix3:
    """Per-repetition Fisher information of double-homodyne sampling.

    F_ab = (1/2) Tr[G^-1 dG/da G^-1 dG/db] with G = Gamma_theta + I (the
    beamsplitter adds one unit of vacuum to each quadrature).
    """
    gamma = state_covariance(params).add_identity().as_array()
    gi = np.linalg.inv(gamma)
    parts = _cov_partials(params)
    out = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            out[a, b] = out[b, a] = 0.5 * np.trace(gi @ parts[a] @ gi @ parts[b])
    return SymMatrix3.from_array(out)


def crb_dhd(params: StateParams, n_samples: int) -> BoundVector:
    """Closed-form DHD estimator bound for mu = n_samples repetitions.

    var_s     = (s^4 + 2 kappa s^3 + 2 kappa^2 s^2 + 2 kappa s + 1) / (2 kappa^2 mu)
    var_kappa = (kappa^2 + s^2/2 + 1/(2 s^2) + kappa s + kappa/s) / mu
    var_phi   = s (kappa + s)(1 + kappa s) / (kappa^2 (1 - s^2)^2 mu)
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s, k = params.s, params.kappa
    var_s = (s**4 + 2.0 * k * s**3 + 2.0 * k * k * s * s + 2.0 * k * s + 1.0) / (
        2.0 * k * k * n_samples
    )
    var_k = (k * k + s * s / 2.0 + 1.0 / (2.0 * s * s) + k * s + k / s) / n_samples
    if s == 1.0:
        var_p = INF
    else:
        var_p = s * (k + s) * (1.0 + k * s) / (k * k * (1.0 - s * s) ** 2 * n_samples)
    return BoundVector(var_s, var_k, var_p, n_samples)


def qfi_matrix(params: StateParams) -> SymMatrix3:
    """Quantum Fisher information, diagonal in (s, kappa, phi_s).

    diag(kappa^2 / (s^2 (kappa^2+1)), 1/(kappa^2-1), (1-s^2)^2 kappa^2 / (s^2 (kappa^2+1))).
    The kappa entry diverges at kappa = 1 (pure states pin the purity) and
    is reported as +inf.
    """
    s, k = params.s, params.kappa
    common = k * k / (s * s * (k * k + 1.0))
    qkk = INF if k == 1.0 else 1.0 / (k * k - 1.0)
    return SymMatrix3(
        ss=common,
        sk=0.0,
        sp=0.0,
        kk=qkk,
        kp=0.0,
        pp=(1.0 - s * s) ** 2 * common,
    )


def crb_quantum(params: StateParams, n_samples: int) -> BoundVector:
    """Quantum CRB per parameter: inverse QFI diagonal over n samples.

    Diagonal-inverse is exact here because the QFI is diagonal.  A
    divergent information entry maps to a 0 bound; a vanishing one (the
    angle at s = 1) maps to +inf.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    q = qfi_matrix(params)

    def inv(x: float) -> float:
        if x == 0.0:
            return INF
        if math.isinf(x):
            return 0.0
        return 1.0 / (x * n_samples)

    return BoundVector(inv(q.ss), inv(q.kk), inv(q.pp), n_samples)
