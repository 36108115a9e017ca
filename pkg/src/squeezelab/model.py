"""Gaussian state parameterization and the quadrature variance model.

Conventions used throughout the package:

* shot-noise units: the vacuum quadrature variance is 1 (the variance
  model evaluates to 1 at s = kappa = 1 for every phase);
* the squeezing angle phi_s lives on [0, pi) because the variance model
  is pi-periodic in it;
* physical states satisfy 0 < s <= 1 and kappa >= 1, but none of the
  functions here hard-enforce that: estimators are allowed to produce
  out-of-domain values and still need variances, covariances and dB
  conversions evaluated at them.  Call ``StateParams.validate`` at
  user-input boundaries instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StateParams",
    "SymMatrix2",
    "SymMatrix3",
    "SingularMatrixError",
    "canonical_angle",
    "angle_distance",
    "eval_variance",
    "variance_partials",
    "state_covariance",
    "squeezing_db",
    "empirical_family",
]


def canonical_angle(phi: float) -> float:
    """Map an angle to the canonical squeezing-angle range [0, pi)."""
    out = math.fmod(float(phi), math.pi)
    if out < 0.0:
        out += math.pi
    # fmod can return exactly pi after the shift when phi is a tiny negative
    if out >= math.pi:
        out -= math.pi
    return out


def angle_distance(a: float, b: float) -> float:
    """Circular distance between two squeezing angles, result in [0, pi/2]."""
    d = math.fmod(a - b, math.pi)
    if d < -math.pi / 2:
        d += math.pi
    elif d > math.pi / 2:
        d -= math.pi
    return abs(d)


@dataclass(frozen=True)
class StateParams:
    """Parameter triple (s, kappa, phi_s) of a zero-mean Gaussian state.

    s is the squeezing ratio, kappa the thermal factor (purity = 1/kappa),
    phi_s the angle of the minimum-variance quadrature.  phi_s is
    canonicalized to [0, pi) on construction; s and kappa are stored as
    given so that estimates outside the physical domain stay visible.
    """

    s: float
    kappa: float
    phi_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "phi_s", canonical_angle(self.phi_s))

    @property
    def is_physical(self) -> bool:
        return 0.0 < self.s <= 1.0 and self.kappa >= 1.0 and math.isfinite(self.s) and math.isfinite(self.kappa)

    @property
    def purity(self) -> float:
        return 1.0 / self.kappa

    def validate(self) -> "StateParams":
        """Raise ValueError unless the triple describes a physical state."""
        if not (math.isfinite(self.s) and math.isfinite(self.kappa)):
            raise ValueError(f"state parameters must be finite, got s={self.s}, kappa={self.kappa}")
        if not 0.0 < self.s <= 1.0:
            raise ValueError(f"squeezing ratio must satisfy 0 < s <= 1, got s={self.s}")
        if self.kappa < 1.0:
            raise ValueError(f"thermal factor must satisfy kappa >= 1, got kappa={self.kappa}")
        return self

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.s, self.kappa, self.phi_s)


def eval_variance(params: StateParams, psi):
    """Quadrature variance at local-oscillator phase psi.

    V(psi) = kappa s cos^2(psi - phi_s) + (kappa/s) sin^2(psi - phi_s).
    Accepts a scalar or an array of phases.
    """
    u = np.asarray(psi, dtype=float) - params.phi_s
    c = np.cos(u)
    sn = np.sin(u)
    v = params.kappa * params.s * c * c + (params.kappa / params.s) * sn * sn
    return float(v) if np.ndim(psi) == 0 else v


def variance_partials(params: StateParams, psi):
    """Analytic partial derivatives (dV/ds, dV/dkappa, dV/dphi_s).

    dV/ds     = kappa [(s^2 - 1) + (s^2 + 1) cos 2u] / (2 s^2)
    dV/dkappa = V / kappa
    dV/dphi_s = kappa (s - 1/s) sin 2u,   u = psi - phi_s
    """
    s, k = params.s, params.kappa
    u = np.asarray(psi, dtype=float) - params.phi_s
    c2 = np.cos(2.0 * u)
    s2 = np.sin(2.0 * u)
    d_s = k * ((s * s - 1.0) + (s * s + 1.0) * c2) / (2.0 * s * s)
    d_k = (s * (1.0 + c2) / 2.0 + (1.0 - c2) / (2.0 * s))
    d_p = k * (s - 1.0 / s) * s2
    if np.ndim(psi) == 0:
        return float(d_s), float(d_k), float(d_p)
    return d_s, d_k, d_p


class SingularMatrixError(ValueError):
    """Raised when a matrix inversion is rejected as numerically singular."""


@dataclass(frozen=True)
class SymMatrix2:
    """Symmetric 2x2 matrix (xx, xp, pp), shot-noise units."""

    xx: float
    xp: float
    pp: float

    def det(self) -> float:
        return self.xx * self.pp - self.xp * self.xp

    def trace(self) -> float:
        return self.xx + self.pp

    def as_array(self) -> np.ndarray:
        return np.array([[self.xx, self.xp], [self.xp, self.pp]], dtype=float)

    def add_identity(self, scale: float = 1.0) -> "SymMatrix2":
        return SymMatrix2(self.xx + scale, self.xp, self.pp + scale)

    def eigensystem(self) -> tuple[float, float, float]:
        """Return (lam_min, lam_max, angle of the lam_min eigenvector mod pi).

        Closed form: lam = mid +- r with mid = (xx+pp)/2 and
        r = hypot((xx-pp)/2, xp).  The major-axis angle is
        (1/2) atan2(2 xp, xx - pp), which stays well conditioned as long
        as the eigenvalues differ; the minor axis sits a quarter turn
        away.  When xp = 0 the axes are the eigenvectors directly and
        the angle is 0 or pi/2.
        """
        mid = 0.5 * (self.xx + self.pp)
        r = math.hypot(0.5 * (self.xx - self.pp), self.xp)
        lam_min = mid - r
        lam_max = mid + r
        if self.xp == 0.0:
            angle = 0.0 if self.xx <= self.pp else 0.5 * math.pi
        else:
            major = 0.5 * math.atan2(2.0 * self.xp, self.xx - self.pp)
            angle = canonical_angle(major + 0.5 * math.pi)
        return lam_min, lam_max, angle

    @staticmethod
    def from_eigensystem(lam_a: float, lam_b: float, angle: float) -> "SymMatrix2":
        """Build R(angle) diag(lam_a, lam_b) R(angle)^T."""
        c = math.cos(angle)
        sn = math.sin(angle)
        return SymMatrix2(
            xx=lam_a * c * c + lam_b * sn * sn,
            xp=(lam_a - lam_b) * c * sn,
            pp=lam_a * sn * sn + lam_b * c * c,
        )


# relative determinant below which the adjugate inverse is rejected
_SINGULAR_REL_DET = 1e-12


@dataclass(frozen=True)
class SymMatrix3:
    """Symmetric 3x3 matrix indexed by parameter order (s, kappa, phi_s).

    Entry names follow the index pair: ss, sk, sp, kk, kp, pp.
    """

    ss: float
    sk: float
    sp: float
    kk: float
    kp: float
    pp: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                [self.ss, self.sk, self.sp],
                [self.sk, self.kk, self.kp],
                [self.sp, self.kp, self.pp],
            ],
            dtype=float,
        )

    @staticmethod
    def from_array(a) -> "SymMatrix3":
        a = np.asarray(a, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"expected a 3x3 array, got shape {a.shape}")
        return SymMatrix3(
            ss=float(a[0, 0]),
            sk=float(0.5 * (a[0, 1] + a[1, 0])),
            sp=float(0.5 * (a[0, 2] + a[2, 0])),
            kk=float(a[1, 1]),
            kp=float(0.5 * (a[1, 2] + a[2, 1])),
            pp=float(a[2, 2]),
        )

    def diag(self) -> tuple[float, float, float]:
        return (self.ss, self.kk, self.pp)

    def det(self) -> float:
        return (
            self.ss * (self.kk * self.pp - self.kp * self.kp)
            - self.sk * (self.sk * self.pp - self.kp * self.sp)
            + self.sp * (self.sk * self.kp - self.kk * self.sp)
        )

    def inverse(self) -> "SymMatrix3":
        """Adjugate-formula inverse with a conditioning guard.

        Rejects |det| <= 1e-12 * scale^3 where scale is the largest entry
        magnitude; a rank-deficient information matrix must surface as a
        flag upstream, never as garbage variances.
        """
        scale = max(
            abs(self.ss), abs(self.sk), abs(self.sp),
            abs(self.kk), abs(self.kp), abs(self.pp),
        )
        d = self.det()
        if scale == 0.0 or not math.isfinite(d) or abs(d) <= _SINGULAR_REL_DET * scale**3:
            raise SingularMatrixError(
                f"matrix is singular at working precision (det={d!r}, scale={scale!r})"
            )
        c_ss = self.kk * self.pp - self.kp * self.kp
        c_sk = -(self.sk * self.pp - self.kp * self.sp)
        c_sp = self.sk * self.kp - self.kk * self.sp
        c_kk = self.ss * self.pp - self.sp * self.sp
        c_kp = -(self.ss * self.kp - self.sk * self.sp)
        c_pp = self.ss * self.kk - self.sk * self.sk
        return SymMatrix3(
            ss=c_ss / d, sk=c_sk / d, sp=c_sp / d,
            kk=c_kk / d, kp=c_kp / d, pp=c_pp / d,
        )

    def is_psd(self, tol: float = 1e-10) -> bool:
        w = np.linalg.eigvalsh(self.as_array())
        bound = tol * max(1.0, float(abs(w).max()))
        return bool(w.min() >= -bound)


def state_covariance(params: StateParams) -> SymMatrix2:
    """Quadrature covariance of the state: R(phi_s) diag(kappa s, kappa/s) R^T."""
    return SymMatrix2.from_eigensystem(
        params.kappa * params.s, params.kappa / params.s, params.phi_s
    )


def squeezing_db(params: StateParams) -> float:
    """Squeezing level L = 10 log10(kappa s) in dB; negative means squeezed."""
    return 10.0 * math.log10(params.kappa * params.s)


def empirical_family(s: float, phi_s: float = 0.0) -> StateParams:
    """State on the empirical kappa = 1/sqrt(s) purity family."""
    if not 0.0 < s <= 1.0:
        raise ValueError(f"family parameter must satisfy 0 < s <= 1, got {s}")
    return StateParams(s=s, kappa=1.0 / math.sqrt(s), phi_s=phi_s)
