"""Synthetic data generation: scans, DHD batches, drift, raw traces.

Reproducibility contract: every draw comes from a numpy Philox
counter-based generator keyed by (master seed, mixed stream path), so a
given (inputs, seed) pair produces identical data regardless of worker
count, call order, or platform.  Stream paths: scans and DHD batches are
keyed per (seed, trial); trace synthesis per (seed, trial, window).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import StateParams, eval_variance, state_covariance

__all__ = [
    "ConfigMismatchError",
    "ScanConfig",
    "HomodyneScan",
    "DhdBatch",
    "DriftModel",
    "TemporalMode",
    "keyed_generator",
    "sample_homodyne_scan",
    "sample_dhd",
    "simulate_phase_drift",
    "mode_weights",
    "default_temporal_mode",
    "synthesize_trace",
    "apply_temporal_mode",
    "scan_from_trace",
]


class ConfigMismatchError(ValueError):
    """Geometry described by the config does not fit the supplied data."""


_MASK64 = (1 << 64) - 1

# stream domain tags keep scan, DHD and trace draws disjoint even for
# identical (seed, trial) pairs
_STREAM_SCAN = 0x5343414E
_STREAM_DHD = 0x44484400
_STREAM_TRACE = 0x54524143
_STREAM_DRIFT = 0x44524654


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _mix_path(*path: int) -> int:
    h = 0
    for p in path:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


def keyed_generator(seed: int, *path: int) -> np.random.Generator:
    """Philox generator for the stream identified by (seed, path)."""
    key = np.array([int(seed) & _MASK64, _mix_path(*path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ScanConfig:
    """Phase-scan geometry: n_psi samples over [0, n*pi)."""

    n_psi: int = 900
    n: int = 2
    spacing: str = "equispaced"

    def __post_init__(self):
        if self.n_psi < 1:
            raise ValueError(f"n_psi must be >= 1, got {self.n_psi}")
        if self.n < 1:
            raise ValueError(f"phase-range multiplier n must be >= 1, got {self.n}")
        if self.spacing not in ("equispaced", "random"):
            raise ValueError(f"spacing must be 'equispaced' or 'random', got {self.spacing!r}")

    def phase_grid(self) -> np.ndarray:
        """The deterministic equispaced grid (half-open, endpoint excluded)."""
        return np.arange(self.n_psi) * (self.n * math.pi / self.n_psi)


@dataclass(frozen=True)
class HomodyneScan:
    phases: np.ndarray
    samples: np.ndarray
    meta: ScanConfig | None = None

    def __post_init__(self):
        if len(self.phases) != len(self.samples):
            raise ValueError(
                f"phases ({len(self.phases)}) and samples ({len(self.samples)}) differ in length"
            )


@dataclass(frozen=True)
class DhdBatch:
    q1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        if len(self.q1) != len(self.p2):
            raise ValueError(
                f"q1 ({len(self.q1)}) and p2 ({len(self.p2)}) differ in length"
            )

    @property
    def mu(self) -> int:
        return len(self.q1)


def sample_homodyne_scan(
    params: StateParams,
    config: ScanConfig | None = None,
    seed: int = 0,
    trial: int = 0,
) -> HomodyneScan:
    """Draw one phase scan: q_j ~ N(0, V(psi_j)) independently per phase."""
    cfg = config or ScanConfig()
    rng = keyed_generator(seed, _STREAM_SCAN, trial)
    if cfg.spacing == "random":
        # phases drawn first so the sample stream layout is documented
        psi = np.sort(rng.uniform(0.0, cfg.n * math.pi, cfg.n_psi))
    else:
        psi = cfg.phase_grid()
    sigma = np.sqrt(eval_variance(params, psi))
    q = rng.standard_normal(cfg.n_psi) * sigma
    return HomodyneScan(phases=psi, samples=q, meta=cfg)


def sample_dhd(
    params: StateParams,
    mu: int,
    seed: int = 0,
    trial: int = 0,
) -> DhdBatch:
    """Draw mu (q1, p2) pairs with covariance Gamma_theta + I."""
    if mu < 1:
        raise ValueError(f"mu must be >= 1, got {mu}")
    gamma = state_covariance(params).add_identity().as_array()
    chol = np.linalg.cholesky(gamma)
    z = keyed_generator(seed, _STREAM_DHD, trial).standard_normal((mu, 2))
    qp = z @ chol.T
    return DhdBatch(q1=qp[:, 0], p2=qp[:, 1])


@dataclass(frozen=True)
class DriftModel:
    """Phase-drift process for phi_s between scans.

    mean-reverting: stationary AR(1) with autocorrelation exp(-dt/tau)
    and stationary std = amplitude.  random-walk: increments of std
    amplitude*sqrt(dt/tau) per step.
    """

    kind: str = "mean-reverting"
    correlation_time: float = 5e-3
    step_interval: float = 5e-4
    amplitude: float = 0.15

    def __post_init__(self):
        if self.kind not in ("mean-reverting", "random-walk"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.correlation_time <= 0.0:
            raise ValueError("correlation_time must be > 0")
        if self.step_interval <= 0.0:
            raise ValueError("step_interval must be > 0")


def simulate_phase_drift(model: DriftModel, duration: float, seed: int = 0) -> np.ndarray:
    """Angle offset trajectory sampled once per step_interval.

    Returns floor(duration / step_interval) offsets around 0.  The
    mean-reverting kind starts in its stationary distribution; the
    random walk starts at 0.
    """
    if duration <= 0.0:
        raise ValueError("duration must be > 0")
    n = int(duration / model.step_interval)
    if n < 1:
        raise ValueError("duration shorter than one step_interval")
    rng = keyed_generator(seed, _STREAM_DRIFT, 0)
    z = rng.standard_normal(n)
    out = np.empty(n)
    if model.amplitude == 0.0:
        out.fill(0.0)
        return out
    if model.kind == "random-walk":
        step = model.amplitude * math.sqrt(model.step_interval / model.correlation_time)
        out[0] = 0.0
        np.cumsum(step * z[1:], out=out[1:])
        return out
    rho = math.exp(-model.step_interval / model.correlation_time)
    innov = model.amplitude * math.sqrt(1.0 - rho * rho)
    out[0] = model.amplitude * z[0]
    for k in range(1, n):
        out[k] = rho * out[k - 1] + innov * z[k]
    return out


@dataclass(frozen=True)
class TemporalMode:
    """Double-exponential temporal mode on a per-window sample grid.

    Time profile exp(-|t|/tau_m) with tau_m = 1/(pi*fwhm) (Lorentzian
    spectral width), truncated at +-5 tau_m and normalized to unit energy
    on the window so vacuum maps to unit variance.
    """

    shape: str = "double-exponential"
    fwhm_hz: float = 6e6
    sample_rate_hz: float = 1e8
    window_len: int = 55

    def __post_init__(self):
        if self.shape != "double-exponential":
            raise ValueError(f"unknown mode shape {self.shape!r}")
        if self.fwhm_hz <= 0.0 or self.sample_rate_hz <= 0.0:
            raise ValueError("fwhm_hz and sample_rate_hz must be > 0")
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")


def mode_weights(mode: TemporalMode) -> np.ndarray:
    """Unit-energy filter taps for one window, centered on the window."""
    idx = np.arange(mode.window_len, dtype=float)
    t = (idx - 0.5 * (mode.window_len - 1)) / mode.sample_rate_hz
    tau_m = 1.0 / (math.pi * mode.fwhm_hz)
    f = np.exp(-np.abs(t) / tau_m)
    f[np.abs(t) > 5.0 * tau_m] = 0.0
    return f / math.sqrt(float(np.sum(f * f)))


def default_temporal_mode(
    n_psi: int = 900,
    scan_duration: float = 500e-6,
    sample_rate_hz: float = 1e8,
    fwhm_hz: float = 6e6,
) -> tuple[TemporalMode, int]:
    """Experiment-shaped geometry: returns (mode, total trace length).

    window_len = floor(total / n_psi); the remainder at the trace end is
    dead time and gets discarded by the analysis.
    """
    total = int(round(scan_duration * sample_rate_hz))
    wl = total // n_psi
    if wl < 1:
        raise ConfigMismatchError(
            f"trace of {total} samples cannot hold {n_psi} windows"
        )
    mode = TemporalMode(fwhm_hz=fwhm_hz, sample_rate_hz=sample_rate_hz, window_len=wl)
    return mode, total


def synthesize_trace(
    params_per_window,
    mode: TemporalMode,
    config: ScanConfig | None = None,
    seed: int = 0,
    trial: int = 0,
    total_len: int | None = None,
) -> np.ndarray:
    """Raw float32 sample stream whose windowed mode projection is a scan.

    Per window: draw the target quadrature q ~ N(0, V(psi_j, theta_j)),
    then emit x = f*q + (w - f (f.w)) with white unit-variance w, so the
    mode direction carries exactly q and the orthogonal complement stays
    at vacuum.  Tail samples beyond the windows are plain vacuum noise.
    """
    cfg = config or ScanConfig()
    params_list = list(params_per_window)
    if len(params_list) != cfg.n_psi:
        raise ConfigMismatchError(
            f"got {len(params_list)} window params for a {cfg.n_psi}-window scan"
        )
    psi = cfg.phase_grid()
    wl = mode.window_len
    need = wl * cfg.n_psi
    total = need if total_len is None else int(total_len)
    if need > total:
        raise ConfigMismatchError(
            f"{cfg.n_psi} windows of {wl} samples need {need} > trace length {total}"
        )
    f = mode_weights(mode)
    out = np.empty(total)
    for j, theta in enumerate(params_list):
        rng = keyed_generator(seed, _STREAM_TRACE, trial, j)
        qv = rng.standard_normal() * math.sqrt(eval_variance(theta, float(psi[j])))
        w = rng.standard_normal(wl)
        out[j * wl : (j + 1) * wl] = f * qv + (w - f * float(f @ w))
    if total > need:
        tail_rng = keyed_generator(seed, _STREAM_TRACE, trial, cfg.n_psi)
        out[need:] = tail_rng.standard_normal(total - need)
    return out.astype(np.float32)


def apply_temporal_mode(
    trace,
    mode: TemporalMode,
    n_windows: int | None = None,
    offset: int = 0,
) -> np.ndarray:
    """Project consecutive windows of the trace onto the mode function.

    q_j = sum_t f(t) x(offset + j*window_len + t).  Window count defaults
    to as many complete windows as fit; the remainder is discarded.
    """
    x = np.asarray(trace, dtype=float)
    wl = mode.window_len
    avail = (x.size - offset) // wl
    n = avail if n_windows is None else int(n_windows)
    if n < 1 or n > avail:
        raise ConfigMismatchError(
            f"requested {n} windows of {wl} samples at offset {offset}, trace holds {max(avail, 0)}"
        )
    block = x[offset : offset + n * wl].reshape(n, wl)
    return block @ mode_weights(mode)


def scan_from_trace(trace, mode: TemporalMode, config: ScanConfig | None = None) -> HomodyneScan:
    """Windowed mode projection packaged with the scan's phase grid."""
    cfg = config or ScanConfig()
    samples = apply_temporal_mode(trace, mode, n_windows=cfg.n_psi)
    return HomodyneScan(phases=cfg.phase_grid(), samples=samples, meta=cfg)
