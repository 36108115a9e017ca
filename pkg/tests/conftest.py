"""Shared test helpers.

moment_matched_scan builds a noiseless scan whose squared samples equal
the model variance exactly at each grid phase.  On an equispaced grid
covering whole periods the empirical Fourier sums then reproduce the
population moments to machine precision, which turns estimator
inversion identities into exact tests.
"""

import numpy as np

from squeezelab import (
    DhdBatch,
    HomodyneScan,
    ScanConfig,
    StateParams,
    eval_variance,
    state_covariance,
)


def moment_matched_scan(params, n_psi=900, n=2):
    cfg = ScanConfig(n_psi=n_psi, n=n)
    phases = cfg.phase_grid()
    samples = np.sqrt(eval_variance(params, phases))
    return HomodyneScan(phases=phases, samples=samples, meta=None)


def grid_points():
    """10 x 10 x 4 parameter grid used by the exactness identities."""
    out = []
    for s in np.linspace(0.08, 0.96, 10):
        for k in np.linspace(1.0, 3.7, 10):
            for phi in (0.0, 0.6, 1.57, 2.9):
                out.append(StateParams(float(s), float(k), float(phi)))
    return out


def exact_moment_batch(params, mu=4000, seed=9):
    """DHD pairs whose raw second moments equal Gamma_theta + I exactly."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(mu, 2))
    raw = z.T @ z / mu
    white = z @ np.linalg.inv(np.linalg.cholesky(raw)).T
    target = state_covariance(params).add_identity().as_array()
    data = white @ np.linalg.cholesky(target).T
    return DhdBatch(q1=data[:, 0], p2=data[:, 1])
