"""Classical estimators used as comparison baselines.

* ``lse_drift``: closed-form least-squares estimate of the OU drift.
* ``cqmle_fit``: Cauchy quasi-maximum-likelihood.  Stage A fits (eta,
  epsilon) by treating each increment as Cauchy with location
  -eta x h and scale epsilon h (the small-time limit of heavy-tailed
  increments); stage B recovers nu by 1-D Student-t likelihood over
  unit-time aggregates of the standardized residuals, the only lag at
  which the Student-Levy law has a closed form.
* ``midpoint_predictor``: the training-range midpoint, the accuracy floor
  any learned model must beat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gammaln

from .sde import ParamVector, SdeFamily, Trajectory

_LOG_EPS_FLOOR = -25.0  # log epsilon below this counts as pinned at zero
_NU_SEARCH_RANGE = (2.01, 30.0)


class DegenerateInputError(ValueError):
    """The trajectory carries no usable signal for the estimator."""


@dataclass(frozen=True)
class CqmleResult:
    eta_hat: float
    epsilon_hat: float
    nu_hat: float
    converged: bool
    objective_value: float
    iterations: int
    boundary: bool = False


def lse_drift(traj: Trajectory) -> float:
    """Least-squares drift estimate -sum x_j dx_j / (h sum x_j^2)."""
    x = traj.values
    if x.shape[0] < 3:
        raise ValueError(f"need at least 3 observations, got {x.shape[0]}")
    head = x[:-1]
    denominator = float((head * head).sum())
    if denominator <= 0.0:
        raise DegenerateInputError("all-zero path has no identifiable drift")
    increments = x[1:] - head
    return float(-(head * increments).sum() / (traj.h * denominator))


def _cauchy_negloglik(z: np.ndarray, x_head: np.ndarray, dx: np.ndarray, h: float) -> float:
    eta, log_eps = z
    s = np.exp(np.clip(log_eps, -320.0, 50.0)) * h
    r = dx + eta * x_head * h
    n = dx.shape[0]
    return float(-n * np.log(s / np.pi) + np.log(s * s + r * r).sum())


def _student_negloglik(nu: float, aggregates: np.ndarray) -> float:
    log_norm = gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * np.log(nu * np.pi)
    kernel = -((nu + 1.0) / 2.0) * np.log1p(aggregates ** 2 / nu)
    return float(-(log_norm * aggregates.shape[0] + kernel.sum()))


def _fit_nu(residuals: np.ndarray, h: float) -> float:
    block = max(1, round(1.0 / h))
    n_blocks = residuals.shape[0] // block
    if n_blocks < 1:
        return float("nan")
    aggregates = residuals[: n_blocks * block].reshape(n_blocks, block).sum(axis=1)
    result = minimize_scalar(
        _student_negloglik,
        args=(aggregates,),
        bounds=_NU_SEARCH_RANGE,
        method="bounded",
        options={"xatol": 1e-6},
    )
    return float(result.x)


def cqmle_fit(traj: Trajectory, init: tuple[float, float] | None = None) -> CqmleResult:
    """Cauchy quasi-MLE for (eta, epsilon) plus residual-based nu recovery.

    Stage A runs Nelder-Mead over (eta, log epsilon) from a 5-point
    deterministic multistart; stage B fits nu on unit-time residual
    aggregates.  A scale estimate pinned at the lower bound sets the
    ``boundary`` flag instead of raising.
    """
    x = traj.values
    if x.shape[0] < 10:
        raise ValueError(f"need at least 10 observations, got {x.shape[0]}")
    h = traj.h
    x_head = x[:-1]
    dx = x[1:] - x_head

    try:
        eta_ls = lse_drift(traj)
    except DegenerateInputError:
        eta_ls = 0.0
    scale0 = float(np.median(np.abs(dx + eta_ls * x_head * h)))
    eps0 = max(scale0 / h, 1e-10)
    if init is not None:
        starts = [np.array([init[0], np.log(max(init[1], 1e-10))])]
    else:
        log0 = np.log(eps0)
        starts = [
            np.array([eta_ls, log0]),
            np.array([eta_ls, log0 + np.log(5.0)]),
            np.array([eta_ls, log0 - np.log(5.0)]),
            np.array([0.0, log0]),
            np.array([eta_ls + 1.0, log0]),
        ]
    best = None
    iterations = 0
    for start in starts:
        result = minimize(
            _cauchy_negloglik,
            start,
            args=(x_head, dx, h),
            method="Nelder-Mead",
            options={"maxfev": 2000, "xatol": 1e-8, "fatol": 1e-8},
        )
        iterations += int(result.nfev)
        if best is None or result.fun < best.fun:
            best = result
    eta_hat = float(best.x[0])
    log_eps = float(best.x[1])
    boundary = log_eps <= _LOG_EPS_FLOOR
    epsilon_hat = float(np.exp(log_eps))
    converged = bool(best.success) and not boundary
    if boundary or epsilon_hat <= 0.0:
        nu_hat = float("nan")
    else:
        nu_hat = _fit_nu((dx + eta_hat * x_head * h) / epsilon_hat, h)
    return CqmleResult(
        eta_hat=eta_hat,
        epsilon_hat=epsilon_hat,
        nu_hat=nu_hat,
        converged=converged,
        objective_value=float(-best.fun),
        iterations=iterations,
        boundary=boundary,
    )


def midpoint_predictor(family: SdeFamily) -> ParamVector:
    """Training-range midpoints; the floor a trained estimator must beat."""
    return family.midpoint()
