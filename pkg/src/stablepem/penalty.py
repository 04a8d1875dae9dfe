"""Marginal-likelihood hyperparameter search with a stability penalty.

The empirical Bayes criterion is augmented with a barrier on the
spectral radius rho_bar(eta) of the posterior-mean predictor,

    J(rho) = (alpha (delta - rho))^(-alpha) - (alpha delta)^(-alpha),

which is zero at rho = 0, increasing, and blows up as rho approaches
delta from below (+inf at and beyond delta).  The outer loop re-centers
delta just above the current spectral radius, so minimizing
NLL(eta) + J(rho_bar(eta)) progressively drags the estimate into the
stable set; when the objective stalls, the barrier is sharpened by
shrinking alpha and delta.  A final refinement with alpha small and
delta = 1 turns the barrier into a hard wall at the stability boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .bayes import Dataset, GramCache, _factorize
from .kernels import Hyperparameters, from_transformed, in_bounds, to_transformed
from .lti import PredictorEstimate, spectral_radius

__all__ = [
    "PenaltyParams",
    "PenaltyStabilizationError",
    "penalty",
    "rho_of_eta",
    "stabilize_ml_pf",
]


class PenaltyStabilizationError(RuntimeError):
    """Raised when the penalized search cannot reach the stable set."""


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty shape and schedule constants.

    ``alpha`` controls the sharpness (smaller alpha flattens the barrier
    away from ``delta`` and steepens the wall), ``delta`` is the blow-up
    point, ``eps`` the relative headroom when re-centering delta, and
    ``d_alpha`` / ``d_delta`` the stall decrements (``d_delta`` is the
    fractional shrink applied to delta).
    """

    alpha: float = 1.0
    delta: float = 2.0
    eps: float = 0.05
    d_alpha: float = 0.1
    d_delta: float = 0.01

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if not (self.d_alpha > 0 and self.d_delta > 0):
            raise ValueError("decrements must be > 0")


def penalty(rho: float, params: PenaltyParams) -> float:
    """Barrier value J(rho); +inf for rho at or beyond params.delta.

    Satisfies J(0) = 0 exactly and is strictly increasing on
    [0, delta).
    """
    if not np.isfinite(rho) or rho >= params.delta:
        return np.inf
    a, d = params.alpha, params.delta
    return float((a * (d - rho)) ** (-a) - (a * d) ** (-a))


def rho_of_eta(
    eta: Hyperparameters,
    data: Dataset | None = None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
) -> float:
    """Spectral radius of the posterior-mean predictor at eta."""
    if gram is None:
        if data is None or p is None:
            raise ValueError("either gram or (data, p) must be provided")
        gram = GramCache.build(data, p)
    mean = _factorize(eta, gram).mean
    return spectral_radius(mean[: gram.p])


# floors for the stall schedule: alpha never sharpens past 0.05 and the
# barrier point never drops below (essentially) the stability boundary
_ALPHA_FLOOR = 0.05
_DELTA_FLOOR = 1.0 + 1e-4


def stabilize_ml_pf(
    data: Dataset | None,
    eta0: Hyperparameters,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    params: PenaltyParams | None = None,
    inner_budget: int = 200,
    outer_cap: int = 50,
    stall_tol: float = 1e-6,
) -> tuple[Hyperparameters, PredictorEstimate]:
    """Penalized marginal-likelihood search for a stable predictor.

    Starting from ``eta0`` (typically the unconstrained optimum with an
    unstable posterior mean), repeatedly minimizes
    NLL(eta) + J(rho_bar(eta)) by Nelder-Mead in transformed
    coordinates.  The barrier point delta starts at rho_bar (1 + eps)
    and only ever moves down: progress re-centers it at the improved
    rho_bar (1 + eps) when that is lower, while a stalled pass
    (improvement below ``stall_tol``) decrements alpha and shrinks
    delta, so the squeeze compounds until the search moves.  When delta
    drops below the current spectral radius, the next pass starts from
    a kernel-scale-shrunk feasible point instead (shrinking c always
    reaches the stable set).  A final pass with alpha = eps and
    delta = 1 enforces a hard wall at the stability boundary.

    Returns
    -------
    (Hyperparameters, PredictorEstimate)
        Stabilized hyperparameters and the posterior-mean predictor at
        them, with spectral radius < 1.

    Raises
    ------
    PenaltyStabilizationError
        If no point below the barrier can be found even at the smallest
        kernel scale, or the final estimate is still unstable.
    """
    if gram is None:
        if data is None or p is None:
            raise ValueError("either gram or (data, p) must be provided")
        gram = GramCache.build(data, p)
    if params is None:
        params = PenaltyParams()
    sigma2 = eta0.noise_variance

    def rho_at(x: np.ndarray) -> float:
        mean = _factorize(from_transformed(x, sigma2), gram).mean
        return spectral_radius(mean[: gram.p])

    def objective(x: np.ndarray, pars: PenaltyParams) -> float:
        if not in_bounds(x):
            return np.inf
        fac = _factorize(from_transformed(x, sigma2), gram)
        return fac.nll + penalty(spectral_radius(fac.mean[: gram.p]), pars)

    def refine(x: np.ndarray, pars: PenaltyParams) -> tuple[np.ndarray, float]:
        res = minimize(
            objective,
            x,
            args=(pars,),
            method="Nelder-Mead",
            options={"xatol": 1e-5, "fatol": 1e-8, "maxfev": inner_budget},
        )
        f_start = objective(x, pars)
        if res.fun <= f_start:
            return np.asarray(res.x), float(res.fun)
        return x, float(f_start)

    def feasible_start(x: np.ndarray, delta: float) -> np.ndarray:
        """A point with rho_bar strictly below delta, found by shrinking c.

        Scaling the kernel down scales the posterior mean toward zero, so
        walking down in log c always reaches the stable set.
        """
        if rho_at(x) <= delta * (1.0 - 1e-4):
            return x
        from .kernels import TRANSFORMED_BOUNDS

        lo = TRANSFORMED_BOUNDS[0, 0]
        x_try = x.copy()
        while x_try[0] > lo:
            x_try = x_try.copy()
            x_try[0] = max(x_try[0] - 0.5, lo)
            if rho_at(x_try) <= delta * (1.0 - 1e-4):
                return x_try
        raise PenaltyStabilizationError(
            "penalty stabilization failed: no feasible start below the barrier"
        )

    x = to_transformed(eta0)
    rho = rho_at(x)
    alpha = params.alpha
    delta = max(rho * (1.0 + params.eps), _DELTA_FLOOR)
    at_floors_stalled = False

    for _ in range(outer_cap):
        if rho < 1.0:
            break
        pars = replace(params, alpha=alpha, delta=delta)
        x_start = feasible_start(x, delta)
        start_val = objective(x_start, pars)
        x, val = refine(x_start, pars)
        rho = rho_at(x)
        if start_val - val < stall_tol:
            # no progress under this barrier: sharpen it; delta is never
            # re-centered upward, so the squeeze compounds across stalls
            stuck = alpha <= _ALPHA_FLOOR and delta <= _DELTA_FLOOR
            if stuck and at_floors_stalled:
                break
            at_floors_stalled = stuck
            alpha = max(alpha - params.d_alpha, _ALPHA_FLOOR)
            delta = max(delta * (1.0 - params.d_delta), _DELTA_FLOOR)
        else:
            at_floors_stalled = False
            delta = min(delta, max(rho * (1.0 + params.eps), _DELTA_FLOOR))

    # final refinement with a hard wall exactly at the stability
    # boundary: any finite objective value implies rho_bar < 1
    final_pars = replace(params, alpha=params.eps, delta=1.0)
    x, _ = refine(feasible_start(x, 1.0), final_pars)

    eta_hat = from_transformed(x, sigma2)
    mean = _factorize(eta_hat, gram).mean
    estimate = PredictorEstimate(f=mean[: gram.p], g=mean[gram.p:])
    rho_final = spectral_radius(estimate.f)
    if rho_final >= 1.0:
        raise PenaltyStabilizationError(
            f"penalty stabilization failed: final spectral radius {rho_final:.6f}"
        )
    return eta_hat, estimate
