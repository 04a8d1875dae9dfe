"""First-order stable-spline kernel prior and lagged-regressor construction.

The prior on each impulse-response coefficient vector is a zero-mean
Gaussian with covariance

    K[t, s] = c * beta ** max(t, s),   t, s = 1..p,

which encodes exponentially decaying, positively correlated coefficients.
Hyperparameters are the scale c, the decay beta, and the innovation
variance sigma2 carried alongside.  Optimization works on the transformed
vector (log c, logit beta), which maps the box constraints to a simple
rectangle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import as_float_vector

__all__ = [
    "Hyperparameters",
    "SCALE_BOUNDS",
    "DECAY_BOUNDS",
    "TRANSFORMED_BOUNDS",
    "CovarianceError",
    "stable_spline_kernel",
    "kernel_cholesky",
    "build_regressors",
    "RegressorPair",
    "OutputCovariance",
    "output_covariance",
    "to_transformed",
    "from_transformed",
    "in_bounds",
]

SCALE_BOUNDS = (1e-6, 1e4)
DECAY_BOUNDS = (0.01, 0.99)


def _logit(x: float) -> float:
    return float(np.log(x) - np.log1p(-x))


# box constraints mapped to (log c, logit beta) coordinates
TRANSFORMED_BOUNDS = np.array(
    [
        [np.log(SCALE_BOUNDS[0]), np.log(SCALE_BOUNDS[1])],
        [_logit(DECAY_BOUNDS[0]), _logit(DECAY_BOUNDS[1])],
    ]
)


class CovarianceError(RuntimeError):
    """Raised when an output covariance factorization fails."""


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel hyperparameters (scale, decay) plus the noise variance.

    ``scale`` must lie in [1e-6, 1e4], ``decay`` in [0.01, 0.99] and
    ``noise_variance`` must be positive.  The noise variance is treated
    as fixed during hyperparameter search.
    """

    scale: float
    decay: float
    noise_variance: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and SCALE_BOUNDS[0] <= self.scale <= SCALE_BOUNDS[1]):
            raise ValueError(
                f"scale must lie in [{SCALE_BOUNDS[0]:g}, {SCALE_BOUNDS[1]:g}], got {self.scale}"
            )
        if not (np.isfinite(self.decay) and DECAY_BOUNDS[0] <= self.decay <= DECAY_BOUNDS[1]):
            raise ValueError(
                f"decay must lie in [{DECAY_BOUNDS[0]}, {DECAY_BOUNDS[1]}], got {self.decay}"
            )
        if not (np.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise ValueError(f"noise_variance must be > 0, got {self.noise_variance}")


def to_transformed(eta: Hyperparameters) -> np.ndarray:
    """Map hyperparameters to the unconstrained-ish (log c, logit beta) pair."""
    return np.array([np.log(eta.scale), _logit(eta.decay)])


def from_transformed(x, noise_variance: float) -> Hyperparameters:
    """Inverse of :func:`to_transformed`; clips to the box to absorb roundoff."""
    x = np.asarray(x, dtype=float)
    scale = float(np.clip(np.exp(x[0]), *SCALE_BOUNDS))
    decay = float(np.clip(1.0 / (1.0 + np.exp(-x[1])), *DECAY_BOUNDS))
    return Hyperparameters(scale=scale, decay=decay, noise_variance=noise_variance)


def in_bounds(x) -> bool:
    """Whether a transformed coordinate pair lies inside the search box."""
    x = np.asarray(x, dtype=float)
    return bool(
        np.all(np.isfinite(x))
        and np.all(x >= TRANSFORMED_BOUNDS[:, 0])
        and np.all(x <= TRANSFORMED_BOUNDS[:, 1])
    )


def stable_spline_kernel(eta: Hyperparameters, p: int) -> np.ndarray:
    """First-order stable-spline kernel matrix K[t, s] = c beta^max(t, s).

    Parameters
    ----------
    eta : Hyperparameters
    p : int
        Impulse-response truncation order, >= 1.

    Returns
    -------
    ndarray, shape (p, p)
        Symmetric positive-definite kernel matrix with indices t, s = 1..p.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    t = np.arange(1, p + 1)
    return eta.scale * eta.decay ** np.maximum(t[:, None], t[None, :]).astype(float)


def kernel_cholesky(eta: Hyperparameters, p: int) -> np.ndarray:
    """Lower Cholesky factor of the stable-spline kernel.

    The kernel is positive definite for any valid hyperparameters; the
    factorization is well conditioned because the diagonal decay matches
    the off-diagonal decay row by row.
    """
    kmat = stable_spline_kernel(eta, p)
    try:
        return np.linalg.cholesky(kmat)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - PD by construction
        raise CovarianceError(f"kernel factorization failed: {exc}") from exc


@dataclass(frozen=True, eq=False)
class RegressorPair:
    """Lagged-output and lagged-input regressor matrices.

    Row t of ``output_lags`` holds [y(t-1), ..., y(t-p)] and row t of
    ``input_lags`` holds [u(t-1), ..., u(t-p)], with zero pre-samples, so
    the one-step predictions are ``output_lags @ f + input_lags @ g``.
    """

    output_lags: np.ndarray
    input_lags: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.output_lags, dtype=float)
        b = np.asarray(self.input_lags, dtype=float)
        if a.shape != b.shape or a.ndim != 2:
            raise ValueError("output_lags and input_lags must share a 2-D shape")
        object.__setattr__(self, "output_lags", a)
        object.__setattr__(self, "input_lags", b)

    @property
    def n_samples(self) -> int:
        return self.output_lags.shape[0]

    @property
    def p(self) -> int:
        return self.output_lags.shape[1]

    def stacked(self) -> np.ndarray:
        """The (T, 2p) matrix [output_lags, input_lags]."""
        return np.hstack([self.output_lags, self.input_lags])


def _lag_matrix(x: np.ndarray, p: int) -> np.ndarray:
    # row t: [x(t-1), ..., x(t-p)] with zeros before the first sample
    return scipy.linalg.toeplitz(np.concatenate(([0.0], x[:-1])), np.zeros(p))


def build_regressors(y, u, p: int) -> RegressorPair:
    """Build lagged regressor matrices for a SISO record.

    Parameters
    ----------
    y, u : array_like
        Output and input sequences of equal length T.
    p : int
        Number of lags, 1 <= p < T.
    """
    y = as_float_vector(y, "y")
    u = as_float_vector(u, "u")
    if y.size != u.size:
        raise ValueError("y and u must have equal length")
    if not 1 <= p < y.size:
        raise ValueError(f"p must satisfy 1 <= p < {y.size}, got {p}")
    return RegressorPair(output_lags=_lag_matrix(y, p), input_lags=_lag_matrix(u, p))


@dataclass(frozen=True, eq=False)
class OutputCovariance:
    """Dense output covariance with a cached Cholesky factor."""

    matrix: np.ndarray
    chol: np.ndarray

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        half = scipy.linalg.solve_triangular(self.chol, rhs, lower=True)
        return scipy.linalg.solve_triangular(self.chol.T, half, lower=False)

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))


def output_covariance(eta: Hyperparameters, regressors: RegressorPair) -> OutputCovariance:
    """Marginal covariance of the output under the kernel prior.

    Computes Sigma = A K A' + B K B' + sigma2 I where A and B are the
    lagged regressor matrices.  Raises :class:`CovarianceError` if the
    result is not numerically positive definite.
    """
    eta_k = stable_spline_kernel(eta, regressors.p)
    a = regressors.output_lags
    b = regressors.input_lags
    sigma = a @ eta_k @ a.T + b @ eta_k @ b.T
    sigma[np.diag_indices_from(sigma)] += eta.noise_variance
    sigma = 0.5 * (sigma + sigma.T)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError(f"output covariance is not positive definite: {exc}") from exc
    return OutputCovariance(matrix=sigma, chol=chol)
