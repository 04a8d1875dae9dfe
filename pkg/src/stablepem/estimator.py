"""Scikit-learn style front end for identification with stabilization.

Wraps the functional pipeline in an estimator with ``fit``, ``predict``
and ``get_params`` so it drops into scikit-learn tooling.  ``fit``
consumes an input series and an output series; ``predict`` simulates
the identified plant response to a fresh input series, which keeps the
prediction a pure function of the features as scikit-learn expects.
One step ahead prediction, which also needs past outputs, is available
separately.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import as_float_vector
from .bayes import Dataset, GramCache, identify
from .lmi import project_stable
from .lti import PredictorEstimate, one_step_predictions, predictor_to_forward
from .mcmc import stabilize_mcmc
from .penalty import stabilize_ml_pf

__all__ = ["PemRegressor"]

_STABILIZERS = (None, "lmi", "ml-pf", "mcmc-mean", "mcmc-map")


class PemRegressor(RegressorMixin, BaseEstimator):
    """Kernel regularized one step predictor with optional stabilization.

    Fits predictor coefficients by empirical Bayes under a first order
    stable spline prior, expands them into the implied forward model,
    and, when that model is unstable and a ``stabilizer`` is selected,
    repairs it before exposing the result.

    Parameters
    ----------
    p : int
        Predictor truncation order.
    stabilizer : {None, "lmi", "ml-pf", "mcmc-mean", "mcmc-map"}
        Repair applied when the identified forward model is unstable.
        None keeps the raw estimate and only reports instability.
    expansion_length : int
        Length of the forward impulse responses kept after fitting.
    seed : int
        Seed for the sampling stabilizers.
    kappa_policy : {"estimate", "unit"}
        Truncation constant handling for the sampling stabilizers.
    n_hyper, burn_in, n_stable, n_components, kappa_draws : int
        Chain and mixture sizes for the sampling stabilizers.

    Attributes
    ----------
    predictor_ : PredictorEstimate or None
        Fitted coefficients; None for "mcmc-mean", whose averaged model
        has no finite order predictor form.
    forward_ : ForwardModel
        Forward model after any stabilization.
    eb_forward_ : ForwardModel
        Raw empirical Bayes forward model before stabilization.
    hyperparameters_ : Hyperparameters
    stabilized_ : bool
        Whether a repair ran.
    diagnostics_ : dict
        Sampler diagnostics when a sampling stabilizer ran, else empty.
    """

    def __init__(
        self,
        p: int = 30,
        stabilizer: str | None = None,
        expansion_length: int = 200,
        seed: int = 0,
        kappa_policy: str = "estimate",
        n_hyper: int = 2000,
        burn_in: int = 2000,
        n_stable: int = 2000,
        n_components: int = 200,
        kappa_draws: int = 2000,
    ):
        self.p = p
        self.stabilizer = stabilizer
        self.expansion_length = expansion_length
        self.seed = seed
        self.kappa_policy = kappa_policy
        self.n_hyper = n_hyper
        self.burn_in = burn_in
        self.n_stable = n_stable
        self.n_components = n_components
        self.kappa_draws = kappa_draws

    def _series(self, x, name: str) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        return as_float_vector(arr, name, min_len=2)

    def fit(self, X, y):
        """Identify the predictor from an input series and output series.

        Parameters
        ----------
        X : array_like of shape (n,) or (n, 1)
            Input series.
        y : array_like of shape (n,)
            Output series.
        """
        if self.stabilizer not in _STABILIZERS:
            raise ValueError(f"stabilizer must be one of {_STABILIZERS}")
        u = self._series(X, "X")
        y = self._series(y, "y")
        data = Dataset(u=u, y=y)
        res = identify(data, self.p, expansion_length=self.expansion_length)
        self.n_features_in_ = 1
        self.hyperparameters_ = res.hyperparameters
        self.eb_forward_ = res.forward
        self.diagnostics_ = {}
        if self.stabilizer is None or res.forward.stable:
            self.predictor_ = res.predictor
            self.forward_ = res.forward
            self.stabilized_ = False
            return self
        gram = GramCache.build(data, self.p)
        if self.stabilizer == "lmi":
            f_hat = project_stable(res.predictor.f)
            self.predictor_ = PredictorEstimate(f=f_hat, g=res.predictor.g)
            self.forward_ = predictor_to_forward(self.predictor_, self.expansion_length)
        elif self.stabilizer == "ml-pf":
            _, est = stabilize_ml_pf(None, res.hyperparameters, gram=gram)
            self.predictor_ = est
            self.forward_ = predictor_to_forward(est, self.expansion_length)
        else:
            out = stabilize_mcmc(
                None,
                res.hyperparameters,
                gram=gram,
                n_hyper=self.n_hyper,
                burn_in=self.burn_in,
                n_stable=self.n_stable,
                n_components=self.n_components,
                kappa_policy=self.kappa_policy,
                kappa_draws=self.kappa_draws,
                expansion_length=self.expansion_length,
                seed=self.seed,
            )
            self.diagnostics_ = dict(out.diagnostics)
            if self.stabilizer == "mcmc-mean":
                self.predictor_ = None
                self.forward_ = out.mean_model
            else:
                self.predictor_ = out.map_predictor
                self.forward_ = out.map_forward
        self.stabilized_ = True
        return self

    def predict(self, X):
        """Simulated plant response to a fresh input series.

        Convolves the input with the fitted plant impulse response, the
        noise free forward simulation of the identified model.
        """
        self._check_fitted()
        u = self._series(X, "X")
        return np.convolve(u, self.forward_.p_ir)[: u.size]

    def predict_one_step(self, u, y):
        """One step ahead predictions from joint input and output history.

        Requires a fitted predictor form, so it is unavailable after
        "mcmc-mean" stabilization.
        """
        self._check_fitted()
        if self.predictor_ is None:
            raise ValueError(
                "one step prediction needs predictor coefficients; the "
                "averaged stable model does not have them"
            )
        u = self._series(u, "u")
        y = self._series(y, "y")
        return one_step_predictions(self.predictor_, y, u).predictions

    @property
    def spectral_radius_(self) -> float:
        self._check_fitted()
        return self.forward_.spectral_radius

    def _check_fitted(self):
        if not hasattr(self, "forward_"):
            raise RuntimeError("this estimator is not fitted yet; call fit first")
