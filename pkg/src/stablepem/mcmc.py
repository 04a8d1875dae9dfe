"""Sampling from the stability-constrained posterior of the predictor.

The marginal likelihood optimum occasionally implies an unstable forward
model.  The sampling route repairs this at the source: instead of taking
the posterior mean under one hyperparameter point, it samples the joint
posterior of predictor coefficients and hyperparameters restricted to
the Schur-stable set, then reports either the posterior mean of the
forward model or the highest-density stable sample.

The machinery has three layers.  A random walk Metropolis chain explores
the hyperparameter posterior in transformed coordinates, with its step
covariance scaled from the inverse Hessian at the mode.  The retained
hyperparameter samples define a finite Gaussian mixture in two ways at
once: the mixture of conditional posteriors of (f, g) serves as the
independence proposal, and the same components reweighted by estimated
truncation constants give the stability-constrained target up to a
normalizing factor.  An independence Metropolis chain over (f, g) then
draws from the constrained target, rejecting unstable proposals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from ._validation import as_float_vector, check_positive
from .bayes import (
    Dataset,
    GramCache,
    _factorize,
    estimate_noise_variance,
    optimize_hyperparameters,
    _grid_candidates,
)
from .kernels import (
    TRANSFORMED_BOUNDS,
    Hyperparameters,
    from_transformed,
    kernel_cholesky,
    to_transformed,
)
from .lti import (
    ForwardModel,
    PredictorEstimate,
    is_schur_stable,
    predictor_to_forward,
    schur_stable_batch,
)

__all__ = [
    "HyperPrior",
    "HyperChain",
    "StableChain",
    "ProposalMixture",
    "McmcError",
    "posterior_mode_and_hessian",
    "tune_gamma",
    "sample_hyperposterior",
    "estimate_truncation_constant",
    "build_proposal_mixture",
    "eval_proposal_density",
    "sample_proposal",
    "eval_stable_posterior",
    "sample_stable_posterior",
    "mcmc_posterior_mean",
    "mcmc_map",
    "McmcResult",
    "stabilize_mcmc",
    "effective_sample_size",
]


class McmcError(RuntimeError):
    """Raised when a sampling stage cannot produce a usable chain."""


@dataclass(frozen=True)
class HyperPrior:
    """Flat hyperparameter prior over the search box.

    The density is constant in transformed coordinates (log scale,
    logit decay) inside the box and zero outside, so the posterior mode
    coincides with the marginal likelihood optimum.
    """

    bounds: np.ndarray = field(default_factory=lambda: TRANSFORMED_BOUNDS.copy())

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.shape != (2, 2) or not np.all(b[:, 0] < b[:, 1]):
            raise ValueError("bounds must be a (2, 2) array of increasing pairs")
        object.__setattr__(self, "bounds", b)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.bounds[:, 0]) and np.all(x <= self.bounds[:, 1]))

    def log_density(self, x) -> float:
        """Unnormalized log density: 0 inside the box, -inf outside."""
        return 0.0 if self.contains(x) else -np.inf


@dataclass(frozen=True, eq=False)
class HyperChain:
    """Retained hyperparameter samples with the tuning that produced them.

    ``transformed`` holds the post burn-in states, one row per sample,
    in (log c, logit beta) coordinates.  ``mode`` and ``hessian`` are
    the posterior mode and the finite difference Hessian of the negative
    log posterior there; the proposal covariance was ``gamma`` times the
    Hessian inverse.
    """

    transformed: np.ndarray
    mode: Hyperparameters
    hessian: np.ndarray
    gamma: float
    acceptance_rate: float
    burn_in: int

    def __post_init__(self):
        xs = np.atleast_2d(np.asarray(self.transformed, dtype=float))
        if xs.ndim != 2 or xs.shape[1] != 2 or xs.shape[0] < 1:
            raise ValueError("transformed must be an (n, 2) array")
        object.__setattr__(self, "transformed", xs)

    @property
    def n_samples(self) -> int:
        return self.transformed.shape[0]

    @property
    def noise_variance(self) -> float:
        return self.mode.noise_variance

    def samples(self) -> list[Hyperparameters]:
        """Chain states as hyperparameter values."""
        s2 = self.mode.noise_variance
        return [from_transformed(x, s2) for x in self.transformed]


@dataclass(frozen=True, eq=False)
class StableChain:
    """Draws from the stability-constrained predictor posterior.

    Every row of ``samples`` stacks (f, g) for one retained state and
    satisfies the Schur stability test on f.  ``log_ps`` records the
    unnormalized log target at each state, which makes the maximum a
    posteriori pick a lookup rather than a recomputation.
    """

    samples: np.ndarray
    log_ps: np.ndarray
    acceptance_rate: float
    noise_variance: float

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        lp = np.asarray(self.log_ps, dtype=float).ravel()
        if s.shape[0] != lp.shape[0] or s.shape[0] < 1:
            raise ValueError("samples and log_ps must have matching length")
        if s.shape[1] % 2 != 0:
            raise ValueError("each sample must stack two equal length blocks")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "log_ps", lp)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def p(self) -> int:
        return self.samples.shape[1] // 2


def _resolve_gram(data, p, gram):
    if gram is None:
        if data is None or p is None:
            raise ValueError("either gram or (data, p) must be provided")
        gram = GramCache.build(data, p)
    return gram


def _default_log_target(gram, noise_variance, prior):
    def log_target(x: np.ndarray) -> float:
        lp = prior.log_density(x)
        if not np.isfinite(lp):
            return -np.inf
        eta = from_transformed(x, noise_variance)
        return lp - _factorize(eta, gram).nll

    return log_target


def posterior_mode_and_hessian(
    data: Dataset | None,
    prior: HyperPrior | None = None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    eta0: Hyperparameters | None = None,
    objective=None,
    fd_scale: float = 1e-4,
) -> tuple[Hyperparameters, np.ndarray]:
    """Hyperparameter posterior mode and curvature in transformed coordinates.

    Under the flat prior the mode is the marginal likelihood optimum, so
    the search reuses the simplex optimizer (grid seeded when ``eta0``
    is absent).  The Hessian of the negative log posterior is estimated
    by central differences with per-coordinate steps
    ``fd_scale * (1 + |x_i|)``, the evaluation point pulled inside the
    box far enough that every stencil point stays interior.  The result
    is symmetrized and its eigenvalues floored at a small positive
    fraction of the largest, so the inverse always exists.

    Parameters
    ----------
    objective : callable, optional
        Replacement for the negative log posterior on transformed
        coordinates (test seam).  When given, the noise variance of the
        reported mode defaults to 1.
    """
    if prior is None:
        prior = HyperPrior()
    if objective is None:
        gram = _resolve_gram(data, p, gram)
        if eta0 is None:
            if data is None:
                raise ValueError(
                    "eta0 or data is required to fix the noise variance"
                )
            sigma2 = estimate_noise_variance(data, gram.p)
            cands = _grid_candidates()
            values = [_factorize(from_transformed(x, sigma2), gram).nll for x in cands]
            eta0 = from_transformed(cands[int(np.argmin(values))], sigma2)
        sigma2 = eta0.noise_variance

        def objective(x):
            lp = prior.log_density(x)
            if not np.isfinite(lp):
                return np.inf
            return _factorize(from_transformed(x, sigma2), gram).nll - lp

        mode = optimize_hyperparameters(None, eta0, objective=objective)
        x_mode = to_transformed(mode)
    else:
        sigma2 = 1.0 if eta0 is None else eta0.noise_variance
        x0 = to_transformed(eta0) if eta0 is not None else np.mean(prior.bounds, axis=1)
        mode = optimize_hyperparameters(
            None, from_transformed(x0, sigma2), objective=objective
        )
        x_mode = to_transformed(mode)

    h = fd_scale * (1.0 + np.abs(x_mode))
    lo = prior.bounds[:, 0] + 2.0 * h
    hi = prior.bounds[:, 1] - 2.0 * h
    x_c = np.clip(x_mode, lo, hi)

    def f_at(dx0, dx1):
        return objective(x_c + np.array([dx0 * h[0], dx1 * h[1]]))

    f00 = f_at(0, 0)
    hess = np.empty((2, 2))
    hess[0, 0] = (f_at(1, 0) - 2.0 * f00 + f_at(-1, 0)) / h[0] ** 2
    hess[1, 1] = (f_at(0, 1) - 2.0 * f00 + f_at(0, -1)) / h[1] ** 2
    cross = (f_at(1, 1) - f_at(1, -1) - f_at(-1, 1) + f_at(-1, -1)) / (4.0 * h[0] * h[1])
    hess[0, 1] = hess[1, 0] = cross
    if not np.all(np.isfinite(hess)):
        hess = np.eye(2)
    else:
        evals, evecs = np.linalg.eigh(hess)
        top = evals[-1]
        if top <= 0.0:
            hess = np.eye(2)
        else:
            floored = np.maximum(evals, 1e-6 * top)
            hess = (evecs * floored) @ evecs.T
    return mode, hess


def _proposal_chol(hessian: np.ndarray, gamma: float, bounds: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(0.5 * (hessian + hessian.T))
    # curvature flatter than the box means the box is the binding width;
    # floor the eigenvalues so unit gamma steps stay on the box scale
    diag = float(np.linalg.norm(bounds[:, 1] - bounds[:, 0]))
    floor = max((2.0 / diag) ** 2, 1e-12 * max(evals[-1], 1.0))
    evals = np.maximum(evals, floor)
    cov = (evecs * (gamma / evals)) @ evecs.T
    return np.linalg.cholesky(0.5 * (cov + cov.T))


def sample_hyperposterior(
    data: Dataset | None,
    prior: HyperPrior | None = None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    n_samples: int = 2000,
    burn_in: int = 2000,
    gamma: float = 1.0,
    seed=0,
    mode: Hyperparameters | None = None,
    hessian: np.ndarray | None = None,
    log_target=None,
) -> HyperChain:
    """Random walk Metropolis chain over transformed hyperparameters.

    Proposals are Gaussian steps with covariance ``gamma`` times the
    inverse of ``hessian``; mode and Hessian are computed on demand when
    not supplied.  The chain starts at the mode, discards ``burn_in``
    states, and reports the acceptance rate over every step taken.

    Parameters
    ----------
    log_target : callable, optional
        Replacement unnormalized log posterior on transformed
        coordinates (test seam).  Requires ``mode`` and ``hessian``
        unless defaults at the box center with identity curvature are
        acceptable.
    """
    if prior is None:
        prior = HyperPrior()
    check_positive(gamma, "gamma")
    if n_samples < 1 or burn_in < 0:
        raise ValueError("n_samples must be >= 1 and burn_in >= 0")
    if log_target is None:
        gram = _resolve_gram(data, p, gram)
        if mode is None or hessian is None:
            mode, hessian = posterior_mode_and_hessian(None, prior, gram=gram)
        log_target = _default_log_target(gram, mode.noise_variance, prior)
    else:
        if mode is None:
            mode = from_transformed(np.mean(prior.bounds, axis=1), 1.0)
        if hessian is None:
            hessian = np.eye(2)

    rng = np.random.default_rng(seed)
    chol = _proposal_chol(hessian, gamma, prior.bounds)
    x = to_transformed(mode)
    lp = log_target(x)
    if not np.isfinite(lp):
        raise McmcError("log target is not finite at the starting mode")

    total = burn_in + n_samples
    kept = np.empty((n_samples, 2))
    accepted = 0
    for step in range(total):
        prop = x + chol @ rng.standard_normal(2)
        lp_prop = log_target(prop)
        if np.log(rng.uniform()) < lp_prop - lp:
            x, lp = prop, lp_prop
            accepted += 1
        if step >= burn_in:
            kept[step - burn_in] = x
    return HyperChain(
        transformed=kept,
        mode=mode,
        hessian=np.asarray(hessian, dtype=float),
        gamma=float(gamma),
        acceptance_rate=accepted / total,
        burn_in=burn_in,
    )


def tune_gamma(
    data: Dataset | None,
    prior: HyperPrior | None = None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    seed=0,
    mode: Hyperparameters | None = None,
    hessian: np.ndarray | None = None,
    log_target=None,
    pilot_steps: int = 500,
    max_pilots: int = 12,
    target: tuple[float, float] = (0.2, 0.4),
    gamma0: float = 1.0,
) -> float:
    """Scale the random walk step size to a workable acceptance rate.

    Runs short pilot chains and doubles ``gamma`` while acceptance is
    above the target band, halves it while below.  Stops at the first
    pilot inside the band; if the budget runs out, returns the value
    whose acceptance came closest and emits a warning.
    """
    if prior is None:
        prior = HyperPrior()
    if log_target is None:
        gram = _resolve_gram(data, p, gram)
        if mode is None or hessian is None:
            mode, hessian = posterior_mode_and_hessian(None, prior, gram=gram)
        log_target = _default_log_target(gram, mode.noise_variance, prior)
    lo, hi = target
    if not 0.0 < lo < hi < 1.0:
        raise ValueError("target must be an increasing pair inside (0, 1)")

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(entropy=seed)
    pilot_seeds = ss.spawn(max_pilots)
    gamma = float(gamma0)
    best_gamma, best_dist = gamma, np.inf
    for k in range(max_pilots):
        chain = sample_hyperposterior(
            None,
            prior,
            n_samples=pilot_steps,
            burn_in=0,
            gamma=gamma,
            seed=pilot_seeds[k],
            mode=mode,
            hessian=hessian,
            log_target=log_target,
        )
        acc = chain.acceptance_rate
        if lo <= acc <= hi:
            return gamma
        dist = lo - acc if acc < lo else acc - hi
        if dist < best_dist:
            best_gamma, best_dist = gamma, dist
        # too many acceptances means the walker is creeping, lengthen steps
        gamma = gamma * 2.0 if acc > hi else gamma / 2.0
    warnings.warn(
        "step size tuning exhausted its pilot budget; using the closest candidate",
        RuntimeWarning,
    )
    return best_gamma


def estimate_truncation_constant(
    eta: Hyperparameters,
    p: int,
    *,
    n_draws: int = 2000,
    seed=0,
) -> float:
    """Monte Carlo estimate of the stable set truncation constant.

    Draws predictor coefficient vectors f from the zero mean Gaussian
    prior with kernel covariance and returns draws / stable count, the
    reciprocal of the estimated prior probability of Schur stability.
    Only f matters here; stability does not constrain g.  Returns +inf
    when no draw is stable, a sentinel the mixture evaluation treats as
    an unusable component.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = np.random.default_rng(seed)
    lk = kernel_cholesky(eta, p)
    draws = rng.standard_normal((n_draws, p)) @ lk.T
    n_stable = int(np.count_nonzero(schur_stable_batch(draws)))
    if n_stable == 0:
        return np.inf
    return n_draws / n_stable


def _robust_cholesky(mat: np.ndarray) -> np.ndarray:
    """Cholesky factor with a diagonal jitter ladder for semidefinite input."""
    sym = 0.5 * (mat + mat.T)
    scale = max(np.trace(sym) / sym.shape[0], 1e-300)
    for jitter in (0.0, 1e-12, 1e-9, 1e-6):
        try:
            return np.linalg.cholesky(sym + (jitter * scale) * np.eye(sym.shape[0]))
        except np.linalg.LinAlgError:
            continue
    evals, evecs = np.linalg.eigh(sym)
    evals = np.maximum(evals, 1e-6 * scale)
    return np.linalg.cholesky((evecs * evals) @ evecs.T)


@dataclass(frozen=True, eq=False)
class ProposalMixture:
    """Gaussian mixture built from thinned hyperparameter samples.

    Component i is the conditional posterior of the stacked coefficients
    (f, g) at hyperparameter sample i.  The same components serve two
    roles.  As an equally weighted mixture they are the independence
    proposal.  Reweighted by the truncation constants ``log_kappa`` and
    the per-component marginal likelihoods ``comp_nll``, and restricted
    to Schur-stable f, they evaluate the stability-constrained target up
    to one overall normalizing factor.  All factors are precomputed so a
    single density evaluation is a batched triangular multiply.
    """

    means: np.ndarray  # (m, 2p)
    cov_chols: np.ndarray  # (m, 2p, 2p) lower
    cov_chol_invs: np.ndarray  # (m, 2p, 2p)
    cov_logdets: np.ndarray  # (m,)
    prior_chol_invs: np.ndarray  # (m, p, p)
    prior_logdets: np.ndarray  # (m,) log det of the p by p kernel
    log_kappa: np.ndarray  # (m,) +inf marks a dead component
    comp_nll: np.ndarray  # (m,) negative log marginal likelihood
    noise_variance: float
    phi: np.ndarray  # (T, 2p) stacked regressors
    y: np.ndarray  # (T,)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def p(self) -> int:
        return self.prior_chol_invs.shape[1]

    def log_pdf(self, fg: np.ndarray) -> float:
        """Log density of the equally weighted proposal mixture."""
        fg = np.asarray(fg, dtype=float).ravel()
        d = self.means.shape[1]
        if fg.shape[0] != d:
            raise ValueError(f"expected a vector of length {d}")
        z = np.einsum("mij,mj->mi", self.cov_chol_invs, fg - self.means)
        logs = -0.5 * (np.einsum("mi,mi->m", z, z) + self.cov_logdets + d * _LOG_2PI)
        return float(logsumexp(logs) - np.log(self.n_components))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One draw from the proposal mixture."""
        i = int(rng.integers(self.n_components))
        d = self.means.shape[1]
        return self.means[i] + self.cov_chols[i] @ rng.standard_normal(d)

    def log_stable_posterior(self, fg: np.ndarray) -> float:
        """Unnormalized log density of the stability-constrained target.

        Combines the likelihood of the data at (f, g) with the mixture
        of truncated priors.  Returns -inf when f fails the stability
        test or every live component assigns vanishing mass.
        """
        fg = np.asarray(fg, dtype=float).ravel()
        p = self.p
        if fg.shape[0] != 2 * p:
            raise ValueError(f"expected a vector of length {2 * p}")
        if not is_schur_stable(fg[:p]):
            return -np.inf
        live = np.isfinite(self.log_kappa)
        if not np.any(live):
            return -np.inf
        zf = np.einsum("mij,j->mi", self.prior_chol_invs[live], fg[:p])
        zg = np.einsum("mij,j->mi", self.prior_chol_invs[live], fg[p:])
        log_prior = -0.5 * (
            np.einsum("mi,mi->m", zf, zf)
            + np.einsum("mi,mi->m", zg, zg)
            + 2.0 * self.prior_logdets[live]
            + 2.0 * p * _LOG_2PI
        )
        terms = (
            self.log_kappa[live]
            + log_prior
            + self.comp_nll[live]
        )
        resid = self.y - self.phi @ fg
        t_len = self.y.shape[0]
        s2 = self.noise_variance
        log_lik = -0.5 * (
            t_len * np.log(2.0 * np.pi * s2) + (resid @ resid) / s2
        )
        return float(log_lik + logsumexp(terms) - np.log(self.n_components))


_LOG_2PI = float(np.log(2.0 * np.pi))


def _thin_indices(n: int, m: int) -> np.ndarray:
    if m >= n:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, m)).astype(int))


def build_proposal_mixture(
    chain: HyperChain,
    data: Dataset | None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    n_components: int = 200,
    kappa_policy: str = "estimate",
    kappa_draws: int = 2000,
    kappa_grid: float = 0.01,
    seed=0,
) -> ProposalMixture:
    """Thin a hyperparameter chain into a reusable Gaussian mixture.

    Components are taken at evenly spaced chain positions.  Truncation
    constants are shared between components whose transformed
    coordinates fall in the same ``kappa_grid`` cell: each cell is
    estimated once at its center with a seed derived from ``seed`` and
    the cell index, which keeps the constants reproducible regardless of
    evaluation order.

    Parameters
    ----------
    kappa_policy : {"estimate", "unit"}
        "estimate" computes truncation constants by Monte Carlo;
        "unit" sets them all to one, the approximation that treats the
        constant as flat across components.
    """
    if kappa_policy not in ("estimate", "unit"):
        raise ValueError("kappa_policy must be 'estimate' or 'unit'")
    check_positive(kappa_grid, "kappa_grid")
    gram = _resolve_gram(data, p, gram)
    p = gram.p
    s2 = chain.noise_variance
    idx = _thin_indices(chain.n_samples, n_components)
    xs = chain.transformed[idx]
    m = xs.shape[0]

    means = np.empty((m, 2 * p))
    cov_chols = np.empty((m, 2 * p, 2 * p))
    cov_chol_invs = np.empty_like(cov_chols)
    cov_logdets = np.empty(m)
    prior_chol_invs = np.empty((m, p, p))
    prior_logdets = np.empty(m)
    log_kappa = np.zeros(m)
    comp_nll = np.empty(m)

    kappa_cache: dict[tuple[int, int], float] = {}
    eye = np.eye(2 * p)
    for i, x in enumerate(xs):
        eta = from_transformed(x, s2)
        fac = _factorize(eta, gram)
        means[i] = fac.mean
        fmat = np.zeros((2 * p, 2 * p))
        fmat[:p, :p] = fac.kernel_chol
        fmat[p:, p:] = fac.kernel_chol
        half = scipy.linalg.solve_triangular(fac.cap_chol, fmat.T, lower=True)
        cov = half.T @ half
        lc = _robust_cholesky(cov)
        cov_chols[i] = lc
        cov_chol_invs[i] = scipy.linalg.solve_triangular(lc, eye, lower=True)
        cov_logdets[i] = 2.0 * np.sum(np.log(np.diag(lc)))
        lk = fac.kernel_chol
        prior_chol_invs[i] = scipy.linalg.solve_triangular(lk, np.eye(p), lower=True)
        prior_logdets[i] = 2.0 * np.sum(np.log(np.diag(lk)))
        comp_nll[i] = fac.nll
        if kappa_policy == "estimate":
            cell = (
                int(np.round(x[0] / kappa_grid)),
                int(np.round(x[1] / kappa_grid)),
            )
            if cell not in kappa_cache:
                center = np.array([cell[0] * kappa_grid, cell[1] * kappa_grid])
                # offset the cell indices so the seed entropy stays nonnegative
                cell_seed = np.random.SeedSequence(
                    entropy=(int(seed), cell[0] + (1 << 32), cell[1] + (1 << 32))
                )
                kappa_cache[cell] = estimate_truncation_constant(
                    from_transformed(center, s2), p, n_draws=kappa_draws, seed=cell_seed
                )
            kappa_cache_val = kappa_cache[cell]
            log_kappa[i] = np.log(kappa_cache_val) if np.isfinite(kappa_cache_val) else np.inf

    return ProposalMixture(
        means=means,
        cov_chols=cov_chols,
        cov_chol_invs=cov_chol_invs,
        cov_logdets=cov_logdets,
        prior_chol_invs=prior_chol_invs,
        prior_logdets=prior_logdets,
        log_kappa=log_kappa,
        comp_nll=comp_nll,
        noise_variance=s2,
        phi=gram.regressors.stacked(),
        y=gram.y,
    )


def eval_proposal_density(
    f,
    g,
    chain: HyperChain,
    data: Dataset | None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    mixture: ProposalMixture | None = None,
    **mixture_kwargs,
) -> float:
    """Proposal mixture density at stacked coefficients (f, g).

    Builds the mixture from the chain when one is not supplied, which
    is the slow path; pass a prebuilt ``mixture`` in loops.
    """
    if mixture is None:
        mixture = build_proposal_mixture(chain, data, p, gram=gram, **mixture_kwargs)
    f = as_float_vector(f, "f")
    g = as_float_vector(g, "g")
    return float(np.exp(mixture.log_pdf(np.concatenate([f, g]))))


def sample_proposal(
    chain: HyperChain,
    data: Dataset | None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    seed=0,
    mixture: ProposalMixture | None = None,
    **mixture_kwargs,
) -> np.ndarray:
    """One stacked (f, g) draw from the proposal mixture."""
    if mixture is None:
        mixture = build_proposal_mixture(chain, data, p, gram=gram, **mixture_kwargs)
    return mixture.sample(np.random.default_rng(seed))


def eval_stable_posterior(
    f,
    g,
    chain: HyperChain,
    data: Dataset | None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    mixture: ProposalMixture | None = None,
    **mixture_kwargs,
) -> float:
    """Unnormalized stability-constrained posterior density at (f, g).

    Zero when f is unstable or no mixture component carries usable
    mass.  The value can underflow to zero for strongly unlikely
    coefficients; comparisons should use the log form on the mixture.
    """
    if mixture is None:
        mixture = build_proposal_mixture(chain, data, p, gram=gram, **mixture_kwargs)
    f = as_float_vector(f, "f")
    g = as_float_vector(g, "g")
    log_val = mixture.log_stable_posterior(np.concatenate([f, g]))
    if log_val == -np.inf:
        return 0.0
    with np.errstate(over="ignore"):
        return float(np.exp(log_val))


def sample_stable_posterior(
    chain: HyperChain,
    data: Dataset | None,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    n_samples: int = 2000,
    seed=0,
    mixture: ProposalMixture | None = None,
    max_init_draws: int = 10_000,
    **mixture_kwargs,
) -> StableChain:
    """Independence Metropolis chain over stable predictor coefficients.

    Proposals come from the hyperparameter averaged mixture; a proposal
    with unstable f has zero target density and is always rejected.
    The chain starts from the conditional posterior mean at the chain
    mode, falling back to proposal draws when that mean is unstable.

    Raises
    ------
    McmcError
        When no stable starting point turns up within
        ``max_init_draws`` proposal draws, or the target is degenerate
        at every candidate start.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    gram = _resolve_gram(data, p, gram)
    if mixture is None:
        mixture = build_proposal_mixture(chain, None, gram=gram, **mixture_kwargs)
    p = mixture.p
    rng = np.random.default_rng(seed)

    start = _factorize(chain.mode, gram).mean
    lp_cur = mixture.log_stable_posterior(start)
    draws_used = 0
    while not np.isfinite(lp_cur):
        if draws_used >= max_init_draws:
            raise McmcError(
                "no stable starting point found; the stable region looks "
                "unreachable under the proposal mixture"
            )
        start = mixture.sample(rng)
        lp_cur = mixture.log_stable_posterior(start)
        draws_used += 1

    cur = start
    lq_cur = mixture.log_pdf(cur)
    samples = np.empty((n_samples, 2 * p))
    log_ps = np.empty(n_samples)
    accepted = 0
    for step in range(n_samples):
        prop = mixture.sample(rng)
        lp_prop = mixture.log_stable_posterior(prop)
        if np.isfinite(lp_prop):
            lq_prop = mixture.log_pdf(prop)
            log_alpha = (lp_prop + lq_cur) - (lp_cur + lq_prop)
            if np.log(rng.uniform()) < log_alpha:
                cur, lp_cur, lq_cur = prop, lp_prop, lq_prop
                accepted += 1
        samples[step] = cur
        log_ps[step] = lp_cur
    return StableChain(
        samples=samples,
        log_ps=log_ps,
        acceptance_rate=accepted / n_samples,
        noise_variance=mixture.noise_variance,
    )


def mcmc_posterior_mean(
    stable_chain: StableChain, expansion_length: int = 200
) -> ForwardModel:
    """Posterior mean forward model over the stable chain.

    Expands each distinct retained state into its forward impulse
    responses and averages term by term, weighting by how often the
    state was held.  Every constituent is stable, so the averaged
    responses decay; the reported spectral radius is the largest one
    among the constituents, which bounds every pole of the exact
    averaged transfer function.
    """
    uniq, counts = np.unique(stable_chain.samples, axis=0, return_counts=True)
    p = stable_chain.p
    weights = counts / counts.sum()
    p_ir = np.zeros(expansion_length)
    h_ir = np.zeros(expansion_length)
    rho = 0.0
    for row, w in zip(uniq, weights):
        est = PredictorEstimate(f=row[:p], g=row[p:])
        fwd = predictor_to_forward(est, expansion_length)
        p_ir += w * fwd.p_ir
        h_ir += w * fwd.h_ir
        rho = max(rho, fwd.spectral_radius)
    # every constituent starts with exactly (0, 1); pin the averages so
    # accumulated roundoff in the weights cannot break that contract
    p_ir[0] = 0.0
    h_ir[0] = 1.0
    return ForwardModel(p_ir=p_ir, h_ir=h_ir, spectral_radius=rho)


def mcmc_map(stable_chain: StableChain) -> PredictorEstimate:
    """Highest posterior density retained state, earliest on ties."""
    idx = int(np.argmax(stable_chain.log_ps))
    row = stable_chain.samples[idx]
    p = stable_chain.p
    return PredictorEstimate(f=row[:p], g=row[p:])


@dataclass(frozen=True, eq=False)
class McmcResult:
    """Everything the sampling stabilizer produces for one dataset."""

    mean_model: ForwardModel
    map_predictor: PredictorEstimate
    map_forward: ForwardModel
    hyper_chain: HyperChain
    stable_chain: StableChain
    diagnostics: dict


def stabilize_mcmc(
    data: Dataset | None,
    eta0: Hyperparameters,
    p: int | None = None,
    *,
    gram: GramCache | None = None,
    prior: HyperPrior | None = None,
    n_hyper: int = 2000,
    burn_in: int = 2000,
    n_stable: int = 2000,
    n_components: int = 200,
    kappa_policy: str = "estimate",
    kappa_draws: int = 2000,
    expansion_length: int = 200,
    seed=0,
) -> McmcResult:
    """Run the full sampling pipeline and report both stable estimates.

    Stages: posterior mode and curvature seeded at ``eta0`` (whose noise
    variance is held fixed throughout), step size tuning, hyperparameter
    chain, proposal mixture construction, stable coefficient chain, and
    finally the posterior mean forward model and the maximum a
    posteriori predictor.  All stage seeds derive from ``seed``, so the
    result is reproducible as a whole.
    """
    gram = _resolve_gram(data, p, gram)
    if prior is None:
        prior = HyperPrior()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(entropy=seed)
    s_tune, s_hyper, s_kappa, s_stable = ss.spawn(4)
    mode, hessian = posterior_mode_and_hessian(None, prior, gram=gram, eta0=eta0)
    gamma = tune_gamma(
        None, prior, gram=gram, mode=mode, hessian=hessian, seed=s_tune
    )
    chain = sample_hyperposterior(
        None,
        prior,
        gram=gram,
        mode=mode,
        hessian=hessian,
        gamma=gamma,
        seed=s_hyper,
        n_samples=n_hyper,
        burn_in=burn_in,
    )
    mixture = build_proposal_mixture(
        chain,
        None,
        gram=gram,
        n_components=n_components,
        kappa_policy=kappa_policy,
        kappa_draws=kappa_draws,
        seed=int(s_kappa.generate_state(1)[0]),
    )
    stable = sample_stable_posterior(
        chain, None, gram=gram, mixture=mixture, n_samples=n_stable, seed=s_stable
    )
    mean_model = mcmc_posterior_mean(stable, expansion_length)
    map_predictor = mcmc_map(stable)
    map_forward = predictor_to_forward(map_predictor, expansion_length)
    diagnostics = {
        "gamma": chain.gamma,
        "hyper_acceptance": chain.acceptance_rate,
        "stable_acceptance": stable.acceptance_rate,
        "hyper_ess": min(
            effective_sample_size(chain.transformed[:, 0]),
            effective_sample_size(chain.transformed[:, 1]),
        ),
        "stable_ess_log_density": effective_sample_size(stable.log_ps),
        "dead_components": int(np.sum(~np.isfinite(mixture.log_kappa))),
    }
    return McmcResult(
        mean_model=mean_model,
        map_predictor=map_predictor,
        map_forward=map_forward,
        hyper_chain=chain,
        stable_chain=stable,
        diagnostics=diagnostics,
    )


def effective_sample_size(values) -> float:
    """Effective sample size of a scalar chain.

    Uses the initial positive sequence estimator: autocovariances are
    summed in adjacent pairs and accumulation stops at the first
    nonpositive pair, which is the standard conservative truncation for
    reversible chains.  The result is clipped to [1, n].
    """
    v = np.asarray(values, dtype=float).ravel()
    n = v.shape[0]
    if n < 2:
        return float(n)
    v = v - v.mean()
    var = v @ v / n
    if var <= 0.0:
        return float(n)
    # autocovariance via FFT with zero padding to the next power of two
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(v, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[:n] / n
    rho = acov / var
    total = 0.0
    k = 1
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        total += pair
        k += 2
    ess = n / (1.0 + 2.0 * total)
    return float(min(max(ess, 1.0), float(n)))
