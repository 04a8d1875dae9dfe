"""Stabilizing projection of predictor coefficients via a Lyapunov LMI.

A coefficient vector f defines the companion matrix Psi(f) with first
row f' and identity subdiagonal; the forward model is stable iff some
P > 0 satisfies P - Psi P Psi' > 0.  With the substitution psi = P f
this becomes linear in (psi, P):

    M(psi, P) = [[P, W], [W', P]] >= margin I,   W = Psi P,

where W has first row psi' and its remaining rows are the first p - 1
rows of P.  The projection minimizes |psi - P f_tilde|^2 subject to
M >= margin I, P >= margin I and Tr P = p, then recovers
f_hat = P^{-1} psi.  The solver is a log-det barrier interior-point
method on the (psi, vech P) variables with the trace equality kept
explicitly in the KKT system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import as_float_vector
from .lti import companion, spectral_radius

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "SdpError",
    "lmi_matrix",
    "solve_sdp",
    "project_stable",
]

_DEFAULT_MARGIN = 1e-6


class SdpError(RuntimeError):
    """Raised when the interior-point solve fails."""


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Projection problem data.

    Parameters
    ----------
    target : ndarray
        The coefficient vector f_tilde to project.
    margin : float
        Cone margin; both M and P must dominate ``margin * I``.
    psi0, p0 : ndarray, optional
        Strictly feasible warm start; defaults to psi = 0 with a graded
        diagonal P (the identity is on the cone boundary and cannot
        start a barrier method).
    """

    target: np.ndarray
    margin: float = _DEFAULT_MARGIN
    psi0: np.ndarray | None = None
    p0: np.ndarray | None = None

    def __post_init__(self):
        target = as_float_vector(self.target, "target")
        if not (np.isfinite(self.margin) and 0 < self.margin < 1):
            raise ValueError(f"margin must lie in (0, 1), got {self.margin}")
        target.flags.writeable = False
        object.__setattr__(self, "target", target)

    @property
    def p(self) -> int:
        return self.target.size


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """Interior-point solution with optimality diagnostics."""

    psi: np.ndarray
    p_matrix: np.ndarray
    objective: float
    gap: float
    newton_iterations: int


def lmi_matrix(psi, p_matrix) -> np.ndarray:
    """Assemble M(psi, P) = [[P, W], [W', P]] with W = Psi(f) P.

    Linear in (psi, P); feasibility of M >= margin I with P >= margin I
    certifies Schur stability of f = P^{-1} psi.
    """
    psi = np.asarray(psi, dtype=float)
    pm = np.asarray(p_matrix, dtype=float)
    p = psi.size
    if pm.shape != (p, p):
        raise ValueError(f"p_matrix must have shape {(p, p)}, got {pm.shape}")
    w = np.empty((p, p))
    w[0] = psi
    w[1:] = pm[: p - 1]
    out = np.empty((2 * p, 2 * p))
    out[:p, :p] = pm
    out[:p, p:] = w
    out[p:, :p] = w.T
    out[p:, p:] = pm
    return out


class _Basis:
    """Per-order constant data for the barrier solver."""

    def __init__(self, p: int):
        self.p = p
        iu = np.triu_indices(p)
        self.iu = iu
        n_psi = p
        n_pp = iu[0].size
        n = n_psi + n_pp
        self.n = n

        d_m = np.zeros((n, 2 * p, 2 * p))
        d_p = np.zeros((n_pp, p, p))
        for j in range(n_psi):
            e = np.zeros(p)
            e[j] = 1.0
            d_m[j] = lmi_matrix(e, np.zeros((p, p)))
        for v in range(n_pp):
            i, j = iu[0][v], iu[1][v]
            basis = np.zeros((p, p))
            basis[i, j] = basis[j, i] = 1.0
            d_m[n_psi + v] = lmi_matrix(np.zeros(p), basis)
            d_p[v] = basis
        self.d_m = d_m
        self.d_p = d_p

        # trace selector: 1 on diagonal P variables
        a = np.zeros(n)
        a[n_psi:][iu[0] == iu[1]] = 1.0
        self.trace_vec = a

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.p
        psi = x[:p]
        pm = np.zeros((p, p))
        pm[self.iu] = x[p:]
        pm = pm + pm.T
        pm[np.diag_indices(p)] *= 0.5
        return psi, pm

    def pack(self, psi: np.ndarray, pm: np.ndarray) -> np.ndarray:
        return np.concatenate([psi, pm[self.iu]])

    def residual_map(self, target: np.ndarray) -> np.ndarray:
        """Matrix R with psi - P target = R x."""
        p, n = self.p, self.n
        r = np.empty((p, n))
        for v in range(n):
            e = np.zeros(n)
            e[v] = 1.0
            psi, pm = self.unpack(e)
            r[:, v] = psi - pm @ target
        return r


_BASIS_CACHE: dict[int, _Basis] = {}


def _basis(p: int) -> _Basis:
    if p not in _BASIS_CACHE:
        _BASIS_CACHE[p] = _Basis(p)
    return _BASIS_CACHE[p]


def _default_start(basis: _Basis) -> np.ndarray:
    # graded diagonal keeps the Lyapunov slack P_t - P_{t-1} uniform;
    # the identity would put M exactly on the cone boundary
    p = basis.p
    d = 1.0 + np.arange(p) / p
    d *= p / d.sum()
    return basis.pack(np.zeros(p), np.diag(d))


def _barrier_state(x, basis, margin):
    """Cholesky factors of the two barrier cones at x, or None if infeasible."""
    psi, pm = basis.unpack(x)
    m = lmi_matrix(psi, pm)
    m[np.diag_indices_from(m)] -= margin
    pmat = pm.copy()
    pmat[np.diag_indices_from(pmat)] -= margin
    try:
        lm = np.linalg.cholesky(0.5 * (m + m.T))
        lp = np.linalg.cholesky(0.5 * (pmat + pmat.T))
    except np.linalg.LinAlgError:
        return None
    return lm, lp


def _batched_congruence(chol: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Rows L^{-1} S_v L^{-T} flattened, for a stack of symmetric S_v."""
    n, m, _ = mats.shape
    b = mats.transpose(1, 0, 2).reshape(m, n * m)
    t1 = scipy.linalg.solve_triangular(chol, b, lower=True)
    t1 = t1.reshape(m, n, m).transpose(2, 1, 0).reshape(m, n * m)
    t2 = scipy.linalg.solve_triangular(chol, t1, lower=True)
    return t2.reshape(m, n, m).transpose(1, 2, 0).reshape(n, m * m)


def solve_sdp(
    problem: SdpProblem,
    *,
    gap_tol: float | None = None,
    mu: float = 30.0,
    newton_cap: int = 80,
    stage_cap: int = 60,
) -> SdpSolution:
    """Solve the stabilizing projection SDP by a barrier interior-point method.

    Follows the central path of

        min t |psi - P f_tilde|^2 - log det(M - margin I)
                                  - log det(P - margin I)
        s.t. Tr P = p

    with Newton steps on (psi, vech P), increasing t by ``mu`` per stage
    until the duality-gap bound 3p/t drops below ``gap_tol``.

    Returns
    -------
    SdpSolution
        Final primal point with the gap bound and Newton step count.
    """
    p = problem.p
    basis = _basis(p)
    target = problem.target
    margin = problem.margin
    if gap_tol is None:
        gap_tol = 1e-7 * (1.0 + float(target @ target))

    r_map = basis.residual_map(target)
    rtr = r_map.T @ r_map
    a_vec = basis.trace_vec
    n = basis.n
    n_psi = p

    if problem.psi0 is not None or problem.p0 is not None:
        if problem.psi0 is None or problem.p0 is None:
            raise ValueError("psi0 and p0 must be given together")
        x = basis.pack(np.asarray(problem.psi0, dtype=float),
                       np.asarray(problem.p0, dtype=float))
        if _barrier_state(x, basis, margin) is None:
            raise SdpError("warm start is not strictly feasible")
    else:
        x = _default_start(basis)

    state = _barrier_state(x, basis, margin)
    if state is None:
        raise SdpError("default start is not strictly feasible")

    def barrier_value(lm, lp):
        return -2.0 * np.sum(np.log(np.diag(lm))) - 2.0 * np.sum(np.log(np.diag(lp)))

    m_total = 3 * p  # cone dimensions: 2p for M, p for P
    t = 1.0
    total_newton = 0

    for stage in range(stage_cap):
        last_stage = m_total / t <= gap_tol
        stage_tol = 1e-9 if last_stage else 1e-6
        for _ in range(newton_cap):
            lm, lp = state
            total_newton += 1
            sm = scipy.linalg.cho_solve((lm, True), np.eye(2 * p))
            sp = scipy.linalg.cho_solve((lp, True), np.eye(p))

            grad = 2.0 * t * (rtr @ x)
            grad -= np.einsum("ab,vab->v", sm, basis.d_m)
            grad[n_psi:] -= np.einsum("ab,vab->v", sp, basis.d_p)

            y_m = _batched_congruence(lm, basis.d_m)
            y_p = _batched_congruence(lp, basis.d_p)
            hess = 2.0 * t * rtr + y_m @ y_m.T
            hess[n_psi:, n_psi:] += y_p @ y_p.T

            # equality-constrained Newton step by range-space elimination on
            # the Jacobi-equilibrated Hessian (the raw Hessian spans ~20
            # orders of magnitude once t is large)
            diag = np.sqrt(np.maximum(np.diag(hess), 1e-300))
            hs = hess / diag[:, None] / diag[None, :]
            chol = None
            for jitter in (0.0, 1e-12, 1e-9, 1e-6):
                try:
                    chol = np.linalg.cholesky(hs + jitter * np.eye(n))
                    break
                except np.linalg.LinAlgError:
                    continue
            if chol is None:
                raise SdpError("Newton system is numerically indefinite")
            a_scaled = a_vec / diag
            z1 = scipy.linalg.cho_solve((chol, True), -grad / diag)
            z2 = scipy.linalg.cho_solve((chol, True), a_scaled)
            nu = (a_scaled @ z1) / (a_scaled @ z2)
            step = (z1 - nu * z2) / diag
            if not np.all(np.isfinite(step)):
                raise SdpError("Newton step is non-finite")

            decrement = float(-grad @ step)
            if decrement <= 2.0 * stage_tol:
                break

            # the quadratic part of the merit difference is expanded
            # analytically: at large t the totals agree to ~10 digits and
            # subtracting them directly would drown the comparison in
            # cancellation noise
            b_cur = barrier_value(lm, lp)
            g_quad = t * float(x @ rtr @ x)
            q_cross = float(x @ rtr @ step)
            q_step = float(step @ rtr @ step)
            slope = float(grad @ step)
            noise = 64.0 * np.finfo(float).eps * (abs(g_quad) + abs(b_cur) + 1.0)
            s = 1.0
            accepted = False
            while s > 1e-13:
                x_try = x + s * step
                trial = _barrier_state(x_try, basis, margin)
                if trial is not None:
                    delta = (
                        t * s * (2.0 * q_cross + s * q_step)
                        + barrier_value(*trial)
                        - b_cur
                    )
                    if delta <= 0.25 * s * slope + noise:
                        accepted = True
                        break
                s *= 0.5
            if not accepted:
                # the step is a descent direction in exact arithmetic, so
                # exhausting the backtracking means the remaining improvement
                # is below the floating point noise floor; the stage is as
                # centered as the arithmetic allows
                break
            x, state = x_try, trial

        if last_stage:
            break
        t *= mu
    else:
        raise SdpError("barrier stage cap exceeded before reaching the gap tolerance")

    psi, pm = basis.unpack(x)
    residual = psi - pm @ target
    return SdpSolution(
        psi=psi,
        p_matrix=pm,
        objective=float(residual @ residual),
        gap=m_total / t,
        newton_iterations=total_newton,
    )


def _stable_with_margin(f: np.ndarray, margin: float) -> bool:
    """Certify margin-feasibility of f itself via its Lyapunov solution."""
    if spectral_radius(f) >= 1.0:
        return False
    psi_mat = companion(f)
    try:
        gram = scipy.linalg.solve_discrete_lyapunov(psi_mat, np.eye(f.size))
    except Exception:
        return False
    trace = np.trace(gram)
    if not (np.isfinite(trace) and trace > 0):
        return False
    pm = gram * (f.size / trace)
    pm = 0.5 * (pm + pm.T)
    m = lmi_matrix(pm @ f, pm)
    try:
        lam_m = np.linalg.eigvalsh(m)[0]
        lam_p = np.linalg.eigvalsh(pm)[0]
    except np.linalg.LinAlgError:
        return False
    return bool(lam_m >= margin and lam_p >= margin)


def project_stable(
    f_tilde,
    *,
    margin: float = _DEFAULT_MARGIN,
    gap_tol: float | None = None,
) -> np.ndarray:
    """Project predictor coefficients onto the stability LMI set.

    Returns coefficients f_hat whose companion matrix is Schur stable.
    When ``f_tilde`` already admits a Lyapunov certificate at the
    requested margin it is returned unchanged; otherwise the projection
    SDP is solved and f_hat = P^{-1} psi recovered.

    Raises
    ------
    SdpError
        If the interior-point solve fails or the recovered P is
        numerically singular (condition number above 1e12).
    """
    f_tilde = as_float_vector(f_tilde, "f_tilde")
    if _stable_with_margin(f_tilde, margin):
        return f_tilde.copy()

    solution = solve_sdp(SdpProblem(target=f_tilde, margin=margin), gap_tol=gap_tol)
    cond = np.linalg.cond(solution.p_matrix)
    if not np.isfinite(cond) or cond > 1e12:
        raise SdpError(f"recovered P is ill conditioned (cond {cond:.3e})")
    f_hat = np.linalg.solve(solution.p_matrix, solution.psi)
    rho = spectral_radius(f_hat)
    if rho >= 1.0:
        raise SdpError(f"projection produced spectral radius {rho:.12f} >= 1")
    return f_hat
