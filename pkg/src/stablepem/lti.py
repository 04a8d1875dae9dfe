"""Polynomials, discrete-time transfer models, and stability checks.

All polynomials in this module are stored in ascending powers of z^{-1},
so ``coeffs = [c0, c1, ..., cd]`` represents

    P(z) = c0 + c1 z^{-1} + ... + cd z^{-d}.

The roots of such a polynomial are defined as the roots of the associated
z-form polynomial ``c0 z^d + c1 z^{d-1} + ... + cd``.  A one-step
predictor with coefficient vectors ``f`` and ``g`` is stable (as a forward
model) when the polynomial ``A(z) = z^p - f1 z^{p-1} - ... - fp`` has all
roots inside the open unit disc, i.e. spectral radius below one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

from ._validation import as_float_vector

__all__ = [
    "Polynomial",
    "PredictorEstimate",
    "ForwardModel",
    "ArmaxModel",
    "RootFindingError",
    "poly_roots",
    "companion",
    "spectral_radius",
    "is_schur_stable",
    "schur_stable_batch",
    "predictor_to_forward",
    "forward_to_predictor",
    "simulate_armax",
    "one_step_predictions",
    "armax_impulse_responses",
]


class RootFindingError(RuntimeError):
    """Raised when the simultaneous root iteration fails to converge."""


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Immutable polynomial in ascending powers of z^{-1}.

    Trailing zero coefficients are trimmed at construction so that
    ``degree`` equals the index of the last nonzero coefficient.  The all
    zero polynomial is stored as ``[0.0]`` with degree 0.

    Parameters
    ----------
    coeffs : array_like
        Coefficients ``[c0, c1, ..., cd]``.
    monic : bool
        Declare the polynomial monic; requires ``c0 == 1`` exactly.
    """

    coeffs: np.ndarray
    monic: bool = False

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coeffs must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coeffs contains non-finite values")
        nz = np.nonzero(arr)[0]
        arr = arr[: nz[-1] + 1].copy() if nz.size else np.zeros(1)
        if self.monic and arr[0] != 1.0:
            raise ValueError("monic polynomial must have leading coefficient 1")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    @classmethod
    def from_roots(cls, roots, *, monic: bool = True) -> "Polynomial":
        """Monic polynomial with the given z-plane roots."""
        roots = np.atleast_1d(np.asarray(roots, dtype=complex))
        c = np.atleast_1d(np.poly(roots))
        if np.max(np.abs(c.imag)) > 1e-9 * max(1.0, np.max(np.abs(c.real))):
            raise ValueError("roots must come in conjugate pairs")
        return cls(c.real, monic=monic)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.convolve(self.coeffs, other.coeffs),
                          monic=self.monic and other.monic)

    def __call__(self, z):
        """Evaluate ``sum_k c_k z^{-k}`` at scalar or array ``z``."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = 1.0 / z
        return np.polyval(self.coeffs[::-1], w)

    def eval_z(self, z):
        """Evaluate the z-form polynomial ``sum_k c_k z^{d-k}``."""
        return np.polyval(self.coeffs, np.asarray(z, dtype=complex))


@dataclass(frozen=True, eq=False)
class PredictorEstimate:
    """One-step predictor coefficients yhat = F(z) y + G(z) u.

    ``f`` and ``g`` hold the impulse-response coefficients of
    ``F(z) = sum_k f_k z^{-k}`` and ``G(z) = sum_k g_k z^{-k}`` for
    k = 1..p (no direct term).
    """

    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = as_float_vector(self.f, "f")
        g = as_float_vector(self.g, "g")
        if f.size != g.size:
            raise ValueError(f"f and g must have equal length, got {f.size} and {g.size}")
        f.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @property
    def p(self) -> int:
        return self.f.size


@dataclass(frozen=True, eq=False)
class ForwardModel:
    """Truncated impulse responses of the implied forward model.

    ``p_ir`` is the impulse response of P(z) = G/(1 - F) and ``h_ir`` the
    impulse response of H(z) = 1/(1 - F), both truncated to ``length``
    terms.  ``h_ir[0] == 1`` and ``p_ir[0] == 0`` always (one step of
    input delay, monic noise model).
    """

    p_ir: np.ndarray
    h_ir: np.ndarray
    spectral_radius: float

    def __post_init__(self):
        p_ir = as_float_vector(self.p_ir, "p_ir")
        h_ir = as_float_vector(self.h_ir, "h_ir")
        if p_ir.size != h_ir.size:
            raise ValueError("p_ir and h_ir must have equal length")
        if h_ir[0] != 1.0:
            raise ValueError("h_ir must start with 1")
        if p_ir[0] != 0.0:
            raise ValueError("p_ir must start with 0")
        if not (self.spectral_radius >= 0 and np.isfinite(self.spectral_radius)):
            raise ValueError("spectral_radius must be finite and >= 0")
        p_ir.flags.writeable = False
        h_ir.flags.writeable = False
        object.__setattr__(self, "p_ir", p_ir)
        object.__setattr__(self, "h_ir", h_ir)

    @property
    def length(self) -> int:
        return self.p_ir.size

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0


@dataclass(frozen=True, eq=False)
class ArmaxModel:
    """ARMAX system A(z) y = k z^{-1} B(z) u + C(z) e.

    ``a`` and ``c`` are monic; the unit input delay is explicit, so ``b``
    has a nonzero constant term.  ``k_gain`` scales the input channel.
    """

    a: Polynomial
    b: Polynomial
    c: Polynomial
    k_gain: float

    def __post_init__(self):
        if not (self.a.monic and self.c.monic):
            raise ValueError("a and c must be monic")
        if self.b.coeffs[0] == 0.0:
            raise ValueError("b must have a nonzero constant term")
        if not (np.isfinite(self.k_gain) and self.k_gain > 0):
            raise ValueError("k_gain must be finite and > 0")


def _aberth_roots(monic: np.ndarray, max_iter: int, tol: float) -> np.ndarray:
    """Simultaneous Aberth-Ehrlich iteration for a monic z-form polynomial.

    ``monic`` holds ``[1, a1, ..., ad]`` with nonzero constant term.
    Returns all d roots.
    """
    d = monic.size - 1
    if d == 1:
        return np.array([-monic[1]], dtype=complex)
    if d == 2:
        b, c = monic[1], monic[2]
        inner = b * b - 4.0 * c
        if inner < 0:
            # complex pair: return exact conjugates
            r1 = complex(-0.5 * b, 0.5 * np.sqrt(-inner))
            return np.array([r1, np.conj(r1)], dtype=complex)
        disc = np.sqrt(inner)
        # pick the sign that avoids cancellation in -b -/+ disc
        q = -0.5 * (b + disc) if b * disc >= 0 else -0.5 * (b - disc)
        r1 = q
        r2 = c / q if q != 0 else 0.0
        return np.array([r1, r2], dtype=complex)

    deriv = monic[:-1] * np.arange(d, 0, -1)
    # Cauchy bound: every root has modulus below 1 + max |a_k|
    radius = 1.0 + np.max(np.abs(monic[1:]))
    angles = 2.0 * np.pi * (np.arange(d) + 0.5) / d + 0.4
    z = radius * np.exp(1j * angles)

    for _ in range(max_iter):
        pv = np.polyval(monic, z)
        dv = np.polyval(deriv, z)
        dv = np.where(np.abs(dv) < 1e-300, 1e-300, dv)
        w = pv / dv
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        s = inv.sum(axis=1)
        denom = 1.0 - w * s
        denom = np.where(np.abs(denom) < 1e-300, 1e-300, denom)
        step = w / denom
        z = z - step
        if np.all(np.abs(step) <= tol * (1.0 + np.abs(z))):
            break

    # conjugate symmetrization for the real-coefficient input
    order = np.argsort(z.imag, kind="stable")
    z = z[order]
    real_tol = 1e-8 * (1.0 + np.abs(z))
    is_real = np.abs(z.imag) <= real_tol
    z[is_real] = z[is_real].real
    cplx = np.where(~is_real)[0]
    neg = [i for i in cplx if z[i].imag < 0]
    pos = [i for i in cplx if z[i].imag > 0]
    used = set()
    for i in neg:
        best, best_d = None, np.inf
        for j in pos:
            if j in used:
                continue
            dij = abs(z[j] - np.conj(z[i]))
            if dij < best_d:
                best, best_d = j, dij
        if best is not None and best_d <= 1e-6 * (1.0 + abs(z[i])):
            m = 0.5 * (np.conj(z[i]) + z[best])
            z[i], z[best] = np.conj(m), m
            used.add(best)
    return z


def poly_roots(poly: Polynomial, *, max_iter: int = 100, tol: float = 1e-12) -> np.ndarray:
    """All z-plane roots of a polynomial via the Aberth-Ehrlich iteration.

    Roots are returned sorted by modulus then phase.  Conjugate pairs are
    symmetrized exactly.  Raises :class:`RootFindingError` when the final
    scaled residual check fails after the iteration cap.

    Parameters
    ----------
    poly : Polynomial
        Polynomial of degree >= 1 with nonzero leading coefficient.

    Returns
    -------
    ndarray of complex
        The ``poly.degree`` roots of the z-form polynomial.
    """
    if poly.is_zero:
        raise ValueError("degenerate polynomial: all coefficients are zero")
    if poly.degree < 1:
        raise ValueError("polynomial degree must be >= 1")
    if poly.coeffs[0] == 0.0:
        raise ValueError("leading coefficient must be nonzero")

    monic = poly.coeffs / poly.coeffs[0]
    roots = _aberth_roots(monic, max_iter, tol)

    scale = np.maximum(1.0, np.abs(roots)) ** poly.degree
    residual = np.abs(np.polyval(monic, roots)) / scale
    if np.max(residual) > 1e-8 * np.max(np.abs(monic)):
        raise RootFindingError(
            f"root iteration did not converge: max scaled residual "
            f"{np.max(residual):.3e} over {poly.degree} roots"
        )
    order = np.lexsort((np.angle(roots), np.abs(roots)))
    return roots[order]


def companion(f) -> np.ndarray:
    """Companion matrix of A(z) = z^p - f1 z^{p-1} - ... - fp.

    The first row holds ``f`` and the subdiagonal is the identity; its
    eigenvalues are the roots of A.  Used as an independent cross-check
    of the polynomial root finder.
    """
    f = as_float_vector(f, "f")
    p = f.size
    mat = np.zeros((p, p))
    mat[0, :] = f
    if p > 1:
        mat[np.arange(1, p), np.arange(0, p - 1)] = 1.0
    return mat


def spectral_radius(f) -> float:
    """Largest root modulus of A(z) = z^p - f1 z^{p-1} - ... - fp.

    The forward model implied by predictor coefficients ``f`` is stable
    iff this value is below one.  An all-zero ``f`` gives 0.
    """
    f = as_float_vector(f, "f")
    a = Polynomial(np.concatenate(([1.0], -f)))
    if a.degree == 0:
        return 0.0
    return float(np.max(np.abs(poly_roots(a))))


def schur_stable_batch(f_batch: np.ndarray) -> np.ndarray:
    """Vectorized Schur-Cohn stability test for rows of predictor coefficients.

    For each row ``f`` of shape (p,), decides whether all roots of
    ``A(z) = z^p - f1 z^{p-1} - ... - fp`` lie strictly inside the unit
    circle, without computing the roots.  Boundary cases count as
    unstable.

    Parameters
    ----------
    f_batch : ndarray, shape (n, p)

    Returns
    -------
    ndarray of bool, shape (n,)
    """
    f_batch = np.atleast_2d(np.asarray(f_batch, dtype=float))
    n, p = f_batch.shape
    a = np.empty((n, p + 1))
    a[:, 0] = 1.0
    a[:, 1:] = -f_batch
    alive = np.all(np.isfinite(f_batch), axis=1)
    a[~alive] = 0.0
    a[~alive, 0] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for deg in range(p, 0, -1):
            k = a[:, deg].copy()
            ok = alive & np.isfinite(k) & (np.abs(k) < 1.0)
            dead = ~ok
            # park rejected rows at a harmless constant so later vectorized
            # arithmetic cannot overflow or produce NaN on them
            a[dead] = 0.0
            a[dead, 0] = 1.0
            k[dead] = 0.0
            alive = ok
            if not np.any(alive):
                break
            # reduced polynomial a'_j = a_j - k a_{deg-j}, renormalized by
            # a'_0 = 1 - k^2 > 0 so the leading coefficient stays 1
            new = a[:, : deg + 1] - k[:, None] * a[:, deg::-1]
            lead = np.where(ok & np.isfinite(new[:, 0]) & (new[:, 0] > 0), new[:, 0], 1.0)
            a[:, :deg] = new[:, :deg] / lead[:, None]
    return alive


def is_schur_stable(f) -> bool:
    """Schur-Cohn stability of a single predictor coefficient vector."""
    f = as_float_vector(f, "f")
    return bool(schur_stable_batch(f[None, :])[0])


def predictor_to_forward(est: PredictorEstimate, length: int) -> ForwardModel:
    """Expand predictor coefficients into forward impulse responses.

    Computes the first ``length`` impulse-response coefficients of
    P(z) = G(z)/(1 - F(z)) and H(z) = 1/(1 - F(z)) by long division,
    together with the spectral radius of 1 - F.

    Parameters
    ----------
    est : PredictorEstimate
    length : int
        Truncation length of the returned series, >= 1.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    den = np.concatenate(([1.0], -est.f))
    imp = np.zeros(length)
    imp[0] = 1.0
    h_ir = lfilter([1.0], den, imp)
    p_ir = lfilter(np.concatenate(([0.0], est.g)), den, imp)
    if not (np.all(np.isfinite(h_ir)) and np.all(np.isfinite(p_ir))):
        raise ValueError("impulse response expansion overflowed")
    h_ir[0] = 1.0
    p_ir[0] = 0.0
    return ForwardModel(p_ir=p_ir, h_ir=h_ir, spectral_radius=spectral_radius(est.f))


def forward_to_predictor(model: ForwardModel, p: int) -> PredictorEstimate:
    """Recover predictor coefficients from forward impulse responses.

    Inverts the expansion of :func:`predictor_to_forward` through order
    ``p``:  F = 1 - 1/H and G = P/H as truncated power series.  Requires
    ``model.length > p``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if model.length <= p:
        raise ValueError(f"model length {model.length} too short to recover order {p}")
    imp = np.zeros(p + 1)
    imp[0] = 1.0
    hinv = lfilter([1.0], model.h_ir[: p + 1], imp)
    f = -hinv[1:]
    g = lfilter(model.p_ir[: p + 1], model.h_ir[: p + 1], imp)[1:]
    return PredictorEstimate(f=f, g=g)


def simulate_armax(model: ArmaxModel, u, e) -> np.ndarray:
    """Simulate A(z) y = k z^{-1} B(z) u + C(z) e with zero initial state.

    Equivalent to filtering ``u`` through k z^{-1} B/A and ``e`` through
    C/A and summing, which makes the output exactly linear in (u, e).

    Parameters
    ----------
    model : ArmaxModel
    u, e : array_like
        Input and noise sequences of equal length.

    Returns
    -------
    ndarray
        Output sequence of the same length.
    """
    u = as_float_vector(u, "u")
    e = as_float_vector(e, "e")
    if u.size != e.size:
        raise ValueError("u and e must have equal length")
    a = model.a.coeffs
    b_delayed = model.k_gain * np.concatenate(([0.0], model.b.coeffs))
    y = lfilter(b_delayed, a, u) + lfilter(model.c.coeffs, a, e)
    if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 1e150:
        raise OverflowError("simulated output diverged; the model is unstable")
    return y


class PredictionResult(NamedTuple):
    predictions: np.ndarray
    loss: float


def one_step_predictions(est: PredictorEstimate, y, u) -> PredictionResult:
    """One-step-ahead predictions yhat(t) = F(z) y(t) + G(z) u(t).

    Pre-sample values are zero, so ``predictions[0] == 0``.  Also returns
    the squared prediction loss ``sum_t (y(t) - yhat(t))^2``.
    """
    y = as_float_vector(y, "y")
    u = as_float_vector(u, "u")
    if y.size != u.size:
        raise ValueError("y and u must have equal length")
    fk = np.concatenate(([0.0], est.f))
    gk = np.concatenate(([0.0], est.g))
    yhat = lfilter(fk, [1.0], y) + lfilter(gk, [1.0], u)
    loss = float(np.sum((y - yhat) ** 2))
    return PredictionResult(predictions=yhat, loss=loss)


def armax_impulse_responses(model: ArmaxModel, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Impulse responses of the plant k z^{-1} B/A and noise filter C/A.

    Returns the first ``length`` coefficients of each, used as ground
    truth when scoring estimates of the forward model.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    imp = np.zeros(length)
    imp[0] = 1.0
    a = model.a.coeffs
    p_ir = lfilter(model.k_gain * np.concatenate(([0.0], model.b.coeffs)), a, imp)
    h_ir = lfilter(model.c.coeffs, a, imp)
    return p_ir, h_ir
