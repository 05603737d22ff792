"""Coefficient contracts, the taming transform, and the built-in benchmark model.

A model bundles the drift b(segment, law, theta), the diffusion
sigma(segment, law), and the drift's parameter gradient.  The explicit
scheme replaces b by b / (1 + delta^alpha |b|), which keeps one-step
moves bounded by delta^(1-alpha) even for superlinear drifts such as the
cubic benchmark below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import NearSingularDiffusionError
from .grids import Segment, trapezoid_integral
from .measure import ParticleEnsemble

#: condition-number ceiling for inverting sigma sigma*
_COND_LIMIT = 1e12

DriftFn = Callable[[Segment, ParticleEnsemble, np.ndarray], np.ndarray]
SigmaFn = Callable[[Segment, ParticleEnsemble], np.ndarray]
GradFn = Callable[[Segment, ParticleEnsemble, np.ndarray], np.ndarray]
HessFn = Callable[[Segment, ParticleEnsemble, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """Coefficient bundle for a path- and law-dependent model.

    drift returns a (d,) vector, sigma a (d, m) matrix, grad_theta_drift a
    (d, p) matrix.  hess_theta_drift, when present, returns the second
    parameter derivative as a (p, p, d) array H with
    H[k, i, j] = d^2 b_j / d theta_k d theta_i; models that are linear in
    theta may supply an identically-zero hessian and set
    is_linear_in_theta, which unlocks closed forms and fast contrast
    evaluation.  All callables must be pure; they are invoked concurrently.

    drift_batch/sigma_batch are optional vectorized variants taking the
    stacked segment values (N, M+1, d) of a whole ensemble and returning
    (N, d) and (N, d, m); simulation uses them when present.
    """

    d: int
    m: int
    p: int
    drift: DriftFn
    sigma: SigmaFn
    grad_theta_drift: GradFn
    hess_theta_drift: Optional[HessFn] = None
    is_linear_in_theta: bool = False
    drift_batch: Optional[Callable[..., np.ndarray]] = None
    sigma_batch: Optional[Callable[..., np.ndarray]] = None


@dataclass(frozen=True)
class ThetaBox:
    """Axis-aligned open parameter box; optimizers work on its closure."""

    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, lower, upper):
        lo = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("the box must satisfy lower < upper componentwise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def p(self) -> int:
        return self.lower.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, theta, tol: float = 0.0) -> bool:
        t = np.asarray(theta, dtype=float)
        return bool(np.all(t >= self.lower - tol) and np.all(t <= self.upper + tol))

    def clip(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def on_boundary(self, theta, rtol: float = 1e-9) -> bool:
        t = np.asarray(theta, dtype=float)
        tol = rtol * self.width
        return bool(np.any(t <= self.lower + tol) or np.any(t >= self.upper - tol))


def _check_alpha(alpha: float):
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"taming exponent alpha={alpha} outside (0, 1/2]")


def tame_drift(b_val: np.ndarray, delta: float, alpha: float) -> np.ndarray:
    """Tamed drift b / (1 + delta^alpha |b|).

    The output norm is bounded by min(|b|, delta^-alpha) for every input.
    """
    _check_alpha(alpha)
    if delta <= 0:
        raise ValueError("delta must be positive")
    b = np.asarray(b_val, dtype=float)
    return b / (1.0 + delta**alpha * np.linalg.norm(b))


def tame_drift_rows(b: np.ndarray, delta: float, alpha: float) -> np.ndarray:
    """Row-wise taming of stacked drift values (..., d)."""
    _check_alpha(alpha)
    norms = np.sqrt((b**2).sum(axis=-1))
    return b / (1.0 + delta**alpha * norms)[..., None]


def tamed_drift_gradient(
    model: ModelSpec,
    seg: Segment,
    mu: ParticleEnsemble,
    theta: np.ndarray,
    delta: float,
    alpha: float,
) -> np.ndarray:
    """Parameter gradient of the tamed drift, shape (d, p).

    grad(b/(1+delta^a|b|)) = grad_b/(1+delta^a|b|)
                             - delta^a (b b*) grad_b / (|b| (1+delta^a|b|)^2).
    At |b| = 0 the correction term has an O(|b|^2) numerator and is
    continued by 0, so the result equals grad_b exactly there.
    """
    _check_alpha(alpha)
    b = np.asarray(model.drift(seg, mu, theta), dtype=float)
    g = np.asarray(model.grad_theta_drift(seg, mu, theta), dtype=float)
    return _tamed_gradient_from_parts(b, g, delta, alpha)


def _tamed_gradient_from_parts(
    b: np.ndarray, g: np.ndarray, delta: float, alpha: float
) -> np.ndarray:
    nb = np.linalg.norm(b)
    denom = 1.0 + delta**alpha * nb
    out = g / denom
    if nb > 0.0:
        out = out - (delta**alpha / (nb * denom**2)) * np.outer(b, b @ g)
    return out


def tamed_gradient_rows(
    b: np.ndarray, g: np.ndarray, delta: float, alpha: float
) -> np.ndarray:
    """Row-wise tamed gradient for stacked inputs b (n, d), g (n, d, p)."""
    _check_alpha(alpha)
    nb = np.sqrt((b**2).sum(axis=1))
    denom = 1.0 + delta**alpha * nb
    out = g / denom[:, None, None]
    mask = nb > 0.0
    if mask.any():
        coef = np.zeros_like(nb)
        coef[mask] = delta**alpha / (nb[mask] * denom[mask] ** 2)
        bg = np.einsum("nd,ndp->np", b, g)
        out = out - coef[:, None, None] * b[:, :, None] * bg[:, None, :]
    return out


def diffusion_precision(
    model: ModelSpec, seg: Segment, mu: ParticleEnsemble
) -> np.ndarray:
    """Inverse of sigma sigma* at the given state, shape (d, d).

    The inverse is symmetrized by averaging with its transpose.  A
    condition number above 1e12 raises NearSingularDiffusionError rather
    than silently regularizing.
    """
    s = np.asarray(model.sigma(seg, mu), dtype=float)
    cov = s @ s.T
    cond = np.linalg.cond(cov)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise NearSingularDiffusionError(
            f"sigma sigma* has condition number {cond:.3e} (limit {_COND_LIMIT:.0e})"
        )
    inv = np.linalg.inv(cov)
    return 0.5 * (inv + inv.T)


def hess_contract(H: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Contract a (p, p, d) second-derivative block array with a d-vector.

    Column k of the result is H[k] @ B, matching the block product used by
    the curvature correction matrix.
    """
    return np.einsum("kij,j->ik", np.asarray(H, dtype=float), np.asarray(B, dtype=float))


def check_model_gradients(
    model: ModelSpec,
    seg: Segment,
    mu: ParticleEnsemble,
    theta: np.ndarray,
    step: float = 1e-6,
) -> float:
    """Max relative error of grad_theta_drift against central differences."""
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(model.grad_theta_drift(seg, mu, theta), dtype=float)
    fd = np.empty_like(g)
    for j in range(model.p):
        h = step * (1.0 + abs(theta[j]))
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        fd[:, j] = (
            np.asarray(model.drift(seg, mu, tp), dtype=float)
            - np.asarray(model.drift(seg, mu, tm), dtype=float)
        ) / (2.0 * h)
    scale = 1.0 + np.abs(g)
    return float(np.max(np.abs(g - fd) / scale))


# ---------------------------------------------------------------------------
# benchmark model: scalar cubic drift with mean-field path interaction
# ---------------------------------------------------------------------------


def cubic_interaction_kernel(zeta: Segment, zeta_prime: Segment) -> float:
    """Pairwise interaction -z(0)^3 + z(0) + int z + int z' on [-r0, 0].

    Scalar segments only; window integrals use the trapezoid rule, which
    is exact for piecewise-linear segments.
    """
    if zeta.d != 1 or zeta_prime.d != 1:
        raise ValueError("the cubic kernel is defined for scalar segments")
    z0 = float(zeta.values[-1, 0])
    own = -(z0**3) + z0 + float(trapezoid_integral(zeta.values, zeta.delta)[0])
    other = float(trapezoid_integral(zeta_prime.values, zeta_prime.delta)[0])
    return own + other


def _kernel_own_part(values: np.ndarray, delta: float) -> np.ndarray:
    # -z(0)^3 + z(0) + int z, vectorized over stacked segments (..., M+1, 1)
    z0 = values[..., -1, 0]
    return -(z0**3) + z0 + trapezoid_integral(values, delta)[..., 0]


def _law_mean_integral(mu: ParticleEnsemble) -> float:
    return float(trapezoid_integral(mu.values, mu.delta)[:, 0].mean())


def cubic_mean_field_model(r0: float) -> ModelSpec:
    """Scalar benchmark model, linear in the two-dimensional parameter.

    drift(z, mu, theta) = theta_1 + theta_2 * int kernel(z, z') mu(dz'),
    sigma(z) = 1 + int |z|; the law enters only through the mean of the
    particles' window integrals, so all coefficients are O(N) per call.
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")

    def mean_interaction(seg: Segment, mu: ParticleEnsemble) -> float:
        own = float(_kernel_own_part(seg.values, seg.delta))
        return own + _law_mean_integral(mu)

    def drift(seg, mu, theta):
        theta = np.asarray(theta, dtype=float)
        return np.array([theta[0] + theta[1] * mean_interaction(seg, mu)])

    def sigma(seg, mu):
        val = 1.0 + float(trapezoid_integral(np.abs(seg.values), seg.delta)[0])
        return np.array([[val]])

    def grad(seg, mu, theta):
        return np.array([[1.0, mean_interaction(seg, mu)]])

    def hess(seg, mu, theta):
        return np.zeros((2, 2, 1))

    def drift_batch(values, mu, theta):
        theta = np.asarray(theta, dtype=float)
        inter = _kernel_own_part(values, mu.delta) + _law_mean_integral(mu)
        return (theta[0] + theta[1] * inter)[:, None]

    def sigma_batch(values, mu):
        vals = 1.0 + trapezoid_integral(np.abs(values), mu.delta)[:, 0]
        return vals[:, None, None]

    return ModelSpec(
        d=1,
        m=1,
        p=2,
        drift=drift,
        sigma=sigma,
        grad_theta_drift=grad,
        hess_theta_drift=hess,
        is_linear_in_theta=True,
        drift_batch=drift_batch,
        sigma_batch=sigma_batch,
    )
