"""Finite-particle laws on segment space.

A law mu in P2(C) enters the coefficients only through integrals of
segment functionals, so an equal-weight ensemble of N segments is a
complete representation for every quantity the toolkit computes; a Dirac
mass is the N=1 case.  The Wasserstein-2 distance is a diagnostic for
assumption checks and convergence monitoring, not part of the estimator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import CouplingError
from .grids import Segment

#: largest particle count for which the assignment problem is solved exactly
EXACT_ASSIGNMENT_LIMIT = 64


@dataclass(frozen=True)
class ParticleEnsemble:
    """Equal-weight empirical law of N segments sharing one grid.

    values has shape (N, M+1, d); row i is particle i's window.
    """

    values: np.ndarray
    delta: float

    def __init__(self, values, delta: float, *, copy: bool = True):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 3:
            raise ValueError("ensemble values must have shape (N, M+1, d)")
        if arr.shape[0] < 1:
            raise ValueError("an ensemble needs at least one particle")
        if arr.shape[1] < 2:
            raise ValueError("segments need at least two nodes")
        if not np.isfinite(arr).all():
            raise ValueError("ensemble values must be finite")
        if delta <= 0:
            raise ValueError("delta must be positive")
        if copy:
            arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "delta", float(delta))

    @classmethod
    def from_segments(cls, segments: Sequence[Segment]) -> "ParticleEnsemble":
        if not segments:
            raise ValueError("an ensemble needs at least one particle")
        delta = segments[0].delta
        length = segments[0].values.shape[0]
        for seg in segments[1:]:
            if seg.values.shape[0] != length or seg.delta != delta:
                raise ValueError("all particles must share one grid")
        return cls(np.stack([seg.values for seg in segments]), delta)

    @classmethod
    def dirac(cls, seg: Segment) -> "ParticleEnsemble":
        """Point mass at a single segment (the law of a deterministic state)."""
        return cls(seg.values[None, :, :], seg.delta)

    @property
    def n_particles(self) -> int:
        return self.values.shape[0]

    def segment(self, i: int) -> Segment:
        return Segment(self.values[i], self.delta, copy=False)

    def segments(self) -> Iterator[Segment]:
        for i in range(self.n_particles):
            yield self.segment(i)

    def second_moment(self) -> float:
        """Mean over particles of the squared sup norm (finite by invariant)."""
        norms_sq = (self.values**2).sum(axis=2).max(axis=1)
        return float(norms_sq.mean())


def empirical_integral(mu: ParticleEnsemble, f: Callable[[Segment], np.ndarray]):
    """Integral of f against the empirical law: the mean of f over particles."""
    acc = np.stack([np.asarray(f(seg), dtype=float) for seg in mu.segments()])
    return acc.mean(axis=0)


def _cost_matrix(a: ParticleEnsemble, b: ParticleEnsemble) -> np.ndarray:
    # squared sup-norm ground cost; exact at the shared nodes
    diff = a.values[:, None, :, :] - b.values[None, :, :, :]
    norms = np.sqrt((diff**2).sum(axis=3))
    return norms.max(axis=2) ** 2


def _greedy_assignment_cost(cost: np.ndarray) -> float:
    n = cost.shape[0]
    order = np.argsort(cost, axis=None)
    rows_free = np.ones(n, dtype=bool)
    cols_free = np.ones(n, dtype=bool)
    total = 0.0
    matched = 0
    for flat in order:
        i, j = divmod(int(flat), n)
        if rows_free[i] and cols_free[j]:
            rows_free[i] = False
            cols_free[j] = False
            total += cost[i, j]
            matched += 1
            if matched == n:
                break
    return total


def w2_empirical(a: ParticleEnsemble, b: ParticleEnsemble, method: str = "auto") -> float:
    """Wasserstein-2 distance between two equal-size empirical laws.

    Ground cost is the sup norm on segments.  With method="exact" (or
    "auto" and N <= EXACT_ASSIGNMENT_LIMIT) the optimal particle matching
    is solved exactly, which is the true W2 between the empirical
    measures; "greedy" returns a cheap upper bound for large N.
    """
    if a.n_particles != b.n_particles:
        raise CouplingError(
            "equal-weight coupling needs equal particle counts: "
            f"{a.n_particles} vs {b.n_particles}"
        )
    if method not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    cost = _cost_matrix(a, b)
    n = a.n_particles
    if method == "greedy" or (method == "auto" and n > EXACT_ASSIGNMENT_LIMIT):
        total = _greedy_assignment_cost(cost)
    else:
        rows, cols = linear_sum_assignment(cost)
        total = float(cost[rows, cols].sum())
    return float(np.sqrt(total / n))
