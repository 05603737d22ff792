"""Tamed explicit scheme for the particle system and its deterministic limit.

One step of the scheme reads

    Y(k d) = Y((k-1) d) + tame(b)(Ybar_(k-1), law, theta) * d
             + eps * sigma(Ybar_(k-1), law) * dB_k,

where Ybar_(k-1) is the linear interpolation of the last M+1 observed
points and the law is either the empirical measure of N co-evolving
copies or the Dirac mass along the noise-free limit path.  With eps = 0
and the Dirac-at-self law the same recursion produces the limit path that
anchors all asymptotic quantities.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DivergenceError, GridMismatchError
from .grids import DiscretePath, GridSpec, Segment
from .measure import ParticleEnsemble
from .models import ModelSpec, tame_drift_rows

LAW_PARTICLE = "particle-ensemble"
LAW_DIRAC = "dirac-at-limit-ode"


@dataclass(frozen=True)
class SimConfig:
    """Simulation knobs: noise scale, taming exponent, particles, seed, grid.

    epsilon = 0 selects the noise-free limit regime; the estimation theory
    itself lives in 0 < epsilon < 1.
    """

    epsilon: float
    alpha: float
    n_particles: int
    seed: int
    grid: GridSpec

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError("alpha must lie in (0, 1/2]")
        if self.n_particles < 1:
            raise ValueError("n_particles must be at least 1")


class LawProvider:
    """Per-step laws used by the scheme and by the contrast.

    The law of the interpolated segment is unknown to an observer, so two
    computable stand-ins are offered: the empirical law of a frozen family
    of co-evolved paths, or the Dirac mass along a precomputed noise-free
    limit path.  law_at(k) returns the ensemble at observation time
    k*delta for k = 0..n.
    """

    def __init__(self, mode: str, values: np.ndarray, grid: GridSpec):
        if mode not in (LAW_PARTICLE, LAW_DIRAC):
            raise ValueError(f"unknown law mode {mode!r}")
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[1] != grid.n_nodes:
            raise ValueError("law payload must be stacked paths on the grid")
        self.mode = mode
        self._values = values
        self.grid = grid

    @classmethod
    def from_paths(cls, paths: Sequence[DiscretePath]) -> "LawProvider":
        """Empirical law of a co-evolved particle family."""
        if not paths:
            raise ValueError("need at least one path")
        grid = paths[0].grid
        for p in paths[1:]:
            if p.grid != grid:
                raise GridMismatchError("all paths must share one grid")
        return cls(LAW_PARTICLE, np.stack([p.values for p in paths]), grid)

    @classmethod
    def dirac_at_limit_path(cls, x0: DiscretePath) -> "LawProvider":
        """Dirac mass along the deterministic limit path."""
        return cls(LAW_DIRAC, x0.values[None, :, :], x0.grid)

    @property
    def n_particles(self) -> int:
        return self._values.shape[0]

    def check_grid(self, grid: GridSpec):
        if grid != self.grid:
            raise GridMismatchError("law provider grid differs from the path grid")

    def law_at(self, k: int) -> ParticleEnsemble:
        if not 0 <= k <= self.grid.n:
            raise IndexError(f"law index {k} outside [0, {self.grid.n}]")
        window = self._values[:, k : k + self.grid.M + 1]
        return ParticleEnsemble(window, self.grid.delta, copy=False)


def brownian_increments(
    rng: np.random.Generator, grid: GridSpec, m: int
) -> np.ndarray:
    """n independent N(0, delta I_m) increments, shape (n, m).

    The same generator state yields the same array bit for bit.
    """
    return rng.standard_normal((grid.n, m)) * np.sqrt(grid.delta)


def _check_initial_segment(xi: Segment, grid: GridSpec, d: int):
    if xi.values.shape != (grid.M + 1, d):
        raise ValueError(
            f"initial segment must be sampled on the grid: expected "
            f"({grid.M + 1}, {d}), got {xi.values.shape}"
        )
    if abs(xi.delta - grid.delta) > 1e-12 * grid.delta:
        raise GridMismatchError("initial segment step differs from the grid step")


def tamed_em_path(
    model: ModelSpec,
    xi: Segment,
    theta: np.ndarray,
    cfg: SimConfig,
    law: LawProvider,
    increments: np.ndarray,
) -> DiscretePath:
    """One trajectory of the tamed explicit scheme against a frozen law.

    Step k consumes the interpolated segment at (k-1)*delta, the provider's
    law at the same time, the tamed drift and the k-th noise increment.  A
    non-finite state aborts with DivergenceError naming the step.
    """
    grid = cfg.grid
    _check_initial_segment(xi, grid, model.d)
    law.check_grid(grid)
    dW = np.asarray(increments, dtype=float)
    if dW.shape != (grid.n, model.m):
        raise ValueError(f"increments must have shape ({grid.n}, {model.m})")
    theta = np.asarray(theta, dtype=float)
    M, delta = grid.M, grid.delta

    vals = np.empty((grid.n_nodes, model.d))
    vals[: M + 1] = xi.values
    for k in range(1, grid.n + 1):
        seg = Segment(vals[k - 1 : k + M], delta, copy=False)
        mu = law.law_at(k - 1)
        b = np.asarray(model.drift(seg, mu, theta), dtype=float)
        bt = b / (1.0 + delta**cfg.alpha * np.linalg.norm(b))
        s = np.asarray(model.sigma(seg, mu), dtype=float)
        y = vals[k + M - 1] + bt * delta + cfg.epsilon * (s @ dW[k - 1])
        if not np.isfinite(y).all():
            raise DivergenceError(k)
        vals[k + M] = y
    return DiscretePath(vals, grid, copy=False)


def particle_system(
    model: ModelSpec,
    xi: Segment,
    theta: np.ndarray,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> list[DiscretePath]:
    """N co-evolving copies whose empirical law closes the coefficients.

    All particles start at xi with independent noise streams spawned from
    rng.  The update is synchronous: every particle's step-k coefficients
    see the frozen step-(k-1) ensemble, so the result is independent of
    particle order and of any parallel execution of the per-particle work.
    """
    grid = cfg.grid
    _check_initial_segment(xi, grid, model.d)
    theta = np.asarray(theta, dtype=float)
    N, M, delta = cfg.n_particles, grid.M, grid.delta

    streams = rng.spawn(N)
    dW = np.stack([brownian_increments(g, grid, model.m) for g in streams])

    vals = np.empty((N, grid.n_nodes, model.d))
    vals[:, : M + 1] = xi.values
    for k in range(1, grid.n + 1):
        ens = ParticleEnsemble(vals[:, k - 1 : k + M], delta, copy=False)
        if model.drift_batch is not None:
            B = np.asarray(model.drift_batch(ens.values, ens, theta), dtype=float)
        else:
            B = np.stack(
                [model.drift(ens.segment(i), ens, theta) for i in range(N)]
            ).astype(float)
        Bt = tame_drift_rows(B, delta, cfg.alpha)
        if model.sigma_batch is not None:
            S = np.asarray(model.sigma_batch(ens.values, ens), dtype=float)
        else:
            S = np.stack([model.sigma(ens.segment(i), ens) for i in range(N)]).astype(
                float
            )
        noise = np.einsum("idm,im->id", S, dW[:, k - 1])
        y = vals[:, k + M - 1] + Bt * delta + cfg.epsilon * noise
        if not np.isfinite(y).all():
            raise DivergenceError(k)
        vals[:, k + M] = y
    return [DiscretePath(vals[i], grid) for i in range(N)]


def limit_ode(
    model: ModelSpec,
    xi: Segment,
    theta0: np.ndarray,
    grid: GridSpec,
    alpha: float,
) -> DiscretePath:
    """Noise-free limit path: the tamed recursion with a Dirac-at-self law.

    The law at each step is the point mass at the path's own interpolated
    segment; as delta -> 0 the recursion converges to the deterministic
    path-dependent limit equation driven by the raw drift.
    """
    if not 0.0 < alpha <= 0.5:
        raise ValueError("alpha must lie in (0, 1/2]")
    _check_initial_segment(xi, grid, model.d)
    theta0 = np.asarray(theta0, dtype=float)
    M, delta = grid.M, grid.delta

    vals = np.empty((grid.n_nodes, model.d))
    vals[: M + 1] = xi.values
    for k in range(1, grid.n + 1):
        seg = Segment(vals[k - 1 : k + M], delta, copy=False)
        mu = ParticleEnsemble(seg.values[None], delta, copy=False)
        b = np.asarray(model.drift(seg, mu, theta0), dtype=float)
        bt = b / (1.0 + delta**alpha * np.linalg.norm(b))
        y = vals[k + M - 1] + bt * delta
        if not np.isfinite(y).all():
            raise DivergenceError(k)
        vals[k + M] = y
    return DiscretePath(vals, grid, copy=False)


def paths_to_csv(paths: Sequence[DiscretePath], file) -> None:
    """Write paths as CSV rows t, particle_id, x_1..x_d with one header row."""
    if not paths:
        raise ValueError("need at least one path")
    d = paths[0].d
    grid = paths[0].grid
    times = grid.times()
    writer = csv.writer(file, lineterminator="\n")
    writer.writerow(["t", "particle_id"] + [f"x_{j + 1}" for j in range(d)])
    for pid, path in enumerate(paths):
        for i, t in enumerate(times):
            writer.writerow([repr(float(t)), pid] + [repr(float(v)) for v in path.values[i]])
