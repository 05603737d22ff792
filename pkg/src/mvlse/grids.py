"""Time grids, delay-window segments, and interpolation of discrete paths.

The state consumed by every coefficient is a path segment on the delay
window [-r0, 0], stored at the M+1 grid nodes and extended between nodes
by linear interpolation.  A full trajectory lives on the grid
{-r0, -r0+delta, ..., 0, delta, ..., T} with delta = T/n = r0/M, so all
index arithmetic is integral and n*delta hits T exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import GridMismatchError

_REL_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Coupled time discretization: delta = T/n = r0/M with integer n, M."""

    T: float
    n: int
    r0: float
    M: int
    delta: float

    def __post_init__(self):
        if self.n < 1 or self.M < 1:
            raise GridMismatchError("n and M must be positive integers")
        if not (self.T > 0 and self.r0 > 0 and self.delta > 0):
            raise GridMismatchError("T, r0 and delta must be positive")

    @property
    def n_nodes(self) -> int:
        """Number of grid nodes of a full path, on [-r0, T]."""
        return self.n + self.M + 1

    def times(self) -> np.ndarray:
        """Grid times -r0, ..., 0, ..., T (length n + M + 1)."""
        return (np.arange(self.n_nodes) - self.M) * self.delta

    def segment_times(self) -> np.ndarray:
        """Window times -r0, ..., 0 (length M + 1)."""
        return (np.arange(self.M + 1) - self.M) * self.delta


def make_grid(T: float, n: int, r0: float) -> GridSpec:
    """Build the grid with delta = T/n, requiring r0 to be a multiple of delta.

    r0/delta must be an integer within relative tolerance 1e-12; it is then
    rounded exactly.  A non-commensurable (T, n, r0) raises GridMismatchError.
    """
    if T <= 0 or r0 <= 0:
        raise GridMismatchError("T and r0 must be positive")
    if n < 1:
        raise GridMismatchError("n must be at least 1")
    delta = T / n
    ratio = r0 / delta
    M = round(ratio)
    if M < 1 or abs(ratio - M) > _REL_TOL * max(1.0, abs(ratio)):
        raise GridMismatchError(
            f"delay r0={r0} is not an integer multiple of delta=T/n={delta}"
        )
    return GridSpec(T=float(T), n=int(n), r0=float(r0), M=int(M), delta=delta)


def floor_time(t: float, delta: float) -> float:
    """Largest grid time floor(t/delta)*delta not exceeding t (t >= 0).

    The quotient is nudged by 1e-9 relative before flooring so that exact
    grid points survive the binary representation of t/delta.
    """
    if t < 0 or delta <= 0:
        raise ValueError("floor_time requires t >= 0 and delta > 0")
    q = t / delta
    k = math.floor(q + 1e-9 * (1.0 + abs(q)))
    return k * delta


def _as_points(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("segment/path values must be (length,) or (length, d)")
    return arr


@dataclass(frozen=True)
class Segment:
    """A d-dimensional path on [-r0, 0] stored at M+1 equispaced nodes.

    values[i] is the point at time -r0 + i*delta; index M is time 0.
    Between nodes the segment is the linear interpolation of its values.
    Instances are immutable; the backing array is read-only unless it was
    adopted as a view with copy=False (internal fast path).
    """

    values: np.ndarray
    delta: float

    def __init__(self, values, delta: float, *, copy: bool = True):
        arr = _as_points(values)
        if arr.shape[0] < 2:
            raise ValueError("a segment needs at least two nodes (M >= 1)")
        if not np.isfinite(arr).all():
            raise ValueError("segment values must be finite")
        if delta <= 0:
            raise ValueError("delta must be positive")
        if copy:
            arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "delta", float(delta))

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def r0(self) -> float:
        return self.M * self.delta

    def end_value(self) -> np.ndarray:
        """Value at time 0."""
        return self.values[-1]


def eval_segment(seg: Segment, s: float) -> np.ndarray:
    """Evaluate a segment at s in [-r0, 0] by piecewise-linear interpolation.

    Grid nodes return the stored values exactly.
    """
    r0 = seg.r0
    tol = 1e-12 * max(1.0, r0)
    if s < -r0 - tol or s > tol:
        raise ValueError(f"s={s} outside the segment domain [-{r0}, 0]")
    x = min(max((s + r0) / seg.delta, 0.0), float(seg.M))
    i = min(int(math.floor(x)), seg.M - 1)
    frac = x - i
    if frac == 0.0:
        return seg.values[i].copy()
    return (1.0 - frac) * seg.values[i] + frac * seg.values[i + 1]


def sup_norm(seg: Segment) -> float:
    """Uniform norm over the window: max over nodes of the Euclidean norm.

    Exact for piecewise-linear segments, where the sup sits at a node.
    """
    return float(np.sqrt((seg.values**2).sum(axis=1)).max())


def trapezoid_integral(values: np.ndarray, delta: float) -> np.ndarray:
    """Trapezoid-rule integral over the window axis (second-to-last axis).

    Exact for the piecewise-linear segments the scheme produces.  Accepts
    stacked inputs (..., M+1, d) and integrates each one.
    """
    arr = np.asarray(values, dtype=float)
    s = arr.sum(axis=-2) - 0.5 * (arr[..., 0, :] + arr[..., -1, :])
    return s * delta


def segment_integral(seg: Segment) -> np.ndarray:
    """Trapezoid integral of a segment over [-r0, 0], one value per component."""
    return trapezoid_integral(seg.values, seg.delta)


@dataclass(frozen=True)
class DiscretePath:
    """A trajectory on the full grid [-r0, T]: n + M + 1 nodes.

    values[i] is the point at time (i - M)*delta, so index M is time 0 and
    the first M+1 rows hold the initial segment.
    """

    values: np.ndarray
    grid: GridSpec

    def __init__(self, values, grid: GridSpec, *, copy: bool = True):
        arr = _as_points(values)
        if arr.shape[0] != grid.n_nodes:
            raise ValueError(
                f"path needs {grid.n_nodes} nodes for this grid, got {arr.shape[0]}"
            )
        if not np.isfinite(arr).all():
            raise ValueError("path values must be finite")
        if copy:
            arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "grid", grid)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def state(self, k: int) -> np.ndarray:
        """Value at time k*delta, for k in -M..n."""
        if not -self.grid.M <= k <= self.grid.n:
            raise IndexError(f"time index {k} outside [-{self.grid.M}, {self.grid.n}]")
        return self.values[k + self.grid.M]

    def increments(self) -> np.ndarray:
        """First differences over [0, T]: row k-1 is Y(k*delta)-Y((k-1)*delta)."""
        M = self.grid.M
        return self.values[M + 1 :] - self.values[M:-1]

    def segment_at(self, k: int) -> Segment:
        return interp_segment(self, k)


def interp_segment(path: DiscretePath, k: int) -> Segment:
    """Segment at observation time k*delta, linearly interpolating the path.

    On the window grid this is exactly the path slice at indices k-M..k
    (time indices), so node values are shared bitwise with the path.
    """
    if not 0 <= k <= path.grid.n:
        raise IndexError(f"segment index {k} outside [0, {path.grid.n}]")
    window = path.values[k : k + path.grid.M + 1]
    return Segment(window, path.grid.delta, copy=False)
