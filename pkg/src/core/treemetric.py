"""
Tree-metric checks and weighted path reconstruction.

A distance matrix realised by a positively weighted path satisfies the
four-point condition, and the path (order and weights) can be read back from
the matrix with O(n^2) distance reads: take the vertex farthest from anything
as an endpoint, order the rest by distance from it, and difference
consecutive distances.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DegenerateWeights, InvalidMetric, NotAPathMetric
from .signal_graphs import SignalGraph

logger = logging.getLogger(__name__)

DEFAULT_ATOL = 1e-9
INGESTED_RTOL = 1e-6
MAX_FOUR_POINT_N = 128
_CHUNK = 1 << 20


@dataclass
class WeightedPath:
    order: List[int]
    weights: List[float]

    def __post_init__(self) -> None:
        self.order = [int(v) for v in self.order]
        self.weights = [float(w) for w in self.weights]
        if len(self.weights) != max(len(self.order) - 1, 0):
            raise DegenerateWeights(f"{len(self.weights)} weights for {len(self.order)} vertices")
        if any(w <= 0 for w in self.weights):
            raise DegenerateWeights("Path edge weights must be positive")


class ReadCounter:
    """Wraps a distance matrix and counts entry reads."""

    def __init__(self, matrix: np.ndarray):
        self._matrix = matrix
        self.reads = 0

    @property
    def n(self) -> int:
        return self._matrix.shape[0]

    def row(self, i: int) -> np.ndarray:
        self.reads += self.n
        return self._matrix[i]

    def all(self) -> np.ndarray:
        self.reads += self._matrix.size
        return self._matrix


def _tolerance(d: np.ndarray, atol: float, rtol: float) -> float:
    scale = float(np.abs(d).max()) if d.size else 0.0
    return atol + rtol * scale


def validate_metric(d: np.ndarray, atol: float = DEFAULT_ATOL, rtol: float = 0.0) -> np.ndarray:
    """Return ``d`` as a float array after checking it is a distance matrix."""
    m = np.asarray(d, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMetric(f"Distance matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMetric("Distance matrix has non-finite entries")
    tol = _tolerance(m, atol, rtol)
    if np.any(m < -tol):
        raise InvalidMetric("Distance matrix has negative entries")
    if np.any(np.abs(np.diag(m)) > tol):
        raise InvalidMetric("Distance matrix diagonal must be zero")
    if np.any(np.abs(m - m.T) > tol):
        raise InvalidMetric("Distance matrix is not symmetric")
    # d[i,k] <= d[i,j] + d[j,k]
    if m.shape[0] and np.any(m[:, None, :] > m[:, :, None] + m[None, :, :] + tol):
        raise InvalidMetric("Distance matrix violates the triangle inequality")
    return m


@lru_cache(maxsize=None)
def _quadruples(n: int) -> np.ndarray:
    count = n * (n - 1) * (n - 2) * (n - 3) // 24
    combos = itertools.chain.from_iterable(itertools.combinations(range(n), 4))
    flat = np.fromiter(combos, dtype=np.int16, count=4 * count)
    return flat.reshape(count, 4)


def four_point_check(
    d: np.ndarray, atol: float = DEFAULT_ATOL, rtol: float = 0.0
) -> Tuple[bool, Optional[Tuple[int, int, int, int]]]:
    """Exhaustive four-point scan.

    Returns ``(True, None)`` when for every quadruple the two largest of the
    three pair sums agree within tolerance, else ``(False, quadruple)`` for
    the first offending quadruple in lexicographic order.
    """
    m = validate_metric(d, atol, rtol)
    n = m.shape[0]
    if n < 4:
        return True, None
    if n > MAX_FOUR_POINT_N:
        logger.warning(f"Four-point scan on n={n} exceeds the supported size {MAX_FOUR_POINT_N}")
    tol = _tolerance(m, atol, rtol)
    quads = _quadruples(n)
    for start in range(0, quads.shape[0], _CHUNK):
        q = quads[start:start + _CHUNK].astype(np.int64)
        i, j, k, l = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
        sums = np.sort(np.stack([m[i, j] + m[k, l], m[i, k] + m[j, l], m[i, l] + m[j, k]], axis=1), axis=1)
        bad = np.nonzero(sums[:, 2] - sums[:, 1] > tol)[0]
        if bad.size:
            first = q[bad[0]]
            return False, (int(first[0]), int(first[1]), int(first[2]), int(first[3]))
    return True, None


def reconstruct_path(
    d: np.ndarray,
    atol: float = DEFAULT_ATOL,
    rtol: float = 0.0,
    counter: Optional[ReadCounter] = None,
) -> WeightedPath:
    """Recover the weighted path realising ``d``.

    The endpoint is the vertex with the largest eccentricity, ties going to
    the lowest index. The result is verified against every entry of ``d``.
    """
    m = validate_metric(d, atol, rtol)
    n = m.shape[0]
    if n <= 1:
        return WeightedPath(order=list(range(n)), weights=[])
    reader = counter if counter is not None else ReadCounter(m)
    tol = _tolerance(m, atol, rtol)

    eccentricity = reader.all().max(axis=1)
    s = int(np.argmax(eccentricity))
    from_s = reader.row(s)
    order = np.argsort(from_s, kind="stable")
    positions = from_s[order]

    realised = np.abs(from_s[:, None] - from_s[None, :])
    error = np.abs(reader.all() - realised)
    if np.any(error > tol):
        u, v = np.unravel_index(int(np.argmax(error)), error.shape)
        raise NotAPathMetric(
            f"No weighted path realises the matrix: d[{u}][{v}]={m[u, v]:g} but the path gives {realised[u, v]:g}"
        )
    weights = np.diff(positions)
    if np.any(weights <= tol):
        raise DegenerateWeights(
            "Two vertices lie at the same distance from the endpoint; the path has a zero-weight edge"
        )
    logger.debug(f"Reconstructed path over {n} vertices with {reader.reads} distance reads")
    return WeightedPath(order=order.tolist(), weights=weights.tolist())


def distance_matrix(path: WeightedPath) -> np.ndarray:
    n = len(path.order)
    positions = np.concatenate([[0.0], np.cumsum(path.weights)])
    out = np.zeros((n, n))
    labels = np.asarray(path.order, dtype=np.int64)
    if n:
        out[np.ix_(labels, labels)] = np.abs(positions[:, None] - positions[None, :])
    return out


def temporal_distance_matrix(graph: SignalGraph) -> np.ndarray:
    """Unsigned temporal distances of a signal graph."""
    return np.abs(graph.delta)


def random_path(n: int, rng: np.random.Generator, max_weight: float = 10.0) -> WeightedPath:
    """Random vertex order with weights in (0, max_weight]."""
    weights = max_weight - rng.uniform(0.0, max_weight, size=max(n - 1, 0))
    return WeightedPath(order=rng.permutation(n).tolist(), weights=weights.tolist())


def same_up_to_reversal(a: Sequence[int], b: Sequence[int]) -> bool:
    return list(a) == list(b) or list(a) == list(b)[::-1]
