"""Uniform query surface over the metrics the toolkit constructs.

A view answers vectorized distance queries on an immutable point set.
Shortest-path views cache one distance row per source behind a lock, so
concurrent readers over disjoint sources are safe.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .errors import InternalError


class MetricView:
    """Distance oracle on points indexed 0..n-1."""

    name = "metric"

    @property
    def n(self) -> int:
        raise NotImplementedError

    def rows(self, sources) -> np.ndarray:
        """Distance matrix of shape (len(sources), n)."""
        raise NotImplementedError

    def pairs(self, i, j) -> np.ndarray:
        """Distances for index arrays i, j of equal length."""
        raise NotImplementedError

    def submatrix(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.intp)
        return self.rows(idx)[:, idx]


class EuclideanView(MetricView):
    """Ambient metric: straight-line distance between stored coordinates."""

    name = "euclidean"

    def __init__(self, coords: np.ndarray):
        self.coords = np.asarray(coords, float)

    @property
    def n(self):
        return len(self.coords)

    def rows(self, sources):
        sources = np.asarray(sources, dtype=np.intp)
        diff = self.coords[sources][:, None, :] - self.coords[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def pairs(self, i, j):
        d = self.coords[np.asarray(i, dtype=np.intp)] - self.coords[np.asarray(j, dtype=np.intp)]
        return np.hypot(d[:, 0], d[:, 1])


class GraphView(MetricView):
    """Shortest-path metric on a sparse weighted graph, cached per source."""

    name = "graph"

    def __init__(self, matrix, name: str | None = None):
        self.matrix = matrix.tocsr()
        if name:
            self.name = name
        self._cache: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def n(self):
        return self.matrix.shape[0]

    def rows(self, sources):
        sources = np.atleast_1d(np.asarray(sources, dtype=np.intp))
        with self._lock:
            missing = [int(s) for s in sources if int(s) not in self._cache]
        if missing:
            dist = dijkstra(self.matrix, directed=False, indices=missing)
            dist = np.atleast_2d(dist)
            with self._lock:
                for k, s in enumerate(missing):
                    self._cache.setdefault(s, dist[k])
        with self._lock:
            out = np.vstack([self._cache[int(s)] for s in sources])
        if not np.all(np.isfinite(out)):
            raise InternalError("unreachable vertex: graph violates the connectivity invariant")
        return out

    def pairs(self, i, j):
        i = np.asarray(i, dtype=np.intp)
        j = np.asarray(j, dtype=np.intp)
        out = np.empty(len(i), float)
        for s in np.unique(i):
            mask = i == s
            out[mask] = self.rows([s])[0][j[mask]]
        return out

    def min_distance_to(self, targets) -> np.ndarray:
        """Distance from every vertex to the target set (one multi-source run)."""
        targets = np.asarray(targets, dtype=np.intp)
        return dijkstra(self.matrix, directed=False, indices=targets, min_only=True)


class DenseChainView(MetricView):
    """Shortest paths on an implicit complete graph.

    ``weight_row(u)`` returns the quasimetric from point u to every point.
    Used for chain metrics where materializing all n^2 edges is wasteful;
    a single source costs O(n^2) with vectorized relaxation.
    """

    name = "chain"

    def __init__(self, weight_row, n: int, name: str | None = None):
        self._weight_row = weight_row
        self._n = int(n)
        if name:
            self.name = name
        self._cache: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def n(self):
        return self._n

    def _single_source(self, source: int) -> np.ndarray:
        n = self._n
        dist = np.full(n, np.inf)
        dist[source] = 0.0
        done = np.zeros(n, dtype=bool)
        masked = np.empty(n, float)
        for _ in range(n):
            np.copyto(masked, dist)
            masked[done] = np.inf
            u = int(np.argmin(masked))
            if not np.isfinite(masked[u]):
                break
            done[u] = True
            np.minimum(dist, dist[u] + self._weight_row(u), out=dist)
        return dist

    def rows(self, sources):
        sources = np.atleast_1d(np.asarray(sources, dtype=np.intp))
        out = []
        for s in sources:
            s = int(s)
            with self._lock:
                row = self._cache.get(s)
            if row is None:
                row = self._single_source(s)
                with self._lock:
                    self._cache.setdefault(s, row)
            out.append(row)
        return np.vstack(out)

    def pairs(self, i, j):
        i = np.asarray(i, dtype=np.intp)
        j = np.asarray(j, dtype=np.intp)
        out = np.empty(len(i), float)
        for s in np.unique(i):
            mask = i == s
            out[mask] = self.rows([s])[0][j[mask]]
        return out
