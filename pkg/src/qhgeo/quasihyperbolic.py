"""Quasihyperbolic metric on a domain sample.

The metric integrates the density 1/d_G along curves; on the graph each
edge carries weight edgeLength * (1/d_G(u) + 1/d_G(v)) / 2 (trapezoid
rule on the endpoints) and distances are shortest paths under those
weights.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import InternalError
from .metric_core import DomainSample
from .views import GraphView


class QuasihyperbolicMetric:
    """Shortest-path metric with conformal density 1/boundary-distance."""

    def __init__(self, domain: DomainSample):
        self.domain = domain
        dg = domain.boundary_distance
        e = domain.graph.edges
        self.edge_weights = domain.graph.lengths * 0.5 * (1.0 / dg[e[:, 0]] + 1.0 / dg[e[:, 1]])
        self.matrix = domain.graph.reweighted(self.edge_weights)
        self._view = GraphView(self.matrix, name="quasihyperbolic")
        self._pred_cache: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def n(self) -> int:
        return self.domain.n

    def view(self) -> GraphView:
        return self._view

    def rows(self, sources) -> np.ndarray:
        return self._view.rows(sources)

    def pairs(self, i, j) -> np.ndarray:
        return self._view.pairs(i, j)

    def distance(self, i: int, j: int) -> float:
        return float(self._view.pairs([i], [j])[0])

    def _predecessors(self, source: int) -> np.ndarray:
        """Lowest-index predecessor on some shortest path from ``source``.

        Determinism contract: among all neighbors u realizing
        dist[u] + w(u,v) == dist[v] (within float tolerance), the lowest
        vertex index wins.
        """
        with self._lock:
            cached = self._pred_cache.get(source)
        if cached is not None:
            return cached
        dist = self.rows([source])[0]
        e = self.domain.graph.edges
        w = self.edge_weights
        heads = np.concatenate([e[:, 0], e[:, 1]])
        tails = np.concatenate([e[:, 1], e[:, 0]])
        weights = np.concatenate([w, w])
        tol = 1e-12 * (1.0 + dist[tails])
        on_path = (np.abs(dist[heads] + weights - dist[tails]) <= tol) & (dist[heads] < dist[tails])
        pred = np.full(self.n, self.n, dtype=np.intp)
        np.minimum.at(pred, tails[on_path], heads[on_path])
        pred[source] = source
        with self._lock:
            self._pred_cache.setdefault(source, pred)
        return pred

    def geodesic(self, i: int, j: int) -> np.ndarray:
        """Vertex path from i to j realizing the quasihyperbolic distance."""
        i, j = int(i), int(j)
        if i == j:
            return np.array([i], dtype=np.intp)
        pred = self._predecessors(i)
        path = [j]
        v = j
        for _ in range(self.n + 1):
            u = int(pred[v])
            if u == self.n:
                raise InternalError("geodesic walk found no predecessor; distances inconsistent")
            path.append(u)
            if u == i:
                return np.asarray(path[::-1], dtype=np.intp)
            v = u
        raise InternalError("geodesic walk failed to terminate")


def build_quasihyperbolic(domain: DomainSample, band_h: float = 2.0):
    """Domain restricted to the default boundary band, with its metric.

    Vertices with d_G < band_h * h are excluded by default so the 1/d_G
    quadrature stays bounded; pass band_h=0 to keep every interior vertex.
    """
    restricted = domain.with_boundary_band(band_h)
    return restricted, QuasihyperbolicMetric(restricted)


def qh_distance(k: QuasihyperbolicMetric, i: int, j: int) -> float:
    return k.distance(i, j)


def qh_geodesic(k: QuasihyperbolicMetric, i: int, j: int) -> np.ndarray:
    return k.geodesic(i, j)


@dataclass(frozen=True)
class BoundViolation:
    kind: str
    i: int
    j: int
    lhs: float
    rhs: float
    x: tuple[float, float]
    y: tuple[float, float]


@dataclass(frozen=True)
class DistanceBoundsReport:
    n_pairs: int
    n_gated: int
    violations: tuple[BoundViolation, ...]
    max_growth_ratio: float
    max_lower_ratio: float
    max_upper_ratio: float
    slack: float

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0


def verify_qh_distance_bounds(
    k: QuasihyperbolicMetric, pairs, slack: float = 1.05
) -> DistanceBoundsReport:
    """Sweep the distance-vs-quasihyperbolic comparison bounds.

    For every pair: d(x,y) <= (e^k - 1) d_G(x) * slack.  When
    d(x,y) <= d_G(x)/(3c) or k(x,y) <= 1, additionally
    (1/2) d/d_G(x) <= k * slack and k <= 3c (d/d_G(x)) * slack.
    """
    domain = k.domain
    c = domain.quasiconvexity
    i = np.asarray(pairs[0], dtype=np.intp)
    j = np.asarray(pairs[1], dtype=np.intp)
    d = domain.ambient_distance(i, j)
    dgx = domain.boundary_distance[i]
    kv = k.pairs(i, j)

    growth_rhs = np.expm1(kv) * dgx
    gate = (d <= dgx / (3.0 * c)) | (kv <= 1.0)
    rel = d / dgx
    violations = []

    def collect(kind, mask, lhs, rhs):
        for idx in np.flatnonzero(mask)[:16]:
            violations.append(
                BoundViolation(
                    kind,
                    int(i[idx]),
                    int(j[idx]),
                    float(lhs[idx]),
                    float(rhs[idx]),
                    tuple(domain.coords[i[idx]]),
                    tuple(domain.coords[j[idx]]),
                )
            )

    collect("growth", d > growth_rhs * slack, d, growth_rhs)
    lower_lhs = 0.5 * rel
    collect("small-scale-lower", gate & (lower_lhs > kv * slack), lower_lhs, kv)
    upper_rhs = 3.0 * c * rel
    collect("small-scale-upper", gate & (kv > upper_rhs * slack), kv, upper_rhs)

    with np.errstate(divide="ignore", invalid="ignore"):
        growth_ratio = np.where(growth_rhs > 0, d / growth_rhs, 0.0)
        lower_ratio = np.where(kv > 0, lower_lhs / kv, 0.0)
        upper_ratio = np.where(upper_rhs > 0, kv / upper_rhs, 0.0)
    return DistanceBoundsReport(
        n_pairs=len(i),
        n_gated=int(gate.sum()),
        violations=tuple(violations),
        max_growth_ratio=float(growth_ratio.max(initial=0.0)),
        max_lower_ratio=float(np.where(gate, lower_ratio, 0.0).max(initial=0.0)),
        max_upper_ratio=float(np.where(gate, upper_ratio, 0.0).max(initial=0.0)),
        slack=slack,
    )


@dataclass(frozen=True)
class UniformityReport:
    constant_a: float
    worst_pair: tuple[int, int]
    length_ratios: np.ndarray
    cigar_ratios: np.ndarray
    n_pairs: int


def estimate_uniformity(
    domain: DomainSample, k: QuasihyperbolicMetric, pairs
) -> UniformityReport:
    """Uniformity constant of the quasihyperbolic-geodesic curve family.

    Per pair, gamma is the discrete quasihyperbolic geodesic;
    lengthRatio = len(gamma)/d(x,y) and cigarRatio is the worst
    min(len(gamma[x,z]), len(gamma[z,y])) / d_G(z) along the path.
    """
    i = np.asarray(pairs[0], dtype=np.intp)
    j = np.asarray(pairs[1], dtype=np.intp)
    keep = i != j
    i, j = i[keep], j[keep]
    matrix = domain.graph.matrix
    dg = domain.boundary_distance
    d = domain.ambient_distance(i, j)
    length_ratios = np.empty(len(i))
    cigar_ratios = np.empty(len(i))
    for a in range(len(i)):
        path = k.geodesic(int(i[a]), int(j[a]))
        if len(path) < 2:
            length_ratios[a] = 1.0
            cigar_ratios[a] = 0.0
            continue
        seg = np.asarray(matrix[path[:-1], path[1:]]).ravel()
        s = np.concatenate([[0.0], np.cumsum(seg)])
        total = s[-1]
        length_ratios[a] = total / d[a]
        cigar_ratios[a] = float(np.max(np.minimum(s, total - s) / dg[path]))
    per_pair = np.maximum(length_ratios, cigar_ratios)
    worst = int(np.argmax(per_pair)) if len(per_pair) else 0
    constant_a = float(per_pair.max(initial=1.0))
    return UniformityReport(
        constant_a=max(constant_a, 1.0),
        worst_pair=(int(i[worst]), int(j[worst])) if len(i) else (-1, -1),
        length_ratios=length_ratios,
        cigar_ratios=cigar_ratios,
        n_pairs=len(i),
    )
