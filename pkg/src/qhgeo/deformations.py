"""Conformal deformations of a domain's quasihyperbolic structure.

Two transforms are provided:

- ``uniformize``: length metric with density exp(-eps * k(x, w)) over the
  quasihyperbolic structure.  The result is bounded (diameter at most
  2/eps) and the base point sits deep inside: its boundary distance is at
  least 1/(eps*e).
- ``sphericalize``: one-point-compactifying transform at a boundary point
  p.  The quasimetric d(x,y) / [(1+d(x,p))(1+d(y,p))] is metrized by the
  chain construction, which stays within a factor 4 of the quasimetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import ConfigurationError
from .metric_core import DomainSample
from .quasihyperbolic import QuasihyperbolicMetric
from .sampling import tuple_sample_from_pool
from .views import DenseChainView, GraphView


@dataclass(frozen=True)
class DeformationParams:
    kind: str
    base_point: tuple[float, float]
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniformize", "sphericalize"):
            raise ConfigurationError("deformation kind must be 'uniformize' or 'sphericalize'")
        if self.kind == "uniformize":
            if self.epsilon is None or not (0.0 < self.epsilon < 1.0):
                raise ConfigurationError("uniformize requires epsilon in (0, 1)")


def deformation_density(k: QuasihyperbolicMetric, i, w: int, eps: float) -> np.ndarray:
    """exp(-eps * k(x, w)) evaluated at vertex indices i."""
    row = k.rows([w])[0]
    return np.exp(-eps * row[np.asarray(i, dtype=np.intp)])


class UniformizedSpace:
    """Deformation of (domain, k) by the density exp(-eps k(., w))."""

    kind = "uniformize"

    def __init__(self, domain: DomainSample, k: QuasihyperbolicMetric, w: int, eps: float):
        if not (0.0 < eps < 1.0):
            raise ConfigurationError("epsilon must lie in (0, 1)")
        self.domain = domain
        self.k = k
        self.w = int(w)
        self.eps = float(eps)
        self.params = DeformationParams("uniformize", tuple(domain.coords[self.w]), eps)

        self.k_from_base = k.rows([self.w])[0]
        self.density = np.exp(-eps * self.k_from_base)
        e = domain.graph.edges
        self.edge_weights = k.edge_weights * 0.5 * (self.density[e[:, 0]] + self.density[e[:, 1]])
        self.matrix = domain.graph.reweighted(self.edge_weights)
        self._view = GraphView(self.matrix, name=f"uniformized(eps={eps})")
        self._boundary_distance = None
        self._qh_view = None

    @property
    def n(self) -> int:
        return self.domain.n

    def metric_view(self) -> GraphView:
        return self._view

    def pairs(self, i, j) -> np.ndarray:
        return self._view.pairs(i, j)

    def distance(self, i: int, j: int) -> float:
        return float(self._view.pairs([i], [j])[0])

    def boundary_distance(self) -> np.ndarray:
        """Deformed distance from every vertex to the boundary.

        A path to the boundary runs through the graph and then escapes
        along an inward ray from some vertex v; the escape tail integrates
        the density along the ray, contributing density(v)/eps.  Realized
        as one shortest-path run from a virtual sink wired to every vertex
        with the tail weight.
        """
        if self._boundary_distance is None:
            n = self.n
            tail = self.density / self.eps
            base = self.matrix.tocoo()
            rows = np.concatenate([base.row, np.arange(n), np.full(n, n)])
            cols = np.concatenate([base.col, np.full(n, n), np.arange(n)])
            vals = np.concatenate([base.data, tail, tail])
            aug = csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))
            dist = dijkstra(aug, directed=False, indices=[n], min_only=False)[0]
            self._boundary_distance = dist[:n]
        return self._boundary_distance

    def qh_view(self) -> GraphView:
        """Quasihyperbolic metric of the deformed space itself."""
        if self._qh_view is None:
            dg = self.boundary_distance()
            e = self.domain.graph.edges
            w = self.edge_weights * 0.5 * (1.0 / dg[e[:, 0]] + 1.0 / dg[e[:, 1]])
            self._qh_view = GraphView(
                self.domain.graph.reweighted(w), name=f"qh-of-uniformized(eps={self.eps})"
            )
        return self._qh_view

    def diameter_estimate(self, n_extremal: int = 32) -> float:
        """Lower bound for the deformed diameter: eccentricity of the base
        point sharpened over pairs of far vertices."""
        row = self._view.rows([self.w])[0]
        far = np.argsort(row)[-n_extremal:]
        sub = self._view.submatrix(far)
        return float(max(row.max(), sub.max()))


class SphericalizedSpace:
    """Chain-metrized sphericalization at a boundary point p."""

    kind = "sphericalize"

    def __init__(self, domain: DomainSample, p, max_points: int = 3500, rng=None):
        self.domain = domain
        p = np.asarray(p, float).reshape(2)
        scale = max(domain.diameter_hint(), 1.0)
        gaps = np.hypot(
            domain.boundary_coords[:, 0] - p[0], domain.boundary_coords[:, 1] - p[1]
        )
        if gaps.min() > 1e-9 * scale:
            raise ConfigurationError(
                "sphericalization base point must be one of the boundary samples"
            )
        self.p = p
        self.params = DeformationParams("sphericalize", (float(p[0]), float(p[1])))
        # 1 + d(., p) for every vertex and boundary sample
        self.depth = 1.0 + np.hypot(domain.coords[:, 0] - p[0], domain.coords[:, 1] - p[1])
        self.boundary_depth = 1.0 + gaps

        rng = np.random.default_rng(rng)
        if domain.n > max_points:
            self.active = np.sort(rng.permutation(domain.n)[:max_points]).astype(np.intp)
        else:
            self.active = np.arange(domain.n, dtype=np.intp)
        self._act_coords = domain.coords[self.active]
        self._act_depth = self.depth[self.active]
        self._view = DenseChainView(self._weight_row, len(self.active), name="sphericalized")
        self._boundary_distance = None
        self._qh_view = None

    @property
    def n(self) -> int:
        return len(self.active)

    def _weight_row(self, u: int) -> np.ndarray:
        d = np.hypot(
            self._act_coords[:, 0] - self._act_coords[u, 0],
            self._act_coords[:, 1] - self._act_coords[u, 1],
        )
        return d / (self._act_depth[u] * self._act_depth)

    def quasimetric(self, i, j) -> np.ndarray:
        """s_p(x, y) = d(x,y) / [(1+d(x,p))(1+d(y,p))] on active positions."""
        i = np.asarray(i, dtype=np.intp)
        j = np.asarray(j, dtype=np.intp)
        d = np.hypot(
            self._act_coords[i, 0] - self._act_coords[j, 0],
            self._act_coords[i, 1] - self._act_coords[j, 1],
        )
        return d / (self._act_depth[i] * self._act_depth[j])

    def metric_view(self) -> DenseChainView:
        return self._view

    def pairs(self, i, j) -> np.ndarray:
        return self._view.pairs(i, j)

    def boundary_distance(self) -> np.ndarray:
        """Per base vertex: distance to the deformed boundary set.

        The deformed boundary is the image of the base boundary samples
        plus the point at infinity at distance 1/(1+d(x,p)); chains cannot
        improve the infinity term, and the quasimetric to the nearest
        boundary image is within the universal chain factor.
        """
        if self._boundary_distance is None:
            n = self.domain.n
            out = 1.0 / self.depth
            bc = self.domain.boundary_coords
            for start in range(0, n, 2048):
                stop = min(n, start + 2048)
                pts = self.domain.coords[start:stop]
                d = np.hypot(pts[:, None, 0] - bc[None, :, 0], pts[:, None, 1] - bc[None, :, 1])
                s = d / (self.depth[start:stop, None] * self.boundary_depth[None, :])
                out[start:stop] = np.minimum(out[start:stop], s.min(axis=1))
            self._boundary_distance = out
        return self._boundary_distance

    def qh_view(self) -> GraphView:
        """Quasihyperbolic metric of the sphericalized space (full base graph)."""
        if self._qh_view is None:
            dg = self.boundary_distance()
            e = self.domain.graph.edges
            s_edge = self.domain.graph.lengths / (self.depth[e[:, 0]] * self.depth[e[:, 1]])
            w = s_edge * 0.5 * (1.0 / dg[e[:, 0]] + 1.0 / dg[e[:, 1]])
            self._qh_view = GraphView(
                self.domain.graph.reweighted(w), name="qh-of-sphericalized"
            )
        return self._qh_view


def uniformize(domain: DomainSample, k: QuasihyperbolicMetric, w, eps: float) -> UniformizedSpace:
    if np.ndim(w) != 0:
        w = int(domain.nearest_vertex(np.asarray(w, float))[0])
    return UniformizedSpace(domain, k, int(w), eps)


def sphericalize(domain: DomainSample, p, max_points: int = 3500, rng=None) -> SphericalizedSpace:
    return SphericalizedSpace(domain, p, max_points=max_points, rng=rng)


def deformed_distance(space, i: int, j: int) -> float:
    return float(space.pairs([i], [j])[0])


@dataclass(frozen=True)
class ComparabilityReport:
    constant: float
    max_ratio: float
    min_ratio: float
    n_pairs: int
    n_skipped: int

    @property
    def finite(self) -> bool:
        return np.isfinite(self.constant) and self.constant > 0


def verify_deformation_comparability(space: UniformizedSpace, pairs) -> ComparabilityReport:
    """Compare the deformed metric with its Gromov-product model.

    For each pair, ratio = [eps^-1 exp(-eps (x|y)_w) min(1, eps k(x,y))]
    / d_deformed(x, y); the reported constant is max(max ratio,
    max 1/ratio) over the sample, which must be finite.
    """
    if space.kind != "uniformize":
        raise ConfigurationError("comparability check applies to uniformized spaces")
    i = np.asarray(pairs[0], dtype=np.intp)
    j = np.asarray(pairs[1], dtype=np.intp)
    keep = i != j
    n_skipped = int((~keep).sum())
    i, j = i[keep], j[keep]
    eps = space.eps
    kxy = space.k.pairs(i, j)
    gp = 0.5 * (space.k_from_base[i] + space.k_from_base[j] - kxy)
    model = np.exp(-eps * gp) * np.minimum(1.0, eps * kxy) / eps
    actual = space.pairs(i, j)
    ratio = model / actual
    max_ratio = float(ratio.max(initial=0.0))
    min_ratio = float(ratio.min(initial=np.inf))
    constant = max(max_ratio, 1.0 / min_ratio if min_ratio > 0 else np.inf)
    return ComparabilityReport(constant, max_ratio, min_ratio, len(i), n_skipped)


def cross_ratio(dist_pairs_fn, quad) -> np.ndarray:
    """d(x,z) d(y,w) / [d(x,y) d(z,w)] for an (m, 4) index array."""
    x, y, z, w = quad[:, 0], quad[:, 1], quad[:, 2], quad[:, 3]
    return (dist_pairs_fn(x, z) * dist_pairs_fn(y, w)) / (
        dist_pairs_fn(x, y) * dist_pairs_fn(z, w)
    )


@dataclass(frozen=True)
class BasepointChangeReport:
    slope: float
    n_quadruples: int
    n_skipped: int


def basepoint_change_distortion(
    space0: UniformizedSpace,
    space1: UniformizedSpace,
    quadruples=None,
    n_quadruples: int = 1000,
    rng=None,
    pool_size: int = 48,
) -> BasepointChangeReport:
    """Empirical linear quasimobius slope of the identity between two
    deformations of the same base with the same epsilon.

    Returns max over quadruples of crossratio(space1)/crossratio(space0);
    degenerate quadruples (denominators below 1e-9 * diameter) are skipped
    and counted.
    """
    if space0.domain is not space1.domain:
        raise ConfigurationError("both deformations must share the same base domain")
    if abs(space0.eps - space1.eps) > 0:
        raise ConfigurationError("both deformations must use the same epsilon")
    rng = np.random.default_rng(rng)
    if quadruples is None:
        pool = np.sort(rng.permutation(space0.n)[: min(pool_size, space0.n)]).astype(np.intp)
        quad_local = tuple_sample_from_pool(len(pool), n_quadruples, 4, rng)
        quadruples = pool[quad_local]
    quadruples = np.asarray(quadruples, dtype=np.intp)

    uniq = np.unique(quadruples)
    local = np.searchsorted(uniq, quadruples)
    d0 = space0.metric_view().submatrix(uniq)
    d1 = space1.metric_view().submatrix(uniq)

    delta_min = 1e-9 * max(d0.max(initial=0.0), d1.max(initial=0.0))
    pairs0 = lambda a, b: d0[a, b]
    pairs1 = lambda a, b: d1[a, b]
    x, y, z, w = local[:, 0], local[:, 1], local[:, 2], local[:, 3]
    den0 = pairs0(x, y) * pairs0(z, w)
    den1 = pairs1(x, y) * pairs1(z, w)
    ok = (den0 > delta_min) & (den1 > delta_min)
    cr0 = cross_ratio(pairs0, local[ok])
    cr1 = cross_ratio(pairs1, local[ok])
    slope = float((cr1 / cr0).max(initial=0.0))
    return BasepointChangeReport(slope, int(ok.sum()), int((~ok).sum()))


@dataclass(frozen=True)
class EnvelopeReport:
    min_chain_over_quasi: float
    max_chain_over_quasi: float
    n_pairs: int

    @property
    def passed(self) -> bool:
        # chain metric must sit inside [quasimetric/4, quasimetric]
        return self.min_chain_over_quasi >= 0.25 - 1e-12 and (
            self.max_chain_over_quasi <= 1.0 + 1e-12
        )


def sphericalization_envelope(space: SphericalizedSpace, pairs) -> EnvelopeReport:
    """Chain metric vs quasimetric comparability on sampled active pairs."""
    i = np.asarray(pairs[0], dtype=np.intp)
    j = np.asarray(pairs[1], dtype=np.intp)
    keep = i != j
    i, j = i[keep], j[keep]
    chain = space.pairs(i, j)
    quasi = space.quasimetric(i, j)
    ratio = chain / quasi
    return EnvelopeReport(float(ratio.min(initial=np.inf)), float(ratio.max(initial=0.0)), len(i))
