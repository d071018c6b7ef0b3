"""Discretized metric domains: grids over planar shapes with boundary data.

A domain sample is a length graph over the interior lattice points of a
shape, together with boundary samples and the distance-to-boundary field.
The lattice stencil spans axis, diagonal, knight, and extended knight
moves up to (4, 3), which keeps the worst-case shortest-path anisotropy
at 0.76% (the acceptance tolerances assume grid error below 1%; knight
moves alone leave 2.75%).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ConfigurationError
from .shapes import ShapeGeometry, ShapeSpec, geometry_for
from .views import EuclideanView, GraphView

# canonical half of the stencil; the reverse directions are implied by
# undirectedness.  All displacements have coprime components, so open
# segments between lattice points never contain another lattice point.
_CANONICAL = [(1, 0), (1, 1), (2, 1), (3, 1), (3, 2), (4, 1), (4, 3)]
STENCIL = np.array(
    sorted(
        {
            (dx, dy)
            for (a, b) in _CANONICAL
            for (dx, dy) in ((a, b), (b, a), (a, -b), (b, -a))
            if (dx, dy) > (0, 0)
        }
    ),
    dtype=int,
)

_INTERIOR_TOL_FACTOR = 1e-9


class LengthGraph:
    """Undirected graph with positive edge lengths over an indexed vertex set."""

    def __init__(self, n_vertices: int, edges: np.ndarray, lengths: np.ndarray, coords=None):
        edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        if len(edges) != len(lengths):
            raise ConfigurationError("edges and lengths must have equal length")
        if len(lengths) and not np.all(lengths > 0):
            raise ConfigurationError("every edge length must be > 0")
        self.n = int(n_vertices)
        self.edges = edges
        self.lengths = lengths
        self.coords = None if coords is None else np.asarray(coords, float)
        self._matrix = _symmetric_csr(self.n, edges, lengths)
        self._check_connected()
        for arr in (self.edges, self.lengths):
            arr.setflags(write=False)

    def _check_connected(self):
        if self.n <= 1:
            return
        n_comp, _ = connected_components(self._matrix, directed=False)
        if n_comp != 1:
            raise ConfigurationError(
                f"graph has {n_comp} connected components; "
                "refine the resolution or adjust the shape"
            )

    @property
    def matrix(self) -> csr_matrix:
        return self._matrix

    def reweighted(self, new_lengths: np.ndarray) -> csr_matrix:
        """Sparse matrix with the same edges and replacement weights."""
        new_lengths = np.asarray(new_lengths, float)
        if not np.all(new_lengths > 0):
            raise ConfigurationError("replacement edge weights must be > 0")
        return _symmetric_csr(self.n, self.edges, new_lengths)


def _symmetric_csr(n, edges, weights):
    if len(edges) == 0:
        return csr_matrix((n, n))
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    vals = np.concatenate([weights, weights])
    return csr_matrix((vals, (rows, cols)), shape=(n, n))


class DomainSample:
    """Immutable discretized incomplete metric space.

    Interior vertices carry a length-graph structure; the ambient metric is
    Euclidean on coordinates, and ``boundary_distance[i]`` is the distance
    from vertex i to the metric boundary (analytic when the shape provides
    it, otherwise the minimum over boundary samples).
    """

    def __init__(
        self,
        graph: LengthGraph,
        boundary_coords: np.ndarray,
        boundary_distance: np.ndarray,
        shape: ShapeSpec | None = None,
        geometry: ShapeGeometry | None = None,
        quasiconvexity: float = 1.0,
        resolution: float | None = None,
    ):
        if graph.coords is None:
            raise ConfigurationError("domain vertices need ambient coordinates")
        self.graph = graph
        self.coords = graph.coords
        self.boundary_coords = np.asarray(boundary_coords, float).reshape(-1, 2)
        self.boundary_distance = np.asarray(boundary_distance, float).reshape(-1)
        if len(self.boundary_distance) != graph.n:
            raise ConfigurationError("boundary_distance must cover every vertex")
        if graph.n == 0:
            raise ConfigurationError("empty interior: resolution too coarse for the shape")
        if not np.all(self.boundary_distance > 0):
            raise ConfigurationError("boundary distance must be positive on interior points")
        if quasiconvexity < 1.0:
            raise ConfigurationError("quasiconvexity constant must be >= 1")
        self.shape = shape
        self.geometry = geometry
        self.quasiconvexity = float(quasiconvexity)
        if resolution is None:
            resolution = float(np.median(graph.lengths)) if len(graph.lengths) else 1.0
        self.resolution = float(resolution)
        self._ambient = EuclideanView(self.coords)
        self._graph_view = GraphView(graph.matrix, name="graph")
        self._kdtree = None
        self._boundary_tree = None
        for arr in (self.coords, self.boundary_coords, self.boundary_distance):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.graph.n

    def ambient_view(self) -> EuclideanView:
        return self._ambient

    def graph_view(self) -> GraphView:
        return self._graph_view

    def ambient_distance(self, i, j) -> np.ndarray:
        return self._ambient.pairs(np.atleast_1d(i), np.atleast_1d(j))

    def nearest_vertex(self, points) -> np.ndarray:
        if self._kdtree is None:
            self._kdtree = cKDTree(self.coords)
        pts = np.atleast_2d(np.asarray(points, float))
        return self._kdtree.query(pts)[1]

    def boundary_distance_at(self, points) -> np.ndarray:
        """Boundary distance at arbitrary points (not only vertices)."""
        pts = np.atleast_2d(np.asarray(points, float))
        if self.geometry is not None and self.geometry.analytic_boundary:
            return self.geometry.boundary_distance(pts)
        if self._boundary_tree is None:
            self._boundary_tree = cKDTree(self.boundary_coords)
        return self._boundary_tree.query(pts)[0]

    def contains(self, points) -> np.ndarray:
        if self.geometry is None:
            raise ConfigurationError("containment test requires a shape-backed domain")
        return self.geometry.contains(np.atleast_2d(np.asarray(points, float)))

    def diameter_hint(self) -> float:
        lo = self.coords.min(axis=0)
        hi = self.coords.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def with_boundary_band(self, band_h: float) -> "DomainSample":
        """Copy with vertices at boundary distance < band_h * resolution dropped.

        The excluded band keeps the 1/boundary-distance density quadrature
        bounded; boundary data is unchanged.
        """
        if band_h <= 0:
            return self
        keep = self.boundary_distance >= band_h * self.resolution
        if not np.any(keep):
            raise ConfigurationError("boundary band excludes every vertex; decrease band or refine")
        if np.all(keep):
            return self
        return self._restricted(keep)

    def _restricted(self, keep_mask) -> "DomainSample":
        new_index = -np.ones(self.n, dtype=np.intp)
        kept = np.flatnonzero(keep_mask)
        new_index[kept] = np.arange(len(kept))
        e = self.graph.edges
        keep_edge = keep_mask[e[:, 0]] & keep_mask[e[:, 1]]
        edges = new_index[e[keep_edge]]
        graph = LengthGraph(len(kept), edges, self.graph.lengths[keep_edge], self.coords[kept])
        return DomainSample(
            graph,
            self.boundary_coords,
            self.boundary_distance[kept],
            shape=self.shape,
            geometry=self.geometry,
            quasiconvexity=self.quasiconvexity,
            resolution=self.resolution,
        )


def build_grid_domain(spec: ShapeSpec, boundary_band_h: float = 0.0) -> DomainSample:
    """Uniform grid restricted to the shape interior.

    Vertices are lattice points i*h, edge lengths are exact Euclidean
    displacements, and the boundary is sampled at arclength spacing <= h.
    For non-convex shapes, stencil edges whose segment leaves the domain
    are removed.  ``boundary_band_h`` optionally drops vertices closer
    than that many cells to the boundary (the quasihyperbolic pipeline
    applies 2 by default).
    """
    geom = geometry_for(spec)
    h = spec.resolution
    xmin, ymin, xmax, ymax = geom.bounding_box()
    scale = max(xmax - xmin, ymax - ymin)
    tol = _INTERIOR_TOL_FACTOR * scale

    i0 = int(math.floor(xmin / h)) - 1
    i1 = int(math.ceil(xmax / h)) + 1
    j0 = int(math.floor(ymin / h)) - 1
    j1 = int(math.ceil(ymax / h)) + 1
    xs = np.arange(i0, i1 + 1, dtype=float) * h
    ys = np.arange(j0, j1 + 1, dtype=float) * h
    nx, ny = len(xs), len(ys)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    lattice = np.column_stack([gx.ravel(), gy.ravel()])

    boundary = geom.boundary_samples(h)
    if geom.analytic_boundary:
        bdist = geom.boundary_distance(lattice)
    else:
        bdist = cKDTree(boundary).query(lattice)[0]
        bdist = np.where(geom.contains(lattice), bdist, -bdist)

    keep = bdist > max(tol, boundary_band_h * h)
    if not np.any(keep):
        raise ConfigurationError(
            f"empty interior for {spec.kind} at resolution {h}; refine the grid"
        )
    index = -np.ones(nx * ny, dtype=np.intp)
    index[keep] = np.arange(int(keep.sum()))
    keep2d = keep.reshape(nx, ny)
    index2d = index.reshape(nx, ny)

    edge_u, edge_v, edge_len = [], [], []
    needs_clip = (not geom.convex) and getattr(geom, "_needs_clipping", True)
    for di, dj in STENCIL:
        a_sl = (slice(0, nx - di) if di >= 0 else slice(-di, nx),
                slice(0, ny - dj) if dj >= 0 else slice(-dj, ny))
        b_sl = (slice(di, nx) if di >= 0 else slice(0, nx + di),
                slice(dj, ny) if dj >= 0 else slice(0, ny + dj))
        mask = keep2d[a_sl] & keep2d[b_sl]
        u = index2d[a_sl][mask]
        v = index2d[b_sl][mask]
        if len(u) == 0:
            continue
        if needs_clip:
            pa = lattice[keep][u]
            pb = lattice[keep][v]
            ok = np.ones(len(u), dtype=bool)
            for frac in (0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875):
                ok &= geom.contains(pa + frac * (pb - pa))
            u, v = u[ok], v[ok]
        edge_u.append(u)
        edge_v.append(v)
        edge_len.append(np.full(len(u), h * math.hypot(di, dj)))

    if edge_u:
        edges = np.column_stack([np.concatenate(edge_u), np.concatenate(edge_v)])
        lengths = np.concatenate(edge_len)
    else:
        edges = np.empty((0, 2), dtype=np.intp)
        lengths = np.empty(0)

    graph = LengthGraph(int(keep.sum()), edges, lengths, lattice[keep])
    return DomainSample(
        graph,
        boundary,
        bdist[keep],
        shape=spec,
        geometry=geom,
        quasiconvexity=1.0,
        resolution=h,
    )


def domain_from_length_graph(
    coords,
    edges,
    boundary_coords,
    lengths=None,
    quasiconvexity: float = 1.0,
) -> DomainSample:
    """Domain over an imported length graph; lengths default to Euclidean."""
    coords = np.asarray(coords, float).reshape(-1, 2)
    edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    if lengths is None:
        d = coords[edges[:, 0]] - coords[edges[:, 1]]
        lengths = np.hypot(d[:, 0], d[:, 1])
    graph = LengthGraph(len(coords), edges, lengths, coords)
    boundary_coords = np.asarray(boundary_coords, float).reshape(-1, 2)
    if len(boundary_coords) == 0:
        raise ConfigurationError("imported domain needs at least one boundary sample")
    bdist = cKDTree(boundary_coords).query(coords)[0]
    return DomainSample(graph, boundary_coords, bdist, quasiconvexity=quasiconvexity)


def graph_distance(domain: DomainSample, i, j):
    """Shortest-path length between interior vertices i and j."""
    out = domain.graph_view().pairs(np.atleast_1d(i), np.atleast_1d(j))
    return float(out[0]) if np.isscalar(i) or np.ndim(i) == 0 else out


def estimate_quasiconvexity(domain: DomainSample, pairs=None, n_pairs: int = 512, rng=None):
    """Sampled lower bound for the quasiconvexity constant of the length structure.

    Returns max over pairs of graph_distance / ambient distance.  Coincident
    pairs are skipped with a warning.
    """
    if pairs is None:
        rng = np.random.default_rng(rng)
        if domain.n < 2:
            raise ConfigurationError("need at least two vertices to sample pairs")
        i = rng.integers(0, domain.n, size=n_pairs)
        j = rng.integers(0, domain.n, size=n_pairs)
    else:
        i = np.asarray(pairs[0], dtype=np.intp)
        j = np.asarray(pairs[1], dtype=np.intp)
    distinct = i != j
    if not np.all(distinct):
        warnings.warn("coincident pairs skipped in quasiconvexity estimate")
        i, j = i[distinct], j[distinct]
    if len(i) == 0:
        raise ConfigurationError("no distinct pairs left to estimate quasiconvexity")
    ratio = domain.graph_view().pairs(i, j) / domain.ambient_distance(i, j)
    return float(ratio.max())


def safe_ball_radius(domain: DomainSample, i) -> float:
    """Largest radius with guaranteed containment, 2*d_G(x)/(2+c)."""
    c = domain.quasiconvexity
    return float(2.0 * domain.boundary_distance[i] / (2.0 + c))


@dataclass(frozen=True)
class BallContainmentReport:
    contained: bool
    center: tuple[float, float]
    radius: float
    n_checked: int
    witness: tuple[float, float] | None


def check_ball_containment(domain: DomainSample, center, radius: float) -> BallContainmentReport:
    """Check whether every ambient lattice sample within ``radius`` of the
    center is an interior point of the shape.

    The ambient sample is the lattice of the shape's bounding box grown by
    the radius, so exterior points can witness a failure.  The first
    violating sample (in lattice order) is reported.
    """
    if domain.geometry is None:
        raise ConfigurationError("ball containment needs a shape-backed domain")
    if np.ndim(center) == 0:
        x = domain.coords[int(center)]
    else:
        x = np.asarray(center, float)
    h = domain.resolution
    margin = radius + h
    i0 = int(math.floor((x[0] - margin) / h))
    i1 = int(math.ceil((x[0] + margin) / h))
    j0 = int(math.floor((x[1] - margin) / h))
    j1 = int(math.ceil((x[1] + margin) / h))
    xs = np.arange(i0, i1 + 1, dtype=float) * h
    ys = np.arange(j0, j1 + 1, dtype=float) * h
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    near = np.hypot(pts[:, 0] - x[0], pts[:, 1] - x[1]) <= radius
    pts = pts[near]
    inside = domain.contains(pts)
    if np.all(inside):
        return BallContainmentReport(True, (float(x[0]), float(x[1])), radius, len(pts), None)
    first = int(np.flatnonzero(~inside)[0])
    w = pts[first]
    return BallContainmentReport(
        False, (float(x[0]), float(x[1])), radius, len(pts), (float(w[0]), float(w[1]))
    )
