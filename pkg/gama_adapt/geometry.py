# This code is part of gama-adapt.
#
# (C) Copyright The gama-adapt Authors 2026.
#
# This code is licensed under the Apache License, Version 2.0. You may
# obtain a copy of this license in the LICENSE.txt file in the root directory
# of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
#
# Any modifications or derivative works of this code must retain this
# copyright notice, and modified files need to carry a notice indicating
# that they have been altered from the originals.

"""Local manifold geometry: k-NN graphs, PCA tangent frames, graph geodesics.

All functions are pure over immutable inputs. Graphs are held as rustworkx
graphs with the Euclidean edge length as the edge payload, so shortest-path
queries run in rustworkx and never in Python loops over edges.

A ``KnnGraph`` is built once over a ``PointSet``; tangent frames and geodesic
distances are then derived from it::

    pts = PointSet.from_array(x)
    graph = build_knn_graph(pts, k=10)
    frame = estimate_tangent(pts, graph, 0)
    geo = geodesic_distances(pts, graph)
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import rustworkx
from scipy import linalg
from scipy.spatial.distance import cdist, pdist

from .constants import GeodesicGradient, GeodesicMode
from .exceptions import (DegenerateNeighborhoodError, GamaDataError,
                         GamaGeometryError, GamaParameterError)

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_VARIANCE_THRESHOLD = 0.9
DEFAULT_ALL_PAIRS_CAP = 1000
ORTHONORMAL_TOL = 1e-8
_RANK_TOL = 1e-10
_CHUNK_ROWS = 1024


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PointSet:
    """Rows of ``points`` with stable integer ``ids``.

    Use :meth:`from_array` to build one; it validates finiteness and shape.
    """

    points: np.ndarray
    ids: np.ndarray

    @classmethod
    def from_array(cls, points, ids=None):
        """Validate ``points`` (n x d) and wrap them with ``ids``.

        Raises:
            GamaParameterError: if the shape is not n x d with n, d >= 1 or the
                ids are not unique.
            GamaDataError: if any coordinate is NaN or infinite.
        """
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise GamaParameterError(
                'PointSet needs an n x d matrix with n, d >= 1, got shape {}'.format(arr.shape))
        if not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr))[0][0])
            raise GamaDataError('PointSet row {} has a non-finite coordinate'.format(bad))
        if ids is None:
            id_arr = np.arange(arr.shape[0])
        else:
            id_arr = np.asarray(ids, dtype=np.int64).reshape(-1)
            if id_arr.shape[0] != arr.shape[0] or np.unique(id_arr).shape[0] != id_arr.shape[0]:
                raise GamaParameterError('PointSet ids must be unique, one per row')
        id_arr = np.array(id_arr, dtype=np.int64)
        id_arr.setflags(write=False)
        return cls(points=_frozen(arr), ids=id_arr)

    @property
    def n(self):
        """Number of points."""
        return self.points.shape[0]

    @property
    def d(self):
        """Ambient dimension."""
        return self.points.shape[1]

    def row_of(self, node_id):
        """Return the row index holding ``node_id``."""
        rows = np.flatnonzero(self.ids == node_id)
        if rows.shape[0] != 1:
            raise GamaParameterError('Unknown point id {}'.format(node_id))
        return int(rows[0])


def as_point_set(points):
    """Return ``points`` as a ``PointSet``, wrapping raw arrays."""
    if isinstance(points, PointSet):
        return points
    return PointSet.from_array(points)


@dataclass(frozen=True)
class KnnGraph:
    """k-nearest-neighbor graph over the rows of a ``PointSet``.

    Attributes:
        k (int): neighbors selected per node.
        symmetric (bool): whether the directed k-NN relation was mutualized.
        neighbors (np.ndarray): n x k out-neighbor rows, nearest first, ties
            broken by lower point id.
        neighbor_weights (np.ndarray): n x k Euclidean lengths of those edges.
        edges (np.ndarray): E x 2 edge list of ``graph`` (``i < j`` when
            symmetric).
        weights (np.ndarray): E Euclidean edge lengths.
        graph: the rustworkx ``PyGraph`` (symmetric) or ``PyDiGraph``.
    """

    k: int
    symmetric: bool
    neighbors: np.ndarray
    neighbor_weights: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    graph: object = field(repr=False, compare=False)

    @property
    def n(self):
        """Number of nodes."""
        return self.neighbors.shape[0]

    @property
    def num_edges(self):
        """Number of edges in ``graph``."""
        return self.edges.shape[0]

    def adjacency(self, row):
        """Return ``[(neighbor_row, weight), ...]`` leaving ``row``."""
        out = [(int(j), float(w)) for (i, j), w in zip(self.edges, self.weights) if i == row]
        if self.symmetric:
            out += [(int(i), float(w)) for (i, j), w in zip(self.edges, self.weights) if j == row]
        return sorted(out)


def _validate_k(k, n):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise GamaParameterError('k must be a positive integer, got {!r}'.format(k))
    if k >= n:
        raise GamaParameterError('k = {} must be smaller than the number of points {}'.format(k, n))


def build_knn_graph(points, k=DEFAULT_K, symmetrize=True):
    """Build the Euclidean k-NN graph of ``points``.

    Every node gets exactly ``k`` out-edges; among equidistant candidates the
    lower point id wins, which makes the graph deterministic.

    Args:
        points (PointSet or array_like): n x d points.
        k (int): neighbor count, ``1 <= k < n``.
        symmetrize (bool): return an undirected graph with edge (i, j)
            whenever i -> j or j -> i.

    Returns:
        KnnGraph: the graph.

    Raises:
        GamaParameterError: if ``k >= n``.
        GamaDataError: if coordinates are not finite.
    """
    pts = as_point_set(points)
    n = pts.n
    _validate_k(k, n)
    k = int(k)

    neighbors = np.empty((n, k), dtype=np.int64)
    neighbor_weights = np.empty((n, k))
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        dist = cdist(pts.points[start:stop], pts.points)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        id_keys = np.broadcast_to(pts.ids, dist.shape)
        order = np.lexsort((id_keys, dist), axis=-1)[:, :k]
        neighbors[start:stop] = order
        neighbor_weights[start:stop] = np.take_along_axis(dist, order, axis=1)

    src = np.repeat(np.arange(n), k)
    dst = neighbors.reshape(-1)
    wts = neighbor_weights.reshape(-1)
    if symmetrize:
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        _, first = np.unique(lo * n + hi, return_index=True)
        src, dst, wts = lo[first], hi[first], wts[first]
        graph = rustworkx.PyGraph(multigraph=False)
    else:
        graph = rustworkx.PyDiGraph(multigraph=False)
    graph.add_nodes_from(range(n))
    graph.add_edges_from(list(zip(src.tolist(), dst.tolist(), wts.tolist())))

    neighbors.setflags(write=False)
    edges = np.stack([src, dst], axis=1)
    edges.setflags(write=False)
    return KnnGraph(k=k, symmetric=bool(symmetrize), neighbors=neighbors,
                    neighbor_weights=_frozen(neighbor_weights), edges=edges,
                    weights=_frozen(wts), graph=graph)


@dataclass(frozen=True)
class TangentFrame:
    """Base point with an orthonormal basis (d x m) of the local tangent space."""

    base: np.ndarray
    basis: np.ndarray
    explained_variance: float = 1.0

    def __post_init__(self):
        base = _frozen(np.reshape(self.base, -1))
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        if basis.ndim != 2 or basis.shape[0] != base.shape[0]:
            raise GamaParameterError(
                'Tangent basis shape {} does not match base dimension {}'.format(
                    basis.shape, base.shape[0]))
        m = basis.shape[1]
        if m < 1 or m > basis.shape[0]:
            raise GamaParameterError('Tangent dimension must be in [1, d], got {}'.format(m))
        if not np.allclose(basis.T @ basis, np.eye(m), rtol=0.0, atol=ORTHONORMAL_TOL):
            raise GamaParameterError('Tangent basis columns are not orthonormal')
        object.__setattr__(self, 'base', base)
        object.__setattr__(self, 'basis', _frozen(basis))
        object.__setattr__(self, 'explained_variance', float(self.explained_variance))

    @property
    def d(self):
        """Ambient dimension."""
        return self.basis.shape[0]

    @property
    def m(self):
        """Tangent dimension."""
        return self.basis.shape[1]


def _fix_signs(basis):
    """Make the first non-negligible entry of every column positive."""
    for col in range(basis.shape[1]):
        nonzero = np.flatnonzero(np.abs(basis[:, col]) > 1e-12)
        if nonzero.size and basis[nonzero[0], col] < 0:
            basis[:, col] = -basis[:, col]
    return basis


def _choose_dim(ratios, m, rank):
    if isinstance(m, bool):
        raise GamaParameterError('Tangent dimension must be an int or a float threshold')
    if isinstance(m, (int, np.integer)):
        return int(m)
    threshold = float(m)
    if not 0.0 < threshold <= 1.0:
        raise GamaParameterError(
            'Explained-variance threshold must be in (0, 1], got {}'.format(threshold))
    cumulative = np.cumsum(ratios)
    dim = int(np.searchsorted(cumulative, threshold - 1e-12)) + 1
    return min(dim, rank)


def estimate_tangent(points, graph, index, m: Union[int, float] = DEFAULT_VARIANCE_THRESHOLD):
    """Estimate the tangent frame at node ``index`` by local PCA.

    The PCA runs over the base row together with its graph neighbors, so a
    node with ``k`` neighbors contributes ``k + 1`` coordinates, centered at
    their mean. Degree can exceed ``k`` on a symmetrized graph.

    Args:
        points (PointSet or array_like): the points ``graph`` was built on.
        graph (KnnGraph): neighbor graph over ``points``.
        index (int): point id of the base node.
        m (int or float): fixed tangent dimension (int) or the explained
            variance the smallest retained dimension must reach (float).

    Returns:
        TangentFrame: frame with sign-normalized basis columns.

    Raises:
        GamaGeometryError: if the neighborhood has fewer than 2 points.
        DegenerateNeighborhoodError: if the neighborhood has zero variance or
            lower rank than the requested dimension.
        GamaParameterError: if a fixed ``m`` exceeds ``d``.
    """
    pts = as_point_set(points)
    if graph.n != pts.n:
        raise GamaParameterError('Graph has {} nodes but PointSet has {} rows'.format(
            graph.n, pts.n))
    row = pts.row_of(index)
    if isinstance(m, (int, np.integer)) and not isinstance(m, bool) and not 1 <= m <= pts.d:
        raise GamaParameterError('Tangent dimension {} outside [1, {}]'.format(m, pts.d))

    members = np.concatenate(([row], graph.neighbors[row]))
    if members.shape[0] < 2:
        raise GamaGeometryError('Node {} has fewer than 2 neighbors'.format(index))
    local = pts.points[members]
    centered = local - local.mean(axis=0)
    _, sing, vt = linalg.svd(centered, full_matrices=False)
    variances = sing ** 2
    total = variances.sum()
    if total <= 0.0:
        raise DegenerateNeighborhoodError(
            'Neighborhood of node {} has zero variance'.format(index))
    rank = int(np.sum(sing > _RANK_TOL * sing[0]))
    dim = _choose_dim(variances / total, m, rank)
    if dim > rank:
        raise DegenerateNeighborhoodError(
            'Neighborhood of node {} has rank {} < requested dimension {}'.format(
                index, rank, dim))
    basis = _fix_signs(vt[:dim].T.copy())
    return TangentFrame(base=pts.points[row], basis=basis,
                        explained_variance=min(1.0, variances[:dim].sum() / total))


def estimate_frames(points, graph, m=DEFAULT_VARIANCE_THRESHOLD):
    """Estimate the tangent frame at every node, in row order."""
    pts = as_point_set(points)
    return [estimate_tangent(pts, graph, node_id, m) for node_id in pts.ids]


def explained_variance_profile(points, graph, m=DEFAULT_VARIANCE_THRESHOLD):
    """Per-node explained variance of the estimated tangent frames.

    Nodes with degenerate neighborhoods are reported as NaN.
    """
    pts = as_point_set(points)
    profile = np.full(pts.n, np.nan)
    for row, node_id in enumerate(pts.ids):
        try:
            profile[row] = estimate_tangent(pts, graph, node_id, m).explained_variance
        except GamaGeometryError:
            continue
    return profile


def project_tangent(frame, v):
    """Orthogonal projection ``B Bᵀ v`` of ``v`` onto ``span(frame.basis)``.

    Raises:
        GamaParameterError: if ``v`` does not have dimension ``frame.d``.
    """
    vec = np.asarray(v, dtype=float)
    if vec.shape != (frame.d,):
        raise GamaParameterError('Vector of shape {} does not match frame dimension {}'.format(
            vec.shape, frame.d))
    return frame.basis @ (frame.basis.T @ vec)


@dataclass(frozen=True)
class GeodesicIndex:
    """Shortest-path lengths over a ``KnnGraph``.

    ``dist`` is n x n with unreachable pairs set to ``disconnected_penalty``
    (twice the largest finite distance); ``n_unreachable`` counts them.
    """

    graph: KnnGraph
    dist: np.ndarray
    disconnected_penalty: float
    n_unreachable: int

    @property
    def fragmented(self):
        """True when some pair of nodes has no connecting path."""
        return self.n_unreachable > 0


def _apply_penalty(dist):
    unreachable = ~np.isfinite(dist)
    finite = dist[~unreachable]
    penalty = 2.0 * float(finite.max()) if finite.size else 0.0
    count = int(unreachable.sum())
    if count:
        dist = np.where(unreachable, penalty, dist)
        logger.warning('%d node pairs are disconnected; using penalty distance %.6g',
                       count, penalty)
    return dist, penalty, count


def _dijkstra_rows(graph, sources, n):
    rows = np.full((len(sources), n), np.inf)
    for out, node in enumerate(sources):
        lengths = rustworkx.dijkstra_shortest_path_lengths(graph, int(node), float)
        rows[out, int(node)] = 0.0
        for target, length in lengths.items():
            rows[out, target] = length
    return rows


def geodesic_distances(points, graph, all_pairs_cap=DEFAULT_ALL_PAIRS_CAP):
    """Shortest-path distances between all nodes of ``graph``.

    Graphs with at most ``all_pairs_cap`` nodes use rustworkx's all-pairs
    Floyd-Warshall; larger graphs run one Dijkstra per node.

    Raises:
        GamaParameterError: if the graph has no edges or does not match
            ``points``.
    """
    pts = as_point_set(points)
    if graph.num_edges == 0:
        raise GamaParameterError('Cannot compute geodesics on a graph without edges')
    if graph.n != pts.n:
        raise GamaParameterError('Graph has {} nodes but PointSet has {} rows'.format(
            graph.n, pts.n))
    if pts.n <= all_pairs_cap:
        dist = np.array(rustworkx.floyd_warshall_numpy(graph.graph, weight_fn=float),
                        dtype=float)
    else:
        dist = _dijkstra_rows(graph.graph, range(pts.n), pts.n)
    dist, penalty, count = _apply_penalty(dist)
    return GeodesicIndex(graph=graph, dist=_frozen(dist), disconnected_penalty=penalty,
                         n_unreachable=count)


@dataclass(frozen=True)
class JointGeodesic:
    """Geodesics from every source point to every target point on a joint graph.

    Attributes:
        dist (np.ndarray): |S| x |T| distances, unreachable pairs penalized.
        graph (KnnGraph): joint graph, sources first then targets.
        disconnected_penalty (float): distance used for unreachable pairs.
        reachable (np.ndarray): |S| x |T| boolean mask of connected pairs.
        paths (dict or None): ``(i, j) -> joint node rows`` of the selected
            shortest path from source ``i`` to target ``j``.
    """

    dist: np.ndarray
    graph: KnnGraph
    disconnected_penalty: float
    reachable: np.ndarray
    paths: Optional[dict] = field(default=None, repr=False)


def _check_pair(source_emb, target_emb):
    src, tgt = as_point_set(source_emb), as_point_set(target_emb)
    if src.d != tgt.d:
        raise GamaParameterError('Source dimension {} differs from target dimension {}'.format(
            src.d, tgt.d))
    return src, tgt


def joint_geodesic(source_emb, target_emb, k=DEFAULT_K, symmetrize=True, with_paths=False):
    """Build one k-NN graph over source and target and measure S -> T geodesics.

    Args:
        source_emb (PointSet or array_like): |S| x d source points.
        target_emb (PointSet or array_like): |T| x d target points.
        k (int): neighbor count of the joint graph.
        symmetrize (bool): mutualize the joint graph.
        with_paths (bool): also return the node sequence of each shortest path.

    Returns:
        JointGeodesic: distances and, optionally, paths.
    """
    src, tgt = _check_pair(source_emb, target_emb)
    n_s, n_t = src.n, tgt.n
    union = PointSet.from_array(np.vstack([src.points, tgt.points]))
    graph = build_knn_graph(union, k, symmetrize=symmetrize)
    paths = {} if with_paths else None
    rows = np.full((n_s, union.n), np.inf)
    for i in range(n_s):
        if with_paths:
            found = rustworkx.dijkstra_shortest_paths(graph.graph, i, weight_fn=float)
            for node, path in found.items():
                if node >= n_s:
                    paths[(i, node - n_s)] = np.asarray(path, dtype=np.int64)
        lengths = rustworkx.dijkstra_shortest_path_lengths(graph.graph, i, float)
        rows[i, i] = 0.0
        for node, length in lengths.items():
            rows[i, node] = length
    reachable = np.isfinite(rows[:, n_s:])
    rows, penalty, _ = _apply_penalty(rows)
    return JointGeodesic(dist=_frozen(rows[:, n_s:]), graph=graph,
                         disconnected_penalty=penalty, reachable=reachable, paths=paths)


def cross_geodesic(source_emb, target_emb, k=DEFAULT_K):
    """Geodesic distance matrix (|S| x |T|) over the joint k-NN graph.

    Raises:
        GamaParameterError: if the two sets differ in dimension.
    """
    return joint_geodesic(source_emb, target_emb, k).dist


def median_pairwise_distance(*point_sets):
    """Median Euclidean distance over all pairs of the union of ``point_sets``."""
    union = np.vstack([as_point_set(p).points for p in point_sets])
    if union.shape[0] < 2:
        return 1.0
    median = float(np.median(pdist(union)))
    return median if median > 0.0 else 1.0


def kernel_distances(source_emb, target_emb, sigma=None):
    """Radial-basis-kernel surrogate of d_g.

    ``d(a, b) = -log(exp(-|a - b|^2 / 2 sigma^2)) = |a - b|^2 / (2 sigma^2)``
    with ``sigma`` defaulting to the median pairwise distance of the union.

    Returns:
        tuple(np.ndarray, float): |S| x |T| distances and the bandwidth used.
    """
    src, tgt = _check_pair(source_emb, target_emb)
    if sigma is None:
        sigma = median_pairwise_distance(src, tgt)
    sq = cdist(src.points, tgt.points, 'sqeuclidean')
    return sq / (2.0 * sigma ** 2), float(sigma)


@dataclass(frozen=True)
class GeometryConfig:
    """Settings of the ``[geometry]`` config section.

    ``tangent_dim = 0`` selects the explained-variance rule with
    ``variance_threshold``; a positive value fixes the tangent dimension.

    ``geodesic_gradient`` defaults to ``path``: a graph geodesic is
    differentiated as the Euclidean length of its selected shortest path, the
    path itself held fixed. ``stop`` treats geodesic values as constants, the
    literal stop-gradient, under which the alignment term passes no gradient
    to the network in graph mode. The kernel mode is differentiable either way.
    """

    k: int = DEFAULT_K
    tangent_dim: int = 0
    variance_threshold: float = DEFAULT_VARIANCE_THRESHOLD
    geodesic_mode: GeodesicMode = GeodesicMode.GRAPH
    geodesic_gradient: GeodesicGradient = GeodesicGradient.PATH
    all_pairs_cap: int = DEFAULT_ALL_PAIRS_CAP

    def __post_init__(self):
        if int(self.k) < 1:
            raise GamaParameterError('k must be >= 1, got {}'.format(self.k))
        if int(self.tangent_dim) < 0:
            raise GamaParameterError('tangent_dim must be >= 0')
        if not 0.0 < float(self.variance_threshold) <= 1.0:
            raise GamaParameterError('variance_threshold must be in (0, 1]')
        if int(self.all_pairs_cap) < 1:
            raise GamaParameterError('all_pairs_cap must be >= 1')
        object.__setattr__(self, 'k', int(self.k))
        object.__setattr__(self, 'tangent_dim', int(self.tangent_dim))
        object.__setattr__(self, 'variance_threshold', float(self.variance_threshold))
        object.__setattr__(self, 'geodesic_mode', GeodesicMode(self.geodesic_mode))
        object.__setattr__(self, 'geodesic_gradient', GeodesicGradient(self.geodesic_gradient))
        object.__setattr__(self, 'all_pairs_cap', int(self.all_pairs_cap))

    @property
    def tangent_rule(self):
        """Argument ``m`` for :func:`estimate_tangent`."""
        return self.tangent_dim if self.tangent_dim > 0 else self.variance_threshold
