# -*- coding: utf-8 -*-

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

# pylint: disable=missing-class-docstring, missing-function-docstring

"""Test k-NN graphs, tangent frames and geodesics."""

import numpy as np
from scipy.spatial.distance import cdist

from gama_adapt.constants import GeodesicGradient, GeodesicMode
from gama_adapt.exceptions import (DegenerateNeighborhoodError, GamaDataError,
                                   GamaParameterError)
from gama_adapt.geometry import (GeometryConfig, PointSet, TangentFrame, build_knn_graph,
                                 estimate_frames, estimate_tangent, explained_variance_profile,
                                 geodesic_distances, joint_geodesic, kernel_distances,
                                 median_pairwise_distance, project_tangent)

from .base import GamaTestCase


def floyd_warshall(n, edges, weights, symmetric):
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for (i, j), w in zip(edges, weights):
        dist[i, j] = min(dist[i, j], w)
        if symmetric:
            dist[j, i] = min(dist[j, i], w)
    for u in range(n):
        dist = np.minimum(dist, dist[:, [u]] + dist[[u], :])
    return dist


class TestPointSet(GamaTestCase):

    def test_rejects_non_finite(self):
        with self.assertRaises(GamaDataError):
            PointSet.from_array([[0.0, 1.0], [np.nan, 0.0]])

    def test_rejects_duplicate_ids(self):
        with self.assertRaises(GamaParameterError):
            PointSet.from_array([[0.0], [1.0]], ids=[3, 3])

    def test_vector_becomes_column(self):
        pts = PointSet.from_array([0.0, 1.0, 2.0])
        self.assertEqual((pts.n, pts.d), (3, 1))
        self.assertArrayEqual(pts.ids, [0, 1, 2])


class TestKnnGraph(GamaTestCase):

    def test_collinear_points(self):
        graph = build_knn_graph([[0.0], [1.0], [2.0]], 1, symmetrize=False)
        self.assertArrayEqual(graph.neighbors[:, 0], [1, 0, 1])
        self.assertEqual(sorted(map(tuple, graph.edges.tolist())), [(0, 1), (1, 0), (2, 1)])
        self.assertAllClose(graph.weights, [1.0, 1.0, 1.0])

        sym = build_knn_graph([[0.0], [1.0], [2.0]], 1, symmetrize=True)
        self.assertEqual(sorted(map(tuple, sym.edges.tolist())), [(0, 1), (1, 2)])
        self.assertEqual(sym.adjacency(1), [(0, 1.0), (2, 1.0)])

    def test_k_equal_n_minus_one_is_complete(self):
        points = self.rng.normal(size=(6, 3))
        graph = build_knn_graph(points, 5, symmetrize=False)
        self.assertEqual(graph.num_edges, 30)
        expected = cdist(points, points)
        for (i, j), w in zip(graph.edges, graph.weights):
            self.assertAlmostEqual(w, expected[i, j], places=12)

    def test_neighbors_match_brute_force(self):
        points = self.rng.uniform(size=(50, 2))
        graph = build_knn_graph(points, 5, symmetrize=False)
        dist = cdist(points, points)
        np.fill_diagonal(dist, np.inf)
        for row in range(50):
            expected = np.argsort(dist[row], kind='stable')[:5]
            self.assertEqual(set(graph.neighbors[row]), set(expected))
            self.assertTrue(np.all(np.diff(graph.neighbor_weights[row]) >= 0))

    def test_symmetric_graph_contains_both_directions(self):
        points = self.rng.normal(size=(30, 2))
        directed = build_knn_graph(points, 3, symmetrize=False)
        sym = build_knn_graph(points, 3, symmetrize=True)
        pairs = {tuple(sorted(e)) for e in sym.edges.tolist()}
        for i, j in directed.edges.tolist():
            self.assertIn((min(i, j), max(i, j)), pairs)

    def test_k_too_large(self):
        with self.assertRaises(GamaParameterError):
            build_knn_graph(np.zeros((3, 2)), 3)

    def test_non_finite_input(self):
        with self.assertRaises(GamaDataError):
            build_knn_graph([[0.0, 0.0], [np.inf, 1.0], [1.0, 1.0]], 1)

    def test_deterministic_tie_break(self):
        # The middle point is equidistant from both ends; the lower id wins.
        graph = build_knn_graph([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]], 1, symmetrize=False)
        self.assertEqual(int(graph.neighbors[1, 0]), 0)


class TestTangentFrames(GamaTestCase):

    def test_exact_line(self):
        points = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]
        graph = build_knn_graph(points, 2)
        frame = estimate_tangent(points, graph, 1, 1)
        self.assertAllClose(frame.basis[:, 0], [1.0, 0.0], atol=1e-12)
        self.assertAlmostEqual(frame.explained_variance, 1.0)

    def test_base_point_joins_its_neighbors(self):
        points = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]
        graph = build_knn_graph(points, 1)
        self.assertEqual(list(graph.neighbors[0]), [1])
        frame = estimate_tangent(points, graph, 0, 1)
        self.assertAllClose(frame.basis[:, 0], [1.0, 0.0], atol=1e-12)
        self.assertAllClose(frame.base, [0.0, 0.0])

    def test_circle_tangent(self):
        angles = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
        points = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        graph = build_knn_graph(points, 2)
        frame = estimate_tangent(points, graph, 0, 1)
        self.assertLess(abs(abs(frame.basis[1, 0]) - 1.0), 1e-2)
        self.assertGreater(frame.basis[1, 0], 0.0)

    def test_frame_rotates_with_the_points(self):
        points = self.rng.normal(size=(20, 3))
        rotation, _ = np.linalg.qr(self.rng.normal(size=(3, 3)))
        turned = points @ rotation.T
        for m in (1, 2):
            frame = estimate_tangent(points, build_knn_graph(points, 6), 0, m)
            moved = estimate_tangent(turned, build_knn_graph(turned, 6), 0, m)
            self.assertAllClose(moved.base, rotation @ frame.base, atol=1e-12)
            for col in range(m):
                overlap = moved.basis[:, col] @ (rotation @ frame.basis[:, col])
                self.assertAlmostEqual(abs(overlap), 1.0, delta=1e-8)
            self.assertAlmostEqual(moved.explained_variance, frame.explained_variance)

    def test_rank_deficient_neighborhood(self):
        points = [[0.0, 0.0], [1.0, 1.0]]
        graph = build_knn_graph(points, 1)
        with self.assertRaises(DegenerateNeighborhoodError):
            estimate_tangent(points, graph, 0, 2)

    def test_identical_neighbors(self):
        points = np.zeros((4, 2))
        graph = build_knn_graph(points, 2)
        with self.assertRaises(DegenerateNeighborhoodError):
            estimate_tangent(points, graph, 0, 1)

    def test_orthonormal_frames_on_noisy_plane(self):
        plane = self.rng.normal(size=(40, 2)) @ np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        points = plane + 1e-3 * self.rng.normal(size=(40, 3))
        graph = build_knn_graph(points, 10)
        for frame in estimate_frames(points, graph, 2):
            self.assertAllClose(frame.basis.T @ frame.basis, np.eye(2), atol=1e-8)
            self.assertGreaterEqual(frame.explained_variance, 0.99)
            self.assertLess(abs(frame.basis[2]).max(), 0.1)

    def test_variance_rule_on_line(self):
        t = np.linspace(0.0, 1.0, 12)
        points = np.outer(t, [1.0, 2.0, 2.0])
        frame = estimate_tangent(points, build_knn_graph(points, 4), 5, 0.9)
        self.assertEqual(frame.m, 1)
        self.assertAllClose(frame.basis[:, 0], [1 / 3, 2 / 3, 2 / 3], atol=1e-12)

    def test_sign_convention(self):
        points = self.rng.normal(size=(20, 4))
        graph = build_knn_graph(points, 6)
        frame = estimate_tangent(points, graph, 3, 2)
        for col in frame.basis.T:
            first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
            self.assertGreater(first, 0.0)

    def test_profile_marks_degenerate_nodes(self):
        points = np.vstack([np.zeros((3, 2)), self.rng.normal(size=(10, 2)) + 10.0])
        profile = explained_variance_profile(points, build_knn_graph(points, 2), 1)
        self.assertTrue(np.isnan(profile[0]))
        self.assertTrue(np.all(np.isfinite(profile[3:])))

    def test_fixed_dimension_above_d(self):
        points = self.rng.normal(size=(10, 2))
        with self.assertRaises(GamaParameterError):
            estimate_tangent(points, build_knn_graph(points, 3), 0, 3)


class TestProjection(GamaTestCase):

    def test_axis_projection(self):
        frame = TangentFrame(base=[0.0, 0.0], basis=[[1.0], [0.0]])
        self.assertAllClose(project_tangent(frame, [3.0, 4.0]), [3.0, 0.0])

    def test_idempotent_and_non_expansive(self):
        for _ in range(1000):
            d = int(self.rng.integers(2, 9))
            m = int(self.rng.integers(1, d + 1))
            basis, _ = np.linalg.qr(self.rng.normal(size=(d, m)))
            frame = TangentFrame(base=np.zeros(d), basis=basis)
            v = self.rng.normal(size=d)
            once = project_tangent(frame, v)
            self.assertLessEqual(np.linalg.norm(project_tangent(frame, once) - once), 1e-10)
            self.assertLessEqual(np.linalg.norm(once), np.linalg.norm(v) + 1e-10)

    def test_matches_least_squares(self):
        basis, _ = np.linalg.qr(self.rng.normal(size=(5, 2)))
        frame = TangentFrame(base=np.zeros(5), basis=basis)
        v = self.rng.normal(size=5)
        coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
        self.assertAllClose(project_tangent(frame, v), basis @ coef, atol=1e-12)

    def test_dimension_mismatch(self):
        frame = TangentFrame(base=[0.0, 0.0], basis=[[1.0], [0.0]])
        with self.assertRaises(GamaParameterError):
            project_tangent(frame, [1.0, 2.0, 3.0])

    def test_frame_requires_orthonormal_basis(self):
        with self.assertRaises(GamaParameterError):
            TangentFrame(base=[0.0, 0.0], basis=[[2.0], [0.0]])


class TestGeodesics(GamaTestCase):

    def test_floyd_warshall_oracle(self):
        for trial in range(20):
            n = int(self.rng.integers(5, 31))
            k = int(self.rng.integers(1, min(5, n - 1) + 1))
            points = self.rng.normal(size=(n, 2))
            symmetric = bool(trial % 2)
            graph = build_knn_graph(points, k, symmetrize=symmetric)
            expected = floyd_warshall(n, graph.edges, graph.weights, symmetric)
            index = geodesic_distances(points, graph)
            finite = np.isfinite(expected)
            self.assertAllClose(index.dist[finite], expected[finite], rtol=0, atol=1e-9)
            self.assertEqual(index.n_unreachable, int((~finite).sum()))
            dijkstra = geodesic_distances(points, graph, all_pairs_cap=1)
            self.assertAllClose(dijkstra.dist, index.dist, rtol=0, atol=1e-9)

    def test_metric_axioms(self):
        points = self.rng.normal(size=(25, 2))
        dist = geodesic_distances(points, build_knn_graph(points, 4)).dist
        self.assertArrayEqual(np.diag(dist), np.zeros(25))
        self.assertAllClose(dist, dist.T, rtol=0, atol=1e-12)
        for u in range(25):
            self.assertTrue(np.all(dist <= dist[:, [u]] + dist[[u], :] + 1e-9))

    def test_geodesic_never_shorter_than_straight_line(self):
        angles = np.linspace(0.0, 2.0 * np.pi, 40, endpoint=False)
        ring = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        cloud = self.rng.normal(size=(30, 3))
        for points, k in ((ring, 2), (cloud, 5)):
            index = geodesic_distances(points, build_knn_graph(points, k))
            straight = cdist(points, points)
            connected = np.ones_like(straight, dtype=bool)
            if index.fragmented:
                connected = index.dist != index.disconnected_penalty
            self.assertTrue(np.all(index.dist[connected] >= straight[connected] - 1e-9))
        ring_index = geodesic_distances(ring, build_knn_graph(ring, 2))
        self.assertFalse(ring_index.fragmented)
        self.assertGreater(ring_index.dist[0, 20], 2.0 + 1e-3)

    def test_disconnected_pairs_get_penalty(self):
        points = [[0.0], [1.0], [100.0], [101.0]]
        index = geodesic_distances(points, build_knn_graph(points, 1))
        self.assertTrue(index.fragmented)
        self.assertEqual(index.n_unreachable, 8)
        self.assertAlmostEqual(index.disconnected_penalty, 2.0)
        self.assertAlmostEqual(index.dist[0, 3], 2.0)

    def test_joint_geodesic_two_singletons(self):
        joint = joint_geodesic([[0.0, 0.0]], [[3.0, 4.0]], k=1)
        self.assertAllClose(joint.dist, [[5.0]])
        self.assertTrue(joint.reachable.all())

    def test_joint_paths_sum_to_distance(self):
        src = self.rng.normal(size=(8, 2))
        tgt = self.rng.normal(size=(7, 2)) + 0.5
        joint = joint_geodesic(src, tgt, k=3, with_paths=True)
        union = np.vstack([src, tgt])
        for (i, j), path in joint.paths.items():
            self.assertEqual(path[0], i)
            self.assertEqual(path[-1], 8 + j)
            length = np.linalg.norm(np.diff(union[path], axis=0), axis=1).sum()
            self.assertAlmostEqual(length, joint.dist[i, j], places=9)

    def test_joint_dimension_mismatch(self):
        with self.assertRaises(GamaParameterError):
            joint_geodesic(np.zeros((3, 2)), np.zeros((3, 3)))

    def test_kernel_distances(self):
        src = np.array([[0.0, 0.0], [1.0, 0.0]])
        tgt = np.array([[0.0, 2.0]])
        dist, sigma = kernel_distances(src, tgt, sigma=1.0)
        self.assertEqual(sigma, 1.0)
        self.assertAllClose(dist, [[2.0], [2.5]])
        _, median = kernel_distances(src, tgt)
        self.assertAlmostEqual(median, median_pairwise_distance(src, tgt))


class TestGeometryConfig(GamaTestCase):

    def test_tangent_rule(self):
        self.assertEqual(GeometryConfig().tangent_rule, 0.9)
        self.assertEqual(GeometryConfig(tangent_dim=2).tangent_rule, 2)

    def test_enum_coercion_and_validation(self):
        self.assertIs(GeometryConfig(geodesic_mode='kernel').geodesic_mode, GeodesicMode.KERNEL)
        with self.assertRaises(GamaParameterError):
            GeometryConfig(variance_threshold=1.5)

    def test_geodesic_gradient_defaults_to_path(self):
        self.assertIs(GeometryConfig().geodesic_gradient, GeodesicGradient.PATH)
        self.assertIs(GeometryConfig(geodesic_gradient='stop').geodesic_gradient,
                      GeodesicGradient.STOP)
