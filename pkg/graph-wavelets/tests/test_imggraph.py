from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse import csgraph

PACKAGE_ROOT = Path(__file__).resolve().parents[1]
if str(PACKAGE_ROOT) not in sys.path:
    sys.path.insert(0, str(PACKAGE_ROOT))

from perceptual_wavelets.config import DistanceMode, GraphParams
from perceptual_wavelets.imggraph import (
    GraphConstructionError,
    KnnGraph,
    WeightedGraph,
    adjacency,
    build_inpainting_topology,
    build_knn,
    build_weighted_graph,
    connected_component_count,
    gaussian_weight,
    geodesic_neighborhood,
    knn_distance,
    laplacian,
    pixel_features,
    read_edge_list,
    write_edge_list,
)
from perceptual_wavelets.samples import block_mask, cartoon_image, constant_image


@pytest.fixture
def cartoon():
    return cartoon_image(10, 10)


def _random_length_graph(rng, n, density=0.4) -> KnnGraph:
    upper = np.triu(rng.uniform(0.5, 5.0, (n, n)) * (rng.random((n, n)) < density), k=1)
    return KnnGraph(n_vertices=n, lengths=sparse.csr_matrix(upper + upper.T))


def _brute_force_distances(g: KnnGraph, source: int):
    best = {source: 0.0}

    def walk(vertex, length, visited):
        for nxt, edge in g.neighbors(vertex):
            if nxt in visited:
                continue
            total = length + edge
            if total < best.get(nxt, math.inf):
                best[nxt] = total
            walk(nxt, total, visited | {nxt})

    walk(source, 0.0, {source})
    return best


def test_pixel_features_are_row_major(cartoon):
    features = pixel_features(cartoon, DistanceMode.EUCLIDEAN_RGB)
    assert len(features) == 100
    feature = features[23]
    assert (feature.index, feature.x, feature.y) == (23, 3, 2)
    assert feature.color == tuple(cartoon[2, 3])


def test_de2000_features_carry_lab_colors(cartoon):
    features = pixel_features(cartoon, "de2000")
    assert features.mode is DistanceMode.DELTA_E2000
    assert 0.0 <= features[0].color[0] <= 100.0


def test_knn_distance_combines_space_and_color():
    features = pixel_features(np.array([[[0, 0, 0], [3, 4, 0]]], dtype=float), "ed")
    assert knn_distance(features[0], features[1], "ed") == pytest.approx(math.sqrt(1 + 25))
    with pytest.raises(GraphConstructionError):
        knn_distance(features[0], features[1], "de2000")


def test_build_knn_gives_every_vertex_k_neighbors(cartoon):
    features = pixel_features(cartoon, "ed")
    knn = build_knn(features, 4)
    lengths = knn.lengths
    assert (lengths != lengths.T).nnz == 0
    assert lengths.diagonal().sum() == 0
    assert np.all(np.diff(lengths.indptr) >= 4)
    with pytest.raises(GraphConstructionError):
        build_knn(features, 100)


def test_knn_on_a_row_of_equal_colors_links_adjacent_pixels():
    features = pixel_features(constant_image(1, 5), "ed")
    knn = build_knn(features, 2)
    hood = dict(knn.neighbors(2))
    assert hood[1] == 1.0 and hood[3] == 1.0
    assert build_knn(features, 2).lengths.nnz == knn.lengths.nnz


def test_geodesic_neighborhood_matches_scipy_dijkstra():
    rng = np.random.default_rng(5)
    g = _random_length_graph(rng, 30, density=0.2)
    reference = csgraph.dijkstra(g.lengths, directed=False, indices=0)
    hood = geodesic_neighborhood(g, 0, 10)
    reachable = np.sort(reference[np.isfinite(reference)])[1:]
    assert [d for _, d in hood] == pytest.approx(list(reachable[: len(hood)]))
    for vertex, dist in hood:
        assert dist == pytest.approx(reference[vertex])


@pytest.mark.parametrize("seed", range(20))
def test_geodesic_distances_equal_simple_path_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(4, 11))
    g = _random_length_graph(rng, n)
    source = int(rng.integers(0, n))
    expected = _brute_force_distances(g, source)
    hood = dict(geodesic_neighborhood(g, source, n - 1))
    assert set(hood) == set(expected) - {source}
    for vertex, dist in hood.items():
        assert dist == pytest.approx(expected[vertex], abs=1e-12)


def test_geodesic_neighborhood_respects_budget():
    g = _random_length_graph(np.random.default_rng(1), 20, density=0.5)
    assert len(geodesic_neighborhood(g, 3, 5)) == 5
    with pytest.raises(GraphConstructionError):
        geodesic_neighborhood(g, 20, 5)


def test_gaussian_weight_is_one_at_zero_and_decays():
    weights = gaussian_weight([0.0, 5.0, 10.0], 10.0)
    assert weights[0] == 1.0
    assert weights[2] == pytest.approx(math.exp(-1.0))
    assert weights[1] > weights[2]
    with pytest.raises(GraphConstructionError):
        gaussian_weight([1.0], 0.0)


def test_weighted_graph_invariants(cartoon):
    graph = build_weighted_graph(pixel_features(cartoon, "ed"), GraphParams(k=4, sigma=30.0))
    weights = graph.weights
    assert graph.n_vertices == 100
    assert abs(weights - weights.T).max() == 0.0
    assert weights.diagonal().sum() == 0.0
    assert weights.data.min() > 0.0 and weights.data.max() <= 1.0
    assert graph.n_edges == len(list(graph.edges()))
    assert all(m < n for m, n, _ in graph.edges())


def test_weighted_graph_is_deterministic_across_thread_counts(cartoon):
    features = pixel_features(cartoon, "de2000")
    params = GraphParams(k=4, sigma=20.0)
    single = build_weighted_graph(features, params, threads=1)
    pooled = build_weighted_graph(features, params, threads=4)
    assert (single.weights != pooled.weights).nnz == 0


def test_laplacian_is_symmetric_psd_with_zero_row_sums(cartoon):
    graph = build_weighted_graph(pixel_features(cartoon, "ed"), GraphParams(k=4))
    L = laplacian(graph)
    np.testing.assert_allclose(np.asarray(L.sum(axis=1)).ravel(), 0.0, atol=1e-12)
    assert abs(L - L.T).max() < 1e-15
    assert np.linalg.eigvalsh(L.toarray()).min() > -1e-9
    np.testing.assert_allclose(L.diagonal(), np.asarray(adjacency(graph).sum(axis=1)).ravel())


def test_zero_eigenvalue_multiplicity_equals_component_count():
    weights = sparse.csr_matrix(
        np.array(
            [
                [0, 1, 0, 0, 0],
                [1, 0, 0, 0, 0],
                [0, 0, 0, 0.5, 0.5],
                [0, 0, 0.5, 0, 0.5],
                [0, 0, 0.5, 0.5, 0],
            ]
        )
    )
    graph = WeightedGraph(n_vertices=5, weights=weights)
    eigenvalues = np.linalg.eigvalsh(laplacian(graph).toarray())
    assert connected_component_count(graph) == 2
    assert int(np.sum(eigenvalues < 1e-10)) == 2


def test_weighted_graph_rejects_self_loops():
    with pytest.raises(GraphConstructionError):
        WeightedGraph(n_vertices=2, weights=sparse.csr_matrix(np.eye(2)))


def test_inpainting_topology_meshes_missing_pixels(cartoon):
    features = pixel_features(cartoon, "ed")
    known = block_mask(10, 10, 4, 4, 2)
    graph = build_inpainting_topology(features, known, GraphParams(k=4))
    missing_vertex = 4 * 10 + 4
    neighbors = set(graph.weights[missing_vertex].indices)
    expected = {(4 + dy) * 10 + (4 + dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)} - {missing_vertex}
    assert neighbors == expected


def test_interior_missing_pixel_has_eight_spatial_edges():
    features = pixel_features(constant_image(5, 5), "ed")
    graph = build_inpainting_topology(features, block_mask(5, 5, 2, 2, 1), GraphParams(k=3, sigma=4.0))
    row = graph.weights[12]
    assert row.nnz == 8
    diagonal = {6, 8, 16, 18}
    for vertex, weight in zip(row.indices, row.data):
        rho = math.sqrt(2.0) if vertex in diagonal else 1.0
        assert weight == pytest.approx(float(gaussian_weight(rho, 4.0)))


def test_missing_block_in_small_image_stays_connected():
    features = pixel_features(cartoon_image(4, 4), "ed")
    graph = build_inpainting_topology(features, block_mask(4, 4, 1, 1, 2), GraphParams(k=3))
    assert connected_component_count(graph) == 1


@pytest.mark.parametrize("n_known", [1, 2, 5])
def test_inpainting_topology_with_fewer_known_pixels_than_k(n_known):
    known = np.zeros((6, 6), dtype=bool)
    known.ravel()[np.arange(n_known) * 7] = True
    features = pixel_features(cartoon_image(6, 6), "ed")
    graph = build_inpainting_topology(features, known, GraphParams(k=8))
    assert graph.n_vertices == 36
    assert connected_component_count(graph) == 1


def test_inpainting_topology_rejects_bad_masks(cartoon):
    features = pixel_features(cartoon, "ed")
    with pytest.raises(GraphConstructionError):
        build_inpainting_topology(features, np.zeros((10, 10), dtype=bool), GraphParams(k=4))
    with pytest.raises(GraphConstructionError):
        build_inpainting_topology(features, np.ones((5, 5), dtype=bool), GraphParams(k=4))


def test_inpainting_topology_without_holes_is_the_plain_graph(cartoon):
    features = pixel_features(cartoon, "ed")
    params = GraphParams(k=4)
    plain = build_weighted_graph(features, params)
    topology = build_inpainting_topology(features, np.ones((10, 10), dtype=bool), params)
    assert (plain.weights != topology.weights).nnz == 0


def test_edge_list_round_trip(tmp_path, cartoon):
    graph = build_weighted_graph(pixel_features(cartoon, "ed"), GraphParams(k=3))
    target = tmp_path / "graph.txt"
    write_edge_list(graph, target)
    first = target.read_text().splitlines()[0].split()
    assert int(first[0]) < int(first[1])
    loaded = read_edge_list(target, n_vertices=graph.n_vertices)
    assert abs(loaded.weights - graph.weights).max() == 0.0


def test_build_knn_matches_brute_force_neighbors():
    image = np.random.default_rng(7).uniform(0.0, 255.0, (2, 5, 3))
    features = pixel_features(image, "ed")
    n = len(features)
    table = np.array([[knn_distance(features[i], features[j], "ed") for j in range(n)] for i in range(n)])
    expected = np.zeros((n, n))
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (table[i, j], j))[:3]
        for j in order:
            expected[i, j] = expected[j, i] = table[i, j]
    lengths = build_knn(features, 3).lengths.toarray()
    np.testing.assert_array_equal(lengths != 0, expected != 0)
    np.testing.assert_allclose(lengths, expected, rtol=1e-9)


def test_knn_tie_goes_to_lower_index():
    # pixel 1 sits at the same distance from pixels 0 and 2; pixels 0 and 2 prefer each other
    image = np.array([[[0, 0, 0], [10, 0, 0], [0, 0, 0]]], dtype=float)
    lengths = build_knn(pixel_features(image, "ed"), 1).lengths
    edges = {(m, n) for m, n in zip(*sparse.triu(lengths, k=1).nonzero())}
    assert edges == {(0, 1), (0, 2)}


def test_knn_with_k_one_below_size_is_complete():
    image = np.random.default_rng(8).uniform(0.0, 255.0, (2, 3, 3))
    lengths = build_knn(pixel_features(image, "ed"), 5).lengths
    assert lengths.nnz == 6 * 5


def test_wider_sigma_never_lowers_a_weight(cartoon):
    features = pixel_features(cartoon, "ed")
    narrow = build_weighted_graph(features, GraphParams(k=4, sigma=10.0)).weights.toarray()
    wide = build_weighted_graph(features, GraphParams(k=4, sigma=20.0)).weights.toarray()
    assert np.all(wide >= narrow)


@pytest.mark.parametrize("seed", range(5))
def test_geodesic_distances_satisfy_triangle_inequality(seed):
    rng = np.random.default_rng(300 + seed)
    n = 12
    g = _random_length_graph(rng, n, density=0.3)
    dist = np.full((n, n), math.inf)
    for s in range(n):
        dist[s, s] = 0.0
        for vertex, d in geodesic_neighborhood(g, s, n - 1):
            dist[s, vertex] = d
    np.testing.assert_allclose(dist, dist.T)
    for j in range(n):
        assert np.all(dist <= dist[:, [j]] + dist[[j], :] + 1e-12)
