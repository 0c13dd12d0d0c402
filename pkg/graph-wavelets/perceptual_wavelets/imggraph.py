"""Weighted graphs of color images: geodesic k-NN structure and Laplacians."""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse
from scipy.sparse import csgraph

from perceptual_wavelets.color import delta_e2000_array, delta_e_rgb_array, srgb_to_lab_array
from perceptual_wavelets.config import DistanceMode, GraphParams


LOGGER = logging.getLogger("perceptual_wavelets.imggraph")

# Rows of the pairwise distance table evaluated at once.
DISTANCE_CHUNK = 256

MESH_OFFSETS = tuple(
    (dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)
)


class GraphConstructionError(ValueError):
    """Raised when an image graph cannot be built from the given inputs."""


@dataclass(frozen=True)
class PixelFeature:
    """Position and color of one vertex; color is RGB or Lab depending on mode."""

    index: int
    x: int
    y: int
    color: Tuple[float, float, float]
    mode: DistanceMode


@dataclass(frozen=True, eq=False)
class FeatureSet(Sequence[PixelFeature]):
    """Row-major pixel features of an image, or of a subset of its pixels."""

    width: int
    height: int
    mode: DistanceMode
    coords: NDArray[np.float64]
    colors: NDArray[np.float64]
    vertex_ids: NDArray[np.intp]

    def __len__(self) -> int:
        return int(self.vertex_ids.shape[0])

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        x, y = self.coords[i]
        return PixelFeature(
            index=int(self.vertex_ids[i]),
            x=int(x),
            y=int(y),
            color=tuple(float(v) for v in self.colors[i]),
            mode=self.mode,
        )

    @property
    def n_total(self) -> int:
        """Vertex count of the whole image the features belong to."""

        return self.width * self.height

    def subset(self, positions: ArrayLike) -> "FeatureSet":
        idx = np.asarray(positions, dtype=np.intp)
        return FeatureSet(
            width=self.width,
            height=self.height,
            mode=self.mode,
            coords=self.coords[idx],
            colors=self.colors[idx],
            vertex_ids=self.vertex_ids[idx],
        )

    def distances_from(self, sources: ArrayLike) -> NDArray[np.float64]:
        """Distance table between the given local positions and every feature."""

        src = np.asarray(sources, dtype=np.intp)
        spatial = self.coords[src, None, :] - self.coords[None, :, :]
        spatial_sq = np.sum(spatial * spatial, axis=-1)
        if self.mode is DistanceMode.DELTA_E2000:
            color_term = delta_e2000_array(self.colors[src, None, :], self.colors[None, :, :])
        else:
            color_term = delta_e_rgb_array(self.colors[src, None, :], self.colors[None, :, :])
        return np.sqrt(spatial_sq + color_term * color_term)


@dataclass(frozen=True, eq=False)
class KnnGraph:
    """Symmetrized k-NN candidate edges with their k-NN distances as lengths."""

    n_vertices: int
    lengths: sparse.csr_matrix

    @cached_property
    def _adjacency_lists(self) -> Tuple[List[List[int]], List[List[float]]]:
        indptr, indices, data = self.lengths.indptr, self.lengths.indices, self.lengths.data
        neighbors = [indices[indptr[v] : indptr[v + 1]].tolist() for v in range(self.n_vertices)]
        lengths = [data[indptr[v] : indptr[v + 1]].tolist() for v in range(self.n_vertices)]
        return neighbors, lengths

    def neighbors(self, vertex: int) -> List[Tuple[int, float]]:
        neighbors, lengths = self._adjacency_lists
        return list(zip(neighbors[vertex], lengths[vertex]))


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Loopless undirected graph over image pixels with weights in (0, 1]."""

    n_vertices: int
    weights: sparse.csr_matrix = field(repr=False)

    def __post_init__(self) -> None:
        if self.weights.shape != (self.n_vertices, self.n_vertices):
            raise GraphConstructionError(
                f"weight matrix shape {self.weights.shape} does not match {self.n_vertices} vertices"
            )
        if self.weights.diagonal().any():
            raise GraphConstructionError("graph must not contain self-loops")
        if self.weights.nnz and self.weights.data.min() <= 0.0:
            raise GraphConstructionError("edge weights must be strictly positive")

    @property
    def n_edges(self) -> int:
        return int(sparse.triu(self.weights, k=1).nnz)

    def edges(self) -> Iterator[Tuple[int, int, float]]:
        """Yield each undirected edge once as (m, n, w) with m < n."""

        upper = sparse.triu(self.weights, k=1).tocsr()
        upper.sort_indices()
        for m in range(self.n_vertices):
            start, stop = upper.indptr[m], upper.indptr[m + 1]
            for n, w in zip(upper.indices[start:stop], upper.data[start:stop]):
                yield m, int(n), float(w)


def pixel_features(image: ArrayLike, mode: DistanceMode) -> FeatureSet:
    """Build one feature per pixel with row-major vertex indices n = y * width + x."""

    mode = DistanceMode(mode)
    pixels = np.asarray(image, dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[-1] != 3:
        raise GraphConstructionError(f"expected an (H, W, 3) color image, got shape {pixels.shape}")
    height, width = pixels.shape[:2]
    if height == 0 or width == 0:
        raise GraphConstructionError("cannot build features of an empty image")

    ys, xs = np.divmod(np.arange(height * width), width)
    coords = np.column_stack([xs, ys]).astype(np.float64)
    colors = pixels.reshape(-1, 3)
    if mode is DistanceMode.DELTA_E2000:
        colors = srgb_to_lab_array(colors)
    return FeatureSet(
        width=width,
        height=height,
        mode=mode,
        coords=coords,
        colors=np.ascontiguousarray(colors),
        vertex_ids=np.arange(height * width, dtype=np.intp),
    )


def knn_distance(m: PixelFeature, n: PixelFeature, mode: DistanceMode) -> float:
    """Spatial plus color distance between two vertices."""

    mode = DistanceMode(mode)
    if m.mode is not mode or n.mode is not mode:
        raise GraphConstructionError(
            f"features encoded for {m.mode.value}/{n.mode.value} cannot be compared in {mode.value} mode"
        )
    spatial_sq = float((m.x - n.x) ** 2 + (m.y - n.y) ** 2)
    if mode is DistanceMode.DELTA_E2000:
        color_term = float(delta_e2000_array(m.color, n.color))
    else:
        color_term = float(delta_e_rgb_array(m.color, n.color))
    return math.sqrt(spatial_sq + color_term * color_term)


def _chunks(n: int, size: int) -> List[NDArray[np.intp]]:
    return [np.arange(start, min(start + size, n)) for start in range(0, n, size)]


def build_knn(features: FeatureSet, k: int, threads: int = 1) -> KnnGraph:
    """k nearest neighbors of every vertex, symmetrized by union.

    Ties are broken by the lower vertex index.
    """
    n = len(features)
    if k >= n:
        raise GraphConstructionError(f"k={k} must be smaller than the number of vertices ({n})")
    if k < 1:
        raise GraphConstructionError(f"k must be at least 1, got {k}")

    def nearest(sources: NDArray[np.intp]) -> Tuple[NDArray, NDArray, NDArray]:
        table = features.distances_from(sources)
        table[np.arange(sources.shape[0]), sources] = np.inf
        order = np.argsort(table, axis=1, kind="stable")[:, :k]
        rows = np.repeat(sources, k)
        cols = order.ravel()
        return rows, cols, table[np.repeat(np.arange(sources.shape[0]), k), cols]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(nearest, _chunks(n, DISTANCE_CHUNK)))
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])

    directed = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    lengths = directed.maximum(directed.T).tocsr()
    lengths.sort_indices()
    LOGGER.debug("k-NN graph: %d vertices, %d undirected edges", n, sparse.triu(lengths, k=1).nnz)
    return KnnGraph(n_vertices=n, lengths=lengths)


def geodesic_neighborhood(g: KnnGraph, source: int, budget: int) -> List[Tuple[int, float]]:
    """The ``budget`` vertices nearest to ``source`` by shortest-path length.

    Dijkstra stops once ``budget`` vertices other than the source are settled;
    equal distances settle in increasing vertex order.
    """
    if not 0 <= source < g.n_vertices:
        raise GraphConstructionError(f"source {source} outside [0, {g.n_vertices})")
    if budget < 1:
        raise GraphConstructionError(f"geodesic budget must be at least 1, got {budget}")

    neighbors, lengths = g._adjacency_lists
    best = {source: 0.0}
    settled = set()
    heap: List[Tuple[float, int]] = [(0.0, source)]
    result: List[Tuple[int, float]] = []
    while heap and len(result) < budget:
        dist, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        if u != source:
            result.append((u, dist))
        for v, length in zip(neighbors[u], lengths[u]):
            if v in settled:
                continue
            candidate = dist + length
            if candidate < best.get(v, math.inf):
                best[v] = candidate
                heapq.heappush(heap, (candidate, v))
    return result


def gaussian_weight(rho: ArrayLike, sigma: float) -> NDArray[np.float64]:
    """Edge weight exp(-rho^2 / sigma^2)."""

    if sigma <= 0:
        raise GraphConstructionError(f"sigma must be positive, got {sigma}")
    r = np.asarray(rho, dtype=np.float64)
    return np.exp(-(r * r) / (sigma * sigma))


def _symmetric_max(rows: NDArray, cols: NDArray, weights: NDArray, n: int) -> sparse.csr_matrix:
    keep = weights > 0.0
    dropped = int(weights.size - keep.sum())
    if dropped:
        LOGGER.debug("dropped %d edges whose weight underflowed to zero", dropped)
    directed = sparse.coo_matrix(
        (weights[keep], (rows[keep], cols[keep])), shape=(n, n)
    ).tocsr()
    symmetric = directed.maximum(directed.T).tocsr()
    symmetric.eliminate_zeros()
    symmetric.sort_indices()
    return symmetric


def build_weighted_graph(
    features: FeatureSet, params: GraphParams, threads: int = 1
) -> WeightedGraph:
    """Geodesic k-NN graph with Gaussian weights over the features' image."""

    knn = build_knn(features, params.k, threads=threads)
    budget = params.budget
    n_local = len(features)

    def neighborhoods(sources: NDArray[np.intp]) -> List[List[Tuple[int, float]]]:
        return [geodesic_neighborhood(knn, int(s), budget) for s in sources]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        blocks = list(pool.map(neighborhoods, _chunks(n_local, DISTANCE_CHUNK)))

    rows: List[int] = []
    cols: List[int] = []
    rhos: List[float] = []
    source = 0
    for block in blocks:
        for hood in block:
            for vertex, rho in hood:
                rows.append(source)
                cols.append(vertex)
                rhos.append(rho)
            source += 1

    ids = features.vertex_ids
    weights = gaussian_weight(np.asarray(rhos), params.sigma)
    matrix = _symmetric_max(
        ids[np.asarray(rows, dtype=np.intp)],
        ids[np.asarray(cols, dtype=np.intp)],
        weights,
        features.n_total,
    )
    graph = WeightedGraph(n_vertices=features.n_total, weights=matrix)
    LOGGER.info(
        "weighted graph (%s, sigma=%g, k=%d, P=%d): %d vertices, %d edges",
        features.mode.value,
        params.sigma,
        params.k,
        budget,
        graph.n_vertices,
        graph.n_edges,
    )
    return graph


def adjacency(g: WeightedGraph) -> sparse.csr_matrix:
    return g.weights.copy()


def laplacian(g: WeightedGraph) -> sparse.csr_matrix:
    """Combinatorial Laplacian L = D - A."""

    return sparse.csr_matrix(csgraph.laplacian(g.weights.astype(np.float64), normed=False))


def connected_component_count(g: WeightedGraph) -> int:
    count, _ = csgraph.connected_components(g.weights, directed=False)
    return int(count)


def build_inpainting_topology(
    features: FeatureSet,
    mask: ArrayLike,
    params: GraphParams,
    threads: int = 1,
) -> WeightedGraph:
    """Geodesic graph on known pixels joined with a regular mesh over missing ones.

    Args:
        features: Features of the whole (attacked) image.
        mask: (H, W) booleans, True where the pixel is known.
        params: Graph parameters; ``sigma`` also weights the mesh edges.
        threads: Worker count for the geodesic searches.

    Returns:
        Graph over all pixels. Missing pixels connect to their 8 spatial
        neighbors with purely spatial Gaussian weights.
    """
    known = np.asarray(mask, dtype=bool)
    if known.shape != (features.height, features.width):
        raise GraphConstructionError(
            f"mask shape {known.shape} does not match image {(features.height, features.width)}"
        )
    if not known.any():
        raise GraphConstructionError("mask marks every pixel as missing")
    if known.all():
        return build_weighted_graph(features, params, threads=threads)

    known_ids = np.flatnonzero(known.ravel())
    n_known = known_ids.size
    if n_known == 1:
        known_weights = sparse.csr_matrix((features.n_total, features.n_total))
    else:
        k = min(params.k, n_known - 1)
        local = params.model_copy(
            update={"k": k, "geodesic_budget": max(k, min(params.budget, n_known - 1))}
        )
        if local.k != params.k:
            LOGGER.info("only %d known pixels; k-NN over them uses k=%d", n_known, local.k)
        known_weights = build_weighted_graph(
            features.subset(known_ids), local, threads=threads
        ).weights

    miss_y, miss_x = np.nonzero(~known)
    rows: List[NDArray] = []
    cols: List[NDArray] = []
    dists: List[NDArray] = []
    for dx, dy in MESH_OFFSETS:
        nx, ny = miss_x + dx, miss_y + dy
        inside = (nx >= 0) & (nx < features.width) & (ny >= 0) & (ny < features.height)
        rows.append(miss_y[inside] * features.width + miss_x[inside])
        cols.append(ny[inside] * features.width + nx[inside])
        dists.append(np.full(int(inside.sum()), math.hypot(dx, dy)))
    mesh = _symmetric_max(
        np.concatenate(rows),
        np.concatenate(cols),
        gaussian_weight(np.concatenate(dists), params.sigma),
        features.n_total,
    )
    union = known_weights.maximum(mesh).tocsr()
    union.sort_indices()
    graph = WeightedGraph(n_vertices=features.n_total, weights=union)
    LOGGER.info(
        "inpainting topology: %d missing pixels meshed, %d edges in total",
        miss_x.size,
        graph.n_edges,
    )
    return graph


def write_edge_list(g: WeightedGraph, path: Path) -> None:
    """Write ``m n w`` lines, one undirected edge per line with m < n."""

    with Path(path).open("w", encoding="utf-8") as handle:
        for m, n, w in g.edges():
            handle.write(f"{m} {n} {w:.17g}\n")


def read_edge_list(path: Path, n_vertices: Optional[int] = None) -> WeightedGraph:
    rows: List[int] = []
    cols: List[int] = []
    weights: List[float] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise GraphConstructionError(f"{path}:{line_no}: expected 'm n w', got {line!r}")
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            weights.append(float(parts[2]))
    size = n_vertices if n_vertices is not None else (max(rows + cols) + 1 if rows else 0)
    matrix = _symmetric_max(
        np.asarray(rows, dtype=np.intp),
        np.asarray(cols, dtype=np.intp),
        np.asarray(weights, dtype=np.float64),
        size,
    )
    return WeightedGraph(n_vertices=size, weights=matrix)


__all__ = [
    "FeatureSet",
    "GraphConstructionError",
    "KnnGraph",
    "PixelFeature",
    "WeightedGraph",
    "adjacency",
    "build_inpainting_topology",
    "build_knn",
    "build_weighted_graph",
    "connected_component_count",
    "gaussian_weight",
    "geodesic_neighborhood",
    "knn_distance",
    "laplacian",
    "pixel_features",
    "read_edge_list",
    "write_edge_list",
]
