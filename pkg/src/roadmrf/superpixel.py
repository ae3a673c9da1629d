"""SLIC-style superpixel segmentation and the spatial adjacency graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import imageops, kernels
from .corpus import Frame
from .errors import DataError

SLIC_ITERS = 10


@dataclass
class SuperpixelGraph:
    """Per-frame partition of pixels into superpixels.

    label_map assigns every pixel one id in 0..n-1; centroids are (x, y)
    means of each id's pixels; spatial_neighbors[i] is the sorted array
    of ids sharing a pixel edge with i. temporal_neighbors is filled by
    the flow module and maps each id to ids of the previous frame.
    """

    label_map: np.ndarray  # (H, W) int32
    n: int
    centroids: np.ndarray  # (K, 2) float64, (x, y)
    pixel_counts: np.ndarray  # (K,) int64
    spatial_neighbors: list[np.ndarray]
    temporal_neighbors: list[np.ndarray] | None = field(default=None)

    @property
    def shape(self) -> tuple[int, int]:
        return self.label_map.shape

    def spatial_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency as (indptr, indices) for kernel consumption."""
        counts = np.array([len(a) for a in self.spatial_neighbors], dtype=np.int64)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        if counts.sum() == 0:
            return indptr, np.empty(0, dtype=np.int32)
        indices = np.concatenate(self.spatial_neighbors).astype(np.int32)
        return indptr, indices

    def edge_list(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with i < j."""
        pairs = [
            (i, j) for i in range(self.n) for j in self.spatial_neighbors[i] if i < j
        ]
        if not pairs:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(pairs, dtype=np.int64)


def _grid_seeds(lab: np.ndarray, n_target: int):
    """Initial cluster centers: centroid of each grid cell, perturbed to a
    strictly-lower-gradient pixel in the surrounding 3x3 window."""
    h, w = lab.shape[:2]
    step = np.sqrt(h * w / float(n_target))
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    row_edges = np.linspace(0, h, ny + 1)
    col_edges = np.linspace(0, w, nx + 1)

    grad = np.zeros((h, w), dtype=np.float64)
    rp = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = rp[1:-1, 2:] - rp[1:-1, :-2]
    dy = rp[2:, 1:-1] - rp[:-2, 1:-1]
    grad = (dx * dx).sum(axis=2) + (dy * dy).sum(axis=2)

    seeds_xy = []
    for iy in range(ny):
        r0, r1 = int(row_edges[iy]), int(row_edges[iy + 1])
        for ix in range(nx):
            c0, c1 = int(col_edges[ix]), int(col_edges[ix + 1])
            sy = (r0 + r1 - 1) / 2.0
            sx = (c0 + c1 - 1) / 2.0
            rc = min(h - 1, max(0, int(np.floor(sy + 0.5))))
            cc = min(w - 1, max(0, int(np.floor(sx + 0.5))))
            best_g = grad[rc, cc]
            best = None
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    r, c = rc + dr, cc + dc
                    if 0 <= r < h and 0 <= c < w and grad[r, c] < best_g:
                        best_g = grad[r, c]
                        best = (c, r)
            if best is not None:
                sx, sy = float(best[0]), float(best[1])
            seeds_xy.append((sx, sy))
    seeds_xy = np.array(seeds_xy, dtype=np.float64)
    ys = np.clip(seeds_xy[:, 1], 0, h - 1).astype(np.int64)
    xs = np.clip(seeds_xy[:, 0], 0, w - 1).astype(np.int64)
    seeds_lab = lab[ys, xs].astype(np.float64)
    return seeds_xy, seeds_lab, step


def _enforce_connectivity(labels: np.ndarray, min_size: int) -> np.ndarray:
    """Make every superpixel 4-connected.

    Each id keeps its largest component; smaller fragments are absorbed
    into the largest adjacent region, except fragments that are themselves
    at least min_size, which become fresh superpixels. Final ids are
    renumbered in raster order of first appearance.
    """
    h, w = labels.shape
    comp, n_comp = kernels.label_components(labels)
    comp = np.asarray(comp)
    sizes = np.bincount(comp.ravel(), minlength=n_comp)
    owner = np.full(n_comp, -1, dtype=np.int64)  # superpixel id per component
    flat_c = comp.ravel()
    flat_l = labels.ravel()
    first_idx = np.full(n_comp, -1, dtype=np.int64)
    seen = np.zeros(n_comp, dtype=bool)
    for idx in range(flat_c.size):
        cid = flat_c[idx]
        if not seen[cid]:
            seen[cid] = True
            first_idx[cid] = idx
            owner[cid] = flat_l[idx]

    # largest component per superpixel id (ties: first in scan order)
    keep = {}
    for cid in range(n_comp):
        sp = owner[cid]
        if sp not in keep or sizes[cid] > sizes[keep[sp]]:
            keep[sp] = cid
    primary = np.zeros(n_comp, dtype=bool)
    for cid in keep.values():
        primary[cid] = True

    # component adjacency from horizontal/vertical boundaries
    adj: list[set[int]] = [set() for _ in range(n_comp)]
    a, b = comp[:, :-1], comp[:, 1:]
    for x, y in zip(a[a != b].ravel(), b[a != b].ravel()):
        adj[x].add(int(y))
        adj[y].add(int(x))
    a, b = comp[:-1, :], comp[1:, :]
    for x, y in zip(a[a != b].ravel(), b[a != b].ravel()):
        adj[x].add(int(y))
        adj[y].add(int(x))

    # union-find over components; fragments melt into neighbours
    parent = np.arange(n_comp, dtype=np.int64)
    size_acc = sizes.astype(np.int64).copy()

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    order = sorted(
        (cid for cid in range(n_comp) if not primary[cid]), key=lambda c: first_idx[c]
    )
    for cid in order:
        if sizes[cid] >= min_size:
            continue  # big orphan: becomes its own superpixel
        root = find(cid)
        best, best_size = -1, -1
        for nb in sorted(adj[cid]):
            nb_root = find(nb)
            if nb_root == root:
                continue
            if size_acc[nb_root] > best_size:
                best_size = size_acc[nb_root]
                best = nb_root
        if best >= 0:
            parent[root] = best
            size_acc[best] += size_acc[root]

    roots = np.array([find(c) for c in range(n_comp)], dtype=np.int64)
    new_labels = roots[comp]
    # renumber by raster order of first pixel
    _, first_pos, inverse = np.unique(new_labels.ravel(), return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first_pos))
    return rank[inverse].reshape(h, w).astype(np.int32)


def build_spatial_adjacency(label_map: np.ndarray) -> list[np.ndarray]:
    """N_spa per id: ids sharing a pixel edge, symmetric and irreflexive."""
    n = int(label_map.max()) + 1
    pairs = set()
    a, b = label_map[:, :-1], label_map[:, 1:]
    diff = a != b
    for x, y in zip(a[diff].ravel(), b[diff].ravel()):
        pairs.add((int(x), int(y)))
    a, b = label_map[:-1, :], label_map[1:, :]
    diff = a != b
    for x, y in zip(a[diff].ravel(), b[diff].ravel()):
        pairs.add((int(x), int(y)))
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for x, y in pairs:
        neighbors[x].add(y)
        neighbors[y].add(x)
    return [np.array(sorted(s), dtype=np.int64) for s in neighbors]


def graph_from_label_map(label_map: np.ndarray) -> SuperpixelGraph:
    """Assemble centroids, counts and adjacency for a finished label map."""
    h, w = label_map.shape
    n = int(label_map.max()) + 1
    flat = label_map.ravel()
    counts = np.bincount(flat, minlength=n)
    if (counts == 0).any():
        raise DataError("label map has empty superpixel ids")
    ys, xs = np.mgrid[0:h, 0:w]
    cx = np.bincount(flat, weights=xs.ravel(), minlength=n) / counts
    cy = np.bincount(flat, weights=ys.ravel(), minlength=n) / counts
    return SuperpixelGraph(
        label_map=label_map.astype(np.int32),
        n=n,
        centroids=np.stack([cx, cy], axis=1),
        pixel_counts=counts.astype(np.int64),
        spatial_neighbors=build_spatial_adjacency(label_map),
    )


def slic_segment(frame: Frame, n_target: int, compactness: float = 10.0) -> SuperpixelGraph:
    """Segment a frame into roughly n_target compact superpixels.

    Deterministic: fixed grid seeding, 10 k-means-style iterations in
    CIELab(+xy) space, then connectivity enforcement.
    """
    h, w = frame.pixels.shape[:2]
    if n_target < 2:
        raise DataError(f"n_target must be >= 2, got {n_target}")
    if n_target > h * w // 4:
        raise DataError(f"n_target {n_target} exceeds {h}x{w}/4")
    lab = imageops.rgb_to_lab(frame.pixels)
    seeds_xy, seeds_lab, step = _grid_seeds(lab, n_target)
    if step >= min(h, w):
        raise DataError(f"image {h}x{w} smaller than the grid step {step:.1f}")
    ratio = (compactness / step) ** 2
    labels, _, _ = kernels.slic_iterate(
        np.ascontiguousarray(lab), seeds_xy, seeds_lab, step, ratio, SLIC_ITERS
    )
    labels = np.asarray(labels)
    min_size = max(1, (h * w) // (4 * n_target))
    labels = _enforce_connectivity(labels, min_size)
    return graph_from_label_map(labels)


def dump_debug(graph: SuperpixelGraph, frame: Frame, out_prefix) -> None:
    """Write the label map (16-bit PNG) and a boundary overlay (RGB PNG)."""
    imageops.save_image(f"{out_prefix}_labels.png", graph.label_map.astype(np.uint16))
    overlay = frame.pixels.copy()
    lm = graph.label_map
    edge = np.zeros(lm.shape, dtype=bool)
    edge[:, 1:] |= lm[:, 1:] != lm[:, :-1]
    edge[1:, :] |= lm[1:, :] != lm[:-1, :]
    overlay[edge] = (255, 0, 0)
    imageops.save_image(f"{out_prefix}_overlay.png", overlay)
