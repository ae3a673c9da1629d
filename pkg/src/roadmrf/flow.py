"""Dense optical flow between adjacent frames and temporal superpixel
matching (variational flow, single scale)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import imageops, kernels
from .corpus import Frame
from .errors import DataError
from .superpixel import SuperpixelGraph


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement from the previous frame to the current one."""

    u: np.ndarray  # (H, W) horizontal, float64
    v: np.ndarray  # (H, W) vertical

    @property
    def shape(self):
        return self.u.shape


def dense_flow(prev: Frame, cur: Frame, alpha: float = 15.0, iters: int = 100) -> FlowField:
    """Horn-Schunck style flow on grayscale frames via Jacobi relaxation."""
    if prev.pixels.shape != cur.pixels.shape:
        raise DataError(
            f"flow: frame shapes differ {prev.pixels.shape} vs {cur.pixels.shape}"
        )
    i1 = imageops.rgb_to_gray(prev.pixels) / 255.0
    i2 = imageops.rgb_to_gray(cur.pixels) / 255.0
    # classic 2x2x2 derivative stencils over both frames
    p1 = np.pad(i1, ((0, 1), (0, 1)), mode="edge")
    p2 = np.pad(i2, ((0, 1), (0, 1)), mode="edge")
    ix = 0.25 * (
        (p1[:-1, 1:] - p1[:-1, :-1])
        + (p1[1:, 1:] - p1[1:, :-1])
        + (p2[:-1, 1:] - p2[:-1, :-1])
        + (p2[1:, 1:] - p2[1:, :-1])
    )
    iy = 0.25 * (
        (p1[1:, :-1] - p1[:-1, :-1])
        + (p1[1:, 1:] - p1[:-1, 1:])
        + (p2[1:, :-1] - p2[:-1, :-1])
        + (p2[1:, 1:] - p2[:-1, 1:])
    )
    it = 0.25 * (
        (p2[:-1, :-1] - p1[:-1, :-1])
        + (p2[1:, :-1] - p1[1:, :-1])
        + (p2[:-1, 1:] - p1[:-1, 1:])
        + (p2[1:, 1:] - p1[1:, 1:])
    )
    u, v = kernels.hs_solve(
        np.ascontiguousarray(ix),
        np.ascontiguousarray(iy),
        np.ascontiguousarray(it),
        float(alpha) * float(alpha),
        int(iters),
    )
    return FlowField(u=np.asarray(u), v=np.asarray(v))


def match_superpixels(
    prev_graph: SuperpixelGraph, cur_graph: SuperpixelGraph, flow: FlowField
) -> list[np.ndarray]:
    """Temporal adjacency: advect previous centroids by the flow and bin
    them into current superpixels; empty sets get the nearest advected
    center so every current superpixel has at least one neighbor."""
    h, w = cur_graph.shape
    if flow.shape != prev_graph.shape:
        raise DataError("flow shape does not match the previous graph")
    sets: list[set[int]] = [set() for _ in range(cur_graph.n)]
    advected = np.empty((prev_graph.n, 2), dtype=np.float64)
    for j in range(prev_graph.n):
        cx, cy = prev_graph.centroids[j]
        px = min(w - 1, max(0, int(np.floor(cx + 0.5))))
        py = min(h - 1, max(0, int(np.floor(cy + 0.5))))
        ax = cx + flow.u[py, px]
        ay = cy + flow.v[py, px]
        advected[j] = (ax, ay)
        lx = min(w - 1, max(0, int(np.floor(ax + 0.5))))
        ly = min(h - 1, max(0, int(np.floor(ay + 0.5))))
        sets[int(cur_graph.label_map[ly, lx])].add(j)
    for i in range(cur_graph.n):
        if not sets[i]:
            d = advected - cur_graph.centroids[i]
            j = int(np.argmin((d * d).sum(axis=1)))
            sets[i].add(j)
    return [np.array(sorted(s), dtype=np.int64) for s in sets]


def propagate_labels(prev_labeling: np.ndarray, temporal_neighbors) -> np.ndarray:
    """Majority label over each superpixel's temporal neighbors (ties: road)."""
    prev_labeling = np.asarray(prev_labeling)
    out = np.empty(len(temporal_neighbors), dtype=np.int8)
    for i, nbrs in enumerate(temporal_neighbors):
        votes = prev_labeling[nbrs]
        out[i] = 1 if 2 * int(votes.sum()) >= len(votes) else 0
    return out


def dump_flow(path, flow: FlowField) -> None:
    """Two-plane little-endian float32 binary plus a JSON header."""
    h, w = flow.shape
    data = np.stack([flow.u, flow.v]).astype("<f4").tobytes()
    imageops.atomic_write_bytes(path, data)
    imageops.atomic_write_bytes(
        str(path) + ".json", (json.dumps({"H": h, "W": w}) + "\n").encode()
    )


def load_flow_dump(path) -> FlowField:
    header = imageops.read_json(str(path) + ".json")
    h, w = header["H"], header["W"]
    raw = np.fromfile(path, dtype="<f4").reshape(2, h, w).astype(np.float64)
    return FlowField(u=raw[0], v=raw[1])
