"""Detection and scene-model metrics: precision/recall, F_beta, ROC/AUC,
plane confusion and the 75%-rule plane/model correctness ratios."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import imageops
from .errors import DataError
from .scene.geometry import SceneModel
from .scene.render import render_plane_map, source_pose

ROC_LEVELS = 256

PLANE_NAMES = {1: "LW", 2: "RW", 3: "BW", 4: "RP"}
DEFAULT_ORIENTATIONS = {1: "vertical", 2: "vertical", 3: "vertical", 4: "horizontal"}


@dataclass(frozen=True)
class DetectionScore:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float | None:
        d = self.tp + self.fp
        return self.tp / d if d > 0 else None

    @property
    def recall(self) -> float | None:
        d = self.tp + self.fn
        return self.tp / d if d > 0 else None


def precision_recall(detected_mask: np.ndarray, truth_mask: np.ndarray) -> DetectionScore:
    """Pixel counts; undefined ratios surface as None, never silent zeros."""
    detected = np.asarray(detected_mask, bool)
    truth = np.asarray(truth_mask, bool)
    if detected.shape != truth.shape:
        raise DataError(f"mask shapes differ: {detected.shape} vs {truth.shape}")
    tp = int((detected & truth).sum())
    fp = int((detected & ~truth).sum())
    fn = int((~detected & truth).sum())
    tn = int((~detected & ~truth).sum())
    return DetectionScore(tp=tp, fp=fp, tn=tn, fn=fn)


def f_beta(pre: float, rec: float, beta: float) -> float | None:
    """Weighted harmonic mean; None when both inputs are zero."""
    if pre == 0.0 and rec == 0.0:
        return None
    b2 = beta * beta
    return (1.0 + b2) * pre * rec / (b2 * pre + rec)


@dataclass(frozen=True)
class RocCurve:
    points: np.ndarray  # (n, 2) of (FPR, TPR), sorted by FPR then TPR
    auc: float | None
    thresholds: np.ndarray


def roc_auc(score_map: np.ndarray, truth_mask: np.ndarray) -> RocCurve:
    """ROC over 256 rank-quantile thresholds plus trapezoidal AUC.

    Thresholds sit at evenly spaced ranks of the empirical score
    distribution, so strictly monotone transforms of the scores leave the
    curve unchanged. Single-class truth yields auc=None.
    """
    scores = np.asarray(score_map, dtype=np.float64).ravel()
    truth = np.asarray(truth_mask, bool).ravel()
    if scores.shape != truth.shape:
        raise DataError("score map and truth mask shapes differ")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    order = np.sort(scores)
    qidx = np.floor(np.linspace(0.0, 1.0, ROC_LEVELS) * (scores.size - 1)).astype(int)
    thresholds = np.unique(order[qidx])
    if n_pos == 0 or n_neg == 0:
        return RocCurve(points=np.array([[0.0, 0.0], [1.0, 1.0]]), auc=None, thresholds=thresholds)
    sorted_idx = np.argsort(scores, kind="stable")
    sorted_scores = scores[sorted_idx]
    cum_pos = np.concatenate([[0], np.cumsum(truth[sorted_idx])])
    pts = [(0.0, 0.0), (1.0, 1.0)]
    for t in thresholds:
        below = int(np.searchsorted(sorted_scores, t, side="left"))
        tp = n_pos - int(cum_pos[below])
        fp = (scores.size - below) - tp
        pts.append((fp / n_neg, tp / n_pos))
    points = np.array(sorted(set(pts)))
    auc = float(np.trapezoid(points[:, 1], points[:, 0]))
    return RocCurve(points=points, auc=auc, thresholds=thresholds)


def scene_confusion(pred_map: np.ndarray, truth_map: np.ndarray) -> np.ndarray:
    """4x4 pixel confusion over {LW, RW, BW, RP}; void (0) excluded."""
    pred = np.asarray(pred_map)
    truth = np.asarray(truth_map)
    if pred.shape != truth.shape:
        raise DataError("plane map shapes differ")
    valid = (pred > 0) & (truth > 0)
    mat = np.zeros((4, 4), dtype=np.int64)
    np.add.at(mat, (truth[valid] - 1, pred[valid] - 1), 1)
    return mat


# ---------------------------------------------------------------------------
# Plane / model correctness (75% patch rules)
# ---------------------------------------------------------------------------


def patch_correctness(pred_map, truth_map, plane_id: int, grid: int = 8):
    """Split the plane's predicted footprint bbox into grid x grid patches;
    a patch is correct when >50% of its footprint pixels carry the plane's
    truth label. Returns (n_correct, n_nonempty_patches)."""
    pred = np.asarray(pred_map)
    truth = np.asarray(truth_map)
    foot = pred == plane_id
    if not foot.any():
        return 0, 0
    rows = np.nonzero(foot.any(axis=1))[0]
    cols = np.nonzero(foot.any(axis=0))[0]
    r_edges = np.linspace(rows[0], rows[-1] + 1, grid + 1).astype(int)
    c_edges = np.linspace(cols[0], cols[-1] + 1, grid + 1).astype(int)
    n_correct = 0
    n_patches = 0
    for i in range(grid):
        for j in range(grid):
            sub = foot[r_edges[i] : r_edges[i + 1], c_edges[j] : c_edges[j + 1]]
            if not sub.any():
                continue
            t_sub = truth[r_edges[i] : r_edges[i + 1], c_edges[j] : c_edges[j + 1]]
            n_patches += 1
            good = int((sub & (t_sub == plane_id)).sum())
            if 2 * good > int(sub.sum()):
                n_correct += 1
    return n_correct, n_patches


def plane_is_correct(pred_map, truth_map, plane_id: int, grid: int = 8) -> bool:
    """More than 75% of the plane's patches must be correct."""
    n_correct, n_patches = patch_correctness(pred_map, truth_map, plane_id, grid)
    if n_patches == 0:
        return False
    return n_correct > 0.75 * n_patches


def _patch_majority(labelmap: np.ndarray, grid: int):
    h, w = labelmap.shape
    r_edges = np.linspace(0, h, grid + 1).astype(int)
    c_edges = np.linspace(0, w, grid + 1).astype(int)
    out = np.zeros((grid, grid), dtype=np.int64)
    for i in range(grid):
        for j in range(grid):
            sub = labelmap[r_edges[i] : r_edges[i + 1], c_edges[j] : c_edges[j + 1]]
            vals = sub[sub > 0]
            if vals.size == 0:
                out[i, j] = 0
            else:
                out[i, j] = np.bincount(vals, minlength=5)[1:].argmax() + 1
    return out


def _relationship(a: int, b: int, orientations) -> str:
    if a == b:
        return "coplanar"
    return "-".join(sorted((orientations[a], orientations[b])))


def _texture_roundtrip_errors(scene: SceneModel, pred_map: np.ndarray, grid: int):
    """Per-patch reprojection error: raycast the patch center onto the
    predicted plane, project back, measure pixel displacement."""
    from .scene.geometry import Pinhole

    h, w = pred_map.shape
    pin = Pinhole(scene.camera, w, h)
    r_edges = np.linspace(0, h, grid + 1).astype(int)
    c_edges = np.linspace(0, w, grid + 1).astype(int)
    errs = []
    for i in range(grid):
        for j in range(grid):
            rc = (r_edges[i] + r_edges[i + 1]) // 2
            cc = (c_edges[j] + c_edges[j + 1]) // 2
            pid = pred_map[rc, cc]
            if pid == 0:
                continue
            name = {1: "left_wall", 2: "right_wall", 3: "back_wall", 4: "road"}[pid]
            plane = scene.planes[name]
            v = plane.vertices
            # plane frame from the first face
            p0, p1, p2 = v[plane.faces[0]]
            nrm = np.cross(p1 - p0, p2 - p0)
            nn = np.linalg.norm(nrm)
            if nn == 0:
                continue
            nrm = nrm / nn
            origin = np.array([0.0, scene.camera.height_m, 0.0])
            d = pin.ray(float(cc), float(rc))
            denom = d @ nrm
            if abs(denom) < 1e-12:
                continue
            t = ((p0 - origin) @ nrm) / denom
            if t <= 0:
                continue
            point = origin + t * d
            back = pin.project(point[None, :])[0]
            errs.append(float(np.hypot(back[0] - cc, back[1] - rc)))
    return errs


def model_is_correct(
    scene: SceneModel,
    pred_map: np.ndarray,
    truth_map: np.ndarray,
    grid: int = 8,
    orientations=None,
) -> bool:
    """75% of patch pairs across predicted plane boundaries must agree with
    the truth relationship class, and fewer than 25% of patches may exceed
    the 2 px texture round-trip error."""
    orientations = orientations or DEFAULT_ORIENTATIONS
    pm = _patch_majority(np.asarray(pred_map), grid)
    tm = _patch_majority(np.asarray(truth_map), grid)
    good = 0
    total = 0
    for i in range(grid):
        for j in range(grid):
            for di, dj in ((0, 1), (1, 0)):
                ii, jj = i + di, j + dj
                if ii >= grid or jj >= grid:
                    continue
                a_p, b_p = pm[i, j], pm[ii, jj]
                a_t, b_t = tm[i, j], tm[ii, jj]
                if a_p == 0 or b_p == 0 or a_p == b_p:
                    continue  # not spanning a predicted boundary
                if a_t == 0 or b_t == 0:
                    continue
                total += 1
                if _relationship(a_p, b_p, orientations) == _relationship(
                    a_t, b_t, orientations
                ):
                    good += 1
    if total == 0:
        return False
    if not good > 0.75 * total:
        return False
    errs = _texture_roundtrip_errors(scene, np.asarray(pred_map), grid)
    if errs:
        distorted = sum(1 for e in errs if e > 2.0)
        if not distorted < 0.25 * len(errs):
            return False
    return True


def plane_model_correctness(scenes, truth_maps, grid: int = 8, orientations=None):
    """Fractions of correct planes and correct models over the set.

    scenes: SceneModel list; truth_maps: matching plane-id maps.
    """
    if len(scenes) != len(truth_maps):
        raise DataError("scenes and truth annotations differ in length")
    n_planes = 0
    n_planes_ok = 0
    n_models_ok = 0
    for scene, truth in zip(scenes, truth_maps):
        truth = np.asarray(truth)
        pred = render_plane_map(scene, source_pose(scene))
        for pid in (1, 2, 3, 4):
            if not (pred == pid).any():
                continue
            n_planes += 1
            if plane_is_correct(pred, truth, pid, grid):
                n_planes_ok += 1
        if model_is_correct(scene, pred, truth, grid, orientations):
            n_models_ok += 1
    plane_ratio = n_planes_ok / n_planes if n_planes else 0.0
    model_ratio = n_models_ok / len(scenes) if scenes else 0.0
    return plane_ratio, model_ratio


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB over optionally masked pixels."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if mask is not None:
        x = x[mask]
        y = y[mask]
    mse = float(((x - y) ** 2).mean())
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(255.0**2 / mse)


def detection_report(per_frame: list[dict], roc_points=None) -> dict:
    def mean_of(key):
        vals = [f[key] for f in per_frame if f.get(key) is not None]
        return float(np.mean(vals)) if vals else None

    report = {
        "per_frame": per_frame,
        "aggregates": {
            "mean_precision": mean_of("precision"),
            "mean_recall": mean_of("recall"),
            "mean_f05": mean_of("f05"),
            "mean_f1": mean_of("f1"),
            "mean_f2": mean_of("f2"),
            "mean_auc": mean_of("auc"),
        },
    }
    if roc_points is not None:
        report["roc_points"] = [[float(x), float(y)] for x, y in roc_points]
    return report


def write_report(path, report: dict) -> None:
    imageops.write_json(path, report)


def report_csv(report: dict) -> str:
    """Table-style CSV: Precision, Recall, F at beta 0.5 / 1 / 2."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["Frame", "Precision", "Recall", "F0.5", "F1", "F2"])
    for row in report["per_frame"]:
        writer.writerow(
            [
                row["index"],
                row.get("precision"),
                row.get("recall"),
                row.get("f05"),
                row.get("f1"),
                row.get("f2"),
            ]
        )
    agg = report["aggregates"]
    writer.writerow(
        [
            "mean",
            agg["mean_precision"],
            agg["mean_recall"],
            agg["mean_f05"],
            agg["mean_f1"],
            agg["mean_f2"],
        ]
    )
    return buf.getvalue()
