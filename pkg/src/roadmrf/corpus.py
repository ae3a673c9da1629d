"""Image-sequence corpora: manifest loading and synthetic road sequences.

A manifest is a JSON document with keys `dataset_name`, `camera`
(`fov_deg`, `height_m`, `pitch_deg`), `frames` (array of relative paths)
and optionally `masks` (parallel array). Paths resolve relative to the
manifest file.

The synthetic generator draws a textured road corridor (ground strip,
lateral walls, back wall, sky) with exact per-pixel ground truth, so the
whole pipeline can be scored without external datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import imageops
from .errors import CountMismatchError, DataError, ManifestFormatError, MissingFileError


@dataclass(frozen=True)
class CameraParams:
    """Pinhole camera defaults used when a dataset states nothing better."""

    fov_deg: float = 90.0
    height_m: float = 1.5
    pitch_deg: float = 0.0

    def __post_init__(self):
        if not (20.0 <= self.fov_deg <= 170.0):
            raise DataError(f"fov_deg {self.fov_deg} outside [20, 170]")
        if self.height_m <= 0:
            raise DataError(f"height_m must be positive, got {self.height_m}")

    def focal_px(self, width: int) -> float:
        return (width / 2.0) / np.tan(np.deg2rad(self.fov_deg) / 2.0)


@dataclass(frozen=True)
class Frame:
    index: int
    pixels: np.ndarray  # (H, W, 3) uint8
    truth_mask: np.ndarray | None = None  # (H, W) bool

    def __post_init__(self):
        h, w = self.pixels.shape[:2]
        if h < 32 or w < 32:
            raise DataError(f"frame {self.index}: {h}x{w} below 32x32 minimum")
        if self.truth_mask is not None and self.truth_mask.shape != (h, w):
            raise DataError(
                f"frame {self.index}: mask shape {self.truth_mask.shape} "
                f"does not match pixels {(h, w)}"
            )


@dataclass(frozen=True)
class SequenceManifest:
    dataset_name: str
    camera: CameraParams
    frames: tuple[Path, ...]
    masks: tuple[Path, ...] | None
    path: Path

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def has_masks(self) -> bool:
        return self.masks is not None

    def load_frame(self, index: int) -> Frame:
        """Decode one frame (and its mask when present) on demand."""
        pixels = imageops.load_image(self.frames[index])
        mask = None
        if self.masks is not None:
            mask = imageops.load_mask(self.masks[index])
        return Frame(index=index, pixels=pixels, truth_mask=mask)

    def load_frames(self):
        return [self.load_frame(i) for i in range(len(self))]


def load_sequence(manifest_path) -> SequenceManifest:
    """Read and validate a manifest file.

    Raises ManifestFormatError / CountMismatchError / MissingFileError
    naming the offending entry; frame pixels stay on disk until
    load_frame is called.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFileError(f"manifest not found: {manifest_path}")
    try:
        doc = imageops.read_json(manifest_path)
    except ValueError as exc:
        raise ManifestFormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ManifestFormatError(f"{manifest_path}: top level must be an object")
    for key in ("dataset_name", "camera", "frames"):
        if key not in doc:
            raise ManifestFormatError(f"{manifest_path}: missing key '{key}'")
    cam = doc["camera"]
    try:
        camera = CameraParams(
            fov_deg=float(cam["fov_deg"]),
            height_m=float(cam["height_m"]),
            pitch_deg=float(cam["pitch_deg"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestFormatError(f"{manifest_path}: bad camera block ({exc})") from exc
    frames_rel = doc["frames"]
    if not isinstance(frames_rel, list) or not frames_rel:
        raise ManifestFormatError(f"{manifest_path}: 'frames' must be a non-empty array")
    base = manifest_path.parent
    frames = tuple(base / f for f in frames_rel)
    masks = None
    if doc.get("masks") is not None:
        masks_rel = doc["masks"]
        if len(masks_rel) != len(frames_rel):
            raise CountMismatchError(
                f"{manifest_path}: {len(frames_rel)} frames but {len(masks_rel)} masks"
            )
        masks = tuple(base / m for m in masks_rel)
    for p in frames + (masks or ()):
        if not p.is_file():
            raise MissingFileError(f"{manifest_path}: referenced file missing: {p}")
    return SequenceManifest(
        dataset_name=str(doc["dataset_name"]),
        camera=camera,
        frames=frames,
        masks=masks,
        path=manifest_path,
    )


# ---------------------------------------------------------------------------
# Synthetic corridor sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoadSpec:
    """Geometry of a synthetic road scene.

    The vanishing point doubles as the principal point; boundaries run
    from the bottom anchor columns toward it. `curve_*` bends each
    boundary with a quadratic bulge (zero at both ends, in pixels).
    """

    width: int = 256
    height: int = 256
    vp: tuple[float, float] = (128.0, 128.0)
    bottom_left_col: float = -60.0
    bottom_right_col: float = 316.0
    curve_left: float = 0.0
    curve_right: float = 0.0
    top_margin_px: float = 5.0
    wall_height_m: float = 5.0
    speed_m_per_frame: float = 0.8
    camera: CameraParams = field(default_factory=CameraParams)

    @property
    def focal_px(self) -> float:
        return self.camera.focal_px(self.width)

    @property
    def row_top(self) -> int:
        """First image row that carries road pixels."""
        return int(np.ceil(self.vp[1] + self.top_margin_px))

    @property
    def z_far(self) -> float:
        """Corridor depth: the ground depth at the topmost road row."""
        return self.focal_px * self.camera.height_m / (self.row_top - self.vp[1])

    def boundary_cols(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Left/right boundary columns at the given (float) image rows."""
        vx, vy = self.vp
        s = (np.asarray(rows, dtype=np.float64) - vy) / (self.height - 1 - vy)
        bulge = 4.0 * s * (1.0 - s)
        left = vx + (self.bottom_left_col - vx) * s + self.curve_left * bulge
        right = vx + (self.bottom_right_col - vx) * s + self.curve_right * bulge
        return left, right


def rasterize_road_mask(spec: RoadSpec) -> np.ndarray:
    """Exact road mask: pixel centers between the boundary polynomials."""
    rows = np.arange(spec.height, dtype=np.float64)
    left, right = spec.boundary_cols(rows)
    cols = np.arange(spec.width, dtype=np.float64)
    mask = (cols[None, :] >= left[:, None]) & (cols[None, :] <= right[:, None])
    mask &= (rows >= spec.row_top)[:, None]
    return mask


def _wall_anchor_cols(spec: RoadSpec) -> tuple[float, float]:
    # Walls follow the straight chords; a curved road keeps a dirt strip
    # between its bent boundary and the wall base.
    left = spec.bottom_left_col + min(0.0, spec.curve_left)
    right = spec.bottom_right_col + max(0.0, spec.curve_right)
    return left, right


def render_synthetic_frame(spec: RoadSpec, frame_index: int, seed: int):
    """Render one frame plus its exact road mask and plane-truth map.

    Plane map values: 0 sky/void, 1 left wall, 2 right wall, 3 back wall,
    4 road plane.
    """
    h_img, w_img = spec.height, spec.width
    vx, vy = spec.vp
    f = spec.focal_px
    cam_h = spec.camera.height_m
    z_far = spec.z_far
    z_cam = frame_index * spec.speed_m_per_frame

    rr, cc = np.meshgrid(
        np.arange(h_img, dtype=np.float64),
        np.arange(w_img, dtype=np.float64),
        indexing="ij",
    )
    img = np.zeros((h_img, w_img, 3), dtype=np.float64)
    plane = np.zeros((h_img, w_img), dtype=np.uint8)

    road = rasterize_road_mask(spec)

    # Ground geometry (valid below the horizon row)
    below = rr > vy
    dv = np.where(below, rr - vy, 1.0)
    z_g = f * cam_h / dv
    x_g = (cc - vx) * cam_h / dv
    ground_vis = below & (rr >= spec.row_top)

    # Side walls: vertical planes through the straight wall chords.
    blw, brw = _wall_anchor_cols(spec)
    xl = (blw - vx) * cam_h / (h_img - 1 - vy)
    xr = (brw - vx) * cam_h / (h_img - 1 - vy)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_lw = np.where(cc < vx, f * xl / (cc - vx), np.inf)
        z_rw = np.where(cc > vx, f * xr / (cc - vx), np.inf)
        y_lw = cam_h - (rr - vy) * z_lw / f  # height above ground at the hit
        y_rw = cam_h - (rr - vy) * z_rw / f
    lwall = (z_lw > 0) & (z_lw <= z_far) & (y_lw >= 0) & (y_lw <= spec.wall_height_m)
    rwall = (z_rw > 0) & (z_rw <= z_far) & (y_rw >= 0) & (y_rw <= spec.wall_height_m)

    # Back wall at z_far between the side walls.
    y_bw = cam_h - (rr - vy) * z_far / f
    x_bw = (cc - vx) * z_far / f
    bwall = (
        (y_bw >= 0)
        & (y_bw <= spec.wall_height_m)
        & (x_bw >= xl)
        & (x_bw <= xr)
        & ~ground_vis
        & ~lwall
        & ~rwall
    )
    lwall &= ~ground_vis
    rwall &= ~ground_vis

    zw_g = z_g + z_cam

    road_tone = 95.0 + 70.0 * imageops.value_noise(x_g, zw_g, 2.5, seed + 1, octaves=2)
    img[road] = np.stack(
        [road_tone[road], road_tone[road] * 0.99 + 1.0, road_tone[road] * 0.985 + 1.5],
        axis=-1,
    )
    plane[road] = 4

    dirt = ground_vis & ~road
    if dirt.any():
        n = imageops.value_noise(x_g, zw_g, 0.6, seed + 2, octaves=2)
        img[dirt] = np.stack(
            [95.0 + 70.0 * n[dirt], 75.0 + 55.0 * n[dirt], 45.0 + 40.0 * n[dirt]],
            axis=-1,
        )

    for mask_w, z_w, y_w, plane_id, hue_seed in (
        (lwall, z_lw, y_lw, 1, seed + 3),
        (rwall, z_rw, y_rw, 2, seed + 4),
    ):
        if not mask_w.any():
            continue
        zz = z_w[mask_w] + z_cam
        yy = y_w[mask_w]
        n1 = imageops.value_noise(zz, yy, 0.35, hue_seed, octaves=3)
        n2 = imageops.value_noise(zz, yy, 0.35, hue_seed + 100, octaves=3)
        img[mask_w] = np.stack(
            [30.0 + 80.0 * n1, 80.0 + 120.0 * n2, 25.0 + 60.0 * n1], axis=-1
        )
        plane[mask_w] = plane_id

    if bwall.any():
        zz = x_bw[bwall] + 0.37 * z_cam  # parallax-free distant texture
        n = imageops.value_noise(zz, y_bw[bwall], 1.2, seed + 5, octaves=2)
        img[bwall] = np.stack(
            [90.0 + 50.0 * n, 95.0 + 50.0 * n, 110.0 + 60.0 * n], axis=-1
        )
        plane[bwall] = 3

    sky = ~(ground_vis | lwall | rwall | bwall)
    if sky.any():
        grad = 1.0 - rr[sky] / max(vy, 1.0)
        n = imageops.value_noise(cc[sky] * 0.5, rr[sky] * 0.5, 24.0, seed + 6)
        img[sky] = np.stack(
            [150.0 + 30.0 * grad + 10.0 * n, 185.0 + 25.0 * grad + 8.0 * n,
             225.0 + 20.0 * grad + 5.0 * n],
            axis=-1,
        )

    return np.clip(img + 0.5, 0, 255).astype(np.uint8), road, plane


def synthesize_sequence(
    spec: RoadSpec, n_frames: int, seed: int, out_dir
) -> SequenceManifest:
    """Write a synthetic sequence (frames, masks, plane maps, manifest).

    Deterministic for fixed (spec, n_frames, seed). Returns the reloaded
    manifest. Ground-truth extras that have no manifest slot (plane maps,
    generator geometry) go to a `truth.json` sidecar next to it.
    """
    if n_frames < 1:
        raise DataError(f"n_frames must be >= 1, got {n_frames}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise DataError(f"output directory not writable: {out_dir} ({exc})") from exc

    frame_paths, mask_paths = [], []
    for t in range(n_frames):
        frame, mask, plane = render_synthetic_frame(spec, t, seed)
        fp = f"frames/frame_{t:04d}.png"
        mp = f"masks/mask_{t:04d}.png"
        imageops.save_image(out_dir / fp, frame)
        imageops.save_mask(out_dir / mp, mask)
        imageops.save_image(out_dir / f"planes/plane_{t:04d}.png", plane)
        frame_paths.append(fp)
        mask_paths.append(mp)

    manifest_doc = {
        "dataset_name": "synthetic-corridor",
        "camera": {
            "fov_deg": spec.camera.fov_deg,
            "height_m": spec.camera.height_m,
            "pitch_deg": spec.camera.pitch_deg,
        },
        "frames": frame_paths,
        "masks": mask_paths,
    }
    imageops.write_json(out_dir / "manifest.json", manifest_doc)
    imageops.write_json(
        out_dir / "truth.json",
        {
            "vp": list(spec.vp),
            "row_top": spec.row_top,
            "z_far": spec.z_far,
            "bottom_left_col": spec.bottom_left_col,
            "bottom_right_col": spec.bottom_right_col,
            "curve_left": spec.curve_left,
            "curve_right": spec.curve_right,
            "wall_height_m": spec.wall_height_m,
            "speed_m_per_frame": spec.speed_m_per_frame,
            "top_margin_px": spec.top_margin_px,
            "seed": seed,
            "planes": [f"planes/plane_{t:04d}.png" for t in range(n_frames)],
        },
    )
    return load_sequence(out_dir / "manifest.json")


def default_corpus_spec(**overrides) -> RoadSpec:
    """The 20-frame acceptance corpus geometry (straight road)."""
    return replace(RoadSpec(), **overrides) if overrides else RoadSpec()
