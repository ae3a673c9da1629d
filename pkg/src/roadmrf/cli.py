"""Command-line driver: synth / train / detect / reconstruct / render / eval.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Flag precedence: command line > --config JSON file > built-in defaults.
Errors emit one machine-readable JSON record on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import evaluation, imageops, mrf
from .corpus import CameraParams, RoadSpec, load_sequence, synthesize_sequence
from .errors import DataError, RoadMrfError, UsageError
from .features import compute_features, make_gabor_bank
from .pools import SOMConfig, load_pools, save_pools, train_pools
from .scene import (
    Pose,
    build_corridor,
    carve_foreground,
    detect_vanishing_point,
    export_database,
    generate_control_points,
    extract_boundaries,
    import_database,
    import_scene,
    render_viewpoint,
    source_pose,
)
from .superpixel import slic_segment

DEFAULTS = {
    "n_superpixels": 500,
    "compactness": 10.0,
    "block": 33,
    "lambda1": 1.0,
    "lambda2": 0.5,
    "epsilon": 1e-4,
    "max_sweeps": 50,
    "metric": "identity",
    "flow_alpha": 15.0,
    "flow_iters": 100,
    "alpha_loc": 0.5,
    "omega_loc": 1.0,
    "grid": 16,
    "som_grid": [3, 3],
    "som_epochs": 20,
    "som_rate": 0.5,
    "som_radius": 1.5,
    "k_texture": 8,
    "k_c": 8,
    "patch_grid": 8,
    "fov_deg": 90.0,
    "height_m": 1.5,
    "pitch_deg": 0.0,
    "seed": 0,
    "threads": 1,
}


def _add_common(p):
    p.add_argument("--config", help="JSON file with flag defaults")
    p.add_argument("--dump-config", action="store_true", help="print resolved config and exit")
    p.add_argument("--threads", type=int, help="worker cap (outputs are identical for any value)")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roadmrf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corridor sequence")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--vp-x", type=float)
    p.add_argument("--vp-y", type=float)
    p.add_argument("--bottom-left", type=float, default=-60.0)
    p.add_argument("--bottom-right", type=float, default=316.0)
    p.add_argument("--curve-left", type=float, default=0.0)
    p.add_argument("--curve-right", type=float, default=0.0)
    p.add_argument("--wall-height", type=float, default=5.0)
    p.add_argument("--speed", type=float, default=0.8)
    p.add_argument("--fov-deg", type=float)
    p.add_argument("--height-m", type=float)
    p.add_argument("--pitch-deg", type=float)

    p = sub.add_parser("train", help="train feature pools from masked frames")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pools-out", required=True)
    p.add_argument("--train-frames", help="python-style slice, e.g. 0:10")
    p.add_argument("--n-superpixels", type=int)
    p.add_argument("--compactness", type=float)
    p.add_argument("--block", type=int)
    p.add_argument("--som-grid", type=int, nargs=2)
    p.add_argument("--som-epochs", type=int)
    p.add_argument("--som-rate", type=float)
    p.add_argument("--som-radius", type=float)
    p.add_argument("--k-texture", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--alpha-loc", type=float)
    p.add_argument("--omega-loc", type=float)

    p = sub.add_parser("detect", help="run the MRF detector over a sequence")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pools", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--single-frame", action="store_true", help="no temporal terms")
    p.add_argument("--seed-from-truth", action="store_true", help="init frame 0 from its mask")
    p.add_argument("--n-superpixels", type=int)
    p.add_argument("--compactness", type=float)
    p.add_argument("--block", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-sweeps", type=int)
    p.add_argument("--metric", choices=["identity", "inverse_covariance"])
    p.add_argument("--flow-alpha", type=float)
    p.add_argument("--flow-iters", type=int)

    p = sub.add_parser("reconstruct", help="build corridor scenes from masks")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--masks", help="directory of detected masks (mask_%%04d.png)")
    p.add_argument("--use-truth-masks", action="store_true")
    p.add_argument("--fg-masks", help="directory of foreground masks (fg_%%04d.png)")
    p.add_argument("--out", required=True)
    p.add_argument("--k-c", type=int)
    p.add_argument("--wall-height", type=float, default=5.0)

    p = sub.add_parser("render", help="render a novel viewpoint to PNG")
    _add_common(p)
    p.add_argument("--scene", help="scene directory (with model.gltf)")
    p.add_argument("--database", help="scenes.json path")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--pos", type=float, nargs=3, help="camera position x y z")
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--pitch", type=float)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)

    p = sub.add_parser("eval", help="score detections and/or scenes")
    _add_common(p)
    p.add_argument("--manifest", required=True, help="manifest with ground-truth masks")
    p.add_argument("--masks", help="directory of detected masks")
    p.add_argument("--scores", help="directory of score maps (score_%%04d.npy)")
    p.add_argument("--scenes", help="scenes.json to score plane/model correctness")
    p.add_argument("--truth-planes", help="directory of truth plane maps")
    p.add_argument("--patch-grid", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg.update(imageops.read_json(args.config))
        except (OSError, ValueError) as exc:
            raise UsageError(f"bad --config file: {exc}") from exc
    for key, value in vars(args).items():
        if key in ("config", "dump_config", "command"):
            continue
        if value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    if cfg.get("threads") is not None:
        cfg["threads"] = max(1, int(cfg["threads"]))
    return cfg


def _energy_params(cfg) -> mrf.EnergyParams:
    return mrf.EnergyParams(
        lambda1=cfg["lambda1"],
        lambda2=cfg["lambda2"],
        metric=cfg["metric"],
        epsilon=cfg["epsilon"],
        max_sweeps=cfg["max_sweeps"],
    )


def _pipeline_config(cfg, temporal: bool) -> mrf.PipelineConfig:
    return mrf.PipelineConfig(
        n_superpixels=cfg["n_superpixels"],
        compactness=cfg["compactness"],
        block=cfg["block"],
        flow_alpha=cfg["flow_alpha"],
        flow_iters=cfg["flow_iters"],
        temporal=temporal,
    )


def cmd_synth(cfg) -> int:
    camera = CameraParams(
        fov_deg=cfg["fov_deg"], height_m=cfg["height_m"], pitch_deg=cfg["pitch_deg"]
    )
    vp = (
        cfg["vp_x"] if cfg.get("vp_x") is not None else cfg["width"] / 2.0,
        cfg["vp_y"] if cfg.get("vp_y") is not None else cfg["height"] / 2.0,
    )
    spec = RoadSpec(
        width=cfg["width"],
        height=cfg["height"],
        vp=vp,
        bottom_left_col=cfg["bottom_left"],
        bottom_right_col=cfg["bottom_right"],
        curve_left=cfg["curve_left"],
        curve_right=cfg["curve_right"],
        wall_height_m=cfg["wall_height"],
        speed_m_per_frame=cfg["speed"],
        camera=camera,
    )
    manifest = synthesize_sequence(spec, cfg["frames"], cfg["seed"], cfg["out"])
    print(f"wrote {len(manifest)} frames to {cfg['out']}")
    return 0


def _parse_slice(text: str, n: int) -> list[int]:
    if text is None:
        return list(range(n))
    parts = text.split(":")
    if len(parts) == 2:
        start = int(parts[0]) if parts[0] else 0
        stop = int(parts[1]) if parts[1] else n
        return list(range(start, min(stop, n)))
    return [int(x) for x in text.split(",")]


def cmd_train(cfg) -> int:
    manifest = load_sequence(cfg["manifest"])
    if not manifest.has_masks:
        raise DataError("training requires a manifest with masks")
    indices = _parse_slice(cfg.get("train_frames"), len(manifest))
    bank = make_gabor_bank()
    triples = []
    for t in indices:
        frame = manifest.load_frame(t)
        graph = slic_segment(frame, cfg["n_superpixels"], cfg["compactness"])
        feats = compute_features(frame, graph, bank, cfg["block"])
        triples.append((graph, feats, frame.truth_mask))
    pools = train_pools(
        triples,
        som_config=SOMConfig(
            grid=tuple(cfg["som_grid"]),
            epochs=cfg["som_epochs"],
            learning_rate=cfg["som_rate"],
            radius=cfg["som_radius"],
        ),
        k_texture=cfg["k_texture"],
        grid=cfg["grid"],
        alpha=cfg["alpha_loc"],
        omega=cfg["omega_loc"],
        seed=cfg["seed"],
        flags={"block": cfg["block"], "n_superpixels": cfg["n_superpixels"]},
    )
    save_pools(cfg["pools_out"], pools)
    print(f"pools written to {cfg['pools_out']}")
    return 0


def cmd_detect(cfg) -> int:
    manifest = load_sequence(cfg["manifest"])
    pools = load_pools(cfg["pools"])
    out = Path(cfg["out"])
    seed_mask = None
    if cfg.get("seed_from_truth"):
        if not manifest.has_masks:
            raise DataError("--seed-from-truth needs masks in the manifest")
        seed_mask = manifest.load_frame(0).truth_mask
    results = mrf.run_sequence(
        manifest,
        pools,
        _energy_params(cfg),
        _pipeline_config(cfg, temporal=not cfg.get("single_frame")),
        seed_mask_first=seed_mask,
    )
    summary = []
    for pos, res in enumerate(results):
        imageops.save_mask(out / f"masks/mask_{pos:04d}.png", res.mask())
        buf = io.BytesIO()
        np.save(buf, res.score_map().astype(np.float32))
        imageops.atomic_write_bytes(out / f"scores/score_{pos:04d}.npy", buf.getvalue())
        trace_doc = {
            "frame_index": res.index,
            "sweeps": res.sweeps,
            "energies": res.trace,
            "breakdown": {
                "total": res.breakdown.total,
                "data": res.breakdown.data,
                "spatial": res.breakdown.spatial,
                "temporal": res.breakdown.temporal,
            },
        }
        imageops.write_json(out / f"traces/trace_{pos:04d}.json", trace_doc)
        summary.append(
            {"frame_index": res.index, "sweeps": res.sweeps, "energy": res.breakdown.total}
        )
    imageops.write_json(
        out / "summary.json",
        {"config": {k: v for k, v in cfg.items() if k != "command"}, "frames": summary},
    )
    print(f"detected {len(results)} frames -> {out}")
    return 0


def _load_masks_dir(path, n: int):
    path = Path(path)
    masks = []
    for pos in range(n):
        p = path / f"mask_{pos:04d}.png"
        if not p.is_file():
            raise DataError(f"missing detected mask: {p}")
        masks.append(imageops.load_mask(p))
    return masks


def cmd_reconstruct(cfg) -> int:
    manifest = load_sequence(cfg["manifest"])
    n = len(manifest)
    if cfg.get("use_truth_masks"):
        if not manifest.has_masks:
            raise DataError("--use-truth-masks needs masks in the manifest")
        masks = [manifest.load_frame(t).truth_mask for t in range(n)]
    elif cfg.get("masks"):
        masks = _load_masks_dir(Path(cfg["masks"]) / "masks" if (Path(cfg["masks"]) / "masks").is_dir() else cfg["masks"], n)
    else:
        raise UsageError("reconstruct needs --masks or --use-truth-masks")
    scenes = []
    for t in range(n):
        frame = manifest.load_frame(t)
        vp = detect_vanishing_point(frame, masks[t], manifest.camera)
        bounds = extract_boundaries(masks[t])
        cps = generate_control_points(bounds, vp, cfg["k_c"])
        scene = build_corridor(
            cps, frame, manifest.camera, vp, frame_index=t,
            wall_height_m=cfg["wall_height"],
        )
        if cfg.get("fg_masks"):
            fg_path = Path(cfg["fg_masks"]) / f"fg_{t:04d}.png"
            if fg_path.is_file():
                scene = carve_foreground(frame, imageops.load_mask(fg_path), scene)
        scenes.append(scene)
    manifest_path = export_database(scenes, cfg["out"])
    print(f"scene database -> {manifest_path}")
    return 0


def cmd_render(cfg) -> int:
    if cfg.get("scene"):
        scene = import_scene(cfg["scene"])
    elif cfg.get("database"):
        scenes = import_database(cfg["database"])
        by_index = {s.frame_index: s for s in scenes}
        if cfg["index"] not in by_index:
            raise DataError(f"scene index {cfg['index']} not in database")
        scene = by_index[cfg["index"]]
    else:
        raise UsageError("render needs --scene or --database")
    if cfg.get("pos") is not None:
        pose = Pose(position=tuple(cfg["pos"]), yaw_deg=cfg["yaw"], pitch_deg=cfg.get("pitch"))
    else:
        pose = source_pose(scene)
        if cfg.get("yaw"):
            pose = Pose(position=pose.position, yaw_deg=cfg["yaw"], pitch_deg=cfg.get("pitch"))
    img = render_viewpoint(scene, pose, cfg.get("width"), cfg.get("height"))
    imageops.save_image(cfg["out"], img)
    print(f"rendered -> {cfg['out']}")
    return 0


def cmd_eval(cfg) -> int:
    manifest = load_sequence(cfg["manifest"])
    if not manifest.has_masks:
        raise DataError("eval needs ground-truth masks in the manifest")
    n = len(manifest)
    report: dict = {}
    if cfg.get("masks"):
        masks_dir = Path(cfg["masks"])
        if (masks_dir / "masks").is_dir():
            masks_dir = masks_dir / "masks"
        per_frame = []
        pooled_scores = []
        pooled_truth = []
        for pos in range(n):
            truth = manifest.load_frame(pos).truth_mask
            detected = imageops.load_mask(masks_dir / f"mask_{pos:04d}.png")
            score = evaluation.precision_recall(detected, truth)
            row = {
                "index": pos,
                "tp": score.tp,
                "fp": score.fp,
                "tn": score.tn,
                "fn": score.fn,
                "precision": score.precision,
                "recall": score.recall,
            }
            if score.precision is not None and score.recall is not None:
                for key, b in (("f05", 0.5), ("f1", 1.0), ("f2", 2.0)):
                    row[key] = evaluation.f_beta(score.precision, score.recall, b)
            if cfg.get("scores"):
                score_path = Path(cfg["scores"])
                if (score_path / "scores").is_dir():
                    score_path = score_path / "scores"
                smap = np.load(score_path / f"score_{pos:04d}.npy")
                curve = evaluation.roc_auc(smap, truth)
                row["auc"] = curve.auc
                pooled_scores.append(np.asarray(smap, dtype=np.float64).ravel())
                pooled_truth.append(np.asarray(truth, bool).ravel())
            per_frame.append(row)
        roc_points = None
        if pooled_scores:
            pooled = evaluation.roc_auc(
                np.concatenate(pooled_scores), np.concatenate(pooled_truth)
            )
            roc_points = pooled.points
        report.update(evaluation.detection_report(per_frame, roc_points))
    if cfg.get("scenes"):
        if not cfg.get("truth_planes"):
            raise UsageError("--scenes needs --truth-planes")
        scenes = import_database(cfg["scenes"])
        truth_maps = []
        planes_dir = Path(cfg["truth_planes"])
        for s in scenes:
            p = planes_dir / f"plane_{s.frame_index:04d}.png"
            if not p.is_file():
                raise DataError(f"missing truth plane map: {p}")
            with Image.open(p) as im:
                truth_maps.append(np.asarray(im.convert("L"), dtype=np.uint8))
        plane_ratio, model_ratio = evaluation.plane_model_correctness(
            scenes, truth_maps, cfg["patch_grid"]
        )
        conf = np.zeros((4, 4), dtype=np.int64)
        from .scene.render import render_plane_map

        for s, tm in zip(scenes, truth_maps):
            conf += evaluation.scene_confusion(render_plane_map(s, source_pose(s)), tm)
        report["scene"] = {
            "plane_correctness": plane_ratio,
            "model_correctness": model_ratio,
            "confusion": conf.tolist(),
            "classes": ["LW", "RW", "BW", "RP"],
        }
    evaluation.write_report(cfg["out"], report)
    if cfg.get("csv") and "per_frame" in report:
        imageops.atomic_write_bytes(cfg["csv"], evaluation.report_csv(report).encode())
    print(f"report -> {cfg['out']}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "detect": cmd_detect,
    "reconstruct": cmd_reconstruct,
    "render": cmd_render,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            print(json.dumps(cfg, indent=2, default=str))
            return 0
        return COMMANDS[args.command](cfg)
    except RoadMrfError as exc:
        record = {
            "error": type(exc).__name__,
            "message": str(exc),
            "exit_code": exc.exit_code,
        }
        print(json.dumps(record), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc), "exit_code": 2}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
