"""glTF 2.0 scene export/import plus the scene-database manifest.

Layout per scene directory: model.gltf + model.bin + tex_<plane>.png
(+ fg_<k>.png billboards) + scene.json (vanishing point, control points,
camera, crop boxes, foreground links). A database is a scenes.json file
listing per-frame entries and the foreground->background relation table.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .. import imageops
from ..corpus import CameraParams
from ..errors import DataError
from .geometry import (
    Billboard,
    ControlPoints,
    PLANE_ORDER,
    ScenePlane,
    SceneModel,
    VanishingPoint,
)

_FLOAT = 5126
_USHORT = 5123
_ARRAY_BUFFER = 34962
_ELEMENT_ARRAY_BUFFER = 34963
_LINEAR = 9729
_CLAMP = 33071


def _pad4(blob: bytearray) -> None:
    while len(blob) % 4:
        blob.append(0)


class _GltfBuilder:
    def __init__(self):
        self.blob = bytearray()
        self.buffer_views = []
        self.accessors = []
        self.meshes = []
        self.nodes = []
        self.materials = []
        self.textures = []
        self.images = []
        self.texture_files = {}

    def add_view(self, data: bytes, target: int) -> int:
        _pad4(self.blob)
        offset = len(self.blob)
        self.blob.extend(data)
        self.buffer_views.append(
            {
                "buffer": 0,
                "byteOffset": offset,
                "byteLength": len(data),
                "target": target,
            }
        )
        return len(self.buffer_views) - 1

    def add_accessor(self, view, comp_type, count, acc_type, vmin=None, vmax=None):
        acc = {
            "bufferView": view,
            "componentType": comp_type,
            "count": count,
            "type": acc_type,
        }
        if vmin is not None:
            acc["min"] = vmin
            acc["max"] = vmax
        self.accessors.append(acc)
        return len(self.accessors) - 1

    def add_mesh(self, name, vertices, faces, uv, tex_file, alpha=False):
        v32 = vertices.astype("<f4")
        pos_view = self.add_view(v32.tobytes(), _ARRAY_BUFFER)
        pos_acc = self.add_accessor(
            pos_view,
            _FLOAT,
            len(v32),
            "VEC3",
            vmin=[float(x) for x in v32.min(axis=0)],
            vmax=[float(x) for x in v32.max(axis=0)],
        )
        uv32 = uv.astype("<f4")
        uv_view = self.add_view(uv32.tobytes(), _ARRAY_BUFFER)
        uv_acc = self.add_accessor(uv_view, _FLOAT, len(uv32), "VEC2")
        idx = faces.astype("<u2").ravel()
        idx_view = self.add_view(idx.tobytes(), _ELEMENT_ARRAY_BUFFER)
        idx_acc = self.add_accessor(idx_view, _USHORT, idx.size, "SCALAR")

        image_idx = len(self.images)
        self.images.append({"uri": tex_file})
        self.textures.append({"sampler": 0, "source": image_idx})
        material = {
            "name": f"{name}_mat",
            "pbrMetallicRoughness": {
                "baseColorTexture": {"index": len(self.textures) - 1},
                "metallicFactor": 0.0,
                "roughnessFactor": 1.0,
            },
            "doubleSided": True,
        }
        if alpha:
            material["alphaMode"] = "BLEND"
        self.materials.append(material)
        self.meshes.append(
            {
                "name": name,
                "primitives": [
                    {
                        "attributes": {"POSITION": pos_acc, "TEXCOORD_0": uv_acc},
                        "indices": idx_acc,
                        "material": len(self.materials) - 1,
                        "mode": 4,
                    }
                ],
            }
        )
        self.nodes.append({"name": name, "mesh": len(self.meshes) - 1})

    def document(self, bin_name: str) -> dict:
        return {
            "asset": {"version": "2.0", "generator": "roadmrf"},
            "scene": 0,
            "scenes": [{"nodes": list(range(len(self.nodes)))}],
            "nodes": self.nodes,
            "meshes": self.meshes,
            "materials": self.materials,
            "textures": self.textures,
            "images": self.images,
            "samplers": [
                {
                    "magFilter": _LINEAR,
                    "minFilter": _LINEAR,
                    "wrapS": _CLAMP,
                    "wrapT": _CLAMP,
                }
            ],
            "buffers": [{"uri": bin_name, "byteLength": len(self.blob)}],
            "bufferViews": self.buffer_views,
            "accessors": self.accessors,
        }


def export_scene(scene: SceneModel, out_dir) -> Path:
    """Write one scene directory; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    builder = _GltfBuilder()
    plane_meta = {}
    for name in PLANE_ORDER:
        plane = scene.planes[name]
        tex_file = f"tex_{name}.png"
        imageops.save_image(out_dir / tex_file, plane.texture)
        builder.add_mesh(name, plane.vertices, plane.faces, plane.uv, tex_file)
        plane_meta[name] = {"crop_box": list(plane.crop_box), "texture": tex_file}
    fg_meta = []
    for k, bb in enumerate(scene.foreground):
        tex_file = f"fg_{k}.png"
        imageops.save_image(out_dir / tex_file, bb.texture_rgba)
        builder.add_mesh(f"foreground_{k}", bb.vertices, bb.faces, bb.uv, tex_file, alpha=True)
        fg_meta.append({"texture": tex_file, "depth_m": bb.depth_m, "link": bb.link})

    imageops.atomic_write_bytes(out_dir / "model.bin", bytes(builder.blob))
    imageops.write_json(out_dir / "model.gltf", builder.document("model.bin"))
    imageops.write_json(
        out_dir / "scene.json",
        {
            "frame_index": scene.frame_index,
            "vp": {"x": scene.vp.x, "y": scene.vp.y, "confidence": scene.vp.confidence},
            "control_points": {
                "left": scene.control_points.left.tolist(),
                "right": scene.control_points.right.tolist(),
            },
            "camera": {
                "fov_deg": scene.camera.fov_deg,
                "height_m": scene.camera.height_m,
                "pitch_deg": scene.camera.pitch_deg,
            },
            "image_size": list(scene.image_size),
            "far_depth_m": scene.far_depth_m,
            "planes": plane_meta,
            "foreground": fg_meta,
        },
    )
    return out_dir


def _read_accessor(doc, blob, acc_idx):
    acc = doc["accessors"][acc_idx]
    view = doc["bufferViews"][acc["bufferView"]]
    offset = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
    count = acc["count"]
    n_comp = {"SCALAR": 1, "VEC2": 2, "VEC3": 3}[acc["type"]]
    if acc["componentType"] == _FLOAT:
        dtype = "<f4"
    elif acc["componentType"] == _USHORT:
        dtype = "<u2"
    else:
        raise DataError(f"unsupported accessor componentType {acc['componentType']}")
    arr = np.frombuffer(blob, dtype=dtype, count=count * n_comp, offset=offset)
    return arr.reshape(count, n_comp) if n_comp > 1 else arr


def import_scene(scene_dir) -> SceneModel:
    """Inverse of export_scene."""
    scene_dir = Path(scene_dir)
    gltf_path = scene_dir / "model.gltf"
    if not gltf_path.is_file():
        raise DataError(f"no model.gltf in {scene_dir}")
    doc = imageops.read_json(gltf_path)
    if doc.get("asset", {}).get("version") != "2.0":
        raise DataError("not a glTF 2.0 document")
    meta = imageops.read_json(scene_dir / "scene.json")
    blob = (scene_dir / doc["buffers"][0]["uri"]).read_bytes()
    if len(blob) != doc["buffers"][0]["byteLength"]:
        raise DataError("buffer length mismatch")

    meshes_by_name = {}
    for node in doc["nodes"]:
        mesh = doc["meshes"][node["mesh"]]
        prim = mesh["primitives"][0]
        verts = _read_accessor(doc, blob, prim["attributes"]["POSITION"]).astype(np.float64)
        uv = _read_accessor(doc, blob, prim["attributes"]["TEXCOORD_0"]).astype(np.float64)
        idx = _read_accessor(doc, blob, prim["indices"]).astype(np.int32)
        meshes_by_name[mesh["name"]] = (verts, uv, idx.reshape(-1, 3))

    planes = {}
    for name in PLANE_ORDER:
        verts, uv, faces = meshes_by_name[name]
        pm = meta["planes"][name]
        with_tex = imageops.load_image(scene_dir / pm["texture"])
        planes[name] = ScenePlane(
            name=name,
            vertices=verts,
            faces=faces,
            uv=uv,
            texture=with_tex,
            crop_box=tuple(pm["crop_box"]),
        )
    foreground = []
    for k, fg in enumerate(meta["foreground"]):
        verts, uv, faces = meshes_by_name[f"foreground_{k}"]
        from PIL import Image

        with Image.open(scene_dir / fg["texture"]) as im:
            rgba = np.asarray(im.convert("RGBA"), dtype=np.uint8)
        foreground.append(
            Billboard(
                vertices=verts,
                faces=faces,
                uv=uv,
                texture_rgba=rgba,
                depth_m=float(fg["depth_m"]),
                link=int(fg["link"]),
            )
        )
    cp = meta["control_points"]
    return SceneModel(
        frame_index=int(meta["frame_index"]),
        camera=CameraParams(**meta["camera"]),
        image_size=tuple(meta["image_size"]),
        vp=VanishingPoint(**meta["vp"]),
        control_points=ControlPoints(
            left=np.array(cp["left"], dtype=np.float64),
            right=np.array(cp["right"], dtype=np.float64),
        ),
        planes=planes,
        foreground=foreground,
    )


def export_database(scenes: list[SceneModel], out_dir) -> Path:
    """Write every scene plus the scenes.json database manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    links = []
    for scene in scenes:
        sub = f"scene_{scene.frame_index:04d}"
        export_scene(scene, out_dir / sub)
        thumb = scene.planes["road"].texture
        step = max(1, max(thumb.shape[:2]) // 96)
        imageops.save_image(out_dir / sub / "thumb.png", thumb[::step, ::step])
        entries.append(
            {
                "frame_index": scene.frame_index,
                "dir": sub,
                "gltf": f"{sub}/model.gltf",
                "manifest": f"{sub}/scene.json",
                "thumbnail": f"{sub}/thumb.png",
                "far_depth_m": scene.far_depth_m,
            }
        )
        for k, bb in enumerate(scene.foreground):
            links.append(
                {"scene": scene.frame_index, "billboard": k, "background": bb.link}
            )
    imageops.write_json(out_dir / "scenes.json", {"entries": entries, "foreground_links": links})
    return out_dir / "scenes.json"


def import_database(manifest_path) -> list[SceneModel]:
    manifest_path = Path(manifest_path)
    doc = imageops.read_json(manifest_path)
    scenes = []
    for entry in doc["entries"]:
        scenes.append(import_scene(manifest_path.parent / entry["dir"]))
    for link in doc["foreground_links"]:
        by_index = {s.frame_index: s for s in scenes}
        if link["background"] not in by_index:
            raise DataError(f"foreground link to missing scene {link['background']}")
    return scenes
