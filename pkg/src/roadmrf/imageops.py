"""Low-level image utilities: color conversion, PNG I/O, atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

# sRGB (D65) -> XYZ, IEC 61966-2-1
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


def srgb_to_linear(rgb):
    """Undo the sRGB transfer curve. Input in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(rgb_u8):
    """Convert 8-bit RGB (..., 3) to CIELab, D65 white point.

    L in [0, 100], a/b roughly in [-128, 127].
    """
    rgb = np.asarray(rgb_u8, dtype=np.float64) / 255.0
    lin = srgb_to_linear(rgb)
    xyz = lin @ _RGB2XYZ.T
    t = xyz / _D65_WHITE
    eps = 216.0 / 24389.0
    kappa = 24389.0 / 27.0
    f = np.where(t > eps, np.cbrt(t), (kappa * t + 16.0) / 116.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def rgb_to_hsv(rgb_u8):
    """Convert 8-bit RGB (..., 3) to HSV with H in [0, 360), S/V in [0, 1]."""
    rgb = np.asarray(rgb_u8, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hr = np.where(c > 0, ((g - b) / c) % 6.0, 0.0)
        hg = np.where(c > 0, (b - r) / c + 2.0, 0.0)
        hb = np.where(c > 0, (r - g) / c + 4.0, 0.0)
    h = np.where(v == r, hr, np.where(v == g, hg, hb)) * 60.0
    h = np.where(c > 0, h % 360.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def rgb_to_gray(rgb_u8):
    """ITU-R BT.601 luma in [0, 255] as float64."""
    rgb = np.asarray(rgb_u8, dtype=np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def load_image(path) -> np.ndarray:
    """Decode a PNG/JPEG into an (H, W, 3) uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def load_mask(path) -> np.ndarray:
    """Decode a single-channel mask PNG; >127 counts as foreground."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    return arr > 127


def atomic_write_bytes(path, data: bytes) -> None:
    """Write bytes so the target appears atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_image(path, arr: np.ndarray) -> None:
    """Encode an array as PNG atomically.

    uint8 HxW -> grayscale, HxWx3 -> RGB, HxWx4 -> RGBA; uint16 HxW -> 16-bit.
    """
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.uint16:
        im = Image.fromarray(arr, mode="I;16")
    else:
        im = Image.fromarray(arr.astype(np.uint8))
    import io

    buf = io.BytesIO()
    im.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def save_mask(path, mask: np.ndarray) -> None:
    """Write a boolean mask as 0/255 single-channel PNG."""
    save_image(path, np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8))


def write_json(path, obj) -> None:
    """Serialize to pretty JSON atomically; floats keep repr precision."""
    atomic_write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode("utf-8"))


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def value_noise(xcoords, ycoords, cell: float, seed: int, octaves: int = 1) -> np.ndarray:
    """Band-limited value noise sampled at world coordinates.

    Lattice values come from an integer hash so the field is a pure
    function of (coords, cell, seed); smoothstep interpolation keeps the
    result band-limited around 1/cell. Output in [0, 1].
    """
    x = np.asarray(xcoords, dtype=np.float64)
    y = np.asarray(ycoords, dtype=np.float64)
    out = np.zeros(np.broadcast(x, y).shape, dtype=np.float64)
    amp, total = 1.0, 0.0
    for octave in range(octaves):
        scale = cell / (2.0**octave)
        out += amp * _value_noise_single(x / scale, y / scale, seed + 0x9E37 * octave)
        total += amp
        amp *= 0.5
    return out / total


def _hash01(ix, iy, seed):
    """Deterministic integer lattice hash to [0, 1)."""
    h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)) ^ (
        iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
    ) ^ np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _value_noise_single(x, y, seed):
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    # smoothstep weights
    wx = fx * fx * (3.0 - 2.0 * fx)
    wy = fy * fy * (3.0 - 2.0 * fy)
    ix0 = x0.astype(np.int64)
    iy0 = y0.astype(np.int64)
    v00 = _hash01(ix0, iy0, seed)
    v10 = _hash01(ix0 + 1, iy0, seed)
    v01 = _hash01(ix0, iy0 + 1, seed)
    v11 = _hash01(ix0 + 1, iy0 + 1, seed)
    top = v00 + (v10 - v00) * wx
    bot = v01 + (v11 - v01) * wx
    return top + (bot - top) * wy
