"""Per-superpixel appearance features: CIELab color, Gabor texture stats,
normalized location."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import imageops
from .corpus import Frame
from .errors import DataError
from .superpixel import SuperpixelGraph

DEFAULT_WAVELENGTHS = (2.0, 4.0, 8.0, 16.0)
DEFAULT_BLOCK = 33


@dataclass(frozen=True)
class GaborBank:
    """Complex Gabor kernels, scale-major then orientation-minor.

    Real parts are DC-corrected so a constant image yields zero response.
    """

    kernels: tuple[np.ndarray, ...]
    wavelengths: tuple[float, ...]
    orientations_deg: tuple[float, ...]

    @property
    def n_kernels(self) -> int:
        return len(self.kernels)


def make_gabor_bank(wavelengths=DEFAULT_WAVELENGTHS, orientations_deg=None) -> GaborBank:
    """Build the 4-scale x 6-orientation complex Gabor bank.

    sigma = 0.56 * wavelength (about one octave), aspect ratio 0.5,
    kernel radius 3 sigma.
    """
    wavelengths = tuple(float(w) for w in wavelengths)
    if any(w <= 0 for w in wavelengths):
        raise DataError(f"wavelengths must be positive: {wavelengths}")
    if list(wavelengths) != sorted(set(wavelengths)):
        raise DataError(f"wavelengths must be strictly increasing: {wavelengths}")
    if orientations_deg is None:
        orientations_deg = tuple(30.0 * i for i in range(6))
    orientations_deg = tuple(float(o) for o in orientations_deg)
    gamma = 0.5
    kernels = []
    for lam in wavelengths:
        sigma = 0.56 * lam
        radius = int(np.ceil(3.0 * sigma))
        y, x = np.mgrid[-radius : radius + 1, -radius : radius + 1].astype(np.float64)
        for theta_deg in orientations_deg:
            theta = np.deg2rad(theta_deg)
            xr = x * np.cos(theta) + y * np.sin(theta)
            yr = -x * np.sin(theta) + y * np.cos(theta)
            envelope = np.exp(-(xr * xr + (gamma * gamma) * yr * yr) / (2.0 * sigma * sigma))
            carrier = np.exp(1j * (2.0 * np.pi / lam) * xr)
            k = envelope * carrier
            k = k - k.mean()  # remove DC from both parts
            kernels.append(k)
    return GaborBank(
        kernels=tuple(kernels),
        wavelengths=wavelengths,
        orientations_deg=orientations_deg,
    )


def gabor_magnitude_maps(gray: np.ndarray, bank: GaborBank) -> np.ndarray:
    """Dense |response| of every kernel via FFT cross-correlation.

    The image is edge-replicated so border responses read clamped pixels;
    output is (n_kernels, H, W).
    """
    h, w = gray.shape
    out = np.empty((bank.n_kernels, h, w), dtype=np.float64)
    idx = 0
    per_scale = len(bank.orientations_deg)
    for s, lam in enumerate(bank.wavelengths):
        k0 = bank.kernels[s * per_scale]
        kh, kw = k0.shape
        ph, pw = kh // 2, kw // 2
        padded = np.pad(gray, ((ph, ph), (pw, pw)), mode="edge")
        full_shape = (padded.shape[0] + kh - 1, padded.shape[1] + kw - 1)
        f_img = np.fft.fft2(padded, s=full_shape)
        for o in range(per_scale):
            k = bank.kernels[s * per_scale + o]
            # correlation = convolution with the flipped kernel
            f_k = np.fft.fft2(k[::-1, ::-1], s=full_shape)
            conv = np.fft.ifft2(f_img * f_k)
            out[idx] = np.abs(conv[2 * ph : 2 * ph + h, 2 * pw : 2 * pw + w])
            idx += 1
    return out


def texture_features(
    frame: Frame, graph: SuperpixelGraph, bank: GaborBank, block: int = DEFAULT_BLOCK
) -> np.ndarray:
    """48-vector per superpixel: mean and std of each kernel's |response|
    over the block centered on the centroid (clamped at image edges).

    Ordering is scale-major, orientation-minor, mean before deviation.
    """
    if block < 9 or block % 2 == 0:
        raise DataError(f"block must be odd and >= 9, got {block}")
    h, w = frame.pixels.shape[:2]
    gray = imageops.rgb_to_gray(frame.pixels)
    maps = gabor_magnitude_maps(gray, bank)
    half = block // 2
    out = np.empty((graph.n, 2 * bank.n_kernels), dtype=np.float64)
    for i in range(graph.n):
        cxf, cyf = graph.centroids[i]
        cx = int(np.floor(cxf + 0.5))
        cy = int(np.floor(cyf + 0.5))
        r0, r1 = max(0, cy - half), min(h, cy + half + 1)
        c0, c1 = max(0, cx - half), min(w, cx + half + 1)
        win = maps[:, r0:r1, c0:c1].reshape(bank.n_kernels, -1)
        out[i, 0::2] = win.mean(axis=1)
        out[i, 1::2] = win.std(axis=1)
    return out


def color_features(frame: Frame, graph: SuperpixelGraph):
    """Mean colors per superpixel.

    Returns (color_lab (K, 3), color_full (K, 9)); color_full stacks RGB,
    HSV and CIELab means for diagnostics.
    """
    flat = graph.label_map.ravel()
    counts = graph.pixel_counts.astype(np.float64)
    lab = imageops.rgb_to_lab(frame.pixels)
    hsv = imageops.rgb_to_hsv(frame.pixels)
    rgb = frame.pixels.astype(np.float64)

    def channel_means(img3):
        return np.stack(
            [
                np.bincount(flat, weights=img3[..., ch].ravel(), minlength=graph.n)
                / counts
                for ch in range(3)
            ],
            axis=1,
        )

    lab_mean = channel_means(lab)
    full = np.concatenate([channel_means(rgb), channel_means(hsv), lab_mean], axis=1)
    return lab_mean, full


def location_features(graph: SuperpixelGraph, height: int, width: int) -> np.ndarray:
    """Centroids normalized to [0, 1]^2 as (cx/W, cy/H)."""
    loc = graph.centroids / np.array([width, height], dtype=np.float64)
    return np.clip(loc, 0.0, 1.0)


@dataclass(frozen=True)
class FrameFeatures:
    color_lab: np.ndarray  # (K, 3)
    color_full: np.ndarray  # (K, 9)
    texture: np.ndarray  # (K, 48)
    location: np.ndarray  # (K, 2)

    @property
    def n(self) -> int:
        return self.color_lab.shape[0]


def compute_features(
    frame: Frame, graph: SuperpixelGraph, bank: GaborBank, block: int = DEFAULT_BLOCK
) -> FrameFeatures:
    h, w = frame.pixels.shape[:2]
    lab_mean, full = color_features(frame, graph)
    return FrameFeatures(
        color_lab=lab_mean,
        color_full=full,
        texture=texture_features(frame, graph, bank, block),
        location=location_features(graph, h, w),
    )


def dump_features(path, feats: FrameFeatures) -> None:
    """Flat little-endian float32 binary (K x 53) plus a JSON header."""
    k = feats.n
    flat = np.concatenate([feats.color_lab, feats.texture, feats.location], axis=1)
    data = flat.astype("<f4").tobytes()
    imageops.atomic_write_bytes(path, data)
    header = {
        "K": k,
        "dtype": "<f4",
        "row_floats": 53,
        "fields": {"color_lab": [0, 3], "texture": [3, 51], "location": [51, 53]},
    }
    imageops.atomic_write_bytes(
        str(path) + ".json", (json.dumps(header, indent=2) + "\n").encode()
    )


def load_features_dump(path):
    header = imageops.read_json(str(path) + ".json")
    raw = np.fromfile(path, dtype="<f4").reshape(header["K"], header["row_floats"])
    f = header["fields"]
    return {name: raw[:, a:b].astype(np.float64) for name, (a, b) in f.items()}
