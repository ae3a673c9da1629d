"""Per-label feature pools learned from masked training frames.

Color pools: SOM clusters with regularized covariances. Texture pools:
k-means cluster means over the 48-dim Gabor statistics. Location prior:
label counts on a GxG grid of normalized centroids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import imageops
from .errors import DataError

COV_FLOOR = 1e-4
MIN_CLUSTER_SAMPLES = 8


@dataclass(frozen=True)
class SOMConfig:
    grid: tuple[int, int] = (3, 3)
    epochs: int = 20
    learning_rate: float = 0.5
    radius: float = 1.5

    def __post_init__(self):
        if self.epochs < 0:
            raise DataError("epochs must be >= 0")
        if self.learning_rate <= 0 or self.radius <= 0:
            raise DataError("learning rate and radius must be positive")


def train_som(samples: np.ndarray, config: SOMConfig, seed: int) -> np.ndarray:
    """Online SOM with Gaussian neighborhood and exponential decay.

    Learning rate and radius decay to 1% of their initial values over the
    run. Returns surviving neuron weights (dead neurons dropped).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise DataError("train_som needs a non-empty (n, d) sample array")
    rng = np.random.default_rng(seed)
    gh, gw = config.grid
    n_neurons = gh * gw
    init_idx = rng.integers(0, samples.shape[0], size=n_neurons)
    weights = samples[init_idx].copy()
    coords = np.stack(np.divmod(np.arange(n_neurons), gw), axis=1).astype(np.float64)

    total_steps = config.epochs * samples.shape[0]
    step = 0
    for _ in range(config.epochs):
        for x in samples:
            frac = step / max(total_steps - 1, 1)
            eta = config.learning_rate * 0.01**frac
            sigma = config.radius * 0.01**frac
            d2 = ((weights - x) ** 2).sum(axis=1)
            bmu = int(np.argmin(d2))
            gd2 = ((coords - coords[bmu]) ** 2).sum(axis=1)
            influence = eta * np.exp(-gd2 / (2.0 * sigma * sigma))
            weights += influence[:, None] * (x - weights)
            step += 1

    d2 = ((samples[:, None, :] - weights[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    alive = np.bincount(assign, minlength=n_neurons) > 0
    return weights[alive]


def kmeans(samples: np.ndarray, k: int, seed: int, iters: int = 100):
    """Lloyd's k-means with k-means++ seeding; returns (means, assign).

    Deterministic for a fixed seed; empty clusters are dropped.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n == 0:
        raise DataError("kmeans needs samples")
    k = min(k, n)
    rng = np.random.default_rng(seed)
    centers = np.empty((k, samples.shape[1]))
    centers[0] = samples[rng.integers(0, n)]
    closest = ((samples - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[i:] = centers[0]
            k = i
            centers = centers[:k]
            break
        probs = closest / total
        centers[i] = samples[rng.choice(n, p=probs)]
        closest = np.minimum(closest, ((samples - centers[i]) ** 2).sum(axis=1))
    assign = np.zeros(n, dtype=np.int64)
    for it in range(iters):
        d2 = ((samples[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if it > 0 and (new_assign == assign).all():
            break
        assign = new_assign
        for j in range(k):
            member = assign == j
            if member.any():
                centers[j] = samples[member].mean(axis=0)
    alive = np.bincount(assign, minlength=k) > 0
    remap = np.cumsum(alive) - 1
    return centers[alive], remap[assign]


@dataclass(frozen=True)
class ColorPool:
    """Per label: list of (mean, covariance) color clusters in CIELab."""

    clusters: dict[int, list[tuple[np.ndarray, np.ndarray]]]

    def __post_init__(self):
        for label, lst in self.clusters.items():
            if not lst:
                raise DataError(f"color pool for label {label} is empty")
            for _, cov in lst:
                eig = np.linalg.eigvalsh(cov)
                if eig.min() < COV_FLOOR - 1e-12:
                    raise DataError(f"covariance below floor for label {label}")


@dataclass(frozen=True)
class TexturePool:
    """Per label: cluster means of 48-dim texture vectors."""

    means: dict[int, np.ndarray]  # label -> (m, 48)

    def __post_init__(self):
        for label, m in self.means.items():
            if m.shape[0] == 0 or not np.isfinite(m).all():
                raise DataError(f"texture pool for label {label} invalid")


@dataclass(frozen=True)
class LocationPrior:
    """Label counts over a GxG grid of normalized centroid cells."""

    grid: int
    counts: np.ndarray  # (2, G, G) float64, counts[y] per label
    alpha: float = 0.5
    omega: float = 1.0

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def cell_of(self, loc) -> tuple[int, int]:
        gx = min(self.grid - 1, max(0, int(loc[0] * self.grid)))
        gy = min(self.grid - 1, max(0, int(loc[1] * self.grid)))
        return gy, gx


@dataclass(frozen=True)
class FeaturePools:
    color: ColorPool
    texture: TexturePool
    location: LocationPrior
    som_config: SOMConfig = field(default_factory=SOMConfig)
    flags: dict = field(default_factory=dict)


def majority_labels(graph, mask: np.ndarray) -> np.ndarray:
    """Per-superpixel majority of a boolean mask (ties go to road=1)."""
    flat = graph.label_map.ravel()
    road = np.bincount(flat, weights=mask.ravel().astype(np.float64), minlength=graph.n)
    return (road * 2 >= graph.pixel_counts).astype(np.int8)


def build_color_pool(
    samples_by_label: dict[int, np.ndarray], config: SOMConfig, seed: int
) -> ColorPool:
    """SOM-cluster CIELab samples per label; covariance per cluster.

    Clusters with fewer than 8 members merge into the nearest cluster;
    every covariance gets a 1e-4 * I ridge.
    """
    clusters: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
    for label, samples in sorted(samples_by_label.items()):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[0] == 0:
            raise DataError(f"no training superpixels for label {label}")
        weights = train_som(samples, config, seed + label)
        d2 = ((samples[:, None, :] - weights[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        groups = [samples[assign == m] for m in range(weights.shape[0])]
        groups = [g for g in groups if g.shape[0] > 0]
        # merge undersized clusters into the nearest surviving one
        while len(groups) > 1:
            sizes = [g.shape[0] for g in groups]
            small = min(range(len(groups)), key=lambda i: (sizes[i], i))
            if sizes[small] >= MIN_CLUSTER_SAMPLES:
                break
            means = [g.mean(axis=0) for g in groups]
            dists = [
                np.inf if i == small else ((means[i] - means[small]) ** 2).sum()
                for i in range(len(groups))
            ]
            target = int(np.argmin(dists))
            groups[target] = np.concatenate([groups[target], groups[small]])
            groups.pop(small)
        lst = []
        for g in groups:
            mu = g.mean(axis=0)
            diff = g - mu
            cov = diff.T @ diff / g.shape[0] + COV_FLOOR * np.eye(samples.shape[1])
            lst.append((mu, cov))
        clusters[label] = lst
    return ColorPool(clusters=clusters)


def build_texture_pool(
    samples_by_label: dict[int, np.ndarray], k_clusters: int = 8, seed: int = 0
) -> TexturePool:
    means: dict[int, np.ndarray] = {}
    for label, samples in sorted(samples_by_label.items()):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[0] == 0:
            raise DataError(f"no training superpixels for label {label}")
        centers, _ = kmeans(samples, k_clusters, seed + label)
        means[label] = centers
    return TexturePool(means=means)


def build_location_prior(
    locations: np.ndarray, labels: np.ndarray, grid: int = 16,
    alpha: float = 0.5, omega: float = 1.0,
) -> LocationPrior:
    """Accumulate per-label counts of normalized centroids on the grid."""
    if grid < 2:
        raise DataError(f"grid must be >= 2, got {grid}")
    counts = np.zeros((2, grid, grid), dtype=np.float64)
    locations = np.asarray(locations, dtype=np.float64)
    gx = np.clip((locations[:, 0] * grid).astype(np.int64), 0, grid - 1)
    gy = np.clip((locations[:, 1] * grid).astype(np.int64), 0, grid - 1)
    for y, x, lab in zip(gy, gx, np.asarray(labels, dtype=np.int64)):
        counts[lab, y, x] += 1.0
    return LocationPrior(grid=grid, counts=counts, alpha=alpha, omega=omega)


def train_pools(
    training,  # iterable of (graph, features, mask)
    som_config: SOMConfig | None = None,
    k_texture: int = 8,
    grid: int = 16,
    alpha: float = 0.5,
    omega: float = 1.0,
    seed: int = 0,
    flags: dict | None = None,
) -> FeaturePools:
    """Assemble all pools from per-frame (graph, features, mask) triples."""
    som_config = som_config or SOMConfig()
    color_samples = {0: [], 1: []}
    texture_samples = {0: [], 1: []}
    locations, labels = [], []
    for graph, feats, mask in training:
        lab = majority_labels(graph, mask)
        for y in (0, 1):
            sel = lab == y
            color_samples[y].append(feats.color_lab[sel])
            texture_samples[y].append(feats.texture[sel])
        locations.append(feats.location)
        labels.append(lab)
    color_samples = {y: np.concatenate(v) for y, v in color_samples.items()}
    texture_samples = {y: np.concatenate(v) for y, v in texture_samples.items()}
    for y in (0, 1):
        if color_samples[y].shape[0] == 0:
            raise DataError(f"training data contains no superpixels of label {y}")
    return FeaturePools(
        color=build_color_pool(color_samples, som_config, seed),
        texture=build_texture_pool(texture_samples, k_texture, seed + 17),
        location=build_location_prior(
            np.concatenate(locations), np.concatenate(labels), grid, alpha, omega
        ),
        som_config=som_config,
        flags=dict(flags or {}),
    )


# ---------------------------------------------------------------------------
# Pool archive (JSON)
# ---------------------------------------------------------------------------


def save_pools(path, pools: FeaturePools) -> None:
    doc = {
        "color": {
            str(y): [
                {"mean": mu.tolist(), "cov": cov.tolist()}
                for mu, cov in pools.color.clusters[y]
            ]
            for y in sorted(pools.color.clusters)
        },
        "texture": {
            str(y): pools.texture.means[y].tolist() for y in sorted(pools.texture.means)
        },
        "location": {
            "grid": pools.location.grid,
            "counts": pools.location.counts.tolist(),
            "alpha": pools.location.alpha,
            "omega": pools.location.omega,
        },
        "som_config": {
            "grid": list(pools.som_config.grid),
            "epochs": pools.som_config.epochs,
            "learning_rate": pools.som_config.learning_rate,
            "radius": pools.som_config.radius,
        },
        "flags": pools.flags,
    }
    imageops.write_json(path, doc)


def load_pools(path) -> FeaturePools:
    doc = imageops.read_json(path)
    color = ColorPool(
        clusters={
            int(y): [
                (np.array(c["mean"], dtype=np.float64), np.array(c["cov"], dtype=np.float64))
                for c in lst
            ]
            for y, lst in doc["color"].items()
        }
    )
    texture = TexturePool(
        means={int(y): np.array(m, dtype=np.float64) for y, m in doc["texture"].items()}
    )
    loc = doc["location"]
    location = LocationPrior(
        grid=int(loc["grid"]),
        counts=np.array(loc["counts"], dtype=np.float64),
        alpha=float(loc["alpha"]),
        omega=float(loc["omega"]),
    )
    sc = doc["som_config"]
    som_config = SOMConfig(
        grid=tuple(sc["grid"]),
        epochs=int(sc["epochs"]),
        learning_rate=float(sc["learning_rate"]),
        radius=float(sc["radius"]),
    )
    return FeaturePools(
        color=color,
        texture=texture,
        location=location,
        som_config=som_config,
        flags=doc.get("flags", {}),
    )
