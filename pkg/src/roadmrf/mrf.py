"""Superpixel MRF energy and its sweep minimizer.

The energy couples a data-fidelity term (log of the color/texture/location
probability product) with contrast-weighted smoothness over spatially and
temporally adjacent superpixel pairs. Minimization runs single-flip sweeps
in ascending id order; a flip is kept when it lowers the *global* energy,
where each undirected spatial pair appears twice in the double sum and
temporal pairs (against the fixed previous frame) once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import flow as flow_mod
from . import kernels
from .corpus import SequenceManifest
from .errors import DataError
from .features import DEFAULT_BLOCK, FrameFeatures, GaborBank, compute_features, make_gabor_bank
from .pools import FeaturePools, LocationPrior, majority_labels
from .superpixel import SuperpixelGraph, slic_segment

log = logging.getLogger(__name__)

BETA_FLOOR = 1e-6


@dataclass(frozen=True)
class EnergyParams:
    """Weights and stopping rule for the energy minimization."""

    lambda1: float = 1.0
    lambda2: float = 0.5
    metric: str = "identity"  # or "inverse_covariance"
    epsilon: float = 1e-4
    max_sweeps: int = 50
    beta: float | None = None  # per-frame contrast coefficient
    metric_m: np.ndarray | None = None  # (3, 3) when metric is Mahalanobis

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise DataError("lambda1 and lambda2 must be >= 0")
        if self.epsilon <= 0:
            raise DataError("epsilon must be > 0")
        if self.max_sweeps < 1:
            raise DataError("max_sweeps must be >= 1")
        if self.metric not in ("identity", "inverse_covariance"):
            raise DataError(f"unknown metric '{self.metric}'")


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    data: float
    spatial: float
    temporal: float


@dataclass(frozen=True)
class TemporalContext:
    """Fixed previous-frame context for sequence-mode energies."""

    graph: SuperpixelGraph
    labeling: np.ndarray  # (K_prev,) int8
    color_lab: np.ndarray  # (K_prev, 3)


# ---------------------------------------------------------------------------
# Data-fidelity probabilities
# ---------------------------------------------------------------------------


def color_prob(c, y: int, pool) -> float:
    """Highest Gaussian density over the label's color clusters."""
    c = np.asarray(c, dtype=np.float64)
    best = -np.inf
    for mu, cov in pool.clusters[y]:
        d = c - mu
        inv = np.linalg.inv(cov)
        _, logdet = np.linalg.slogdet(cov)
        quad = d @ inv @ d
        logp = -0.5 * (len(c) * np.log(2.0 * np.pi) + logdet + quad)
        if logp > best:
            best = logp
    return float(np.exp(best))


def texture_corr(t, m) -> float:
    """Pearson correlation of two texture vectors (0 when degenerate)."""
    t = np.asarray(t, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    n = t.shape[0]
    st, sm = t.sum(), m.sum()
    num = n * (t * m).sum() - st * sm
    vt = n * (t * t).sum() - st * st
    vm = n * (m * m).sum() - sm * sm
    if vt <= 0.0 or vm <= 0.0:
        return 0.0
    return float(num / np.sqrt(vt * vm))


def texture_prob(t, y: int, pool) -> float:
    """exp of the best correlation against the label's cluster means."""
    best = max(texture_corr(t, m) for m in pool.means[y])
    return float(np.exp(best))


def location_prob(lc, y: int, prior: LocationPrior) -> float:
    gy, gx = prior.cell_of(lc)
    ny = prior.counts[y, gy, gx]
    nt = prior.totals[gy, gx]
    ratio = (ny + prior.alpha) / (nt + prior.alpha)
    return float(np.exp(ratio**prior.omega))


def data_term(feats: FrameFeatures, i: int, y: int, pools: FeaturePools) -> float:
    """f_i = log p(x_i | y): sum of the three factor logs."""
    return float(
        np.log(color_prob(feats.color_lab[i], y, pools.color))
        + np.log(texture_prob(feats.texture[i], y, pools.texture))
        + np.log(location_prob(feats.location[i], y, pools.location))
    )


def data_term_matrix(feats: FrameFeatures, pools: FeaturePools):
    """Vectorized (K, 2) matrix of data terms, plus zero-variance count."""
    k = feats.n
    f = np.zeros((k, 2), dtype=np.float64)

    # color: log of max Gaussian density per label
    for y in (0, 1):
        logs = np.full((k, len(pools.color.clusters[y])), -np.inf)
        for m, (mu, cov) in enumerate(pools.color.clusters[y]):
            inv = np.linalg.inv(cov)
            _, logdet = np.linalg.slogdet(cov)
            d = feats.color_lab - mu
            quad = np.einsum("ki,ij,kj->k", d, inv, d)
            logs[:, m] = -0.5 * (3.0 * np.log(2.0 * np.pi) + logdet + quad)
        f[:, y] += logs.max(axis=1)

    # texture: exp(max correlation) -> contributes max correlation directly
    t = feats.texture
    n = t.shape[1]
    st = t.sum(axis=1)
    vt = n * (t * t).sum(axis=1) - st * st
    degenerate = vt <= 0.0
    n_flagged = int(degenerate.sum())
    for y in (0, 1):
        means = pools.texture.means[y]
        sm = means.sum(axis=1)
        vm = n * (means * means).sum(axis=1) - sm * sm
        num = n * (t @ means.T) - np.outer(st, sm)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = num / np.sqrt(np.outer(vt, vm))
        corr[degenerate, :] = 0.0
        corr[:, vm <= 0.0] = 0.0
        f[:, y] += corr.max(axis=1)

    # location: the exponent itself is the log-probability
    prior = pools.location
    gx = np.clip((feats.location[:, 0] * prior.grid).astype(np.int64), 0, prior.grid - 1)
    gy = np.clip((feats.location[:, 1] * prior.grid).astype(np.int64), 0, prior.grid - 1)
    totals = prior.totals[gy, gx]
    for y in (0, 1):
        ratio = (prior.counts[y, gy, gx] + prior.alpha) / (totals + prior.alpha)
        f[:, y] += ratio**prior.omega

    if n_flagged:
        log.debug("data_term: %d zero-variance texture vectors", n_flagged)
    return f, n_flagged


def road_posterior(f: np.ndarray) -> np.ndarray:
    """p(road | x) from the cached data terms, temperature 1."""
    shift = f.max(axis=1, keepdims=True)
    e = np.exp(f - shift)
    return e[:, 1] / (e[:, 0] + e[:, 1])


# ---------------------------------------------------------------------------
# Smoothness
# ---------------------------------------------------------------------------


def contrast_beta(graph: SuperpixelGraph, color_lab: np.ndarray) -> float:
    """Eq.-style contrast scale: 1 / (2 <squared color distance>) over
    spatially adjacent pairs, with the mean floored at 1e-6."""
    edges = graph.edge_list()
    if edges.shape[0] == 0:
        raise DataError("contrast_beta: graph has no spatial edges")
    diff = color_lab[edges[:, 0]] - color_lab[edges[:, 1]]
    mean = float((diff * diff).sum(axis=1).mean())
    return 1.0 / (2.0 * max(mean, BETA_FLOOR))


def metric_matrix(graph: SuperpixelGraph, color_lab: np.ndarray) -> np.ndarray:
    """Inverse covariance of adjacent-pair color differences (ridge 1e-8)."""
    edges = graph.edge_list()
    diff = color_lab[edges[:, 0]] - color_lab[edges[:, 1]]
    cov = diff.T @ diff / max(diff.shape[0], 1)
    return np.linalg.inv(cov + 1e-8 * np.eye(3))


def pair_weight(x_i, x_j, params: EnergyParams) -> float:
    """exp(-beta * d_M) for a feature pair (the label-independent factor)."""
    if params.beta is None:
        raise DataError("params.beta is unset; compute contrast_beta first")
    d = np.asarray(x_i, dtype=np.float64) - np.asarray(x_j, dtype=np.float64)
    if params.metric_m is not None:
        dm = float(d @ params.metric_m @ d)
    else:
        dm = float(d @ d)
    return float(np.exp(-params.beta * dm))


def smoothness(y_i: int, y_j: int, x_i, x_j, params: EnergyParams) -> float:
    """(1 - delta(y_i, y_j)) * exp(-beta * d_M(x_i, x_j))."""
    if y_i == y_j:
        return 0.0
    return pair_weight(x_i, x_j, params)


# ---------------------------------------------------------------------------
# Energy cache and global/local energies
# ---------------------------------------------------------------------------


@dataclass
class EnergyCache:
    """Labeling-independent quantities: data terms, pair weights."""

    f: np.ndarray  # (K, 2)
    indptr: np.ndarray
    indices: np.ndarray
    edge_src: np.ndarray  # i of each directed edge
    weights: np.ndarray  # exp(-beta d_M) per directed edge
    tem_raw0: np.ndarray  # (K,) temporal pair sum if label 0
    tem_raw1: np.ndarray
    params: EnergyParams
    n_zero_variance: int = 0

    def breakdown(self, labels: np.ndarray) -> EnergyBreakdown:
        labels = np.asarray(labels)
        data = float(self.f[np.arange(self.f.shape[0]), labels].sum())
        disagree = labels[self.edge_src] != labels[self.indices]
        spatial = float(self.weights[disagree].sum()) if self.weights.size else 0.0
        temporal = float(np.where(labels == 0, self.tem_raw0, self.tem_raw1).sum())
        total = -data + self.params.lambda1 * spatial + self.params.lambda2 * temporal
        return EnergyBreakdown(total=total, data=data, spatial=spatial, temporal=temporal)

    def total(self, labels: np.ndarray) -> float:
        return self.breakdown(labels).total


def _resolve_params(graph, color_lab, params: EnergyParams) -> EnergyParams:
    if params.beta is None:
        params = replace(params, beta=contrast_beta(graph, color_lab))
    if params.metric == "inverse_covariance" and params.metric_m is None:
        params = replace(params, metric_m=metric_matrix(graph, color_lab))
    return params


def build_cache(
    graph: SuperpixelGraph,
    feats: FrameFeatures,
    pools: FeaturePools,
    params: EnergyParams,
    prev: TemporalContext | None = None,
) -> EnergyCache:
    params = _resolve_params(graph, feats.color_lab, params)
    f, n_flagged = data_term_matrix(feats, pools)
    indptr, indices = graph.spatial_csr()
    edge_src = np.repeat(np.arange(graph.n), np.diff(indptr)).astype(np.int64)
    if indices.size:
        d = feats.color_lab[edge_src] - feats.color_lab[indices]
        if params.metric_m is not None:
            dm = np.einsum("ei,ij,ej->e", d, params.metric_m, d)
        else:
            dm = (d * d).sum(axis=1)
        weights = np.exp(-params.beta * dm)
    else:
        weights = np.empty(0, dtype=np.float64)

    tem_raw0 = np.zeros(graph.n, dtype=np.float64)
    tem_raw1 = np.zeros(graph.n, dtype=np.float64)
    if prev is not None:
        if graph.temporal_neighbors is None:
            raise DataError("temporal context given but temporal adjacency missing")
        for i, nbrs in enumerate(graph.temporal_neighbors):
            for j in nbrs:
                w = pair_weight(feats.color_lab[i], prev.color_lab[j], params)
                if prev.labeling[j] != 0:
                    tem_raw0[i] += w
                if prev.labeling[j] != 1:
                    tem_raw1[i] += w
    elif graph.temporal_neighbors is not None:
        raise DataError("temporal adjacency present but no temporal context given")
    return EnergyCache(
        f=f,
        indptr=indptr,
        indices=indices.astype(np.int64),
        edge_src=edge_src,
        weights=weights,
        tem_raw0=tem_raw0,
        tem_raw1=tem_raw1,
        params=params,
        n_zero_variance=n_flagged,
    )


def global_energy(
    graph: SuperpixelGraph,
    feats: FrameFeatures,
    labeling: np.ndarray,
    prev: TemporalContext | None,
    pools: FeaturePools,
    params: EnergyParams,
) -> EnergyBreakdown:
    """Full energy from scratch (builds the cache internally)."""
    labeling = np.asarray(labeling)
    if labeling.shape[0] != graph.n:
        raise DataError(f"labeling length {labeling.shape[0]} != K {graph.n}")
    cache = build_cache(graph, feats, pools, params, prev)
    return cache.breakdown(labeling)


def local_energy(
    i: int,
    graph: SuperpixelGraph,
    feats: FrameFeatures,
    labeling: np.ndarray,
    prev: TemporalContext | None,
    pools: FeaturePools,
    params: EnergyParams,
) -> float:
    """Per-superpixel energy: -f_i plus its own directed pair terms."""
    if not (0 <= i < graph.n):
        raise DataError(f"superpixel index {i} out of range")
    params = _resolve_params(graph, feats.color_lab, params)
    y_i = int(labeling[i])
    e = -data_term(feats, i, y_i, pools)
    for j in graph.spatial_neighbors[i]:
        e += params.lambda1 * smoothness(
            y_i, int(labeling[j]), feats.color_lab[i], feats.color_lab[j], params
        )
    if prev is not None and graph.temporal_neighbors is not None:
        for j in graph.temporal_neighbors[i]:
            e += params.lambda2 * smoothness(
                y_i, int(prev.labeling[j]), feats.color_lab[i], prev.color_lab[j], params
            )
    return e


def flip_delta(cache: EnergyCache, labels: np.ndarray, i: int) -> float:
    """Exact global-energy change from flipping label i.

    The spatial pair term enters twice (both directions of each pair touch
    y_i); the temporal term once.
    """
    cur = int(labels[i])
    alt = 1 - cur
    s_cur = 0.0
    s_alt = 0.0
    for p in range(cache.indptr[i], cache.indptr[i + 1]):
        j = cache.indices[p]
        w = cache.weights[p]
        if labels[j] != cur:
            s_cur += w
        if labels[j] != alt:
            s_alt += w
    d_data = cache.f[i, cur] - cache.f[i, alt]
    if cur == 0:
        d_tem = cache.params.lambda2 * (cache.tem_raw1[i] - cache.tem_raw0[i])
    else:
        d_tem = cache.params.lambda2 * (cache.tem_raw0[i] - cache.tem_raw1[i])
    return d_data + 2.0 * cache.params.lambda1 * (s_alt - s_cur) + d_tem


@dataclass
class MinimizeResult:
    labeling: np.ndarray  # (K,) int8
    sweeps: int
    trace: list[float]  # energy before sweeping, then after each sweep
    breakdown: EnergyBreakdown
    terminated_by_epsilon: bool


def minimize_frame(
    graph: SuperpixelGraph,
    feats: FrameFeatures,
    init: np.ndarray,
    prev: TemporalContext | None,
    pools: FeaturePools,
    params: EnergyParams,
) -> MinimizeResult:
    """Sweep single-flip minimization with Gauss-Seidel updates.

    Stops when the relative energy change after a sweep falls below
    params.epsilon or at max_sweeps.
    """
    labels = np.asarray(init, dtype=np.int8).copy()
    if labels.shape[0] != graph.n:
        raise DataError("init labeling length mismatch")
    cache = build_cache(graph, feats, pools, params, prev)
    lam2 = cache.params.lambda2
    tem0 = lam2 * cache.tem_raw0
    tem1 = lam2 * cache.tem_raw1
    energy = cache.total(labels)
    trace = [energy]
    sweeps = 0
    by_eps = False
    for _ in range(cache.params.max_sweeps):
        flips = kernels.mrf_sweep(
            labels,
            cache.f,
            cache.indptr,
            cache.indices.astype(np.int64),
            cache.weights,
            tem0,
            tem1,
            cache.params.lambda1,
        )
        sweeps += 1
        new_energy = cache.total(labels) if flips else energy
        trace.append(new_energy)
        if abs(new_energy - energy) / (abs(new_energy) + 1e-12) < cache.params.epsilon:
            energy = new_energy
            by_eps = True
            break
        energy = new_energy
    return MinimizeResult(
        labeling=labels,
        sweeps=sweeps,
        trace=trace,
        breakdown=cache.breakdown(labels),
        terminated_by_epsilon=by_eps,
    )


def init_first_frame(
    graph: SuperpixelGraph,
    feats: FrameFeatures,
    pools: FeaturePools,
    seed_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Majority vote of a seed mask, or argmax of the data term."""
    if seed_mask is not None:
        return majority_labels(graph, seed_mask)
    f, _ = data_term_matrix(feats, pools)
    return (f[:, 1] >= f[:, 0]).astype(np.int8)


# ---------------------------------------------------------------------------
# Sequence driver
# ---------------------------------------------------------------------------


@dataclass
class FrameResult:
    index: int
    graph: SuperpixelGraph
    labeling: np.ndarray
    posterior: np.ndarray  # (K,) road posterior per superpixel
    trace: list[float]
    sweeps: int
    breakdown: EnergyBreakdown

    def mask(self) -> np.ndarray:
        return self.labeling[self.graph.label_map].astype(bool)

    def score_map(self) -> np.ndarray:
        return self.posterior[self.graph.label_map]


@dataclass(frozen=True)
class PipelineConfig:
    n_superpixels: int = 500
    compactness: float = 10.0
    block: int = DEFAULT_BLOCK
    flow_alpha: float = 15.0
    flow_iters: int = 100
    temporal: bool = True


def run_sequence(
    manifest: SequenceManifest,
    pools: FeaturePools,
    params: EnergyParams,
    config: PipelineConfig = PipelineConfig(),
    bank: GaborBank | None = None,
    seed_mask_first: np.ndarray | None = None,
    frame_indices=None,
) -> list[FrameResult]:
    """Detect road superpixels over a sequence (Algorithm-1 style loop).

    Frame 0 starts from the seed mask or the data-term argmax; later
    frames start from flow-propagated labels and add temporal smoothness,
    unless config.temporal is off (single-image mode per frame).
    """
    bank = bank or make_gabor_bank()
    indices = list(frame_indices) if frame_indices is not None else list(range(len(manifest)))
    results: list[FrameResult] = []
    prev_frame = None
    prev_ctx: TemporalContext | None = None
    for pos, t in enumerate(indices):
        frame = manifest.load_frame(t)
        graph = slic_segment(frame, config.n_superpixels, config.compactness)
        feats = compute_features(frame, graph, bank, config.block)
        if config.temporal and pos > 0:
            field_uv = flow_mod.dense_flow(
                prev_frame, frame, config.flow_alpha, config.flow_iters
            )
            graph.temporal_neighbors = flow_mod.match_superpixels(
                prev_ctx.graph, graph, field_uv
            )
            init = flow_mod.propagate_labels(prev_ctx.labeling, graph.temporal_neighbors)
            res = minimize_frame(graph, feats, init, prev_ctx, pools, params)
        else:
            init = init_first_frame(
                graph, feats, pools, seed_mask_first if pos == 0 else None
            )
            res = minimize_frame(graph, feats, init, None, pools, params)
        f, _ = data_term_matrix(feats, pools)
        results.append(
            FrameResult(
                index=t,
                graph=graph,
                labeling=res.labeling,
                posterior=road_posterior(f),
                trace=res.trace,
                sweeps=res.sweeps,
                breakdown=res.breakdown,
            )
        )
        if config.temporal:
            prev_frame = frame
            prev_ctx = TemporalContext(
                graph=graph, labeling=res.labeling, color_lab=feats.color_lab
            )
    return results
