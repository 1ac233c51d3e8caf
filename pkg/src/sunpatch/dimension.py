"""Intrinsic dimension of patch sets.

Two estimators are provided. The linear one counts the principal components
needed to reach a fraction of the total variance. The nonlinear one uses the
growth of the total edge length of a k-nearest-neighbor graph: for points on an
``m``-dimensional manifold, ``L(n) ~ c * n**((m - gamma) / m)``, so fitting that
law over several subsample sizes gives ``m``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ._kernels import local_mean_lengths
from .core import REGIONS, ImagePair, PatchMatrix, Region, RegionMask, extract_patches, restrict_to_region
from .errors import DegenerateError, SunpatchError

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.95, 0.97, 0.99)


@dataclass(frozen=True)
class GraphLengthParams:
    k: int = 5
    gamma: float = 1.0
    num_runs: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise SunpatchError(f"k must be a positive integer, got {self.k}")
        if not self.gamma >= 1:
            raise SunpatchError(f"gamma must be >= 1, got {self.gamma}")
        if int(self.num_runs) != self.num_runs or self.num_runs < 1:
            raise SunpatchError(f"num_runs must be a positive integer, got {self.num_runs}")


@dataclass(frozen=True)
class DimensionFit:
    m_hat: int
    alpha_hat: float
    c_hat: float
    residual: float
    sizes: tuple[int, ...] = ()
    mean_lengths: tuple[float, ...] = ()
    # set when m_hat falls outside the convergence regime m >= 2, gamma < m
    low_dimension_warning: bool = False


@dataclass(frozen=True)
class DimensionMap:
    """Per-pixel local dimension; pixels without a patch hold NaN."""

    rows: int
    cols: int
    mean_dim: np.ndarray
    std_dim: np.ndarray
    estimates: np.ndarray = field(repr=False, default=None)  # (num_runs, n) smoothed, per column


@dataclass(frozen=True)
class PcaSpectrum:
    eigenvalues: np.ndarray
    components: np.ndarray  # columns are the principal directions


def _as_points(points) -> np.ndarray:
    if isinstance(points, PatchMatrix):
        return points.points
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2:
        raise SunpatchError("points must be a PatchMatrix or an (n, D) array")
    return arr


def knn_total_edge_length(points, k: int = 5, gamma: float = 1.0) -> float:
    """Sum over points of the ``gamma``-powered distances to their ``k`` nearest neighbors.

    ``points`` is a :class:`PatchMatrix` or an ``(n, D)`` array of row vectors.
    """
    X = _as_points(points)
    if X.shape[0] <= k:
        raise SunpatchError(f"need more than k={k} points, got {X.shape[0]}")
    # the k+1 nearest include the point itself at distance 0, so summing all
    # of them is exact even when duplicates make the self-match ambiguous
    dist, _ = cKDTree(X).query(X, k + 1)
    return float(np.sum(dist**gamma))


def default_subsample_sizes(n: int) -> list[int]:
    return [n // 2, 5 * n // 8, 6 * n // 8, 7 * n // 8, n]


def _candidate_dims(gamma: float, max_dim: int) -> np.ndarray:
    lo = max(1, int(np.ceil(gamma)))
    if lo > max_dim:
        raise SunpatchError(f"no admissible dimension for gamma={gamma} in ambient dimension {max_dim}")
    return np.arange(lo, max_dim + 1)


def fit_growth(sizes, mean_lengths, gamma: float, max_dim: int):
    """Least-squares fit of ``L(n) = c * n**alpha(m)`` over integer ``m``.

    ``mean_lengths`` may carry leading batch axes; the last axis runs over
    ``sizes``. Returns ``(m_hat, alpha, c, residual_norm)`` arrays with the batch
    shape. For each candidate ``m`` the optimal ``c`` is closed form; ties in
    the residual go to the smaller ``m``.
    """
    Lbar = np.asarray(mean_lengths, dtype=np.float64)
    if np.any(np.ptp(Lbar, axis=-1) <= 0):
        raise DegenerateError("k-NN graph lengths do not vary with n (duplicated points?)")
    dims = _candidate_dims(gamma, max_dim)
    alphas = (dims - gamma) / dims
    x = np.asarray(sizes, dtype=np.float64)[None, :] ** alphas[:, None]  # (M, S)
    xx = np.sum(x * x, axis=1)
    c = np.einsum("...s,ms->...m", Lbar, x) / xx
    resid = np.sum((Lbar[..., None, :] - c[..., :, None] * x) ** 2, axis=-1)
    best = np.argmin(resid, axis=-1)
    take = lambda a: np.take_along_axis(a, best[..., None], axis=-1)[..., 0]  # noqa: E731
    return dims[best], alphas[best], take(c), np.sqrt(take(resid))


def _check_sizes(sizes, count: int, k: int) -> list[int]:
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise SunpatchError("need at least three subsample sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise SunpatchError(f"subsample sizes must be strictly increasing: {sizes}")
    if sizes[0] <= k:
        raise SunpatchError(f"smallest subsample {sizes[0]} must exceed k={k}")
    if sizes[-1] > count:
        raise SunpatchError(f"largest subsample {sizes[-1]} exceeds the {count} available points")
    return sizes


def _low_dim(m: int, gamma: float) -> bool:
    return m < 2 or m <= gamma


def estimate_global_dimension(
    points,
    params: GraphLengthParams = GraphLengthParams(),
    subsample_sizes=None,
    bootstraps_per_size: int = 5,
) -> DimensionFit:
    """Fit the k-NN graph length growth law over random subsamples of ``points``."""
    X = _as_points(points)
    n, D = X.shape
    sizes = _check_sizes(subsample_sizes or default_subsample_sizes(n), n, params.k)
    if bootstraps_per_size < 1:
        raise SunpatchError("bootstraps_per_size must be positive")
    rng = np.random.default_rng(params.rng_seed)
    means = []
    for s in sizes:
        total = 0.0
        for _ in range(bootstraps_per_size):
            pick = rng.choice(n, size=s, replace=False)
            total += knn_total_edge_length(X[pick], params.k, params.gamma)
        means.append(total / bootstraps_per_size)
    m, alpha, c, res = fit_growth(sizes, means, params.gamma, D)
    m = int(m)
    if _low_dim(m, params.gamma):
        log.warning("estimated dimension %d is outside the regime m >= 2, gamma < m", m)
    return DimensionFit(
        m_hat=m,
        alpha_hat=float(alpha),
        c_hat=float(c),
        residual=float(res),
        sizes=tuple(sizes),
        mean_lengths=tuple(float(v) for v in means),
        low_dimension_warning=_low_dim(m, params.gamma),
    )


def nearest_neighbors(X: np.ndarray, m: int, chunk: int = 512) -> np.ndarray:
    """Indices of the ``m`` nearest rows of ``X`` to each row (itself included).

    Equal distances are ordered by row index.
    """
    n = X.shape[0]
    out = np.empty((n, m), dtype=np.int64)
    cols = np.arange(n)
    for start in range(0, n, chunk):
        d = cdist(X[start : start + chunk], X, "sqeuclidean")
        if m < n:
            part = np.argpartition(d, m - 1, axis=1)[:, :m]
            kth = np.take_along_axis(d, part, axis=1).max(axis=1)
        for r in range(d.shape[0]):
            row = d[r]
            cand = cols if m >= n else np.flatnonzero(row <= kth[r])
            order = np.lexsort((cand, row[cand]))
            out[start + r] = cand[order[:m]]
    return out


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def pixel_seeds(rng_seed: int, flat_index: np.ndarray, num_runs: int) -> np.ndarray:
    """Per-(pixel, run) 32-bit seeds that depend only on the seed, pixel and run."""
    base = _splitmix64(np.array([rng_seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    pix = np.asarray(flat_index, dtype=np.uint64)[:, None]
    run = np.arange(num_runs, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        h = _splitmix64(_splitmix64(base ^ pix) ^ (run * np.uint64(0xD1B54A32D192ED03)))
    return (h >> np.uint64(33)).astype(np.int64)


def majority_vote(estimates: np.ndarray, neighbors: np.ndarray) -> np.ndarray:
    """Replace each estimate by the most common value among its neighbors.

    ``estimates`` has shape ``(n,)`` or ``(n, runs)``; ``neighbors`` is
    ``(n, s)``. Ties go to the smaller value.
    """
    est = np.asarray(estimates)
    squeeze = est.ndim == 1
    if squeeze:
        est = est[:, None]
    votes = est[neighbors]  # (n, s, runs)
    values = np.unique(votes)
    counts = (votes[..., None] == values).sum(axis=1)  # (n, runs, V)
    out = values[np.argmax(counts, axis=-1)]
    return out[:, 0] if squeeze else out


def estimate_local_dimension(
    points: PatchMatrix,
    params: GraphLengthParams = GraphLengthParams(),
    local_neighborhood: int = 100,
    smoothing_neighbors: int = 6,
    subsample_sizes=None,
    bootstraps_per_size: int = 5,
    chunk: int = 256,
) -> DimensionMap:
    """Per-pixel dimension from the ``local_neighborhood`` nearest patches of each patch.

    Each run draws fresh subsamples, fits the growth law per pixel and smooths
    the resulting integer map by majority vote over the ``smoothing_neighbors``
    nearest patches (the patch itself included). The map reports the mean and
    standard deviation over ``params.num_runs`` runs.
    """
    X = points.points
    n, D = X.shape
    if local_neighborhood > n:
        raise SunpatchError(f"local_neighborhood {local_neighborhood} exceeds {n} patches")
    if smoothing_neighbors < 1 or smoothing_neighbors > n:
        raise SunpatchError(f"smoothing_neighbors must be in 1..{n}")
    sizes = subsample_sizes or default_subsample_sizes(local_neighborhood)
    if max(sizes) > local_neighborhood:
        raise SunpatchError(
            f"local_neighborhood {local_neighborhood} is smaller than the largest subsample {max(sizes)}"
        )
    sizes = _check_sizes(sizes, local_neighborhood, params.k)
    if bootstraps_per_size < 1:
        raise SunpatchError("bootstraps_per_size must be positive")

    nbrs = nearest_neighbors(X, max(local_neighborhood, smoothing_neighbors))
    seeds = pixel_seeds(params.rng_seed, points.flat_index, params.num_runs)
    size_arr = np.asarray(sizes, dtype=np.int64)
    raw = np.empty((n, params.num_runs), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        Z = np.ascontiguousarray(X[nbrs[start:stop, :local_neighborhood]])
        Lbar = local_mean_lengths(Z, seeds[start:stop], size_arr, bootstraps_per_size, params.k, params.gamma)
        raw[start:stop] = fit_growth(size_arr, Lbar, params.gamma, D)[0]

    smoothed = majority_vote(raw, nbrs[:, :smoothing_neighbors])
    mean = smoothed.mean(axis=1)
    std = smoothed.std(axis=1)
    return DimensionMap(
        rows=points.grid_shape[0],
        cols=points.grid_shape[1],
        mean_dim=points.paint(mean),
        std_dim=points.paint(std),
        estimates=smoothed.T.astype(np.float64),
    )


def pca_spectrum(points) -> PcaSpectrum:
    """Eigendecomposition of the sample covariance (``n - 1`` denominator)."""
    X = _as_points(points)
    n, D = X.shape
    if n < 2:
        raise SunpatchError("need at least two patches for a covariance")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    eps = np.finfo(np.float64).eps
    scale = float(np.max(np.abs(X))) ** 2
    # numerical rank cut, also zeroing round-off left by centering constant data
    tol = max(n, D) * eps * max(vals[0], eps * scale)
    vals = np.where(vals > tol, vals, 0.0)
    return PcaSpectrum(eigenvalues=vals, components=vecs)


def pca_dimension(spectrum: PcaSpectrum, variance_threshold: float = 0.97) -> int:
    """Smallest number of components whose share of the variance reaches the threshold."""
    if not 0 < variance_threshold <= 1:
        raise SunpatchError(f"variance_threshold must lie in (0, 1], got {variance_threshold}")
    vals = np.asarray(spectrum.eigenvalues, dtype=np.float64)
    total = vals.sum()
    if vals.size == 0 or not total > 0:
        raise DegenerateError("spectrum has no variance")
    share = np.cumsum(vals) / total
    return int(np.argmax(share >= variance_threshold) + 1)


def region_dimension_report(
    pair: ImagePair,
    mask: RegionMask,
    params: GraphLengthParams = GraphLengthParams(),
    thresholds=DEFAULT_THRESHOLDS,
    patch_side: int = 3,
    regions=REGIONS,
    local_neighborhood: int = 100,
    smoothing_neighbors: int = 6,
    subsample_sizes=None,
    bootstraps_per_size: int = 5,
    dimension_map: DimensionMap | None = None,
) -> list[dict]:
    """Both estimators per region.

    The k-NN entry is the mean of the local map over the region's pixels
    (local estimates are computed on the whole image and averaged per region);
    the PCA entries use the region's own patches.
    """
    patches = extract_patches(pair, patch_side, "mirror", standardize=True)
    per_region = [(Region(r), restrict_to_region(patches, mask, r)) for r in regions]
    spectra = [(r, pca_spectrum(sub)) for r, sub in per_region]
    dims = [(r, [pca_dimension(spec, t) for t in thresholds]) for r, spec in spectra]
    if dimension_map is None:
        dimension_map = estimate_local_dimension(
            patches, params, local_neighborhood, smoothing_neighbors, subsample_sizes, bootstraps_per_size
        )
    rows = []
    for (region, sub), (_, pca_dims) in zip(per_region, dims):
        name = region.name.lower()
        vals = dimension_map.mean_dim[sub.pixel_index[:, 0], sub.pixel_index[:, 1]]
        spread = dimension_map.std_dim[sub.pixel_index[:, 0], sub.pixel_index[:, 1]]
        rows.append(
            {"region": name, "method": "knn", "estimate": float(vals.mean()), "spread": float(spread.mean())}
        )
        for t, d in zip(thresholds, pca_dims):
            rows.append({"region": name, "method": "pca", "threshold": float(t), "estimate": d})
    return rows
