"""Canonical correlation between continuum and magnetogram patch blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ImagePair,
    PatchMatrix,
    Region,
    RegionMask,
    extract_patches,
    restrict_to_region,
)
from .errors import SingularCovarianceError, SmallRegionError, SunpatchError


@dataclass(frozen=True)
class CcaResult:
    correlations: np.ndarray
    a_vectors: np.ndarray  # (dx, r), column i is a_i
    b_vectors: np.ndarray  # (dy, r)
    u: np.ndarray  # (n, r) canonical variates of the x block
    v: np.ndarray  # (n, r)
    u_image: np.ma.MaskedArray | None = None  # first variate painted on the grid, masked off-region
    v_image: np.ma.MaskedArray | None = None


def _block(block):
    if isinstance(block, PatchMatrix):
        return block.points, block
    arr = np.asarray(block, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr, None


def _inv_sqrt(cov: np.ndarray, name: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] <= np.finfo(np.float64).eps * max(vals[-1], 1e-300) * cov.shape[0]:
        raise SingularCovarianceError(f"{name} covariance is singular; use a positive ridge")
    return (vecs / np.sqrt(vals)) @ vecs.T


def default_ridge(cov: np.ndarray) -> float:
    return 1e-8 * np.trace(cov) / cov.shape[0]


def cca(x_block, y_block, ridge: float | None = None) -> CcaResult:
    """Canonical correlation analysis of paired samples.

    ``x_block`` and ``y_block`` are single-modality :class:`PatchMatrix`
    objects with matching pixel indices, or ``(n, d)`` arrays with paired rows.
    The directions are eigenvectors of ``Sxx^-1 Sxy Syy^-1 Syx`` where each
    auto-covariance carries ``ridge * I``; ``ridge=None`` uses
    ``1e-8 * trace / dim`` per block. Canonical variates are computed from
    mean-centered data and have unit variance when the ridge is zero.
    """
    X, xpm = _block(x_block)
    Y, ypm = _block(y_block)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise SunpatchError(f"blocks have different counts ({n} vs {Y.shape[0]})")
    if xpm is not None and ypm is not None and not np.array_equal(xpm.pixel_index, ypm.pixel_index):
        raise SunpatchError("blocks are not paired by pixel")
    dx, dy = X.shape[1], Y.shape[1]
    if n <= max(dx, dy):
        raise SmallRegionError(f"{n} samples are too few for blocks of dimension {dx} and {dy}")
    if ridge is not None and ridge < 0:
        raise SunpatchError("ridge must be nonnegative")

    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    sxx = Xc.T @ Xc / (n - 1)
    syy = Yc.T @ Yc / (n - 1)
    sxy = Xc.T @ Yc / (n - 1)
    rx = default_ridge(sxx) if ridge is None else ridge
    ry = default_ridge(syy) if ridge is None else ridge
    wx = _inv_sqrt(sxx + rx * np.eye(dx), "x")
    wy = _inv_sqrt(syy + ry * np.eye(dy), "y")

    # SVD of the whitened cross-covariance solves the eigenproblem for both sides
    U, s, Vt = np.linalg.svd(wx @ sxy @ wy)
    r = min(dx, dy)
    a = wx @ U[:, :r]
    b = wy @ Vt[:r].T
    rho = np.clip(s[:r], 0.0, 1.0)

    # sign: largest-magnitude entry of a_i positive; b_i follows so corr(u_i, v_i) >= 0
    lead = a[np.argmax(np.abs(a), axis=0), np.arange(r)]
    flip = np.where(lead < 0, -1.0, 1.0)
    a *= flip
    b *= flip
    u = Xc @ a
    v = Yc @ b
    neg = np.sum(u * v, axis=0) < 0
    b[:, neg] *= -1
    v[:, neg] *= -1

    u_img = v_img = None
    if xpm is not None:
        u_img = np.ma.masked_invalid(xpm.paint(u[:, 0]))
        v_img = np.ma.masked_invalid(xpm.paint(v[:, 0]))
    return CcaResult(rho, a, b, u, v, u_img, v_img)


@dataclass(frozen=True)
class RegionCca:
    region: str
    patch_side: int
    result: CcaResult

    @property
    def rho1(self) -> float:
        return float(self.result.correlations[0])


def region_cca(pair: ImagePair, mask: RegionMask, region, patch_side: int = 3, ridge=None) -> RegionCca:
    patches = extract_patches(pair, patch_side, "mirror", standardize=False)
    region = Region(region)
    sub = restrict_to_region(patches, mask, region)
    if sub.count <= patch_side * patch_side:
        raise SmallRegionError(
            f"{region.name.lower()} has {sub.count} pixels, too few for {patch_side}x{patch_side} patches"
        )
    x, y = sub.blocks()
    return RegionCca(region.name.lower(), patch_side, cca(x, y, ridge))


def region_cca_report(pair: ImagePair, mask: RegionMask, patch_sides=(1, 3, 5), ridge=None, regions=None):
    """CCA per region and patch side.

    Returns ``(entries, images)``: ``entries`` is a list of :class:`RegionCca`;
    ``images`` maps each patch side to a ``(u_image, v_image)`` pair of masked
    arrays composed from the per-region first canonical variates.
    """
    regions = mask.present() if regions is None else [Region(r) for r in regions]
    entries, images = [], {}
    for side in patch_sides:
        u_full = np.full(pair.shape, np.nan)
        v_full = np.full(pair.shape, np.nan)
        for region in regions:
            entry = region_cca(pair, mask, region, side, ridge)
            entries.append(entry)
            sel = ~np.ma.getmaskarray(entry.result.u_image)
            u_full[sel] = entry.result.u_image.data[sel]
            v_full[sel] = entry.result.v_image.data[sel]
        images[side] = (np.ma.masked_invalid(u_full), np.ma.masked_invalid(v_full))
    return entries, images

