"""Haar multiresolution layers and intrinsic dimension as a function of scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import REGIONS, ImageGrid, ImagePair, PatchMatrix, Region, RegionMask, extract_patches, restrict_to_region
from .dimension import (
    DEFAULT_THRESHOLDS,
    GraphLengthParams,
    estimate_local_dimension,
    pca_dimension,
    pca_spectrum,
)
from .errors import DimensionMismatchError, SunpatchError


@dataclass(frozen=True)
class LayerStack:
    layers: list  # ImageGrid per layer; index 0 is the finest detail, last is the coarse remainder
    levels: int

    def total(self) -> np.ndarray:
        return np.sum([layer.values for layer in self.layers], axis=0)


def _block_mean(img: np.ndarray, block: int) -> np.ndarray:
    """Projection onto the Haar approximation space with ``block x block`` support."""
    r, c = img.shape
    means = img.reshape(r // block, block, c // block, block).mean(axis=(1, 3))
    return np.repeat(np.repeat(means, block, axis=0), block, axis=1)


def haar_layers(img: ImageGrid, levels: int = 2) -> LayerStack:
    """Split an image into full-resolution Haar layers that sum back to it.

    Layer ``j < levels`` is the reconstruction from the level ``j + 1`` detail
    subbands alone; the last layer is the reconstruction from the level
    ``levels`` approximation. With the orthonormal Haar basis the level-``j``
    approximation reconstruction is the ``2**j`` block mean, so each detail
    layer is a difference of successive block means.
    """
    if int(levels) != levels or levels < 1:
        raise SunpatchError(f"levels must be a positive integer, got {levels}")
    rows, cols = img.shape
    step = 2**levels
    if step > rows and step > cols:
        raise SunpatchError(f"2**{levels} exceeds both image dimensions {img.shape}")
    pad_r, pad_c = (-rows) % step, (-cols) % step
    x = np.pad(img.values, ((0, pad_r), (0, pad_c)), mode="symmetric") if pad_r or pad_c else img.values

    approx = [x]
    for j in range(1, levels + 1):
        approx.append(_block_mean(x, 2**j))
    layers = [approx[j] - approx[j + 1] for j in range(levels)] + [approx[levels]]
    layers = [ImageGrid(layer[:rows, :cols], img.modality) for layer in layers]
    return LayerStack(layers=layers, levels=int(levels))


@dataclass(frozen=True)
class ScaleTable:
    """Dimension estimates per layer and region.

    ``rows`` is the tidy long-format table. ``samples`` maps
    ``(layer, region)`` to the in-region per-pixel k-NN means, which are the
    groups an ordered-trend test consumes.
    """

    rows: list
    samples: dict
    levels: int

    def groups(self, region) -> list[np.ndarray]:
        """Per-layer samples for ``region`` (a :class:`Region`, its value or its lower-case name)."""
        name = region if isinstance(region, str) else Region(region).name.lower()
        return [self.samples[(j, name)] for j in range(self.levels + 1) if (j, name) in self.samples]


def _layer_pair(stack_c: LayerStack, stack_m: LayerStack, j: int) -> ImagePair:
    return ImagePair(stack_c.layers[j], stack_m.layers[j])


def _pool(matrices: list[PatchMatrix]) -> PatchMatrix:
    """Concatenate patch matrices side by side onto a stacked virtual grid."""
    rows = sum(m.grid_shape[0] for m in matrices)
    cols = max(m.grid_shape[1] for m in matrices)
    offset = 0
    values, index = [], []
    for m in matrices:
        values.append(m.values)
        index.append(m.pixel_index + np.array([offset, 0]))
        offset += m.grid_shape[0]
    first = matrices[0]
    return PatchMatrix(np.hstack(values), np.vstack(index), first.patch_side, first.kind, (rows, cols))


def dimension_by_scale(
    pairs: list[ImagePair],
    masks: list[RegionMask],
    levels: int = 2,
    params: GraphLengthParams = GraphLengthParams(),
    patch_side: int = 3,
    thresholds=DEFAULT_THRESHOLDS,
    regions=None,
    local_neighborhood: int = 100,
    smoothing_neighbors: int = 6,
    subsample_sizes=None,
    bootstraps_per_size: int = 5,
) -> ScaleTable:
    """Region dimension estimates at every Haar layer.

    Layers before the coarse remainder are estimated image by image and
    averaged; the coarse remainder pools the patches of all images before
    estimating, since it holds too few independent samples per image.
    """
    if len(pairs) != len(masks) or not pairs:
        raise SunpatchError("need one mask per image pair")
    for pair, mask in zip(pairs, masks):
        if pair.shape != mask.shape:
            raise DimensionMismatchError(f"mask {mask.shape} does not match image {pair.shape}")
    if regions is None:
        present = set()
        for mask in masks:
            present.update(mask.present())
        regions = [r for r in REGIONS if r in present]
    regions = [Region(r) for r in regions]

    stacks = [(haar_layers(p.cont, levels), haar_layers(p.mag, levels)) for p in pairs]
    local = dict(
        local_neighborhood=local_neighborhood,
        smoothing_neighbors=smoothing_neighbors,
        subsample_sizes=subsample_sizes,
        bootstraps_per_size=bootstraps_per_size,
    )
    rows, samples = [], {}
    for j in range(levels + 1):
        layer_pairs = [_layer_pair(sc, sm, j) for sc, sm in stacks]
        patch_sets = [extract_patches(lp, patch_side, "mirror", standardize=True) for lp in layer_pairs]
        if j == levels and len(pairs) > 1:
            pooled = _pool(patch_sets)
            pooled_mask = RegionMask(np.vstack([np.pad(m.labels, ((0, 0), (0, pooled.grid_shape[1] - m.shape[1]))) for m in masks]))
            units = [(pooled, pooled_mask)]
        else:
            units = list(zip(patch_sets, masks))
        maps = [estimate_local_dimension(ps, params, **local) for ps, _ in units]
        for region in regions:
            name = region.name.lower()
            knn_vals, pca_vals = [], {t: [] for t in thresholds}
            for (ps, mask), dmap in zip(units, maps):
                sub = restrict_to_region(ps, mask, region)
                knn_vals.append(dmap.mean_dim[sub.pixel_index[:, 0], sub.pixel_index[:, 1]])
                spec = pca_spectrum(sub)
                for t in thresholds:
                    pca_vals[t].append(pca_dimension(spec, t))
            per_image = [v.mean() for v in knn_vals]
            pixels = np.concatenate(knn_vals)
            samples[(j, name)] = pixels
            rows.append(
                {
                    "scale": j,
                    "region": name,
                    "method": "knn",
                    "threshold": None,
                    "estimate": float(np.mean(per_image)),
                    "spread": float(pixels.std()),
                }
            )
            for t in thresholds:
                vals = pca_vals[t]
                rows.append(
                    {
                        "scale": j,
                        "region": name,
                        "method": "pca",
                        "threshold": float(t),
                        "estimate": float(np.mean(vals)),
                        "spread": float(np.std(vals)),
                    }
                )
    return ScaleTable(rows=rows, samples=samples, levels=int(levels))
