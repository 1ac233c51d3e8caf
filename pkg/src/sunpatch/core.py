"""Images, region masks and joint patch matrices.

Every analysis in the package works on a :class:`PatchMatrix`: the columns are
vectorized square patches, one per center pixel. For a co-registered
continuum/magnetogram pair the continuum block is stacked on top of the
magnetogram block, so a 3x3 joint patch lives in 18 dimensions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import gridio
from .errors import (
    DegenerateError,
    DimensionMismatchError,
    EmptyRegionError,
    PatchSizeError,
    SunpatchError,
)


class Modality(str, enum.Enum):
    CONTINUUM = "continuum"
    MAGNETOGRAM = "magnetogram"


class Region(enum.IntEnum):
    BACKGROUND = 0
    PENUMBRA = 1
    UMBRA = 2


REGIONS = (Region.BACKGROUND, Region.PENUMBRA, Region.UMBRA)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageGrid:
    values: np.ndarray
    modality: Modality = Modality.CONTINUUM

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise SunpatchError(f"image must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise SunpatchError("image contains NaN or Inf")
        object.__setattr__(self, "values", _frozen(arr))
        object.__setattr__(self, "modality", Modality(self.modality))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def load(cls, path, modality=Modality.CONTINUUM) -> "ImageGrid":
        values, _ = gridio.read_grid(path)
        return cls(values, modality)

    def save(self, path) -> None:
        gridio.write_grid(path, self.values, "f64")


@dataclass(frozen=True)
class ImagePair:
    cont: ImageGrid
    mag: ImageGrid

    def __post_init__(self):
        if self.cont.shape != self.mag.shape:
            raise DimensionMismatchError(
                f"continuum {self.cont.shape} and magnetogram {self.mag.shape} are not co-registered"
            )

    @classmethod
    def from_arrays(cls, cont, mag) -> "ImagePair":
        return cls(ImageGrid(cont, Modality.CONTINUUM), ImageGrid(mag, Modality.MAGNETOGRAM))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cont.shape


@dataclass(frozen=True)
class RegionMask:
    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.size == 0:
            raise SunpatchError(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.all(np.isin(arr, [r.value for r in REGIONS])):
            raise SunpatchError("mask labels must be 0 (background), 1 (penumbra) or 2 (umbra)")
        object.__setattr__(self, "labels", _frozen(arr.astype(np.uint8)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @classmethod
    def background(cls, shape) -> "RegionMask":
        return cls(np.zeros(shape, dtype=np.uint8))

    @classmethod
    def load(cls, path) -> "RegionMask":
        values, _ = gridio.read_grid(path)
        return cls(np.rint(values).astype(np.uint8))

    def save(self, path) -> None:
        gridio.write_grid(path, self.labels, "u8")

    def present(self) -> list[Region]:
        """Regions that label at least one pixel, in label order."""
        return [r for r in REGIONS if np.any(self.labels == r)]


@dataclass(frozen=True)
class PatchMatrix:
    """Vectorized patches, stored one patch per column (``values`` is D x n).

    ``grid_shape`` is the shape of the image the patches came from and is used
    to check masks and to paint per-pixel results back onto the grid.
    """

    values: np.ndarray
    pixel_index: np.ndarray
    patch_side: int
    kind: str
    grid_shape: tuple[int, int]
    _points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        idx = np.asarray(self.pixel_index, dtype=np.int64).reshape(-1, 2)
        if vals.ndim != 2:
            raise SunpatchError("patch values must be a D x n matrix")
        if idx.shape[0] != vals.shape[1]:
            raise SunpatchError("pixel_index length differs from the number of columns")
        if self.kind not in ("single_modality", "joint"):
            raise SunpatchError(f"unknown patch kind {self.kind!r}")
        per_block = self.patch_side * self.patch_side
        expected = per_block if self.kind == "single_modality" else 2 * per_block
        if vals.shape[0] != expected:
            raise SunpatchError(f"{self.kind} patches of side {self.patch_side} need dim {expected}")
        rows, cols = self.grid_shape
        if idx.size and (idx.min() < 0 or np.any(idx[:, 0] >= rows) or np.any(idx[:, 1] >= cols)):
            raise SunpatchError("pixel_index out of grid bounds")
        flat = idx[:, 0] * cols + idx[:, 1]
        if np.unique(flat).size != flat.size:
            raise SunpatchError("pixel_index entries must be unique")
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "pixel_index", _frozen(idx))
        object.__setattr__(self, "grid_shape", (int(rows), int(cols)))
        object.__setattr__(self, "_points", _frozen(vals.T))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def count(self) -> int:
        return self.values.shape[1]

    @property
    def points(self) -> np.ndarray:
        """The patches as an ``(n, D)`` array, one row per patch."""
        return self._points

    @property
    def flat_index(self) -> np.ndarray:
        return self.pixel_index[:, 0] * self.grid_shape[1] + self.pixel_index[:, 1]

    def subset(self, keep: np.ndarray) -> "PatchMatrix":
        return PatchMatrix(
            self.values[:, keep], self.pixel_index[keep], self.patch_side, self.kind, self.grid_shape
        )

    def blocks(self) -> tuple["PatchMatrix", "PatchMatrix"]:
        """Split a joint matrix into its continuum and magnetogram blocks."""
        if self.kind != "joint":
            raise SunpatchError("only joint patch matrices have two blocks")
        half = self.dim // 2
        make = lambda v: PatchMatrix(v, self.pixel_index, self.patch_side, "single_modality", self.grid_shape)  # noqa: E731
        return make(self.values[:half]), make(self.values[half:])

    def paint(self, per_column: np.ndarray, fill: float = np.nan) -> np.ndarray:
        """Scatter one value per column back onto the source grid."""
        out = np.full(self.grid_shape, fill, dtype=np.float64)
        out[self.pixel_index[:, 0], self.pixel_index[:, 1]] = per_column
        return out


def _check_side(patch_side: int, shape: tuple[int, int]) -> int:
    if int(patch_side) != patch_side or patch_side < 1 or patch_side % 2 == 0:
        raise PatchSizeError(f"patch_side must be an odd positive integer, got {patch_side}")
    if patch_side > min(shape):
        raise PatchSizeError(f"patch_side {patch_side} exceeds image shape {shape}")
    return int(patch_side)


def _standardized(img: np.ndarray, name: str) -> np.ndarray:
    sd = img.std()
    if not sd > 0:
        raise DegenerateError(f"{name} image has zero variance; cannot standardize")
    return (img - img.mean()) / sd


def _patch_block(img: np.ndarray, patch_side: int, padding: str) -> tuple[np.ndarray, np.ndarray]:
    half = patch_side // 2
    rows, cols = img.shape
    if padding == "mirror":
        src = np.pad(img, half, mode="reflect") if half else img
        out_r, out_c = rows, cols
        centers = np.indices((rows, cols)).reshape(2, -1).T
    elif padding == "valid":
        src = img
        out_r, out_c = rows - patch_side + 1, cols - patch_side + 1
        centers = (np.indices((out_r, out_c)) + half).reshape(2, -1).T
    else:
        raise SunpatchError(f"unknown padding {padding!r}")
    # row-major order within the patch: offset (di, dj) -> row di * p + dj
    stack = [
        src[di : di + out_r, dj : dj + out_c].reshape(-1)
        for di in range(patch_side)
        for dj in range(patch_side)
    ]
    return np.vstack(stack), centers


def extract_single(img: ImageGrid, patch_side: int, padding: str = "mirror", standardize: bool = False) -> PatchMatrix:
    """Patches of one modality (``dim = patch_side**2``)."""
    side = _check_side(patch_side, img.shape)
    values = _standardized(img.values, img.modality.value) if standardize else img.values
    block, centers = _patch_block(values, side, padding)
    return PatchMatrix(block, centers, side, "single_modality", img.shape)


def extract_patches(
    pair: ImagePair, patch_side: int = 3, padding: str = "mirror", standardize: bool = True
) -> PatchMatrix:
    """Joint continuum/magnetogram patches centered on every pixel.

    Parameters
    ----------
    pair : ImagePair
        Co-registered images.
    patch_side : int
        Odd patch side ``p``; the result has ``2 * p**2`` rows.
    padding : {"mirror", "valid"}
        ``"mirror"`` reflects the image at its borders so every pixel gets a
        patch; ``"valid"`` keeps only patches that fit inside the image.
    standardize : bool
        Z-score each modality with its own global mean and standard deviation
        before stacking.
    """
    side = _check_side(patch_side, pair.shape)
    cont, mag = pair.cont.values, pair.mag.values
    if standardize:
        cont = _standardized(cont, "continuum")
        mag = _standardized(mag, "magnetogram")
    xb, centers = _patch_block(cont, side, padding)
    yb, _ = _patch_block(mag, side, padding)
    return PatchMatrix(np.vstack([xb, yb]), centers, side, "joint", pair.shape)


def restrict_to_region(patches: PatchMatrix, mask: RegionMask, region) -> PatchMatrix:
    """Keep the columns whose center pixel carries ``region``."""
    if mask.shape != patches.grid_shape:
        raise DimensionMismatchError(f"mask {mask.shape} does not match patch grid {patches.grid_shape}")
    region = Region(region)
    centers = mask.labels[patches.pixel_index[:, 0], patches.pixel_index[:, 1]]
    keep = np.flatnonzero(centers == region)
    if keep.size == 0:
        raise EmptyRegionError(f"no {region.name.lower()} pixels in mask")
    return patches.subset(keep)


def crop_centered(pair: ImagePair, mask: RegionMask | None, size: int) -> tuple[ImagePair, RegionMask | None]:
    """Square crop of side ``size`` around the spot centroid (or the image center).

    When the image is smaller than ``size`` along an axis the full extent of
    that axis is kept.
    """
    rows, cols = pair.shape
    if mask is not None and np.any(mask.labels > 0):
        cy, cx = np.argwhere(mask.labels > 0).mean(axis=0)
    else:
        cy, cx = (rows - 1) / 2, (cols - 1) / 2

    def window(center, extent):
        if size >= extent:
            return 0, extent
        start = int(round(center - size / 2))
        start = min(max(start, 0), extent - size)
        return start, start + size

    r0, r1 = window(cy, rows)
    c0, c1 = window(cx, cols)
    cropped = ImagePair.from_arrays(pair.cont.values[r0:r1, c0:c1], pair.mag.values[r0:r1, c0:c1])
    cmask = RegionMask(mask.labels[r0:r1, c0:c1]) if mask is not None else None
    return cropped, cmask
