"""Per-image linear dictionaries (principal-component atoms) for image clustering."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cca import region_cca
from .core import ImagePair, PatchMatrix, RegionMask, extract_patches
from .dimension import pca_spectrum
from .errors import RankDeficientError, SunpatchError

MAX_ATOMS = 7


@dataclass(frozen=True)
class ImageDictionary:
    atoms: np.ndarray  # (D, atom_count), orthonormal columns
    source_id: str = ""

    @property
    def atom_count(self) -> int:
        return self.atoms.shape[1]

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def flattened(self) -> np.ndarray:
        return self.atoms.T.reshape(-1)

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "atom_count": self.atom_count,
            "dim": self.dim,
            "flattened": [float(v) for v in self.flattened],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ImageDictionary":
        flat = np.asarray(obj["flattened"], dtype=np.float64)
        count, dim = int(obj["atom_count"]), int(obj["dim"])
        if flat.size != count * dim:
            raise SunpatchError(f"dictionary {obj.get('source_id')!r}: flattened length {flat.size} != {count}*{dim}")
        return cls(flat.reshape(count, dim).T.copy(), str(obj["source_id"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ImageDictionary":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def sign_normalize(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    cols = np.arange(vectors.shape[1])
    lead = vectors[np.argmax(np.abs(vectors), axis=0), cols]
    return vectors * np.where(lead < 0, -1.0, 1.0)


def learn_dictionary(patches, atom_count: int = MAX_ATOMS, source_id: str = "") -> ImageDictionary:
    """Top ``atom_count`` principal directions of the centered patches."""
    if int(atom_count) != atom_count or not 1 <= atom_count <= MAX_ATOMS:
        raise SunpatchError(f"atom_count must be in 1..{MAX_ATOMS}, got {atom_count}")
    X = patches.points if isinstance(patches, PatchMatrix) else np.asarray(patches, dtype=np.float64)
    if X.shape[0] <= atom_count:
        raise SunpatchError(f"need more than {atom_count} patches, got {X.shape[0]}")
    spectrum = pca_spectrum(X)
    rank = int(np.count_nonzero(spectrum.eigenvalues))
    if rank < atom_count:
        raise RankDeficientError(f"patch rank {rank} is below atom_count {atom_count}; lower atom_count")
    atoms = sign_normalize(spectrum.components[:, :atom_count])
    return ImageDictionary(np.ascontiguousarray(atoms), source_id)


def canonical_variates(pair: ImagePair, mask: RegionMask | None = None, patch_side: int = 3, ridge=None) -> PatchMatrix:
    """Per-pixel vectors ``(u_1..u_r, v_1..v_r)`` from region-wise CCA.

    Each pixel takes the variates of the CCA fitted on its own region; with no
    mask the whole image is one region.
    """
    if mask is None:
        mask = RegionMask.background(pair.shape)
    r = patch_side * patch_side
    out = np.empty((2 * r, pair.shape[0] * pair.shape[1]))
    for region in mask.present():
        res = region_cca(pair, mask, region, patch_side, ridge).result
        sel = np.flatnonzero(mask.labels.reshape(-1) == region)
        out[:r, sel] = res.u.T
        out[r:, sel] = res.v.T
    centers = np.indices(pair.shape).reshape(2, -1).T
    # reuses the joint layout: u block first, v block second
    return PatchMatrix(out, centers, patch_side, "joint", pair.shape)


def learn_dictionary_cca(
    pair: ImagePair,
    mask: RegionMask | None = None,
    atom_count: int = MAX_ATOMS,
    patch_side: int = 3,
    ridge=None,
    source_id: str = "",
) -> ImageDictionary:
    return learn_dictionary(canonical_variates(pair, mask, patch_side, ridge), atom_count, source_id)


def learn_image_dictionary(
    pair: ImagePair, atom_count: int = MAX_ATOMS, patch_side: int = 3, standardize: bool = True, source_id: str = ""
) -> ImageDictionary:
    """Dictionary of the joint patches over the whole image."""
    return learn_dictionary(extract_patches(pair, patch_side, "mirror", standardize), atom_count, source_id)
