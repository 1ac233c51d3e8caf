"""Joint-patch analysis of continuum/magnetogram image pairs."""

from .core import ImageGrid, ImagePair, Modality, PatchMatrix, Region, RegionMask, extract_patches, restrict_to_region
from .errors import SunpatchError

__version__ = "0.1.0"

__all__ = [
    "ImageGrid",
    "ImagePair",
    "Modality",
    "PatchMatrix",
    "Region",
    "RegionMask",
    "SunpatchError",
    "extract_patches",
    "restrict_to_region",
]
