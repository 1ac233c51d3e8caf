"""Synthetic continuum/magnetogram phantoms with known region geometry.

Spots have a smooth radial umbra, a textured penumbra, and a magnetogram that
is an exact linear function of the continuum inside the spot. The background
is independent Gaussian noise in both modalities, with small magnetic
fragments and a diffuse opposite-polarity plage added to the magnetogram.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import ImagePair, RegionMask
from .errors import SunpatchError

KINDS = ("single_spot", "multi_spot", "noise")

QUIET_SUN = 1.0
CONT_NOISE = 0.03
MAG_NOISE = 20.0
# magnetogram inside a spot: polarity * COUPLING * (QUIET_SUN - cont)
COUPLING = 1500.0


def _paint_spot(cont, mag, labels, rng, center, umbra_r, penumbra_r, polarity):
    n_rows, n_cols = cont.shape
    yy, xx = np.mgrid[0:n_rows, 0:n_cols].astype(np.float64)
    r = np.hypot(yy - center[0], xx - center[1])
    umbra = r < umbra_r
    penumbra = (r >= umbra_r) & (r < penumbra_r)
    texture = gaussian_filter(rng.normal(size=cont.shape), 1.2)
    texture /= texture.std()
    cont[umbra] = 0.2 + 0.25 * (r[umbra] / umbra_r) ** 2
    cont[penumbra] = 0.75 + 0.05 * np.cos(r[penumbra] - umbra_r) + 0.06 * texture[penumbra]
    spot = umbra | penumbra
    mag[spot] = polarity * COUPLING * (QUIET_SUN - cont[spot])
    labels[penumbra] = 1
    labels[umbra] = 2


def _fragments(shape, rng, count):
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]].astype(np.float64)
    out = np.zeros(shape)
    for _ in range(count):
        cy, cx = rng.uniform(0, shape[0]), rng.uniform(0, shape[1])
        amp = rng.choice([-1.0, 1.0]) * rng.uniform(100.0, 250.0)
        out += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * 1.2**2))
    return out


def synthesize(kind: str, size: int = 64, seed: int = 0, polarity: int = 1) -> tuple[ImagePair, RegionMask]:
    """Deterministic phantom of the given kind on a ``size x size`` grid.

    ``polarity`` is the magnetic sign of the leading spot; following spots and
    plage take the opposite sign.
    """
    if kind not in KINDS:
        raise SunpatchError(f"unknown phantom kind {kind!r}; choose from {KINDS}")
    if polarity not in (-1, 1):
        raise SunpatchError(f"polarity must be +1 or -1, got {polarity}")
    if int(size) != size or size < 64:
        raise SunpatchError(f"phantom size must be an integer >= 64, got {size}")
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    shape = (size, size)
    cont = QUIET_SUN + CONT_NOISE * rng.normal(size=shape)
    mag = MAG_NOISE * rng.normal(size=shape)
    labels = np.zeros(shape, dtype=np.uint8)
    if kind == "noise":
        return ImagePair.from_arrays(cont, mag), RegionMask(labels)

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    background = np.zeros(shape)
    if kind == "single_spot":
        center = size / 2 + rng.uniform(-2, 2, size=2)
        _paint_spot(cont, mag, labels, rng, center, 0.1 * size, 0.22 * size, polarity)
        # following-polarity plage on one side of the spot
        plage = center + np.array([rng.uniform(-0.05, 0.05), 0.3]) * size
        background -= polarity * 120.0 * np.exp(-((yy - plage[0]) ** 2 + (xx - plage[1]) ** 2) / (2 * (0.08 * size) ** 2))
    else:
        # bipolar group: leading and following spots of opposite polarity plus a small third spot
        row = size / 2 + rng.uniform(-2, 2)
        specs = [
            ((row, 0.3 * size), 0.07 * size, 0.15 * size, polarity),
            ((row + rng.uniform(-3, 3), 0.7 * size), 0.06 * size, 0.13 * size, -polarity),
            ((row - 0.28 * size, 0.5 * size + rng.uniform(-3, 3)), 0.03 * size, 0.07 * size, -polarity),
        ]
        for center, ru, rp, pol in specs:
            _paint_spot(cont, mag, labels, rng, np.asarray(center), ru, rp, pol)
    outside = labels == 0
    frag = _fragments(shape, rng, max(1, size * size // 700))
    mag[outside] += background[outside] + frag[outside]
    return ImagePair.from_arrays(cont, mag), RegionMask(labels)
