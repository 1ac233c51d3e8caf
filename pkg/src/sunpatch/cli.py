"""Command-line pipelines: ``sunpatch <command> [options]``.

Every command validates its inputs and computes its results before writing
anything, so a failing run leaves no partial outputs. Failures exit with status
1 and a JSON object ``{"error": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gridio
from .cca import region_cca_report
from .clustering import eac_dc_similarity, laplacian_mds, spectral_cluster
from .core import ImageGrid, ImagePair, Modality, RegionMask, crop_centered, extract_patches
from .dictionary import ImageDictionary, learn_dictionary, learn_dictionary_cca
from .dimension import GraphLengthParams, estimate_local_dimension, region_dimension_report
from .errors import SunpatchError
from .metrics import ari, jtrend, nmi
from .mra import dimension_by_scale, haar_layers
from .phantom import KINDS, synthesize

log = logging.getLogger("sunpatch")


@dataclass
class PipelineConfig:
    patch_side: int = 3
    padding: str = "mirror"
    standardize: bool = True
    k: int = 5
    gamma: float = 1.0
    runs: int = 20
    local_neighborhood: int = 100
    smoothing_neighbors: int = 6
    subsample_sizes: list | None = None
    bootstraps_per_size: int = 5
    thresholds: list = field(default_factory=lambda: [0.95, 0.97, 0.99])
    mra_levels: int = 2
    cca_ridge: float | None = None
    cca_patch_sides: list = field(default_factory=lambda: [1, 3, 5])
    atom_count: int = 7
    dict_method: str = "pca"
    crop: int = 320
    ensemble_size: int | None = None
    n_clusters: int | None = None
    embedding_dims: int = 3
    seed: int = 0

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise SunpatchError(f"unknown config keys: {unknown}")
        return cls(**raw)

    def validate(self) -> None:
        if self.padding not in ("mirror", "valid"):
            raise SunpatchError(f"padding must be 'mirror' or 'valid', got {self.padding!r}")
        if self.dict_method not in ("pca", "cca"):
            raise SunpatchError(f"dict_method must be 'pca' or 'cca', got {self.dict_method!r}")
        if self.crop < 1 or self.embedding_dims < 1 or self.mra_levels < 1:
            raise SunpatchError("crop, embedding_dims and mra_levels must be positive")
        self.graph_params()

    def graph_params(self) -> GraphLengthParams:
        return GraphLengthParams(k=self.k, gamma=self.gamma, num_runs=self.runs, rng_seed=self.seed)

    def local_kwargs(self) -> dict:
        return dict(
            local_neighborhood=self.local_neighborhood,
            smoothing_neighbors=self.smoothing_neighbors,
            subsample_sizes=self.subsample_sizes,
            bootstraps_per_size=self.bootstraps_per_size,
        )


# ---------------------------------------------------------------- file helpers


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise SunpatchError(f"input file not found: {p}")
    return p


def load_pair(cont, mag) -> ImagePair:
    return ImagePair(ImageGrid.load(_require(cont), Modality.CONTINUUM), ImageGrid.load(_require(mag), Modality.MAGNETOGRAM))


def load_mask(path, shape=None) -> RegionMask:
    if path is None:
        return RegionMask.background(shape)
    return RegionMask.load(_require(path))


def read_labels(path) -> dict:
    with open(_require(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"source_id", "label"} <= set(reader.fieldnames):
            raise SunpatchError(f"{path}: expected columns source_id,label")
        return {row["source_id"]: row["label"] for row in reader}


class _Outputs:
    """Collects outputs in memory and writes them in one go at the end."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.items = []

    def grid(self, name, values, dtype="f64"):
        self.items.append(("grid", name, (np.asarray(values), dtype)))

    def json(self, name, obj):
        self.items.append(("json", name, obj))

    def csv(self, name, header, rows):
        self.items.append(("csv", name, (header, rows)))

    def write(self) -> list[str]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for kind, name, payload in self.items:
            path = self.out_dir / name
            if kind == "grid":
                gridio.write_grid(path, *payload)
            elif kind == "json":
                with open(path, "w") as fh:
                    json.dump(payload, fh, sort_keys=True, indent=1)
                    fh.write("\n")
            else:
                header, rows = payload
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(header)
                    w.writerows(rows)
            written.append(str(path))
        return written


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------- commands


def cmd_synth(args, cfg, out: _Outputs):
    if args.size < 64:
        raise SunpatchError(f"phantom size must be >= 64, got {args.size}")
    pair, mask = synthesize(args.kind, args.size, cfg.seed, args.polarity)
    name = args.name or args.kind
    out.grid(f"{name}_cont.grd", pair.cont.values)
    out.grid(f"{name}_mag.grd", pair.mag.values)
    out.grid(f"{name}_mask.grd", mask.labels, "u8")


def cmd_dim(args, cfg, out: _Outputs):
    pair = load_pair(args.cont, args.mag)
    mask = load_mask(args.mask, pair.shape)
    rows = region_dimension_report(
        pair,
        mask,
        cfg.graph_params(),
        thresholds=cfg.thresholds,
        patch_side=cfg.patch_side,
        regions=mask.present(),
        **cfg.local_kwargs(),
    )
    out.json("dim_report.json", rows)
    out.csv(
        "dim_report.csv",
        ["region", "method", "threshold", "estimate", "spread"],
        [[r["region"], r["method"], _fmt(r.get("threshold")), _fmt(float(r["estimate"])), _fmt(r.get("spread"))] for r in rows],
    )


def cmd_dimmap(args, cfg, out: _Outputs):
    pair = load_pair(args.cont, args.mag)
    patches = extract_patches(pair, cfg.patch_side, cfg.padding, cfg.standardize)
    dmap = estimate_local_dimension(patches, cfg.graph_params(), **cfg.local_kwargs())
    out.grid("dimmap_mean.grd", dmap.mean_dim)
    out.grid("dimmap_std.grd", dmap.std_dim)


def cmd_mra(args, cfg, out: _Outputs):
    if not args.pair:
        raise SunpatchError("mra needs at least one --pair CONT MAG MASK")
    pairs, masks = [], []
    for cont, mag, mask in args.pair:
        pair = load_pair(cont, mag)
        pairs.append(pair)
        masks.append(load_mask(mask, pair.shape))
        for path, img in ((cont, pair.cont), (mag, pair.mag)):
            stack = haar_layers(img, cfg.mra_levels)
            stem = Path(path).name
            for j, layer in enumerate(stack.layers):
                out.grid(f"{stem}.L{j}", layer.values)
    table = dimension_by_scale(
        pairs,
        masks,
        cfg.mra_levels,
        cfg.graph_params(),
        cfg.patch_side,
        cfg.thresholds,
        **cfg.local_kwargs(),
    )
    trends = []
    regions = sorted({name for _, name in table.samples}, key=["background", "penumbra", "umbra"].index)
    for name in regions:
        groups = table.groups(name)
        if len(groups) >= 2:
            res = jtrend(groups)
            trends.append({"region": name, "method": "knn", "statistic": res["statistic"], "p_value": res["p_value"], "z": res["z"]})
    out.json("mra.json", {"rows": table.rows, "trend": trends})
    out.csv(
        "mra.csv",
        ["scale", "region", "method", "threshold", "estimate", "spread"],
        [[r["scale"], r["region"], r["method"], _fmt(r["threshold"]), _fmt(r["estimate"]), _fmt(r["spread"])] for r in table.rows],
    )


def cmd_cca(args, cfg, out: _Outputs):
    pair = load_pair(args.cont, args.mag)
    mask = load_mask(args.mask, pair.shape)
    entries, images = region_cca_report(pair, mask, cfg.cca_patch_sides, cfg.cca_ridge)
    rows = [
        {"region": e.region, "patch_side": e.patch_side, "correlations": [float(c) for c in e.result.correlations]}
        for e in entries
    ]
    out.json("cca.json", rows)
    out.csv("cca.csv", ["region", "patch_side", "rho1"], [[e.region, e.patch_side, _fmt(e.rho1)] for e in entries])
    for side, (u, v) in images.items():
        out.grid(f"u_p{side}.grd", u.filled(np.nan))
        out.grid(f"v_p{side}.grd", v.filled(np.nan))


def cmd_dict(args, cfg, out: _Outputs):
    pair = load_pair(args.cont, args.mag)
    mask = load_mask(args.mask, pair.shape) if args.mask else None
    if cfg.crop < max(pair.shape):
        pair, mask = crop_centered(pair, mask, cfg.crop)
    else:
        log.info("crop %d covers the whole %s image", cfg.crop, pair.shape)
    source_id = args.id or Path(args.cont).stem
    if cfg.dict_method == "pca":
        patches = extract_patches(pair, cfg.patch_side, cfg.padding, cfg.standardize)
        d = learn_dictionary(patches, cfg.atom_count, source_id)
    else:
        d = learn_dictionary_cca(pair, mask, cfg.atom_count, cfg.patch_side, cfg.cca_ridge, source_id)
    out.json(f"{source_id}.json", d.to_json())


def cmd_cluster(args, cfg, out: _Outputs):
    if not args.dicts or len(args.dicts) < 2:
        raise SunpatchError("cluster needs at least two dictionary files")
    dicts = [ImageDictionary.load(_require(p)) for p in args.dicts]
    ids = [d.source_id for d in dicts]
    if len(set(ids)) != len(ids):
        raise SunpatchError("dictionary source_ids must be unique")
    lengths = {d.flattened.size for d in dicts}
    if len(lengths) != 1:
        raise SunpatchError(f"dictionaries have different flattened lengths {sorted(lengths)}")
    V = np.vstack([d.flattened for d in dicts])
    sim = eac_dc_similarity(V, cfg.ensemble_size, cfg.seed)
    assignment = spectral_cluster(sim, cfg.n_clusters, cfg.seed)
    q = min(cfg.embedding_dims, len(dicts) - 1)
    emb = laplacian_mds(sim, q)
    out.csv("labels.csv", ["source_id", "label"], [[i, int(l)] for i, l in zip(ids, assignment.labels)])
    out.json("similarity.json", {"source_ids": ids, **sim.to_json()})
    out.json("embedding.json", {"source_ids": ids, **emb.to_json()})
    out.csv(
        "embedding.csv",
        ["source_id", "label"] + [f"c{j + 1}" for j in range(q)],
        [[i, int(l)] + [_fmt(float(c)) for c in row] for i, l, row in zip(ids, assignment.labels, emb.coordinates)],
    )


def cmd_metrics(args, cfg, out: _Outputs):
    a = read_labels(args.a)
    b = read_labels(args.b)
    common = sorted(set(a) & set(b))
    if not common:
        raise SunpatchError("label files share no source_id")
    la = [a[i] for i in common]
    lb = [b[i] for i in common]
    out.json("metrics.json", {"n": len(common), "nmi": nmi(la, lb), "ari": ari(la, lb)})


COMMANDS = {
    "synth": cmd_synth,
    "dim": cmd_dim,
    "dimmap": cmd_dimmap,
    "mra": cmd_mra,
    "cca": cmd_cca,
    "dict": cmd_dict,
    "cluster": cmd_cluster,
    "metrics": cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with PipelineConfig fields")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--threads", type=int, help="cap on BLAS/OpenMP worker threads")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sunpatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic phantom")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--polarity", type=int, choices=[-1, 1], default=1)
    p.add_argument("--name")

    for name, text in (("dim", "region dimension report"), ("dimmap", "per-pixel local dimension map"), ("cca", "region CCA")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--cont", required=True)
        p.add_argument("--mag", required=True)
        if name != "dimmap":
            p.add_argument("--mask")

    p = sub.add_parser("mra", parents=[common], help="dimension by Haar scale")
    p.add_argument("--pair", nargs=3, action="append", metavar=("CONT", "MAG", "MASK"))

    p = sub.add_parser("dict", parents=[common], help="learn one image dictionary")
    p.add_argument("--cont", required=True)
    p.add_argument("--mag", required=True)
    p.add_argument("--mask")
    p.add_argument("--id")
    p.add_argument("--crop", type=int, help="overrides the config crop size")
    p.add_argument("--method", choices=["pca", "cca"], help="overrides the config dict_method")

    p = sub.add_parser("cluster", parents=[common], help="cluster dictionaries")
    p.add_argument("--dicts", nargs="+")
    p.add_argument("--k", type=int, help="number of clusters (default: eigengap)")

    p = sub.add_parser("metrics", parents=[common], help="NMI/ARI between two label files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    return parser


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(_require(args.config)) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "crop", None) is not None:
        cfg.crop = args.crop
    if getattr(args, "method", None) is not None:
        cfg.dict_method = args.method
    if getattr(args, "k", None) is not None:
        cfg.n_clusters = args.k
    cfg.validate()
    return cfg


def run(argv=None) -> list[str]:
    """Parse ``argv`` and run one command; returns the written paths."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    cfg = _config(args)
    out = _Outputs(args.out)
    if args.threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            COMMANDS[args.command](args, cfg, out)
    else:
        COMMANDS[args.command](args, cfg, out)
    return out.write()


def main(argv=None) -> int:
    try:
        for path in run(argv):
            log.info("wrote %s", path)
    except (SunpatchError, OSError, ValueError, TypeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
