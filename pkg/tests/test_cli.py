import csv
import json

import numpy as np
import pytest

from sunpatch.cli import PipelineConfig, main, run
from sunpatch.gridio import read_grid
from sunpatch.errors import SunpatchError


@pytest.fixture(scope="module")
def fast_config(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "fast.json"
    p.write_text(json.dumps({"runs": 1, "cca_patch_sides": [1, 3], "crop": 64}))
    return str(p)


@pytest.fixture(scope="module")
def phantom(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    run(["synth", "--kind", "single_spot", "--seed", "0", "--out", str(d)])
    return {k: str(d / f"single_spot_{k}.grd") for k in ("cont", "mag", "mask")}


def test_synth_outputs(tmp_path):
    written = run(["synth", "--kind", "single_spot", "--seed", "3", "--out", str(tmp_path)])
    assert sorted(p.rsplit("/", 1)[1] for p in written) == [
        "single_spot_cont.grd",
        "single_spot_mag.grd",
        "single_spot_mask.grd",
    ]
    labels, dtype = read_grid(tmp_path / "single_spot_mask.grd")
    assert dtype == "u8"
    umbra, penumbra = np.count_nonzero(labels == 2), np.count_nonzero(labels == 1)
    assert 0 < umbra < penumbra


def test_synth_noise_mask(tmp_path):
    run(["synth", "--kind", "noise", "--name", "bg", "--out", str(tmp_path)])
    labels, _ = read_grid(tmp_path / "bg_mask.grd")
    assert not labels.any()


def test_synth_same_seed_identical(tmp_path):
    for sub in ("a", "b"):
        run(["synth", "--kind", "multi_spot", "--seed", "9", "--out", str(tmp_path / sub)])
    for k in ("cont", "mag", "mask"):
        name = f"multi_spot_{k}.grd"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dim_report(tmp_path, phantom, fast_config):
    run(["dim", "--cont", phantom["cont"], "--mag", phantom["mag"], "--mask", phantom["mask"],
         "--config", fast_config, "--out", str(tmp_path)])
    rows = json.loads((tmp_path / "dim_report.json").read_text())
    knn = {r["region"]: r["estimate"] for r in rows if r["method"] == "knn"}
    assert knn["umbra"] < knn["background"]
    with open(tmp_path / "dim_report.csv") as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == len(rows) == 12


def test_dimmap(tmp_path, phantom, fast_config):
    run(["dimmap", "--cont", phantom["cont"], "--mag", phantom["mag"], "--config", fast_config, "--out", str(tmp_path)])
    mean, _ = read_grid(tmp_path / "dimmap_mean.grd")
    std, _ = read_grid(tmp_path / "dimmap_std.grd")
    assert mean.shape == std.shape == (64, 64)
    assert np.all(mean >= 1) and np.all(std == 0)


def test_mra(tmp_path, phantom, fast_config):
    cfg = tmp_path / "mra.json"
    cfg.write_text(json.dumps({"runs": 1, "mra_levels": 1}))
    run(["mra", "--pair", phantom["cont"], phantom["mag"], phantom["mask"], "--config", str(cfg), "--out", str(tmp_path / "o")])
    out = tmp_path / "o"
    for j in (0, 1):
        assert (out / f"single_spot_cont.grd.L{j}").exists()
        assert (out / f"single_spot_mag.grd.L{j}").exists()
    layers = sum(read_grid(out / f"single_spot_cont.grd.L{j}")[0] for j in (0, 1))
    np.testing.assert_allclose(layers, read_grid(phantom["cont"])[0], atol=1e-12)
    report = json.loads((out / "mra.json").read_text())
    assert {t["region"] for t in report["trend"]} == {"background", "penumbra", "umbra"}
    with open(out / "mra.csv") as fh:
        assert next(csv.reader(fh)) == ["scale", "region", "method", "threshold", "estimate", "spread"]


def test_cca(tmp_path, phantom, fast_config):
    run(["cca", "--cont", phantom["cont"], "--mag", phantom["mag"], "--mask", phantom["mask"],
         "--config", fast_config, "--out", str(tmp_path)])
    rows = json.loads((tmp_path / "cca.json").read_text())
    rho = {(r["region"], r["patch_side"]): r["correlations"][0] for r in rows}
    # the default ridge shrinks an exact coupling by about 1e-8
    assert rho[("umbra", 1)] == pytest.approx(1.0, abs=1e-6)
    u, _ = read_grid(tmp_path / "u_p3.grd")
    assert u.shape == (64, 64) and np.isfinite(u).all()


def test_cca_nan_outside_mask(tmp_path, rng):
    from sunpatch.core import ImageGrid, RegionMask

    # a mask with an empty penumbra region fails; an all-background one covers everything
    ImageGrid(rng.normal(size=(20, 20))).save(tmp_path / "c.grd")
    ImageGrid(rng.normal(size=(20, 20))).save(tmp_path / "m.grd")
    labels = np.zeros((20, 20), dtype=np.uint8)
    labels[5:15, 5:15] = 2
    RegionMask(labels).save(tmp_path / "k.grd")
    run(["cca", "--cont", str(tmp_path / "c.grd"), "--mag", str(tmp_path / "m.grd"), "--mask", str(tmp_path / "k.grd"),
         "--out", str(tmp_path / "o")])
    u, _ = read_grid(tmp_path / "o" / "u_p5.grd")
    assert np.isfinite(u).all()


def test_dict_cluster_metrics(tmp_path, fast_config):
    paths, truth = [], []
    for fam, kind in enumerate(("single_spot", "multi_spot")):
        for seed in range(3):
            name = f"{kind}{seed}"
            run(["synth", "--kind", kind, "--seed", str(seed), "--name", name, "--out", str(tmp_path / "img")])
            run(["dict", "--cont", str(tmp_path / "img" / f"{name}_cont.grd"), "--mag", str(tmp_path / "img" / f"{name}_mag.grd"),
                 "--id", name, "--config", fast_config, "--out", str(tmp_path / "dicts")])
            paths.append(str(tmp_path / "dicts" / f"{name}.json"))
            truth.append((name, fam))
    d = json.loads(open(paths[0]).read())
    assert d["atom_count"] == 7 and d["dim"] == 18 and len(d["flattened"]) == 126
    run(["cluster", "--dicts", *paths, "--out", str(tmp_path / "cl")])
    with open(tmp_path / "truth.csv", "w") as fh:
        fh.write("source_id,label\n" + "".join(f"{n},{f}\n" for n, f in truth))
    run(["metrics", "--a", str(tmp_path / "cl" / "labels.csv"), "--b", str(tmp_path / "truth.csv"), "--out", str(tmp_path / "m")])
    m = json.loads((tmp_path / "m" / "metrics.json").read_text())
    assert m == {"n": 6, "nmi": 1.0, "ari": 1.0}
    sim = json.loads((tmp_path / "cl" / "similarity.json").read_text())
    assert sim["ensemble_size"] == 60 and len(sim["values"]) == 6
    emb = json.loads((tmp_path / "cl" / "embedding.json").read_text())
    assert np.array(emb["coordinates"]).shape == (6, 3)


def test_dict_cca_method(tmp_path, phantom):
    run(["dict", "--cont", phantom["cont"], "--mag", phantom["mag"], "--mask", phantom["mask"], "--method", "cca",
         "--crop", "48", "--id", "x", "--out", str(tmp_path)])
    assert len(json.loads((tmp_path / "x.json").read_text())["flattened"]) == 126


def test_metrics_same_labels(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("source_id,label\na,1\nb,1\nc,2\n")
    run(["metrics", "--a", str(p), "--b", str(p), "--out", str(tmp_path / "o")])
    assert json.loads((tmp_path / "o" / "metrics.json").read_text()) == {"n": 3, "nmi": 1.0, "ari": 1.0}


def test_error_json_and_no_outputs(tmp_path, capsys, phantom):
    out = tmp_path / "o"
    code = main(["dim", "--cont", str(tmp_path / "missing.grd"), "--mag", phantom["mag"], "--out", str(out)])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "SunpatchError" and "missing.grd" in err["message"]
    assert not out.exists()


def test_mra_failure_writes_nothing(tmp_path, phantom, capsys):
    # layers are computed before the estimator rejects the neighborhood, but none are written
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"runs": 1, "local_neighborhood": 10**6}))
    out = tmp_path / "o"
    assert main(["mra", "--pair", phantom["cont"], phantom["mag"], phantom["mask"], "--config", str(bad), "--out", str(out)]) == 1
    assert not out.exists()


def test_cluster_rejects_mixed_lengths(tmp_path, capsys):
    from sunpatch.dictionary import ImageDictionary

    ImageDictionary(np.eye(18)[:, :2], "a").save(tmp_path / "a.json")
    ImageDictionary(np.eye(18)[:, :3], "b").save(tmp_path / "b.json")
    assert main(["cluster", "--dicts", str(tmp_path / "a.json"), str(tmp_path / "b.json"), "--out", str(tmp_path / "o")]) == 1
    assert "flattened lengths" in json.loads(capsys.readouterr().err)["message"]
    assert not (tmp_path / "o").exists()


def test_config_validation(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"runz": 3}))
    assert main(["synth", "--kind", "noise", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "runz" in json.loads(capsys.readouterr().err)["message"]
    with pytest.raises(SunpatchError):
        PipelineConfig(padding="zero").validate()
    with pytest.raises(SunpatchError):
        PipelineConfig(k=0).validate()


def test_threads_flag(tmp_path):
    run(["synth", "--kind", "noise", "--threads", "1", "--out", str(tmp_path)])
    assert (tmp_path / "noise_cont.grd").exists()
