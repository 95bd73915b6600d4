import numpy as np
import pytest

from visnet.cli import main, resolve_config, build_parser
from visnet.config import RunConfig, thread_cap
from visnet.errors import ParameterError
from visnet.ingest import read_pnm
from visnet.modelfile import load_model

TINY = ["--grid", "16", "--epochs", "1", "--set", "patches=2,3", "--set", "sequence_length=2",
        "--set", "readout.epochs=5"]


@pytest.fixture(scope="module")
def parted_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data") / "parted"
    rc = main(["gen-data", "--dataset", "TWOCLASSES-PARTED-SQUARE", "--count", "20", "--size", "16",
               "--seed", "1", "--out", str(d)])
    assert rc == 0
    return d


@pytest.fixture(scope="module")
def rbf_model(parted_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    rc = main(["train", "--data", str(parted_dir), "--variant", "rbf", "--out", str(out)] + TINY)
    assert rc == 0
    return out / "model.vnsn"


def test_gen_data_writes_images_and_manifest(tmp_path, capsys):
    args = ["gen-data", "--family", "square", "--classes", "2", "--count", "30", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    assert "class 0 (100%): 15 images" in out and "class 1 (20%): 15 images" in out
    assert len(list((tmp_path / "a").glob("*.pgm"))) == 30
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert main(args + ["--out", str(tmp_path / "a")]) == 0  # rerun into the same directory
    m = (tmp_path / "a" / "manifest.csv").read_bytes()
    assert m == (tmp_path / "b" / "manifest.csv").read_bytes()
    assert m.startswith(b"filename,label,split,measured_symmetry\n")


def test_gen_data_usage_errors(tmp_path):
    assert main(["gen-data", "--family", "square", "--classes", "3", "--out", str(tmp_path)]) == 1
    assert main(["gen-data", "--family", "circle", "--out", str(tmp_path)]) == 1
    assert main(["gen-data", "--family", "square"]) == 1  # --out missing
    assert main([]) == 1
    assert main(["gen-data", "--family", "square", "--rotation", "400", "--out", str(tmp_path)]) == 1


def test_train_then_eval_writes_summary(parted_dir, rbf_model, tmp_path):
    assert load_model(rbf_model).variant == "rbf"
    assert (rbf_model.parent / "model.vnsn.cfg").exists()
    out = tmp_path / "eval"
    rc = main(["eval", "--model", str(rbf_model), "--data", str(parted_dir), "--out", str(out)] + TINY)
    assert rc == 0
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "dataset,variant,mean,sd"
    assert summary[1].startswith("TWOCLASSES-PARTED-SQUARE,rbf,")
    assert (out / "config.cfg").exists()


def test_eval_missing_model_is_data_error(parted_dir, tmp_path, capsys):
    rc = main(["eval", "--model", str(tmp_path / "none.vnsn"), "--data", str(parted_dir), "--out", str(tmp_path)])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_rgb_variant_on_gray_data_is_rejected(parted_dir, tmp_path):
    model = tmp_path / "m.vnsn"
    rc = main(["train", "--data", str(parted_dir), "--variant", "li-dog-rgb", "--model", str(model)] + TINY)
    assert rc == 1
    assert not model.exists()
    assert list(tmp_path.iterdir()) == []


def test_bad_config_leaves_no_model(parted_dir, tmp_path):
    model = tmp_path / "m.vnsn"
    assert main(["train", "--data", str(parted_dir), "--set", "eta=2", "--model", str(model)] + TINY) == 1
    assert main(["train", "--data", str(parted_dir), "--set", "nonsense=1", "--model", str(model)]) == 1
    assert main(["train", "--data", str(tmp_path / "missing"), "--model", str(model)] + TINY) == 2
    assert not model.exists()


def test_corrupt_model_is_data_error(tmp_path):
    bad = tmp_path / "bad.vnsn"
    bad.write_bytes(b"VNSN\x01")
    assert main(["inspect-rf", "--model", str(bad), "--layer", "1", "--out", str(tmp_path / "rf")]) == 2


def test_inspect_rf_tiles(rbf_model, tmp_path):
    out = tmp_path / "rf"
    assert main(["inspect-rf", "--model", str(rbf_model), "--layer", "2", "--max-tiles", "5", "--out", str(out)]) == 0
    tiles = sorted(out.glob("*.pgm"))
    assert [t.name for t in tiles] == [f"layer2_n{k:05d}.pgm" for k in range(5)]
    assert read_pnm(tiles[0]).shape == (3, 3)
    assert (out / "config.cfg").exists()
    big = tmp_path / "all"
    assert main(["inspect-rf", "--model", str(rbf_model), "--layer", "1", "--max-tiles", "1000", "--out", str(big)]) == 0
    assert len(list(big.glob("*.pgm"))) == 16 * 16
    assert read_pnm(big / "layer1_n00000.pgm").shape == (2, 2 * 32)


def test_inspect_rf_layer_range(rbf_model, tmp_path):
    assert main(["inspect-rf", "--model", str(rbf_model), "--layer", "5", "--out", str(tmp_path)]) == 1
    assert main(["inspect-rf", "--model", str(rbf_model), "--layer", "3", "--out", str(tmp_path)]) == 1
    assert main(["inspect-rf", "--model", str(rbf_model), "--layer", "0", "--out", str(tmp_path)]) == 1


def test_untrained_tiles_follow_the_seed(parted_dir, tmp_path):
    paths = []
    for name in ("a", "b"):
        m = tmp_path / f"{name}.vnsn"
        assert main(["train", "--data", str(parted_dir), "--model", str(m), "--seed", "4",
                     "--set", "alpha=0"] + TINY) == 0
        o = tmp_path / f"rf_{name}"
        assert main(["inspect-rf", "--model", str(m), "--layer", "1", "--out", str(o)]) == 0
        paths.append(o)
    for t in paths[0].glob("*.pgm"):
        assert t.read_bytes() == (paths[1] / t.name).read_bytes()


def test_run_command(parted_dir, tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["run", "--data", str(parted_dir), "--n-seeds", "2", "--out", str(out)] + TINY)
    assert rc == 0
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 3
    assert "over 2 seeds" in capsys.readouterr().out


# ------------------------------------------------------------------- config


def test_config_precedence(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\neta = 0.5\nalpha = 0.2\npatches = 3, 4\n")
    args = build_parser().parse_args(["train", "--config", str(f), "--set", "alpha=0.3", "--epochs", "2"])
    cfg = resolve_config(args)
    assert cfg["eta"] == 0.5 and cfg["alpha"] == 0.3 and cfg["epochs"] == 2
    assert cfg["patches"] == (3, 4)
    assert RunConfig.parse(cfg.dumps()) == cfg


def test_config_rejects_unknown_and_malformed():
    with pytest.raises(ParameterError):
        RunConfig({"bogus": 1})
    with pytest.raises(ParameterError):
        RunConfig.parse("eta 0.5")
    with pytest.raises(ParameterError):
        RunConfig.parse("epochs = many")


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("VISNET_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("VISNET_THREADS", "x")
    with pytest.raises(ParameterError):
        thread_cap()
