"""End-to-end command-line interface behavior on a tiny bar dataset."""

import json
import shutil

import numpy as np
import pytest

from conftest import BAR_FLAGS, BAR_ROWS, BAR_SIZE
from curvilinear import cli, config, evaluation, imgio

BAR_OVERRIDES = {"thickness": 1, "stride": 3, "samples": 100, "C": 100.0,
                 "seed": 1, "rho": 0.02, "min_length": 40}
TOPRANK_BUDGET = int(0.02 * BAR_SIZE * BAR_SIZE)


def bar_hash():
    return config.config_hash(config.make_config(overrides=BAR_OVERRIDES))


def flags_without(name):
    flags = list(BAR_FLAGS)
    i = flags.index(name)
    return flags[:i] + flags[i + 2:]


class TestFeatures:
    def test_writes_tagged_feature_map(self, bar_data, tmp_path, capsys):
        rc = cli.main(["features", str(bar_data / "images" / "train_00.png"),
                       "--out-dir", str(tmp_path), *BAR_FLAGS])
        assert rc == 0
        fmap, reserved = imgio.read_cfm(tmp_path / "train_00.cfm")
        assert fmap.shape == (BAR_SIZE, BAR_SIZE)
        assert reserved == config.hash_word(bar_hash())
        row = BAR_ROWS["train_00"]
        assert np.argmax(fmap.max(axis=1)) == row

    def test_deterministic_bytes(self, bar_data, tmp_path):
        for sub in ("a", "b"):
            rc = cli.main(["features", str(bar_data / "images" / "train_01.png"),
                           "--out-dir", str(tmp_path / sub), *BAR_FLAGS])
            assert rc == 0
        assert (tmp_path / "a" / "train_01.cfm").read_bytes() == \
               (tmp_path / "b" / "train_01.cfm").read_bytes()

    def test_png_preview(self, bar_data, tmp_path):
        rc = cli.main(["features", str(bar_data / "images" / "train_00.png"),
                       "--out-dir", str(tmp_path), "--png", *BAR_FLAGS])
        assert rc == 0
        preview = tmp_path / "train_00_feature.png"
        assert preview.exists()
        assert imgio.png_config_hash(preview) == bar_hash()

    def test_missing_input_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.png"
        rc = cli.main(["features", str(missing), "--out-dir", str(tmp_path)])
        assert rc == 2
        assert str(missing) in capsys.readouterr().err


class TestTrain:
    def test_reports_and_sidecar(self, bar_data, bar_model, capsys):
        sidecar = json.loads(
            bar_model.parent.joinpath(bar_model.name + ".json").read_text())
        assert sidecar["config_hash"] == bar_hash()
        assert sidecar["rho"] == 0.02
        assert sidecar["n_samples"] == 96
        assert sidecar["converged"] is True
        assert sidecar["slack"] <= 1e-3

    def test_rerun_is_byte_identical(self, bar_data, bar_model, tmp_path, capsys):
        out = tmp_path / "again.crsv"
        rc = cli.main(["train", "--images-dir", str(bar_data / "images"),
                       "--gt-dir", str(bar_data / "gt"), "--out", str(out),
                       *BAR_FLAGS])
        assert rc == 0
        assert out.read_bytes() == bar_model.read_bytes()
        printed = capsys.readouterr().out
        assert "model:" in printed and "rho=0.02" in printed

    def test_too_few_samples_exits_2(self, bar_data, tmp_path, capsys):
        rc = cli.main(["train", "--images-dir", str(bar_data / "images"),
                       "--gt-dir", str(bar_data / "gt"),
                       "--out", str(tmp_path / "m.crsv"),
                       "--samples", "1"])
        assert rc == 2
        assert "insufficient samples" in capsys.readouterr().err

    def test_missing_directory_exits_2(self, bar_data, tmp_path, capsys):
        rc = cli.main(["train", "--images-dir", str(tmp_path / "void"),
                       "--gt-dir", str(bar_data / "gt"),
                       "--out", str(tmp_path / "m.crsv")])
        assert rc == 2
        assert "not found" in capsys.readouterr().err


class TestInfer:
    def test_artifacts_consistent(self, bar_data, bar_model, tmp_path):
        rc = cli.main(["infer", str(bar_data / "images" / "test_00.png"),
                       "--model", str(bar_model), "--out-dir", str(tmp_path),
                       *BAR_FLAGS])
        assert rc == 0
        scores, w_scores = imgio.read_cfm(tmp_path / "test_00_scores.cfm")
        thetas, w_theta = imgio.read_cfm(tmp_path / "test_00_theta.cfm")
        pi, w_pi = imgio.read_cfm(tmp_path / "test_00_pi.cfm")
        assert w_scores == w_theta == w_pi == config.hash_word(bar_hash())
        assert imgio.png_config_hash(tmp_path / "test_00_toprank.png") == bar_hash()
        assert scores.shape == thetas.shape == pi.shape == (BAR_SIZE, BAR_SIZE)
        assert (pi >= 0).all() and pi.max() > 0

        selected = imgio.read_mask(tmp_path / "test_00_toprank.png")
        assert selected.sum() == TOPRANK_BUDGET
        row = BAR_ROWS["test_00"]
        assert pi[row].max() == pi.max()

    def test_rho_falls_back_to_sidecar(self, bar_data, bar_model, tmp_path):
        rc = cli.main(["infer", str(bar_data / "images" / "test_00.png"),
                       "--model", str(bar_model), "--out-dir", str(tmp_path),
                       *flags_without("--rho")])
        assert rc == 0
        selected = imgio.read_mask(tmp_path / "test_00_toprank.png")
        assert selected.sum() == TOPRANK_BUDGET

    def test_no_rho_anywhere_exits_2(self, bar_data, bar_model, tmp_path, capsys):
        bare = tmp_path / "bare.crsv"
        shutil.copyfile(bar_model, bare)
        rc = cli.main(["infer", str(bar_data / "images" / "test_00.png"),
                       "--model", str(bare), "--out-dir", str(tmp_path),
                       *flags_without("--rho")])
        assert rc == 2
        assert "no rho available" in capsys.readouterr().err

    def test_missing_model_exits_2(self, bar_data, tmp_path, capsys):
        rc = cli.main(["infer", str(bar_data / "images" / "test_00.png"),
                       "--model", str(tmp_path / "ghost.crsv"),
                       "--out-dir", str(tmp_path)])
        assert rc == 2


class TestReconstruct:
    def test_blank_image_yields_no_paths(self, bar_data, bar_model, tmp_path,
                                         capsys):
        rc = cli.main(["reconstruct", str(bar_data / "blank.png"),
                       "--model", str(bar_model), "--out-dir", str(tmp_path),
                       *BAR_FLAGS])
        assert rc == 0
        assert "blank: 0 paths" in capsys.readouterr().out
        payload = json.loads((tmp_path / "blank_recon.json").read_text())
        assert payload["paths"] == []
        assert not imgio.read_mask(tmp_path / "blank_mask.png").any()

    def test_bar_image_recovers_structure(self, bar_data, bar_model, tmp_path,
                                          capsys):
        rc = cli.main(["reconstruct", str(bar_data / "images" / "test_00.png"),
                       "--model", str(bar_model), "--out-dir", str(tmp_path),
                       *BAR_FLAGS])
        assert rc == 0
        line = capsys.readouterr().out
        assert line.startswith("test_00: ")
        n_paths = int(line.split(":")[1].split()[0])
        assert n_paths >= 1
        payload = json.loads((tmp_path / "test_00_recon.json").read_text())
        assert payload["config_hash"] == bar_hash()
        assert len(payload["paths"]) == n_paths

        mask = imgio.read_mask(tmp_path / "test_00_mask.png")
        gt = imgio.read_mask(bar_data / "gt" / "test_00.png")
        assert evaluation.tolerant_f1(mask, gt, 1.0).f1 >= 0.9

    def test_rerun_identical_json(self, bar_data, bar_model, tmp_path):
        texts = []
        for sub in ("a", "b"):
            rc = cli.main(["reconstruct",
                           str(bar_data / "images" / "test_00.png"),
                           "--model", str(bar_model),
                           "--out-dir", str(tmp_path / sub), *BAR_FLAGS])
            assert rc == 0
            texts.append((tmp_path / sub / "test_00_recon.json").read_text())
        assert texts[0] == texts[1]


class TestEval:
    def test_perfect_match(self, bar_data, tmp_path, capsys):
        gt = str(bar_data / "gt" / "train_00.png")
        out = tmp_path / "metrics.csv"
        rc = cli.main(["eval", "--pred", gt, "--gt", gt,
                       "--out", str(out), "--tolerance", "0"])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "image,precision,recall,f1,rho_percent"
        fields = lines[1].split(",")
        assert fields[0] == "train_00"
        assert float(fields[3]) == 1.0
        assert lines[2].startswith("mean,")
        assert "train_00" in capsys.readouterr().err

    def test_stdout_csv_default(self, bar_data, capsys):
        gt = str(bar_data / "gt" / "train_01.png")
        rc = cli.main(["eval", "--pred", gt, "--gt", gt])
        assert rc == 0
        assert capsys.readouterr().out.startswith("image,precision,recall")

    def test_count_mismatch_exits_2(self, bar_data, capsys):
        gt = str(bar_data / "gt" / "train_00.png")
        rc = cli.main(["eval", "--pred", gt, gt, "--gt", gt])
        assert rc == 2
        assert "2 predictions" in capsys.readouterr().err

    def test_mixed_hashes_refused_unless_forced(self, tmp_path, capsys):
        mask = np.zeros((8, 8), dtype=bool)
        mask[4, :] = True
        gt_paths = []
        pred_paths = []
        for i, tag in enumerate(("aaaa0001", "bbbb0002")):
            pred = tmp_path / f"pred_{i}.png"
            gt = tmp_path / f"gt_{i}.png"
            imgio.write_mask_png(pred, mask, config_hash=tag)
            imgio.write_mask_png(gt, mask)
            pred_paths.append(str(pred))
            gt_paths.append(str(gt))
        rc = cli.main(["eval", "--pred", *pred_paths, "--gt", *gt_paths])
        assert rc == 2
        assert "mixed config hashes" in capsys.readouterr().err
        rc = cli.main(["eval", "--pred", *pred_paths, "--gt", *gt_paths,
                       "--force"])
        assert rc == 0

    def test_single_hash_accepted(self, tmp_path, capsys):
        mask = np.zeros((8, 8), dtype=bool)
        mask[2, :] = True
        tagged = tmp_path / "tagged.png"
        plain = tmp_path / "plain.png"
        imgio.write_mask_png(tagged, mask, config_hash="cafe0123")
        imgio.write_mask_png(plain, mask)
        rc = cli.main(["eval", "--pred", str(tagged), str(plain),
                       "--gt", str(plain), str(plain)])
        assert rc == 0
        capsys.readouterr()


class TestPipeline:
    def test_bar_dataset_end_to_end(self, bar_data, tmp_path, capsys):
        out_dir = tmp_path / "run"
        rc = cli.main(["pipeline", "--data-dir", str(bar_data),
                       "--out-dir", str(out_dir), *BAR_FLAGS])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary == json.loads((out_dir / "summary.json").read_text())
        assert summary["config_hash"] == bar_hash()
        assert summary["n_train"] == 3 and summary["n_test"] == 1
        assert summary["mean_f1"] >= 0.8
        assert summary["rho"] == 0.02
        for name in ("model.crsv", "model.crsv.json", "metrics.csv",
                     "test_00_recon.json", "test_00_overlay.png",
                     "test_00_mask.png", "test_00_pi.cfm"):
            assert (out_dir / name).exists()

    def test_missing_manifest_exits_2(self, tmp_path, capsys):
        (tmp_path / "empty").mkdir()
        rc = cli.main(["pipeline", "--data-dir", str(tmp_path / "empty"),
                       "--out-dir", str(tmp_path / "out")])
        assert rc == 2
        assert "manifest.json" in capsys.readouterr().err


class TestSynth:
    def test_generates_manifest_and_files(self, tmp_path, capsys):
        out_dir = tmp_path / "data"
        rc = cli.main(["synth", "--out-dir", str(out_dir), "--train", "2",
                       "--test", "1", "--size", "64", "--noise", "0.05",
                       "--seed", "3"])
        assert rc == 0
        assert "wrote 2 train / 1 test" in capsys.readouterr().out
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert len(manifest["train"]) == 2 and len(manifest["test"]) == 1
        for name in manifest["train"] + manifest["test"]:
            image = imgio.read_gray(out_dir / "images" / f"{name}.png")
            gt = imgio.read_mask(out_dir / "gt" / f"{name}.png")
            assert image.shape == gt.shape == (64, 64)
            assert gt.any()

    def test_deterministic(self, tmp_path):
        blobs = []
        for sub in ("a", "b"):
            out_dir = tmp_path / sub
            rc = cli.main(["synth", "--out-dir", str(out_dir), "--train", "1",
                           "--test", "1", "--size", "48", "--seed", "7"])
            assert rc == 0
            manifest = json.loads((out_dir / "manifest.json").read_text())
            name = manifest["train"][0]
            blobs.append((out_dir / "images" / f"{name}.png").read_bytes())
        assert blobs[0] == blobs[1]

    def test_bad_command_line(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["no_such_command"])
