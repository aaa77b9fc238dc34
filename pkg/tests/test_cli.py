import csv
import json
from pathlib import Path

import pytest

from microfp.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, parse_config_file
from microfp.errors import DataError


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out", str(out), "--n-images", "12", "--size", "96", "--seed", "3"]) == EXIT_OK
    return out


class TestSynth:
    def test_writes_images_and_manifest(self, small_dataset):
        pngs = sorted(small_dataset.glob("*.png"))
        assert len(pngs) == 12
        rows = list(csv.reader((small_dataset / "manifest.csv").open()))
        assert rows[0] == ["path", "label"]
        assert len(rows) == 13


class TestPipelineCommands:
    def test_extract_cluster_fingerprint_classify(self, small_dataset, tmp_path):
        features = tmp_path / "features"
        code = main(
            ["extract", "--method", "patch", "--manifest", str(small_dataset / "manifest.csv"), "--out", str(features),
             "--patch-side", "16", "--stride", "16"]
        )
        assert code == EXIT_OK
        assert len(list(features.glob("*.mfp1"))) == 12

        dictionary = tmp_path / "dict.mfp1"
        assert main(["cluster", "--features", str(features), "--k", "5", "--seed", "0", "--out", str(dictionary)]) == EXIT_OK

        stack = tmp_path / "stack.mfp1"
        assert main(
            ["fingerprint", "--dict", str(dictionary), "--features", str(features), "--order", "0", "--out", str(stack)]
        ) == EXIT_OK

        out = tmp_path / "res"
        code = main(
            ["classify", "--stack", str(stack), "--manifest", str(small_dataset / "manifest.csv"),
             "--method", "svm", "--kernel", "chi2", "--folds", "3", "--seed", "0", "--out", str(out)]
        )
        assert code == EXIT_OK
        assert (out / "results.csv").is_file()
        assert (out / "run_config.json").is_file()
        assert (out / "confusion_0.csv").is_file()

    def test_multiscale_dict_selection(self, small_dataset, tmp_path):
        features = tmp_path / "features"
        main(["extract", "--method", "patch", "--manifest", str(small_dataset / "manifest.csv"), "--out", str(features)])
        d1, d2 = tmp_path / "d1.mfp1", tmp_path / "d2.mfp1"
        main(["cluster", "--features", str(features), "--k", "3", "--out", str(d1)])
        main(["cluster", "--features", str(features), "--k", "4", "--out", str(d2)])
        stack = tmp_path / "stack.mfp1"
        code = main(
            ["fingerprint", "--dict", str(d1), "--dict", str(d2), "--features", str(features),
             "--order", "0", "--multiscale", "4,3", "--out", str(stack)]
        )
        assert code == EXIT_OK
        sidecar = json.loads(Path(str(stack) + ".json").read_text())
        assert tuple(sidecar["recipe"]["k_values"]) == (4, 3)


class TestEvaluate:
    def write_config(self, path, data_dir, out_dir, extra=""):
        path.write_text(
            f"manifest={data_dir / 'manifest.csv'}\n"
            f"out={out_dir}\n"
            "feature=patch\n"
            "method=svm\n"
            "kernel=chi2\n"
            "k=4\n"
            "folds=3\n"
            "seed=0\n" + extra
        )

    def test_pipeline_and_idempotent_rerun(self, small_dataset, tmp_path):
        config = tmp_path / "run.cfg"
        out_dir = tmp_path / "out"
        self.write_config(config, small_dataset, out_dir)
        assert main(["evaluate", "--config", str(config)]) == EXIT_OK
        first = (out_dir / "results.csv").read_bytes()
        assert main(["evaluate", "--config", str(config)]) == EXIT_OK
        assert (out_dir / "results.csv").read_bytes() == first

    def test_unknown_config_key_rejected(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("manifest=x\nout=y\nbogus_key=1\n")
        with pytest.raises(DataError, match="unknown config key"):
            parse_config_file(config)

    def test_missing_manifest_names_stage(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text(f"manifest={tmp_path / 'none.csv'}\nout={tmp_path / 'o'}\n")
        code = main(["evaluate", "--config", str(config)])
        captured = capsys.readouterr()
        assert code == EXIT_DATA
        assert "[extract]" in captured.err

    def test_dict_per_fold_protocol(self, small_dataset, tmp_path):
        config = tmp_path / "run.cfg"
        out_dir = tmp_path / "outdp"
        self.write_config(config, small_dataset, out_dir, extra="dict_per_fold=true\n")
        assert main(["evaluate", "--config", str(config)]) == EXIT_OK
        rows = [r for r in csv.reader((out_dir / "results.csv").open()) if r and not r[0].startswith("#")]
        header, values = rows[0], rows[1]
        assert values[header.index("dict_per_fold")] == "True"


class TestExitCodes:
    def test_usage_error_is_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["extract", "--method", "bogus", "--manifest", "x", "--out", "y"])
        assert exc.value.code == EXIT_USAGE

    def test_data_error_is_two(self, tmp_path, capsys):
        code = main(["cluster", "--features", str(tmp_path), "--k", "3", "--out", str(tmp_path / "d.mfp1")])
        assert code == EXIT_DATA

    def test_config_echo_written(self, small_dataset, tmp_path):
        config = tmp_path / "run.cfg"
        out_dir = tmp_path / "echo"
        TestEvaluate().write_config(config, small_dataset, out_dir)
        main(["evaluate", "--config", str(config)])
        echo = json.loads((out_dir / "run_config.json").read_text())
        assert echo["method"] == "svm"
        assert echo["k"] == "4"
        head = (out_dir / "results.csv").read_text().splitlines()[0]
        assert head.startswith("# config ")
