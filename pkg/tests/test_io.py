# tests/test_io.py
"""
Files and run bookkeeping:
- LTNN model container and its version checks
- LTGT genotype container and the tab-separated variant
- key=value configuration parsing and resolution
- RunLogger tables and manifest
- Error codes
"""

from __future__ import annotations
import json
import pathlib
import struct
import tempfile
import unittest

import numpy as np
import pandas as pd

from leaf_pheno.config import RunConfig, build_config, parse_config_text, parse_value, read_config_file
from leaf_pheno.errors import (ConfigError, InputMissingError, LeafPhenoError, ModelVersionError, ShapeError)
from leaf_pheno.domain.nn import dense_spec, init_params
from leaf_pheno.domain.nn.model import Network
from leaf_pheno.domain.stats import GenotypeMatrix
from leaf_pheno.io.containers import (load_genotypes, load_model, read_genotypes_text, save_genotypes, save_model,
                                      write_genotypes_text)
from leaf_pheno.io.logging import RunLogger


def _geno() -> GenotypeMatrix:
    codes = np.array([[0, 1, 2], [2, np.nan, 1], [1, 1, 0], [0, 2, np.nan]], dtype=float)
    return GenotypeMatrix(codes, ["a", "b", "c", "d"], ["x1", "x2", "x3"], [1, 1, 2], [10, 250, 5])


class TestModelContainer(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self.tmp.name)
        spec = dense_spec(16, (4, 8))
        self.net = Network(spec, init_params(spec, 3), (3, 16, 16), "dense_leaf")

    def tearDown(self):
        self.tmp.cleanup()

    def test_saved_network_predicts_identically(self):
        path = self.root / "dense_leaf.ltnn"
        save_model(path, self.net, extra={"threshold": 0.5})
        net, extra = load_model(path)
        x = np.random.default_rng(0).uniform(size=(2, 3, 16, 16))
        np.testing.assert_array_equal(net.predict(x), self.net.predict(x))
        self.assertEqual(extra, {"threshold": 0.5})
        self.assertEqual(net.task, "dense_leaf")
        self.assertEqual(net.tile, 16)

    def test_bad_magic_and_version(self):
        path = self.root / "m.ltnn"
        save_model(path, self.net)
        raw = bytearray(path.read_bytes())
        bumped = bytes(raw[:4]) + struct.pack("<I", 99) + bytes(raw[8:])
        path.write_bytes(bumped)
        with self.assertRaises(ModelVersionError):
            load_model(path)
        path.write_bytes(b"JUNK" + bytes(raw[4:]))
        with self.assertRaises(ModelVersionError):
            load_model(path)

    def test_truncated_model(self):
        path = self.root / "cut.ltnn"
        path.write_bytes(b"LTNN\x01\x00\x00\x00\x05")
        with self.assertRaises(ModelVersionError):
            load_model(path)
        save_model(path, self.net)
        whole = path.read_bytes()
        for cut in (6, 20, len(whole) - 5):
            path.write_bytes(whole[:cut])
            with self.assertRaises(ModelVersionError, msg=f"cut at {cut}"):
                load_model(path)

    def test_missing_file(self):
        with self.assertRaises(InputMissingError):
            load_model(self.root / "absent.ltnn")


class TestGenotypeContainers(unittest.TestCase):

    def test_binary_keeps_missing_calls(self):
        G = _geno()
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "g.ltgt"
            save_genotypes(path, G)
            back = load_genotypes(path)
        np.testing.assert_array_equal(np.isnan(back.codes), np.isnan(G.codes))
        np.testing.assert_array_equal(np.nan_to_num(back.codes, nan=-1), np.nan_to_num(G.codes, nan=-1))
        self.assertEqual(back.sample_ids, G.sample_ids)
        np.testing.assert_array_equal(back.pos, G.pos)

    def test_text_variant(self):
        G = _geno()
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "g.tsv"
            write_genotypes_text(path, G)
            self.assertIn("NA", path.read_text())
            back = read_genotypes_text(path)
            self.assertEqual(back.snp_ids, G.snp_ids)
            np.testing.assert_array_equal(np.isnan(back.codes), np.isnan(G.codes))
            df = pd.read_csv(path, sep="\t")
            df.loc[0, "a"] = 5
            df.to_csv(path, sep="\t", index=False)
            with self.assertRaises(ConfigError):
                read_genotypes_text(path)

    def test_truncated_genotypes(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "g.ltgt"
            save_genotypes(path, _geno())
            whole = path.read_bytes()
            for cut in (10, 20, len(whole) - 3):
                path.write_bytes(whole[:cut])
                with self.assertRaises(ModelVersionError, msg=f"cut at {cut}"):
                    load_genotypes(path)

    def test_wrong_container_kind(self):
        spec = dense_spec(16, (4, 8))
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "model.ltnn"
            save_model(path, Network(spec, init_params(spec), (3, 16, 16), "dense_leaf"))
            with self.assertRaises(ModelVersionError):
                load_genotypes(path)


class TestConfig(unittest.TestCase):

    def test_values(self):
        self.assertEqual(parse_value(" 12 "), 12)
        self.assertEqual(parse_value("0.5"), 0.5)
        self.assertIs(parse_value("yes"), True)
        self.assertEqual(parse_value("oracle"), "oracle")

    def test_text_parsing(self):
        values = parse_config_text("# comment\n\nleaf-masks = out/leaf\nepochs=4\n")
        self.assertEqual(values, {"leaf_masks": "out/leaf", "epochs": 4})
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("seed=1\nbroken line\n")
        self.assertEqual(ctx.exception.context["line"], 2)

    def test_overrides_beat_file_values(self):
        cfg = build_config("synth", {"seed": 1, "n": 4}, {"seed": 9, "jobs": None})
        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.get("n"), 4)
        self.assertEqual(cfg.jobs, 1)
        self.assertEqual(cfg.resolved_run_id, "synth")

    def test_run_id_numbers_stay_strings(self):
        cfg = build_config("gwas", {}, {"run_id": 7})
        self.assertEqual(cfg.resolved_run_id, "7")

    def test_invalid_configs(self):
        with self.assertRaises(ConfigError):
            build_config("train-everything")
        with self.assertRaises(ConfigError):
            build_config("synth", {"jobs": 0})
        with self.assertRaises(ConfigError):
            build_config("synth", {"dpi": -1})
        with self.assertRaises(ConfigError):
            RunConfig(command="gwas").require("genotypes")

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "run.cfg"
            path.write_text("dpi=600\nmodel=oracle\n")
            self.assertEqual(read_config_file(path), {"dpi": 600, "model": "oracle"})
            with self.assertRaises(InputMissingError):
                read_config_file(pathlib.Path(tmp) / "none.cfg")


class TestRunLogger(unittest.TestCase):

    def test_tables_widen_and_manifest_counts_warnings(self):
        with tempfile.TemporaryDirectory() as tmp:
            logger = RunLogger.create(tmp, "r1", command="synth", config={"seed": 0})
            logger.log({"epoch": 0, "train_loss": 1.5})
            logger.log({"epoch": 1, "train_loss": 1.0, "val_loss": np.float64(1.2)})
            logger.record_item("leaf_000")
            logger.record_item("leaf_001", "failed", error="no_foreground")
            payload = logger.finish(samples=2)
            df = pd.read_csv(pathlib.Path(tmp) / "r1" / "history.csv")
            self.assertEqual(list(df.columns), ["epoch", "train_loss", "val_loss"])
            self.assertTrue(np.isnan(df.loc[0, "val_loss"]))
            self.assertEqual(df.loc[1, "val_loss"], 1.2)
            self.assertEqual(payload["warnings"], 1)
            manifest = json.loads((pathlib.Path(tmp) / "r1" / "manifest.json").read_text())
            self.assertEqual(manifest["summary"], {"samples": 2})
            self.assertEqual(manifest["items"][1]["error"], "no_foreground")

    def test_identical_runs_write_identical_manifests(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            for root in (a, b):
                logger = RunLogger.create(root, "same", command="evaluate", config={"k": 1})
                logger.record_item("x")
                logger.finish(jaccard=0.97)
            self.assertEqual((pathlib.Path(a) / "same" / "manifest.json").read_bytes(),
                             (pathlib.Path(b) / "same" / "manifest.json").read_bytes())


class TestErrors(unittest.TestCase):

    def test_exit_codes(self):
        self.assertEqual(InputMissingError("x").exit_code, 2)
        self.assertEqual(ConfigError("x").exit_code, 3)
        self.assertEqual(ModelVersionError("x").exit_code, 4)
        self.assertEqual(ShapeError("x", layer_index=2).exit_code, 3)
        self.assertEqual(LeafPhenoError("x").exit_code, 1)
        self.assertEqual(ConfigError("bad", key="dpi").as_dict(),
                         {"code": "config_error", "message": "bad", "key": "dpi"})


if __name__ == "__main__":
    unittest.main()
