# tests/test_cli.py
"""
End-to-end command runs through main():
- synth fixtures, oracle leaf and vein segmentation, trait extraction
- GWAS from a phenotype table and tab-separated genotypes
- Exit codes for missing inputs, bad configuration and foreign model files
- Per-image failures become manifest warnings, not a failed run
- Identical inputs give identical outputs, whatever the worker count
Training commands run only with LEAF_PHENO_SLOW=1.
"""

from __future__ import annotations
import contextlib
import io
import json
import os
import pathlib
import shutil
import tempfile
import unittest

import numpy as np
import pandas as pd

from leaf_pheno.domain.stats import jaccard, simulate_genotypes
from leaf_pheno.io.containers import load_model, write_genotypes_text
from leaf_pheno.io.persistence import read_mask_png, write_mask_png
from leaf_pheno.main import main

SLOW = os.environ.get("LEAF_PHENO_SLOW") == "1"


def _run(*argv: str) -> int:
    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
        return main(list(argv))


def _manifest(run_dir: pathlib.Path) -> dict:
    return json.loads((run_dir / "manifest.json").read_text())


class TestPipeline(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = pathlib.Path(cls.tmp.name)
        code = _run("synth", "--out", str(cls.root), "--run-id", "fixtures", "--n", "2", "--size", "512",
                    "--seed", "4")
        assert code == 0
        cls.data = cls.root / "fixtures"

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_synth_outputs(self):
        manifest = pd.read_csv(self.data / "manifest.csv")
        self.assertEqual(manifest["sample_id"].tolist(), ["leaf_000", "leaf_001"])
        for col in ("bottom", "top", "leaf_mask", "vein_mask"):
            self.assertTrue((self.data / manifest.loc[0, col]).is_file(), col)
        run = _manifest(self.data)
        self.assertEqual(run["command"], "synth")
        self.assertEqual(run["warnings"], 0)
        self.assertEqual(run["summary"]["leaves"], 2)

    def test_oracle_leaf_segmentation(self):
        code = _run("segment-leaf", "--out", str(self.root), "--data", str(self.data), "--model", "oracle")
        self.assertEqual(code, 0)
        out = self.root / "segment-leaf"
        for sid in ("leaf_000", "leaf_001"):
            pred = read_mask_png(out / f"{sid}_leaf.png")
            gt = read_mask_png(self.data / f"{sid}_leaf.png")
            self.assertGreaterEqual(jaccard(pred, gt), 0.95, sid)
            self.assertTrue((out / f"{sid}_contour.csv").is_file())
        self.assertEqual(len(pd.read_csv(out / "traces.csv")), 2)

    def test_oracle_vein_segmentation(self):
        code = _run("segment-veins", "--out", str(self.root), "--data", str(self.data), "--model", "oracle",
                    "--run-id", "veins")
        self.assertEqual(code, 0)
        out = self.root / "veins"
        gt = read_mask_png(self.data / "leaf_000_veins.png")
        pred = read_mask_png(out / "leaf_000_veins.png")
        self.assertFalse((pred & ~gt).any())
        self.assertTrue((out / "leaf_000_vein_prob.png").is_file())
        self.assertIn("threshold", pd.read_csv(out / "sweeps.csv").columns)

    def test_traits_are_deterministic_across_workers(self):
        for run_id, jobs in (("traits_a", "1"), ("traits_b", "2")):
            self.assertEqual(_run("extract-traits", "--out", str(self.root), "--data", str(self.data),
                                  "--run-id", run_id, "--jobs", jobs), 0)
        a = (self.root / "traits_a" / "traits.csv").read_bytes()
        b = (self.root / "traits_b" / "traits.csv").read_bytes()
        self.assertEqual(a, b)
        table = pd.read_csv(self.root / "traits_a" / "traits.csv")
        self.assertEqual(table["sample_id"].tolist(), ["leaf_000", "leaf_001"])
        self.assertTrue((table["area_cm2"] > 0).all())

    def test_failed_image_is_a_warning(self):
        data = self.root / "broken"
        shutil.copytree(self.data, data, dirs_exist_ok=True)
        write_mask_png(data / "leaf_001_leaf.png", np.zeros((512, 512), bool))
        code = _run("segment-veins", "--out", str(self.root), "--data", str(data), "--model", "oracle",
                    "--run-id", "broken_veins", "--set", "n_seeds=200")
        self.assertEqual(code, 0)
        run = _manifest(self.root / "broken_veins")
        self.assertEqual(run["warnings"], 1)
        failed = [it for it in run["items"] if it["status"] != "ok"]
        self.assertEqual(failed[0]["id"], "leaf_001")
        self.assertEqual(failed[0]["code"], "empty_mask")
        self.assertTrue((self.root / "broken_veins" / "leaf_000_veins.png").is_file())


class TestGwasCommand(unittest.TestCase):

    def test_phenotype_and_text_genotypes(self):
        rng = np.random.default_rng(0)
        G = simulate_genotypes(60, 120, rng)
        clones = 3
        geno = np.repeat(np.arange(60), clones)
        value = 10.0 + 1.5 * G.codes[geno, 7] + rng.normal(scale=0.5, size=len(geno))
        plots = rng.permutation(len(geno))
        table = pd.DataFrame({"sample_id": [f"p{i:03d}" for i in range(len(geno))],
                              "genotype_id": [G.sample_ids[g] for g in geno],
                              "row": plots // 15, "position": plots % 15,
                              "value": value})
        with tempfile.TemporaryDirectory() as tmp:
            root = pathlib.Path(tmp)
            table.to_csv(root / "pheno.csv", index=False)
            write_genotypes_text(root / "geno.tsv", G)
            code = _run("gwas", "--out", tmp, "--genotypes", str(root / "geno.tsv"),
                        "--phenotype", str(root / "pheno.csv"))
            self.assertEqual(code, 0)
            out = root / "gwas"
            self.assertEqual(len(pd.read_csv(out / "blups.csv")), 60)
            hits = pd.read_csv(out / "gwas.csv")
            self.assertTrue(hits["p_value"].is_monotonic_increasing)
            for name in ("manhattan.csv", "qq.csv", "bic.csv", "phenotype.csv"):
                self.assertTrue((out / name).is_file(), name)
            summary = _manifest(out)["summary"]
            self.assertTrue(0.0 <= summary["h2"] <= 1.0)
            self.assertEqual(hits.iloc[0]["snp_id"], G.snp_ids[7])


class TestExitCodes(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = pathlib.Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_missing_input_is_2(self):
        self.assertEqual(_run("segment-leaf", "--out", str(self.root), "--data", str(self.root / "none"),
                              "--model", "oracle"), 2)
        self.assertEqual(_run("synth", "--out", str(self.root), "--config", str(self.root / "none.cfg")), 2)

    def test_bad_configuration_is_3(self):
        self.assertEqual(_run("synth", "--out", str(self.root), "--jobs", "0"), 3)
        (self.root / "bad.cfg").write_text("seed 4\n")
        self.assertEqual(_run("synth", "--out", str(self.root), "--config", str(self.root / "bad.cfg")), 3)

    def test_foreign_model_is_4(self):
        self.assertEqual(_run("synth", "--out", str(self.root), "--run-id", "d", "--n", "1", "--size", "256"), 0)
        junk = self.root / "junk.ltnn"
        junk.write_bytes(b"JUNK\x01\x00\x00\x00")
        self.assertEqual(_run("segment-leaf", "--out", str(self.root), "--data", str(self.root / "d"),
                              "--model", str(junk)), 4)
        cut = self.root / "cut.ltnn"
        cut.write_bytes(b"LTNN\x01\x00\x00\x00\x05")
        self.assertEqual(_run("segment-leaf", "--out", str(self.root), "--data", str(self.root / "d"),
                              "--model", str(cut)), 4)


@unittest.skipUnless(SLOW, "set LEAF_PHENO_SLOW=1 to run training commands")
class TestTraining(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = pathlib.Path(cls.tmp.name)
        assert _run("synth", "--out", str(cls.root), "--run-id", "d", "--n", "3", "--size", "256") == 0
        cls.data = str(cls.root / "d")

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_grower_trains_and_segments(self):
        code = _run("train-grower", "--out", str(self.root), "--data", self.data, "--epochs", "1",
                    "--holdout", "1", "--set", "tile=16", "--set", "widths=4,8", "--set", "max_positives=50")
        self.assertEqual(code, 0)
        net, extra = load_model(self.root / "train-grower" / "grower.ltnn")
        self.assertEqual(net.task, "grower")
        self.assertEqual(extra["epochs_run"], 1)
        code = _run("segment-veins", "--out", str(self.root), "--data", self.data, "--split", "holdout",
                    "--model", str(self.root / "train-grower" / "grower.ltnn"), "--set", "n_seeds=100")
        self.assertEqual(code, 0)

    def test_tracer_and_dense_train(self):
        code = _run("train-tracer", "--out", str(self.root), "--data", self.data, "--epochs", "1",
                    "--set", "tile=32", "--set", "n_points=8", "--set", "widths=4,8", "--set", "stride=50")
        self.assertEqual(code, 0)
        self.assertEqual(load_model(self.root / "train-tracer" / "tracer.ltnn")[0].task, "tracer")
        code = _run("train-dense", "--out", str(self.root), "--data", self.data, "--epochs", "1", "--task", "vein",
                    "--set", "tile=32", "--set", "widths=4,8", "--set", "n_samples=4")
        self.assertEqual(code, 0)
        self.assertEqual(load_model(self.root / "train-dense" / "dense_vein.ltnn")[0].task, "dense_vein")


if __name__ == "__main__":
    unittest.main()
