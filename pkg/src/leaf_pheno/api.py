"""Pipeline controller: one method per command, each writing into its own run directory."""
from __future__ import annotations
import logging
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from leaf_pheno.config import RunConfig
from leaf_pheno.errors import ConfigError, DegenerateInputError, InputMissingError, LeafPhenoError
from leaf_pheno.domain.dense import CnnDense, OracleDense, make_dense_training_set, segment_dense
from leaf_pheno.domain.growing import (CnnGrower, GrowConfig, OracleGrower, make_grower_training_set,
                                       segment_veins)
from leaf_pheno.domain.imaging import AugmentConfig, ImageRGB, SyntheticLeafParams, batch_augmenter, write_fixtures
from leaf_pheno.domain.morphology import connected_components, trace_outer_contour
from leaf_pheno.domain.nn import Network, TrainConfig, dense_spec, grower_spec, tracer_spec, train_model
from leaf_pheno.domain.stats import (blink_gwas, hits_frame, jaccard, ld_prune, manhattan_table,
                                     prepare_phenotype, qq_table, r_squared, recall, simulate_genotypes,
                                     snp_filters, tukey_hsd)
from leaf_pheno.domain.tracing import CnnTracer, OracleTracer, TraceConfig, make_tracer_training_set, stack_samples, trace_leaf
from leaf_pheno.domain.traits import extract_traits, records_frame
from leaf_pheno.io.containers import load_genotypes, load_model, read_genotypes_text, save_genotypes, save_model
from leaf_pheno.io.logging import RunLogger
from leaf_pheno.io.persistence import (read_mask_png, read_png, read_table, write_contour_csv, write_mask_png,
                                       write_prob_png16)

log = logging.getLogger(__name__)

# desk-scale defaults; every one can be overridden by a config key of the same name
TRACER_TILE = 64
TRACER_POINTS = 32
GROWER_TILE = 32
DENSE_TILE = 64
WIDTHS = "8,16,32"
EPOCHS = 30
PATIENCE = 5
VAL_FRACTION = 0.1
MAX_POSITIVES = 1500       # grower positives drawn per training leaf
DENSE_SAMPLES = 48         # dense windows drawn per training leaf
N_SEEDS = 2000
ORACLE_TILE = 128
ORACLE_POINTS = 128


@dataclass
class Sample:
    """One scanned leaf and whatever masks accompany it on disk."""
    sample_id: str
    bottom: pathlib.Path
    top: Optional[pathlib.Path] = None
    leaf_mask: Optional[pathlib.Path] = None
    vein_mask: Optional[pathlib.Path] = None
    dpi: Optional[float] = None


def _opt_path(base: pathlib.Path, value: Any) -> Optional[pathlib.Path]:
    if value is None or (isinstance(value, float) and np.isnan(value)) or value == "":
        return None
    return base / str(value)


def load_suite(data_dir: str | pathlib.Path) -> List[Sample]:
    """Samples of a directory, from manifest.csv when present, else from `*_bottom.png` files."""
    base = pathlib.Path(str(data_dir))
    if not base.is_dir():
        raise InputMissingError(f"missing input directory: {base}", path=str(base))
    manifest = base / "manifest.csv"
    if manifest.is_file():
        df = read_table(manifest)
        samples = [Sample(str(r["sample_id"]), base / str(r["bottom"]), _opt_path(base, r.get("top")),
                          _opt_path(base, r.get("leaf_mask")), _opt_path(base, r.get("vein_mask")),
                          float(r["dpi"]) if "dpi" in r and pd.notna(r["dpi"]) else None)
                   for r in df.to_dict("records")]
    else:
        samples = []
        for p in sorted(base.glob("*_bottom.png")):
            sid = p.name[: -len("_bottom.png")]
            top = base / f"{sid}_top.png"
            samples.append(Sample(sid, p, top if top.is_file() else None))
    if not samples:
        raise InputMissingError(f"no leaf images found in {base}", path=str(base))
    return sorted(samples, key=lambda s: s.sample_id)


def holdout_count(n: int, value: Any) -> int:
    k = max(1, n // 8) if value is None else int(value)
    if not 0 <= k < n:
        raise ConfigError(f"holdout {k} must leave at least one of {n} samples for training", key="holdout")
    return k


def _ints(value: Any) -> Tuple[int, ...]:
    if isinstance(value, int):
        return (value,)
    try:
        return tuple(int(v) for v in str(value).split(","))
    except ValueError as e:
        raise ConfigError(f"expected comma-separated integers, got {value!r}") from e


class PipelineController:
    """Runs one command under a RunConfig and records it through a RunLogger."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.logger = RunLogger.create(config.out, config.resolved_run_id, command=config.command,
                                       config=config.as_dict())
        self.dir = self.logger.dir
        self.rng = np.random.default_rng(config.seed)

    def run(self) -> Dict[str, Any]:
        handler = getattr(self, "cmd_" + self.config.command.replace("-", "_"))
        summary = handler() or {}
        summary.setdefault("warnings", self.logger.warnings)
        payload = self.logger.finish(**summary)
        log.info("[cli] %s finished in %s (%d warnings)", self.config.command, self.dir, self.logger.warnings)
        return payload

    # ---- shared helpers --------------------------------------------------------
    def _get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def _dpi(self, sample: Sample) -> float:
        return sample.dpi or self.config.dpi

    def _image(self, sample: Sample, which: str = "bottom") -> Optional[ImageRGB]:
        path = getattr(sample, which)
        if path is None:
            return None
        return read_png(path, self._dpi(sample))

    def _suite(self) -> List[Sample]:
        return load_suite(self.config.require("data"))

    def _split(self, samples: List[Sample]) -> Tuple[List[Sample], List[Sample]]:
        k = holdout_count(len(samples), self._get("holdout"))
        return samples[: len(samples) - k], samples[len(samples) - k:]

    def _selected(self, samples: List[Sample]) -> List[Sample]:
        split = self._get("split", "all")
        if split == "all":
            return samples
        train, held = self._split(samples)
        if split == "train":
            return train
        if split == "holdout":
            return held
        raise ConfigError(f"split must be all, train or holdout, got {split!r}", key="split")

    def _mask(self, sample: Sample, kind: str, dir_key: str) -> np.ndarray:
        """A leaf or vein mask from `<dir_key>/<id>_<kind>.png`, else the sample's own mask."""
        d = self._get(dir_key)
        if d:
            return read_mask_png(pathlib.Path(str(d)) / f"{sample.sample_id}_{kind}.png")
        path = sample.leaf_mask if kind == "leaf" else sample.vein_mask
        if path is None:
            raise InputMissingError(f"no {kind} mask for {sample.sample_id}; set {dir_key}", key=dir_key)
        return read_mask_png(path)

    def _batch(self, samples: Sequence[Sample], fn: Callable[[Sample], Any]) -> List[Any]:
        """Apply `fn` per sample (in parallel with jobs > 1); failures are recorded and skipped.

        Results and manifest entries follow the input order whatever order the
        workers finish in.
        """
        def guarded(s: Sample) -> Tuple[Sample, Any, Optional[LeafPhenoError]]:
            try:
                return s, fn(s), None
            except LeafPhenoError as e:
                return s, None, e

        if self.config.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                outcomes = list(pool.map(guarded, samples))
        else:
            outcomes = [guarded(s) for s in samples]
        done = []
        for s, row, err in outcomes:
            if err is not None:
                log.warning("[cli] %s skipped: %s (%s)", s.sample_id, err, err.code)
                self.logger.record_item(s.sample_id, "failed", code=err.code, message=str(err))
                continue
            self.logger.record_item(s.sample_id, "ok")
            done.append(row)
        return done

    def _augment(self, displacements: bool):
        if not self._get("augment", True):
            return None
        cfg = AugmentConfig()
        self.logger.config["augmentation"] = cfg.model_dump()
        return batch_augmenter(cfg, displacements)

    def _train_config(self, loss_kind: str, batch_size: int) -> TrainConfig:
        return TrainConfig(epochs=self._get("epochs", EPOCHS), batch_size=self._get("batch_size", batch_size),
                           early_stop_patience=self._get("patience", PATIENCE), seed=self.config.seed,
                           loss_kind=self._get("loss", loss_kind), lr=self._get("lr", 1e-3))

    def _fit(self, spec, samples: List[Tuple[Any, Any]], loss_kind: str, batch_size: int,
             displacements: bool, input_shape: Tuple[int, ...], task: str) -> Tuple[Network, Dict[str, Any]]:
        """Shuffle, split off a validation share, train and log one row per epoch."""
        X, Y = stack_samples(samples)
        order = self.rng.permutation(len(X))
        n_val = max(1, int(round(len(X) * self._get("val_fraction", VAL_FRACTION))))
        if len(X) - n_val < 1:
            raise DegenerateInputError(f"{len(X)} training samples cannot be split for validation")
        val, tr = order[:n_val], order[n_val:]
        log.info("[train] %s: %d training and %d validation samples", task, len(tr), len(val))
        result = train_model(spec, (X[tr], Y[tr]), (X[val], Y[val]), self._train_config(loss_kind, batch_size),
                             augment=self._augment(displacements),
                             on_epoch=lambda row: self.logger.log(row, "history"))
        net = Network(spec, result.params, input_shape, task)
        return net, {"best_epoch": result.best_epoch, "epochs_run": len(result.history),
                     "train_samples": len(tr), "val_samples": len(val)}

    def _load_net(self, key: str, task: str) -> Tuple[Network, Dict[str, Any]]:
        net, extra = load_model(self.config.require(key))
        if not net.task.startswith(task):
            raise ConfigError(f"model {self._get(key)} was trained for {net.task!r}, not {task!r}", key=key)
        return net, extra

    # ---- synth -------------------------------------------------------------------
    def cmd_synth(self) -> Dict[str, Any]:
        size = int(self._get("size", 512))
        params = SyntheticLeafParams(height=size, width=size, dpi=self.config.dpi)
        n = int(self._get("n", 16))
        manifest = write_fixtures(self.dir, n, self.config.seed, params)
        for sid in manifest["sample_id"]:
            self.logger.record_item(str(sid), "ok")
        summary: Dict[str, Any] = {"leaves": n}
        snps = int(self._get("snps", 0))
        if snps > 0:
            summary.update(self._synth_field(manifest["sample_id"].astype(str).tolist(), snps))
        return summary

    def _synth_field(self, sample_ids: List[str], snps: int) -> Dict[str, Any]:
        """Clonal field layout for the synthetic leaves plus genotypes for their genotype ids."""
        clones = int(self._get("clones", 2))
        if clones < 1:
            raise ConfigError("clones must be at least 1", key="clones")
        n = len(sample_ids)
        n_geno = int(np.ceil(n / clones))
        rng = np.random.default_rng(self.config.seed + 1)
        plots = rng.permutation(n)
        field_width = int(self._get("field_width", max(2, int(np.ceil(np.sqrt(n))))))
        G = simulate_genotypes(n_geno, snps, rng)
        geno_ids = list(G.sample_ids)
        field = pd.DataFrame({
            "sample_id": sample_ids,
            "genotype_id": [geno_ids[i // clones] for i in range(n)],
            "row": plots // field_width + 1, "position": plots % field_width + 1,
        })
        field.to_csv(self.dir / "field.csv", index=False)
        save_genotypes(self.dir / "genotypes.ltgt", G)
        log.info("[synth] field of %d plots, %d genotypes x %d SNPs", n, n_geno, snps)
        return {"genotypes": n_geno, "snps": snps}

    # ---- training ------------------------------------------------------------------
    def cmd_train_tracer(self) -> Dict[str, Any]:
        train, held = self._split(self._suite())
        tile = int(self._get("tile", TRACER_TILE))
        n_points = int(self._get("n_points", TRACER_POINTS))
        stride = int(self._get("stride", 4))
        samples = []
        for s in train:
            contour = trace_outer_contour(self._mask(s, "leaf", "leaf_masks"))
            samples += make_tracer_training_set(self._image(s), contour, tile, n_points, self.rng, stride)
        spec = tracer_spec(tile, _ints(self._get("widths", WIDTHS)), n_points=n_points)
        net, info = self._fit(spec, samples, "weighted_mse", 64, True, (4, tile, tile), "tracer")
        step = int(self._get("step", max(1, n_points // 4)))
        extra = {"n_points": n_points, "step": step, "exclude_recent": 2 * step,
                 "closure_radius": max(2.0, tile / 25.6), **info}
        save_model(self.dir / "tracer.ltnn", net, extra)
        return {"model": "tracer.ltnn", "train_leaves": len(train), "holdout_leaves": len(held), **info}

    def cmd_train_grower(self) -> Dict[str, Any]:
        train, held = self._split(self._suite())
        tile = int(self._get("tile", GROWER_TILE))
        samples = []
        for s in train:
            samples += make_grower_training_set(
                self._image(s), self._mask(s, "veins", "vein_masks"), self._mask(s, "leaf", "leaf_masks"),
                self._get("neg_ratio", 10), tile, self.rng, int(self._get("max_positives", MAX_POSITIVES)))
        spec = grower_spec(tile, _ints(self._get("widths", WIDTHS)))
        net, info = self._fit(spec, samples, "focal", 128, False, (3, tile, tile), "grower")
        save_model(self.dir / "grower.ltnn", net, info)
        return {"model": "grower.ltnn", "train_leaves": len(train), "holdout_leaves": len(held), **info}

    def cmd_train_dense(self) -> Dict[str, Any]:
        task = self._task()
        train, held = self._split(self._suite())
        window = int(self._get("tile", DENSE_TILE))
        samples = []
        for s in train:
            leaf = self._mask(s, "leaf", "leaf_masks")
            gt = leaf if task == "leaf" else self._mask(s, "veins", "vein_masks")
            samples += make_dense_training_set(self._image(s), gt, window, int(self._get("n_samples", DENSE_SAMPLES)),
                                               self.rng, reject_mask=leaf)
        spec = dense_spec(window, _ints(self._get("widths", WIDTHS)))
        loss = "bce" if task == "leaf" else "focal"
        net, info = self._fit(spec, samples, loss, 16, False, (3, window, window), f"dense_{task}")
        name = f"dense_{task}.ltnn"
        save_model(self.dir / name, net, info)
        return {"model": name, "train_leaves": len(train), "holdout_leaves": len(held), **info}

    def _task(self) -> str:
        task = self._get("task", "leaf")
        if task not in ("leaf", "vein"):
            raise ConfigError(f"task must be leaf or vein, got {task!r}", key="task")
        return task

    # ---- segmentation ----------------------------------------------------------------
    def _trace_config(self, extra: Dict[str, Any], tile: int) -> TraceConfig:
        n_points = int(self._get("n_points", extra.get("n_points", ORACLE_POINTS)))
        step = int(self._get("step", extra.get("step", max(1, n_points // 4))))
        return TraceConfig(tile_size=tile, n_points=n_points, step=step,
                           burn_in=int(self._get("burn_in", 10)),
                           exclude_recent=int(self._get("exclude_recent", extra.get("exclude_recent", 2 * step))),
                           closure_radius=float(self._get("closure_radius", extra.get("closure_radius", 10.0))))

    def cmd_segment_leaf(self) -> Dict[str, Any]:
        samples = self._selected(self._suite())
        oracle = self.config.require("model") == "oracle"
        if oracle:
            tile = int(self._get("tile", ORACLE_TILE))
            tcfg = self._trace_config({}, tile)
        else:
            net, extra = self._load_net("model", "tracer")
            tcfg = self._trace_config(extra, net.tile)

        def one(s: Sample) -> Dict[str, Any]:
            image = self._image(s)
            if oracle:
                model = OracleTracer(trace_outer_contour(self._mask(s, "leaf", "leaf_masks")), tcfg.tile_size,
                                     tcfg.n_points)
            else:
                model = CnnTracer(net)
            res = trace_leaf(model, image, tcfg)
            write_mask_png(self.dir / f"{s.sample_id}_leaf.png", res.mask)
            write_contour_csv(self.dir / f"{s.sample_id}_contour.csv", res.contour)
            return {"sample_id": s.sample_id, **res.log}

        rows = self._batch(samples, one)
        for row in rows:
            self.logger.log(row, "traces")
        return {"segmented": len(rows), "images": len(samples)}

    def cmd_segment_veins(self) -> Dict[str, Any]:
        samples = self._selected(self._suite())
        oracle = self.config.require("model") == "oracle"
        net = None if oracle else self._load_net("model", "grower")[0]
        gcfg = GrowConfig(n_seeds=int(self._get("n_seeds", N_SEEDS)), seed=self.config.seed)

        def one(s: Sample) -> Dict[str, Any]:
            image = self._image(s)
            body = self._mask(s, "leaf", "leaf_masks")
            model = OracleGrower(self._mask(s, "veins", "vein_masks")) if oracle else CnnGrower(net)
            seg = segment_veins(model, image, body, gcfg)
            write_mask_png(self.dir / f"{s.sample_id}_veins.png", seg.mask)
            write_prob_png16(self.dir / f"{s.sample_id}_vein_prob.png", seg.acc.average())
            return {"sample_id": s.sample_id, "threshold": seg.threshold, "seeds": seg.seeds,
                    "sweep": seg.sweep.assign(sample_id=s.sample_id)}

        rows = self._batch(samples, one)
        for row in rows:
            for rec in row.pop("sweep").to_dict("records"):
                self.logger.log(rec, "sweeps")
            self.logger.log(row, "veins")
        return {"segmented": len(rows), "images": len(samples)}

    def cmd_segment_dense(self) -> Dict[str, Any]:
        task = self._task()
        samples = self._selected(self._suite())
        oracle = self.config.require("model") == "oracle"
        if oracle:
            net, window = None, int(self._get("tile", DENSE_TILE))
        else:
            net = self._load_net("model", f"dense_{task}")[0]
            window = net.tile
        kind = "leaf" if task == "leaf" else "veins"

        def one(s: Sample) -> Dict[str, Any]:
            image = self._image(s)
            model = OracleDense(self._mask(s, kind, f"{task}_masks")) if oracle else CnnDense(net)
            seg = segment_dense(model, image, task, window)
            write_mask_png(self.dir / f"{s.sample_id}_{kind}.png", seg.mask)
            write_prob_png16(self.dir / f"{s.sample_id}_{task}_prob.png", seg.prob)
            return {"sample_id": s.sample_id, "threshold": seg.threshold}

        rows = self._batch(samples, one)
        for row in rows:
            self.logger.log(row, "dense")
        return {"segmented": len(rows), "images": len(samples)}

    # ---- traits ------------------------------------------------------------------------
    def cmd_extract_traits(self) -> Dict[str, Any]:
        samples = self._selected(self._suite())

        def one(s: Sample):
            return extract_traits(s.sample_id, self._mask(s, "leaf", "leaf_masks"),
                                  self._mask(s, "veins", "vein_masks"), self._image(s),
                                  self._image(s, "top"), self._dpi(s))

        records = self._batch(samples, one)
        table = records_frame(records)
        table.to_csv(self.dir / "traits.csv", index=False)
        nulls = int(table["null_reason"].fillna("").astype(bool).sum()) if len(table) else 0
        return {"samples": len(records), "traits": max(0, table.shape[1] - 3), "with_nulls": nulls}

    # ---- evaluation ----------------------------------------------------------------------
    def _prediction_dirs(self) -> List[Tuple[str, pathlib.Path]]:
        out = []
        for part in str(self.config.require("predictions")).split(","):
            name, _, path = part.strip().rpartition("=")
            p = pathlib.Path(path)
            if not p.is_dir():
                raise InputMissingError(f"missing prediction directory: {p}", path=str(p))
            out.append((name or p.name, p))
        return out

    def cmd_evaluate(self) -> Dict[str, Any]:
        task = self._task()
        kind = "leaf" if task == "leaf" else "veins"
        samples = self._selected(self._suite())
        methods = self._prediction_dirs()
        rows: List[Dict[str, Any]] = []
        for s in samples:
            try:
                gt = self._mask(s, kind, "gt_masks")
            except LeafPhenoError as e:
                self.logger.record_item(s.sample_id, "failed", code=e.code, message=str(e))
                continue
            for name, d in methods:
                path = d / f"{s.sample_id}_{kind}.png"
                if not path.is_file():
                    log.warning("[eval] %s has no prediction for %s", name, s.sample_id)
                    self.logger.record_item(f"{name}/{s.sample_id}", "missing")
                    continue
                pred = read_mask_png(path)
                try:
                    row = {"method": name, "sample_id": s.sample_id, "jaccard": jaccard(pred, gt),
                           "recall": recall(pred, gt), "components": connected_components(pred, 8)[1]}
                except LeafPhenoError as e:
                    self.logger.record_item(f"{name}/{s.sample_id}", "failed", code=e.code, message=str(e))
                    continue
                rows.append(row)
                self.logger.log(row, "metrics")
        if not rows:
            raise DegenerateInputError("no prediction could be evaluated")
        df = pd.DataFrame(rows)
        means = df.groupby("method", sort=False)[["jaccard", "recall", "components"]].mean()
        letters = self._tukey(df, [m for m, _ in methods])
        summary: Dict[str, Any] = {}
        for name, m in means.iterrows():
            row = {"method": name, "mean_jaccard": m["jaccard"], "mean_recall": m["recall"],
                   "mean_components": m["components"], "letter": letters.get(name, "")}
            self.logger.log(row, "summary")
            summary[name] = {k: v for k, v in row.items() if k != "method"}
        summary.update(self._caliper_fit())
        return summary

    def _tukey(self, df: pd.DataFrame, order: List[str]) -> Dict[str, str]:
        names = [m for m in order if (df["method"] == m).any()]
        if len(names) < 2:
            return {}
        groups = [df.loc[df["method"] == m, "components"].to_numpy(dtype=float) for m in names]
        try:
            res = tukey_hsd(groups, names=names)
        except DegenerateInputError as e:
            log.warning("[eval] no Tukey grouping: %s", e)
            return {}
        res.pairs.to_csv(self.dir / "tukey.csv", index=False)
        return dict(zip(names, res.letters))

    def _caliper_fit(self) -> Dict[str, Any]:
        """r2 of digital against manual petiole length and width when a caliper table is given."""
        calipers = self._get("calipers")
        if not calipers:
            return {}
        manual = read_table(calipers)
        digital = read_table(self.config.require("traits"))
        both = manual.merge(digital, on="sample_id", how="inner")
        out: Dict[str, Any] = {"caliper_samples": len(both)}
        for col, trait in (("length_cm", "petiole_length_cm"), ("width_cm", "petiole_width_cm")):
            if col not in both or trait not in both:
                continue
            ok = both[[col, trait]].dropna()
            try:
                out[f"r2_{trait}"] = r_squared(ok[col].to_numpy(), ok[trait].to_numpy())
            except DegenerateInputError as e:
                log.warning("[eval] r2 for %s unavailable: %s", trait, e)
        return out

    # ---- association ------------------------------------------------------------------------
    def _phenotype(self) -> pd.DataFrame:
        if self._get("phenotype"):
            table = read_table(self._get("phenotype"))
        else:
            trait = self._get("trait", "vein_density")
            traits = read_table(self.config.require("traits"))
            if trait not in traits:
                raise ConfigError(f"trait {trait!r} is not a column of {self._get('traits')}", key="trait")
            field = read_table(self.config.require("field"))
            table = field.merge(traits[["sample_id", trait]], on="sample_id", how="inner").rename(columns={trait: "value"})
        missing = {"sample_id", "genotype_id", "row", "position", "value"} - set(table.columns)
        if missing:
            raise ConfigError(f"phenotype table lacks columns {sorted(missing)}")
        table["genotype_id"] = table["genotype_id"].astype(str)
        return table.sort_values("sample_id", kind="mergesort").reset_index(drop=True)

    def _genotypes(self):
        path = str(self.config.require("genotypes"))
        return load_genotypes(path) if path.endswith(".ltgt") else read_genotypes_text(path)

    def cmd_gwas(self) -> Dict[str, Any]:
        prep = prepare_phenotype(self._phenotype(), cutoff=float(self._get("mad_cutoff", 6.0)),
                                 lam=self._get("lam", "auto"), spatial=bool(self._get("spatial", True)))
        prep.table.to_csv(self.dir / "phenotype.csv", index=False)
        blups = prep.blup.blups
        blups.rename_axis("genotype_id").reset_index().to_csv(self.dir / "blups.csv", index=False)

        G = self._genotypes()
        keep = [i for i, s in enumerate(G.sample_ids) if s in blups.index]
        if len(keep) < 3:
            raise DegenerateInputError(f"only {len(keep)} genotyped samples have a phenotype")
        hwe = self._get("hwe_p_min", 1e-50)
        G = snp_filters(G.subset(samples=np.asarray(keep)), maf_min=float(self._get("maf_min", 0.05)),
                        hwe_p_min=None if hwe in ("none", False) else float(hwe))
        G = G.select_snps(ld_prune(G, float(self._get("ld_r2", 0.7)), int(self._get("ld_window", 100))))
        y = blups.loc[list(G.sample_ids)].to_numpy()
        hits, state = blink_gwas(G, y, max_iter=int(self._get("max_iter", 10)),
                                 candidate_p=float(self._get("candidate_p", 0.01)),
                                 max_qtn=int(self._get("max_qtn", 20)))
        table = hits_frame(hits)
        table.to_csv(self.dir / "gwas.csv", index=False)
        manhattan_table(hits).to_csv(self.dir / "manhattan.csv", index=False)
        qq_table([h.p_value for h in hits]).to_csv(self.dir / "qq.csv", index=False)
        pd.DataFrame(state.bic_trace, columns=["iteration", "k", "bic"]).to_csv(self.dir / "bic.csv", index=False)
        comps = prep.blup.components
        return {"h2": prep.blup.h2, "sigma2_g": comps.sigma2_g, "sigma2_e": comps.sigma2_e,
                "tps_lambda": prep.tps.lam if prep.tps else None, "samples": G.n_samples, "snps": G.n_snps,
                "qtns": [G.snp_ids[j] for j in state.qtns], "iterations": state.iteration,
                "significant": int((table["fdr_p"] < 0.05).sum())}
