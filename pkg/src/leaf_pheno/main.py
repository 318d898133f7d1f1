"""Command-line entry point: `leaf-pheno <command> [flags]`."""
from __future__ import annotations
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from leaf_pheno import __version__
from leaf_pheno.api import PipelineController
from leaf_pheno.config import COMMANDS, build_config, parse_config_text, read_config_file
from leaf_pheno.errors import LeafPhenoError
from leaf_pheno.io.logging import setup_logging

log = logging.getLogger(__name__)

# command -> (flag, type, help) triples on top of the shared flags; every flag maps to the config key of the same name
COMMAND_FLAGS: Dict[str, List[Tuple[str, type, str]]] = {
    "synth": [("--n", int, "number of leaves"), ("--size", int, "canvas side in pixels"),
              ("--snps", int, "also write a clonal field layout and this many simulated SNPs"),
              ("--clones", int, "clones per genotype in the field layout")],
    "train-tracer": [("--data", str, "fixture directory"), ("--epochs", int, "maximum epochs"), ("--holdout", int, "held-out leaves")],
    "train-grower": [("--data", str, "fixture directory"), ("--epochs", int, "maximum epochs"), ("--holdout", int, "held-out leaves")],
    "train-dense": [("--data", str, "fixture directory"), ("--epochs", int, "maximum epochs"), ("--holdout", int, "held-out leaves"),
                    ("--task", str, "leaf or vein")],
    "segment-leaf": [("--data", str, "image directory"), ("--model", str, "tracer.ltnn path or 'oracle'"),
                     ("--split", str, "all, train or holdout")],
    "segment-veins": [("--data", str, "image directory"), ("--model", str, "grower.ltnn path or 'oracle'"),
                      ("--leaf-masks", str, "directory of <id>_leaf.png masks"), ("--split", str, "all, train or holdout")],
    "segment-dense": [("--data", str, "image directory"), ("--model", str, "dense_<task>.ltnn path or 'oracle'"),
                      ("--task", str, "leaf or vein"), ("--split", str, "all, train or holdout")],
    "extract-traits": [("--data", str, "image directory"), ("--leaf-masks", str, "directory of <id>_leaf.png masks"),
                       ("--vein-masks", str, "directory of <id>_veins.png masks"), ("--split", str, "all, train or holdout")],
    "evaluate": [("--data", str, "directory with ground-truth masks"),
                 ("--predictions", str, "comma-separated [name=]directory list"), ("--task", str, "leaf or vein"),
                 ("--calipers", str, "manual petiole measurements CSV"), ("--traits", str, "traits.csv to compare"),
                 ("--split", str, "all, train or holdout")],
    "gwas": [("--genotypes", str, ".ltgt or tab-separated genotype file"), ("--phenotype", str, "phenotype CSV"),
             ("--traits", str, "traits.csv"), ("--field", str, "field layout CSV"), ("--trait", str, "trait column")],
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key=value configuration file")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--jobs", type=int, help="images processed in parallel")
    shared.add_argument("--dpi", type=float, help="scan resolution when the input does not record one")
    shared.add_argument("--out", help="root of the run directories")
    shared.add_argument("--run-id", help="run directory name (default: the command)")
    shared.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="any other configuration key; repeatable")
    shared.add_argument("--log-level", default="INFO")

    parser = argparse.ArgumentParser(prog="leaf-pheno", description="Leaf and vein phenotyping pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command, parents=[shared])
        for flag, kind, text in COMMAND_FLAGS.get(command, []):
            p.add_argument(flag, type=kind, help=text)
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values keyed like config entries; only `--set` pairs go through the config value parser."""
    skip = {"command", "config", "set", "log_level"}
    out: Dict[str, Any] = {}
    for key, value in vars(args).items():
        if key in skip or value is None:
            continue
        out[key] = value
    if args.set:
        out.update(parse_config_text("\n".join(args.set), "--set"))
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level.upper())
    try:
        file_values = read_config_file(args.config) if args.config else {}
        config = build_config(args.command, file_values, overrides_from(args))
        payload = PipelineController(config).run()
    except LeafPhenoError as e:
        log.error("[cli] %s failed: %s", args.command, e)
        print(json.dumps({"error": e.as_dict()}, sort_keys=True, default=str), file=sys.stderr)
        return e.exit_code
    print(f"{args.command}: {payload['run_id']} ok, {payload['warnings']} warning(s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
