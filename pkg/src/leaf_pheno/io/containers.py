"""Binary containers for network parameters (LTNN) and genotype matrices (LTGT).

Both start with four magic bytes and a little-endian u32 format version.
LTNN then holds a JSON header (layer chain, input shape, task, extra metadata)
and a table of named float64 tensors; LTGT holds the sample x SNP u8 code
matrix (255 = missing) followed by a JSON metadata block.
"""
from __future__ import annotations
import contextlib
import json
import pathlib
import struct
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from leaf_pheno.errors import ConfigError, InputMissingError, ModelVersionError
from leaf_pheno.domain.nn.layers import LayerSpec
from leaf_pheno.domain.nn.model import ModelParams, Network
from leaf_pheno.domain.stats.genotype import GenotypeMatrix

MODEL_MAGIC = b"LTNN"
GENO_MAGIC = b"LTGT"
MODEL_VERSION = 1
GENO_VERSION = 1
MISSING_CODE = 255


def _open(path) -> bytes:
    p = pathlib.Path(path)
    if not p.is_file():
        raise InputMissingError(f"missing input file: {p}", path=str(p))
    return p.read_bytes()


@contextlib.contextmanager
def _readable(what: str, path):
    """Truncated or garbled contents surface as a version error, like a foreign file."""
    try:
        yield
    except (struct.error, ValueError, KeyError, TypeError) as e:
        raise ModelVersionError(f"corrupt {what} file {path}: {e}", path=str(path)) from e


def _header(buf: bytes, magic: bytes, version: int, what: str) -> int:
    if buf[:4] != magic:
        raise ModelVersionError(f"not a {what} file (magic {buf[:4]!r})")
    (found,) = struct.unpack_from("<I", buf, 4)
    if found != version:
        raise ModelVersionError(f"{what} format version {found}, expected {version}", found=found)
    return 8


# ---- networks ------------------------------------------------------------------

def save_model(path, net: Network, extra: Optional[Dict[str, Any]] = None) -> None:
    meta = {
        "task": net.task, "input_shape": list(net.input_shape),
        "spec": [layer.to_dict() for layer in net.spec], "extra": extra or {},
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MODEL_MAGIC, struct.pack("<I", MODEL_VERSION), struct.pack("<I", len(blob)), blob,
             struct.pack("<I", len(net.params.tensors))]
    for name, t in net.params.tensors.items():
        raw = name.encode("utf-8")
        parts += [struct.pack("<H", len(raw)), raw, struct.pack("<B", t.ndim),
                  struct.pack(f"<{t.ndim}I", *t.shape), np.ascontiguousarray(t, dtype="<f8").tobytes()]
    pathlib.Path(path).write_bytes(b"".join(parts))


def load_model(path) -> Tuple[Network, Dict[str, Any]]:
    buf = _open(path)
    with _readable("model", path):
        return _parse_model(buf)


def _parse_model(buf: bytes) -> Tuple[Network, Dict[str, Any]]:
    off = _header(buf, MODEL_MAGIC, MODEL_VERSION, "model")
    (n,) = struct.unpack_from("<I", buf, off); off += 4
    meta = json.loads(buf[off:off + n].decode("utf-8")); off += n
    (count,) = struct.unpack_from("<I", buf, off); off += 4
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", buf, off); off += 2
        name = buf[off:off + ln].decode("utf-8"); off += ln
        (ndim,) = struct.unpack_from("<B", buf, off); off += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, off); off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += 8 * size
    spec = [LayerSpec.from_dict(d) for d in meta["spec"]]
    net = Network(spec, ModelParams(tensors), tuple(meta["input_shape"]), meta.get("task", ""))
    return net, meta.get("extra", {})


# ---- genotypes -----------------------------------------------------------------

def _codes_u8(G: GenotypeMatrix) -> np.ndarray:
    out = np.full(G.codes.shape, MISSING_CODE, dtype=np.uint8)
    ok = ~np.isnan(G.codes)
    out[ok] = np.round(G.codes[ok]).astype(np.uint8)
    return out


def save_genotypes(path, G: GenotypeMatrix) -> None:
    n, m = G.codes.shape
    meta = {"sample_ids": list(G.sample_ids), "snp_ids": list(G.snp_ids),
            "chrom": [int(c) for c in G.chrom], "pos": [int(p) for p in G.pos]}
    blob = json.dumps(meta).encode("utf-8")
    pathlib.Path(path).write_bytes(b"".join([
        GENO_MAGIC, struct.pack("<III", GENO_VERSION, n, m), _codes_u8(G).tobytes(),
        struct.pack("<I", len(blob)), blob,
    ]))


def load_genotypes(path) -> GenotypeMatrix:
    buf = _open(path)
    with _readable("genotype", path):
        return _parse_genotypes(buf)


def _parse_genotypes(buf: bytes) -> GenotypeMatrix:
    off = _header(buf, GENO_MAGIC, GENO_VERSION, "genotype")
    n, m = struct.unpack_from("<II", buf, off); off += 8
    raw = np.frombuffer(buf, dtype=np.uint8, count=n * m, offset=off).reshape(n, m); off += n * m
    (ln,) = struct.unpack_from("<I", buf, off); off += 4
    meta = json.loads(buf[off:off + ln].decode("utf-8"))
    bad = (raw > 2) & (raw != MISSING_CODE)
    if bad.any():
        raise ConfigError(f"invalid genotype codes {sorted(set(raw[bad].tolist()))}")
    codes = np.where(raw == MISSING_CODE, np.nan, raw.astype(np.float64))
    return GenotypeMatrix(codes, meta["sample_ids"], meta["snp_ids"],
                          np.asarray(meta["chrom"], dtype=np.int64), np.asarray(meta["pos"], dtype=np.int64))


def write_genotypes_text(path, G: GenotypeMatrix) -> None:
    """Tab-separated, one SNP per row: snp_id, chrom, pos, then one code column per sample (NA = missing)."""
    df = pd.DataFrame(G.codes.T, columns=list(G.sample_ids)).astype("Int64")
    df.insert(0, "pos", G.pos); df.insert(0, "chrom", G.chrom); df.insert(0, "snp_id", list(G.snp_ids))
    df.to_csv(path, sep="\t", index=False, na_rep="NA")


def read_genotypes_text(path) -> GenotypeMatrix:
    p = pathlib.Path(path)
    if not p.is_file():
        raise InputMissingError(f"missing input file: {p}", path=str(p))
    df = pd.read_csv(p, sep="\t", dtype={"snp_id": str})
    samples = [c for c in df.columns if c not in ("snp_id", "chrom", "pos")]
    codes = df[samples].to_numpy(dtype=np.float64).T
    if np.any(~np.isnan(codes) & ~np.isin(codes, (0.0, 1.0, 2.0))):
        raise ConfigError("genotype codes must be 0, 1, 2 or NA")
    return GenotypeMatrix(codes, samples, df["snp_id"].tolist(),
                          df["chrom"].to_numpy(np.int64), df["pos"].to_numpy(np.int64))
