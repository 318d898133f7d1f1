from __future__ import annotations
import json
import pathlib
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from PIL import Image

from leaf_pheno.errors import InputMissingError
from leaf_pheno.domain.imaging.image import DEFAULT_DPI, ImageRGB

PathLike = str | pathlib.Path

DEFAULT_RUN_ID = "run"


def ensure_run_dir(root: PathLike = "runs", run_id: Optional[str] = None) -> pathlib.Path:
    """<root>/<run_id>, created if needed."""
    p = pathlib.Path(root)
    p.mkdir(parents=True, exist_ok=True)
    run_id = run_id or DEFAULT_RUN_ID
    d = p / run_id
    d.mkdir(parents=True, exist_ok=True)
    return d


def _existing(path: PathLike) -> pathlib.Path:
    p = pathlib.Path(path)
    if not p.is_file():
        raise InputMissingError(f"missing input file: {p}", path=str(p))
    return p


# ---- PNG --------------------------------------------------------------------

def read_png(path: PathLike, dpi: Optional[float] = None) -> ImageRGB:
    with Image.open(_existing(path)) as im:
        if dpi is None:
            dpi = float(im.info.get("dpi", (DEFAULT_DPI,))[0]) or DEFAULT_DPI
        return ImageRGB(np.asarray(im.convert("RGB")), dpi)


def write_png(path: PathLike, image: ImageRGB) -> None:
    # PNG metadata stays empty so identical pixels give identical bytes
    Image.fromarray(image.pixels).save(pathlib.Path(path), format="PNG")


def read_mask_png(path: PathLike) -> np.ndarray:
    with Image.open(_existing(path)) as im:
        return np.asarray(im.convert("L")) > 127


def write_mask_png(path: PathLike, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(pathlib.Path(path), format="PNG")


def write_prob_png16(path: PathLike, prob: np.ndarray) -> None:
    """Probabilities in [0, 1] scaled to 16-bit greyscale."""
    q = np.round(np.clip(prob, 0.0, 1.0) * 65535).astype(np.uint16)
    Image.fromarray(q).save(pathlib.Path(path), format="PNG")


def read_prob_png16(path: PathLike) -> np.ndarray:
    with Image.open(_existing(path)) as im:
        return np.asarray(im, dtype=np.float64) / 65535.0


# ---- tables -----------------------------------------------------------------

def write_contour_csv(path: PathLike, contour: Sequence[Tuple[int, int]]) -> None:
    pd.DataFrame(list(contour), columns=["row", "col"]).to_csv(path, index=False)


def read_contour_csv(path: PathLike) -> List[Tuple[int, int]]:
    df = pd.read_csv(_existing(path))
    return [(int(r), int(c)) for r, c in zip(df["row"], df["col"])]


def read_table(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(_existing(path))


def write_json(path: PathLike, payload: dict) -> None:
    pathlib.Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
