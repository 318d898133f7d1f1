from __future__ import annotations
import csv
import json
import logging
import pathlib
from typing import Any, Dict, List, Optional

import pandas as pd

from .persistence import ensure_run_dir

LOG_FORMAT = "%(levelname)s %(name)s %(message)s"


def setup_logging(level: str | int = "INFO") -> None:
    """Configure the root handler once (command line only; tests rely on capture)."""
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level, format=LOG_FORMAT)
    else:
        root.setLevel(level)


class RunLogger:
    """Per-run record keeper.

    - Writes manifest.json (resolved config, version, per-item status) in the run dir
    - Appends flat row dicts to <table>.csv, widening the header when new keys appear
    Writes are synchronous and in call order, so two identical runs produce
    identical files. Nothing time-dependent is recorded.
    """
    def __init__(self, run_dir: str | pathlib.Path, command: str = "", config: Optional[Dict[str, Any]] = None):
        self.dir = pathlib.Path(run_dir); self.dir.mkdir(parents=True, exist_ok=True)
        self.run_id = self.dir.name
        self.manifest_path = self.dir / "manifest.json"
        self.command = command
        self.config = dict(config or {})
        self.items: List[Dict[str, Any]] = []
        self.summary: Dict[str, Any] = {}
        self._fields: Dict[str, List[str]] = {}
        self._write_manifest()

    @classmethod
    def create(cls, root: str = "runs", run_id: Optional[str] = None, **kw) -> "RunLogger":
        return cls(ensure_run_dir(root, run_id), **kw)

    # ---- rows ----------------------------------------------------------------
    def log(self, frame: Dict[str, Any], table: str = "history") -> None:
        flat = self._flatten(frame)
        path = self.dir / f"{table}.csv"
        fields = self._fields.get(table)
        if fields is None:
            fields = list(flat)
            with open(path, "w", newline="", encoding="utf-8") as f:
                csv.DictWriter(f, fieldnames=fields).writeheader()
            self._fields[table] = fields
        elif any(k not in fields for k in flat):
            fields = fields + sorted(k for k in flat if k not in fields)
            df = pd.read_csv(path)
            df = df.reindex(columns=fields)
            df.to_csv(path, index=False)
            self._fields[table] = fields
        with open(path, "a", newline="", encoding="utf-8") as f:
            csv.DictWriter(f, fieldnames=fields).writerow({k: flat.get(k) for k in fields})

    def record_item(self, item_id: str, status: str = "ok", **info: Any) -> None:
        self.items.append({"id": item_id, "status": status, **info})
        self._write_manifest()

    @property
    def warnings(self) -> int:
        return sum(1 for it in self.items if it["status"] != "ok")

    def finish(self, **summary: Any) -> Dict[str, Any]:
        self.summary.update(summary)
        return self._write_manifest()

    # ---- internals -------------------------------------------------------------
    def _flatten(self, frame: Dict[str, Any], prefix: str = "") -> Dict[str, object]:
        out: Dict[str, object] = {}
        for k, v in frame.items():
            key = f"{prefix}{k}"
            if isinstance(v, dict):
                out.update(self._flatten(v, f"{key}."))
            elif isinstance(v, (int, float, str, bool)) or v is None:
                out[key] = v
            elif hasattr(v, "item"):
                out[key] = v.item()
        return out

    def _write_manifest(self) -> Dict[str, Any]:
        from leaf_pheno import __version__
        payload = {
            "run_id": self.run_id, "command": self.command, "version": __version__,
            "config": self.config, "items": self.items, "warnings": self.warnings,
            "summary": self.summary,
        }
        self.manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
        return payload
