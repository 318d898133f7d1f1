"""Run configuration: a flat key=value file overridden by command-line flags."""
from __future__ import annotations
import pathlib
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from leaf_pheno.errors import ConfigError, InputMissingError
from leaf_pheno.domain.imaging.image import DEFAULT_DPI

COMMANDS = (
    "synth", "train-tracer", "train-grower", "train-dense", "segment-leaf", "segment-veins",
    "segment-dense", "extract-traits", "evaluate", "gwas",
)


class RunConfig(BaseModel):
    """Resolved settings of one command; keys it does not name are kept as extras."""
    model_config = ConfigDict(extra="allow", coerce_numbers_to_str=True)

    command: str
    out: str = "runs"
    run_id: Optional[str] = None
    seed: int = 0
    jobs: int = Field(1, ge=1)
    dpi: float = Field(DEFAULT_DPI, gt=0)

    def get(self, key: str, default: Any = None) -> Any:
        if key in type(self).model_fields:
            return getattr(self, key)
        return (self.model_extra or {}).get(key, default)

    def require(self, key: str) -> Any:
        v = self.get(key)
        if v is None or v == "":
            raise ConfigError(f"'{key}' is required for {self.command}", key=key)
        return v

    @property
    def resolved_run_id(self) -> str:
        return self.run_id or self.command

    def as_dict(self) -> Dict[str, Any]:
        return dict(sorted(self.model_dump().items()))


def parse_value(raw: str) -> Any:
    """int, then float, then bool, else the stripped string."""
    s = raw.strip()
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    if s.lower() in ("true", "yes", "on"):
        return True
    if s.lower() in ("false", "no", "off"):
        return False
    return s


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key=value, got {line!r}", line=n)
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key:
            raise ConfigError(f"{source}:{n}: empty key", line=n)
        out[key] = parse_value(value)
    return out


def read_config_file(path: str | pathlib.Path) -> Dict[str, Any]:
    p = pathlib.Path(path)
    if not p.is_file():
        raise InputMissingError(f"missing config file: {p}", path=str(p))
    return parse_config_text(p.read_text(encoding="utf-8"), str(p))


def build_config(command: str, file_values: Optional[Dict[str, Any]] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values: Dict[str, Any] = dict(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values["command"] = command
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e.errors()[0]['msg']}", errors=len(e.errors())) from e
