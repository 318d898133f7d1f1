"""Trait values with units, and the per-sample record written as one CSV row."""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import pandas as pd

UNITS = ("cm", "cm2", "mm", "mm2", "mm3", "mm-1", "unitless")


@dataclass(frozen=True)
class TraitValue:
    value: Optional[float]
    unit: str = "unitless"
    reason: Optional[str] = None     # set exactly when value is None

    @classmethod
    def null(cls, unit: str, reason: str) -> "TraitValue":
        return cls(None, unit, reason)


@dataclass
class TraitRecord:
    sample_id: str
    dpi: float
    traits: Dict[str, TraitValue] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Optional[float]:
        return self.traits[name].value

    def add(self, name: str, value: Optional[float], unit: str = "unitless") -> None:
        self.traits[name] = TraitValue(None if value is None else float(value), unit)

    def add_null(self, names: Iterable[str], units: Dict[str, str], reason: str) -> None:
        for n in names:
            self.traits[n] = TraitValue.null(units[n], reason)

    def merge(self, other: "TraitRecord") -> "TraitRecord":
        return TraitRecord(self.sample_id, self.dpi, {**self.traits, **other.traits})

    @property
    def null_reasons(self) -> List[str]:
        return sorted({t.reason for t in self.traits.values() if t.reason})

    def to_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {"sample_id": self.sample_id, "dpi": self.dpi}
        row.update({k: t.value for k, t in self.traits.items()})
        row["null_reason"] = ";".join(self.null_reasons)
        return row


def records_frame(records: Iterable[TraitRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records])
