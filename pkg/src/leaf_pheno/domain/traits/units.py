from __future__ import annotations
from dataclasses import dataclass

from leaf_pheno.errors import ConfigError

MM_PER_INCH = 25.4


@dataclass(frozen=True)
class ScaleFactors:
    dpi: float
    mm_per_px: float

    @property
    def cm_per_px(self) -> float:
        return self.mm_per_px / 10.0

    @property
    def mm2_per_px(self) -> float:
        return self.mm_per_px ** 2

    @property
    def cm2_per_px(self) -> float:
        return self.cm_per_px ** 2

    @property
    def mm3_per_px(self) -> float:
        return self.mm_per_px ** 3


def px_to_units(dpi: float) -> ScaleFactors:
    if not dpi > 0:
        raise ConfigError(f"dpi must be positive, got {dpi}", dpi=dpi)
    return ScaleFactors(float(dpi), MM_PER_INCH / float(dpi))
