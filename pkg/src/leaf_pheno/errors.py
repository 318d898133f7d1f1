"""Exception hierarchy shared by every domain module.

Library code raises these; only the command line turns them into exit codes.
"""
from __future__ import annotations
from typing import Optional


class LeafPhenoError(Exception):
    """Base error. `code` is machine readable, `exit_code` is what the CLI returns."""
    code: str = "error"
    exit_code: int = 1

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = context

    def as_dict(self) -> dict:
        return {"code": self.code, "message": str(self), **self.context}


class InputMissingError(LeafPhenoError):
    code = "input_missing"
    exit_code = 2


class ConfigError(LeafPhenoError):
    code = "config_error"
    exit_code = 3


class ModelVersionError(LeafPhenoError):
    code = "version_mismatch"
    exit_code = 4


class ShapeError(ConfigError):
    """Shape mismatch between a batch and a layer chain; names the layer."""
    code = "shape_mismatch"

    def __init__(self, message: str, layer_index: Optional[int] = None):
        super().__init__(message, layer_index=layer_index)
        self.layer_index = layer_index


class NumericalError(LeafPhenoError):
    code = "non_finite"

    def __init__(self, message: str, layer_index: Optional[int] = None):
        super().__init__(message, layer_index=layer_index)
        self.layer_index = layer_index


class EmptyDatasetError(LeafPhenoError):
    code = "empty_dataset"


class NoForegroundError(LeafPhenoError):
    code = "no_foreground"


class NonConvergenceError(LeafPhenoError):
    code = "non_convergence"


class ContourError(LeafPhenoError):
    code = "contour_error"


class EmptyMaskError(LeafPhenoError):
    code = "empty_mask"


class DegenerateInputError(LeafPhenoError):
    code = "degenerate_input"


class SyntheticLeafError(LeafPhenoError):
    code = "degenerate_leaf"
