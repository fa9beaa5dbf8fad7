"""Versioned JSON text format for fitted models.

Floats are written with ``repr`` precision, so a reloaded model predicts
bit-for-bit identically.
"""
from __future__ import annotations

import json
from pathlib import Path

from .errors import FormatError
from .kernels import kernel_from_dict
from .model import ChangeSurfaceModel
from .warp import ChangeSurface, weight_from_dict

FORMAT = "changesurface-model"
VERSION = 1


def model_to_dict(model: ChangeSurfaceModel, meta: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "regimes": model.r,
        "ndim": model.ndim,
        "noise_var": model.noise_var,
        "y_offset": model.y_offset,
        "kernels": [k.to_dict() for k in model.kernels],
        "weights": [w.to_dict() for w in model.surface.weights],
        "meta": meta or {},
    }


def model_from_dict(d: dict) -> ChangeSurfaceModel:
    if d.get("format") != FORMAT:
        raise FormatError(f"not a {FORMAT} document")
    if d.get("version") != VERSION:
        raise FormatError(f"unsupported version {d.get('version')!r}")
    try:
        kernels = tuple(kernel_from_dict(k) for k in d["kernels"])
        weights = tuple(weight_from_dict(w) for w in d["weights"])
        model = ChangeSurfaceModel(ChangeSurface(weights), kernels, d["noise_var"], d["y_offset"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed model document: {exc}") from None
    if model.r != d["regimes"]:
        raise FormatError("regime count does not match the stored weights")
    return model


def save_model(model: ChangeSurfaceModel, path, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, meta), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> ChangeSurfaceModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return model_from_dict(doc)
