"""JSON model files.

Layout::

    {"format": "tcwvnet-model", "version": 1, "seed": int,
     "layers": [{"in": int, "out": int, "activation": "relu"|"linear",
                 "weights": [... out*in values, row-major ...],
                 "biases": [... out values ...]}, ...],
     "norm_stats": {"features": [...], "mean": [...], "std": [...]},
     "adam_state": {"t": int, "m": [[...], ...], "v": [[...], ...]}  # optional
    }

Floats are written with ``repr`` precision, so a save/load round trip is
bit-exact.
"""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from .data import NormStats
from .errors import SchemaError, ShapeError
from .nn import Layer, LayerSpec, MlpParams
from .optim import AdamState

FORMAT = "tcwvnet-model"
VERSION = 1


def params_to_dict(params: MlpParams) -> list[dict]:
    return [{"in": l.spec.input_dim, "out": l.spec.output_dim, "activation": l.spec.activation,
             "weights": [float(v) for v in l.weights.ravel()],
             "biases": [float(v) for v in l.biases]} for l in params.layers]


def params_from_dict(layers: list[dict]) -> MlpParams:
    out = []
    for k, d in enumerate(layers):
        try:
            spec = LayerSpec(int(d["in"]), int(d["out"]), d.get("activation", "relu"))
            w = np.array(d["weights"], dtype=np.float64)
            b = np.array(d["biases"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"layer {k}: {exc}") from None
        if w.size != spec.output_dim * spec.input_dim:
            raise ShapeError(f"layer {k}: {w.size} weights for a {spec.input_dim}->{spec.output_dim} layer")
        out.append(Layer(w.reshape(spec.output_dim, spec.input_dim), b, spec))
    return MlpParams(out)


def model_to_dict(params: MlpParams, stats: NormStats, seed: int = 0,
                  adam_state: Optional[AdamState] = None) -> dict:
    doc = {"format": FORMAT, "version": VERSION, "seed": int(seed),
           "layers": params_to_dict(params), "norm_stats": stats.to_dict()}
    if adam_state is not None:
        doc["adam_state"] = {"t": adam_state.t,
                             "m": [[float(v) for v in a.ravel()] for a in adam_state.m],
                             "v": [[float(v) for v in a.ravel()] for a in adam_state.v]}
    return doc


def save_model(path, params: MlpParams, stats: NormStats, seed: int = 0,
               adam_state: Optional[AdamState] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(params, stats, seed, adam_state), fh)
        fh.write("\n")


def load_model(path) -> tuple[MlpParams, NormStats, dict]:
    """Return ``(params, stats, extras)``; extras holds ``seed`` and, if saved, ``adam_state``."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"model file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or "layers" not in doc or "norm_stats" not in doc:
        raise SchemaError(f"{path}: model JSON needs 'layers' and 'norm_stats'")
    params = params_from_dict(doc["layers"])
    stats = NormStats.from_dict(doc["norm_stats"])
    if len(stats.feature_names) != params.input_dim:
        raise ShapeError(f"{path}: norm_stats describe {len(stats.feature_names)} features, "
                         f"network takes {params.input_dim}")
    extras = {"seed": doc.get("seed", 0)}
    if "adam_state" in doc:
        shapes = [a.shape for a in params.arrays()]
        st = doc["adam_state"]
        extras["adam_state"] = AdamState(
            [np.array(a, dtype=np.float64).reshape(s) for a, s in zip(st["m"], shapes)],
            [np.array(a, dtype=np.float64).reshape(s) for a, s in zip(st["v"], shapes)],
            int(st["t"]))
    return params, stats, extras
