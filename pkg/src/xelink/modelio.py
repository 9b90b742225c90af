"""Model file serialization shared by both disambiguators.

JSON schema, format_version 1:

    {"format_version": 1, "feature_set": "FEAT"|"BASE", "h": int|null,
     "leaky_slope": float|null, "gating": [13 floats]|null,
     "weights": {name: {"shape": [...], "data": [flat floats]}},
     "train_config": {...}}

Linear models store only w_local/w_pair weights and null out the network
fields. Keys are sorted and floats serialized via repr, so identical
models produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from xelink.burn import BurnParams, GatingTable
from xelink.features import FEATURE_DIMS
from xelink.greedy import LinearParams, ModelError

FORMAT_VERSION = 1


def _pack(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": [float(v) for v in arr.reshape(-1)]}


def _unpack(obj: dict) -> np.ndarray:
    return np.array(obj["data"], dtype=np.float64).reshape(obj["shape"])


def save_model(
    path: str | Path,
    model: BurnParams | LinearParams,
    feature_set: str,
    train_config: dict | None = None,
) -> None:
    if feature_set not in FEATURE_DIMS:
        raise ModelError(f"unknown feature set {feature_set!r}")
    if isinstance(model, BurnParams):
        doc = {
            "format_version": FORMAT_VERSION,
            "feature_set": feature_set,
            "h": model.hidden,
            "leaky_slope": model.leaky_slope,
            "gating": [float(v) for v in model.gating.values],
            "weights": {
                name: _pack(arr)
                for name, arr in model.arrays().items()
                if name != "gating"
            },
            "train_config": train_config or {},
        }
    else:
        doc = {
            "format_version": FORMAT_VERSION,
            "feature_set": feature_set,
            "h": None,
            "leaky_slope": None,
            "gating": None,
            "weights": {name: _pack(arr) for name, arr in model.arrays().items()},
            "train_config": train_config or {},
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> tuple[BurnParams | LinearParams, str, dict]:
    """Returns (model, feature_set, train_config); the weight names decide the kind."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"{path}: unknown format_version {doc.get('format_version')!r}")
    feature_set = doc["feature_set"]
    if feature_set not in FEATURE_DIMS:
        raise ModelError(f"{path}: unknown feature set {feature_set!r}")
    weights = {name: _unpack(obj) for name, obj in doc["weights"].items()}
    if "w_l1" in weights:
        model: BurnParams | LinearParams = BurnParams(
            w_l1=weights["w_l1"],
            w_l2=weights["w_l2"],
            w_l3=weights["w_l3"],
            w_g1=weights["w_g1"],
            w_g2=weights["w_g2"],
            w_g3=weights["w_g3"],
            gating=GatingTable(values=np.array(doc["gating"], dtype=np.float64)),
            leaky_slope=float(doc["leaky_slope"]),
        )
    elif "w_local" in weights:
        model = LinearParams(w_local=weights["w_local"], w_pair=weights["w_pair"])
    else:
        raise ModelError(f"{path}: unrecognized weight names {sorted(weights)}")
    return model, feature_set, doc.get("train_config", {})
