"""Versioned model persistence.

A saved model is a single ``.npz`` file: a JSON manifest (format name,
format version, model kind, config) stored as a byte array under
``__manifest__``, plus every learned parameter array under its own key.
Arrays round-trip bit-exactly, so a reloaded model predicts identically.
"""
from __future__ import annotations

import dataclasses
import json

import numpy as np

from .boosting import BoostConfig, BoostModel
from .forest import ForestConfig, ForestModel
from .knn import KnnConfig, KnnModel
from .svm import SvmConfig, SvmModel
from .tree import TreeConfig, TreeModel
from ..errors import SchemaError

FORMAT_NAME = "neurolos-model"
FORMAT_VERSION = 1

_REGISTRY = {
    "knn": (KnnModel, KnnConfig),
    "tree": (TreeModel, TreeConfig),
    "forest": (ForestModel, ForestConfig),
    "boost": (BoostModel, BoostConfig),
    "svm": (SvmModel, SvmConfig),
}


def config_to_dict(config) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(kind: str, payload: dict):
    if kind == "forest":
        payload = dict(payload)
        payload["tree"] = TreeConfig(**payload["tree"])
        return ForestConfig(**payload)
    _, config_cls = _REGISTRY[kind]
    return config_cls(**payload)


def save_model(model, path) -> None:
    """Write a fitted model to ``path`` as a versioned ``.npz`` file."""
    if model.kind not in _REGISTRY:
        raise SchemaError(f"unknown model kind {model.kind!r}")
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "config": config_to_dict(model.config),
    }
    blob = np.frombuffer(json.dumps(manifest, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, __manifest__=blob, **model._state_arrays())


def load_model(path):
    """Reload a model saved by :func:`save_model`."""
    with np.load(path, allow_pickle=False) as archive:
        if "__manifest__" not in archive:
            raise SchemaError(f"{path}: not a model file (missing manifest)")
        manifest = json.loads(bytes(archive["__manifest__"]))
        if manifest.get("format") != FORMAT_NAME:
            raise SchemaError(f"{path}: unexpected format {manifest.get('format')!r}")
        if manifest.get("version") != FORMAT_VERSION:
            raise SchemaError(
                f"{path}: format version {manifest.get('version')} not supported "
                f"(expected {FORMAT_VERSION})")
        kind = manifest.get("kind")
        if kind not in _REGISTRY:
            raise SchemaError(f"{path}: unknown model kind {kind!r}")
        model_cls, _ = _REGISTRY[kind]
        model = model_cls(config_from_dict(kind, manifest["config"]))
        arrays = {name: archive[name] for name in archive.files
                  if name != "__manifest__"}
    model._load_arrays(arrays)
    return model
