"""Versioned binary checkpoint container and model save/load wrappers.

The exact byte layout is documented in docs/checkpoint-format.md. In short:
an 8-byte magic, a fixed little-endian header (format version, encoder dim,
block count, seed), a length-prefixed JSON blob for everything else (model
kind, full config), then a length-prefixed array section of float64 data.
"""

import json
import struct
from typing import Dict, Tuple

import numpy as np

from .config import PipelineConfig

MAGIC = b"CSPNCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, kind: str, dim: int, blocks: int, seed: int,
                    config: dict, params: Dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III q", FORMAT_VERSION, dim, blocks, seed))
        blob = json.dumps({"kind": kind, "config": config}, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype="<f8")
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def _read_exact(fh, size, what):
    data = fh.read(size)
    if len(data) != size:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path) -> Tuple[str, dict, Tuple[int, int, int], Dict[str, np.ndarray]]:
    """Returns (kind, config, (dim, blocks, seed), params)."""
    with open(path, "rb") as fh:
        if _read_exact(fh, len(MAGIC), "magic") != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        version, dim, blocks, seed = struct.unpack("<III q", _read_exact(fh, 20, "header"))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})")
        (blob_len,) = struct.unpack("<I", _read_exact(fh, 4, "config length"))
        meta = json.loads(_read_exact(fh, blob_len, "config").decode("utf-8"))
        (n_arrays,) = struct.unpack("<I", _read_exact(fh, 4, "array count"))
        params: Dict[str, np.ndarray] = {}
        for _ in range(n_arrays):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "array name length"))
            name = _read_exact(fh, name_len, "array name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "array rank"))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, "array shape"))
            count = int(np.prod(shape)) if ndim else 1
            data = _read_exact(fh, 8 * count, f"array data for {name}")
            params[name] = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after array section")
    return meta["kind"], meta["config"], (dim, blocks, seed), params


# ---------------------------------------------------------------------------
# model wrappers

KIND_NER = "ner"
KIND_RE = "re"


def save_model(path, model, kind: str) -> None:
    """Persist a span or relation model: config, seed, and every array."""
    save_checkpoint(path, kind, model.encoder.dim, model.encoder.blocks,
                    model.seed, model.config.to_dict(), model.parameters())


def _load_model(path, expected_kind: str, factory):
    kind, config, (_, _, seed), params = load_checkpoint(path)
    if kind != expected_kind:
        raise CheckpointError(
            f"{path}: checkpoint holds a {kind!r} model, expected {expected_kind!r}")
    model = factory(PipelineConfig.from_dict(config), seed)
    current = model.parameters()
    if set(current) != set(params):
        missing = sorted(set(current) ^ set(params))
        raise CheckpointError(f"{path}: parameter names do not match the config "
                              f"(mismatched: {missing[:5]})")
    for name, value in params.items():
        if current[name].shape != value.shape:
            raise CheckpointError(f"{path}: array {name} has shape {value.shape}, "
                                  f"config implies {current[name].shape}")
        current[name][...] = value
    return model


def save_ner_model(path, model) -> None:
    save_model(path, model, KIND_NER)


def load_ner_model(path):
    from .ner import NerModel
    return _load_model(path, KIND_NER, lambda cfg, seed: NerModel(cfg, seed=seed))


def save_re_model(path, model) -> None:
    save_model(path, model, KIND_RE)


def load_re_model(path):
    from .relation import RelationModel
    return _load_model(path, KIND_RE, lambda cfg, seed: RelationModel(cfg, seed=seed))
