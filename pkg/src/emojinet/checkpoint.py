"""Single-file checkpoints: one JSON header line, then raw float32 buffers.

The header carries the model config, parameter names/shapes/dtypes (buffer
order), the generator state, and the vocabulary hash; buffers follow in
header order as little-endian float32.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .models import Model, ModelConfig

FORMAT_NAME = "emojinet-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(path, model: Model, vocab_sha256: str, extra: dict | None = None) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "params": [
            {"name": name, "shape": list(p.shape), "dtype": "float32"}
            for name, p in model.params.items()
        ],
        "rng_state": model.rng.get_state(),
        "vocab_sha256": vocab_sha256,
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for p in model.params.values():
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path} is not a {FORMAT_NAME} file")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        arrays = {}
        for spec in header["params"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 4)
            if len(buf) != count * 4:
                raise ValueError(f"{path}: truncated buffer for parameter {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after the last parameter buffer")
    return header, arrays


def restore_model(path) -> tuple[Model, dict]:
    """Rebuild the model from its header config and load the saved weights."""
    header, arrays = load_checkpoint(path)
    model = Model(ModelConfig.from_dict(header["config"]), seed=header["seed"])
    model.load_state_arrays(arrays)
    model.rng.set_state(header["rng_state"])
    return model, header
