"""Seedable counter-based random number generation.

A single Philox generator per consumer keeps runs reproducible: model
initialization draws first (in parameter registration order), then dropout
masks (in forward-call order). Shuffling uses its own stream so changing the
number of dropout calls never perturbs batch order.
"""

from __future__ import annotations

import numpy as np

# Stream ids for independent Philox keys derived from one user seed.
STREAM_MODEL = 0      # parameter init, then dropout masks
STREAM_SHUFFLE = 1    # epoch shuffles
STREAM_DATA = 2       # synthetic data / subsampling helpers


class SeededRNG:
    """Philox-backed generator whose full state round-trips through JSON."""

    def __init__(self, seed: int, stream: int = STREAM_MODEL):
        self.seed = int(seed)
        self.stream = int(stream)
        self._bitgen = np.random.Philox(key=(self.seed & 0xFFFFFFFFFFFFFFFF, self.stream))
        self._gen = np.random.Generator(self._bitgen)

    def uniform(self, low: float, high: float, size, dtype=np.float32) -> np.ndarray:
        return self._gen.uniform(low, high, size=size).astype(dtype)

    def random(self, size) -> np.ndarray:
        """Uniform [0, 1) float64 draws (dropout masks compare against these)."""
        return self._gen.random(size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def choice(self, seq, p=None):
        return self._gen.choice(seq, p=p)

    def get_state(self) -> dict:
        """JSON-serializable snapshot of the generator state."""
        return {"seed": self.seed, "stream": self.stream, "philox": _jsonable(self._bitgen.state)}

    def set_state(self, state: dict) -> None:
        self.seed = int(state["seed"])
        self.stream = int(state["stream"])
        self._bitgen.state = _from_jsonable(state["philox"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.asarray(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    return obj
