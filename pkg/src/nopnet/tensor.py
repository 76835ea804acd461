"""Parameter storage: named float64 tensors with paired gradient buffers.

Tensors are plain numpy float64 arrays (row-major). ParamSet keeps an ordered
name -> Param map for one network, plus the JSON checkpoint format shared by
the classifier and the Q-network.
"""

import json
import os

import numpy as np

from .errors import ContractError, InputError


class Param:
    """One named tensor and its gradient buffer (same shape, float64)."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size


class ParamSet:
    """Ordered map of parameter name -> Param."""

    def __init__(self):
        self._params = {}

    def add(self, name, value):
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        p = Param(value)
        self._params[name] = p
        return p

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def n_scalars(self):
        return sum(p.size for p in self._params.values())

    def zero_grads(self):
        for p in self._params.values():
            p.grad[...] = 0.0

    def scale_grads(self, factor):
        for p in self._params.values():
            p.grad *= factor

    def check_finite(self, what="values"):
        for name, p in self._params.items():
            arr = p.value if what == "values" else p.grad
            if not np.all(np.isfinite(arr)):
                raise InputError(f"non-finite {what} in parameter {name!r}")

    def copy(self):
        out = ParamSet()
        for name, p in self._params.items():
            q = out.add(name, p.value.copy())
            q.grad[...] = p.grad
        return out

    def congruent_with(self, other):
        if self.names() != other.names():
            return False
        return all(self[n].shape == other[n].shape for n in self.names())


def save_checkpoint(path, params, meta):
    """Write a ParamSet plus metadata as a single JSON document.

    Values are serialized as base-10 float literals via repr, which round-trips
    IEEE doubles exactly (well past the 15 significant digits required).
    """
    doc = {
        "meta": dict(meta),
        "params": {
            name: {"shape": list(p.shape), "data": p.value.ravel().tolist()}
            for name, p in params.items()
        },
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Read a checkpoint; returns (ParamSet, meta dict)."""
    with open(path) as fh:
        doc = json.load(fh)
    params = ParamSet()
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise InputError(
                f"checkpoint parameter {name!r}: {data.size} values for shape {shape}")
        params.add(name, data.reshape(shape))
    return params, doc["meta"]
