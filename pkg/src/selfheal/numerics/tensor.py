"""Dense row-major float64 tensors and named parameter collections.

Tensors are immutable after construction and never hold NaN/Inf. ParamSet is
the unit the optimizers and the gradient machinery operate on: an ordered
(name -> Tensor) map with deterministic lexicographic iteration.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping

import numpy as np

from ..errors import InputError


class Tensor:
    """An immutable dense array of finite float64 values."""

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64, order="C")
        if not np.all(np.isfinite(arr)):
            raise InputError("tensor values must be finite (no NaN/Inf)")
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        """Read-only backing array."""
        return self._values

    @property
    def shape(self) -> tuple[int, ...]:
        return self._values.shape

    @property
    def size(self) -> int:
        return int(self._values.size)

    def tolist(self):
        return self._values.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(
            np.array_equal(self._values, other._values)
        )

    def __hash__(self):
        return hash((self.shape, self._values.tobytes()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    @staticmethod
    def zeros(shape) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=np.float64))

    @staticmethod
    def zeros_like(other: "Tensor") -> "Tensor":
        return Tensor.zeros(other.shape)


class ParamSet(Mapping[str, Tensor]):
    """Ordered, immutable name -> Tensor map.

    Iteration is always lexicographic by name, so reductions over a ParamSet
    are deterministic. Two ParamSets are update-compatible iff their names and
    per-name shapes match exactly.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, Tensor] | Iterable[tuple[str, Tensor]]):
        items = dict(entries)
        for name, tensor in items.items():
            if not isinstance(tensor, Tensor):
                items[name] = Tensor(tensor)
        self._entries: dict[str, Tensor] = {k: items[k] for k in sorted(items)}

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}:{v.shape}" for k, v in self._entries.items())
        return f"ParamSet({inner})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamSet):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self):
        return hash(tuple(self._entries.items()))

    def mismatches(self, other: "ParamSet") -> list[str]:
        """Names present in only one set, or present in both with unequal shapes."""
        bad = sorted(set(self) ^ set(other))
        bad += [k for k in self if k in other and self[k].shape != other[k].shape]
        return sorted(set(bad))

    def compatible_with(self, other: "ParamSet") -> bool:
        return not self.mismatches(other)

    def flatten(self) -> np.ndarray:
        """Concatenate all entries (lexicographic order) into one flat vector."""
        if not self._entries:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate([t.values.ravel() for t in self._entries.values()])

    def like(self, flat: np.ndarray) -> "ParamSet":
        """Rebuild a ParamSet with this set's names/shapes from a flat vector."""
        flat = np.asarray(flat, dtype=np.float64)
        total = sum(t.size for t in self._entries.values())
        if flat.size != total:
            raise InputError(f"flat vector has {flat.size} values, expected {total}")
        out: dict[str, Tensor] = {}
        offset = 0
        for name, tensor in self._entries.items():
            n = tensor.size
            out[name] = Tensor(flat[offset : offset + n].reshape(tensor.shape))
            offset += n
        return ParamSet(out)

    @staticmethod
    def zeros_like(other: "ParamSet") -> "ParamSet":
        return ParamSet({k: Tensor.zeros(v.shape) for k, v in other.items()})
