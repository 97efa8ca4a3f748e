"""Block decomposition of R^n and the two norms used throughout.

The ambient space R^n is treated as a product of ``n_blocks`` Euclidean
factors of sizes ``sizes[0..n_blocks-1]``.  Two norms matter for the
asynchronous iteration: the usual block-Euclidean norm, and the uniform
(max) norm ``max_i ||x_i||`` in which convergence of delayed iterations
is naturally measured.  Blocks are indexed 0..n_blocks-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

__all__ = [
    "BlockStructure",
    "BlockVector",
    "inner_product",
    "euclidean_norm",
    "uniform_norm",
    "block_norms",
]


@dataclass(frozen=True)
class BlockStructure:
    """Partition of R^n into consecutive blocks of the given sizes."""

    sizes: tuple[int, ...]

    def __init__(self, sizes):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) == 0:
            raise ValueError("block structure needs at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n_blocks(self) -> int:
        return len(self.sizes)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        # start offset of each block; cached on first use
        cached = self.__dict__.get("_offsets")
        if cached is None:
            cached = tuple(int(o) for o in np.cumsum((0,) + self.sizes[:-1]))
            self.__dict__["_offsets"] = cached
        return cached

    def block_slice(self, i: int) -> slice:
        if not 0 <= i < self.n_blocks:
            raise IndexError(f"block index {i} out of range for {self.n_blocks} blocks")
        start = self.offsets[i]
        return slice(start, start + self.sizes[i])

    def __repr__(self):
        return f"BlockStructure(sizes={self.sizes})"


class BlockVector:
    """A vector of R^n carrying its block structure.

    The underlying buffer is contiguous float64 and frozen after
    construction, so instances can be shared freely between threads.
    Per-block access returns read-only views into the buffer.
    """

    __slots__ = ("structure", "data")

    def __init__(self, structure: BlockStructure, data):
        arr = np.array(data, dtype=np.float64, copy=True).ravel()
        if arr.size != structure.dim:
            raise DimensionMismatchError(
                f"data length {arr.size} does not match structure dimension {structure.dim}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("BlockVector is immutable")

    @classmethod
    def zeros(cls, structure: BlockStructure) -> "BlockVector":
        return cls(structure, np.zeros(structure.dim))

    @classmethod
    def basis(cls, structure: BlockStructure, index: int) -> "BlockVector":
        data = np.zeros(structure.dim)
        data[index] = 1.0
        return cls(structure, data)

    def block(self, i: int) -> np.ndarray:
        return self.data[self.structure.block_slice(i)]

    def with_block(self, i: int, values) -> "BlockVector":
        out = np.array(self.data, copy=True)
        out[self.structure.block_slice(i)] = values
        return BlockVector(self.structure, out)

    def to_array(self) -> np.ndarray:
        """Writable copy of the underlying buffer."""
        return np.array(self.data, copy=True)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return np.array(self.data, copy=True)
        return np.array(self.data, dtype=dtype, copy=True)

    def __len__(self):
        return self.data.size

    def __add__(self, other):
        _require_same_structure(self, other)
        return BlockVector(self.structure, self.data + other.data)

    def __sub__(self, other):
        _require_same_structure(self, other)
        return BlockVector(self.structure, self.data - other.data)

    def __mul__(self, scalar):
        return BlockVector(self.structure, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return BlockVector(self.structure, -self.data)

    def to_json_dict(self) -> dict:
        return {"sizes": list(self.structure.sizes), "data": self.data.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "BlockVector":
        return cls(BlockStructure(d["sizes"]), d["data"])

    def __repr__(self):
        parts = " | ".join(
            ", ".join(f"{v:g}" for v in self.block(i))
            for i in range(self.structure.n_blocks)
        )
        return f"BlockVector({parts})"


def _require_same_structure(x: BlockVector, y: BlockVector):
    if x.structure != y.structure:
        raise DimensionMismatchError(
            f"block structures differ: {x.structure} vs {y.structure}"
        )


def inner_product(x: BlockVector, y: BlockVector) -> float:
    """Standard inner product, summed block by block."""
    _require_same_structure(x, y)
    return float(np.dot(x.data, y.data))


def euclidean_norm(x: BlockVector) -> float:
    """sqrt of the inner product of x with itself."""
    return math.sqrt(float(np.dot(x.data, x.data)))


def block_norms(x: BlockVector) -> np.ndarray:
    """Euclidean norm of each block, as an array of length n_blocks."""
    return np.array(
        [float(np.linalg.norm(x.block(i))) for i in range(x.structure.n_blocks)]
    )


def uniform_norm(x: BlockVector) -> float:
    """Max over blocks of the per-block Euclidean norm."""
    return float(block_norms(x).max())
