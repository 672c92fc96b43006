"""Semiring carriers for matrix products.

Every value in the simulator is a 64-bit word; a :class:`SemiringSpec`
decides how words combine.  Three carriers are built in:

* ``int``      -- (+, *, 0) on int64 words
* ``bool``     -- (or, and, 0) on {0, 1} words
* ``tropical`` -- (min, +, +inf) where +inf is the sentinel word
  ``TROPICAL_INF``

Besides the scalar ``add``/``mul``/``zero`` contract, each spec carries
vectorised kernels (elementwise add/mul and a block ``matmul``) so the
simulator and the oracle can run on whole tiles.  Custom semirings built
with :func:`SemiringSpec.from_scalar_ops` fall back to (slow) loops over
the scalar operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Finite tropical values stay far below the sentinel, so min(x + y, INF)
# is exact and INF + INF cannot overflow int64.
TROPICAL_INF = np.int64(1) << 61


@dataclass(frozen=True)
class SemiringSpec:
    """An (add, mul, zero) algebra over 64-bit words, with tile kernels."""

    name: str
    add: Callable[[int, int], int]
    mul: Callable[[int, int], int]
    zero: int
    vadd: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, default=None)
    vmul: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, default=None)
    matmul: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, default=None)

    @staticmethod
    def from_scalar_ops(name, add, mul, zero):
        """Build a spec whose tile kernels loop over the scalar ops."""

        def vadd(x, y):
            out = np.empty_like(x)
            for i, (a, b) in enumerate(zip(x.flat, y.flat)):
                out.flat[i] = add(int(a), int(b))
            return out

        def vmul(x, y):
            out = np.empty_like(x)
            for i, (a, b) in enumerate(zip(x.flat, y.flat)):
                out.flat[i] = mul(int(a), int(b))
            return out

        def matmul(a, b):
            rows, inner = a.shape
            cols = b.shape[1]
            out = np.full((rows, cols), zero, dtype=np.int64)
            for i in range(rows):
                for j in range(cols):
                    acc = zero
                    for k in range(inner):
                        acc = add(acc, mul(int(a[i, k]), int(b[k, j])))
                    out[i, j] = acc
            return out

        return SemiringSpec(name, add, mul, zero, vadd, vmul, matmul)

    def zeros(self, rows, cols=None):
        shape = (rows,) if cols is None else (rows, cols)
        return np.full(shape, self.zero, dtype=np.int64)


def _int_matmul(a, b):
    return a @ b


def _bool_matmul(a, b):
    # Counting matmul then threshold: sums stay far below int64 limits
    # at the matrix sizes this package targets.
    return ((a @ b) > 0).astype(np.int64)


def _trop_add(x, y):
    return np.minimum(x, y)


def _trop_mul(x, y):
    return np.minimum(x + y, TROPICAL_INF)


def _trop_matmul(a, b):
    rows, inner = a.shape
    out = np.full((rows, b.shape[1]), TROPICAL_INF, dtype=np.int64)
    for k in range(inner):
        out = np.minimum(out, np.minimum(a[:, k : k + 1] + b[k : k + 1, :], TROPICAL_INF))
    return out


INTEGER = SemiringSpec(
    name="int",
    add=lambda a, b: a + b,
    mul=lambda a, b: a * b,
    zero=0,
    vadd=lambda x, y: x + y,
    vmul=lambda x, y: x * y,
    matmul=_int_matmul,
)

BOOLEAN = SemiringSpec(
    name="bool",
    add=lambda a, b: a | b,
    mul=lambda a, b: a & b,
    zero=0,
    vadd=lambda x, y: x | y,
    vmul=lambda x, y: x & y,
    matmul=_bool_matmul,
)

TROPICAL = SemiringSpec(
    name="tropical",
    add=lambda a, b: min(a, b),
    mul=lambda a, b: min(a + b, int(TROPICAL_INF)),
    zero=int(TROPICAL_INF),
    vadd=_trop_add,
    vmul=_trop_mul,
    matmul=_trop_matmul,
)


def builtin_semirings() -> list[SemiringSpec]:
    """The built-in carriers: integer, boolean and tropical."""
    return [INTEGER, BOOLEAN, TROPICAL]


def get_semiring(name: str) -> SemiringSpec:
    for spec in builtin_semirings():
        if spec.name == name:
            return spec
    raise KeyError(f"unknown semiring {name!r} (expected one of int, bool, tropical)")
