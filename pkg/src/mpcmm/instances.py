"""Seeded instance generators for experiments and tests.

All generators take a :class:`numpy.random.Generator`; the same seed
always reproduces the same matrices.  Integer values stay below 2**20
so that exact 64-bit arithmetic never overflows at the matrix sizes
this package targets.
"""

from __future__ import annotations

import numpy as np

from .matrix import DenseMatrix, SparseMatrix
from .semiring import SemiringSpec

VALUE_RANGE = 1 << 20


def random_value(spec: SemiringSpec, rng) -> int:
    """A non-zero element of the carrier (never the additive identity)."""
    if spec.name == "bool":
        return 1
    if spec.name == "tropical":
        return int(rng.integers(0, VALUE_RANGE))
    return int(rng.integers(1, VALUE_RANGE))


def random_dense(rows, cols, spec: SemiringSpec, rng) -> DenseMatrix:
    if spec.name == "bool":
        data = rng.integers(0, 2, size=(rows, cols)).astype(np.int64)
    else:
        data = rng.integers(0, VALUE_RANGE, size=(rows, cols)).astype(np.int64)
    return DenseMatrix(rows, cols, data)


def random_d_sparse(n, d, spec: SemiringSpec, rng) -> SparseMatrix:
    """Exactly d entries in every row and every column.

    Superimposes d disjoint shifted permutations: row r gets columns
    (perm[r] + i) mod n for i < d, so row and column counts are both
    exactly d.
    """
    if d > n:
        raise ValueError("requires d <= n")
    perm = rng.permutation(n)
    entries = []
    for r in range(n):
        for i in range(d):
            c = (int(perm[r]) + i) % n
            entries.append((r, c, random_value(spec, rng)))
    return SparseMatrix.from_entries(n, n, entries)


def block_diagonal(n, d, spec: SemiringSpec, rng) -> SparseMatrix:
    """n // d dense d x d blocks along the diagonal."""
    if d > n or n % d:
        raise ValueError("requires d <= n with d dividing n")
    entries = []
    for blk in range(n // d):
        base = blk * d
        for r in range(d):
            for c in range(d):
                entries.append((base + r, base + c, random_value(spec, rng)))
    return SparseMatrix.from_entries(n, n, entries)
