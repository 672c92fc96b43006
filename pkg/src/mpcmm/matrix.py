"""Dense and sparse matrix storage, tiling and the reference multiply.

Dense matrices wrap a row-major int64 array.  Sparse matrices keep
explicit (row, col, value) triplets and can be checked for d-sparsity
(at most d stored entries in every row and every column).

:func:`naive_multiply` is the term-by-term oracle every round schedule
is compared against; it never shares code with the schedulers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .semiring import SemiringSpec


@dataclass(frozen=True)
class DenseMatrix:
    rows: int
    cols: int
    data: np.ndarray  # shape (rows, cols), int64

    def __post_init__(self):
        if self.data.shape != (self.rows, self.cols):
            raise ValueError(f"data shape {self.data.shape} != ({self.rows}, {self.cols})")

    @staticmethod
    def from_rows(rows_of_values) -> "DenseMatrix":
        arr = np.asarray(rows_of_values, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d list of values")
        return DenseMatrix(arr.shape[0], arr.shape[1], arr)

    @staticmethod
    def zeros(rows, cols, spec: SemiringSpec) -> "DenseMatrix":
        return DenseMatrix(rows, cols, spec.zeros(rows, cols))

    def __eq__(self, other):
        return (
            isinstance(other, DenseMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and bool(np.array_equal(self.data, other.data))
        )


@dataclass(frozen=True)
class SparseMatrix:
    rows: int
    cols: int
    entries: tuple  # ((row, col, value), ...) sorted by (row, col)

    def __post_init__(self):
        seen = set()
        for r, c, _ in self.entries:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ValueError(f"entry ({r}, {c}) out of range")
            if (r, c) in seen:
                raise ValueError(f"duplicate entry at ({r}, {c})")
            seen.add((r, c))

    @staticmethod
    def from_entries(rows, cols, entries) -> "SparseMatrix":
        ordered = tuple(sorted((int(r), int(c), int(v)) for r, c, v in entries))
        return SparseMatrix(rows, cols, ordered)

    def validate(self, spec: SemiringSpec):
        """Reject entries that store the semiring's zero element."""
        for r, c, v in self.entries:
            if v == spec.zero:
                raise ValueError(f"entry ({r}, {c}) stores the zero element")

    def to_dense(self, spec: SemiringSpec) -> DenseMatrix:
        data = spec.zeros(self.rows, self.cols)
        for r, c, v in self.entries:
            data[r, c] = v
        return DenseMatrix(self.rows, self.cols, data)

    def row_support(self) -> list[list[int]]:
        supp = [[] for _ in range(self.rows)]
        for r, c, _ in self.entries:
            supp[r].append(c)
        return supp

    def col_support(self) -> list[list[int]]:
        supp = [[] for _ in range(self.cols)]
        for r, c, _ in self.entries:
            supp[c].append(r)
        return supp


@dataclass(frozen=True)
class TileIndex:
    """1-based block coordinates: tile (1, 1) is the top-left block."""

    i: int
    j: int
    tile_rows: int
    tile_cols: int


def check_d_sparse(m: SparseMatrix, d: int) -> bool:
    """True iff every row and every column holds at most d entries."""
    row_counts = [0] * m.rows
    col_counts = [0] * m.cols
    for r, c, _ in m.entries:
        row_counts[r] += 1
        col_counts[c] += 1
    return all(n <= d for n in row_counts) and all(n <= d for n in col_counts)


def _as_dense(m, spec: SemiringSpec) -> DenseMatrix:
    if isinstance(m, SparseMatrix):
        return m.to_dense(spec)
    return m


def naive_multiply(a, b, spec: SemiringSpec) -> DenseMatrix:
    """Reference product: C[i, j] = add_k mul(A[i, k], B[k, j])."""
    a = _as_dense(a, spec)
    b = _as_dense(b, spec)
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: ({a.rows}x{a.cols}) * ({b.rows}x{b.cols})")
    return DenseMatrix(a.rows, b.cols, spec.matmul(a.data, b.data))


def pad_to_multiple(m: DenseMatrix, block: int, spec: SemiringSpec) -> DenseMatrix:
    """Round dimensions up to a multiple of ``block``, filling with zero."""
    if block < 1:
        raise ValueError("block must be >= 1")
    rows = -(-m.rows // block) * block
    cols = -(-m.cols // block) * block
    if (rows, cols) == (m.rows, m.cols):
        return m
    data = spec.zeros(rows, cols)
    data[: m.rows, : m.cols] = m.data
    return DenseMatrix(rows, cols, data)


def crop(m: DenseMatrix, rows: int, cols: int) -> DenseMatrix:
    if rows > m.rows or cols > m.cols:
        raise ValueError("crop larger than matrix")
    return DenseMatrix(rows, cols, m.data[:rows, :cols].copy())


def tile(m: DenseMatrix, t: TileIndex) -> DenseMatrix:
    """Extract block (t.i, t.j); the matrix must already be padded."""
    if m.rows % t.tile_rows or m.cols % t.tile_cols:
        raise ValueError("matrix dimensions do not divide by the tile size")
    if not (1 <= t.i <= m.rows // t.tile_rows and 1 <= t.j <= m.cols // t.tile_cols):
        raise ValueError(f"tile ({t.i}, {t.j}) out of range")
    r0 = (t.i - 1) * t.tile_rows
    c0 = (t.j - 1) * t.tile_cols
    return DenseMatrix(
        t.tile_rows, t.tile_cols, m.data[r0 : r0 + t.tile_rows, c0 : c0 + t.tile_cols].copy()
    )


def assemble_tiles(blocks, grid_rows: int, grid_cols: int) -> DenseMatrix:
    """Inverse of :func:`tile`: stitch a grid of equal blocks back together."""
    rows = [np.hstack([blocks[i][j].data for j in range(grid_cols)]) for i in range(grid_rows)]
    data = np.vstack(rows)
    return DenseMatrix(data.shape[0], data.shape[1], data)


def save_matrix(m, path):
    """Write the text format: DENSE/SPARSE header then values (1-indexed)."""
    with open(path, "w") as fh:
        if isinstance(m, DenseMatrix):
            fh.write(f"DENSE {m.rows} {m.cols}\n")
            for r in range(m.rows):
                fh.write(" ".join(str(int(v)) for v in m.data[r]) + "\n")
        else:
            fh.write(f"SPARSE {m.rows} {m.cols} {len(m.entries)}\n")
            for r, c, v in m.entries:
                fh.write(f"{r + 1} {c + 1} {v}\n")


def load_matrix(path):
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValueError(f"{path}: empty matrix file")
    kind = tokens[0]
    if kind == "DENSE":
        rows, cols = int(tokens[1]), int(tokens[2])
        values = [int(t) for t in tokens[3:]]
        if len(values) != rows * cols:
            raise ValueError(f"{path}: expected {rows * cols} values, got {len(values)}")
        return DenseMatrix(rows, cols, np.array(values, dtype=np.int64).reshape(rows, cols))
    if kind == "SPARSE":
        rows, cols, nnz = int(tokens[1]), int(tokens[2]), int(tokens[3])
        body = tokens[4:]
        if len(body) != 3 * nnz:
            raise ValueError(f"{path}: expected {3 * nnz} numbers, got {len(body)}")
        entries = [
            (int(body[3 * i]) - 1, int(body[3 * i + 1]) - 1, int(body[3 * i + 2]))
            for i in range(nnz)
        ]
        return SparseMatrix.from_entries(rows, cols, entries)
    raise ValueError(f"{path}: unknown header {kind!r}")
