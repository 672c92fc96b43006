"""Dataflow plans: the instruction set round schedules compile to.

A schedule builder precomputes, per (round, processor), a short list of
ops over a key -> tile store.  The generic :class:`PlanProgram` then
interprets those ops inside the engine's handler.  Keys are tuples such
as ("A", i, q); payloads of bundled sends carry (key, shape) tags so the
receiver can restore tiles into its own store.

Ops::

    Mac(c, a, b)            c  (+)=  a @ b        (semiring block product)
    MulAcc(c, a, b)         c  (+)=  a (*) b      (elementwise)
    Acc(c, src)             c  (+)=  src          (elementwise)
    Assemble(dst, srcs, axis)   concatenate tiles
    Slice(dst, src, rows, cols) copy a sub-block
    Pack(dst, keys, shape)      gather scalars (None -> zero) into a tile
    Send(dst, keys)             bundle the listed tiles to processor dst
    Drop(keys)                  free tiles
    Emit(key, row, col, shape)  finalize only: place a tile in the output

Accumulator destinations that do not exist yet start as zero tiles, so
plans never pre-allocate outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Program
from .semiring import SemiringSpec


@dataclass(frozen=True)
class Mac:
    c: tuple
    a: tuple
    b: tuple


@dataclass(frozen=True)
class MulAcc:
    c: tuple
    a: tuple
    b: tuple


@dataclass(frozen=True)
class Acc:
    c: tuple
    src: tuple


@dataclass(frozen=True)
class AccCell:
    c: tuple
    src: tuple
    index: int  # flat index into src


@dataclass(frozen=True)
class Cell:
    dst: tuple
    src: tuple
    index: int  # flat index into src; dst becomes a (1,) array


@dataclass(frozen=True)
class Assemble:
    dst: tuple
    srcs: tuple
    axis: int


@dataclass(frozen=True)
class Slice:
    dst: tuple
    src: tuple
    rows: tuple
    cols: tuple


@dataclass(frozen=True)
class Pack:
    dst: tuple
    keys: tuple  # scalar keys, None entries become the zero element
    shape: tuple


@dataclass(frozen=True)
class Send:
    dst: int
    keys: tuple


@dataclass(frozen=True)
class Drop:
    keys: tuple


@dataclass(frozen=True)
class Emit:
    key: tuple
    row: int
    col: int
    shape: tuple


@dataclass
class Plan:
    """Per-round, per-processor op lists plus initial state and outputs."""

    num_procs: int
    num_rounds: int
    min_memory: int = 1
    init: dict = field(default_factory=dict)  # proc -> {key: array}
    ops: dict = field(default_factory=dict)  # (round, proc) -> [op]
    final_ops: dict = field(default_factory=dict)  # proc -> [op]
    emits: dict = field(default_factory=dict)  # proc -> [Emit]

    def add(self, round_no, proc, *ops):
        self.ops.setdefault((round_no, proc), []).extend(ops)

    def at_final(self, proc, *ops):
        self.final_ops.setdefault(proc, []).extend(ops)

    def emit(self, proc, key, row, col, shape):
        self.emits.setdefault(proc, []).append(Emit(key, row, col, shape))

    def set_init(self, proc, key, array):
        self.init.setdefault(proc, {})[key] = np.asarray(array, dtype=np.int64)

    def send_or_keep(self, round_no, proc, dst, *keys):
        """Send keys to dst, or keep them in place when dst is the sender."""
        if dst != proc:
            self.add(round_no, proc, Send(dst, tuple(keys)))


class PlanProgram(Program):
    def __init__(self, plan: Plan, spec: SemiringSpec):
        self.plan = plan
        self.spec = spec
        self.num_procs = plan.num_procs
        self.total_rounds = plan.num_rounds
        self.min_memory = plan.min_memory

    def init_state(self, p):
        return dict(self.plan.init.get(p, {}))

    def _merge(self, state, inbox):
        store = dict(state)
        for msg in inbox:
            offset = 0
            for key, shape in msg.tag:
                size = int(np.prod(shape))
                store[key] = msg.payload[offset : offset + size].reshape(shape)
                offset += size
        return store

    def _acc(self, store, key, value):
        if key in store:
            store[key] = self.spec.vadd(store[key], value)
        else:
            store[key] = value

    def _exec(self, store, ops, sends=None):
        spec = self.spec
        for op in ops:
            if isinstance(op, Mac):
                self._acc(store, op.c, spec.matmul(store[op.a], store[op.b]))
            elif isinstance(op, MulAcc):
                self._acc(store, op.c, spec.vmul(store[op.a], store[op.b]))
            elif isinstance(op, Acc):
                self._acc(store, op.c, store[op.src])
            elif isinstance(op, AccCell):
                cell = store[op.src].reshape(-1)[op.index : op.index + 1]
                self._acc(store, op.c, cell)
            elif isinstance(op, Cell):
                store[op.dst] = store[op.src].reshape(-1)[op.index : op.index + 1].copy()
            elif isinstance(op, Assemble):
                store[op.dst] = np.concatenate([store[k] for k in op.srcs], axis=op.axis)
            elif isinstance(op, Slice):
                r0, r1 = op.rows
                c0, c1 = op.cols
                store[op.dst] = store[op.src][r0:r1, c0:c1].copy()
            elif isinstance(op, Pack):
                flat = np.full(int(np.prod(op.shape)), spec.zero, dtype=np.int64)
                for i, key in enumerate(op.keys):
                    if key is not None:
                        flat[i] = store[key].reshape(-1)[0]
                store[op.dst] = flat.reshape(op.shape)
            elif isinstance(op, Send):
                if sends is None:
                    raise ValueError("Send op is not allowed in finalize")
                tag = tuple((k, store[k].shape) for k in op.keys)
                payload = np.concatenate([store[k].ravel() for k in op.keys])
                sends.append((op.dst, tag, payload))
            elif isinstance(op, Drop):
                for k in op.keys:
                    store.pop(k, None)
            else:
                raise TypeError(f"unknown op {op!r}")

    def handler(self, round_no, p, state, inbox):
        store = self._merge(state, inbox)
        sends = []
        self._exec(store, self.plan.ops.get((round_no, p), ()), sends)
        return store, sends

    def finalize(self, p, state, inbox):
        store = self._merge(state, inbox)
        self._exec(store, self.plan.final_ops.get(p, ()))
        out = []
        for e in self.plan.emits.get(p, ()):
            block = store.get(e.key)
            if block is None:
                block = np.full(e.shape, self.spec.zero, dtype=np.int64)
            out.append((e.row, e.col, block.reshape(e.shape)))
        return out


def assemble_output(result_outputs, rows, cols, spec: SemiringSpec) -> np.ndarray:
    """Stitch emitted blocks into a dense array (overlaps are summed)."""
    data = spec.zeros(rows, cols)
    for blocks in result_outputs.values():
        for r0, c0, block in blocks:
            block = np.asarray(block)
            if block.ndim == 1:
                block = block.reshape(1, -1)
            r1, c1 = r0 + block.shape[0], c0 + block.shape[1]
            data[r0:r1, c0:c1] = spec.vadd(data[r0:r1, c0:c1], block)
    return data
