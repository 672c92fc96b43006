"""d-sparse multiplication on n processors with O(d) words each.

Processor r owns row r of A, column r of B, and the masked output row
r.  All factor positions are structural knowledge, so schedules are
wired at build time; only values travel at run time.

Two schedules share the machinery:

* trivial: every processor fetches the B values its pending terms need,
  at most d incoming values and 2d outgoing values per processor per
  round, finishing in O(d) rounds.

* two-phase: a decomposition first carves the term set into layers of
  disjoint dense blocks.  Each layer runs its blocks as parallel dense
  square multiplications (grid side sqrt(d), sqrt(d) + 1 rounds); the
  leftover terms run through the trivial fetch loop.  When the blocks
  would not beat the plain fetch loop the schedule falls back to it, so
  two-phase never costs more rounds than trivial.

The decomposition heuristic groups rows by identical remaining column
support, pairs each group with its strongest output columns, and keeps
a layer only when it covers enough new terms.  Layer and residual
budgets are recorded in the result rather than enforced, since
adversarial instances may simply not cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..engine import MpcConfig
from ..matrix import SparseMatrix, check_d_sparse
from ..plan import AccCell, Assemble, Drop, Mac, MulAcc, Pack, Plan, PlanProgram, Send, Slice
from ..semiring import SemiringSpec
from .common import Schedule
from .rect import _Pending

ROUND_CONSTANT = 8  # C in the layer / residual budget assertions
TRIVIAL_ROUND_CONSTANT = 4  # C_triv: the trivial schedule stays below 4d rounds


@dataclass(frozen=True)
class EpsilonSchedule:
    """Exponent pair steering the two-phase split; eps2 is the chosen one."""

    eps1: float = 0.0
    eps2: float = 0.1

    def __post_init__(self):
        if self.eps1 < 0:
            raise ValueError("eps1 must be >= 0")
        if self.eps1 > self.eps2 or (self.eps1 == self.eps2 != 0):
            raise ValueError("epsilon ordering violated: need 0 <= eps1 < eps2")

    @property
    def epsilon(self) -> float:
        return self.eps2


def _guarded_ceil(value: float) -> int:
    """Ceiling that snaps float noise onto exact integers first."""
    nearest = round(value)
    if abs(value - nearest) < 1e-9:
        return int(nearest)
    return math.ceil(value)


def iteration_budget(eps1: float, eps2: float, d: int, improved: bool = True) -> int:
    """Iterations allowed for the clustered phase at the given exponents.

    The improved bound grows as d**(4 * eps2), the superseded one as
    d**(5 * eps2 - eps1).  eps2 = 0 requests no reduction at all.
    """
    EpsilonSchedule(eps1, eps2)  # validates the ordering
    if eps2 == 0:
        return 1
    exponent = 4 * eps2 if improved else 5 * eps2 - eps1
    return _guarded_ceil(ROUND_CONSTANT * d**exponent)


@dataclass(frozen=True)
class OutputMask:
    """Per output row, the column positions to produce (<= d each way)."""

    n: int
    d: int
    rows: tuple  # rows[r] = sorted tuple of column indices

    def __post_init__(self):
        if len(self.rows) != self.n:
            raise ValueError(f"mask needs {self.n} rows")
        col_use = {}
        for r, cols in enumerate(self.rows):
            if len(cols) > self.d:
                raise ValueError(f"mask row {r} lists {len(cols)} > d columns")
            for j in cols:
                if not 0 <= j < self.n:
                    raise ValueError(f"mask column {j} out of range")
                col_use[j] = col_use.get(j, 0) + 1
        for j, uses in col_use.items():
            if uses > self.d:
                raise ValueError(f"mask column {j} used {uses} > d times")

    def cols(self, r: int) -> tuple:
        return self.rows[r]


def default_mask(a: SparseMatrix, b: SparseMatrix, d: int) -> OutputMask:
    """Pick, per row, the d columns with the most contributing terms."""
    n = a.rows
    b_row_support = [[] for _ in range(n)]
    for k, j, _ in b.entries:
        b_row_support[k].append(j)
    a_row_support = a.row_support()

    col_capacity = [d] * n
    rows = []
    for r in range(n):
        counts = {}
        for k in a_row_support[r]:
            for j in b_row_support[k]:
                counts[j] = counts.get(j, 0) + 1
        ranked = sorted(counts, key=lambda j: (-counts[j], j))
        chosen = []
        for j in ranked:
            if len(chosen) == d:
                break
            if col_capacity[j] > 0:
                chosen.append(j)
                col_capacity[j] -= 1
        rows.append(tuple(sorted(chosen)))
    return OutputMask(n, d, tuple(rows))


@dataclass
class TermLedger:
    """Pending products per masked output entry."""

    total_terms: int
    pending: dict  # (r, j) -> set of inner indices k

    @property
    def remaining_terms(self) -> int:
        return sum(len(ks) for ks in self.pending.values())

    def copy(self) -> "TermLedger":
        return TermLedger(self.total_terms, {rj: set(ks) for rj, ks in self.pending.items()})

    def terms(self):
        for (r, j), ks in sorted(self.pending.items()):
            for k in sorted(ks):
                yield r, k, j


def build_ledger(a: SparseMatrix, b: SparseMatrix, mask: OutputMask) -> TermLedger:
    n = a.rows
    a_row = [[] for _ in range(n)]
    for r, k, _ in a.entries:
        a_row[r].append(k)
    b_row = [set() for _ in range(n)]
    for k, j, _ in b.entries:
        b_row[k].add(j)

    pending = {}
    for r in range(n):
        masked = set(mask.cols(r))
        if not masked:
            continue
        for k in a_row[r]:
            for j in b_row[k] & masked:
                pending.setdefault((r, j), set()).add(k)
    total = sum(len(ks) for ks in pending.values())
    return TermLedger(total, pending)


@dataclass(frozen=True)
class BlockTriple:
    """Disjoint (A rows x inner) * (inner x cols) product inside a layer."""

    rows: tuple
    ks: tuple
    cols: tuple
    terms: tuple  # (r, k, j) triples this block accounts for


@dataclass
class Decomposition:
    layers: list  # list of [BlockTriple]
    residual: TermLedger
    total_terms: int
    layer_budget: int
    residual_budget: int
    block_side: int

    @property
    def covered_terms(self) -> int:
        return sum(len(b.terms) for layer in self.layers for b in layer)

    @property
    def meets_layer_budget(self) -> bool:
        return len(self.layers) <= self.layer_budget

    @property
    def meets_residual_budget(self) -> bool:
        return self.residual.remaining_terms <= self.residual_budget

    def report(self) -> dict:
        return {
            "layers": len(self.layers),
            "layer_budget": self.layer_budget,
            "blocks": sum(len(layer) for layer in self.layers),
            "covered_terms": self.covered_terms,
            "residual_terms": self.residual.remaining_terms,
            "residual_budget": self.residual_budget,
            "meets_layer_budget": self.meets_layer_budget,
            "meets_residual_budget": self.meets_residual_budget,
        }


def _chunks(seq, size):
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def decompose(
    a: SparseMatrix, b: SparseMatrix, mask: OutputMask, eps: EpsilonSchedule
) -> Decomposition:
    """Split the masked term set into dense block layers plus a residual.

    Rows sharing their remaining column support are batched into blocks
    of side sqrt(d)**2 together with their strongest output columns.  A
    layer is kept only when it covers enough new terms to be worth a
    block-multiply pass; budget misses are reported, never raised.
    """
    n, d = mask.n, mask.d
    ledger = build_ledger(a, b, mask)
    remaining = ledger.copy()

    grid = math.isqrt(d) if d >= 1 else 1
    side = max(grid * grid, 1)
    layer_budget = iteration_budget(eps.eps1, eps.eps2, d) if d >= 1 else 1
    residual_budget = math.ceil(ROUND_CONSTANT * n * d ** (2 - eps.eps2)) if d >= 1 else 0
    layer_threshold = n * d ** (2 - eps.eps2) / layer_budget if d >= 1 else 0
    block_threshold = max(side**3 // 4, 1)
    max_blocks = max(n // side, 1)

    b_col_support = {}
    for k, j, _ in b.entries:
        b_col_support.setdefault(j, set()).add(k)

    layers = []
    while len(layers) < layer_budget:
        used_rows, used_ks, used_cols = set(), set(), set()
        blocks = []
        row_support = {}
        for (r, _), ks in remaining.pending.items():
            if ks:
                row_support.setdefault(r, set()).update(ks)
        groups = {}
        for r, ks in row_support.items():
            groups.setdefault(frozenset(ks), []).append(r)

        for sig in sorted(groups, key=lambda s: (-len(groups[s]) * len(s), min(groups[s]))):
            if len(blocks) >= max_blocks:
                break
            rows_avail = sorted(r for r in groups[sig] if r not in used_rows)
            k_full = sorted(k for k in sig if k not in used_ks)
            for k_chunk in _chunks(k_full, side):
                kset = set(k_chunk)
                for r_chunk in _chunks(rows_avail, side):
                    if len(blocks) >= max_blocks:
                        break
                    counts = {}
                    for r in r_chunk:
                        for j in mask.cols(r):
                            if j in used_cols:
                                continue
                            hits = len(remaining.pending.get((r, j), set()) & kset)
                            if hits:
                                counts[j] = counts.get(j, 0) + hits
                    cols = sorted(counts, key=lambda j: (-counts[j], j))[:side]
                    # A dense pass over (rows x k_chunk x cols) computes every
                    # structural term there; all of them must still be pending
                    # or the pass would double-count.  kset is drawn from the
                    # rows' support, so the structural terms for (r, j) within
                    # the block are exactly b's column support meeting kset.
                    ok_cols = []
                    for j in cols:
                        needed = b_col_support.get(j, set()) & kset
                        if all(
                            needed <= remaining.pending.get((r, j), set())
                            for r in r_chunk
                            if j in mask.cols(r)
                        ):
                            ok_cols.append(j)
                    if not ok_cols:
                        continue
                    terms = []
                    for r in r_chunk:
                        masked = set(mask.cols(r))
                        for j in sorted(ok_cols):
                            if j not in masked:
                                continue
                            for k in sorted(remaining.pending.get((r, j), set()) & kset):
                                terms.append((r, k, j))
                    if len(terms) < block_threshold:
                        continue
                    blocks.append(
                        BlockTriple(
                            tuple(r_chunk), tuple(k_chunk), tuple(sorted(ok_cols)), tuple(terms)
                        )
                    )
                    used_rows.update(r_chunk)
                    used_ks.update(k_chunk)
                    used_cols.update(ok_cols)
                    break  # rows of this chunk are used up for the layer

        layer_terms = sum(len(blk.terms) for blk in blocks)
        if not blocks or layer_terms < layer_threshold:
            break
        for blk in blocks:
            for r, k, j in blk.terms:
                remaining.pending[(r, j)].discard(k)
        layers.append(blocks)

    for rj in [rj for rj, ks in remaining.pending.items() if not ks]:
        del remaining.pending[rj]
    return Decomposition(layers, remaining, ledger.total_terms, layer_budget, residual_budget, side)


def _sparse_init(plan: Plan, a: SparseMatrix, b: SparseMatrix):
    for r, k, v in a.entries:
        plan.set_init(r, ("a", r, k), np.array([v], dtype=np.int64))
    for k, j, v in b.entries:
        plan.set_init(j, ("b", k, j), np.array([v], dtype=np.int64))


def _fetch_rounds(plan: Plan, pending: _Pending, terms, d: int, start_round: int) -> int:
    """Greedy value-fetch schedule: owner r pulls b[k, j] from processor j.

    Per round each owner accepts at most d values and each sender ships
    at most 2d, so an owner's d**2 terms and a sender's d**2 duties both
    drain within O(d) rounds.  Returns the number of rounds used; sends
    happen at start_round + 1 .. start_round + rounds.
    """
    remote, local = [], []
    for r, k, j in terms:
        (local if j == r else remote).append((r, k, j))

    quota = max(d, 1)
    recv_load, send_load = {}, {}
    sends = {}  # (round, sender, owner) -> [keys]
    last = 0
    for r, k, j in sorted(remote, key=lambda t: (t[0], t[2], t[1])):
        rd = 1
        while recv_load.get((rd, r), 0) >= quota or send_load.get((rd, j), 0) >= 2 * quota:
            rd += 1
        recv_load[(rd, r)] = recv_load.get((rd, r), 0) + 1
        send_load[(rd, j)] = send_load.get((rd, j), 0) + 1
        sends.setdefault((rd, j, r), []).append(("b", k, j))
        pending.defer(
            start_round + rd + 1,
            r,
            MulAcc(("c", r, j), ("a", r, k), ("b", k, j)),
            Drop((("b", k, j),)),
        )
        last = max(last, rd)

    for (rd, j, r), keys in sorted(sends.items()):
        plan.add(start_round + rd, j, Send(r, tuple(keys)))
    for r, k, j in local:
        plan.at_final(r, MulAcc(("c", r, j), ("a", r, k), ("b", k, j)))
    return last


def _validate_sparse(n, d, a, b, mask):
    if a.rows != n or a.cols != n or b.rows != n or b.cols != n:
        raise ValueError(f"inputs must be {n}x{n}")
    if not check_d_sparse(a, d) or not check_d_sparse(b, d):
        raise ValueError(f"inputs are not {d}-sparse")
    if mask.n != n or mask.d != d:
        raise ValueError("mask does not match the problem shape")


def _emit_masked(plan: Plan, mask: OutputMask):
    for r in range(mask.n):
        for j in mask.cols(r):
            plan.emit(r, ("c", r, j), r, j, (1,))


def schedule_sparse_trivial(
    n, d, a: SparseMatrix, b: SparseMatrix, mask: OutputMask, spec: SemiringSpec
) -> Schedule:
    """One output row per processor; fetch up to d values per round."""
    _validate_sparse(n, d, a, b, mask)
    ledger = build_ledger(a, b, mask)

    plan = Plan(num_procs=n, num_rounds=0, min_memory=max(d, 1))
    pending = _Pending(plan)
    _sparse_init(plan, a, b)
    rounds = _fetch_rounds(plan, pending, list(ledger.terms()), d, 0)
    plan.num_rounds = max(rounds, 1)
    assert plan.num_rounds <= TRIVIAL_ROUND_CONSTANT * max(d, 1), (
        f"fetch plan needs {plan.num_rounds} rounds, over the {4 * d} bound"
    )
    pending.flush_all(plan.num_rounds)
    _emit_masked(plan, mask)

    return Schedule(
        PlanProgram(plan, spec),
        MpcConfig(n, 2 * max(d, 1)),
        n,
        n,
        n,
        n,
        meta={"predicted_rounds": plan.num_rounds, "terms": ledger.total_terms},
        mask=mask,
    )


def schedule_sparse_twophase(
    n,
    d,
    a: SparseMatrix,
    b: SparseMatrix,
    mask: OutputMask,
    eps: EpsilonSchedule,
    spec: SemiringSpec,
) -> Schedule:
    """Dense block layers first, trivial fetch for the residual."""
    _validate_sparse(n, d, a, b, mask)
    decomp = decompose(a, b, mask, eps)
    grid = math.isqrt(decomp.block_side)
    stride = grid + 1

    trivial = schedule_sparse_trivial(n, d, a, b, mask, spec)
    phase1 = len(decomp.layers) * stride

    plan = Plan(num_procs=n, num_rounds=0, min_memory=max(d, 1))
    pending = _Pending(plan)
    _sparse_init(plan, a, b)
    residual_rounds = _fetch_rounds(plan, pending, list(decomp.residual.terms()), d, phase1)
    total = phase1 + residual_rounds

    if not decomp.layers or total > trivial.program.total_rounds:
        trivial.meta.update({"fallback": True, "decomposition": decomp.report()})
        return trivial

    for li, layer in enumerate(decomp.layers):
        _build_layer(plan, pending, layer, li, li * stride + 1, grid, mask, a, b)
    plan.num_rounds = total
    pending.flush_all(plan.num_rounds)
    _emit_masked(plan, mask)

    return Schedule(
        PlanProgram(plan, spec),
        MpcConfig(n, 2 * max(d, 1)),
        n,
        n,
        n,
        n,
        meta={
            "predicted_rounds": plan.num_rounds,
            "fallback": False,
            "trivial_rounds": trivial.program.total_rounds,
            "decomposition": decomp.report(),
        },
        mask=mask,
    )


def _build_layer(plan, pending, layer, li, r0, grid, mask, a: SparseMatrix, b: SparseMatrix):
    """One layer: disjoint dense blocks on grid**2 processors each.

    Rounds r0 .. r0 + grid: value distribution, then the skewed square
    pipeline.  The last slot also scatters finished C rows back to their
    owners, who fold them in one round later (or at finalize).
    """
    side = grid * grid
    a_support = {(r, k) for r, k, _ in a.entries}
    b_support = {(k, j) for k, j, _ in b.entries}

    for bi, blk in enumerate(layer):
        base = bi * side

        def bproc(ti, tj):
            return base + ti * grid + tj

        rows = list(blk.rows) + [None] * (side - len(blk.rows))
        ks = list(blk.ks) + [None] * (side - len(blk.ks))
        cols = list(blk.cols) + [None] * (side - len(blk.cols))

        # Distribution: row/column owners pack their value slices and
        # ship them to each tile's slot-0 consumer.
        for ti in range(grid):
            for tx in range(grid):
                dst = bproc(ti, (tx - ti) % grid)
                for u in range(ti * grid, (ti + 1) * grid):
                    r = rows[u]
                    key = ("xa", li, bi, u, tx)
                    keys = tuple(
                        ("a", r, ks[v])
                        if r is not None and ks[v] is not None and (r, ks[v]) in a_support
                        else None
                        for v in range(tx * grid, (tx + 1) * grid)
                    )
                    if r is None:
                        plan.add(r0, dst, Pack(key, keys, (1, grid)))
                    else:
                        plan.add(r0, r, Pack(key, keys, (1, grid)))
                        if r != dst:
                            plan.add(r0, r, Send(dst, (key,)), Drop((key,)))
        for tx in range(grid):
            for tj in range(grid):
                dst = bproc((tx - tj) % grid, tj)
                for v in range(tj * grid, (tj + 1) * grid):
                    j = cols[v]
                    key = ("xb", li, bi, tx, v)
                    keys = tuple(
                        ("b", ks[u], j)
                        if j is not None and ks[u] is not None and (ks[u], j) in b_support
                        else None
                        for u in range(tx * grid, (tx + 1) * grid)
                    )
                    if j is None:
                        plan.add(r0, dst, Pack(key, keys, (grid, 1)))
                    else:
                        plan.add(r0, j, Pack(key, keys, (grid, 1)))
                        if j != dst:
                            plan.add(r0, j, Send(dst, (key,)), Drop((key,)))

        for ti in range(grid):
            for tj in range(grid):
                p = bproc(ti, tj)
                for s in range(grid):
                    x = (ti + tj + s) % grid
                    akey, bkey = ("XA", li, bi, ti, x), ("XB", li, bi, x, tj)
                    rnd = r0 + 1 + s
                    if s == 0:
                        asrc = tuple(
                            ("xa", li, bi, u, x) for u in range(ti * grid, (ti + 1) * grid)
                        )
                        bsrc = tuple(
                            ("xb", li, bi, x, v) for v in range(tj * grid, (tj + 1) * grid)
                        )
                        plan.add(
                            rnd,
                            p,
                            Assemble(akey, asrc, 0),
                            Assemble(bkey, bsrc, 1),
                            Drop(asrc + bsrc),
                        )
                    plan.add(rnd, p, Mac(("XC", li, bi, ti, tj), akey, bkey))
                    if s < grid - 1:
                        plan.add(rnd, p, Send(bproc(ti, (tj - 1) % grid), (akey,)))
                        plan.add(rnd, p, Send(bproc((ti - 1) % grid, tj), (bkey,)))
                    plan.add(rnd, p, Drop((akey, bkey)))

                # Gather: finished C-tile rows go home to their owners.
                last = r0 + grid
                ckey = ("XC", li, bi, ti, tj)
                for u_local in range(grid):
                    r = rows[ti * grid + u_local]
                    if r is None:
                        continue
                    gkey = ("xg", li, bi, r, tj)
                    plan.add(last, p, Slice(gkey, ckey, (u_local, u_local + 1), (0, grid)))
                    if r != p:
                        plan.add(last, p, Send(r, (gkey,)), Drop((gkey,)))
                    masked = set(mask.cols(r))
                    accs = []
                    for v_local in range(grid):
                        j = cols[tj * grid + v_local]
                        if j is not None and j in masked:
                            accs.append(AccCell(("c", r, j), gkey, v_local))
                    accs.append(Drop((gkey,)))
                    pending.defer(last + 1, r, *accs)
                plan.add(last, p, Drop((ckey,)))
