"""Square n x n multiplication on a g x g grid, one barrier per block step.

The grid side is g = ceil(n**(alpha/2)); processor (i, j) owns the
output block C[i, j] and the input blocks A[i, j], B[i, j] of side
n / g.  Block pairs travel through a skewed rotation: in consumption
slot s, processor (i, j) multiplies A[i, x] with B[x, j] for
x = (i + j + s) mod g, then passes the A block one grid column left and
the B block one grid row up.  The skew means every block has exactly
one consumer per slot, so each processor sends and receives at most two
blocks per round instead of broadcasting.

Round count: the first round ships each block to its slot-0 consumer,
slots 0..g-2 occupy rounds 2..g, and the last slot's accumulate happens
after the final barrier, giving exactly g rounds.  A processor's
footprint never exceeds three blocks (its accumulator plus the pair in
flight), which fits the default budget of 4 * tile**2 words.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..engine import MpcConfig
from ..matrix import DenseMatrix, pad_to_multiple
from ..plan import Drop, Mac, Plan, PlanProgram, Send
from ..semiring import SemiringSpec
from .common import Schedule, ceil_pow


@dataclass(frozen=True)
class ProblemShape:
    """Dimensions of one run: n (and d for rectangular cases), alpha."""

    n: int
    alpha: float = 1.0
    d: int = 0

    def __post_init__(self):
        if not 0 <= self.alpha <= 2:
            raise ValueError("alpha must lie in [0, 2]")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def grid(self) -> int:
        return max(ceil_pow(self.n, self.alpha / 2), 1)

    @property
    def padded_n(self) -> int:
        return -(-self.n // self.grid) * self.grid

    @property
    def tile(self) -> int:
        return self.padded_n // self.grid

    @property
    def processors(self) -> int:
        return self.grid * self.grid

    @property
    def memory(self) -> int:
        return self.tile * self.tile


def square_rounds_upper(shape: ProblemShape, redistribute: bool = False) -> int:
    """Exact barrier count the square schedule produces."""
    g = shape.grid
    return g + (1 if redistribute and g > 1 else 0)


def schedule_square(
    shape: ProblemShape,
    a: DenseMatrix,
    b: DenseMatrix,
    spec: SemiringSpec,
    redistribute: bool = False,
) -> Schedule:
    """Build the grid program; inputs start block-aligned at their owners.

    With ``redistribute`` the inputs start transposed (processor (i, j)
    holds blocks (j, i)) and one extra round moves them home first,
    demonstrating that any balanced starting layout converts in a single
    exchange.  A single-processor run has nothing to move, so the flag
    is ignored at g = 1.
    """
    n = shape.n
    if a.rows != n or a.cols != n or b.rows != n or b.cols != n:
        raise ValueError(f"inputs must be {n}x{n}")
    g, t = shape.grid, shape.tile
    # Pad to the full grid extent g * t, which can exceed the next tile
    # multiple when ceil(n / g) rounds up.
    a = pad_to_multiple(a, shape.padded_n, spec)
    b = pad_to_multiple(b, shape.padded_n, spec)

    plan = Plan(num_procs=g * g, num_rounds=0, min_memory=t * t)
    proc = lambda i, j: i * g + j

    def block(m, i, j):
        return m.data[i * t : (i + 1) * t, j * t : (j + 1) * t]

    if g == 1:
        plan.num_rounds = 1
        plan.set_init(0, ("A", 0, 0), block(a, 0, 0))
        plan.set_init(0, ("B", 0, 0), block(b, 0, 0))
        plan.add(1, 0, Mac(("C",), ("A", 0, 0), ("B", 0, 0)), Drop((("A", 0, 0), ("B", 0, 0))))
        plan.emit(0, ("C",), 0, 0, (t, t))
        config = MpcConfig(1, shape.memory)
        program = PlanProgram(plan, spec)
        return Schedule(program, config, shape.padded_n, shape.padded_n, n, n)

    shift = 1 if redistribute and g > 1 else 0
    plan.num_rounds = g + shift

    for i in range(g):
        for j in range(g):
            p = proc(i, j)
            if redistribute:
                # Transposed start: send each block home in one round.
                plan.set_init(p, ("A", j, i), block(a, j, i))
                plan.set_init(p, ("B", j, i), block(b, j, i))
                home = proc(j, i)
                plan.send_or_keep(1, p, home, ("A", j, i), ("B", j, i))
                if home != p:
                    plan.add(1, p, Drop((("A", j, i), ("B", j, i))))
            else:
                plan.set_init(p, ("A", i, j), block(a, i, j))
                plan.set_init(p, ("B", i, j), block(b, i, j))

    for i in range(g):
        for j in range(g):
            p = proc(i, j)
            # Ship the owned pair to its slot-0 consumers.
            r0 = 1 + shift
            a_dst = proc(i, (j - i) % g)
            b_dst = proc((i - j) % g, j)
            plan.send_or_keep(r0, p, a_dst, ("A", i, j))
            plan.send_or_keep(r0, p, b_dst, ("B", i, j))
            drops = [k for k, dst in ((("A", i, j), a_dst), (("B", i, j), b_dst)) if dst != p]
            if drops:
                plan.add(r0, p, Drop(tuple(drops)))

            for s in range(g):
                x = (i + j + s) % g
                akey, bkey = ("A", i, x), ("B", x, j)
                ops = [Mac(("C", i, j), akey, bkey)]
                if s < g - 1:
                    rnd = s + 2 + shift
                    plan.add(rnd, p, *ops)
                    plan.send_or_keep(rnd, p, proc(i, (j - 1) % g), akey)
                    plan.send_or_keep(rnd, p, proc((i - 1) % g, j), bkey)
                    plan.add(rnd, p, Drop((akey, bkey)))
                else:
                    plan.at_final(p, *ops, Drop((akey, bkey)))
            plan.emit(p, ("C", i, j), i * t, j * t, (t, t))

    config = MpcConfig(g * g, shape.memory)
    program = PlanProgram(plan, spec)
    return Schedule(
        program,
        config,
        shape.padded_n,
        shape.padded_n,
        n,
        n,
        meta={"grid": g, "tile": t, "predicted_rounds": square_rounds_upper(shape, redistribute)},
    )
