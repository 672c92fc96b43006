"""Shared glue between schedule builders, the engine and the harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..engine import MpcConfig, RunResult, run
from ..matrix import DenseMatrix
from ..plan import PlanProgram, assemble_output


def ceil_pow(n: int, exponent: float) -> int:
    """ceil(n**exponent), snapping float noise onto exact integers."""
    value = n**exponent
    nearest = round(value)
    if abs(value - nearest) < 1e-9:
        return int(nearest)
    return math.ceil(value)


@dataclass
class Schedule:
    """A runnable program plus the machine shape it was built for."""

    program: PlanProgram
    config: MpcConfig
    out_rows: int
    out_cols: int
    crop_rows: int
    crop_cols: int
    meta: dict = field(default_factory=dict)
    mask: object = None  # OutputMask for the sparse schedules

    def execute(self, cap_factor=None) -> tuple[RunResult, DenseMatrix]:
        config = self.config
        if cap_factor is not None:
            config = MpcConfig(config.processors, config.memory, cap_factor, config.max_rounds)
        result = run(self.program, config)
        data = assemble_output(result.outputs, self.out_rows, self.out_cols, self.program.spec)
        full = DenseMatrix(self.out_rows, self.out_cols, data)
        if (self.crop_rows, self.crop_cols) != (self.out_rows, self.out_cols):
            full = DenseMatrix(
                self.crop_rows, self.crop_cols, full.data[: self.crop_rows, : self.crop_cols].copy()
            )
        return result, full
