"""Per-outer-step records shared by both outer methods."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

TRACE_COLUMNS = ("j", "shift_re", "shift_im", "tau_k", "inner_iters", "s_norm", "res_comp", "gap_bound", "wall_ms")


def fmt_float(v) -> str:
    """Shortest round-trip text of a float; empty for ``None``."""
    if v is None:
        return ""
    return repr(float(v))


@dataclass
class StepRecord:
    j: int
    shift: complex
    tau_k: float | None  # absolute tolerance requested for ||s_k||; None for direct solves
    inner_iters: int
    s_norm: float
    res_comp: float
    gap_bound: float
    wall_ms: float
    rhs_norm: float = 1.0  # ||right-hand side|| of the solve, for relative reporting


@dataclass
class SolverTrace:
    method: str
    steps: list = field(default_factory=list)
    converged: bool = False
    flags: dict = field(default_factory=dict)
    res0: float = 0.0  # ||B||^2, residual of X = 0

    def append(self, rec: StepRecord) -> None:
        self.steps.append(rec)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def total_inner_iterations(self) -> int:
        return sum(s.inner_iters for s in self.steps)

    def column(self, name: str) -> list:
        return [getattr(s, name) for s in self.steps]

    def rows(self, with_timing: bool = True):
        for s in self.steps:
            yield {
                "j": str(s.j),
                "shift_re": fmt_float(complex(s.shift).real),
                "shift_im": fmt_float(complex(s.shift).imag),
                "tau_k": fmt_float(s.tau_k),
                "inner_iters": str(s.inner_iters),
                "s_norm": fmt_float(s.s_norm),
                "res_comp": fmt_float(s.res_comp),
                "gap_bound": fmt_float(s.gap_bound),
                "wall_ms": f"{s.wall_ms:.3f}" if with_timing else "",
            }

    def to_csv(self, path, with_timing: bool = True) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
            wr.writeheader()
            for row in self.rows(with_timing):
                wr.writerow(row)


def read_trace_csv(path) -> list[dict]:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))
