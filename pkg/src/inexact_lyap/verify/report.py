"""Machine-readable pass/fail records for the verification checks."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..trace import fmt_float


@dataclass
class CheckItem:
    name: str
    value: float
    bound: float
    passed: bool
    note: str = ""


@dataclass
class CheckReport:
    title: str
    items: list = field(default_factory=list)
    applicable: bool = True
    reason: str = ""

    def add(self, name: str, value: float, bound: float, passed: bool | None = None, note: str = "") -> CheckItem:
        ok = bool(value <= bound) if passed is None else bool(passed)
        item = CheckItem(name, float(value), float(bound), ok, note)
        self.items.append(item)
        return item

    @property
    def failures(self) -> list:
        return [it for it in self.items if not it.passed]

    @property
    def passed(self) -> bool:
        return self.applicable and not self.failures

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["check", "value", "bound", "passed", "note"])
            for it in self.items:
                wr.writerow([it.name, fmt_float(it.value), fmt_float(it.bound), int(it.passed), it.note])

    def text(self) -> str:
        head = f"{self.title}: {'PASS' if self.passed else 'FAIL'}"
        if not self.applicable:
            head += f" (not applicable: {self.reason})"
        lines = [head]
        for it in self.items:
            mark = "ok " if it.passed else "BAD"
            lines.append(f"  [{mark}] {it.name}: {it.value:.3e} <= {it.bound:.3e} {it.note}".rstrip())
        return "\n".join(lines)
