"""Lemma check records and small CSV helpers shared by the CLI and tests."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


@dataclass
class LemmaRecord:
    lemma: str
    seed: int
    measured: float
    bound: float
    passed: bool
    detail: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.measured / self.bound if self.bound else (0.0 if self.measured == 0 else np.inf)


def check(lemma: str, measured: float, bound: float, seed: int = -1, rtol: float = 1e-12, **detail) -> LemmaRecord:
    """Record measured <= bound, allowing rounding slack relative to the bound."""
    ok = bool(measured <= bound * (1 + rtol) + 1e-300)
    return LemmaRecord(lemma, seed, float(measured), float(bound), ok, detail)


def fmt(x) -> str:
    """Stable text form for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def lemma_csv(records: Iterable[LemmaRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lemma", "seed", "measured", "bound", "pass"])
    for r in records:
        w.writerow([r.lemma, fmt(r.seed), fmt(r.measured), fmt(r.bound), fmt(r.passed)])
    return buf.getvalue()


def experiment_csv(params: dict, header: list[str], rows: Iterable[Iterable]) -> str:
    """A param,value block, a blank line, then the data table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "value"])
    for k in sorted(params):
        w.writerow([k, fmt(params[k])])
    w.writerow([])
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()
