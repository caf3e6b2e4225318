"""Per-episode regret accounting and its lossless CSV serialization."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = ["RegretLedger", "emit_ledger_csv", "parse_ledger_csv"]


@dataclass
class RegretLedger:
    """Per-epoch instantaneous/cumulative regret plus stability counters.

    ``type_i``, ``type_ii`` and ``infeasible`` are cumulative counts; they
    stay zero outside stability episodes. ``decisions`` holds the per-epoch
    decision bit for stability episodes and -1 elsewhere.
    """

    instantaneous: np.ndarray
    pulls: np.ndarray
    decisions: np.ndarray = field(default=None)  # type: ignore[assignment]
    type_i: np.ndarray = field(default=None)  # type: ignore[assignment]
    type_ii: np.ndarray = field(default=None)  # type: ignore[assignment]
    infeasible: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.instantaneous = np.asarray(self.instantaneous, dtype=float)
        t = self.instantaneous.shape[0]
        self.pulls = np.asarray(self.pulls, dtype=np.int64)
        if self.decisions is None:
            self.decisions = np.full(t, -1, dtype=np.int64)
        if self.type_i is None:
            self.type_i = np.zeros(t, dtype=np.int64)
        if self.type_ii is None:
            self.type_ii = np.zeros(t, dtype=np.int64)
        if self.infeasible is None:
            self.infeasible = np.zeros(t, dtype=np.int64)
        for name in ("decisions", "type_i", "type_ii", "infeasible"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.shape[0] != t:
                raise InputError(f"{name} length must match the horizon")
            setattr(self, name, arr)
        for counter in (self.type_i, self.type_ii, self.infeasible):
            if np.any(np.diff(counter) < 0):
                raise InputError("counters must be monotone")

    @property
    def horizon(self) -> int:
        return self.instantaneous.shape[0]

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.instantaneous)

    def final_regret(self) -> float:
        return float(self.instantaneous.sum())

    def __eq__(self, other):
        if not isinstance(other, RegretLedger):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("instantaneous", "pulls", "decisions", "type_i", "type_ii", "infeasible")
        )


def emit_ledger_csv(ledger: RegretLedger) -> str:
    """Two-section CSV: per-epoch rows, then per-arm pull counts."""
    out = io.StringIO()
    out.write("epoch,instantaneous,cumulative,decision,type_i_cum,type_ii_cum,infeasible_cum\n")
    cum = ledger.cumulative
    for t in range(ledger.horizon):
        out.write(
            f"{t + 1},{float(ledger.instantaneous[t])!r},{float(cum[t])!r},{ledger.decisions[t]},"
            f"{ledger.type_i[t]},{ledger.type_ii[t]},{ledger.infeasible[t]}\n"
        )
    out.write("\narm,pulls\n")
    for arm, pulls in enumerate(ledger.pulls):
        out.write(f"{arm},{pulls}\n")
    return out.getvalue()


def parse_ledger_csv(text: str) -> RegretLedger:
    epoch_part, _, pull_part = text.partition("\n\narm,pulls\n")
    lines = epoch_part.strip().splitlines()
    header = "epoch,instantaneous,cumulative,decision,type_i_cum,type_ii_cum,infeasible_cum"
    if not lines or lines[0] != header:
        raise InputError("unrecognized ledger CSV header")
    inst, dec, t1, t2, inf = [], [], [], [], []
    for line in lines[1:]:
        cells = line.split(",")
        inst.append(float(cells[1]))
        dec.append(int(cells[3]))
        t1.append(int(cells[4]))
        t2.append(int(cells[5]))
        inf.append(int(cells[6]))
    pulls = [int(line.split(",")[1]) for line in pull_part.strip().splitlines() if line]
    return RegretLedger(
        instantaneous=np.array(inst),
        pulls=np.array(pulls, dtype=np.int64),
        decisions=np.array(dec, dtype=np.int64),
        type_i=np.array(t1, dtype=np.int64),
        type_ii=np.array(t2, dtype=np.int64),
        infeasible=np.array(inf, dtype=np.int64),
    )
