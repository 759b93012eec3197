"""Detection, location and notification recall over staged-accident trials.

Each ratio is TP / (TP + FN), where every trial contributes exactly one TP or
FN to each of the three metrics. Reports keep the raw counts so they can be
merged exactly across shards.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable


class EmptyTrials(ValueError):
    pass


class DuplicatePlace(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    place_no: int
    detected: bool
    located: bool
    notified: bool

    def __post_init__(self) -> None:
        if not isinstance(self.place_no, int) or self.place_no < 1:
            raise ValueError(f"place_no must be a positive integer, got {self.place_no!r}")


@dataclass(frozen=True)
class AccuracyReport:
    tp_a: int = 0
    fn_a: int = 0
    tp_l: int = 0
    fn_l: int = 0
    tp_n: int = 0
    fn_n: int = 0

    @property
    def n_trials(self) -> int:
        return self.tp_a + self.fn_a

    def _ratio(self, tp: int, fn: int) -> Fraction:
        if tp + fn == 0:
            raise EmptyTrials("ratio of an empty report is undefined")
        return Fraction(tp, tp + fn)

    @property
    def d_a(self) -> float:
        return float(self._ratio(self.tp_a, self.fn_a))

    @property
    def t_l(self) -> float:
        return float(self._ratio(self.tp_l, self.fn_l))

    @property
    def s_n(self) -> float:
        return float(self._ratio(self.tp_n, self.fn_n))

    def exact(self) -> tuple[Fraction, Fraction, Fraction]:
        return (
            self._ratio(self.tp_a, self.fn_a),
            self._ratio(self.tp_l, self.fn_l),
            self._ratio(self.tp_n, self.fn_n),
        )

    def to_dict(self) -> dict:
        out = {
            "n_trials": self.n_trials,
            "counts": {
                "TP_A": self.tp_a,
                "FN_A": self.fn_a,
                "TP_L": self.tp_l,
                "FN_L": self.fn_l,
                "TP_N": self.tp_n,
                "FN_N": self.fn_n,
            },
        }
        if self.n_trials:
            out.update(D_A=self.d_a, T_L=self.t_l, S_N=self.s_n)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AccuracyReport":
        c = data["counts"]
        return cls(c["TP_A"], c["FN_A"], c["TP_L"], c["FN_L"], c["TP_N"], c["FN_N"])


ZERO = AccuracyReport()


def accumulate(records: Iterable[TrialRecord]) -> AccuracyReport:
    records = list(records)
    if not records:
        raise EmptyTrials("no trial records")
    seen: set[int] = set()
    for r in records:
        if r.place_no in seen:
            raise DuplicatePlace(f"place {r.place_no} appears twice")
        seen.add(r.place_no)
    n = len(records)
    detected = sum(r.detected for r in records)
    located = sum(r.located for r in records)
    notified = sum(r.notified for r in records)
    return AccuracyReport(detected, n - detected, located, n - located, notified, n - notified)


def merge(a: AccuracyReport, b: AccuracyReport) -> AccuracyReport:
    return AccuracyReport(
        a.tp_a + b.tp_a,
        a.fn_a + b.fn_a,
        a.tp_l + b.tp_l,
        a.fn_l + b.fn_l,
        a.tp_n + b.tp_n,
        a.fn_n + b.fn_n,
    )
