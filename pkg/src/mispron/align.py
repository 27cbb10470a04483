"""Levenshtein alignment of phone sequences and phone error rate metrics."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class UndefinedMetric(ValueError):
    """Raised when a rate is requested over zero reference phones."""


class OpKind(str, Enum):
    MATCH = "match"
    SUB = "sub"
    DEL = "del"
    INS = "ins"


@dataclass(frozen=True)
class EditOp:
    kind: OpKind
    ref_phone: int | None = None
    hyp_phone: int | None = None
    ref_pos: int | None = None
    hyp_pos: int | None = None


@dataclass(frozen=True)
class Costs:
    sub: float = 1.0
    dels: float = 1.0
    ins: float = 1.0

    def __post_init__(self):
        if min(self.sub, self.dels, self.ins) <= 0:
            raise ValueError("edit costs must be positive")


UNIT_COSTS = Costs()


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]
    ref_len: int
    hyp_len: int
    cost: float


@dataclass(frozen=True)
class AlignmentStats:
    S: int = 0
    D: int = 0
    I: int = 0
    P: int = 0
    C: int = 0

    def __add__(self, other: "AlignmentStats") -> "AlignmentStats":
        return AlignmentStats(
            self.S + other.S, self.D + other.D, self.I + other.I, self.P + other.P, self.C + other.C
        )

    @property
    def errors(self) -> int:
        return self.S + self.D + self.I

    @property
    def hyp_len(self) -> int:
        return self.C + self.S + self.I


def align(ref: Sequence[int], hyp: Sequence[int], costs: Costs = UNIT_COSTS) -> Alignment:
    """Minimum-cost monotonic alignment of ``hyp`` against ``ref``.

    Backtrace prefers the diagonal (match/substitute), then deletion, then
    insertion, so equal-cost inputs always produce the same trace.
    """
    n, m = len(ref), len(hyp)
    dist = np.zeros((n + 1, m + 1))
    dist[1:, 0] = np.arange(1, n + 1) * costs.dels
    dist[0, 1:] = np.arange(1, m + 1) * costs.ins
    for i in range(1, n + 1):
        r = ref[i - 1]
        for j in range(1, m + 1):
            diag = dist[i - 1, j - 1] + (0.0 if r == hyp[j - 1] else costs.sub)
            up = dist[i - 1, j] + costs.dels
            left = dist[i, j - 1] + costs.ins
            dist[i, j] = min(diag, up, left)

    ops: list[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            if dist[i, j] == dist[i - 1, j - 1] + (0.0 if same else costs.sub):
                kind = OpKind.MATCH if same else OpKind.SUB
                ops.append(EditOp(kind, ref[i - 1], hyp[j - 1], i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and dist[i, j] == dist[i - 1, j] + costs.dels:
            ops.append(EditOp(OpKind.DEL, ref[i - 1], None, i - 1, None))
            i -= 1
            continue
        ops.append(EditOp(OpKind.INS, None, hyp[j - 1], None, j - 1))
        j -= 1
    ops.reverse()
    return Alignment(tuple(ops), n, m, float(dist[n, m]))


def stats(a: Alignment) -> AlignmentStats:
    counts = {kind: 0 for kind in OpKind}
    for op in a.ops:
        counts[op.kind] += 1
    return AlignmentStats(
        S=counts[OpKind.SUB],
        D=counts[OpKind.DEL],
        I=counts[OpKind.INS],
        P=a.ref_len,
        C=counts[OpKind.MATCH],
    )


def per(s: AlignmentStats) -> float:
    """(S + D + I) / P * 100; insertions can push this past 100."""
    if s.P == 0:
        raise UndefinedMetric("phone error rate is undefined for an empty reference")
    return (s.S + s.D + s.I) / s.P * 100


def accuracy(s: AlignmentStats) -> float:
    """Phone accuracy, ``100 - per(s)``; negative when errors outnumber phones."""
    if s.P == 0:
        raise UndefinedMetric("phone accuracy is undefined for an empty reference")
    return 100.0 - per(s)


def corpus_stats(pairs: Iterable[tuple[Sequence[int], Sequence[int]]], costs: Costs = UNIT_COSTS) -> AlignmentStats:
    total = AlignmentStats()
    for ref, hyp in pairs:
        total = total + stats(align(ref, hyp, costs))
    return total


def corpus_per(pairs: Iterable[tuple[Sequence[int], Sequence[int]]], costs: Costs = UNIT_COSTS) -> tuple[float, AlignmentStats]:
    """Micro-averaged PER: counts are summed over all pairs before dividing."""
    total = corpus_stats(pairs, costs)
    return per(total), total
