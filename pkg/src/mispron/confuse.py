"""Confusion statistics from aligned IDE/MAN pairs, error profiles, and rule induction."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .align import OpKind, align
from .corpus import PhoneInventory
from .lexicon import ErrorRule, RuleKind

DEFAULT_MIN_COUNT = 5
DEFAULT_MIN_RATE = 0.05


@dataclass
class ConfusionTable:
    """Error counts keyed by inventory index; ``sil`` stands in for a missing left context.

    ``ref_totals[sil]`` is the number of mined pairs, so boundary insertions
    have a denominator.
    """

    sil: int
    sub_counts: Counter = field(default_factory=Counter)  # (ref, hyp)
    del_counts: Counter = field(default_factory=Counter)  # ref
    del_ctx_counts: Counter = field(default_factory=Counter)  # (left, ref)
    ins_counts: Counter = field(default_factory=Counter)  # hyp
    ins_ctx_counts: Counter = field(default_factory=Counter)  # (left, hyp)
    ref_totals: Counter = field(default_factory=Counter)

    def __add__(self, other: "ConfusionTable") -> "ConfusionTable":
        if self.sil != other.sil:
            raise ValueError("tables come from different inventories")
        return ConfusionTable(
            self.sil,
            self.sub_counts + other.sub_counts,
            self.del_counts + other.del_counts,
            self.del_ctx_counts + other.del_ctx_counts,
            self.ins_counts + other.ins_counts,
            self.ins_ctx_counts + other.ins_ctx_counts,
            self.ref_totals + other.ref_totals,
        )

    def __eq__(self, other) -> bool:
        # Counter equality ignores explicit zero entries.
        if not isinstance(other, ConfusionTable):
            return NotImplemented
        return all(
            +getattr(self, f) == +getattr(other, f)
            for f in ("sub_counts", "del_counts", "del_ctx_counts", "ins_counts", "ins_ctx_counts", "ref_totals")
        ) and self.sil == other.sil

    def is_empty(self) -> bool:
        return not (self.sub_counts or self.del_counts or self.ins_counts)


def mine(pairs: Iterable[tuple[Sequence[int], Sequence[int]]], sil: int) -> ConfusionTable:
    """Accumulate substitutions, deletions and insertions of MAN against IDE.

    Deletions and insertions are also counted with the preceding IDE phone as
    context (``sil`` at the start of the sequence).
    """
    table = ConfusionTable(sil)
    for ide, man in pairs:
        table.ref_totals[sil] += 1
        table.ref_totals.update(ide)
        prev = sil
        for op in align(ide, man).ops:
            if op.kind is OpKind.SUB:
                table.sub_counts[op.ref_phone, op.hyp_phone] += 1
            elif op.kind is OpKind.DEL:
                table.del_counts[op.ref_phone] += 1
                table.del_ctx_counts[prev, op.ref_phone] += 1
            elif op.kind is OpKind.INS:
                table.ins_counts[op.hyp_phone] += 1
                table.ins_ctx_counts[prev, op.hyp_phone] += 1
            if op.ref_phone is not None:
                prev = op.ref_phone
    return table


@dataclass(frozen=True)
class ProfileRow:
    phone: int
    kind: str
    target: int | None
    count: int
    rate: float


def _rate(count: int, total: int) -> float:
    return count / total if total else 0.0


def profile(t: ConfusionTable, top_k: int = 5) -> list[ProfileRow]:
    """Top ``top_k`` errors per IDE phone, phones in index order.

    Substitutions and deletions belong to the IDE phone they affect;
    insertions belong to the IDE phone they follow.  Within a phone, rows go
    by count descending, then target index ascending.
    """
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    by_phone: dict[int, list[ProfileRow]] = {}
    kind_order = {"sub": 0, "del": 1, "ins": 2}
    for (ref, hyp), c in t.sub_counts.items():
        if c:
            by_phone.setdefault(ref, []).append(ProfileRow(ref, "sub", hyp, c, _rate(c, t.ref_totals[ref])))
    for ref, c in t.del_counts.items():
        if c:
            by_phone.setdefault(ref, []).append(ProfileRow(ref, "del", None, c, _rate(c, t.ref_totals[ref])))
    for (ctx, hyp), c in t.ins_ctx_counts.items():
        if c:
            by_phone.setdefault(ctx, []).append(ProfileRow(ctx, "ins", hyp, c, _rate(c, t.ref_totals[ctx])))
    rows: list[ProfileRow] = []
    for phone in sorted(by_phone):
        ranked = sorted(
            by_phone[phone],
            key=lambda r: (-r.count, -1 if r.target is None else r.target, kind_order[r.kind]),
        )
        rows.extend(ranked[:top_k])
    return rows


def write_profile(rows: Sequence[ProfileRow], path, inv: PhoneInventory) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["phone", "kind", "target", "count", "rate"])
        for r in rows:
            target = "EPS" if r.target is None else inv.label(r.target)
            out.writerow([inv.label(r.phone), r.kind, target, r.count, f"{r.rate:.6f}"])


def induce_rules(t: ConfusionTable, min_count: int = DEFAULT_MIN_COUNT,
                 min_rate: float = DEFAULT_MIN_RATE) -> list[ErrorRule]:
    """Turn frequent confusions into single-alternative rules.

    One rule per qualifying table entry: ``p → p/q`` substitutions, ``c p →
    c p/`` deletions and ``c → c q/`` insertions.  Entries with a sequence
    boundary as context have no rule form and are skipped.  Output is sorted
    by count descending, then by kind and phone indices.
    """
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    if not 0 < min_rate <= 1:
        raise ValueError("min_rate must be in (0, 1]")

    def ok(count: int, total: int) -> bool:
        return count >= min_count and _rate(count, total) >= min_rate

    found: list[tuple[int, int, tuple[int, ...], ErrorRule]] = []
    for (p, q), c in t.sub_counts.items():
        if ok(c, t.ref_totals[p]):
            found.append((c, 0, (p, q), ErrorRule(RuleKind.SUB, (p,), ((p,), (q,)), count=c)))
    for (ctx, p), c in t.del_ctx_counts.items():
        if ctx != t.sil and ok(c, t.ref_totals[p]):
            found.append((c, 1, (ctx, p), ErrorRule(RuleKind.DEL, (ctx, p), ((p,), ()), count=c)))
    for (ctx, q), c in t.ins_ctx_counts.items():
        if ctx != t.sil and ok(c, t.ref_totals[ctx]):
            found.append((c, 2, (ctx, q), ErrorRule(RuleKind.INS, (ctx,), ((q,), ()), count=c)))
    found.sort(key=lambda x: (-x[0], x[1], x[2]))
    return [rule for *_, rule in found]
