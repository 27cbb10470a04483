"""Error rules and expansion of a canonical lexicon into pronunciation variants.

Rule notation follows the usual table layout: the right-hand side repeats the
pattern with ``/`` separating the alternatives for its one mutable slot, and a
trailing ``/`` standing for the empty alternative::

    S   dh      dh/d        dh may surface as d
    D   n d     n d/        d may be dropped after n
    I   er      er r/R/     r or R may follow er
    I   p l     p ax/o l    ax or o may be inserted between p and l
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import FormatError, Lexicon, PhoneInventory, PhoneSeq, UnknownPhone, _content_lines

DEFAULT_CAP = 16


class RuleKind(str, Enum):
    SUB = "S"
    DEL = "D"
    INS = "I"


class RuleFormatError(FormatError):
    pass


@dataclass(frozen=True)
class ErrorRule:
    kind: RuleKind
    lhs: PhoneSeq
    alternatives: tuple[PhoneSeq, ...]
    count: int = field(default=0, compare=False)

    def __post_init__(self):
        problem = _rule_problem(self.kind, self.lhs, self.alternatives)
        if problem:
            raise ValueError(problem)

    @property
    def identity(self) -> PhoneSeq:
        """The alternative that leaves the canonical form unchanged."""
        if self.kind is RuleKind.INS:
            return ()
        return (self.lhs[-1],)

    def notation(self, inv: PhoneInventory) -> str:
        slot = "/".join(inv.fmt(alt) for alt in self.alternatives)
        if self.kind is RuleKind.SUB:
            return slot
        if self.kind is RuleKind.DEL:
            return f"{inv.label(self.lhs[0])} {inv.label(self.lhs[1])}/"
        parts = [inv.label(self.lhs[0]), slot] + [inv.label(p) for p in self.lhs[1:]]
        return " ".join(parts)

    def describe(self, inv: PhoneInventory) -> str:
        return f"{inv.fmt(self.lhs)} → {self.notation(inv)}"

    def to_line(self, inv: PhoneInventory) -> str:
        return f"{self.kind.value}\t{inv.fmt(self.lhs)}\t{self.notation(inv)}"


def _rule_problem(kind: RuleKind, lhs: PhoneSeq, alts: tuple[PhoneSeq, ...]) -> str | None:
    if not alts:
        return "rule needs at least one alternative"
    if len(set(alts)) != len(alts):
        return "duplicate alternatives"
    if kind is RuleKind.SUB:
        if len(lhs) != 1:
            return "substitution rules take a single-phone pattern"
        if any(len(a) != 1 for a in alts):
            return "substitution alternatives must be single phones"
        if (lhs[0],) not in alts:
            return "substitution alternatives must include the original phone"
    elif kind is RuleKind.DEL:
        if len(lhs) != 2:
            return "deletion rules take a two-phone pattern"
        if set(alts) != {(lhs[1],), ()} or len(alts) != 2:
            return "deletion alternatives must be keep-or-drop of the second phone"
    else:
        if len(lhs) not in (1, 2):
            return "insertion rules take a one- or two-phone pattern"
        if any(len(a) > 1 for a in alts):
            return "insertion alternatives must be a single phone or empty"
        if all(len(a) == 0 for a in alts):
            return "insertion rule inserts nothing"
    return None


def default_rules_path() -> Path:
    return Path(str(resources.files("mispron") / "data" / "error_rules.tsv"))


def _slot(text: str, inv: PhoneInventory, path, lineno: int) -> tuple[PhoneSeq, ...]:
    alts = []
    for piece in text.split("/"):
        if not piece:
            alts.append(())
            continue
        try:
            alts.append(inv.encode([piece]))
        except UnknownPhone:
            raise RuleFormatError(path, lineno, f"unknown phone {piece!r}") from None
    return tuple(dict.fromkeys(alts))


def parse_rule(line: str, inv: PhoneInventory, path="<string>", lineno: int = 1) -> ErrorRule:
    parts = line.split("\t")
    if len(parts) != 3:
        raise RuleFormatError(path, lineno, "expected 'kind<TAB>lhs<TAB>alternatives'")
    kind_text, lhs_text, rhs_text = (p.strip() for p in parts)
    try:
        kind = RuleKind(kind_text)
    except ValueError:
        raise RuleFormatError(path, lineno, f"unknown rule kind {kind_text!r}") from None
    try:
        lhs = inv.encode(lhs_text.split())
    except UnknownPhone as e:
        raise RuleFormatError(path, lineno, f"unknown phone {e.token!r}") from None
    lhs_tokens = lhs_text.split()
    rhs = rhs_text.split()

    if kind is RuleKind.SUB:
        if len(rhs) != 1:
            raise RuleFormatError(path, lineno, "substitution needs one '/'-separated slot")
        alts = _slot(rhs[0], inv, path, lineno)
        if () in alts:
            raise RuleFormatError(path, lineno, "substitution alternatives cannot be empty")
    elif kind is RuleKind.DEL:
        if len(lhs_tokens) != 2 or rhs != [lhs_tokens[0], lhs_tokens[1] + "/"]:
            raise RuleFormatError(path, lineno, f"deletion must read '{lhs_text}/'")
        alts = ((lhs[1],), ())
    else:
        frame = [lhs_tokens[0], None] + lhs_tokens[1:]
        if len(rhs) != len(frame) or any(f is not None and f != r for f, r in zip(frame, rhs)):
            raise RuleFormatError(path, lineno, "insertion must repeat the pattern with one slot after its first phone")
        alts = _slot(rhs[1], inv, path, lineno)

    try:
        return ErrorRule(kind, lhs, alts)
    except ValueError as e:
        raise RuleFormatError(path, lineno, str(e)) from None


def parse_rules(path=None, inv: PhoneInventory | None = None) -> list[ErrorRule]:
    """Read a rule file in file order; ``path=None`` reads the shipped table."""
    if inv is None:
        raise TypeError("parse_rules needs a phone inventory")
    path = default_rules_path() if path is None else path
    return [parse_rule(line, inv, path, lineno) for lineno, line in _content_lines(path)]


def write_rules(rules: Sequence[ErrorRule], path, inv: PhoneInventory, header: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        for rule in rules:
            fh.write(rule.to_line(inv) + "\n")


# A site is one mutable slot of the canonical form: either the phone at a
# position ("pos", i) or the gap after it ("gap", i).
@dataclass
class _Site:
    lhs_len: int
    identity: PhoneSeq
    choices: dict[PhoneSeq, ErrorRule | None]
    start: int


def _sites(canon: PhoneSeq, rules: Sequence[ErrorRule]) -> dict[tuple[str, int], _Site]:
    sites: dict[tuple[str, int], _Site] = {}

    def claim(key, rule: ErrorRule, start: int, identity: PhoneSeq):
        site = sites.get(key)
        if site is None or len(rule.lhs) > site.lhs_len:
            site = _Site(len(rule.lhs), identity, {}, start)
            sites[key] = site
        elif len(rule.lhs) < site.lhs_len:
            return
        for alt in rule.alternatives:
            site.choices.setdefault(alt, rule)

    n = len(canon)
    for rule in rules:
        width = len(rule.lhs)
        for i in range(n - width + 1):
            if canon[i:i + width] != rule.lhs:
                continue
            if rule.kind is RuleKind.SUB:
                claim(("pos", i), rule, i, (canon[i],))
            elif rule.kind is RuleKind.DEL:
                claim(("pos", i + 1), rule, i, (canon[i + 1],))
            else:
                claim(("gap", i), rule, i, ())
    return sites


@dataclass(frozen=True)
class Variant:
    phones: PhoneSeq
    edits: int
    provenance: tuple[tuple[ErrorRule, int], ...] = ()


def expand(word: str, canon: Sequence[int], rules: Sequence[ErrorRule], cap: int = DEFAULT_CAP) -> list[Variant]:
    """All rule variants of ``canon``, canonical first, at most ``cap`` of them.

    Each matched site contributes its alternatives to a cross product over
    the canonical form; rules never apply to each other's output.  Beyond the
    canonical form, variants are kept fewest-edits first, then by phone index.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    canon = tuple(canon)
    sites = _sites(canon, rules)
    keys = sorted(sites, key=lambda k: (k[1], k[0] == "gap"))
    options = [list(sites[k].choices.items()) for k in keys]

    best: dict[PhoneSeq, Variant] = {canon: Variant(canon, 0)}
    for combo in itertools.product(*options):
        chosen = dict(zip(keys, combo))
        phones: list[int] = []
        edits = 0
        prov: list[tuple[ErrorRule, int]] = []
        for i, p in enumerate(canon):
            for kind in ("pos", "gap"):
                key = (kind, i)
                if key in chosen:
                    alt, rule = chosen[key]
                    phones.extend(alt)
                    if alt != sites[key].identity:
                        edits += 1
                        prov.append((rule, sites[key].start))
                elif kind == "pos":
                    phones.append(p)
        seq = tuple(phones)
        known = best.get(seq)
        if known is None or edits < known.edits:
            best[seq] = Variant(seq, edits, tuple(prov))

    rest = sorted((v for s, v in best.items() if s != canon), key=lambda v: (v.edits, v.phones))
    return [best[canon]] + rest[: cap - 1]


class AdaptedLexicon(Lexicon):
    """Lexicon whose entries are canonical pronunciations plus rule variants."""

    def __init__(self):
        super().__init__()
        self.provenance: dict[str, list[tuple[tuple[ErrorRule, int], ...]]] = {}

    def add_variants(self, word: str, variants: Sequence[Variant]) -> None:
        word = word.upper()
        for v in variants:
            if self.add(word, v.phones):
                self.provenance.setdefault(word, []).append(v.provenance)

    @property
    def total_variants(self) -> int:
        return sum(len(p) for p in self.entries.values())

    @property
    def max_variants(self) -> int:
        return max((len(p) for p in self.entries.values()), default=0)

    def write(self, path, inv: PhoneInventory) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for word, prons in self.entries.items():
                for pron, prov in zip(prons, self.provenance[word]):
                    note = "; ".join(f"{r.kind.value} {r.describe(inv)} @{pos}" for r, pos in prov) or "canonical"
                    fh.write(f"{word}\t{inv.fmt(pron)}\t# {note}\n")


def expand_lexicon(lex: Lexicon, rules: Sequence[ErrorRule], cap: int = DEFAULT_CAP) -> AdaptedLexicon:
    if cap < 1:
        raise ValueError("cap must be at least 1")
    out = AdaptedLexicon()
    for word in lex:
        out.add_variants(word, expand(word, lex.canonical(word), rules, cap))
    return out


def utterance_variants(words: Sequence[str], lex: Lexicon, cap: int = DEFAULT_CAP) -> list[PhoneSeq]:
    """Concatenated pronunciations for a word sequence, canonical first.

    Combinations are ranked by total number of non-canonical word choices,
    then by the per-word variant ranks, and pruned word by word to ``cap``.
    That ranking is prefix-monotone, so the pruning is exact.
    """
    beam: list[tuple[int, tuple[int, ...], PhoneSeq]] = [(0, (), ())]
    for word in words:
        prons = lex[word]
        grown = [
            (cost + (r > 0), ranks + (r,), seq + pron)
            for cost, ranks, seq in beam
            for r, pron in enumerate(prons)
        ]
        grown.sort(key=lambda x: (x[0], x[1]))
        beam = grown[:cap]
    out: list[PhoneSeq] = []
    for _, _, seq in beam:
        if seq not in out:
            out.append(seq)
    return out
