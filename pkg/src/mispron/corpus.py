"""Phone inventory, utterance tiers and lexicon, plus their TSV file formats."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

ORIGINS = ("English", "Italian", "Shared")
SIL = "SIL"
EPS = "EPS"
ABSENT = "-"
RESERVED_CHARS = ("/", "–")

PhoneSeq = tuple[int, ...]


class FormatError(ValueError):
    """A data file does not follow its line format."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class DuplicateSymbol(FormatError):
    pass


class UnknownPhone(ValueError):
    def __init__(self, token: str, where: str = "", position: int | None = None):
        self.token = token
        self.where = where
        self.position = position
        msg = f"unknown phone {token!r}"
        if where:
            msg += f" in {where}"
        if position is not None:
            msg += f" at position {position}"
        super().__init__(msg)


class DuplicateUtterance(ValueError):
    pass


def _check_symbol(sym: str) -> str | None:
    if not sym:
        return "empty symbol"
    if any(c.isspace() for c in sym):
        return f"symbol {sym!r} contains whitespace"
    if any(c in sym for c in RESERVED_CHARS):
        return f"symbol {sym!r} contains a reserved rule delimiter"
    if sym in (SIL, EPS):
        return f"symbol {sym!r} is reserved"
    return None


@dataclass(frozen=True)
class PhoneInventory:
    """Closed, ordered phone set with a language-of-origin tag per symbol.

    Phones are indexed ``0 .. len(inv) - 1``.  The two special tokens get the
    next two indices (``inv.sil`` and ``inv.eps``); neither ever appears in a
    stored phone sequence.
    """

    symbols: tuple[str, ...]
    origins: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.symbols) != len(self.origins):
            raise ValueError("symbols and origins differ in length")
        index: dict[str, int] = {}
        for i, (sym, origin) in enumerate(zip(self.symbols, self.origins)):
            problem = _check_symbol(sym)
            if problem:
                raise ValueError(problem)
            if origin not in ORIGINS:
                raise ValueError(f"unknown origin {origin!r} for {sym!r}")
            if sym in index:
                raise ValueError(f"duplicate symbol {sym!r}")
            index[sym] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, sym: str) -> bool:
        return sym in self._index

    @property
    def specials(self) -> tuple[str, str]:
        return (SIL, EPS)

    @property
    def sil(self) -> int:
        return len(self.symbols)

    @property
    def eps(self) -> int:
        return len(self.symbols) + 1

    def index(self, sym: str) -> int:
        try:
            return self._index[sym]
        except KeyError:
            if sym == SIL:
                return self.sil
            if sym == EPS:
                return self.eps
            raise UnknownPhone(sym) from None

    def label(self, idx: int) -> str:
        if 0 <= idx < len(self.symbols):
            return self.symbols[idx]
        if idx == self.sil:
            return SIL
        if idx == self.eps:
            return EPS
        raise IndexError(idx)

    def origin(self, sym: str) -> str:
        return self.origins[self._index[sym]]

    def encode(self, tokens: Iterable[str], where: str = "") -> PhoneSeq:
        out = []
        for pos, tok in enumerate(tokens):
            idx = self._index.get(tok)
            if idx is None:
                raise UnknownPhone(tok, where, pos)
            out.append(idx)
        return tuple(out)

    def decode(self, seq: Sequence[int]) -> list[str]:
        return [self.label(i) for i in seq]

    def fmt(self, seq: Sequence[int]) -> str:
        return " ".join(self.decode(seq))


def _data_path(name: str) -> Path:
    return Path(str(resources.files("mispron") / "data" / name))


def default_inventory_path() -> Path:
    return _data_path("inventory.tsv")


def _content_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def load_inventory(path=None) -> PhoneInventory:
    """Read ``symbol<TAB>origin`` lines; ``None`` loads the shipped default."""
    path = default_inventory_path() if path is None else path
    symbols: list[str] = []
    origins: list[str] = []
    seen: dict[str, int] = {}
    for lineno, line in _content_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(path, lineno, "expected 'symbol<TAB>origin'")
        sym, origin = parts[0].strip(), parts[1].strip()
        problem = _check_symbol(sym)
        if problem:
            raise FormatError(path, lineno, problem)
        if sym in seen:
            raise DuplicateSymbol(path, lineno, f"duplicate symbol {sym!r} (first on line {seen[sym]})")
        if origin not in ORIGINS:
            raise FormatError(path, lineno, f"unknown origin tag {origin!r}")
        seen[sym] = lineno
        symbols.append(sym)
        origins.append(origin)
    return PhoneInventory(tuple(symbols), tuple(origins))


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker: str
    corpus_tag: str
    words: tuple[str, ...]
    ide: PhoneSeq
    man: PhoneSeq | None = None
    asr: PhoneSeq | None = None

    def tier(self, name: str) -> PhoneSeq | None:
        if name not in TIERS:
            raise ValueError(f"unknown tier {name!r}; expected one of {', '.join(TIERS)}")
        return getattr(self, name)


TIERS = ("ide", "man", "asr")


class Lexicon:
    """Word to pronunciation list; the first pronunciation of a word is canonical."""

    def __init__(self, entries: dict[str, list[PhoneSeq]] | None = None):
        self.entries: dict[str, list[PhoneSeq]] = {}
        for word, prons in (entries or {}).items():
            for pron in prons:
                self.add(word, pron)

    def add(self, word: str, pron: Sequence[int]) -> bool:
        pron = tuple(pron)
        if not pron:
            raise ValueError(f"empty pronunciation for {word!r}")
        prons = self.entries.setdefault(word.upper(), [])
        if pron in prons:
            return False
        prons.append(pron)
        return True

    def canonical(self, word: str) -> PhoneSeq:
        return self.entries[word.upper()][0]

    def __contains__(self, word: str) -> bool:
        return word.upper() in self.entries

    def __getitem__(self, word: str) -> list[PhoneSeq]:
        return self.entries[word.upper()]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, Lexicon) and self.entries == other.entries

    def words(self) -> list[str]:
        return list(self.entries)


def _parse_tier(text: str, inv: PhoneInventory, utt_id: str, tier: str, optional: bool) -> PhoneSeq | None:
    text = text.strip()
    if optional and text == ABSENT:
        return None
    try:
        return inv.encode(text.split())
    except UnknownPhone as e:
        raise UnknownPhone(e.token, f"utterance {utt_id!r} tier {tier}", e.position) from None


def load_corpus(path, inv: PhoneInventory, lexicon: Lexicon | None = None) -> list[Utterance]:
    """Read one utterance per line: id, speaker, corpus_tag, words, ide, man, asr.

    With ``lexicon`` given, an IDE tier that disagrees with the canonical
    pronunciations of the words triggers a warning (not an error).
    """
    utts: list[Utterance] = []
    seen: set[str] = set()
    for lineno, line in _content_lines(path):
        parts = line.split("\t")
        if len(parts) != 7:
            raise FormatError(path, lineno, f"expected 7 tab-separated fields, got {len(parts)}")
        utt_id, speaker, tag, words, ide, man, asr = parts
        if utt_id in seen:
            raise DuplicateUtterance(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        utt = Utterance(
            id=utt_id,
            speaker=speaker,
            corpus_tag=tag,
            words=tuple(words.split()),
            ide=_parse_tier(ide, inv, utt_id, "ide", optional=False),
            man=_parse_tier(man, inv, utt_id, "man", optional=True),
            asr=_parse_tier(asr, inv, utt_id, "asr", optional=True),
        )
        if lexicon is not None and utt.words:
            check_ide(utt, lexicon)
        utts.append(utt)
    return utts


def check_ide(utt: Utterance, lexicon: Lexicon) -> bool:
    missing = [w for w in utt.words if w not in lexicon]
    if missing:
        warnings.warn(f"utterance {utt.id!r}: words not in lexicon: {' '.join(missing)}", stacklevel=2)
        return False
    expected = tuple(p for w in utt.words for p in lexicon.canonical(w))
    if expected != utt.ide:
        warnings.warn(f"utterance {utt.id!r}: IDE tier differs from canonical word pronunciations", stacklevel=2)
        return False
    return True


def _tier_text(seq: PhoneSeq | None, inv: PhoneInventory) -> str:
    return ABSENT if seq is None else inv.fmt(seq)


def format_utterance(utt: Utterance, inv: PhoneInventory) -> str:
    return "\t".join([
        utt.id,
        utt.speaker,
        utt.corpus_tag,
        " ".join(utt.words),
        inv.fmt(utt.ide),
        _tier_text(utt.man, inv),
        _tier_text(utt.asr, inv),
    ])


def write_corpus(utts: Iterable[Utterance], path, inv: PhoneInventory) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt in utts:
            fh.write(format_utterance(utt, inv) + "\n")


def load_lexicon(path, inv: PhoneInventory) -> Lexicon:
    lex = Lexicon()
    for lineno, line in _content_lines(path):
        if "\t" not in line:
            raise FormatError(path, lineno, "expected 'WORD<TAB>phones'")
        fields = line.split("\t")
        if len(fields) > 2 and not fields[2].lstrip().startswith("#"):
            raise FormatError(path, lineno, "unexpected third field (only a '#' comment is allowed)")
        word, pron = fields[0].strip(), fields[1]
        if not word:
            raise FormatError(path, lineno, "empty word")
        tokens = pron.split()
        if not tokens:
            raise FormatError(path, lineno, f"empty pronunciation for {word!r}")
        try:
            seq = inv.encode(tokens)
        except UnknownPhone as e:
            raise FormatError(path, lineno, f"unknown phone {e.token!r} at position {e.position}") from None
        lex.add(word, seq)
    return lex


def write_lexicon(lex: Lexicon, path, inv: PhoneInventory) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, prons in lex.entries.items():
            for pron in prons:
                fh.write(f"{word}\t{inv.fmt(pron)}\n")
