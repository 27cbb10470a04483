"""Phone n-gram language models (orders 1 to 5) with add-k or Witten-Bell smoothing.

Events are the ``V`` phones of the inventory plus an end marker (index ``V``).
Sequences are padded with ``order - 1`` start markers, which only ever appear
as context.  All scores are natural logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import PhoneInventory

MAX_ORDER = 5
START_SYM = "<s>"
END_SYM = "</s>"
FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Smoothing:
    method: str = "add_k"
    k: float = 0.1

    def __post_init__(self):
        if self.method not in ("add_k", "witten_bell"):
            raise ConfigError(f"unknown smoothing method {self.method!r}")
        if self.method == "add_k" and not self.k > 0:
            raise ConfigError("add-k smoothing needs k > 0")


class PhoneLM:
    def __init__(self, order: int, symbols: Sequence[str], counts: dict[tuple[int, ...], np.ndarray],
                 smoothing: Smoothing = Smoothing()):
        if not 1 <= order <= MAX_ORDER:
            raise ConfigError(f"order must be in 1..{MAX_ORDER}, got {order}")
        self.order = order
        self.symbols = tuple(symbols)
        self.smoothing = smoothing
        self.counts = counts
        self.n_phones = len(self.symbols)
        self.end = self.n_phones
        self.start = self.n_phones + 1
        self._cache: dict[tuple[int, ...], np.ndarray] = {}
        self._logcache: dict[tuple[int, ...], np.ndarray] = {}
        if smoothing.method == "witten_bell":
            self._levels = self._marginals()

    @property
    def vocab_size(self) -> int:
        """Phones plus the start and end markers."""
        return self.n_phones + 2

    @property
    def n_events(self) -> int:
        return self.n_phones + 1

    def _marginals(self) -> list[dict[tuple[int, ...], np.ndarray]]:
        # levels[j] maps length-j contexts to next-event counts; each predicted
        # token's shorter context is a suffix of its full context.
        top = self.order - 1
        levels: list[dict[tuple[int, ...], np.ndarray]] = [dict() for _ in range(self.order)]
        levels[top] = self.counts
        for j in range(top - 1, -1, -1):
            for ctx, row in levels[j + 1].items():
                sub = ctx[1:]
                acc = levels[j].get(sub)
                if acc is None:
                    levels[j][sub] = row.copy()
                else:
                    acc += row
        return levels

    def _context(self, context: Sequence[int]) -> tuple[int, ...]:
        width = self.order - 1
        if width == 0:
            return ()
        ctx = tuple(context[-width:]) if len(context) else ()
        return (self.start,) * (width - len(ctx)) + ctx

    def _dist(self, ctx: tuple[int, ...]) -> np.ndarray:
        cached = self._cache.get(ctx)
        if cached is not None:
            return cached
        V = self.n_events
        if self.smoothing.method == "add_k":
            row = self.counts.get(ctx)
            k = self.smoothing.k
            if row is None:
                dist = np.full(V, 1.0 / V)
            else:
                dist = (row + k) / (row.sum() + k * V)
        else:
            dist = np.full(V, 1.0 / V)
            for j in range(len(ctx) + 1):
                row = self._levels[j].get(ctx[len(ctx) - j:])
                if row is None:
                    continue
                total = row.sum()
                types = np.count_nonzero(row)
                dist = (row + types * dist) / (total + types)
        self._cache[ctx] = dist
        return dist

    def next_dist(self, context: Sequence[int]) -> np.ndarray:
        """Probabilities over phones and the end marker (last entry)."""
        return self._dist(self._context(context))

    def next_logdist(self, context: Sequence[int]) -> np.ndarray:
        ctx = self._context(context)
        cached = self._logcache.get(ctx)
        if cached is None:
            cached = self._logcache[ctx] = np.log(self._dist(ctx))
        return cached

    def _check(self, seq: Sequence[int]) -> None:
        for p in seq:
            if not 0 <= p < self.n_phones:
                raise ValueError(f"phone index {p} outside the model vocabulary")

    def score(self, seq: Sequence[int]) -> float:
        """Log-probability of ``seq`` followed by the end marker."""
        self._check(seq)
        seq = list(seq)
        total = 0.0
        for i, p in enumerate(seq + [self.end]):
            total += float(self.next_logdist(seq[:i])[p])
        return total

    def perplexity(self, seqs: Iterable[Sequence[int]]) -> float:
        logp = 0.0
        tokens = 0
        for seq in seqs:
            logp += self.score(seq)
            tokens += len(seq) + 1
        if tokens == 0:
            raise ValueError("perplexity needs a non-empty evaluation set")
        return math.exp(-logp / tokens)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhoneLM):
            return NotImplemented
        return (
            self.order == other.order
            and self.symbols == other.symbols
            and self.smoothing == other.smoothing
            and self.counts.keys() == other.counts.keys()
            and all(np.array_equal(v, other.counts[k]) for k, v in self.counts.items())
        )

    def _sym(self, idx: int) -> str:
        if idx == self.start:
            return START_SYM
        if idx == self.end:
            return END_SYM
        return self.symbols[idx]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# phone n-gram model\n")
            fh.write(f"version\t{FORMAT_VERSION}\n")
            fh.write(f"order\t{self.order}\n")
            fh.write(f"smoothing\t{self.smoothing.method}\t{self.smoothing.k!r}\n")
            fh.write(f"vocab\t{' '.join(self.symbols)}\n")
            for ctx in sorted(self.counts):
                row = self.counts[ctx]
                ctx_text = " ".join(self._sym(i) for i in ctx)
                for p in np.flatnonzero(row):
                    fh.write(f"{ctx_text}\t{self._sym(int(p))}\t{int(row[p])}\n")


def train(seqs: Iterable[Sequence[int]], order: int, smoothing: Smoothing | None = None,
          vocab: PhoneInventory | Sequence[str] | int | None = None) -> PhoneLM:
    """Count padded n-grams over ``seqs``.

    ``vocab`` fixes the phone set: an inventory, a list of symbols, or a size
    (symbols then default to ``p0``, ``p1``, ...).
    """
    if not 1 <= order <= MAX_ORDER:
        raise ConfigError(f"order must be in 1..{MAX_ORDER}, got {order}")
    smoothing = smoothing or Smoothing()
    seqs = [tuple(s) for s in seqs]
    if not seqs:
        raise ValueError("training set is empty")
    if vocab is None:
        raise TypeError("train needs a vocabulary")
    if isinstance(vocab, PhoneInventory):
        symbols = vocab.symbols
    elif isinstance(vocab, int):
        symbols = tuple(f"p{i}" for i in range(vocab))
    else:
        symbols = tuple(vocab)
    V = len(symbols)
    start, end = V + 1, V
    width = order - 1
    counts: dict[tuple[int, ...], np.ndarray] = {}
    for seq in seqs:
        for p in seq:
            if not 0 <= p < V:
                raise ValueError(f"phone index {p} outside the model vocabulary")
        padded = (start,) * width + seq + (end,)
        for i in range(width, len(padded)):
            ctx = padded[i - width:i]
            row = counts.get(ctx)
            if row is None:
                row = counts[ctx] = np.zeros(V + 1, dtype=np.int64)
            row[padded[i]] += 1
    return PhoneLM(order, symbols, counts, smoothing)


def load(path) -> PhoneLM:
    header: dict[str, list[str]] = {}
    rows: list[tuple[str, str, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if parts[0] in ("version", "order", "smoothing", "vocab") and len(parts) >= 2 and len(rows) == 0:
                header[parts[0]] = parts[1:]
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'context<TAB>phone<TAB>count'")
            rows.append((parts[0], parts[1], int(parts[2])))
    if int(header["version"][0]) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model version {header['version'][0]}")
    order = int(header["order"][0])
    method, k = header["smoothing"][0], float(header["smoothing"][1])
    symbols = tuple(header["vocab"][0].split())
    index = {s: i for i, s in enumerate(symbols)}
    index[END_SYM] = len(symbols)
    index[START_SYM] = len(symbols) + 1
    counts: dict[tuple[int, ...], np.ndarray] = {}
    for ctx_text, sym, c in rows:
        ctx = tuple(index[s] for s in ctx_text.split())
        row = counts.setdefault(ctx, np.zeros(len(symbols) + 1, dtype=np.int64))
        row[index[sym]] += c
    return PhoneLM(order, symbols, counts, Smoothing(method, k))
