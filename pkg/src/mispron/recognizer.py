"""Simulated phone recognition: a confusion channel that stands in for the
acoustic model, a free phone decoder driven by the n-gram model, a
forced-choice decoder over pronunciation variants, and detection scoring.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .align import AlignmentStats, OpKind, UndefinedMetric, align, corpus_stats, per
from .confuse import ConfusionTable
from .corpus import PhoneInventory, PhoneSeq, Utterance
from .lexicon import ErrorRule, RuleKind
from .lm import PhoneLM

DEFAULT_LM_WEIGHT = 0.7
DEFAULT_BEAM = 8
DEFAULT_SKIP_PENALTY = -4.0


@dataclass
class ChannelModel:
    """Stochastic L2 production channel over ``V`` phones.

    Per IDE phone: deletion (per phone, or given the preceding IDE phone),
    otherwise a substitution drawn from ``sub_matrix``, then optional
    insertions after it.  Insertion keys are ``(left, right)`` with ``right``
    either the next IDE phone or ``None`` for any; ``sil`` marks the sequence
    boundary on either side.  Each realized phone yields one posterior frame
    ``softmax(sharpness * onehot + noise * N(0, 1))``.
    """

    sub_matrix: np.ndarray
    p_del: np.ndarray
    p_del_ctx: dict[tuple[int, int], float] = field(default_factory=dict)
    p_ins: dict[tuple[int, int | None], tuple[float, np.ndarray]] = field(default_factory=dict)
    sharpness: float = 4.0
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.sub_matrix = np.asarray(self.sub_matrix, dtype=float)
        self.p_del = np.asarray(self.p_del, dtype=float)
        V = self.n_phones
        if self.sub_matrix.shape != (V, V) or self.p_del.shape != (V,):
            raise ValueError("sub_matrix must be VxV and p_del length V")
        if np.any(self.sub_matrix < 0) or not np.allclose(self.sub_matrix.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("sub_matrix rows must be probability distributions")
        probs = list(self.p_del) + list(self.p_del_ctx.values()) + [p for p, _ in self.p_ins.values()]
        if any(not 0 <= p < 1 for p in probs):
            raise ValueError("deletion and insertion probabilities must lie in [0, 1)")
        for _, dist in self.p_ins.values():
            if dist.shape != (V,) or abs(dist.sum() - 1) > 1e-9:
                raise ValueError("insertion distributions must sum to 1 over the phones")
        if not self.sharpness > 0 or self.noise < 0:
            raise ValueError("sharpness must be positive and noise non-negative")

    @property
    def n_phones(self) -> int:
        return self.sub_matrix.shape[0]

    @property
    def sil(self) -> int:
        return self.n_phones


def identity_channel(n_phones: int, sharpness: float = math.inf, seed: int = 0) -> ChannelModel:
    return ChannelModel(np.eye(n_phones), np.zeros(n_phones), sharpness=sharpness, noise=0.0, seed=seed)


def channel_from_rules(rules: Sequence[ErrorRule], n_phones: int, rate: float,
                       sharpness: float = 4.0, noise: float = 1.0, seed: int = 0) -> ChannelModel:
    """Channel that applies each rule site with probability ``rate``.

    A fired site picks uniformly among the rule's non-identity alternatives.
    """
    if not 0 <= rate < 1:
        raise ValueError("rate must lie in [0, 1)")
    sub_alts: dict[int, list[int]] = {}
    p_del_ctx: dict[tuple[int, int], float] = {}
    p_ins: dict[tuple[int, int | None], tuple[float, np.ndarray]] = {}
    for rule in rules:
        edits = [a for a in rule.alternatives if a != rule.identity]
        if rule.kind is RuleKind.SUB:
            alts = sub_alts.setdefault(rule.lhs[0], [])
            alts.extend(a[0] for a in edits if a[0] not in alts)
        elif rule.kind is RuleKind.DEL:
            p_del_ctx[rule.lhs] = rate
        else:
            key = (rule.lhs[0], rule.lhs[1] if len(rule.lhs) == 2 else None)
            dist = np.zeros(n_phones)
            for a in edits:
                dist[a[0]] += 1.0 / len(edits)
            p_ins[key] = (rate, dist)
    sub = np.eye(n_phones)
    for p, alts in sub_alts.items():
        if alts:
            sub[p, p] = 1 - rate
            for q in alts:
                sub[p, q] = rate / len(alts)
    return ChannelModel(sub, np.zeros(n_phones), p_del_ctx, p_ins, sharpness, noise, seed)


def channel_from_confusions(t: ConfusionTable, n_phones: int, sharpness: float = 4.0,
                            noise: float = 1.0, seed: int = 0) -> ChannelModel:
    """Maximum-likelihood channel from mined counts, add-0.5 smoothed.

    Phones never seen in the IDE tier keep an identity row.
    """
    sub = np.eye(n_phones)
    p_del = np.zeros(n_phones)
    p_ins: dict[tuple[int, int | None], tuple[float, np.ndarray]] = {}
    ins_by_ctx: dict[int, np.ndarray] = {}
    for (ctx, q), c in t.ins_ctx_counts.items():
        ins_by_ctx.setdefault(ctx, np.zeros(n_phones))[q] += c
    for p in range(n_phones):
        total = t.ref_totals[p]
        if not total:
            continue
        row = np.zeros(n_phones)
        for q in range(n_phones):
            if q != p:
                row[q] = t.sub_counts[p, q]
        row[p] = max(total - row.sum() - t.del_counts[p], 0)
        row += 0.5
        sub[p] = row / row.sum()
        p_del[p] = (t.del_counts[p] + 0.5) / (total + 1)
    for ctx, counts in ins_by_ctx.items():
        total = t.ref_totals[ctx]
        if not total:
            continue
        prob = min((counts.sum() + 0.5) / (total + 1), 0.99)
        dist = counts + 0.5
        p_ins[(ctx, None)] = (prob, dist / dist.sum())
    return ChannelModel(sub, p_del, {}, p_ins, sharpness, noise, seed)


@dataclass
class Posteriorgram:
    frames: np.ndarray  # (T, V)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 2:
            frames = frames.reshape(len(frames), -1)
        self.frames = frames

    def __len__(self) -> int:
        return self.frames.shape[0]

    def log(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.frames)


def _frames(realized: Sequence[int], V: int, sharpness: float, noise: float,
            rng: np.random.Generator) -> np.ndarray:
    T = len(realized)
    z = rng.standard_normal((T, V))
    frames = np.zeros((T, V))
    if math.isinf(sharpness):
        frames[np.arange(T), list(realized)] = 1.0
        return frames
    logits = noise * z
    logits[np.arange(T), list(realized)] += sharpness
    logits -= logits.max(axis=1, keepdims=True)
    frames = np.exp(logits)
    return frames / frames.sum(axis=1, keepdims=True)


def _draw(dist: np.ndarray, first: int, u: float) -> int:
    # Inverse CDF with ``first`` placed at the front so that raising the
    # off-diagonal mass only ever turns kept phones into substitutions.
    order = [first] + [q for q in range(len(dist)) if q != first]
    cdf = np.cumsum(dist[order])
    k = int(np.searchsorted(cdf, u, side="right"))
    return order[min(k, len(order) - 1)]


def simulate(ide: Sequence[int], ch: ChannelModel, seed=None) -> tuple[PhoneSeq, Posteriorgram]:
    """Realize ``ide`` through the channel; deterministic for a given seed.

    Production events and frame noise use separate streams, and every IDE
    phone consumes the same number of draws, so runs with the same seed are
    coupled across channel settings.
    """
    seed = ch.seed if seed is None else seed
    seed = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    events = np.random.default_rng(seed + [0])
    acoustic = np.random.default_rng(seed + [1])
    V, sil = ch.n_phones, ch.sil
    ide = list(ide)
    out: list[int] = []

    def maybe_insert(left: int, right: int):
        for key in ((left, right), (left, None)):
            u_fire, u_pick = events.random(2)
            spec = ch.p_ins.get(key)
            if spec is not None and u_fire < spec[0]:
                out.append(_draw(spec[1], int(np.argmax(spec[1])), u_pick))

    maybe_insert(sil, ide[0] if ide else sil)
    prev = sil
    for i, p in enumerate(ide):
        u_del, u_sub = events.random(2)
        a = ch.p_del[p]
        b = ch.p_del_ctx.get((prev, p), 0.0)
        if u_del >= 1 - (1 - a) * (1 - b):
            out.append(_draw(ch.sub_matrix[p], p, u_sub))
        maybe_insert(p, ide[i + 1] if i + 1 < len(ide) else sil)
        prev = p
    post = Posteriorgram(_frames(out, V, ch.sharpness, ch.noise, acoustic))
    return tuple(out), post


def decode_free(post: Posteriorgram, lm: PhoneLM, lm_weight: float = DEFAULT_LM_WEIGHT,
                beam: int = DEFAULT_BEAM) -> PhoneSeq:
    """Beam search emitting one phone per frame.

    Maximizes the sum over frames of ``log posterior + lm_weight * log P_lm``.
    Hypotheses sharing an LM state are recombined; equal scores resolve to
    the lexicographically smallest phone sequence.
    """
    if beam < 1:
        raise ValueError("beam must be at least 1")
    if lm_weight < 0:
        raise ValueError("lm_weight must be non-negative")
    logpost = post.log()
    V = logpost.shape[1] if len(post) else lm.n_phones
    if V != lm.n_phones:
        raise ValueError("posteriorgram and LM have different phone sets")
    width = lm.order - 1
    hyps: list[tuple[float, PhoneSeq]] = [(0.0, ())]
    for t in range(len(post)):
        best: dict[PhoneSeq, tuple[float, PhoneSeq]] = {}
        for score, seq in hyps:
            step = logpost[t] + lm_weight * lm.next_logdist(seq)[:V] if lm_weight else logpost[t]
            totals = score + step
            for p in range(V):
                cand = (float(totals[p]), seq + (p,))
                state = cand[1][len(cand[1]) - width:] if width else ()
                known = best.get(state)
                if known is None or cand[0] > known[0] or (cand[0] == known[0] and cand[1] < known[1]):
                    best[state] = cand
        hyps = sorted(best.values(), key=lambda h: (-h[0], h[1]))[:beam]
    return hyps[0][1]


def alignment_score(logpost: np.ndarray, variant: Sequence[int], skip_penalty: float = DEFAULT_SKIP_PENALTY) -> float:
    """Best monotonic frame-to-phone mapping score.

    Every frame maps to one variant phone.  A phone that gets no frame costs
    ``skip_penalty``, and so does each frame beyond the first on one phone.
    """
    T, K = logpost.shape[0], len(variant)
    if K == 0:
        return 0.0 if T == 0 else -math.inf
    if T == 0:
        return skip_penalty * K
    emit = logpost[:, list(variant)]  # (T, K)
    ks = np.arange(K)
    prev = emit[0] + skip_penalty * ks
    for t in range(1, T):
        shifted = prev - skip_penalty * ks
        prefix = np.maximum.accumulate(shifted)
        from_earlier = np.full(K, -math.inf)
        from_earlier[1:] = prefix[:-1] + skip_penalty * (ks[1:] - 1)
        stay = prev + skip_penalty
        prev = emit[t] + np.maximum(stay, from_earlier)
    return float(np.max(prev + skip_penalty * (K - 1 - ks)))


def decode_forced(post: Posteriorgram, variants: Sequence[Sequence[int]], lm: PhoneLM | None,
                  lm_weight: float = DEFAULT_LM_WEIGHT,
                  skip_penalty: float = DEFAULT_SKIP_PENALTY) -> tuple[int, float]:
    """Pick the variant with the best alignment score plus weighted LM score.

    Ties go to the lowest index, so the canonical form (index 0) wins them.
    """
    if not variants:
        raise ValueError("decode_forced needs at least one variant")
    logpost = post.log()
    best_i, best = 0, -math.inf
    for i, v in enumerate(variants):
        s = alignment_score(logpost, v, skip_penalty)
        if lm is not None and lm_weight:
            s += lm_weight * lm.score(v)
        if i == 0 or s > best:
            best_i, best = i, s
    return best_i, best


TP, FP, FN, TN = "TP", "FP", "FN", "TN"


def error_flags(ide: Sequence[int], other: Sequence[int]) -> list[bool]:
    """Per IDE position, whether ``other`` deviates there.

    Insertions count against the preceding IDE position (position 0 when
    they come first).
    """
    flags = [False] * len(ide)
    if not ide:
        return flags
    last = 0
    for op in align(ide, other).ops:
        if op.ref_pos is not None:
            last = op.ref_pos
        if op.kind in (OpKind.SUB, OpKind.DEL):
            flags[op.ref_pos] = True
        elif op.kind is OpKind.INS:
            flags[last] = True
    return flags


def detect(ide: Sequence[int], man: Sequence[int], asr: Sequence[int]) -> list[str]:
    gold = error_flags(ide, man)
    found = error_flags(ide, asr)
    labels = []
    for g, f in zip(gold, found):
        labels.append(TP if g and f else FN if g else FP if f else TN)
    return labels


def _safe_per(s: AlignmentStats) -> float | None:
    try:
        return per(s)
    except UndefinedMetric:
        return None


@dataclass
class DetectionReport:
    utterances: list[dict]
    per_asr_man: float | None
    per_asr_ide: float | None
    per_man_ide: float | None
    stats_asr_man: AlignmentStats
    stats_asr_ide: AlignmentStats
    stats_man_ide: AlignmentStats
    counts: dict[str, int]
    per_phone: list[dict]
    skipped: int = 0

    @property
    def precision(self) -> float:
        c = self.counts
        if c[TP] + c[FP] == 0:
            return 1.0 if c[FN] == 0 else 0.0
        return c[TP] / (c[TP] + c[FP])

    @property
    def recall(self) -> float:
        c = self.counts
        if c[TP] + c[FN] == 0:
            return 1.0
        return c[TP] / (c[TP] + c[FN])

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    @property
    def detection_accuracy(self) -> float:
        n = sum(self.counts.values())
        return 100.0 * (self.counts[TP] + self.counts[TN]) / n if n else 100.0

    @property
    def phone_accuracy(self) -> float | None:
        return None if self.per_asr_man is None else 100.0 - self.per_asr_man

    def summary(self) -> dict:
        def st(s: AlignmentStats) -> dict:
            return {"S": s.S, "D": s.D, "I": s.I, "P": s.P, "C": s.C}

        return {
            "per_asr_man": self.per_asr_man,
            "per_asr_ide": self.per_asr_ide,
            "per_man_ide": self.per_man_ide,
            "phone_accuracy": self.phone_accuracy,
            "stats_asr_man": st(self.stats_asr_man),
            "stats_asr_ide": st(self.stats_asr_ide),
            "stats_man_ide": st(self.stats_man_ide),
            "detection": dict(self.counts),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "detection_accuracy": self.detection_accuracy,
            "n_utterances": len(self.utterances),
            "skipped": self.skipped,
        }

    def to_json(self, **extra) -> str:
        body = dict(extra)
        body["overall"] = self.summary()
        body["per_phone"] = self.per_phone
        body["utterances"] = self.utterances
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def write_csv(self, overall_path, per_phone_path) -> None:
        with open(overall_path, "w", encoding="utf-8", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["metric", "value"])
            for key, value in self.summary().items():
                if isinstance(value, dict):
                    for sub, v in value.items():
                        out.writerow([f"{key}.{sub}", v])
                else:
                    out.writerow([key, "" if value is None else value])
        with open(per_phone_path, "w", encoding="utf-8", newline="") as fh:
            cols = ["phone", "n", TP, FP, FN, TN, "gold_error_rate", "detection_accuracy"]
            out = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            out.writeheader()
            for row in self.per_phone:
                out.writerow(row)


def evaluate(utts: Sequence[Utterance], inv: PhoneInventory,
             outputs: dict[str, Sequence[int]] | None = None) -> DetectionReport:
    """Score system output against the gold MAN tier.

    ``outputs`` maps utterance id to decoded phones; without it the ASR tier
    of each utterance is used.  Utterances missing MAN or output are skipped
    and counted.
    """
    rows: list[dict] = []
    triples: list[tuple[PhoneSeq, PhoneSeq, PhoneSeq]] = []
    counts = {TP: 0, FP: 0, FN: 0, TN: 0}
    phone_counts: dict[int, dict[str, int]] = {}
    skipped = 0
    for utt in utts:
        asr = utt.asr if outputs is None else outputs.get(utt.id)
        if utt.man is None or asr is None:
            skipped += 1
            continue
        asr = tuple(asr)
        labels = detect(utt.ide, utt.man, asr)
        for p, lab in zip(utt.ide, labels):
            counts[lab] += 1
            pc = phone_counts.setdefault(p, {TP: 0, FP: 0, FN: 0, TN: 0})
            pc[lab] += 1
        triples.append((utt.ide, utt.man, asr))
        rows.append({"id": utt.id, "asr": inv.fmt(asr), "labels": " ".join(labels)})

    s_am = corpus_stats((m, a) for _, m, a in triples)
    s_ai = corpus_stats((i, a) for i, _, a in triples)
    s_mi = corpus_stats((i, m) for i, m, _ in triples)
    per_phone = []
    for p in sorted(phone_counts):
        c = phone_counts[p]
        n = sum(c.values())
        per_phone.append({
            "phone": inv.label(p),
            "n": n,
            **c,
            "gold_error_rate": round((c[TP] + c[FN]) / n, 6),
            "detection_accuracy": round(100.0 * (c[TP] + c[TN]) / n, 4),
        })
    return DetectionReport(
        utterances=rows,
        per_asr_man=_safe_per(s_am),
        per_asr_ide=_safe_per(s_ai),
        per_man_ide=_safe_per(s_mi),
        stats_asr_man=s_am,
        stats_asr_ide=s_ai,
        stats_man_ide=s_mi,
        counts=counts,
        per_phone=per_phone,
        skipped=skipped,
    )


def write_posteriorgrams(posts: dict[str, Posteriorgram], path) -> None:
    """One ``[utt_id]`` header per block, then one frame per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, post in posts.items():
            fh.write(f"[{utt_id}]\n")
            for frame in post.frames:
                fh.write(" ".join(repr(float(x)) for x in frame) + "\n")


def read_posteriorgrams(path, n_phones: int) -> dict[str, Posteriorgram]:
    posts: dict[str, list[list[float]]] = {}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                if current in posts:
                    raise ValueError(f"{path}:{lineno}: duplicate posteriorgram {current!r}")
                posts[current] = []
                continue
            if current is None:
                raise ValueError(f"{path}:{lineno}: frame before any [utt_id] header")
            frame = [float(x) for x in line.split()]
            if len(frame) != n_phones:
                raise ValueError(f"{path}:{lineno}: expected {n_phones} probabilities, got {len(frame)}")
            posts[current].append(frame)
    return {k: Posteriorgram(np.array(v).reshape(len(v), n_phones)) for k, v in posts.items()}
