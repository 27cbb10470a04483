import csv
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mispron.confuse import ConfusionTable, induce_rules, mine, profile, write_profile
from mispron.lexicon import RuleKind

pair_lists = st.lists(
    st.tuples(st.lists(st.integers(0, 3), max_size=5), st.lists(st.integers(0, 3), max_size=5)),
    max_size=5,
)
SIL = 4


def test_substitution_count(inv, enc):
    t = mine([(enc("dh ax"), enc("d ax"))], inv.sil)
    assert t.sub_counts[enc("dh")[0], enc("d")[0]] == 1
    assert sum(t.sub_counts.values()) == 1


def test_deletion_with_left_context(inv, enc):
    t = mine([(enc("ae n d"), enc("ae n"))], inv.sil)
    n, d = enc("n d")
    assert t.del_ctx_counts[n, d] == 1
    assert t.del_counts[d] == 1


def test_boundary_contexts(inv, enc):
    t = mine([(enc("dh ax"), enc("ax")), (enc("er"), enc("er r"))], inv.sil)
    assert t.del_ctx_counts[inv.sil, enc("dh")[0]] == 1
    er, r = enc("er r")
    assert t.ins_ctx_counts[er, r] == 1
    t2 = mine([(enc("er"), enc("hh er"))], inv.sil)
    assert t2.ins_ctx_counts[inv.sil, enc("hh")[0]] == 1


def test_empty_pairs_give_zero_table(inv):
    t = mine([], inv.sil)
    assert t.is_empty() and not t.ref_totals
    assert profile(t, 3) == []


@given(pair_lists, pair_lists)
def test_mine_is_additive(a, b):
    assert mine(a + b, SIL) == mine(a, SIL) + mine(b, SIL)


@given(pair_lists)
def test_counts_bounded_by_totals(pairs):
    t = mine(pairs, SIL)
    for p in range(4):
        subs = sum(c for (r, _), c in t.sub_counts.items() if r == p)
        assert subs + t.del_counts[p] <= t.ref_totals[p]


def test_profile_rate_and_ranking(inv, enc):
    dh, d, ax = enc("dh d ax")
    t = ConfusionTable(inv.sil)
    t.sub_counts[dh, d] = 5
    t.ref_totals[dh] = 20
    rows = profile(t, 3)
    assert len(rows) == 1
    assert (rows[0].phone, rows[0].kind, rows[0].target, rows[0].count) == (dh, "sub", d, 5)
    assert rows[0].rate == 0.25


def test_profile_tie_break_by_phone_index(inv, enc):
    dh, d, t_, ax = enc("dh d t ax")
    table = ConfusionTable(inv.sil)
    table.ref_totals[dh] = 10
    table.sub_counts[dh, t_] = 2
    table.sub_counts[dh, d] = 2
    table.sub_counts[dh, ax] = 3
    rows = profile(table, 5)
    assert [r.target for r in rows] == [ax] + sorted([d, t_])
    assert len(profile(table, 1)) == 1


def test_profile_csv(tmp_path, inv, enc):
    t = mine([(enc("dh ax"), enc("d ax"))] * 3 + [(enc("ae n d"), enc("ae n"))], inv.sil)
    path = tmp_path / "p.csv"
    write_profile(profile(t, 5), path, inv)
    rows = list(csv.DictReader(path.open()))
    assert rows[0].keys() == {"phone", "kind", "target", "count", "rate"}
    assert {"phone": "dh", "kind": "sub", "target": "d", "count": "3", "rate": "1.000000"} in rows
    assert {"phone": "d", "kind": "del", "target": "EPS", "count": "1", "rate": "1.000000"} in rows


def test_induce_dh_rule(inv, enc):
    t = mine([(enc("dh ax"), enc("d ax"))] * 10, inv.sil)
    rules = induce_rules(t, min_count=3, min_rate=0.2)
    assert [r.describe(inv) for r in rules] == ["dh → dh/d"]
    assert rules[0].count == 10
    assert induce_rules(t, min_count=20, min_rate=0.2) == []


def test_induce_deletion_rule(inv, enc):
    n, d = enc("n d")
    t = ConfusionTable(inv.sil)
    t.del_ctx_counts[n, d] = 8
    t.del_counts[d] = 8
    t.ref_totals[d] = 10
    t.ref_totals[n] = 10
    rules = induce_rules(t, min_count=5, min_rate=0.5)
    assert [r.describe(inv) for r in rules] == ["n d → n d/"]
    assert rules[0].kind is RuleKind.DEL


def test_induce_insertion_rule_and_skip_boundary(inv, enc):
    t = mine([(enc("er"), enc("er r"))] * 6 + [(enc("ax"), enc("hh ax"))] * 6, inv.sil)
    rules = induce_rules(t, min_count=5, min_rate=0.1)
    assert [r.describe(inv) for r in rules] == ["er → er r/"]


def test_induce_rejects_bad_thresholds(inv):
    t = ConfusionTable(inv.sil)
    with pytest.raises(ValueError):
        induce_rules(t, min_count=0)
    with pytest.raises(ValueError):
        induce_rules(t, min_rate=0.0)


def _random_table(rng):
    t = ConfusionTable(SIL)
    for p in range(4):
        t.ref_totals[p] = rng.randint(1, 12)
    t.ref_totals[SIL] = rng.randint(1, 12)
    for p in range(4):
        for q in range(4):
            if p != q and rng.random() < 0.4:
                t.sub_counts[p, q] = rng.randint(1, t.ref_totals[p])
        for c in list(range(4)) + [SIL]:
            if rng.random() < 0.3:
                t.del_ctx_counts[c, p] = rng.randint(1, t.ref_totals[p])
            if rng.random() < 0.3:
                t.ins_ctx_counts[c, p] = rng.randint(1, t.ref_totals[c])
    return t


def test_rules_are_exactly_the_qualifying_entries():
    rng = random.Random(2)
    for _ in range(200):
        t = _random_table(rng)
        min_count = rng.randint(1, 6)
        min_rate = rng.choice([0.05, 0.2, 0.5, 1.0])
        expected = Counter()
        for (p, q), c in t.sub_counts.items():
            if c >= min_count and c / t.ref_totals[p] >= min_rate:
                expected["S", (p,), q] += 1
        for (ctx, p), c in t.del_ctx_counts.items():
            if ctx != SIL and c >= min_count and c / t.ref_totals[p] >= min_rate:
                expected["D", (ctx, p), p] += 1
        for (ctx, q), c in t.ins_ctx_counts.items():
            if ctx != SIL and c >= min_count and c / t.ref_totals[ctx] >= min_rate:
                expected["I", (ctx,), q] += 1
        got = Counter()
        for r in induce_rules(t, min_count, min_rate):
            slot = next(a for a in r.alternatives if a != r.identity) if r.kind is not RuleKind.DEL else (r.lhs[1],)
            got[r.kind.value, r.lhs, slot[0]] += 1
        assert got == expected
        counts = [r.count for r in induce_rules(t, min_count, min_rate)]
        assert counts == sorted(counts, reverse=True)
