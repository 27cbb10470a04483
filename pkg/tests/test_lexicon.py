import itertools
import random

import pytest

from mispron.corpus import Lexicon, load_lexicon
from mispron.lexicon import (
    ErrorRule,
    RuleFormatError,
    RuleKind,
    expand,
    expand_lexicon,
    parse_rule,
    parse_rules,
    utterance_variants,
    write_rules,
)

from .oracles import enumerate_variants


def phones(inv, variants):
    return [inv.fmt(v.phones) for v in variants]


def test_parse_substitution(inv, enc):
    rule = parse_rule("S\tdh\tdh/d", inv)
    assert rule.kind is RuleKind.SUB
    assert rule.lhs == enc("dh")
    assert rule.alternatives == ((enc("dh")[0],), (enc("d")[0],))


def test_parse_deletion(inv, enc):
    rule = parse_rule("D\tn d\tn d/", inv)
    assert rule.kind is RuleKind.DEL
    assert rule.lhs == enc("n d")
    assert set(rule.alternatives) == {enc("d"), ()}


def test_parse_insertion_with_empty_option(inv, enc):
    rule = parse_rule("I\ter\ter r/R/", inv)
    assert rule.alternatives == (enc("r"), enc("R"), ())


def test_parse_cluster_insertion(inv, enc):
    rule = parse_rule("I\tp l\tp ax/o l", inv)
    assert rule.lhs == enc("p l")
    assert rule.alternatives == (enc("ax"), enc("o"))


@pytest.mark.parametrize(
    "line, match",
    [
        ("S\tdh\tdh/qq", "unknown phone"),
        ("S\tdh\td/s", "original phone"),
        ("S\tdh\tdh/", "cannot be empty"),
        ("D\tn d\tn d", "deletion must read"),
        ("I\ter\tax r/R/", "insertion must repeat"),
        ("X\ter\ter r", "unknown rule kind"),
        ("S\tdh", "expected"),
    ],
)
def test_malformed_rules(inv, line, match):
    with pytest.raises(RuleFormatError, match=match):
        parse_rule(line, inv)


def test_rule_file_round_trip(tmp_path, inv, rules):
    path = tmp_path / "rules.tsv"
    write_rules(rules, path, inv, header="copy")
    assert parse_rules(path, inv) == rules
    assert [r.to_line(inv) for r in rules][:2] == ["S\tih\tih/i/iy", "S\tdh\tdh/d"]


def test_shipped_table_rows(inv, rules):
    got = [r.describe(inv) for r in rules]
    assert got == [
        "ih → ih/i/iy", "dh → dh/d", "ax → ax/a/o/oh", "z → z/s", "r → r/R", "uh → uh/u",
        "n d → n d/", "l d → l d/", "th d → th d/", "s t → s t/", "n t → n t/", "ay k → ay k/", "ae k → ae k/",
        "er → er r/R/", "aa → aa r/R/", "ao → ao r/R/", "p l → p ax/o l", "b l → b ax/o l", "k l → k ax l",
        "g l → g ax l",
    ]


def test_her_gets_three_transcriptions(inv, rules, enc):
    variants = expand("HER", enc("hh er"), rules)
    assert phones(inv, variants)[0] == "hh er"
    assert set(phones(inv, variants)) == {"hh er", "hh er R", "hh er r"}
    assert len(variants) == 3


def test_and_with_only_nd_rule(inv, enc):
    rule = parse_rule("D\tn d\tn d/", inv)
    assert phones(inv, expand("AND", enc("ae n d"), [rule])) == ["ae n d", "ae n"]


def test_and_with_table(inv, rules, enc):
    got = set(phones(inv, expand("AND", enc("ae n d"), rules)))
    assert {"ae n d", "ae n"} <= got


def test_no_sites_returns_canonical(enc, rules):
    canon = enc("m eh")
    assert [v.phones for v in expand("XYZ", canon, rules)] == [canon]


def test_play_cluster_insertion(inv, enc):
    rule = parse_rule("I\tp l\tp ax/o l", inv)
    assert set(phones(inv, expand("PLAY", enc("p l ey"), [rule]))) == {"p l ey", "p ax l ey", "p o l ey"}


def test_longer_pattern_wins_same_position(inv, enc):
    sub_d = ErrorRule(RuleKind.SUB, enc("d"), (enc("d"), enc("t")))
    del_nd = parse_rule("D\tn d\tn d/", inv)
    got = set(phones(inv, expand("AND", enc("ae n d"), [sub_d, del_nd])))
    assert got == {"ae n d", "ae n"}


def test_equal_patterns_merge(inv, enc):
    a = parse_rule("S\tih\tih/i", inv)
    b = parse_rule("S\tih\tih/iy", inv)
    got = set(phones(inv, expand("SIT", enc("s ih t"), [a, b])))
    assert got == {"s ih t", "s i t", "s iy t"}


def test_cap_truncation_order(inv, enc):
    rules = [parse_rule(line, inv) for line in ("S\tih\tih/i", "S\tdh\tdh/d", "S\tz\tz/s")]
    canon = enc("dh ih z")
    full = expand("W", canon, rules, cap=100)
    assert len(full) == 8
    capped = expand("W", canon, rules, cap=4)
    assert [v.phones for v in capped] == [v.phones for v in full[:4]]
    assert capped[0].phones == canon
    # after the canonical form, single edits come first, ordered by phone index
    singles = sorted([enc("d ih z"), enc("dh i z"), enc("dh ih s")])
    assert [v.phones for v in capped[1:]] == singles
    assert [v.edits for v in full] == [0, 1, 1, 1, 2, 2, 2, 3]


def test_cap_one_is_canonical_only(enc, rules):
    assert [v.phones for v in expand("HER", enc("hh er"), rules, cap=1)] == [enc("hh er")]
    with pytest.raises(ValueError):
        expand("HER", enc("hh er"), rules, cap=0)


def test_provenance_names_rule_and_position(inv, enc, rules):
    variants = expand("THE", enc("dh ax"), rules)
    d_ax = next(v for v in variants if v.phones == enc("d ax"))
    ((rule, pos),) = d_ax.provenance
    assert rule.describe(inv) == "dh → dh/d" and pos == 0


def test_expand_lexicon(inv, rules, enc):
    lex = Lexicon({"HER": [enc("hh er")]})
    adapted = expand_lexicon(lex, rules)
    assert len(adapted["HER"]) == 3 and adapted["HER"][0] == enc("hh er")
    assert expand_lexicon(lex, []).entries == lex.entries


def test_expand_lexicon_three_sites_cap_four(inv, enc):
    rules = [parse_rule(line, inv) for line in ("S\tih\tih/i", "S\tdh\tdh/d", "S\tz\tz/s")]
    adapted = expand_lexicon(Lexicon({"W": [enc("dh ih z")]}), rules, cap=4)
    assert len(adapted["W"]) == 4
    assert adapted["W"][0] == enc("dh ih z")
    assert adapted.max_variants == 4 and adapted.total_variants == 4


def test_adapted_lexicon_file_reloads(tmp_path, inv, demo_lex, rules):
    adapted = expand_lexicon(demo_lex, rules)
    path = tmp_path / "adapted.tsv"
    adapted.write(path, inv)
    assert load_lexicon(path, inv) == adapted
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first.endswith("# canonical")


def test_matches_enumeration_oracle(inv):
    # small alphabet drawn from phones the rule shapes need
    alphabet = [inv.index(s) for s in ("n", "d", "ih", "er", "p", "l")]
    pool = [
        parse_rule("S\tih\tih/i/iy", inv),
        parse_rule("S\td\td/t", inv),
        parse_rule("D\tn d\tn d/", inv),
        parse_rule("I\ter\ter r/R/", inv),
        parse_rule("I\tp l\tp ax/o l", inv),
        parse_rule("S\tl\tl/R", inv),
        parse_rule("I\tn\tn ax/", inv),
    ]
    rng = random.Random(3)
    for _ in range(300):
        canon = tuple(rng.choice(alphabet) for _ in range(rng.randint(1, 5)))
        rules = rng.sample(pool, rng.randint(0, 3))
        got = expand("W", canon, rules, cap=10_000)
        expected = enumerate_variants(canon, rules)
        assert {v.phones for v in got} == expected
        assert len(got) == len(expected)
        assert got[0].phones == canon
        assert got == expand("W", canon, rules, cap=10_000)


def test_utterance_variants(inv, rules, enc):
    lex = Lexicon({"HER": [enc("hh er")], "THE": [enc("dh ax")]})
    adapted = expand_lexicon(lex, rules)
    vs = utterance_variants(["THE", "HER"], adapted, cap=100)
    assert vs[0] == enc("dh ax hh er")
    assert len(vs) == len(adapted["THE"]) * len(adapted["HER"])
    capped = utterance_variants(["THE", "HER"], adapted, cap=5)
    assert capped == vs[:5]
    # ranked by number of non-canonical words
    n_changed = [sum(a != b for a, b in itertools.zip_longest(v, vs[0])) > 0 for v in capped]
    assert n_changed[0] is False
