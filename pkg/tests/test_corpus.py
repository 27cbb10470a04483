import warnings

import pytest

from mispron.corpus import (
    DuplicateSymbol,
    DuplicateUtterance,
    FormatError,
    Lexicon,
    UnknownPhone,
    check_ide,
    load_corpus,
    load_inventory,
    load_lexicon,
    write_corpus,
    write_lexicon,
)
from mispron.experiment import default_lexicon_path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_two_symbol_inventory(tmp_path):
    inv = load_inventory(write(tmp_path, "inv.tsv", "ih\tEnglish\nR\tItalian\n"))
    assert inv.symbols == ("ih", "R")
    assert len(inv) == 2
    assert inv.specials == ("SIL", "EPS")
    assert inv.label(inv.sil) == "SIL" and inv.label(inv.eps) == "EPS"


def test_duplicate_symbol_reports_second_line(tmp_path):
    path = write(tmp_path, "inv.tsv", "# header\nih\tEnglish\nih\tEnglish\n")
    with pytest.raises(DuplicateSymbol) as err:
        load_inventory(path)
    assert err.value.lineno == 3


@pytest.mark.parametrize("line", ["xx\tKlingon", "a/b\tEnglish", "a–b\tEnglish", "SIL\tShared", "ih"])
def test_bad_inventory_lines(tmp_path, line):
    with pytest.raises(FormatError):
        load_inventory(write(tmp_path, "inv.tsv", line + "\n"))


def test_default_inventory_has_both_languages(inv):
    assert inv.origin("dh") == "English"
    assert inv.origin("R") == "Italian"
    assert [inv.index(s) for s in inv.symbols] == list(range(len(inv)))


def test_load_corpus_her_record(tmp_path, inv, enc):
    path = write(tmp_path, "c.tsv", "u1\tspk\tsynthetic\tHER\thh er\thh er r\t-\n")
    (utt,) = load_corpus(path, inv)
    assert utt.ide == enc("hh er")
    assert utt.man == enc("hh er r")
    assert utt.asr is None
    assert utt.words == ("HER",)


def test_unknown_phone_names_utterance_tier_position(tmp_path, inv):
    path = write(tmp_path, "c.tsv", "u7\tspk\tx\tW\thh qq\t-\t-\n")
    with pytest.raises(UnknownPhone) as err:
        load_corpus(path, inv)
    assert err.value.token == "qq"
    assert err.value.position == 1
    assert "u7" in str(err.value) and "ide" in str(err.value)


def test_duplicate_utterance_id(tmp_path, inv):
    line = "u1\tspk\tx\tW\thh er\t-\t-\n"
    with pytest.raises(DuplicateUtterance):
        load_corpus(write(tmp_path, "c.tsv", line * 2), inv)


def test_corpus_round_trip_is_byte_exact(tmp_path, inv):
    src = default_lexicon_path().with_name("demo_corpus.tsv")
    utts = load_corpus(src, inv)
    out = tmp_path / "again.tsv"
    write_corpus(utts, out, inv)
    assert out.read_text(encoding="utf-8") == src.read_text(encoding="utf-8")
    assert all(p < len(inv) for u in utts for seq in (u.ide, u.man, u.asr) if seq for p in seq)


def test_ide_mismatch_warns_not_raises(tmp_path, inv):
    lex = load_lexicon(default_lexicon_path(), inv)
    path = write(tmp_path, "c.tsv", "u1\tspk\tx\tHER\thh ax\t-\t-\n")
    with pytest.warns(UserWarning, match="IDE tier differs"):
        load_corpus(path, inv, lexicon=lex)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ok = load_corpus(write(tmp_path, "d.tsv", "u1\tspk\tx\tHER AND\thh er ae n d\t-\t-\n"), inv, lexicon=lex)
    assert check_ide(ok[0], lex)


def test_lexicon_entries(tmp_path, inv, enc):
    path = write(tmp_path, "lex.tsv", "HER\thh er\nHER\thh er\nAND\tae n d\nAND\tae n\n")
    lex = load_lexicon(path, inv)
    assert lex["HER"] == [enc("hh er")]
    assert lex["AND"] == [enc("ae n d"), enc("ae n")]
    assert lex.canonical("and") == enc("ae n d")


def test_lexicon_rejects_empty_and_unknown(tmp_path, inv):
    with pytest.raises(FormatError, match="empty pronunciation"):
        load_lexicon(write(tmp_path, "a.tsv", "HER\t \n"), inv)
    with pytest.raises(FormatError, match="position 1"):
        load_lexicon(write(tmp_path, "b.tsv", "HER\thh qq\n"), inv)


def test_lexicon_canonical_stable_across_reload(tmp_path, inv, demo_lex):
    out = tmp_path / "lex.tsv"
    write_lexicon(demo_lex, out, inv)
    again = load_lexicon(out, inv)
    assert again == demo_lex
    assert all(again.canonical(w) == demo_lex.canonical(w) for w in demo_lex)


def test_lexicon_add_rejects_empty():
    with pytest.raises(ValueError):
        Lexicon().add("X", ())
