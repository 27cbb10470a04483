"""Command-line entry point.

Exit codes: 0 success, 2 usage/config/input error, 1 internal failure.
Data goes to stdout (or files under ``--out``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import lm as lm_mod
from .align import UndefinedMetric, align, corpus_stats, per, stats
from .config import ExperimentConfig
from .confuse import DEFAULT_MIN_COUNT, DEFAULT_MIN_RATE, induce_rules, mine, profile, write_profile
from .corpus import TIERS, FormatError, UnknownPhone, load_corpus, load_inventory, load_lexicon, write_corpus
from .experiment import StageError, default_lexicon_path, run_experiment, stage_seed
from .lexicon import DEFAULT_CAP, expand_lexicon, parse_rules, utterance_variants
from .recognizer import (
    DEFAULT_BEAM,
    DEFAULT_LM_WEIGHT,
    DEFAULT_SKIP_PENALTY,
    channel_from_confusions,
    channel_from_rules,
    decode_forced,
    decode_free,
    evaluate,
    read_posteriorgrams,
    simulate,
    write_posteriorgrams,
)

log = logging.getLogger("mispron")


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_tier(utts, tier: str, anywhere: bool = False):
    missing = [u.id for u in utts if u.tier(tier) is None]
    if anywhere and len(missing) == len(utts):
        raise UsageError(f"no utterance has a {tier.upper()} tier")
    if not anywhere and missing:
        raise UsageError(f"{len(missing)} utterance(s) lack the {tier.upper()} tier, e.g. {missing[0]}")


def cmd_align(args, inv) -> int:
    utts = load_corpus(args.corpus, inv)
    _require_tier(utts, args.ref)
    _require_tier(utts, args.hyp)
    rows = []
    for u in utts:
        s = stats(align(u.tier(args.ref), u.tier(args.hyp)))
        rows.append([u.id, s.S, s.D, s.I, s.P, "" if s.P == 0 else f"{per(s):.4f}"])
    total = corpus_stats((u.tier(args.ref), u.tier(args.hyp)) for u in utts)
    try:
        corpus = f"{per(total):.4f}"
    except UndefinedMetric:
        corpus = ""
    rows.append(["__corpus__", total.S, total.D, total.I, total.P, corpus])
    header = ["id", "S", "D", "I", "P", "per"]
    if args.out:
        out = _out_dir(args)
        name = f"align_{args.ref}_{args.hyp}"
        with open(out / f"{name}.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        summary = {"ref": args.ref, "hyp": args.hyp, "S": total.S, "D": total.D, "I": total.I,
                   "P": total.P, "per": float(corpus) if corpus else None}
        (out / f"{name}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return 0


def _mine_corpus(args, inv):
    utts = load_corpus(args.corpus, inv)
    _require_tier(utts, "man", anywhere=True)
    return mine(((u.ide, u.man) for u in utts if u.man is not None), inv.sil)


def cmd_mine(args, inv) -> int:
    table = _mine_corpus(args, inv)
    out = _out_dir(args)
    write_profile(profile(table, args.top_k), out / "error_profile.csv", inv)
    return 0


def cmd_induce(args, inv) -> int:
    table = _mine_corpus(args, inv)
    out = _out_dir(args)
    write_profile(profile(table, args.top_k), out / "error_profile.csv", inv)
    rules = induce_rules(table, args.min_count, args.min_rate)
    with open(out / "induced_rules.tsv", "w", encoding="utf-8") as fh:
        for r in rules:
            fh.write(r.to_line(inv) + "\n")
    if not rules:
        log.warning("no confusion met min_count=%d and min_rate=%g; rule file is empty", args.min_count, args.min_rate)
    return 0


def cmd_expand(args, inv) -> int:
    lex = load_lexicon(args.lexicon, inv)
    rules = parse_rules(args.rules or None, inv)
    adapted = expand_lexicon(lex, rules, args.cap)
    out = _out_dir(args)
    adapted.write(out / "adapted_lexicon.tsv", inv)
    print(f"words\t{len(adapted)}\nvariants\t{adapted.total_variants}\nmax_per_word\t{adapted.max_variants}")
    return 0


def cmd_train(args, inv) -> int:
    if not 1 <= args.order <= lm_mod.MAX_ORDER:
        raise UsageError(f"--order must be in 1..{lm_mod.MAX_ORDER}")
    utts = load_corpus(args.corpus, inv)
    _require_tier(utts, args.tier)
    seqs = [u.tier(args.tier) for u in utts]
    smoothing = lm_mod.Smoothing(args.smoothing, args.k)
    out = _out_dir(args)
    orders = range(1, args.order + 1) if args.sweep else [args.order]
    print("order\tperplexity")
    for n in orders:
        model = lm_mod.train(seqs, n, smoothing, inv)
        print(f"{n}\t{model.perplexity(seqs):.6f}")
    model.save(out / "phone_lm.txt")
    return 0


def cmd_simulate(args, inv) -> int:
    utts = load_corpus(args.corpus, inv)
    if args.from_corpus:
        source = load_corpus(args.from_corpus, inv)
        table = mine(((u.ide, u.man) for u in source if u.man is not None), inv.sil)
        ch = channel_from_confusions(table, len(inv), args.sharpness, args.noise, args.seed)
    else:
        rules = parse_rules(args.rules or None, inv)
        ch = channel_from_rules(rules, len(inv), args.rate, args.sharpness, args.noise, args.seed)
    seed = stage_seed(args.seed, "simulate")
    realized, posts = [], {}
    for i, u in enumerate(utts):
        man, post = simulate(u.ide, ch, seed=seed + [i])
        realized.append(replace(u, man=man))
        posts[u.id] = post
    out = _out_dir(args)
    write_corpus(realized, out / "simulated_corpus.tsv", inv)
    write_posteriorgrams(posts, out / "posteriors.txt")
    return 0


def cmd_decode(args, inv) -> int:
    utts = load_corpus(args.corpus, inv)
    posts = read_posteriorgrams(args.posteriors, len(inv))
    model = lm_mod.load(args.lm)
    if model.symbols != inv.symbols:
        raise UsageError("language model vocabulary does not match the inventory")
    adapted = None
    if args.mode == "forced":
        lex = load_lexicon(args.lexicon or default_lexicon_path(), inv)
        adapted = expand_lexicon(lex, parse_rules(args.rules or None, inv), args.cap)
    decoded = []
    for u in utts:
        if u.id not in posts:
            raise UsageError(f"no posteriorgram for utterance {u.id!r}")
        post = posts[u.id]
        if adapted is None:
            asr = decode_free(post, model, args.lm_weight, args.beam)
        else:
            variants = utterance_variants(u.words, adapted, args.cap)
            best, _ = decode_forced(post, variants, model, args.lm_weight, args.skip_penalty)
            asr = variants[best]
        decoded.append(replace(u, asr=asr))
    out = _out_dir(args)
    write_corpus(decoded, out / f"decoded_{args.mode}.tsv", inv)
    return 0


def cmd_evaluate(args, inv) -> int:
    utts = load_corpus(args.corpus, inv)
    _require_tier(utts, "man", anywhere=True)
    _require_tier(utts, "asr", anywhere=True)
    report = evaluate(utts, inv)
    if report.skipped:
        log.warning("skipped %d utterance(s) without MAN or ASR tier", report.skipped)
    out = _out_dir(args)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    report.write_csv(out / "report_overall.csv", out / "report_per_phone.csv")
    return 0


def cmd_run_experiment(args, inv) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out:
        overrides["out"] = args.out
    if args.inventory:
        overrides["inventory"] = args.inventory
    cfg = ExperimentConfig.from_mapping(overrides, cfg)
    results = run_experiment(cfg)
    print((Path(cfg.out) / "summary.txt").read_text(encoding="utf-8"), end="")
    return 0 if results else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--inventory", help="phone inventory file (default: shipped inventory)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--config", help="experiment config file (key = value lines)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mispron", description="Phone-level mispronunciation analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", parents=[common], help="PER between two tiers")
    p.add_argument("corpus")
    p.add_argument("--ref", choices=TIERS, default="ide")
    p.add_argument("--hyp", choices=TIERS, default="man")
    p.set_defaults(func=cmd_align)

    for name, func, helptext in (("mine", cmd_mine, "error profile of MAN against IDE"),
                                 ("induce", cmd_induce, "induce error rules from MAN against IDE")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("corpus")
        p.add_argument("--top-k", type=int, default=5)
        p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT)
        p.add_argument("--min-rate", type=float, default=DEFAULT_MIN_RATE)
        p.set_defaults(func=func)

    p = sub.add_parser("expand", parents=[common], help="build an adapted lexicon")
    p.add_argument("lexicon")
    p.add_argument("--rules", help="rule file (default: shipped error rules)")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("train", parents=[common], help="train a phone n-gram model")
    p.add_argument("corpus")
    p.add_argument("--tier", choices=TIERS, default="man")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--smoothing", choices=("add_k", "witten_bell"), default="add_k")
    p.add_argument("--k", type=float, default=0.1)
    p.add_argument("--sweep", action="store_true", help="report perplexity for every order up to --order")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", parents=[common], help="realize IDE tiers through a confusion channel")
    p.add_argument("corpus")
    p.add_argument("--rules", help="rule file driving the channel (default: shipped error rules)")
    p.add_argument("--from-corpus", help="build the channel from MAN/IDE confusions in this corpus instead")
    p.add_argument("--rate", type=float, default=0.15)
    p.add_argument("--sharpness", type=float, default=2.5)
    p.add_argument("--noise", type=float, default=1.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", parents=[common], help="decode posteriorgrams")
    p.add_argument("corpus")
    p.add_argument("posteriors")
    p.add_argument("--lm", required=True)
    p.add_argument("--mode", choices=("free", "forced"), default="free")
    p.add_argument("--lexicon")
    p.add_argument("--rules")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--lm-weight", type=float, default=DEFAULT_LM_WEIGHT)
    p.add_argument("--beam", type=int, default=DEFAULT_BEAM)
    p.add_argument("--skip-penalty", type=float, default=DEFAULT_SKIP_PENALTY)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", parents=[common], help="detection report for a corpus with MAN and ASR tiers")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-experiment", parents=[common], help="n-gram baseline vs error model, end to end")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=cmd_run_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.seed is None and args.command != "run-experiment":
        args.seed = 0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            inv = load_inventory(args.inventory)
            return args.func(args, inv)
    except (UsageError, FormatError, UnknownPhone, lm_mod.ConfigError, FileNotFoundError) as e:
        print(f"mispron {args.command}: {e}", file=sys.stderr)
        return 2
    except StageError as e:
        cause = e.__cause__
        if isinstance(cause, (FormatError, UnknownPhone, lm_mod.ConfigError, FileNotFoundError)):
            print(f"mispron {args.command}: {e}", file=sys.stderr)
            return 2
        print(f"mispron {args.command}: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"mispron {args.command}: internal error: {e!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
