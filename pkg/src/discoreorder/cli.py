"""Batch pipeline: convert, train, reorder, parse, restore, eval, bench."""
from __future__ import annotations

import argparse
import json
import logging
import shlex
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .errors import NumericError
from .metrics import EvalConfig, Scores, bracket_scores, reorder_scores
from .parser import Grammar, GrammarError, bridge_read, bridge_write, cky_parse, induce_grammar
from .reorder import (RelocationMask, cca_permutation, oracle_reorder,
                      permute_sentence, read_sidecar, relocated_mask, restore_discontinuous,
                      write_sidecar)
from .treebank import (FORMATS, Corpus, NotContinuousError, Sentence, TreebankError, escape,
                       read_corpus, unescape, write_corpus)

logger = logging.getLogger("discoreorder")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
EXTENSIONS = {".export": "export", ".discbracket": "discbracket", ".bracket": "bracket",
              ".mrg": "bracket", ".txt": "tokens", ".tok": "tokens"}
SYNTHETIC = "synthetic500.export"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# file helpers

def synthetic_path() -> Path:
    return Path(str(resources.files("discoreorder") / "data" / SYNTHETIC))


def _format(path, fmt) -> str:
    if fmt:
        return fmt
    ext = Path(path).suffix
    if ext not in EXTENSIONS:
        raise ConfigError(f"cannot infer format of {path}; pass --format")
    return EXTENSIONS[ext]


def _read_trees(path, fmt=None, root_label="VROOT") -> Corpus:
    fmt = _format(path, fmt)
    if fmt == "tokens":
        raise ConfigError(f"{path}: trees expected, got a token file")
    return read_corpus(Path(path).read_text(encoding="utf-8"), fmt, root_label=root_label)


def read_tokens(path) -> list[Sentence]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [Sentence.from_forms(unescape(w) for w in ln.split()) for ln in lines if ln.strip()]


def _read_sentences(path, fmt=None) -> tuple[list[str], list[Sentence]]:
    if _format(path, fmt) == "tokens":
        sents = read_tokens(path)
        return [str(k + 1) for k in range(len(sents))], sents
    corpus = _read_trees(path, fmt)
    return corpus.ids, corpus.sentences


def _read_masks(path) -> list[tuple[str, RelocationMask]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        sid, _, rest = line.partition("\t")
        try:
            out.append((sid, RelocationMask(tuple(bool(int(x)) for x in rest.split()))))
        except ValueError as e:
            raise TreebankError(str(e), sentence_id=sid, line=lineno) from None
    return out


def _write(path, text: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _external(path):
    if not path:
        return None
    from .pointer.data import ExternalVectors
    return ExternalVectors.read(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# commands

def cmd_convert(args) -> int:
    corpus = _read_trees(args.input, args.format, args.root_label)
    cont, perms = oracle_reorder(corpus)
    prefix = Path(args.out_prefix)
    _write(prefix.with_suffix(".discbracket"), write_corpus(cont, "discbracket"))
    _write(prefix.with_suffix(".bracket"), write_corpus(cont, "bracket"))
    _write(prefix.with_suffix(".perm"), write_sidecar(zip(cont.ids, perms)))
    _write(prefix.with_suffix(".txt"), "".join(
        " ".join(escape(f) for f in t.sentence.forms) + "\n" for t in cont.trees))
    moved = sum(relocated_mask(p).count() for p in perms)
    total = sum(p.n for p in perms)
    print(f"sentences={len(cont)}")
    print(f"tokens={total}")
    print(f"relocated={moved}")
    return EXIT_OK


def cmd_train(args) -> int:
    import torch

    from .pointer import ModelConfig, PointerReorderer, TrainConfig
    torch.set_num_threads(max(1, args.workers))
    train = _read_trees(args.train, args.format, args.root_label)
    dev = _read_trees(args.dev, args.format, args.root_label) if args.dev else None
    mcfg = ModelConfig.tiny(args.tiny) if args.tiny else ModelConfig()
    tcfg = TrainConfig(max_epochs=args.max_epochs, patience=args.patience,
                       stop_patience=args.stop_patience, time_budget=args.time_budget,
                       unk_scheme=args.unk_scheme, lr=args.lr, batch_size=args.batch_size,
                       seed=args.seed)
    est = PointerReorderer(model_config=mcfg, train_config=tcfg, use_labeller=not args.no_labeller,
                           seed=args.seed)
    est.fit(train, dev=dev, external=_external(args.external),
            dev_external=_external(args.dev_external))
    est.save(args.model)
    h = est.history_
    for k, (loss, sc) in enumerate(zip(h.train_loss, h.dev)):
        print(f"epoch={k + 1} loss={loss:.4f} dev_uas={sc.uas:.2f} dev_las={sc.las:.2f} "
              f"dev_reloc_f1={sc.reloc_f1:.2f}")
    best = h.dev[h.best_epoch]
    print(f"best_epoch={h.best_epoch + 1}")
    print(f"best_dev_las={best.las:.2f}")
    if args.grammar:
        cont, _ = oracle_reorder(train)
        _write(args.grammar, induce_grammar(cont, args.markov, args.unk_threshold).to_text())
    return EXIT_OK


def _reorder(args, ids, sents):
    from .pointer import PointerReorderer
    est = PointerReorderer.load(args.model)
    est.mode, est.beam_size = args.mode, args.beam_size
    results = est.decode(sents, ids, _external(args.external))
    return [r.perm for r in results], [r.mask for r in results]


def cmd_reorder(args) -> int:
    import torch
    torch.set_num_threads(max(1, args.workers))
    ids, sents = _read_sentences(args.input, args.format)
    perms, masks = _reorder(args, ids, sents)
    _write(args.sidecar, write_sidecar(zip(ids, perms)))
    if args.mask:
        _write(args.mask, "".join(f"{sid}\t{' '.join(str(int(b)) for b in m.relocated)}\n"
                                  for sid, m in zip(ids, masks)))
    bridge_write([permute_sentence(s, p) for s, p in zip(sents, perms)], args.tokens)
    print(f"sentences={len(sents)}")
    return EXIT_OK


def _load_grammar(args) -> Grammar:
    if args.grammar:
        return Grammar.from_text(Path(args.grammar).read_text(encoding="utf-8"))
    cont, _ = oracle_reorder(_read_trees(args.grammar_from, None, args.root_label))
    return induce_grammar(cont, args.markov, args.unk_threshold)


def _parse_one(item):
    grammar, sentence = item
    return cky_parse(grammar, sentence)


def parse_sentences(grammar: Grammar, sents: list[Sentence], workers: int = 1):
    if workers <= 1:
        return [cky_parse(grammar, s) for s in sents]
    # map keeps input order, so output is independent of scheduling
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(_parse_one, [(grammar, s) for s in sents], chunksize=16))


def _bridge(command: str, sents: list[Sentence]) -> Corpus:
    with tempfile.TemporaryDirectory() as tmp:
        src, dst = Path(tmp) / "input.txt", Path(tmp) / "output.bracket"
        bridge_write(sents, src)
        cmd = command.format(input=shlex.quote(str(src)), output=shlex.quote(str(dst)))
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        if proc.returncode:
            raise TreebankError(f"bridge command failed ({proc.returncode}): {proc.stderr.strip()}")
        return bridge_read(dst, sents)


def cmd_parse(args) -> int:
    sents = read_tokens(args.tokens)
    if args.bridge:
        trees = _bridge(args.bridge, sents).trees
        fallbacks = 0
    else:
        results = parse_sentences(_load_grammar(args), sents, args.workers)
        trees = [r.tree for r in results]
        fallbacks = sum(r.fallback for r in results)
    corpus = Corpus.from_trees(trees)
    _write(args.output, write_corpus(corpus, "bracket"))
    print(f"sentences={len(trees)}")
    print(f"fallbacks={fallbacks}")
    return EXIT_OK


def restore_corpus(bracket_text: str, sidecar_text: str) -> Corpus:
    parsed = read_corpus(bracket_text, "bracket")
    perms = read_sidecar(sidecar_text)
    if len(parsed) != len(perms):
        raise TreebankError(f"{len(parsed)} trees but {len(perms)} permutations")
    entries = []
    for k, ((sid, perm), tree) in enumerate(zip(perms, parsed.trees)):
        if perm.n != tree.n:
            raise TreebankError(f"tree has {tree.n} terminals, permutation has {perm.n}",
                                sentence_id=sid, line=k + 1)
        entries.append((sid, restore_discontinuous(tree, perm)))
    return Corpus(tuple(entries))


def cmd_restore(args) -> int:
    corpus = restore_corpus(Path(args.bracket).read_text(encoding="utf-8"),
                            Path(args.sidecar).read_text(encoding="utf-8"))
    fmt = _format(args.output, args.format)
    _write(args.output, write_corpus(corpus, fmt, root_label=args.root_label,
                                     with_ids=fmt == "discbracket"))
    print(f"sentences={len(corpus)}")
    return EXIT_OK


def _eval_config(args) -> EvalConfig:
    return EvalConfig(ignore_punctuation=not args.keep_punct, strip_functions=args.strip_functions)


REORDER_FIELDS = ["uas", "las", "reloc_precision", "reloc_recall", "reloc_f1",
                  "pct_relocated_gold", "pct_relocated_pred"]
BRACKET_FIELDS = ["f1", "disc_f1", "precision", "recall", "disc_precision", "disc_recall"]


def _reorder_pairs(perms_path, masks_path):
    perms = read_sidecar(Path(perms_path).read_text(encoding="utf-8"))
    if masks_path:
        masks = dict(_read_masks(masks_path))
        return {sid: (p, masks[sid]) for sid, p in perms}
    return {sid: (p, relocated_mask(p)) for sid, p in perms}


def evaluate_files(args) -> tuple[Scores, list[str]]:
    scores, names = Scores(), []
    gold = _read_trees(args.gold, args.format, args.root_label) if args.gold else None
    if args.pred:
        if gold is None:
            raise ConfigError("--pred needs --gold")
        pred = _read_trees(args.pred, args.pred_format, args.root_label)
        scores = bracket_scores(pred, gold, _eval_config(args))
        names += BRACKET_FIELDS
    if args.pred_sidecar:
        pred_r = _reorder_pairs(args.pred_sidecar, args.pred_mask)
        if args.gold_sidecar:
            gold_r = _reorder_pairs(args.gold_sidecar, None)
        elif gold is not None:
            gold_r = {sid: (p, relocated_mask(p))
                      for sid, p in zip(gold.ids, map(cca_permutation, gold.trees))}
        else:
            raise ConfigError("--pred-sidecar needs --gold or --gold-sidecar")
        missing = [sid for sid in gold_r if sid not in pred_r]
        if missing or len(pred_r) != len(gold_r):
            first = missing[0] if missing else next(s for s in pred_r if s not in gold_r)
            raise TreebankError("sidecars are not aligned", sentence_id=first)
        rs = reorder_scores([pred_r[s] for s in gold_r], [gold_r[s] for s in gold_r])
        scores = scores.merged(rs, REORDER_FIELDS)
        names += REORDER_FIELDS
    if not names:
        raise ConfigError("nothing to evaluate: give --pred and/or --pred-sidecar")
    return scores, names


def cmd_eval(args) -> int:
    scores, names = evaluate_files(args)
    print(scores.table(names), end="")
    print()
    for name in names:
        print(f"{name}={getattr(scores, name):.2f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    import torch
    torch.set_num_threads(max(1, args.workers))
    path = args.input or synthetic_path()
    ids, sents = _read_sentences(path, args.format)
    t0 = time.perf_counter()
    if args.model:
        perms, _ = _reorder(args, ids, sents)
    else:
        perms = [cca_permutation(t) for t in _read_trees(path, args.format).trees]
    reordered = [permute_sentence(s, p) for s, p in zip(sents, perms)]
    t1 = time.perf_counter()
    grammar = _load_grammar(args)
    t2 = time.perf_counter()
    results = parse_sentences(grammar, reordered, args.workers)
    t3 = time.perf_counter()
    restored = Corpus(tuple((sid, restore_discontinuous(r.tree, p).with_sentence(s))
                            for sid, r, p, s in zip(ids, results, perms, sents)))
    t4 = time.perf_counter()
    if args.output:
        fmt = _format(args.output, args.output_format)
        _write(args.output, write_corpus(restored, fmt, with_ids=fmt == "discbracket"))
    total = (t1 - t0) + (t3 - t2) + (t4 - t3)
    print(f"sentences={len(sents)}")
    print(f"reorder={'pointer' if args.model else 'oracle'}")
    print(f"reorder_seconds={t1 - t0:.3f}")
    print(f"parse_seconds={t3 - t2:.3f}")
    print(f"restore_seconds={t4 - t3:.3f}")
    print(f"total_seconds={total:.3f}")
    print(f"sent_per_second={len(sents) / total if total else float('inf'):.1f}")
    print(f"fallbacks={sum(r.fallback for r in results)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import discontinuous_corpus
    _write(args.output, write_corpus(discontinuous_corpus(args.n, args.seed), "export"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="discoreorder", description=__doc__)
    p.add_argument("--config", help="JSON file of option values; command-line flags win")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt=True):
        if fmt:
            sp.add_argument("--format", choices=FORMATS + ("tokens",),
                            help="input format (default: from the file extension)")
        sp.add_argument("--root-label", default="VROOT")
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--workers", type=int, default=1)

    def grammar_opts(sp):
        sp.add_argument("--grammar", help="grammar file written by 'train --grammar'")
        sp.add_argument("--grammar-from", help="induce the grammar from these gold trees")
        sp.add_argument("--markov", type=int, default=1)
        sp.add_argument("--unk-threshold", type=int, default=2)

    def decode_opts(sp):
        sp.add_argument("--mode", choices=["greedy", "beam"], default="greedy")
        sp.add_argument("--beam-size", type=int, default=10)
        sp.add_argument("--external", help="external vector sidecar")

    sp = sub.add_parser("convert", help="trees -> continuous trees + permutation sidecar")
    sp.add_argument("input")
    sp.add_argument("out_prefix", help="writes PREFIX.discbracket/.bracket/.perm/.txt")
    common(sp)
    sp.set_defaults(func=cmd_convert, paths=["input"])

    sp = sub.add_parser("train", help="fit the pointer network, select by dev LAS")
    sp.add_argument("--train", required=True)
    sp.add_argument("--dev")
    sp.add_argument("--model", required=True, help="checkpoint to write")
    sp.add_argument("--grammar", help="also write a PCFG induced from the reordered training trees")
    sp.add_argument("--markov", type=int, default=1)
    sp.add_argument("--unk-threshold", type=int, default=2)
    sp.add_argument("--no-labeller", action="store_true")
    sp.add_argument("--tiny", type=int, default=0, help="use hidden size N (for tests)")
    sp.add_argument("--max-epochs", type=int, default=50)
    sp.add_argument("--patience", type=int, default=2)
    sp.add_argument("--stop-patience", type=int)
    sp.add_argument("--time-budget", type=float)
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--unk-scheme", choices=["smoothed", "flat"], default="smoothed")
    sp.add_argument("--external")
    sp.add_argument("--dev-external")
    common(sp)
    sp.set_defaults(func=cmd_train, paths=["train", "dev", "external", "dev_external"])

    sp = sub.add_parser("reorder", help="predict permutations and reordered token lines")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True, help="trees or a token file")
    sp.add_argument("--sidecar", required=True, help="permutation sidecar to write")
    sp.add_argument("--tokens", required=True, help="reordered token lines to write")
    sp.add_argument("--mask", help="relocation flags to write")
    decode_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_reorder, paths=["model", "input", "external"])

    sp = sub.add_parser("parse", help="continuous parsing of token lines")
    sp.add_argument("--tokens", required=True)
    sp.add_argument("--output", required=True, help="bracket file to write")
    sp.add_argument("--bridge", help="external parser command with {input} and {output} slots")
    grammar_opts(sp)
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_parse, paths=["tokens", "grammar", "grammar_from"])

    sp = sub.add_parser("restore", help="bracket trees + sidecar -> discontinuous trees")
    sp.add_argument("--bracket", required=True)
    sp.add_argument("--sidecar", required=True)
    sp.add_argument("--output", required=True)
    common(sp)
    sp.set_defaults(func=cmd_restore, paths=["bracket", "sidecar"])

    sp = sub.add_parser("eval", help="bracketing and reordering scores")
    sp.add_argument("--gold")
    sp.add_argument("--pred")
    sp.add_argument("--pred-format", choices=FORMATS)
    sp.add_argument("--gold-sidecar")
    sp.add_argument("--pred-sidecar")
    sp.add_argument("--pred-mask")
    sp.add_argument("--keep-punct", action="store_true")
    sp.add_argument("--strip-functions", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_eval, paths=["gold", "pred", "gold_sidecar", "pred_sidecar", "pred_mask"])

    sp = sub.add_parser("bench", help="time reorder -> parse -> restore")
    sp.add_argument("--input", help=f"trees or tokens (default: shipped {SYNTHETIC})")
    sp.add_argument("--model", help="pointer checkpoint (default: gold CCAs from the input trees)")
    sp.add_argument("--output", help="restored trees to write")
    sp.add_argument("--output-format", choices=FORMATS)
    decode_opts(sp)
    grammar_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_bench, paths=["input", "model", "grammar", "grammar_from", "external"])

    sp = sub.add_parser("synth", help="write the seeded synthetic discontinuous corpus")
    sp.add_argument("output")
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth, paths=[])
    return p


def _apply_config(parser, argv, args):
    """Re-parse with config-file values as defaults so explicit flags still win."""
    try:
        conf = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"config: {e}") from None
    if not isinstance(conf, dict):
        raise ConfigError("config: expected a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    for key in conf:
        if key.replace("-", "_") not in known:
            raise ConfigError(f"config: unknown option {key!r} for {args.command}")
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in conf.items()})
    return parser.parse_args(argv)


def _validate(args):
    for name in args.paths:
        value = getattr(args, name, None)
        if value and not Path(value).exists():
            raise ConfigError(f"{name}: no such file {value}")
    if args.command in ("parse", "bench") and not (args.grammar or args.grammar_from
                                                     or getattr(args, "bridge", None)):
        raise ConfigError("grammar: give --grammar or --grammar-from")
    for name in ("workers", "beam_size", "max_epochs", "patience", "batch_size"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            raise ConfigError(f"{name}: must be at least 1")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        _validate(args)
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TreebankError, NotContinuousError, GrammarError, KeyError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
