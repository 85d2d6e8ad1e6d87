"""Command-line entry point: ``mnmt <subcommand> [flags]``.

Hyperparameters come from built-in defaults, then an optional ``--config``
key=value file, then explicit flags.  Every written artifact starts with a
``#mnmt`` header carrying the tool version, a hash of the effective
hyperparameters and the seed.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass

from .config import artifact_header, fill, load_kv, read_lines, write_lines
from .errors import ConfigError, MnmtError

log = logging.getLogger("mnmt")


@dataclass
class RunConfig:
    seed: int = 1
    emb_dim: int = 32
    hidden: int = 64
    attn_dim: int = 64
    readout: int = 64
    src_vocab_size: int = 30000
    tgt_vocab_size: int = 30000
    batch: int = 32
    epochs: int = 10
    clip: float = 5.0
    rho: float = 0.95
    eps: float = 1e-6
    iterations: int = 5
    top_k: int = 2
    beam: int = 5
    beta: float = 0.3
    variant: str = "sy_xy"
    mem_epochs: int = 10
    mem_batch: int = 16
    mem_attn_dim: int = 64
    patience: int = 2
    bins: str = ""

    def header(self):
        return artifact_header(dataclasses.asdict(self), self.seed)


HYPER = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def resolve(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_kv(args.config))
    for name in HYPER:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = str(flag)
    cfg = fill(RunConfig, values, strict=True)
    from .memory import VARIANTS
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}")
    if not 0.0 <= cfg.beta <= 1.0:
        raise ConfigError("beta must lie in [0, 1]")
    return cfg


def require(*paths):
    for p in paths:
        if p is not None and not os.path.exists(p):
            raise MnmtError(f"input not found: {p}")


def require_prefix(prefix):
    if prefix is not None:
        require(f"{prefix}.src", f"{prefix}.tgt")


# -- subcommands --------------------------------------------------------------

def cmd_make_synthetic(args, cfg):
    from .corpus import write_parallel
    from .oov import OovDictionary
    from .synthetic import make_cipher, make_copy, make_lowres, make_oov_suite

    os.makedirs(args.out_dir, exist_ok=True)
    out = lambda name: os.path.join(args.out_dir, name)
    header = cfg.header()
    if args.kind == "cipher":
        task = make_cipher(n_pairs=args.pairs or 500, seed=cfg.seed)
        write_parallel(out("cipher"), task.corpus, header)
        write_lines(out("cipher.gold"), [f"{s}\t{t}" for s, t in sorted(task.gold.items())], header)
    elif args.kind == "copy":
        write_parallel(out("copy"), make_copy(n_pairs=args.pairs or 1000, seed=cfg.seed), header)
    else:
        task = make_lowres(n_train=args.pairs or 2000, seed=cfg.seed)
        for name in ("train", "dev", "test"):
            write_parallel(out(name), getattr(task, name), header)
        write_lines(out("rare.txt"), sorted(task.rare), header)
        for name, seed in (("oov-dev", cfg.seed + 100), ("oov-test", cfg.seed)):
            suite = make_oov_suite(task, seed=seed)
            write_lines(out(f"{name}.src"), [" ".join(s) for s in suite.sources], header)
            write_lines(out(f"{name}.tgt"), [" ".join(r) for r in suite.references], header)
            write_lines(out(f"{name}.annot"),
                        [" ".join(f"{g}|{s}" for g, s in notes) for notes in suite.annotations], header)
            OovDictionary(suite.entries).save(out(f"{name}.table"), header)
    return 0


def cmd_build_vocab(args, cfg):
    from .corpus import build_vocab, read_parallel
    require_prefix(args.corpus)
    corpus = read_parallel(args.corpus)
    size = cfg.src_vocab_size if args.side == "source" else cfg.tgt_vocab_size
    if args.max_size is not None:
        size = args.max_size
    build_vocab(corpus, args.side, size).save(args.out, cfg.header())
    return 0


def cmd_align(args, cfg):
    from .aligner import align_corpus, extract_dictionary, filter_top_k
    from .corpus import read_parallel
    require_prefix(args.corpus)
    corpus = read_parallel(args.corpus)
    links, fwd, rev = align_corpus(corpus, cfg.iterations)
    for table in (fwd, rev):
        log.info("%s log-likelihood: %s", table.direction,
                 " ".join(f"{v:.3f}" for v in table.log_likelihood))
    filter_top_k(extract_dictionary(corpus, links), cfg.top_k).save(args.out, cfg.header())
    return 0


def cmd_build_memory(args, cfg):
    from .aligner import TranslationDictionary
    from .memory import build_global_memory
    require(args.dict)
    build_global_memory(TranslationDictionary.load(args.dict), cfg.top_k).save(args.out, cfg.header())
    return 0


def _ids(corpus, src_vocab, tgt_vocab):
    from .corpus import encode
    return ([encode(p.source, src_vocab) for p in corpus],
            [encode(p.target, tgt_vocab) for p in corpus])


def cmd_train(args, cfg):
    from .corpus import Vocabulary, read_parallel
    from .nmt import NMTConfig, TrainConfig, train_nmt
    require_prefix(args.corpus)
    require_prefix(args.dev)
    require(args.src_vocab, args.tgt_vocab)
    sv, tv = Vocabulary.load(args.src_vocab), Vocabulary.load(args.tgt_vocab)
    src, tgt = _ids(read_parallel(args.corpus), sv, tv)
    dev = _ids(read_parallel(args.dev), sv, tv) if args.dev else None
    model_cfg = NMTConfig(len(sv), len(tv), cfg.emb_dim, cfg.hidden, cfg.attn_dim, cfg.readout,
                          seed=cfg.seed)
    train_cfg = TrainConfig(cfg.batch, cfg.epochs, cfg.clip, cfg.rho, cfg.eps, cfg.seed)
    params, _ = train_nmt(src, tgt, model_cfg, train_cfg, dev=dev)
    params.save(args.out, cfg.header())
    return 0


def cmd_train_memory(args, cfg):
    from .corpus import Vocabulary, read_parallel
    from .memory import GlobalMemory, MemoryTrainConfig, MemoryVariant, train_memory_attention
    from .nmt import ModelParams
    require_prefix(args.corpus)
    require_prefix(args.dev)
    require(args.model, args.src_vocab, args.tgt_vocab, args.memory)
    sv, tv = Vocabulary.load(args.src_vocab), Vocabulary.load(args.tgt_vocab)
    pairs = [(p.source, p.target) for p in read_parallel(args.corpus)]
    dev = [(p.source, p.target) for p in read_parallel(args.dev)] if args.dev else None
    mem_cfg = MemoryTrainConfig(cfg.mem_epochs, cfg.mem_batch, cfg.mem_attn_dim, cfg.rho, cfg.eps,
                                cfg.clip, cfg.patience, cfg.seed)
    theta, report = train_memory_attention(pairs, ModelParams.load(args.model), GlobalMemory.load(args.memory),
                                           sv, tv, MemoryVariant(cfg.variant), mem_cfg, dev_pairs=dev)
    theta.save(args.out, cfg.header())
    return 0


def cmd_translate(args, cfg):
    from .aligner import TranslationDictionary
    from .corpus import Vocabulary, tokenize
    from .memory import GlobalMemory, MemoryAttentionParams
    from .nmt import ModelParams
    from .oov import OovDictionary
    from .translate import Translator
    require(args.model, args.src_vocab, args.tgt_vocab, args.input,
            args.memory, args.memory_params, args.oov_table, args.lexicon)
    sv, tv = Vocabulary.load(args.src_vocab), Vocabulary.load(args.tgt_vocab)
    params = ModelParams.load(args.model)
    gmem = theta = lexicon = None
    if not args.no_memory:
        if args.lexicon:
            lexicon = TranslationDictionary.load(args.lexicon)
        elif args.memory or args.memory_params:
            if not (args.memory and args.memory_params):
                raise ConfigError("--memory and --memory-params go together")
            gmem = GlobalMemory.load(args.memory)
            theta = MemoryAttentionParams.load(args.memory_params)
            if args.variant is not None and theta.variant.name != args.variant:
                raise ConfigError(f"--variant {args.variant} but memory parameters are {theta.variant.name}")
    oov_dict = None
    if args.oov_table:
        oov_dict = OovDictionary.load(args.oov_table)
        oov_dict.validate(sv, tv)
    translator = Translator(params, sv, tv, gmem, theta, cfg.beta, cfg.beam, oov_dict, lexicon)
    sentences = [tokenize(line) for line in read_lines(args.input)]
    outputs = [" ".join(translator.translate(s).words) if s else "" for s in sentences]
    write_lines(args.output, outputs, cfg.header())
    return 0


def _read_tokens(path):
    from .corpus import tokenize
    return [tokenize(line) for line in read_lines(path)]


def cmd_evaluate(args, cfg):
    from .evaluation import bleu, oov_recall
    require(args.hyp, *args.ref, args.oov_annot)
    hyps = _read_tokens(args.hyp)
    refs = list(zip(*[_read_tokens(r) for r in args.ref]))
    metrics = bleu(hyps, [list(r) for r in refs]).as_dict()
    if args.oov_annot:
        notes = [[tuple(item.split("|")) for item in line.split()] for line in read_lines(args.oov_annot)]
        rec = oov_recall(hyps, notes)
        for subset in sorted(rec.recall):
            metrics[f"recall_{subset}"] = rec.recall[subset]
            metrics[f"hits_{subset}"] = rec.hits[subset]
            metrics[f"total_{subset}"] = rec.totals[subset]
    shown = {k: f"{v:.6f}" if isinstance(v, float) else str(v) for k, v in metrics.items()}
    # tab-separated table, then the same values as a key=value block
    lines = [f"{k}\t{v}" for k, v in shown.items()] + [""] + [f"{k}={v}" for k, v in shown.items()]
    print("\n".join(lines))
    if args.out:
        write_lines(args.out, lines, cfg.header())
    return 0


def cmd_analyze_freq(args, cfg):
    from .corpus import read_parallel
    from .evaluation import frequency_analysis, min_frequencies, quartile_boundaries
    require(args.baseline, args.mnmt, args.ref, args.source)
    require_prefix(args.train)
    base, mnmt = _read_tokens(args.baseline), _read_tokens(args.mnmt)
    refs, srcs = _read_tokens(args.ref), _read_tokens(args.source)
    counts = read_parallel(args.train).source_counts
    if cfg.bins:
        try:
            bounds = [float(b) for b in cfg.bins.split(",")]
        except ValueError:
            raise ConfigError(f"bins must be three comma-separated numbers, got {cfg.bins!r}") from None
    else:
        bounds = quartile_boundaries(min_frequencies(srcs, counts))
    if len(bounds) != 3 or sorted(bounds) != bounds:
        raise ConfigError("bins must be three non-decreasing boundaries")
    fb = frequency_analysis(base, refs, srcs, counts, bounds)
    fm = frequency_analysis(mnmt, refs, srcs, counts, bounds)
    lines = ["bin\tcount\trecall_baseline\trecall_mnmt"]
    for b in range(4):
        lines.append(f"{b + 1}\t{fb.counts[b]}\t{fb.recall[b]:.6f}\t{fm.recall[b]:.6f}")
    print("\n".join(lines))
    write_lines(args.out, lines, cfg.header())
    return 0


# -- parser -------------------------------------------------------------------

def _hyper(p, *names):
    for name in names:
        kind = HYPER[name]
        conv = {"int": int, "float": float}.get(kind, str)
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=conv, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="mnmt", description="NMT with a word-pair memory")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, *hyper):
        p = sub.add_parser(name)
        p.add_argument("--config")
        _hyper(p, "seed", *hyper)
        p.set_defaults(fn=fn)
        return p

    p = command("make-synthetic", cmd_make_synthetic)
    p.add_argument("--kind", choices=("cipher", "copy", "lowres"), required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--pairs", type=int)

    p = command("build-vocab", cmd_build_vocab, "src_vocab_size", "tgt_vocab_size")
    p.add_argument("--corpus", required=True)
    p.add_argument("--side", choices=("source", "target"), required=True)
    p.add_argument("--max-size", type=int)
    p.add_argument("--out", required=True)

    p = command("align", cmd_align, "iterations", "top_k")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = command("build-memory", cmd_build_memory, "top_k")
    p.add_argument("--dict", required=True)
    p.add_argument("--out", required=True)

    p = command("train", cmd_train, "emb_dim", "hidden", "attn_dim", "readout", "batch", "epochs",
                "clip", "rho", "eps")
    for flag in ("--corpus", "--src-vocab", "--tgt-vocab", "--out"):
        p.add_argument(flag, required=True)
    p.add_argument("--dev")

    p = command("train-memory", cmd_train_memory, "variant", "mem_epochs", "mem_batch",
                "mem_attn_dim", "patience", "clip", "rho", "eps")
    for flag in ("--corpus", "--model", "--src-vocab", "--tgt-vocab", "--memory", "--out"):
        p.add_argument(flag, required=True)
    p.add_argument("--dev")

    p = command("translate", cmd_translate, "beta", "beam")
    for flag in ("--model", "--src-vocab", "--tgt-vocab", "--input", "--output"):
        p.add_argument(flag, required=True)
    p.add_argument("--memory")
    p.add_argument("--memory-params")
    p.add_argument("--variant", choices=("s_y", "s_xy", "sy_y", "sy_xy"))
    p.add_argument("--oov-table")
    p.add_argument("--lexicon")
    p.add_argument("--no-memory", action="store_true")

    p = command("evaluate", cmd_evaluate)
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True, action="append")
    p.add_argument("--oov-annot")
    p.add_argument("--out")

    p = command("analyze-freq", cmd_analyze_freq, "bins")
    for flag in ("--baseline", "--mnmt", "--ref", "--source", "--train", "--out"):
        p.add_argument(flag, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args)
        return args.fn(args, cfg)
    except ConfigError as err:
        print(f"mnmt: config error: {err}", file=sys.stderr)
        return 2
    except (MnmtError, OSError, ValueError) as err:
        print(f"mnmt: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
