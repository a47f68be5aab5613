"""``lprnn`` command-line entry point: train, eval, sweep, whatif."""

import argparse
import json
import logging
import os
import sys

from . import checkpoint as ckpt
from .arch import lm_spec
from .config import ConfigError, data_path, load_arch_config, load_run_config
from .corpus import read_text
from .lstm import DivergenceError, evaluate_ppw, init_model, train
from .sweep import format_csv, load_corpora, run_sweep
from .whatif import parse_assignment, render, run_whatif
from .widening import apply_widening, select_layers

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_CORRUPT = 0, 2, 3, 4, 5

log = logging.getLogger("lprnn")


def _int_list(raw):
    try:
        return [int(part) for part in raw.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {raw!r}")


def _u64(raw):
    value = int(raw, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _run_config(args):
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def widened_hidden(cfg):
    if cfg.widen_factor is None:
        return cfg.hidden_size
    spec = lm_spec(2, cfg.embed_dim, cfg.hidden_size)
    plan = select_layers(spec, 1.0, cfg.widen_factor)
    return apply_widening(spec, plan).by_index(2).out_dim


def cmd_train(args):
    cfg = _run_config(args)
    corpora = load_corpora(cfg)
    hidden = widened_hidden(cfg)
    model = init_model(len(corpora.vocab), cfg.embed_dim, hidden, cfg.quant, seed=cfg.seed,
                       quantize_embedding_projection=cfg.quantize_embedding_projection)
    out = args.out or "model.lprnn"
    log_lines = ["epoch\tlr\ttrain_nll\tvalid_ppw"]

    def on_epoch(entry):
        ppw = entry.valid.ppw if entry.valid else float("nan")
        log_lines.append(f"{entry.epoch}\t{entry.lr:.6g}\t{entry.train_nll:.6f}\t{ppw:.6f}")
        print(f"epoch {entry.epoch}: lr={entry.lr:.4g} train_nll={entry.train_nll:.4f} valid_ppw={ppw:.4f}",
              file=sys.stderr)

    train(model, corpora.train, cfg.schedule, valid=corpora.valid, log=on_epoch)
    ckpt.save_checkpoint(model, out, corpora.vocab)
    with open(out + ".log", "w", encoding="utf-8") as fh:
        fh.write("\n".join(log_lines) + "\n")
    print(f"wrote {out} (hidden_size={hidden}, bits={cfg.weight_bits}x{cfg.activation_bits})")
    return EXIT_OK


def cmd_eval(args):
    model, vocab, _ = ckpt.load_checkpoint(args.checkpoint)
    corpus_path = args.corpus
    if corpus_path is None and args.config:
        cfg = load_run_config(args.config)
        corpus_path = cfg.test_path or cfg.valid_path
    if corpus_path is None:
        raise ConfigError("eval needs --corpus or a config with a [data] valid/test path")
    if vocab is None:
        raise ConfigError("checkpoint carries no vocabulary; cannot tokenize a corpus")
    ids = vocab.encode(read_text(corpus_path))
    report = evaluate_ppw(model, ids, args.batch, args.seqlen)
    result = {"ppw": report.ppw, "mean_nll": report.mean_nll, "tokens": report.tokens}
    print(f"ppw={report.ppw:.6f} mean_nll={report.mean_nll:.6f} tokens={report.tokens}")
    print(json.dumps(result, sort_keys=True))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _run_config(args)
    rows = run_sweep(cfg, args.weight_bits, args.activation_bits, args.neurons)
    text = format_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _arch_path(name):
    if os.path.exists(name):
        return name
    shipped = data_path(name if name.endswith(".ini") else name + ".ini")
    if os.path.exists(shipped):
        return shipped
    raise ConfigError(f"architecture config {name!r} not found")


def cmd_whatif(args):
    arch = load_arch_config(_arch_path(args.config))
    try:
        result = run_whatif(
            arch,
            weight_bits=parse_assignment(args.weight_bits),
            activation_bits=parse_assignment(args.activation_bits),
            factor=args.factor,
            budget=args.budget,
            layers=args.layers,
            batch=args.batch,
            timesteps=args.timesteps,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    text = render(result, args.digits)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="lprnn", description="Low-precision LSTM language models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="config file")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=_u64, help="override the config seed")

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint (perplexity per token)")
    common(p, config_required=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", help="text file to evaluate on")
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--seqlen", type=int, default=35)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train/evaluate a bit-width x width grid, emit CSV")
    common(p)
    p.add_argument("--weight-bits", type=_int_list, required=True)
    p.add_argument("--activation-bits", type=_int_list, required=True)
    p.add_argument("--neurons", type=_int_list, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("whatif", help="size/memory/compute what-if on an architecture config")
    common(p)
    p.add_argument("--weight-bits", action="append", metavar="KIND=BITS")
    p.add_argument("--activation-bits", action="append", metavar="KIND=BITS")
    p.add_argument("--factor", type=float, help="widening factor (> 1)")
    p.add_argument("--budget", type=float, help="allowed fractional size growth for auto-selection")
    p.add_argument("--layers", type=_int_list, help="explicit layer indices to widen")
    p.add_argument("--batch", type=int)
    p.add_argument("--timesteps", type=int)
    p.add_argument("--digits", type=int, default=3)
    p.set_defaults(func=cmd_whatif)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ckpt.CorruptCheckpointError as exc:
        print(f"corrupt checkpoint: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
