"""Command-line interface: ``azspell {gen,train,correct,eval,distance}``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure,
4 character not in the model vocabulary.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter

from . import corruptor, editdist, evaluation, pipeline
from .seq2seq import ModelConfig
from .textcodec import VocabError, read_lines

EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_VOCAB = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1)")
    return value


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _load_model(path: str) -> pipeline.ModelCheckpoint:
    try:
        return pipeline.load_checkpoint(path)
    except OSError as exc:
        raise CliError(f"cannot read model: {exc}") from exc
    except pipeline.CheckpointError as exc:
        raise CliError(f"bad checkpoint {path}: {exc}") from exc


def cmd_gen(args) -> int:
    corpus = read_lines(args.corpus)
    try:
        table = corruptor.load_confusion_table(args.confusion)
    except corruptor.ConfusionTableError as exc:
        raise CliError(f"{args.confusion}: {exc}") from exc
    config = corruptor.NoiseConfig(
        p_word=args.p_word,
        p_substitution=args.p_substitution,
        p_insert=(1 - args.p_substitution) / 3,
        p_delete=(1 - args.p_substitution) / 3,
        p_transpose=(1 - args.p_substitution) / 3,
        seed=args.seed,
    )
    stats: Counter = Counter()
    pairs = corruptor.generate_pairs(corpus, args.count, table, config, stats)
    if args.out:
        corruptor.write_pairs(pairs, args.out)
        meta = {
            "rng": corruptor.RNG_ALGORITHM,
            "seed": args.seed,
            "count": args.count,
            "p_word": config.p_word,
            "operation_probs": dict(zip(corruptor.OPERATIONS, config.operation_probs())),
            "operation_counts": {k: stats[k] for k in ("words", *corruptor.OPERATIONS)},
        }
        with open(args.out + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        sys.stdout.write("".join(f"{p.wrong}\t{p.correct}\n" for p in pairs))

    applied = sum(stats[op] for op in corruptor.OPERATIONS)
    print(f"words\t{stats['words']}", file=sys.stderr)
    for op in corruptor.OPERATIONS:
        share = stats[op] / applied if applied else 0.0
        print(f"{op}\t{stats[op]}\t{share:.4f}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    try:
        pairs = corruptor.read_pairs(args.pairs)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if not pairs:
        raise CliError(f"{args.pairs}: no pairs")
    config = pipeline.TrainConfig(
        batch_size=args.batch, epochs=args.epochs, seed=args.seed,
        learning_rate=args.lr, holdout=args.holdout,
    )
    model_config = ModelConfig(
        vocab_size=1, embed_dim=args.embed_dim, units=args.units,
        encoder_depth=args.encoder_depth, max_len=args.max_len,
    )

    def report(epoch, loss, hold):
        line = f"{epoch}\t{loss:.6f}" if hold is None else f"{epoch}\t{loss:.6f}\t{hold:.6f}"
        print(line, flush=True)

    try:
        result = pipeline.train(pairs, config, model_config, on_epoch=report)
    except pipeline.NonFiniteLossError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    pipeline.save_checkpoint(result.checkpoint, args.out)
    print(f"saved {args.out} ({result.checkpoint.num_params} parameters)", file=sys.stderr)
    return 0


def cmd_correct(args) -> int:
    model = _load_model(args.model)
    lines = [args.text] if args.text is not None else read_lines_keep_blank(args.infile)
    out: list[str] = []
    for k in range(0, len(lines), 256):
        out.extend(pipeline.greedy_decode_batch(lines[k:k + 256], model))
    _write_text(args.out, "".join(f"{s}\n" for s in out))
    return 0


def read_lines_keep_blank(path: str) -> list[str]:
    with open(path, encoding="utf-8", errors="strict", newline="") as fh:
        text = fh.read()
    if not text:
        return []
    return text[:-1].split("\n") if text.endswith("\n") else text.split("\n")


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    try:
        test_pairs = corruptor.read_pairs(args.test)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if not test_pairs:
        raise CliError(f"{args.test}: empty test set")
    report = evaluation.evaluate_model(model, test_pairs, args.max_distance, args.granularity)
    text = report.to_tsv("model")
    if args.baseline_dict:
        dictionary = evaluation.load_dictionary(args.baseline_dict)
        base = evaluation.evaluate_baseline(dictionary, test_pairs, args.max_distance, args.granularity)
        text += "\n" + base.to_tsv("baseline")
    sys.stdout.write(text)
    return 0


def cmd_distance(args) -> int:
    fn = editdist.damerau_levenshtein if args.damerau else editdist.levenshtein
    print(fn(args.a, args.b))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="azspell", description="Character-level neural spelling correction.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic (wrong, correct) pairs")
    p.add_argument("--corpus", required=True, help="correct sentences, one per line")
    p.add_argument("--confusion", default=None, help="confusion table (default: bundled Azerbaijani table)")
    p.add_argument("--count", type=_positive_int, default=12000, help="pairs to emit (default 12000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-word", type=float, default=0.5, help="chance a word is corrupted (default 0.5)")
    p.add_argument("--p-substitution", type=float, default=0.6,
                   help="share of corruptions that are substitutions (default 0.6)")
    p.add_argument("--out", default=None, help="pairs TSV (default stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model on a pairs TSV")
    p.add_argument("--pairs", required=True)
    p.add_argument("--epochs", type=_positive_int, default=10)
    p.add_argument("--batch", type=_positive_int, default=40)
    p.add_argument("--embed-dim", type=_positive_int, default=500)
    p.add_argument("--units", type=_positive_int, default=500)
    p.add_argument("--encoder-depth", type=_positive_int, default=3)
    p.add_argument("--max-len", type=_positive_int, default=20)
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate (default 0.001)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=_fraction, default=0.0, help="fraction held out for a test loss")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("correct", help="correct text with a trained model")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--in", dest="infile")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("eval", help="accuracy within edit distance d")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True, help="wrong<TAB>correct TSV")
    p.add_argument("--max-distance", type=int, default=3)
    p.add_argument("--granularity", choices=evaluation.GRANULARITIES, default="word")
    p.add_argument("--baseline-dict", default=None, help="word list for the dictionary baseline")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("distance", help="edit distance between two strings")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--damerau", action="store_true", help="count adjacent transpositions as one edit")
    p.set_defaults(func=cmd_distance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"azspell: error: {exc}", file=sys.stderr)
        return exc.code
    except VocabError as exc:
        print(f"azspell: error: {exc}", file=sys.stderr)
        return EXIT_VOCAB
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        print(f"azspell: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
