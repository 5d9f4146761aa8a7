"""``reqharvest`` command-line tool.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .corpus import (DatasetError, InfeasibleSplitError, Label, dumps_unit,
                     load_dataset, save_dataset, split_by_document)
from .evaluation import MissingPredictionError, confusion, report
from .features import FeatureConfig
from .segmenter import segment

logger = logging.getLogger("reqharvest")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("REQHARVEST_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"REQHARVEST_SEED must be an integer, got {raw!r}") from None


def _read_config(path: str) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _ratios(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratios {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios need three comma-separated fractions")
    return parts


# inputs that must exist before a command starts
INPUT_DESTS = ("file", "input", "validation", "model", "dataset", "embeddings", "gold", "pred", "directory")


def build_parser(seed: int) -> argparse.ArgumentParser:
    parser = _Parser(prog="reqharvest", description="Extract requirement sentences from documents.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="flat key=value file overriding option defaults")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("segment", help="split a text file into unlabeled sentence records")
    p.add_argument("file")
    p.add_argument("--doc-id", required=True)
    p.add_argument("--output")

    p = sub.add_parser("split", help="document-disjoint train/test/validation split")
    p.add_argument("--input", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--ratios", type=_ratios, default=(0.7, 0.2, 0.1))
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("train", help="train the subword classifier")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_hyperparams(p, seed)

    p = sub.add_parser("autotune", help="random search of subword-classifier settings")
    p.add_argument("--input", required=True)
    p.add_argument("--validation", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seconds", type=float)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--output", help="also train and save a model with the best settings")

    p = sub.add_parser("predict", help="classify sentences from stdin (or a dataset)")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--dataset", help="classify a dataset and emit <id>\\t<label>\\t<confidence>")
    p.add_argument("--output")

    p = sub.add_parser("extract", help="segment and classify every document in a directory")
    p.add_argument("directory")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--glob", default="*.txt")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output")

    p = sub.add_parser("embed", help="fetch sentence embeddings from an HTTP provider")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--batch-size", type=int, default=32)

    p = sub.add_parser("train-svm", help="train a polynomial-kernel SVM on sentence embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--C", dest="C", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--gamma", type=float, help="default: 1/dim")
    p.add_argument("--coef0", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-passes", type=int, default=10)

    p = sub.add_parser("predict-svm", help="label a dataset with a trained SVM")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--output")

    p = sub.add_parser("grid-search", help="cross-validated model selection on embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--families", default="svm,logreg")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output")

    p = sub.add_parser("evaluate", help="score prediction files against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True, action="append", help="TSV of <id>\\t<label>; repeatable")
    p.add_argument("--name", action="append", help="row name per --pred (default: file stem)")
    p.add_argument("--json", dest="json_path")
    return parser


def _add_hyperparams(p, seed):
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--minn", type=int, default=2)
    p.add_argument("--maxn", type=int, default=5)
    p.add_argument("--wordNgrams", dest="word_ngrams", type=int, default=2)
    p.add_argument("--bucket", type=int, default=1 << 21)
    p.add_argument("--minCount", dest="min_count", type=int, default=1)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_false")
    p.add_argument("--seed", type=int, default=seed)


def _apply_config(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    known = set()
    for sp in subparsers.choices.values():
        actions = {a.dest: a for a in sp._actions}
        for a in sp._actions:
            for opt in a.option_strings:
                actions.setdefault(opt.lstrip("-").replace("-", "_"), a)
        overrides = {}
        for key, value in values.items():
            action = actions.get(key)
            if action is None:
                continue
            known.add(key)
            key = action.dest
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise UsageError(f"config key {key!r} needs a boolean, got {value!r}")
                overrides[key] = value.lower() in ("true", "1", "yes")
            else:
                overrides[key] = value
        sp.set_defaults(**overrides)
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")


def _open_output(path):
    if path:
        return open(path, "w", encoding="utf-8", newline="\n")
    return _NoClose(sys.stdout)


class _NoClose:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        self.fh.flush()


def _check_inputs(args) -> None:
    for dest in INPUT_DESTS:
        value = getattr(args, dest, None)
        if value is None:
            continue
        for path in value if isinstance(value, list) else [value]:
            if not Path(path).exists():
                raise FileNotFoundError(f"input not found: {path}")


# -- commands ------------------------------------------------------------------

def cmd_segment(args):
    text = Path(args.file).read_text(encoding="utf-8")
    with _open_output(args.output) as out:
        for unit in segment(text, args.doc_id):
            out.write(dumps_unit(unit) + "\n")


def cmd_split(args):
    dataset = load_dataset(args.input)
    train, test, valid, spec = split_by_document(dataset, args.ratios, args.tolerance, args.seed)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    provenance = {"source": Path(args.input).name, "seed": args.seed}
    for name, part in (("train", train), ("test", test), ("validation", valid)):
        save_dataset(part, outdir / f"{name}.jsonl", {**provenance, "fold": name})
    (outdir / "split.json").write_text(json.dumps(spec.to_json(), indent=2) + "\n", encoding="utf-8")
    for name, part in (("train", train), ("test", test), ("validation", valid)):
        print(f"{name}\t{len(part)} sentences\t{len(part.by_document)} documents\t"
              f"req={part.counts[0]} nonreq={part.counts[1]}")


def _hyperparams(args):
    from .subword import Hyperparams
    features = FeatureConfig(args.minn, args.maxn, args.bucket, args.word_ngrams, args.lowercase)
    return Hyperparams(args.dim, args.lr, args.epochs, features, args.min_count, args.seed)


def cmd_train(args):
    from .subword import save_model, train
    dataset = load_dataset(args.input)
    model = train(dataset, _hyperparams(args),
                  on_epoch=lambda e, loss: logger.info("epoch %d loss %.6f", e + 1, loss))
    save_model(model, args.output)
    logger.info("saved model to %s", args.output)


def cmd_autotune(args):
    from .subword import autotune, save_model, train
    if args.trials is None and args.seconds is None:
        raise UsageError("autotune needs --trials and/or --seconds")
    result = autotune(load_dataset(args.input), load_dataset(args.validation),
                      trials=args.trials, seconds=args.seconds, seed=args.seed)
    print(json.dumps({"best_f1": result.best_f1, "hyperparams": result.best.to_dict(),
                      "trials": len(result.trials)}, indent=2, sort_keys=True))
    if args.output:
        save_model(train(load_dataset(args.input), result.best), args.output)


def _decide(model, text, threshold):
    from .subword import predict_proba
    p_non, p_req = predict_proba(model, text)
    if p_req > p_non and p_req >= threshold:
        return Label.REQUIREMENT, p_req
    return Label.NON_REQUIREMENT, p_non


def cmd_predict(args):
    from .subword import load_model
    model = load_model(args.model)
    with _open_output(args.output) as out:
        if args.dataset:
            for unit in load_dataset(args.dataset).units:
                label, conf = _decide(model, unit.text, args.threshold)
                out.write(f"{unit.id}\t{label.value}\t{conf:.6f}\n")
            return
        for line in sys.stdin:
            text = line.rstrip("\n")
            label, conf = _decide(model, text, args.threshold)
            out.write(f"{label.value}\t{conf:.6f}\t{text}\n")


def cmd_extract(args):
    from .subword import load_model
    model = load_model(args.model)
    files = sorted(p for p in Path(args.directory).glob(args.glob) if p.is_file())

    def process(path):
        units = segment(path.read_text(encoding="utf-8"), path.stem)
        lines = []
        for unit in units:
            label, conf = _decide(model, unit.text, args.threshold)
            if label is Label.REQUIREMENT:
                lines.append(f"{unit.id}\t{conf:.6f}\t{unit.text}\n")
        return lines

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(process, files))
    else:
        results = [process(p) for p in files]
    with _open_output(args.output) as out:
        for lines in results:
            out.writelines(lines)


def cmd_embed(args):
    import numpy as np
    from .embed.embeddings import EmbeddingTable, fetch_embeddings, save_embeddings
    dataset = load_dataset(args.dataset)
    vectors = fetch_embeddings(args.endpoint, dataset.texts, args.batch_size)
    dim = len(vectors[0]) if vectors else 0
    table = EmbeddingTable(dim, {u.id: np.asarray(v) for u, v in zip(dataset.units, vectors)})
    save_embeddings(table, args.output)


def _embedded(args):
    from .embed.embeddings import load_embeddings
    table = load_embeddings(args.embeddings)
    dataset = load_dataset(args.dataset)
    return table, dataset, table.matrix([u.id for u in dataset.units])


def cmd_train_svm(args):
    from .embed.svm import KernelParams, save_svm, train_svm
    table, dataset, X = _embedded(args)
    if any(u.label is None for u in dataset.units):
        raise DatasetError("train-svm needs a fully labeled dataset")
    gamma = args.gamma if args.gamma is not None else 1.0 / table.dim
    model = train_svm(X, dataset.labels, C=args.C, params=KernelParams(args.degree, gamma, args.coef0),
                      tol=args.tol, max_passes=args.max_passes)
    if not model.converged:
        logger.warning("SMO did not converge; saving the best iterate")
    save_svm(model, args.output)
    logger.info("%d support vectors, bias %.6f", len(model.dual_coef), model.bias)


def cmd_predict_svm(args):
    from .embed.svm import load_svm
    model = load_svm(args.model)
    _, dataset, X = _embedded(args)
    margins = model.decision_function(X) if len(X) else []
    with _open_output(args.output) as out:
        for unit, margin in zip(dataset.units, margins):
            label = Label.REQUIREMENT if margin > 0 else Label.NON_REQUIREMENT
            out.write(f"{unit.id}\t{label.value}\t{margin:.6f}\n")


def cmd_grid_search(args):
    from .embed.grid import default_grids, grid_search
    table, dataset, X = _embedded(args)
    if any(u.label is None for u in dataset.units):
        raise DatasetError("grid-search needs a fully labeled dataset")
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    grids = {f: g for f, g in default_grids(table.dim).items() if f in families}
    if len(grids) != len(families):
        raise UsageError(f"unknown family in {args.families!r}; choose from svm, logreg")
    result = grid_search(X, dataset.labels, grids, k=args.folds, seed=args.seed, n_jobs=args.jobs)
    with _open_output(args.output) as out:
        out.write(json.dumps(result.to_json(), indent=2) + "\n")


def read_predictions(path) -> dict[str, Label]:
    preds: dict[str, Label] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise DatasetError(f"{path}: expected <id>\\t<label>", lineno)
            uid, raw = fields[0], fields[1]
            try:
                label = Label(raw)
            except ValueError:
                raise DatasetError(f"{path}: unknown label {raw!r}", lineno) from None
            if uid in preds:
                raise DatasetError(f"{path}: duplicate prediction for {uid!r}", lineno)
            preds[uid] = label
    return preds


def cmd_evaluate(args):
    gold = load_dataset(args.gold)
    names = args.name or []
    if names and len(names) != len(args.pred):
        raise UsageError("give one --name per --pred")
    rows = []
    for n, path in enumerate(args.pred):
        name = names[n] if names else Path(path).stem
        rows.append((name, confusion(read_predictions(path), gold)))
    text, payload = report(rows)
    sys.stdout.write(text)
    if args.json_path:
        Path(args.json_path).write_text(payload + "\n", encoding="utf-8")


COMMANDS = {
    "segment": cmd_segment, "split": cmd_split, "train": cmd_train, "autotune": cmd_autotune,
    "predict": cmd_predict, "extract": cmd_extract, "embed": cmd_embed, "train-svm": cmd_train_svm,
    "predict-svm": cmd_predict_svm, "grid-search": cmd_grid_search, "evaluate": cmd_evaluate,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser(_default_seed())
        config_path = None
        for i, arg in enumerate(argv):
            if arg == "--config" and i + 1 < len(argv):
                config_path = argv[i + 1]
            elif arg.startswith("--config="):
                config_path = arg.split("=", 1)[1]
        if config_path:
            _apply_config(parser, _read_config(config_path))
    except (UsageError, OSError) as exc:
        print(f"reqharvest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _check_inputs(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"reqharvest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, InfeasibleSplitError, MissingPredictionError, ValueError, KeyError,
            OSError, RuntimeError) as exc:
        print(f"reqharvest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
