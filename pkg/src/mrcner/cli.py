"""Command-line interface.

Exit codes: 0 success, 1 validation error (bad config, data, catalog or
arguments), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import TOKENIZERS, build_triples, dump_triples, read_corpus, write_span_jsonl
from .decode import DecodeConfig
from .errors import MrcNerError, ValidationError
from .experiments import query_ablation_run, mean_f1_by_strategy, zero_shot_eval
from .inference import (check_compatible, checkpoint_catalog, checkpoint_tags, evaluate_model, export_heatmap,
                        predict_records, read_raw_records)
from .model import MrcModel
from .queries import QueryStrategy, builtin_catalog, load_catalog, require_valid, save_catalog
from .spans import TagSet
from .training import TrainConfig, atomic_write_text, train

log = logging.getLogger("mrcner")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _tags_arg(value: str | None) -> TagSet | None:
    return TagSet.from_names(value.split(",")) if value else None


def _config_from_args(args) -> TrainConfig:
    config = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    overrides = {
        "seed": args.seed, "epochs": args.epochs, "batch_size": args.batch_size,
        "learning_rate": args.learning_rate, "alpha": args.alpha, "beta": args.beta, "gamma": args.gamma,
        "match_threshold": args.match_threshold, "dim": args.dim, "layers": args.layers,
        "train_path": args.train, "test_path": args.test, "catalog_path": args.catalog,
        "query_strategy": args.query_strategy, "dataset_id": args.dataset_id, "output_dir": args.output_dir,
        "subsample_fraction": args.subsample_fraction, "vocab_path": args.vocab, "tokenizer": args.tokenizer,
        "tags": args.tags.split(",") if args.tags else None,
    }
    if args.flat_mode:
        overrides["flat_mode"] = True
    return config.replace(**overrides).validate()


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with TrainConfig fields; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--match-threshold", type=float)
    p.add_argument("--flat-mode", action="store_true")
    p.add_argument("--dim", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--train", help="training corpus (.jsonl span file or CoNLL)")
    p.add_argument("--test", help="held-out corpus evaluated after training")
    p.add_argument("--tags", help="comma-separated tag set (default: labels found in the training data)")
    p.add_argument("--catalog", help="query catalog JSON file")
    p.add_argument("--query-strategy", choices=[s.value for s in QueryStrategy])
    p.add_argument("--dataset-id", help="built-in catalog family used when --catalog is absent")
    p.add_argument("--vocab", help="vocabulary file, one token per line")
    p.add_argument("--tokenizer", choices=sorted(TOKENIZERS))
    p.add_argument("--output-dir")
    p.add_argument("--subsample-fraction", type=float)


def _decode_from_args(args) -> DecodeConfig:
    return DecodeConfig(args.match_threshold if args.match_threshold is not None else 0.5, args.flat_mode)


def _add_decode_flags(p):
    p.add_argument("--match-threshold", type=float)
    p.add_argument("--flat-mode", action="store_true")


def _model_and_catalog(args):
    model = MrcModel.load(args.checkpoint)
    catalog = load_catalog(args.catalog) if args.catalog else checkpoint_catalog(model)
    tags = check_compatible(model, catalog, _tags_arg(getattr(args, "tags", None)))
    return model, catalog, tags


def cmd_gen_synthetic(args) -> int:
    from .synthetic import generate_corpus, nested_fraction, sentinel_catalog, synthetic_vocab

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    types = args.types.split(",")
    tags = TagSet.from_names(types)
    train_set, _ = generate_corpus(args.train_size, args.seed, types, tags, prefix="train")
    test_set, _ = generate_corpus(args.test_size, args.seed + 1, types, tags, prefix="test")
    write_span_jsonl(train_set, out / "train.jsonl")
    write_span_jsonl(test_set, out / "test.jsonl")
    (out / "vocab.txt").write_text("\n".join(synthetic_vocab(types).itos[2:]) + "\n", encoding="utf-8")
    for s in QueryStrategy:
        if s is not QueryStrategy.PositionIndex:
            save_catalog(sentinel_catalog(types, s), out / f"catalog_{s.value}.json")
    _write_json({"train": len(train_set), "test": len(test_set),
                 "nested_fraction_train": nested_fraction(train_set)}, None)
    return 0


def cmd_build_data(args) -> int:
    tags = _tags_arg(args.tags)
    sentences = read_corpus(args.data, tags)
    if tags is None:
        tags = TagSet.from_names(sorted({sp.label for s in sentences for sp in s.spans}))
    catalog = load_catalog(args.catalog) if args.catalog else builtin_catalog(args.dataset_id, args.query_strategy)
    require_valid(catalog, tags)
    examples = build_triples(sentences, tags, catalog, TOKENIZERS[args.tokenizer])
    dump_triples(examples, args.out)
    log.info("wrote %d triples to %s", len(examples), args.out)
    return 0


def cmd_train(args) -> int:
    config = _config_from_args(args)
    ckpt, manifest = train(config)
    _write_json({"checkpoint": str(ckpt), "epochs": [e.__dict__ for e in manifest.epochs],
                 "result": manifest.result}, None)
    return 0


def cmd_predict(args) -> int:
    model, catalog, tags = _model_and_catalog(args)
    records = predict_records(model, read_raw_records(args.input), tags, catalog, _decode_from_args(args))
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    if args.output:
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    model, catalog, tags = _model_and_catalog(args)
    gold = read_corpus(args.gold, tags)
    cfg = TrainConfig(match_threshold=_decode_from_args(args).match_threshold, flat_mode=args.flat_mode)
    result = evaluate_model(model, gold, tags, catalog, cfg, oracle=args.oracle)
    _write_json(result.to_dict(), args.output)
    return 0


def cmd_ablate_queries(args) -> int:
    config = _config_from_args(args)
    tags = TagSet.from_names(config.tags) if config.tags else None
    train_set = read_corpus(config.train_path, tags)
    tags = tags or TagSet.from_names(sorted({sp.label for s in train_set for sp in s.spans}))
    if not config.test_path:
        raise ValidationError("ablate-queries needs --test")
    test_set = read_corpus(config.test_path, tags)

    def catalog_for(strategy: QueryStrategy):
        if args.catalog_dir:
            path = Path(args.catalog_dir) / f"{strategy.value}.json"
            if path.exists():
                return load_catalog(path)
            if strategy is not QueryStrategy.PositionIndex:
                raise ValidationError(f"missing catalog for strategy {strategy.value}: {path}")
        return builtin_catalog(config.dataset_id, strategy)

    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    rows = query_ablation_run(train_set, test_set, tags, args.strategies.split(","), config, catalog_for, seeds)
    _write_json({"rows": rows, "mean_f1": mean_f1_by_strategy(rows)} if args.summary else rows, args.out)
    return 0


def cmd_zero_shot(args) -> int:
    model = MrcModel.load(args.checkpoint)
    target_catalog = load_catalog(args.target_catalog)
    tags = _tags_arg(args.tags)
    corpus = read_corpus(args.target, tags)
    if tags is None:
        tags = TagSet.from_names(sorted({sp.label for s in corpus for sp in s.spans} | set(target_catalog.entries)))
    if args.mapping:
        mapping = dict(pair.split("=", 1) for pair in args.mapping.split(","))
    else:
        source = set(checkpoint_tags(model).names)
        mapping = {n: n for n in tags.names if n in source}
    report = zero_shot_eval(model, corpus, tags, target_catalog, mapping, _decode_from_args(args))
    _write_json(report.to_dict(), args.output)
    return 0


def cmd_export_heatmap(args) -> int:
    model, catalog, tags = _model_and_catalog(args)
    sentences = read_corpus(args.input, tags)
    by_id = {s.id: s for s in sentences}
    sentence = by_id[args.sentence_id] if args.sentence_id else sentences[args.index]
    label = args.label or tags.names[0]
    examples = build_triples([sentence], tags, catalog, TOKENIZERS[model.meta.get("tokenizer", "whitespace")])
    example = next(ex for ex in examples if ex.entity_type.name == label)
    paths = export_heatmap(model, example, args.out_dir)
    _write_json({k: str(v) for k, v in paths.items()}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrcner", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synthetic", help="write the sentinel corpus, vocabulary and catalogs")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train-size", type=int, default=500)
    p.add_argument("--test-size", type=int, default=100)
    p.add_argument("--types", default="A,B,C")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("build-data", help="dump (query, answer, context) triples as JSONL")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tags")
    p.add_argument("--catalog")
    p.add_argument("--query-strategy", default="AnnotationGuideline", choices=[s.value for s in QueryStrategy])
    p.add_argument("--dataset-id", default="default")
    p.add_argument("--tokenizer", default="whitespace", choices=sorted(TOKENIZERS))
    p.set_defaults(func=cmd_build_data)

    p = sub.add_parser("train", help="train a model and write model.ckpt + run_manifest.json")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict spans; output is span JSONL with scores")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="span JSONL or plain text, one sentence per line")
    p.add_argument("--output")
    p.add_argument("--catalog", help="override the catalog stored in the checkpoint")
    p.add_argument("--tags")
    _add_decode_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="span-level micro P/R/F1 against a gold corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--output")
    p.add_argument("--catalog")
    p.add_argument("--tags")
    p.add_argument("--oracle", action="store_true", help="score gold against itself")
    _add_decode_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate-queries", help="one training run per query strategy")
    _add_train_flags(p)
    p.add_argument("--strategies", default=",".join(s.value for s in QueryStrategy))
    p.add_argument("--catalog-dir", help="directory of <Strategy>.json catalogs")
    p.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    p.add_argument("--summary", action="store_true", help="also report mean F1 per strategy")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate_queries)

    p = sub.add_parser("zero-shot", help="evaluate a checkpoint on another tag set via its queries")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--target-catalog", required=True)
    p.add_argument("--tags")
    p.add_argument("--mapping", help="source=target pairs, comma-separated (default: identical names)")
    p.add_argument("--output")
    _add_decode_flags(p)
    p.set_defaults(func=cmd_zero_shot)

    p = sub.add_parser("export-heatmap", help="write p_start/p_end/p_match CSV matrices for one example")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--sentence-id")
    p.add_argument("--label")
    p.add_argument("--catalog")
    p.add_argument("--tags")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_heatmap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MrcNerError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - stable exit code for scripting
        log.exception("unexpected failure")
        print(f"failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
