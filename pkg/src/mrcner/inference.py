"""Prediction, checkpoint evaluation and probability heat-map export."""

from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .data import TOKENIZERS, MrcExample, Sentence, build_triples, sentence_to_record
from .decode import DecodeConfig, decode_sentence
from .errors import ValidationError
from .metrics import EvalResult, corpus_spans, micro_prf
from .model import EncoderInput, MrcModel, ProbOutputs
from .queries import QueryCatalog, require_valid, validate_catalog
from .spans import TagSet


def checkpoint_tags(model: MrcModel) -> TagSet:
    if "tags" not in model.meta:
        raise ValidationError("checkpoint manifest lacks a tag set")
    return TagSet.from_names(model.meta["tags"])


def checkpoint_catalog(model: MrcModel) -> QueryCatalog:
    return QueryCatalog.from_dict(model.meta["catalog"])


def example_probs(model: MrcModel, examples: Sequence[MrcExample], batch_size: int = 64,
                  all_pairs: bool = False) -> list[ProbOutputs]:
    out = []
    for lo in range(0, len(examples), batch_size):
        chunk = examples[lo:lo + batch_size]
        state = model.encode_batch([EncoderInput.build(ex.query_tokens, ex.context_tokens) for ex in chunk])
        out.extend(model.prob_outputs(state, b, all_pairs=all_pairs) for b in range(len(chunk)))
    return out


def predict_sentences(model: MrcModel, sentences: Sequence[Sentence], tags: TagSet, catalog: QueryCatalog,
                      decode: DecodeConfig = DecodeConfig(), tokenizer: str | None = None) -> list[Sentence]:
    """Sentences with their spans replaced by scored predictions.

    ``tags`` need not match the training tag set: any type the catalog
    can phrase as a query can be asked for.
    """
    require_valid(catalog, tags)
    tok = TOKENIZERS[tokenizer or model.meta.get("tokenizer", "whitespace")]
    bare = [Sentence(s.id, s.tokens) for s in sentences]
    examples = build_triples(bare, tags, catalog, tok)
    probs = example_probs(model, examples)
    out = []
    k = len(tags)
    for si, s in enumerate(sentences):
        per_type = {ex.entity_type: p for ex, p in zip(examples[si * k:(si + 1) * k], probs[si * k:(si + 1) * k])}
        spans = decode_sentence(per_type, decode)
        out.append(Sentence(s.id, s.tokens, spans))
    return out


def evaluate_model(model: MrcModel, gold: Sequence[Sentence], tags: TagSet, catalog: QueryCatalog,
                   config=None, oracle: bool = False) -> EvalResult:
    """Micro P/R/F1 of the model's predictions on ``gold``.

    With ``oracle`` the gold spans are scored against themselves.
    """
    decode = DecodeConfig(config.match_threshold, config.flat_mode) if config is not None else DecodeConfig()
    pred = gold if oracle else predict_sentences(model, gold, tags, catalog, decode)
    return micro_prf(corpus_spans(gold), corpus_spans(pred), tags.names)


def check_compatible(model: MrcModel, catalog: QueryCatalog, tags: TagSet | None = None) -> TagSet:
    tags = tags or checkpoint_tags(model)
    problems = validate_catalog(catalog, tags)
    if problems:
        raise ValidationError(f"tag set mismatch between checkpoint and catalog: {'; '.join(problems)}")
    return tags


def read_raw_records(path: str | Path) -> list[dict]:
    """Prediction input: span JSONL (``.jsonl``) or one whitespace-tokenized sentence per line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    records = []
    if path.suffix in (".jsonl", ".json"):
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                records.append({"id": str(rec["id"]), "tokens": list(rec["tokens"])})
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed record: {exc}") from exc
    else:
        for k, line in enumerate(text.splitlines()):
            records.append({"id": f"{path.stem}-{k}", "tokens": line.split()})
    return records


def predict_records(model: MrcModel, records: Sequence[dict], tags: TagSet, catalog: QueryCatalog,
                    decode: DecodeConfig = DecodeConfig()) -> list[dict]:
    """Span-JSONL output records, one per input record, scores included."""
    nonempty = [Sentence(r["id"], r["tokens"]) for r in records if r["tokens"]]
    predicted = {s.id: s for s in predict_sentences(model, nonempty, tags, catalog, decode)}
    out = []
    for r in records:
        if r["tokens"]:
            out.append(sentence_to_record(predicted[r["id"]], with_scores=True))
        else:
            out.append({"id": r["id"], "tokens": [], "spans": []})
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


def export_heatmap(model: MrcModel, example: MrcExample, out_dir: str | Path) -> dict[str, Path]:
    """Write p_start.csv, p_end.csv (one class-1 probability per token) and
    p_match.csv (rows = starts, columns = ends, blank where start > end)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probs = example_probs(model, [example], all_pairs=True)[0]
    n = probs.n
    paths = {name: out_dir / f"{name}.csv" for name in ("p_start", "p_end", "p_match")}
    for name, mat in (("p_start", probs.p_start), ("p_end", probs.p_end)):
        with open(paths[name], "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            for v in mat[:, 1]:
                w.writerow([_fmt(v)])
    with open(paths["p_match"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        for i in range(n):
            w.writerow(["" if j < i else _fmt(probs.p_match[(i, j)]) for j in range(n)])
    return paths


def read_heatmap(out_dir: str | Path) -> ProbOutputs:
    out_dir = Path(out_dir)

    def column(name):
        with open(out_dir / f"{name}.csv", newline="", encoding="utf-8") as f:
            p1 = np.array([float(row[0]) for row in csv.reader(f)])
        return np.stack([1.0 - p1, p1], axis=1)

    p_match = {}
    with open(out_dir / "p_match.csv", newline="", encoding="utf-8") as f:
        for i, row in enumerate(csv.reader(f)):
            for j, cell in enumerate(row):
                if cell != "":
                    p_match[(i, j)] = float(cell)
    return ProbOutputs(column("p_start"), column("p_end"), p_match)

