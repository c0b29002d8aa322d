"""Configuration, SGD training loop, checkpoints and run manifests."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import subprocess
import tempfile
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import TOKENIZERS, Sentence, build_triples, make_label_tensors, read_corpus
from .errors import ConfigError, TrainingError
from .model import EncoderInput, LossWeights, ModelConfig, MrcModel, Vocab, config_hash, make_batch
from .queries import QueryCatalog, builtin_catalog, load_catalog, require_valid
from .spans import TagSet

log = logging.getLogger(__name__)

HOME_ENV = "MRCNER_HOME"


@dataclass
class TrainConfig:
    seed: int = 0
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.3
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    match_threshold: float = 0.5
    flat_mode: bool = False
    dim: int = 16
    layers: int = 2
    max_length: int = 512
    vocab_path: str | None = None
    train_path: str | None = None
    test_path: str | None = None
    tags: list[str] | None = None
    catalog_path: str | None = None
    query_strategy: str = "AnnotationGuideline"
    dataset_id: str = "synthetic"
    tokenizer: str = "whitespace"
    output_dir: str = "runs/default"
    subsample_fraction: float = 1.0

    def validate(self) -> TrainConfig:
        problems = []
        if self.epochs < 1:
            problems.append(f"epochs must be >= 1 (got {self.epochs})")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1 (got {self.batch_size})")
        if not self.learning_rate > 0:
            problems.append(f"learning_rate must be > 0 (got {self.learning_rate})")
        for name in ("alpha", "beta", "gamma", "match_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{name} must lie in [0, 1] (got {v})")
        if not 0.0 < self.subsample_fraction <= 1.0:
            problems.append(f"subsample_fraction must lie in (0, 1] (got {self.subsample_fraction})")
        if self.dim < 1 or self.layers < 1:
            problems.append("dim and layers must be >= 1")
        if self.tokenizer not in TOKENIZERS:
            problems.append(f"tokenizer must be one of {sorted(TOKENIZERS)}")
        if problems:
            raise ConfigError("invalid config: " + "; ".join(problems))
        return self

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> TrainConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def replace(self, **overrides) -> TrainConfig:
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta, self.gamma)

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig(dim=self.dim, layers=self.layers, max_length=self.max_length)

    def resolve_output(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(HOME_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out

    def catalog(self) -> QueryCatalog:
        if self.catalog_path:
            return load_catalog(self.catalog_path)
        return builtin_catalog(self.dataset_id, self.query_strategy)


@dataclass
class EpochLog:
    epoch: int
    total: float
    start: float
    end: float
    span: float


@dataclass
class RunManifest:
    config_hash: str
    version: str
    tags: list[str]
    catalog: dict
    epochs: list[EpochLog] = field(default_factory=list)
    result: dict | None = None
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_vocab(examples, extra_tokens: Sequence[str] = ()) -> Vocab:
    return Vocab.build([*(ex.context_tokens for ex in examples), *(ex.query_tokens for ex in examples),
                        extra_tokens])


def fit(sentences: Sequence[Sentence], tags: TagSet, catalog: QueryCatalog, config: TrainConfig,
        vocab: Vocab | None = None, on_epoch: Callable[[EpochLog], None] | None = None
        ) -> tuple[MrcModel, list[EpochLog]]:
    """Train a fresh model with plain minibatch SGD.

    Everything random (initialization, example order) derives from
    ``config.seed``, so equal inputs give bit-identical parameters.
    """
    config.validate()
    require_valid(catalog, tags)
    tokenizer = TOKENIZERS[config.tokenizer]
    examples = build_triples(sentences, tags, catalog, tokenizer)
    if not examples:
        raise ConfigError("no training examples")
    vocab = vocab or build_vocab(examples)
    meta = {"tags": tags.names, "catalog": catalog.to_dict(), "tokenizer": config.tokenizer,
            "config_hash": config.hash}
    model = MrcModel.initialize(vocab, config.model_config, seed=config.seed, meta=meta)
    inputs = [EncoderInput.build(ex.query_tokens, ex.context_tokens) for ex in examples]
    for inp in inputs:
        model.check_length(inp)
    golds = [make_label_tensors(ex) for ex in examples]
    weights = config.loss_weights
    rng = np.random.default_rng(config.seed + 1)
    logs = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(examples))
        sums = np.zeros(4)
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            state = model.forward(make_batch(vocab, [inputs[k] for k in idx]))
            breakdown, grads = model.loss_gradients(state, [golds[k] for k in idx], weights)
            if not all(math.isfinite(v) for v in breakdown):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting {lo}: {breakdown}")
            for name, g in grads.items():
                model.params[name] -= config.learning_rate * g
            sums += np.array(breakdown) * len(idx)
        total, l_start, l_end, l_span = (sums / len(examples)).tolist()
        entry = EpochLog(epoch, total, l_start, l_end, l_span)
        logs.append(entry)
        log.info("epoch %d loss %.6f (start %.6f end %.6f span %.6f)", epoch, total, l_start, l_end, l_span)
        if on_epoch:
            on_epoch(entry)
    return model, logs


def load_training_data(config: TrainConfig) -> tuple[list[Sentence], TagSet, QueryCatalog]:
    if not config.train_path:
        raise ConfigError("train_path is required")
    tags = TagSet.from_names(config.tags) if config.tags else None
    sentences = read_corpus(config.train_path, tags)
    if tags is None:
        names = sorted({sp.label for s in sentences for sp in s.spans})
        tags = TagSet.from_names(names)
    catalog = config.catalog()
    require_valid(catalog, tags)
    return sentences, tags, catalog


def train(config: TrainConfig) -> tuple[Path, RunManifest]:
    """Train from files; writes ``model.ckpt`` and ``run_manifest.json``.

    Data and catalog are validated before the first update. When
    ``test_path`` is set the final model is evaluated on it.
    """
    from .experiments import subsample_training
    from .inference import evaluate_model

    config.validate()
    t0 = time.perf_counter()
    sentences, tags, catalog = load_training_data(config)
    test = read_corpus(config.test_path, tags) if config.test_path else None
    if config.subsample_fraction < 1.0:
        sentences = subsample_training(sentences, config.subsample_fraction, config.seed)
    vocab = None
    if config.vocab_path:
        vocab = Vocab([t for t in Path(config.vocab_path).read_text(encoding="utf-8").split("\n") if t])
    model, logs = fit(sentences, tags, catalog, config, vocab)
    out = config.resolve_output()
    ckpt = out / "model.ckpt"
    model.save(ckpt)
    manifest = RunManifest(config.hash, version_string(), tags.names, catalog.to_dict(), logs)
    if test is not None:
        manifest.result = evaluate_model(model, test, tags, catalog, config).to_dict()
    manifest.wall_clock_seconds = time.perf_counter() - t0
    atomic_write_text(out / "run_manifest.json", json.dumps(manifest.to_dict(), indent=2) + "\n")
    atomic_write_text(out / "config.json", json.dumps(config.to_dict(), indent=2) + "\n")
    return ckpt, manifest
