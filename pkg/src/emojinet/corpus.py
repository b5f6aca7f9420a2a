"""TSV dataset loading, validation, label bookkeeping, and batching."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import STREAM_SHUFFLE, SeededRNG

NUM_CLASSES = 20

# Label names in fixed id order; the evaluation tables and the loss weighting
# both index classes this way.
LABEL_NAMES = (
    ":heart:",
    ":heart_eyes:",
    ":joy:",
    ":two_hearts:",
    ":fire:",
    ":blush:",
    ":sunglasses:",
    ":sparkles:",
    ":blue_heart:",
    ":kiss:",
    ":camera:",
    ":flag-us:",
    ":sunny:",
    ":purple_heart:",
    ":wink:",
    ":100:",
    ":grin:",
    ":christmas_tree:",
    ":camera_with_flash:",
    ":stuck_out_tongue_winking_eye:",
)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class LabelSet:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != NUM_CLASSES:
            raise CorpusError(f"expected {NUM_CLASSES} labels, got {len(self.names)}")
        if len(set(self.names)) != NUM_CLASSES:
            raise CorpusError("label names must be unique")

    @property
    def ids(self) -> range:
        return range(NUM_CLASSES)


def default_labels() -> LabelSet:
    return LabelSet(names=LABEL_NAMES)


def load_labels(path) -> LabelSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return LabelSet(names=tuple(lines))


def save_labels(labels: LabelSet, path) -> None:
    Path(path).write_text("\n".join(labels.names) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Example:
    text: str
    label: int


@dataclass(frozen=True)
class EncodedBatch:
    token_ids: np.ndarray  # (batch, max_len) int64
    mask: np.ndarray       # (batch, max_len) uint8, prefix of ones per row
    labels: np.ndarray     # (batch,) int64

    def __len__(self) -> int:
        return self.token_ids.shape[0]


def load_tsv(path) -> list[Example]:
    """One example per non-blank line: <text>\\t<label_id>, order preserved."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.count("\t") != 1:
                raise CorpusError(f"{path}: expected exactly one tab at line {lineno}")
            text, raw_label = line.split("\t")
            if not text.strip():
                raise CorpusError(f"{path}: empty text at line {lineno}")
            try:
                label = int(raw_label)
            except ValueError:
                raise CorpusError(f"{path}: non-integer label {raw_label!r} at line {lineno}") from None
            if not 0 <= label < NUM_CLASSES:
                raise CorpusError(f"{path}: label out of range at line {lineno}")
            examples.append(Example(text=text, label=label))
    if not examples:
        raise CorpusError(f"{path}: no examples found")
    return examples


def save_tsv(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            # tabs were sanitized at ingestion; guard anyway so files stay parseable
            fh.write(ex.text.replace("\t", " ") + "\t" + str(ex.label) + "\n")


def class_counts(examples) -> np.ndarray:
    counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    for ex in examples:
        counts[ex.label] += 1
    return counts


@dataclass(frozen=True)
class SplitCorpus:
    train: list[Example]
    validation: list[Example]
    test: list[Example]

    @property
    def counts(self) -> dict[str, np.ndarray]:
        return {
            "train": class_counts(self.train),
            "validation": class_counts(self.validation),
            "test": class_counts(self.test),
        }


def load_corpus(data_dir, require_full_train_coverage: bool = True) -> SplitCorpus:
    data_dir = Path(data_dir)
    splits = {}
    for name in ("train", "validation", "test"):
        path = data_dir / f"{name}.tsv"
        if not path.exists():
            raise CorpusError(f"missing split file: {path}")
        splits[name] = load_tsv(path)
    corpus = SplitCorpus(train=splits["train"], validation=splits["validation"], test=splits["test"])
    if require_full_train_coverage:
        missing = np.flatnonzero(class_counts(corpus.train) == 0)
        if missing.size:
            raise CorpusError(f"labels absent from the train split: {missing.tolist()} "
                              "(class weighting would be undefined)")
    return corpus


def encode_examples(examples, encoder) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode a full example list once; batching then just slices the arrays."""
    ids_rows, mask_rows, labels = [], [], []
    for ex in examples:
        ids, mask = encoder(ex.text)
        ids_rows.append(ids)
        mask_rows.append(mask)
        labels.append(ex.label)
    return (np.stack(ids_rows), np.stack(mask_rows), np.asarray(labels, dtype=np.int64))


def make_batches(examples, encoder, batch_size: int, shuffle_seed: int | None = None):
    """Yield every example exactly once per epoch; the final short batch is kept."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    ids, mask, labels = encode_examples(examples, encoder)
    order = np.arange(len(examples))
    if shuffle_seed is not None:
        order = SeededRNG(shuffle_seed, stream=STREAM_SHUFFLE).permutation(len(examples))
    for start in range(0, len(examples), batch_size):
        sel = order[start:start + batch_size]
        yield EncodedBatch(token_ids=ids[sel], mask=mask[sel], labels=labels[sel])


def batches_from_arrays(ids, mask, labels, batch_size: int, order=None):
    if order is None:
        order = np.arange(ids.shape[0])
    for start in range(0, len(order), batch_size):
        sel = order[start:start + batch_size]
        yield EncodedBatch(token_ids=ids[sel], mask=mask[sel], labels=labels[sel])
