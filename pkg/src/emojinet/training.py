"""Epoch loop: shuffled batches, per-epoch loss tracking, early stopping,
best-weight restoration, learning-curve emission."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .corpus import NUM_CLASSES, SplitCorpus, batches_from_arrays, encode_examples
from .losses_optim import OptimConfig, Optimizer, cross_entropy, make_loss_fn
from .metrics import predict_labels
from .models import Model, ModelConfig, build_model
from .rng import STREAM_SHUFFLE, SeededRNG
from .tokenizer import Vocabulary, make_encoder

EVAL_BATCH = 256


class TrainAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    wall_seconds: float


@dataclass
class EarlyStopState:
    patience: int
    best_val_loss: float = np.inf
    best_epoch: int = 0
    counter: int = 0

    def update(self, val_loss: float, epoch: int) -> bool:
        """Record this epoch; return True when patience is exhausted."""
        if val_loss < self.best_val_loss:
            self.best_val_loss = val_loss
            self.best_epoch = epoch
            self.counter = 0
            return False
        self.counter += 1
        return self.counter >= self.patience


@dataclass(frozen=True)
class EncodedSplits:
    train: tuple[np.ndarray, np.ndarray, np.ndarray]
    validation: tuple[np.ndarray, np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray, np.ndarray]


def encode_splits(corpus: SplitCorpus, vocab: Vocabulary, max_len: int = 64) -> EncodedSplits:
    enc = make_encoder(vocab, max_len)
    return EncodedSplits(
        train=encode_examples(corpus.train, enc),
        validation=encode_examples(corpus.validation, enc),
        test=encode_examples(corpus.test, enc),
    )


def evaluate_loss_accuracy(model: Model, arrays, loss_fn, batch_size: int = EVAL_BATCH):
    ids, mask, labels = arrays
    was_training = model.training
    model.eval()
    total_loss, correct = 0.0, 0
    with ad.no_grad():
        for batch in batches_from_arrays(ids, mask, labels, batch_size):
            logits = model.forward(batch)
            total_loss += loss_fn(logits, batch.labels).item() * len(batch)
            correct += int((predict_labels(logits) == batch.labels).sum())
    if was_training:
        model.train()
    n = ids.shape[0]
    return total_loss / n, correct / n


def train(
    model: Model,
    splits: EncodedSplits,
    loss_kind: str,
    optim_cfg: OptimConfig,
    *,
    epochs: int,
    batch_size: int = 32,
    gamma: float = 1.5,
    patience: int | None = 5,
    seed: int = 0,
    log=None,
) -> tuple[Model, list[TrainRecord]]:
    """Run the epoch loop; on completion or early stop the model carries the
    weights of the best-validation-loss epoch.

    The training criterion is ``loss_kind``; validation loss is always the
    focal criterion (gamma 1.5, balanced weights from the train counts).
    """
    train_ids, train_mask, train_labels = splits.train
    counts = np.bincount(train_labels, minlength=NUM_CLASSES)
    _, loss_fn = make_loss_fn(loss_kind, gamma, counts)
    _, val_loss_fn = make_loss_fn("focal", 1.5, counts)
    opt = Optimizer(model.parameters(), optim_cfg)
    shuffler = SeededRNG(seed, stream=STREAM_SHUFFLE)
    stopper = EarlyStopState(patience=patience) if patience else None
    tape = ad.active_tape()

    records: list[TrainRecord] = []
    best_epoch, best_val, best_weights = 0, np.inf, None
    n = train_ids.shape[0]
    for epoch in range(1, epochs + 1):
        started = time.perf_counter()
        model.train()
        order = shuffler.permutation(n)
        running, seen = 0.0, 0
        for index, batch in enumerate(batches_from_arrays(train_ids, train_mask, train_labels,
                                                          batch_size, order)):
            tape.reset()
            opt.zero_grad()
            try:
                loss = loss_fn(model.forward(batch), batch.labels)
            except (RuntimeError, ValueError) as exc:
                raise TrainAbort(f"aborted at epoch {epoch}, batch {index}: {exc}") from exc
            value = loss.item()
            if not np.isfinite(value):
                raise TrainAbort(f"non-finite training loss at epoch {epoch}, batch {index}")
            ad.backward(loss)
            opt.step()
            running += value * len(batch)
            seen += len(batch)
        tape.reset()
        val_loss, val_acc = evaluate_loss_accuracy(model, splits.validation, val_loss_fn)
        records.append(TrainRecord(
            epoch=epoch,
            train_loss=running / seen,
            val_loss=val_loss,
            val_accuracy=val_acc,
            wall_seconds=time.perf_counter() - started,
        ))
        if log:
            log(records[-1])
        if val_loss < best_val:
            best_val, best_epoch = val_loss, epoch
            best_weights = model.state_arrays()
        if stopper and stopper.update(val_loss, epoch):
            break
    if best_weights is not None:
        model.load_state_arrays(best_weights)
    model.eval()
    return model, records


def overfit_probe(
    config: ModelConfig,
    splits: EncodedSplits,
    n_examples: int = 64,
    max_epochs: int = 200,
    lr: float = 1e-3,
    batch_size: int = 32,
    seed: int = 0,
) -> float:
    """Capacity sanity check: memorize a small train subset, report its accuracy.

    Validation is disabled; lr=0 means no updates at all (measures the fresh
    model). Stops as soon as the subset is effectively memorized.
    """
    ids, mask, labels = splits.train
    subset = (ids[:n_examples], mask[:n_examples], labels[:n_examples])
    model = build_model(config, seed=seed)
    opt = Optimizer(model.parameters(), OptimConfig(kind="adam", lr=lr)) if lr > 0 else None
    shuffler = SeededRNG(seed, stream=STREAM_SHUFFLE)
    tape = ad.active_tape()
    accuracy = evaluate_loss_accuracy(model, subset, cross_entropy)[1]
    for _ in range(max_epochs):
        if opt is None:
            break
        model.train()
        order = shuffler.permutation(subset[0].shape[0])
        for batch in batches_from_arrays(*subset, batch_size, order):
            tape.reset()
            opt.zero_grad()
            loss = cross_entropy(model.forward(batch), batch.labels)
            ad.backward(loss)
            opt.step()
        tape.reset()
        _, accuracy = evaluate_loss_accuracy(model, subset, cross_entropy)
        if accuracy >= 0.995:
            break
    return accuracy


def write_curves_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss,val_accuracy,wall_seconds\n")
        for r in records:
            fh.write(f"{r.epoch},{r.train_loss:.6f},{r.val_loss:.6f},"
                     f"{r.val_accuracy:.6f},{r.wall_seconds:.3f}\n")


def write_curves_svg(records, path, width: int = 640, height: int = 400) -> None:
    """Two-polyline loss plot (train vs validation), no plotting dependency."""
    pad = 45
    xs = [r.epoch for r in records]
    series = {"train": [r.train_loss for r in records], "val": [r.val_loss for r in records]}
    lo = min(min(v) for v in series.values())
    hi = max(max(v) for v in series.values())
    span = (hi - lo) or 1.0
    x0, x1 = min(xs), max(xs)
    xspan = (x1 - x0) or 1

    def sx(x):
        return pad + (x - x0) / xspan * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - lo) / span * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{width // 2}" y="{height - 8}" font-size="12" text-anchor="middle">epoch</text>',
             f'<text x="12" y="{height // 2}" font-size="12" transform="rotate(-90 12 {height // 2})" '
             f'text-anchor="middle">loss</text>']
    for (name, values), color in zip(series.items(), ("#1f77b4", "#d62728")):
        points = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, values))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        parts.append(f'<text x="{width - pad + 4}" y="{sy(values[-1]):.1f}" font-size="11" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
