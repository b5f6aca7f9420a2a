"""Command-line entry point: check-data, build-vocab, train, evaluate, compare."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .checkpoint import restore_model, save_checkpoint
from .corpus import (
    CorpusError, batches_from_arrays, default_labels, load_corpus, load_labels,
)
from .losses_optim import PRESETS, OptimConfig, TrainPreset
from .metrics import (
    confusion_matrix, predict_labels, report_from_confusion, write_confusion_csv,
    write_report_files,
)
from .models import ARCHS, ModelConfig, build_model
from .tokenizer import build_vocab, load_vocab, make_encoder, save_vocab
from .training import (
    EncodedSplits, encode_examples, encode_splits, train, write_curves_csv,
    write_curves_svg,
)

# every key a config file (and config_resolved) may carry, with its parser
CONFIG_KEYS = {
    "data_dir": str, "out": str, "arch": str, "preset": str, "seed": int,
    "epochs": int, "batch_size": int, "lr": float, "weight_decay": float,
    "optimizer": str, "clip_norm": float, "gamma": float, "loss": str,
    "patience": int, "min_freq": int, "limit_train": int, "limit_test": int,
    "embed_dim": int, "max_len": int,
}
NONE_TOKEN = "none"


def _read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = None if raw == "" else CONFIG_KEYS[key](raw)  # empty value = unset
    return values


def _write_config_file(values: dict, path) -> None:
    lines = [f"{key}={'' if values[key] is None else values[key]}" for key in sorted(values)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def resolve_run_config(args) -> dict:
    """Preset defaults, overridden by --config file values, overridden by flags."""
    file_values = _read_config_file(args.config) if args.config else {}

    def pick(key, flag_value, fallback):
        if flag_value is not None:
            return flag_value
        if key in file_values:
            return file_values[key]
        return fallback

    arch = pick("arch", getattr(args, "arch", None), None)
    if arch is None:
        raise ValueError("--arch is required (flag or config file)")
    preset_name = pick("preset", getattr(args, "preset", None), "paper")
    if preset_name == "paper":
        preset = PRESETS[arch]
    elif preset_name == NONE_TOKEN:
        preset = TrainPreset(arch=arch, optim=OptimConfig(kind="adam", lr=1e-3),
                             batch_size=32, epochs=10, patience=5)
    else:
        raise ValueError(f"unknown preset {preset_name!r} (choose 'paper' or 'none')")

    resolved = {
        "data_dir": pick("data_dir", getattr(args, "data_dir", None), "data/emoji"),
        "out": pick("out", getattr(args, "out", None), "runs/latest"),
        "arch": arch,
        "preset": preset_name,
        "seed": pick("seed", getattr(args, "seed", None), 0),
        "epochs": pick("epochs", getattr(args, "epochs", None), preset.epochs),
        "batch_size": pick("batch_size", getattr(args, "batch_size", None), preset.batch_size),
        "lr": pick("lr", getattr(args, "lr", None), preset.optim.lr),
        "weight_decay": pick("weight_decay", getattr(args, "weight_decay", None),
                             preset.optim.weight_decay),
        "optimizer": pick("optimizer", getattr(args, "optimizer", None), preset.optim.kind),
        "clip_norm": pick("clip_norm", getattr(args, "clip_norm", None), preset.optim.clip_norm),
        "gamma": pick("gamma", getattr(args, "gamma", None), preset.gamma),
        "loss": pick("loss", getattr(args, "loss", None), preset.loss),
        "patience": pick("patience", getattr(args, "patience", None), preset.patience),
        "min_freq": pick("min_freq", getattr(args, "min_freq", None), 2),
        "limit_train": pick("limit_train", getattr(args, "limit_train", None), None),
        "limit_test": pick("limit_test", getattr(args, "limit_test", None), None),
        "embed_dim": pick("embed_dim", getattr(args, "embed_dim", None), 128),
        "max_len": pick("max_len", getattr(args, "max_len", None), 64),
    }
    return resolved


def _load_labels_or_default(data_dir: Path):
    labels_path = data_dir / "labels.txt"
    return load_labels(labels_path) if labels_path.exists() else default_labels()


def _limit(arrays, n):
    if n is None:
        return arrays
    ids, mask, labels = arrays
    return ids[:n], mask[:n], labels[:n]


def _evaluate_arrays(model, arrays, labels_meta, out_dir: Path):
    ids, mask, labels = arrays
    preds = []
    with ad.no_grad():
        model.eval()
        for batch in batches_from_arrays(ids, mask, labels, 256):
            preds.append(predict_labels(model.forward(batch)))
    cm = confusion_matrix(labels, np.concatenate(preds))
    report = report_from_confusion(cm)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_files(report, labels_meta, out_dir)
    write_confusion_csv(cm, labels_meta, out_dir / "confusion.csv")
    return report


# --- subcommands ------------------------------------------------------------------

def cmd_check_data(args) -> int:
    data_dir = Path(args.data_dir)
    corpus = load_corpus(data_dir, require_full_train_coverage=False)
    labels = _load_labels_or_default(data_dir)
    counts = corpus.counts
    print(f"train: {len(corpus.train)}  validation: {len(corpus.validation)}  "
          f"test: {len(corpus.test)}")
    print(f"{'label':<32}{'train':>8}{'val':>8}{'test':>8}")
    for i, name in enumerate(labels.names):
        print(f"{name:<32}{counts['train'][i]:>8}{counts['validation'][i]:>8}{counts['test'][i]:>8}")
    train_counts = counts["train"]
    missing = np.flatnonzero(train_counts == 0)
    if missing.size:
        print(f"error: labels missing from train split: {[labels.names[i] for i in missing]}",
              file=sys.stderr)
        return 1
    ratio = train_counts.max() / train_counts.min()
    print(f"imbalance ratio (train max/min): {ratio:.2f}")
    return 0


def cmd_build_vocab(args) -> int:
    corpus = load_corpus(args.data_dir)
    vocab = build_vocab(corpus.train, min_freq=args.min_freq)
    save_vocab(vocab, args.out)
    print(f"wrote {len(vocab)} tokens to {args.out} (min_freq={args.min_freq})")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_run_config(args)
    data_dir = Path(cfg["data_dir"])
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_config_file(cfg, out_dir / "config_resolved")

    corpus = load_corpus(data_dir)
    labels_meta = _load_labels_or_default(data_dir)
    vocab = build_vocab(corpus.train, min_freq=cfg["min_freq"])
    save_vocab(vocab, out_dir / "vocab.txt")

    splits = encode_splits(corpus, vocab, max_len=cfg["max_len"])
    splits = EncodedSplits(train=_limit(splits.train, cfg["limit_train"]),
                           validation=splits.validation, test=splits.test)

    model_cfg = ModelConfig(arch=cfg["arch"], vocab_size=len(vocab),
                            embed_dim=cfg["embed_dim"], max_len=cfg["max_len"])
    model = build_model(model_cfg, seed=cfg["seed"])
    optim_cfg = OptimConfig(kind=cfg["optimizer"], lr=cfg["lr"],
                            weight_decay=cfg["weight_decay"], clip_norm=cfg["clip_norm"])
    model, records = train(
        model, splits, cfg["loss"], optim_cfg,
        epochs=cfg["epochs"], batch_size=cfg["batch_size"], gamma=cfg["gamma"],
        patience=cfg["patience"], seed=cfg["seed"],
        log=lambda r: print(f"epoch {r.epoch}: train_loss={r.train_loss:.4f} "
                            f"val_loss={r.val_loss:.4f} val_acc={r.val_accuracy:.3f} "
                            f"({r.wall_seconds:.1f}s)"),
    )

    save_checkpoint(out_dir / "checkpoint.bin", model, vocab.sha256(), extra={"run": cfg})
    write_curves_csv(records, out_dir / "curves.csv")
    write_curves_svg(records, out_dir / "curves.svg")
    report = _evaluate_arrays(model, _limit(splits.test, cfg["limit_test"]), labels_meta, out_dir)
    print(f"test accuracy={report.accuracy:.4f} macro_f1={report.macro[2]:.4f} "
          f"weighted_f1={report.weighted[2]:.4f}")
    print(f"artifacts in {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt_path = Path(args.checkpoint)
    model, header = restore_model(ckpt_path)
    vocab_path = Path(args.vocab) if args.vocab else ckpt_path.parent / "vocab.txt"
    vocab = load_vocab(vocab_path)
    if vocab.sha256() != header["vocab_sha256"]:
        raise ValueError(f"vocabulary hash mismatch: checkpoint was trained with a different "
                         f"vocabulary than {vocab_path} (token ids would be remapped silently)")
    data_dir = Path(args.data_dir)
    corpus = load_corpus(data_dir, require_full_train_coverage=False)
    labels_meta = _load_labels_or_default(data_dir)
    examples = getattr(corpus, "validation" if args.split == "validation" else args.split)
    arrays = encode_examples(examples, make_encoder(vocab, header["config"]["max_len"]))
    report = _evaluate_arrays(model, _limit(arrays, args.limit), labels_meta, Path(args.out))
    print(f"{args.split}: accuracy={report.accuracy:.4f} macro_f1={report.macro[2]:.4f} "
          f"weighted_f1={report.weighted[2]:.4f} support={report.total}")
    return 0


def cmd_compare(args) -> int:
    out_root = Path(args.out)
    rows = []
    for arch in ARCHS:
        sub = argparse.Namespace(**{**vars(args), "arch": arch, "out": str(out_root / arch),
                                    "preset": "paper", "config": None})
        code = cmd_train(sub)
        if code != 0:
            return code
        import json

        payload = json.loads((out_root / arch / "report.json").read_text(encoding="utf-8"))
        rows.append((arch, payload["accuracy"], payload["macro_avg"]["f1"],
                     payload["weighted_avg"]["f1"]))
    lines = [f"{'arch':<14}{'accuracy':>10}{'macro_f1':>10}{'weighted_f1':>12}"]
    for arch, acc, mf1, wf1 in rows:
        lines.append(f"{arch:<14}{acc:>10.4f}{mf1:>10.4f}{wf1:>12.4f}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    (out_root / "compare.txt").write_text(table, encoding="utf-8")
    with open(out_root / "compare.csv", "w", encoding="utf-8") as fh:
        fh.write("arch,accuracy,macro_f1,weighted_f1\n")
        for arch, acc, mf1, wf1 in rows:
            fh.write(f"{arch},{acc:.6f},{mf1:.6f},{wf1:.6f}\n")
    return 0


# --- parser -------------------------------------------------------------------------

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--arch", choices=ARCHS)
    p.add_argument("--preset", choices=["paper", NONE_TOKEN])
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--loss", choices=["ce", "wce", "focal"])
    p.add_argument("--optimizer", choices=["adam", "adamw"])
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--min-freq", dest="min_freq", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--limit-train", dest="limit_train", type=int)
    p.add_argument("--limit-test", dest="limit_test", type=int)
    p.add_argument("--out")
    p.add_argument("--config", help="key=value file; flags override file values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emojinet",
                                     description="emoji prediction from tweets, from scratch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-data", help="validate splits and print class statistics")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.set_defaults(func=cmd_check_data)

    p = sub.add_parser("build-vocab", help="build and save the token vocabulary")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--min-freq", dest="min_freq", type=int, default=2)
    p.add_argument("--out", default="vocab.txt")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train one architecture and emit artifacts")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--split", choices=["train", "validation", "test"], default="test")
    p.add_argument("--limit", type=int)
    p.add_argument("--vocab", help="vocabulary file (default: next to the checkpoint)")
    p.add_argument("--out", default="eval")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="train all architectures, emit a combined table")
    _add_train_flags(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
