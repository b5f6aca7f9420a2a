"""Fetch the emoji-prediction corpus and write the canonical TSV layout.

Downloads the per-split text/label files plus the emoji mapping from the
dataset's public repository, verifies the label order (id 0 must be the red
heart) and the expected split sizes, sanitizes tabs, and writes:

    train.tsv / validation.tsv / test.tsv   one "<text>\\t<label>" per line
    labels.txt                              line i = name of label id i
    manifest.json                           sizes, class counts, checksums

This script is the only networked piece of the pipeline; everything
downstream reads the files it produces.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from collections import Counter
from pathlib import Path

import requests

DEFAULT_BASE_URL = "https://raw.githubusercontent.com/cardiffnlp/tweeteval/main/datasets/emoji/"

NUM_CLASSES = 20
CANONICAL_SIZES = {"train": 45000, "validation": 5000, "test": 50000}
CANONICAL_TEST_HEART_SUPPORT = 10798  # class-0 count in the canonical test split
RED_HEART = "❤"

# label names in id order (id 0 is verified against the upstream mapping)
LABEL_NAMES = (
    ":heart:", ":heart_eyes:", ":joy:", ":two_hearts:", ":fire:",
    ":blush:", ":sunglasses:", ":sparkles:", ":blue_heart:", ":kiss:",
    ":camera:", ":flag-us:", ":sunny:", ":purple_heart:", ":wink:",
    ":100:", ":grin:", ":christmas_tree:", ":camera_with_flash:",
    ":stuck_out_tongue_winking_eye:",
)

# upstream file names per split
SPLIT_FILES = {
    "train": ("train_text.txt", "train_labels.txt"),
    "validation": ("val_text.txt", "val_labels.txt"),
    "test": ("test_text.txt", "test_labels.txt"),
}


class IngestError(RuntimeError):
    pass


def fetch_text(url: str) -> str:
    try:
        response = requests.get(url, timeout=60)
        response.raise_for_status()
    except requests.RequestException as exc:
        raise IngestError(f"download failed for {url}: {exc}") from exc
    response.encoding = "utf-8"
    return response.text


def parse_mapping(raw: str) -> list[str]:
    """mapping.txt lines: "<id>\\t<emoji>[\\t<name>]" -> emoji strings in id order."""
    emojis = {}
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            raise IngestError(f"mapping line {lineno} is not tab-separated: {line!r}")
        emojis[int(fields[0])] = fields[1]
    if sorted(emojis) != list(range(NUM_CLASSES)):
        raise IngestError(f"mapping does not cover ids 0..{NUM_CLASSES - 1}: got {sorted(emojis)}")
    return [emojis[i] for i in range(NUM_CLASSES)]


def verify_label_order(emojis: list[str]) -> None:
    if RED_HEART not in emojis[0]:
        observed = ", ".join(f"{i}={e}" for i, e in enumerate(emojis))
        raise IngestError(
            "label-order mismatch: id 0 is not the red heart; observed mapping: " + observed)


def sanitize(text: str) -> str:
    return text.replace("\t", " ").strip()


def build_split(text_blob: str, label_blob: str, split: str, expected_size: int):
    texts = text_blob.splitlines()
    labels = label_blob.splitlines()
    if len(texts) != len(labels):
        raise IngestError(f"{split}: {len(texts)} texts but {len(labels)} labels")
    if len(texts) != expected_size:
        raise IngestError(f"{split}: expected {expected_size} examples, got {len(texts)}")
    rows = []
    for lineno, (text, raw_label) in enumerate(zip(texts, labels), 1):
        label = int(raw_label)
        if not 0 <= label < NUM_CLASSES:
            raise IngestError(f"{split} line {lineno}: label {label} out of range")
        clean = sanitize(text)
        if not clean:
            raise IngestError(f"{split} line {lineno}: empty text")
        rows.append((clean, label))
    return rows


def sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def ingest(out_dir, base_url: str = DEFAULT_BASE_URL,
           expected_sizes: dict[str, int] | None = None) -> dict:
    """Download, verify, and write all splits; return the manifest dict."""
    expected_sizes = expected_sizes or CANONICAL_SIZES
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    emojis = parse_mapping(fetch_text(base_url + "mapping.txt"))
    verify_label_order(emojis)

    manifest: dict = {"source": base_url, "labels": list(LABEL_NAMES), "splits": {}}
    for split, (text_file, label_file) in SPLIT_FILES.items():
        rows = build_split(fetch_text(base_url + text_file), fetch_text(base_url + label_file),
                           split, expected_sizes[split])
        counts = Counter(label for _, label in rows)
        if split == "train":
            missing = [i for i in range(NUM_CLASSES) if counts[i] == 0]
            if missing:
                raise IngestError(f"train split is missing labels {missing}")
        if split == "test" and expected_sizes == CANONICAL_SIZES \
                and counts[0] != CANONICAL_TEST_HEART_SUPPORT:
            raise IngestError(f"test split has {counts[0]} examples of label 0, "
                              f"expected {CANONICAL_TEST_HEART_SUPPORT}")
        path = out_dir / f"{split}.tsv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for text, label in rows:
                fh.write(f"{text}\t{label}\n")
        manifest["splits"][split] = {
            "size": len(rows),
            "class_counts": [counts[i] for i in range(NUM_CLASSES)],
            "sha256": sha256_of(path),
        }

    (out_dir / "labels.txt").write_text("\n".join(LABEL_NAMES) + "\n", encoding="utf-8")
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def verify_manifest(data_dir) -> None:
    """Recompute TSV checksums and compare against manifest.json."""
    data_dir = Path(data_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text(encoding="utf-8"))
    for split, info in manifest["splits"].items():
        actual = sha256_of(data_dir / f"{split}.tsv")
        if actual != info["sha256"]:
            raise IngestError(f"{split}.tsv checksum mismatch: manifest {info['sha256']}, "
                              f"file {actual}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="download the emoji-prediction dataset splits")
    parser.add_argument("--out", default="data/emoji", help="output data directory")
    parser.add_argument("--base-url", default=DEFAULT_BASE_URL)
    parser.add_argument("--verify", action="store_true",
                        help="only verify an existing directory against its manifest")
    args = parser.parse_args(argv)
    try:
        if args.verify:
            verify_manifest(args.out)
            print(f"{args.out}: checksums match the manifest")
        else:
            manifest = ingest(args.out, base_url=args.base_url)
            sizes = {s: info["size"] for s, info in manifest["splits"].items()}
            print(f"wrote splits {sizes} to {args.out}")
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
