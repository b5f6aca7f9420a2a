#!/usr/bin/env python3
"""Generate the bundled 200-example fixture dataset (100 train / 20 val / 80 test).

The splits are synthetic tweet-like text with the properties the test suite
exercises:

* class imbalance of roughly 9.5:1 (class 0 dominates, several classes have
  only two training examples);
* most classes carry one or two keyword unigrams;
* four class pairs share their bag of words and differ only in the order of a
  two-word phrase, so order-aware encoders can separate them while a pooled
  bag-of-words model cannot;
* the rare heart-variant classes reuse the dominant class's words plus a weak
  marker that also shows up in dominant-class tweets as noise, mirroring the
  semantic overlap that makes imbalanced training hard;
* mentions, hashtags, URLs, and emoticons are sprinkled from shared pools so
  the tweet tokenizer's rule table is exercised without adding class signal.

Every keyword appears at least twice in train, so a min_freq=2 vocabulary
keeps it. Output is deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from emojinet.corpus import LABEL_NAMES, Example, save_tsv  # noqa: E402
from emojinet.rng import STREAM_DATA, SeededRNG  # noqa: E402

TRAIN_COUNTS = [21, 9, 8, 4, 7, 4, 4, 5, 4, 3, 3, 4, 4, 3, 3, 2, 3, 3, 4, 2]
VAL_COUNTS = [4, 2, 2, 1, 2, 1, 1, 1, 1, 0, 1, 1, 1, 0, 1, 0, 1, 0, 0, 0]
TEST_COUNTS = [15, 7, 6, 3, 5, 3, 4, 4, 3, 2, 3, 4, 4, 2, 3, 2, 3, 3, 2, 2]

FILLERS = ("the", "my", "this", "today", "just", "really", "you", "and",
           "for", "with", "all", "what", "a", "here", "now", "it")
MENTIONS = ("@sam", "@jules_89", "@BestieBot")
HASHTAGS = ("#mood", "#tbt", "#nofilter")
URLS = ("https://t.co/x1", "https://t.co/q9z", "www.pics.example/a")
EMOTICONS = (":)", ";)", ":D", "<3")

# unigram keywords; empty entries are covered by phrase pairs or marker overlap
KEYWORDS = {
    0: ("love", "heart", "beautiful", "sweet"),
    1: ("gorgeous", "stunning"),
    2: (),                       # phrase pair with 16
    3: (),                       # heart overlap + marker
    4: ("lit", "mixtape"),
    5: (),                       # phrase pair with 12
    6: (),                       # phrase pair with 14
    7: ("glitter", "shine"),
    8: (),                       # heart overlap + marker
    9: ("goodnight", "kisses"),
    10: ("portrait", "lens"),
    11: ("america", "freedom"),
    12: (),                      # phrase pair with 5
    13: (),                      # heart overlap + marker
    14: (),                      # phrase pair with 6
    15: ("hundred", "facts"),
    16: (),                      # phrase pair with 2
    17: ("christmas", "santa"),
    18: ("flashback", "studio"),
    19: ("silly", "weird"),
}

# (class using "u v", class using "v u", u, v): the order is the only signal
PHRASE_PAIRS = (
    (2, 16, "so", "funny"),
    (5, 12, "morning", "good"),
    (6, 14, "too", "cool"),
)

# rare class -> marker word; tweets reuse HEART_WORDS plus the marker
MARKERS = {3: "forever", 8: "blue", 13: "purple"}
HEART_WORDS = ("love", "heart", "sweet")
MARKER_NOISE_RATE = 0.25  # chance a class-0 tweet picks up some marker word


def make_tweet(label: int, rng: SeededRNG) -> str:
    words = [FILLERS[int(rng.integers(0, len(FILLERS)))] for _ in range(int(rng.integers(1, 4)))]

    def insert(chunk: list[str]) -> None:
        at = int(rng.integers(0, len(words) + 1))
        words[at:at] = chunk

    pair = next(((a, b, u, v) for a, b, u, v in PHRASE_PAIRS if label in (a, b)), None)
    if pair is not None:
        a, _, u, v = pair
        insert([u, v] if label == a else [v, u])
    elif label in MARKERS:
        insert([HEART_WORDS[int(rng.integers(0, len(HEART_WORDS)))], MARKERS[label]])
        if rng.random(()) < 0.5:
            insert([HEART_WORDS[int(rng.integers(0, len(HEART_WORDS)))]])
    else:
        ks = KEYWORDS[label]
        for _ in range(2 + int(rng.integers(0, 2))):
            insert([ks[int(rng.integers(0, len(ks)))]])
        if label == 0 and rng.random(()) < MARKER_NOISE_RATE:
            insert([list(MARKERS.values())[int(rng.integers(0, len(MARKERS)))]])

    roll = rng.random(())
    if roll < 0.12:
        insert([MENTIONS[int(rng.integers(0, len(MENTIONS)))]])
    elif roll < 0.22:
        words.append(HASHTAGS[int(rng.integers(0, len(HASHTAGS)))])
    elif roll < 0.3:
        words.append(URLS[int(rng.integers(0, len(URLS)))])
    elif roll < 0.4:
        words.append(EMOTICONS[int(rng.integers(0, len(EMOTICONS)))])
    return " ".join(words)


def make_split(counts, rng: SeededRNG) -> list[Example]:
    examples = [Example(text=make_tweet(label, rng), label=label)
                for label, n in enumerate(counts) for _ in range(n)]
    order = rng.permutation(len(examples))
    return [examples[i] for i in order]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/fixture", help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    rng = SeededRNG(args.seed, stream=STREAM_DATA)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, counts in (("train", TRAIN_COUNTS), ("validation", VAL_COUNTS), ("test", TEST_COUNTS)):
        split = make_split(counts, rng)
        save_tsv(split, out / f"{name}.tsv")
        print(f"{name}: {len(split)} examples")
    (out / "labels.txt").write_text("\n".join(LABEL_NAMES) + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
