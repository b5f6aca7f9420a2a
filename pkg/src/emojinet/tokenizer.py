"""Rule-based tweet tokenization, vocabulary building, fixed-length encoding.

The rule table, longest match first at each scan position (rule order breaks
ties):

  1. URLs: http(s):// or www. followed by URL body characters
  2. user mentions: @ plus word characters
  3. hashtags: # plus word characters
  4. emoticons from a fixed list, case preserved
  5. runs of letters/digits/apostrophes, lowercased
  6. any other non-whitespace character, one token each

The alternation below implements longest-match-first because the rule
alphabets only overlap where an earlier rule already matches at least as
much (e.g. a URL beats the word "www").
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

MAX_LEN = 64

EMOTICONS = (":-)", ":-(", ":'(", ":)", ":(", ":D", ";)", ":P", "<3", ":/")

_URL_BODY = r"[A-Za-z0-9./_\-?=&%#:+~]"
_TOKEN_RE = re.compile(
    r"(?P<url>(?:https?://|www\.)" + _URL_BODY + r"+)"
    r"|(?P<mention>@\w+)"
    r"|(?P<hashtag>#\w+)"
    r"|(?P<emoticon>" + "|".join(re.escape(e) for e in EMOTICONS) + r")"
    r"|(?P<word>(?:[^\W_]|')+)"
    r"|(?P<other>\S)",
    re.UNICODE,
)


def tokenize(text: str) -> list[str]:
    """Split a tweet into tokens; word tokens are lowercased, the rest keep case."""
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        tok = m.group()
        if m.lastgroup == "word":
            tok = tok.lower()
        tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between kept tokens and ids; PAD=0 and UNK=1 are reserved."""

    id_to_token: tuple[str, ...]
    min_freq: int
    token_to_id: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if self.id_to_token[PAD_ID] != PAD_TOKEN or self.id_to_token[UNK_ID] != UNK_TOKEN:
            raise ValueError("vocabulary must reserve id 0 for <pad> and id 1 for <unk>")
        object.__setattr__(self, "token_to_id", {t: i for i, t in enumerate(self.id_to_token)})

    def __len__(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def sha256(self) -> str:
        payload = "\n".join(self.id_to_token).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def build_vocab(examples, min_freq: int = 2) -> Vocabulary:
    """Count tokens over the corpus; keep those with frequency >= min_freq.

    Ids are assigned by descending frequency, ties broken lexicographically,
    so two builds over the same corpus agree exactly.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter()
    for ex in examples:
        counts.update(tokenize(ex.text))
    kept = [(tok, n) for tok, n in counts.items() if n >= min_freq]
    kept.sort(key=lambda item: (-item[1], item[0]))
    return Vocabulary(id_to_token=(PAD_TOKEN, UNK_TOKEN) + tuple(tok for tok, _ in kept),
                      min_freq=min_freq)


def encode(text: str, vocab: Vocabulary, max_len: int = MAX_LEN):
    """Encode to (ids, mask) of fixed length: UNK for unknowns, PAD past the end."""
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    mask = np.zeros(max_len, dtype=np.uint8)
    for pos, tok in enumerate(tokenize(text)[:max_len]):
        ids[pos] = vocab.lookup(tok)
        mask[pos] = 1
    return ids, mask


def make_encoder(vocab: Vocabulary, max_len: int = MAX_LEN):
    return lambda text: encode(text, vocab, max_len)


def save_vocab(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(vocab.id_to_token) + "\n")


def load_vocab(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().splitlines()
    if len(tokens) < 2 or tokens[0] != PAD_TOKEN or tokens[1] != UNK_TOKEN:
        raise ValueError(f"{path} is not a vocabulary file (expected <pad>/<unk> header lines)")
    return Vocabulary(id_to_token=tuple(tokens), min_freq=0)
