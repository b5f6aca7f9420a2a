"""The four classifier architectures, built from configuration.

Parameters are registered (and their init draws consumed) in network order,
so a (config, seed) pair fully determines every weight. All forwards force
masked positions to the PAD id before the embedding lookup, which together
with masked pooling makes logits a function of unmasked tokens only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .corpus import NUM_CLASSES
from .rng import SeededRNG
from .tokenizer import MAX_LEN, PAD_ID

ARCHS = ("feedforward", "cnn", "transformer", "multiscale")

FF_HIDDEN = (256, 128, 64)
EMBED_INIT = 0.05


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    vocab_size: int
    embed_dim: int = 128
    num_classes: int = NUM_CLASSES
    max_len: int = MAX_LEN
    dropout: float = 0.3
    # cnn
    kernel_sizes: tuple[int, ...] = (3, 4, 5)
    num_filters: int = 128
    # transformer (also the multiscale base encoder)
    num_layers: int = 2
    num_heads: int = 2
    ffn_dim: int = 0  # 0 = 2 * embed_dim
    # multiscale head
    chunk_size: int = 4
    classifier_dropout: float = 0.2

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r} (choose from {ARCHS})")
        if self.vocab_size < 2 or self.embed_dim <= 0:
            raise ValueError("vocab_size must include the specials and embed_dim must be > 0")
        if not 0.0 <= self.dropout < 1.0 or not 0.0 <= self.classifier_dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.arch in ("transformer", "multiscale") and self.embed_dim % self.num_heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by {self.num_heads} heads")
        if self.arch == "multiscale" and self.embed_dim % 8:
            raise ValueError(f"multiscale needs embed_dim divisible by 8, got {self.embed_dim}")
        if self.ffn_dim == 0:
            object.__setattr__(self, "ffn_dim", 2 * self.embed_dim)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel_sizes"] = list(self.kernel_sizes)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["kernel_sizes"] = tuple(d["kernel_sizes"])
        return ModelConfig(**d)


def sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    """PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos(same)."""
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    i = np.arange(0, dim, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i / dim)
    pe = np.zeros((max_len, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : dim // 2])
    return pe.astype(np.float32)


class Model:
    """A parameter collection plus the forward pass its config describes."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.rng = SeededRNG(seed)
        self.training = True
        self.params: dict[str, ad.Tensor] = {}
        self._build()

    # -- parameter registration ------------------------------------------------

    def _register(self, name: str, data: np.ndarray) -> ad.Tensor:
        t = ad.Tensor(data.astype(np.float32), requires_grad=True)
        self.params[name] = t
        return t

    def _glorot(self, name: str, fan_in: int, fan_out: int, shape=None) -> ad.Tensor:
        limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
        return self._register(name, self.rng.uniform(-limit, limit, shape or (fan_in, fan_out)))

    def _linear(self, name: str, fan_in: int, fan_out: int) -> None:
        self._glorot(f"{name}.w", fan_in, fan_out)
        self._register(f"{name}.b", np.zeros(fan_out))

    def _layer_norm_params(self, name: str, dim: int) -> None:
        self._register(f"{name}.gamma", np.ones(dim))
        self._register(f"{name}.beta", np.zeros(dim))

    def _attention_params(self, name: str, dim: int) -> None:
        for proj in ("wq", "wk", "wv", "wo"):
            self._glorot(f"{name}.{proj}", dim, dim)
        for proj in ("bq", "bk", "bv", "bo"):
            self._register(f"{name}.{proj}", np.zeros(dim))

    def _embedding(self) -> None:
        table = self.rng.uniform(-EMBED_INIT, EMBED_INIT, (self.config.vocab_size, self.config.embed_dim))
        table[PAD_ID] = 0.0  # frozen zero padding vector
        self._register("embedding", table)

    def _encoder_stack_params(self) -> None:
        cfg = self.config
        for layer in range(cfg.num_layers):
            base = f"encoder.{layer}"
            self._attention_params(f"{base}.attn", cfg.embed_dim)
            self._layer_norm_params(f"{base}.ln1", cfg.embed_dim)
            self._linear(f"{base}.ffn1", cfg.embed_dim, cfg.ffn_dim)
            self._linear(f"{base}.ffn2", cfg.ffn_dim, cfg.embed_dim)
            self._layer_norm_params(f"{base}.ln2", cfg.embed_dim)

    def _build(self) -> None:
        cfg = self.config
        self._embedding()
        if cfg.arch == "feedforward":
            widths = (cfg.embed_dim,) + FF_HIDDEN
            for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:]), start=1):
                self._linear(f"fc{i}", fan_in, fan_out)
                self._layer_norm_params(f"ln{i}", fan_out)
            self._linear("out", FF_HIDDEN[-1], cfg.num_classes)
        elif cfg.arch == "cnn":
            for w in cfg.kernel_sizes:
                self._glorot(f"conv{w}.k", w * cfg.embed_dim, cfg.num_filters,
                             shape=(cfg.num_filters, w, cfg.embed_dim))
                self._register(f"conv{w}.b", np.zeros(cfg.num_filters))
            self._linear("out", cfg.num_filters * len(cfg.kernel_sizes), cfg.num_classes)
        elif cfg.arch == "transformer":
            self._encoder_stack_params()
            self._linear("cls.fc", cfg.embed_dim, cfg.embed_dim)
            self._linear("cls.out", cfg.embed_dim, cfg.num_classes)
        else:  # multiscale
            d = cfg.embed_dim
            self._encoder_stack_params()
            self._attention_params("word", d)
            self._attention_params("phrase", d)
            self._register("sentence.query", self.rng.uniform(-EMBED_INIT, EMBED_INIT, (d,)))
            self._attention_params("sentence", d)
            self._glorot("conv.k", 3 * d, d, shape=(d, 3, d))
            self._register("conv.b", np.zeros(d))
            self._linear("fusion", 4 * d, d)
            self._layer_norm_params("fusion.ln", d)
            self._linear("cls.fc", d, d // 2)
            self._linear("cls.out", d // 2, cfg.num_classes)
        self._positions = sinusoidal_positions(cfg.max_len, cfg.embed_dim)

    # -- mode / parameter access ---------------------------------------------------

    def train(self) -> "Model":
        self.training = True
        return self

    def eval(self) -> "Model":
        self.training = False
        return self

    def parameters(self) -> dict[str, ad.Tensor]:
        return self.params

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.params) ^ set(arrays)
        if missing:
            raise ValueError(f"parameter names do not match: {sorted(missing)}")
        for name, p in self.params.items():
            if p.data.shape != arrays[name].shape:
                raise ValueError(f"shape mismatch for {name}: {p.data.shape} vs {arrays[name].shape}")
            p.data = arrays[name].astype(np.float32).copy()

    # -- forward pass ------------------------------------------------------------------

    def forward(self, batch) -> ad.Tensor:
        ids, mask = batch.token_ids, batch.mask
        trace: list[tuple[str, ad.Tensor]] = []
        logits = self._forward(np.where(mask.astype(bool), ids, PAD_ID), mask, trace)
        if not np.isfinite(logits.data).all():
            for name, t in trace:
                if not np.isfinite(t.data).all():
                    raise RuntimeError(f"non-finite values first appeared in layer {name!r}")
            raise RuntimeError("non-finite logits")
        return logits

    def __call__(self, batch) -> ad.Tensor:
        return self.forward(batch)

    def _p(self, name: str) -> ad.Tensor:
        return self.params[name]

    def _dropout(self, x: ad.Tensor, p: float | None = None) -> ad.Tensor:
        cfg_p = self.config.dropout if p is None else p
        return ad.dropout(x, cfg_p, self.rng, train=self.training)

    def _attn(self, name: str, x: ad.Tensor, mask, heads: int) -> ad.Tensor:
        g = self._p
        return ad.multi_head_self_attention(
            x, mask, heads,
            g(f"{name}.wq"), g(f"{name}.wk"), g(f"{name}.wv"), g(f"{name}.wo"),
            g(f"{name}.bq"), g(f"{name}.bk"), g(f"{name}.bv"), g(f"{name}.bo"))

    def _lin(self, name: str, x: ad.Tensor) -> ad.Tensor:
        return ad.linear(x, self._p(f"{name}.w"), self._p(f"{name}.b"))

    def _ln(self, name: str, x: ad.Tensor) -> ad.Tensor:
        return ad.layer_norm(x, self._p(f"{name}.gamma"), self._p(f"{name}.beta"))

    def _embed(self, ids: np.ndarray) -> ad.Tensor:
        return ad.embedding_lookup(self._p("embedding"), ids, pad_id=PAD_ID)

    def _encoder_stack(self, ids, mask, trace) -> ad.Tensor:
        cfg = self.config
        emb = self._embed(ids)
        x = ad.add(emb, ad.tensor(self._positions[: ids.shape[1]]))
        trace.append(("embedding+positions", x))
        for layer in range(cfg.num_layers):
            base = f"encoder.{layer}"
            attn = self._dropout(self._attn(f"{base}.attn", x, mask, cfg.num_heads))
            x = self._ln(f"{base}.ln1", ad.add(x, attn))
            ff = self._lin(f"{base}.ffn2", ad.relu(self._lin(f"{base}.ffn1", x)))
            x = self._ln(f"{base}.ln2", ad.add(x, self._dropout(ff)))
            trace.append((base, x))
        return x

    def _conv_positions_mask(self, mask: np.ndarray, width: int) -> np.ndarray:
        # window p is pooled iff p <= max(n - width, 0); for short sequences the
        # first window survives and simply reads frozen PAD vectors
        lengths = mask.astype(np.int64).sum(axis=1)
        positions = mask.shape[1] - width + 1
        last = np.maximum(lengths - width, 0)
        return (np.arange(positions)[None, :] <= last[:, None]).astype(np.uint8)

    def _forward(self, ids, mask, trace) -> ad.Tensor:
        cfg = self.config
        if cfg.arch == "feedforward":
            emb = self._embed(ids)
            trace.append(("embedding", emb))
            x = ad.max_over_sequence(emb, mask)
            trace.append(("max_pool", x))
            for i in range(1, 4):
                x = self._dropout(ad.relu(self._ln(f"ln{i}", self._lin(f"fc{i}", x))))
                trace.append((f"fc{i}", x))
            logits = self._lin("out", x)
        elif cfg.arch == "cnn":
            emb = self._embed(ids)
            trace.append(("embedding", emb))
            pooled = []
            for w in cfg.kernel_sizes:
                conv = ad.relu(ad.conv1d(emb, self._p(f"conv{w}.k"), self._p(f"conv{w}.b")))
                pooled.append(ad.max_over_sequence(conv, self._conv_positions_mask(mask, w)))
                trace.append((f"conv{w}", pooled[-1]))
            logits = self._lin("out", self._dropout(ad.concat(pooled, axis=-1)))
        elif cfg.arch == "transformer":
            x = self._encoder_stack(ids, mask, trace)
            pooled = ad.max_over_sequence(x, mask)
            trace.append(("max_pool", pooled))
            logits = self._lin("cls.out", ad.relu(self._lin("cls.fc", pooled)))
        else:  # multiscale
            h = self._encoder_stack(ids, mask, trace)
            word = ad.mean_over_sequence(self._attn("word", h, mask, 8), mask)
            trace.append(("word_stream", word))
            chunks, chunk_mask = self._chunk_pool(h, mask)
            phrase = ad.mean_over_sequence(self._attn("phrase", chunks, chunk_mask, 4), chunk_mask)
            trace.append(("phrase_stream", phrase))
            g = self._p
            sentence = ad.attention_pool(
                h, mask, 2, g("sentence.query"),
                g("sentence.wq"), g("sentence.wk"), g("sentence.wv"), g("sentence.wo"),
                g("sentence.bq"), g("sentence.bk"), g("sentence.bv"), g("sentence.bo"))
            trace.append(("sentence_stream", sentence))
            conv = ad.relu(ad.conv1d(h, g("conv.k"), g("conv.b")))
            conv = ad.mean_over_sequence(conv, self._conv_positions_mask(mask, 3))
            trace.append(("conv_stream", conv))
            fused = self._lin("fusion", ad.concat([word, phrase, sentence, conv], axis=-1))
            fused = self._dropout(ad.relu(self._ln("fusion.ln", fused)))
            trace.append(("fusion", fused))
            hidden = self._dropout(ad.relu(self._lin("cls.fc", fused)), p=cfg.classifier_dropout)
            logits = self._lin("cls.out", hidden)
        trace.append(("logits", logits))
        return logits

    def _chunk_pool(self, h: ad.Tensor, mask: np.ndarray):
        """Masked mean over non-overlapping token chunks; chunk kept if any member is real."""
        size = self.config.chunk_size
        batch, length, d = h.shape
        n_chunks = (length + size - 1) // size
        pad = n_chunks * size - length
        m = mask.astype(np.float32)
        if pad:
            h = ad.concat([h, ad.tensor(np.zeros((batch, pad, d), dtype=np.float32))], axis=1)
            m = np.concatenate([m, np.zeros((batch, pad), dtype=np.float32)], axis=1)
        member = m.reshape(batch, n_chunks, size, 1)
        grouped = ad.reshape(h, (batch, n_chunks, size, d))
        summed = ad.sum_axis(ad.mul(grouped, ad.tensor(member)), axis=2)
        counts = np.maximum(member.sum(axis=2), 1.0)  # (batch, n_chunks, 1)
        chunk_vec = ad.mul(summed, ad.tensor(1.0 / counts))
        chunk_mask = (member.sum(axis=(2, 3)) > 0).astype(np.uint8)
        return chunk_vec, chunk_mask


def build_model(config: ModelConfig, seed: int = 0) -> Model:
    return Model(config, seed=seed)


def build_feedforward(config: ModelConfig, seed: int = 0) -> Model:
    if config.arch != "feedforward":
        raise ValueError(f"config.arch is {config.arch!r}, expected 'feedforward'")
    return Model(config, seed=seed)


def build_cnn(config: ModelConfig, seed: int = 0) -> Model:
    if config.arch != "cnn":
        raise ValueError(f"config.arch is {config.arch!r}, expected 'cnn'")
    return Model(config, seed=seed)


def build_transformer(config: ModelConfig, seed: int = 0) -> Model:
    if config.arch != "transformer":
        raise ValueError(f"config.arch is {config.arch!r}, expected 'transformer'")
    return Model(config, seed=seed)


def build_multiscale(config: ModelConfig, seed: int = 0) -> Model:
    if config.arch != "multiscale":
        raise ValueError(f"config.arch is {config.arch!r}, expected 'multiscale'")
    return Model(config, seed=seed)
