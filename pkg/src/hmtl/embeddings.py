"""Word representations: pretrained-style word table, character CNN and a
pluggable contextual embedder.

The per-token representation is the concatenation of the enabled parts
(word vector, char CNN features, contextual vector).  The default
contextual embedder is a frozen deterministic hash stub; a file-backed
embedder can supply real precomputed vectors keyed by (doc_id, token index)
using the cache format ``doc_id<TAB>token_index<TAB>v1 v2 ... v_dx``.
"""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from hmtl.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

PAD, UNK = "<pad>", "<unk>"


class WordTable(nn.Module):
    """Token -> row lookup with reserved PAD/UNK rows.

    Lookup tries the token as-is, then lowercased, then falls back to UNK.
    """

    def __init__(self, vocab: dict[str, int], weight: torch.Tensor, trainable: bool = True):
        super().__init__()
        if vocab.get(PAD) != 0 or vocab.get(UNK) != 1:
            raise ConfigError("word vocabulary must reserve <pad>=0 and <unk>=1")
        if weight.shape[0] != len(vocab):
            raise ConfigError("word table weight rows must match vocabulary size")
        if not torch.isfinite(weight).all():
            raise ConfigError("word table contains non-finite rows")
        self.vocab = dict(vocab)
        self.weight = nn.Parameter(weight.clone(), requires_grad=trainable)

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    def lookup(self, token: str) -> int:
        idx = self.vocab.get(token)
        if idx is None:
            idx = self.vocab.get(token.lower())
        return idx if idx is not None else self.vocab[UNK]

    def forward(self, tokens: list[str]) -> torch.Tensor:
        idx = torch.tensor([self.lookup(t) for t in tokens], dtype=torch.long)
        return self.weight[idx]

    @classmethod
    def from_corpus(cls, tokens, dim: int, seed: int, trainable: bool = True) -> "WordTable":
        """Build a randomly initialized table over the corpus vocabulary."""
        vocab = {PAD: 0, UNK: 1}
        for tok in sorted(set(tokens)):
            vocab.setdefault(tok, len(vocab))
        rng = np.random.default_rng(seed)
        weight = rng.normal(0.0, 0.1, size=(len(vocab), dim))
        weight[0] = 0.0
        return cls(vocab, torch.tensor(weight, dtype=torch.float32), trainable)


def load_word_vectors(path: str | Path, expected_dim: int, trainable: bool = True) -> WordTable:
    """Load a text word-vector file: one 'token v1 ... v_d' record per line.

    The UNK row is the mean of the loaded vectors; PAD is zeros.
    """
    path = Path(path)
    vocab = {PAD: 0, UNK: 1}
    rows: list[np.ndarray] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split()
            token, values = parts[0], parts[1:]
            if len(values) != expected_dim:
                raise DataError(
                    f"{path}:{lineno}: expected {expected_dim} values, got {len(values)}"
                )
            if token in vocab:
                raise DataError(f"{path}:{lineno}: duplicate token {token!r}")
            vocab[token] = len(vocab)
            try:
                rows.append(np.asarray([float(v) for v in values], dtype=np.float64))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric value") from exc
    weight = np.zeros((len(vocab), expected_dim), dtype=np.float64)
    if rows:
        weight[2:] = np.stack(rows)
        weight[1] = weight[2:].mean(axis=0)
    else:
        logger.warning("%s: empty word-vector file, UNK initialized to zeros", path)
    return WordTable(vocab, torch.tensor(weight, dtype=torch.float32), trainable)


class CharCnn(nn.Module):
    """Character-level word features: embeddings, 1-d convolutions, max pool.

    Words are padded to the maximum filter width with the PAD character;
    every output coordinate is the max over valid convolution positions of
    (filter . window + bias).
    """

    def __init__(
        self,
        char_vocab: dict[str, int],
        char_dim: int = 16,
        filter_widths: tuple[int, ...] = (2, 3),
        filters_per_width: int = 25,
    ):
        super().__init__()
        if char_vocab.get(PAD) != 0 or char_vocab.get(UNK) != 1:
            raise ConfigError("char vocabulary must reserve <pad>=0 and <unk>=1")
        if not filter_widths:
            raise ConfigError("char CNN needs at least one filter width")
        self.char_vocab = dict(char_vocab)
        self.filter_widths = tuple(filter_widths)
        self.filters_per_width = filters_per_width
        self.char_emb = nn.Parameter(torch.empty(len(char_vocab), char_dim))
        self.filters = nn.ParameterDict()
        for w in self.filter_widths:
            self.filters[f"w{w}"] = nn.Parameter(torch.empty(filters_per_width, w * char_dim))
            self.filters[f"b{w}"] = nn.Parameter(torch.zeros(filters_per_width))
        nn.init.normal_(self.char_emb, std=0.1)
        for w in self.filter_widths:
            nn.init.normal_(self.filters[f"w{w}"], std=0.1)

    @property
    def char_dim(self) -> int:
        return self.char_emb.shape[1]

    @property
    def output_dim(self) -> int:
        return self.filters_per_width * len(self.filter_widths)

    @classmethod
    def from_corpus(cls, tokens, **kwargs) -> "CharCnn":
        vocab = {PAD: 0, UNK: 1}
        for ch in sorted({c for tok in tokens for c in tok}):
            vocab.setdefault(ch, len(vocab))
        return cls(vocab, **kwargs)

    def _indices(self, word: str, padded_len: int) -> list[int]:
        idx = [self.char_vocab.get(c, 1) for c in word]
        return idx + [0] * (padded_len - len(idx))

    def forward(self, words: list[str]) -> torch.Tensor:
        """Features for a sentence of words, shape (n, output_dim)."""
        if any(len(w) == 0 for w in words):
            raise ValueError("cannot featurize an empty word")
        max_w = max(self.filter_widths)
        padded = [max(len(w), max_w) for w in words]
        length = max(padded)
        idx = torch.tensor([self._indices(w, length) for w in words], dtype=torch.long)
        emb = self.char_emb[idx]  # (n, length, char_dim)
        outs = []
        for w in self.filter_widths:
            windows = emb.unfold(1, w, 1)  # (n, positions, char_dim, w)
            n, pos = windows.shape[0], windows.shape[1]
            flat = windows.permute(0, 1, 3, 2).reshape(n, pos, w * self.char_dim)
            scores = torch.einsum("npk,fk->npf", flat, self.filters[f"w{w}"])
            scores = scores + self.filters[f"b{w}"]
            valid = torch.tensor([p - w + 1 for p in padded]).unsqueeze(1)  # (n, 1)
            mask = torch.arange(pos).unsqueeze(0) >= valid
            scores = scores.masked_fill(mask.unsqueeze(2), float("-inf"))
            outs.append(scores.max(dim=1).values)
        return torch.cat(outs, dim=1)

    def char_features(self, word: str) -> torch.Tensor:
        """Feature vector for one word, shape (output_dim,)."""
        return self.forward([word])[0]


class ContextualEmbedder:
    """Interface: whole sentence of tokens -> per-token vectors of fixed dim."""

    dim: int

    def embed(self, tokens: list[str], doc_id: str | None = None, offset: int = 0) -> torch.Tensor:
        raise NotImplementedError


class HashContextualEmbedder(ContextualEmbedder):
    """Frozen deterministic stand-in for a pretrained contextual embedder.

    Each vector is a fixed-seed hash of (token, position, sentence length)
    mapped to reals in [-1, 1]; identical inputs give identical outputs.
    """

    def __init__(self, dim: int = 16, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[tuple[str, int, int], np.ndarray] = {}

    def _vector(self, token: str, position: int, n: int) -> np.ndarray:
        key = (token, position, n)
        vec = self._cache.get(key)
        if vec is None:
            material = f"{self.seed}|{token}|{position}|{n}".encode("utf-8")
            digest = hashlib.blake2b(material, digest_size=16).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            vec = rng.uniform(-1.0, 1.0, size=self.dim)
            self._cache[key] = vec
        return vec

    def embed(self, tokens: list[str], doc_id: str | None = None, offset: int = 0) -> torch.Tensor:
        n = len(tokens)
        rows = np.stack([self._vector(t, i, n) for i, t in enumerate(tokens)])
        return torch.tensor(rows, dtype=torch.float32)


class FileContextualEmbedder(ContextualEmbedder):
    """Precomputed per-token vectors keyed by (doc_id, document token index)."""

    def __init__(self, path: str | Path, dim: int):
        self.dim = dim
        self.path = Path(path)
        self._table: dict[tuple[str, int], np.ndarray] = {}
        with self.path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise DataError(f"{self.path}:{lineno}: expected 3 tab-separated fields")
                doc_id, tok_idx, values = parts
                vec = np.asarray([float(v) for v in values.split()], dtype=np.float64)
                if vec.shape[0] != dim:
                    raise DataError(f"{self.path}:{lineno}: expected {dim} values")
                self._table[(doc_id, int(tok_idx))] = vec

    def embed(self, tokens: list[str], doc_id: str | None = None, offset: int = 0) -> torch.Tensor:
        rows = []
        for i in range(len(tokens)):
            key = (doc_id, offset + i)
            if key not in self._table:
                raise DataError(f"{self.path}: no contextual vector for {key}")
            rows.append(self._table[key])
        return torch.tensor(np.stack(rows), dtype=torch.float32)


def write_context_cache(path: str | Path, entries: dict[tuple[str, int], np.ndarray]) -> None:
    """Write a contextual-vector cache file (inverse of FileContextualEmbedder)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for (doc_id, tok_idx), vec in entries.items():
            vals = " ".join(repr(float(v)) for v in vec)
            fh.write(f"{doc_id}\t{tok_idx}\t{vals}\n")


class Embedder(nn.Module):
    """Concatenation of the enabled per-token representation parts."""

    def __init__(
        self,
        word_table: WordTable | None,
        char_cnn: CharCnn | None,
        contextual: ContextualEmbedder | None,
    ):
        super().__init__()
        if word_table is None and char_cnn is None and contextual is None:
            raise ConfigError("at least one embedding component must be enabled")
        self.word_table = word_table
        self.char_cnn = char_cnn
        self.contextual = contextual

    @property
    def dim(self) -> int:
        total = 0
        if self.word_table is not None:
            total += self.word_table.dim
        if self.char_cnn is not None:
            total += self.char_cnn.output_dim
        if self.contextual is not None:
            total += self.contextual.dim
        return total

    def embed_sentence(
        self, tokens: list[str], doc_id: str | None = None, offset: int = 0
    ) -> torch.Tensor:
        """Per-token representation matrix, shape (n, dim)."""
        if not tokens:
            raise ValueError("cannot embed an empty sentence")
        parts = []
        if self.word_table is not None:
            parts.append(self.word_table(tokens))
        if self.char_cnn is not None:
            parts.append(self.char_cnn(tokens))
        if self.contextual is not None:
            vec = self.contextual.embed(tokens, doc_id=doc_id, offset=offset)
            params = next(self.parameters(), None)
            if params is not None:
                vec = vec.to(params.dtype)
            parts.append(vec)
        return torch.cat(parts, dim=1)

    def forward(self, tokens: list[str], doc_id: str | None = None, offset: int = 0) -> torch.Tensor:
        return self.embed_sentence(tokens, doc_id=doc_id, offset=offset)
