"""Local segment embeddings and sparse-attention query embeddings.

Tokens are feature-hashed into d-dimensional unit vectors, run through
a bidirectional gated recurrent pass, and pooled with additive
attention. Queries use the same encoder but a thresholded (sparse)
attention that keeps only high-scoring tokens. All weights are forward
pass only: loaded from a file or regenerated deterministically from a
seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import tokenize
from .segmenter import Segment, segment_token_text

WEIGHTS_FORMAT_VERSION = "1"

_HASH_PROBES = 4


class DimensionMismatch(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class EmptyQuery(ValueError):
    pass


@dataclass(frozen=True)
class EncoderWeights:
    """Parameters of the recurrent encoder and both attention heads.

    Each direction is a single-gate recurrent cell (update gate +
    candidate), the minimal cell with true sequential dependence. The
    attention projection is square (a = h).
    """

    d: int
    h: int
    seed: int
    # forward cell
    w_zf: np.ndarray
    u_zf: np.ndarray
    b_zf: np.ndarray
    w_cf: np.ndarray
    u_cf: np.ndarray
    b_cf: np.ndarray
    # backward cell
    w_zb: np.ndarray
    u_zb: np.ndarray
    b_zb: np.ndarray
    w_cb: np.ndarray
    u_cb: np.ndarray
    b_cb: np.ndarray
    # segment-side attention
    att_w: np.ndarray
    att_b: np.ndarray
    att_v: np.ndarray
    # query-side attention
    q_w: np.ndarray
    q_b: np.ndarray
    q_v: np.ndarray

    _ARRAY_FIELDS = (
        "w_zf", "u_zf", "b_zf", "w_cf", "u_cf", "b_cf",
        "w_zb", "u_zb", "b_zb", "w_cb", "u_cb", "b_cb",
        "att_w", "att_b", "att_v", "q_w", "q_b", "q_v",
    )

    @classmethod
    def generate(cls, d: int, h: int, seed: int) -> "EncoderWeights":
        """Deterministic uniform(-1/sqrt(h), 1/sqrt(h)) initialization."""
        if d <= 0 or h <= 0:
            raise DimensionMismatch(f"dims must be positive, got d={d}, h={h}")
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(h)

        def u(*shape):
            return rng.uniform(-bound, bound, size=shape)

        arrays = {}
        for prefix in ("f", "b"):
            arrays[f"w_z{prefix}"] = u(h, d)
            arrays[f"u_z{prefix}"] = u(h, h)
            arrays[f"b_z{prefix}"] = u(h)
            arrays[f"w_c{prefix}"] = u(h, d)
            arrays[f"u_c{prefix}"] = u(h, h)
            arrays[f"b_c{prefix}"] = u(h)
        for prefix in ("att", "q"):
            arrays[f"{prefix}_w"] = u(h, 2 * h)
            arrays[f"{prefix}_b"] = u(h)
            arrays[f"{prefix}_v"] = u(h)
        return cls(d=d, h=h, seed=seed, **arrays)

    def save(self, path: str | Path) -> None:
        """Write a versioned npz container with named arrays."""
        payload = {name: getattr(self, name) for name in self._ARRAY_FIELDS}
        np.savez(
            path,
            format_version=np.array(WEIGHTS_FORMAT_VERSION),
            d=np.array(self.d),
            h=np.array(self.h),
            seed=np.array(self.seed),
            **payload,
        )

    @classmethod
    def load(cls, path: str | Path) -> "EncoderWeights":
        with np.load(path) as data:
            version = str(data["format_version"])
            if version != WEIGHTS_FORMAT_VERSION:
                raise ValueError(f"unsupported weight file version {version!r}")
            arrays = {name: data[name] for name in cls._ARRAY_FIELDS}
            return cls(
                d=int(data["d"]), h=int(data["h"]), seed=int(data["seed"]), **arrays
            )


def _token_hash(token: str, seed: int, probe: int) -> int:
    payload = f"{seed}:{probe}:".encode() + token.encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def embed_tokens(tokens: Sequence[str], d: int, seed: int) -> np.ndarray:
    """Feature-hashing token vectors, one L2-normalized row per token."""
    if d <= 0:
        raise DimensionMismatch(f"token dimension must be positive, got {d}")
    out = np.zeros((len(tokens), d))
    cache: dict[str, np.ndarray] = {}
    for i, tok in enumerate(tokens):
        vec = cache.get(tok)
        if vec is None:
            vec = np.zeros(d)
            for probe in range(_HASH_PROBES):
                hv = _token_hash(tok, seed, probe)
                sign = 1.0 if (hv >> 40) & 1 else -1.0
                vec[hv % d] += sign
            norm = np.linalg.norm(vec)
            if norm < 1e-12:
                # probes cancelled; fall back to a deterministic unit basis vector
                vec = np.zeros(d)
                vec[_token_hash(tok, seed, 0) % d] = 1.0
            else:
                vec = vec / norm
            cache[tok] = vec
        out[i] = vec
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _direction_pass(
    x_z: np.ndarray, x_c: np.ndarray, u_z: np.ndarray, u_c: np.ndarray, h_dim: int
) -> np.ndarray:
    n = x_z.shape[0]
    states = np.empty((n, h_dim))
    h = np.zeros(h_dim)
    for i in range(n):
        z = _sigmoid(x_z[i] + u_z @ h)
        c = np.tanh(x_c[i] + u_c @ h)
        h = (1.0 - z) * h + z * c
        states[i] = h
    return states


def encode_sequence(token_vectors: np.ndarray, weights: EncoderWeights) -> np.ndarray:
    """Bidirectional recurrent states, (n, 2h): forward then backward half.

    States start at zero and stay in [-1, 1] (convex updates toward a
    tanh candidate).
    """
    x = np.asarray(token_vectors, dtype=float)
    if x.ndim != 2 or x.shape[1] != weights.d:
        raise DimensionMismatch(
            f"token vectors must be (n, {weights.d}), got {x.shape}"
        )
    n = x.shape[0]
    if n == 0:
        return np.zeros((0, 2 * weights.h))
    fwd = _direction_pass(
        x @ weights.w_zf.T + weights.b_zf,
        x @ weights.w_cf.T + weights.b_cf,
        weights.u_zf,
        weights.u_cf,
        weights.h,
    )
    rev = x[::-1]
    bwd = _direction_pass(
        rev @ weights.w_zb.T + weights.b_zb,
        rev @ weights.w_cb.T + weights.b_cb,
        weights.u_zb,
        weights.u_cb,
        weights.h,
    )[::-1]
    return np.concatenate([fwd, bwd], axis=1)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def attention_weights(hidden_states: np.ndarray, weights: EncoderWeights) -> np.ndarray:
    """Dense additive-attention weights; non-negative, sum to 1."""
    h = np.asarray(hidden_states, dtype=float)
    if h.shape[0] == 0:
        raise EmptySequence("cannot attend over an empty sequence")
    scores = np.tanh(h @ weights.att_w.T + weights.att_b) @ weights.att_v
    return _softmax(scores)


def attention_pool(hidden_states: np.ndarray, weights: EncoderWeights) -> np.ndarray:
    """Attention-weighted sum of hidden states (the local embedding)."""
    a = attention_weights(hidden_states, weights)
    return a @ np.asarray(hidden_states, dtype=float)


def sparse_attention_weights(
    hidden_states: np.ndarray, weights: EncoderWeights, theta_q: float
) -> np.ndarray:
    """Thresholded attention: scores <= theta_q are masked out.

    When every score is masked the single top-scoring position gets
    weight 1, so the weights always form a distribution.
    """
    h = np.asarray(hidden_states, dtype=float)
    if h.shape[0] == 0:
        raise EmptySequence("cannot attend over an empty sequence")
    scores = np.tanh(h @ weights.q_w.T + weights.q_b) @ weights.q_v
    keep = scores > theta_q
    out = np.zeros(len(scores))
    if not keep.any():
        out[int(np.argmax(scores))] = 1.0
        return out
    out[keep] = _softmax(scores[keep])
    return out


def encode_query(query: str, weights: EncoderWeights, theta_q: float) -> np.ndarray:
    """Embed a query with sparse attention over its encoded tokens."""
    tokens = tokenize(query)
    if not tokens:
        raise EmptyQuery("query has no tokens")
    hidden = encode_sequence(embed_tokens(tokens, weights.d, weights.seed), weights)
    a = sparse_attention_weights(hidden, weights, theta_q)
    return a @ hidden


def embed_text(text: str, weights: EncoderWeights) -> np.ndarray:
    """Local embedding of free text; empty text maps to the zero vector."""
    tokens = tokenize(text)
    if not tokens:
        return np.zeros(2 * weights.h)
    hidden = encode_sequence(embed_tokens(tokens, weights.d, weights.seed), weights)
    return attention_pool(hidden, weights)


def embed_segments(segments: Sequence[Segment], weights: EncoderWeights) -> np.ndarray:
    """Stack of local embeddings, one row per segment."""
    out = np.zeros((len(segments), 2 * weights.h))
    for i, seg in enumerate(segments):
        out[i] = embed_text(segment_token_text(seg), weights)
    return out
