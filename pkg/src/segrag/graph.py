"""Temporal-semantic segment graph and graph-attention enhancement.

Edge weights mix a temporal decay exp(-beta*|i-j|) with embedding
cosine, gated by a hop window delta and a cosine threshold tau. The
attention layers aggregate over positive-weight neighborhoods (always
including self) and a residual mixes the enhanced output back with the
local embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# dense adjacency kept alongside the CSR arrays up to this many vertices
_DENSE_MAX = 4096
_COS_BLOCK = 512

_LEAKY_SLOPE = 0.2


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GraphConfig:
    """Adjacency and enhancement parameters.

    ``tau`` may exceed 1 to disable semantic edges entirely (with
    delta=0 that isolates every vertex).
    """

    alpha: float = 0.7
    beta: float = 0.2
    delta: int = 5
    tau: float = 0.8
    residual_weight: float = 1.0
    num_layers: int = 2

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.tau < -1.0:
            raise ValueError(f"tau must be >= -1, got {self.tau}")
        if self.num_layers < 0:
            raise ValueError(f"num_layers must be >= 0, got {self.num_layers}")


@dataclass
class ContextGraph:
    """Symmetric segment graph in CSR form, optionally with a dense view.

    ``indices[indptr[k]:indptr[k+1]]`` are the neighbors of vertex k
    (ascending, self included), with matching edge ``weights``.
    """

    count: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    _dense: np.ndarray | None = field(default=None, repr=False)

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, k: int) -> np.ndarray:
        return self.indices[self.indptr[k]:self.indptr[k + 1]]

    def dense(self) -> np.ndarray:
        if self._dense is None:
            a = np.zeros((self.count, self.count))
            for k in range(self.count):
                lo, hi = self.indptr[k], self.indptr[k + 1]
                a[k, self.indices[lo:hi]] = self.weights[lo:hi]
            self._dense = a
        return self._dense

    @classmethod
    def from_dense(cls, adjacency: np.ndarray) -> "ContextGraph":
        a = np.asarray(adjacency, dtype=float)
        k = a.shape[0]
        indptr = [0]
        indices = []
        weights = []
        for row in a:
            nz = np.nonzero(row)[0]
            indices.append(nz)
            weights.append(row[nz])
            indptr.append(indptr[-1] + len(nz))
        return cls(
            count=k,
            indptr=np.asarray(indptr, dtype=np.int64),
            indices=np.concatenate(indices) if indices else np.zeros(0, np.int64),
            weights=np.concatenate(weights) if weights else np.zeros(0),
            _dense=a,
        )


@dataclass(frozen=True)
class GatWeights:
    """Per-layer transform matrix W (2h x 2h) and attention vector a (4h)."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    seed: int

    @classmethod
    def generate(cls, dim: int, num_layers: int, seed: int) -> "GatWeights":
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(dim) if dim > 0 else 1.0
        layers = tuple(
            (
                rng.uniform(-bound, bound, size=(dim, dim)),
                rng.uniform(-bound, bound, size=2 * dim),
            )
            for _ in range(num_layers)
        )
        return cls(layers=layers, seed=seed)


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; zero rows stay zero."""
    m = np.asarray(matrix, dtype=float)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 1e-12)


def _cosine_block(u: np.ndarray, lo: int, hi: int) -> np.ndarray:
    block = u[lo:hi] @ u.T
    return np.clip(block, -1.0, 1.0)


def _csr_from_rows(k: int, row_iter) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    indptr = np.zeros(k + 1, dtype=np.int64)
    idx_chunks = []
    w_chunks = []
    for i, row in enumerate(row_iter):
        nz = np.nonzero(row > 0.0)[0]
        idx_chunks.append(nz.astype(np.int64))
        w_chunks.append(row[nz])
        indptr[i + 1] = indptr[i] + len(nz)
    indices = np.concatenate(idx_chunks) if idx_chunks else np.zeros(0, np.int64)
    weights = np.concatenate(w_chunks) if w_chunks else np.zeros(0)
    return indptr, indices, weights


def build_adjacency(local_embeddings: np.ndarray, config: GraphConfig) -> ContextGraph:
    """Adjacency per the gated temporal/semantic mix.

    A_ij = alpha*exp(-beta|i-j|) + (1-alpha)*cos(e_i, e_j) whenever
    |i-j| <= delta or cos >= tau, else exactly 0; the diagonal is
    exactly 1. Cosine against a zero embedding is 0.
    """
    e = np.asarray(local_embeddings, dtype=float)
    if e.ndim != 2:
        raise DimensionMismatch(f"embeddings must be 2-d, got shape {e.shape}")
    k = e.shape[0]
    u = unit_rows(e)
    positions = np.arange(k)
    if k <= _DENSE_MAX:
        cos = np.clip(u @ u.T, -1.0, 1.0)
        cos = (cos + cos.T) / 2.0
        hops = np.abs(positions[:, None] - positions[None, :])
        gate = (hops <= config.delta) | (cos >= config.tau)
        dense = config.alpha * np.exp(-config.beta * hops) + (1.0 - config.alpha) * cos
        dense = np.where(gate, dense, 0.0)
        np.fill_diagonal(dense, 1.0)
        indptr, indices, weights = _csr_from_rows(k, iter(dense))
        return ContextGraph(
            count=k, indptr=indptr, indices=indices, weights=weights, _dense=dense
        )

    # large graphs: blockwise rows, CSR only
    def rows():
        for lo in range(0, k, _COS_BLOCK):
            hi = min(lo + _COS_BLOCK, k)
            cos = _cosine_block(u, lo, hi)
            hops = np.abs(positions[lo:hi, None] - positions[None, :])
            gate = (hops <= config.delta) | (cos >= config.tau)
            block = config.alpha * np.exp(-config.beta * hops) + (1.0 - config.alpha) * cos
            block = np.where(gate, block, 0.0)
            block[positions[lo:hi] - lo, positions[lo:hi]] = 1.0
            yield from block

    indptr, indices, weights = _csr_from_rows(k, rows())
    return ContextGraph(count=k, indptr=indptr, indices=indices, weights=weights)


def _leaky_relu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, x, _LEAKY_SLOPE * x)


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def gat_forward(
    embeddings: np.ndarray,
    graph: ContextGraph,
    weights: GatWeights,
    return_attention: bool = False,
):
    """Apply the attention layers over positive-weight neighborhoods.

    Per layer: scores a^T [W e_k || W e_j] through LeakyReLU, softmax
    over N(k), ELU of the attention-weighted aggregate. Zero layers is
    the identity.
    """
    h = np.asarray(embeddings, dtype=float)
    if h.shape[0] != graph.count:
        raise DimensionMismatch(
            f"embeddings rows {h.shape[0]} != graph vertices {graph.count}"
        )
    if graph.count == 0:
        return (h.copy(), []) if return_attention else h.copy()
    dim = h.shape[1]
    starts = graph.indptr[:-1]
    degs = graph.degrees()
    dst = np.repeat(np.arange(graph.count), degs)
    src = graph.indices
    attention = []
    for w, a in weights.layers:
        if w.shape != (dim, dim) or a.shape != (2 * dim,):
            raise DimensionMismatch(
                f"layer weights {w.shape}/{a.shape} do not match embedding dim {dim}"
            )
        t = h @ w.T
        dst_part = t @ a[:dim]
        src_part = t @ a[dim:]
        scores = _leaky_relu(dst_part[dst] + src_part[src])
        # segment softmax; every vertex has at least its self-loop
        seg_max = np.maximum.reduceat(scores, starts)
        ex = np.exp(scores - np.repeat(seg_max, degs))
        seg_sum = np.add.reduceat(ex, starts)
        gamma = ex / np.repeat(seg_sum, degs)
        h = _elu(np.add.reduceat(gamma[:, None] * t[src], starts, axis=0))
        if return_attention:
            attention.append(gamma)
    return (h, attention) if return_attention else h


def enhance(
    local_embeddings: np.ndarray,
    graph: ContextGraph,
    weights: GatWeights,
    residual_weight: float,
) -> np.ndarray:
    """Enhanced embeddings: GAT output plus the weighted local residual."""
    local = np.asarray(local_embeddings, dtype=float)
    return gat_forward(local, graph, weights) + residual_weight * local
