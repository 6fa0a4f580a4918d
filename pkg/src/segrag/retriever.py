"""Query-time scoring, diversification, and greedy segment selection.

Relevance is a temperature softmax over cosine-with-novelty scores. A
determinantal kernel built from the relevance distribution and pairwise
cosines enforces diversity through log-determinant gains; a Markov
bonus nudges selection toward temporal neighbors of the previous pick;
a KL guard anneals the temperature until the distribution stays within
a divergence budget of the uniform prior. One greedy loop maximizes the
combined marginal gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .embedder import EncoderWeights, encode_query
from .graph import ContextGraph, unit_rows
from .segmenter import SegmentSet

if TYPE_CHECKING:
    from .config import PipelineConfig

FORMAT_VERSION = "1"

_PIVOT_FLOOR = 1e-12
_ANNEAL_FACTOR = 1.5
_MAX_ANNEALS = 64


class EmptyIndex(ValueError):
    pass


class VersionMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class RetrievalConfig:
    """Selection hyperparameters.

    ``temperature_rho`` is the softmax temperature (distinct from the
    segmenter's information density, which shares the paper's symbol).
    """

    temperature_rho: float = 0.1
    eta: float = 0.5
    omega: float = 0.8
    mu: float = 0.4
    nu: float = 0.6
    xi: float = 0.3
    top_m: int = 8
    epsilon_kl: float = 1.0
    psd_ridge: float = 1e-10

    def __post_init__(self):
        if not self.temperature_rho > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature_rho}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must be in [0,1], got {self.mu}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must be in [0,1], got {self.omega}")
        if self.top_m < 1:
            raise ValueError(f"top_m must be >= 1, got {self.top_m}")
        if not self.epsilon_kl > 0:
            raise ValueError(f"epsilon_kl must be positive, got {self.epsilon_kl}")


@dataclass(frozen=True)
class SegmentIndex:
    """Immutable retrieval store: segments, embeddings, graph, config."""

    segments: SegmentSet
    local: np.ndarray
    enhanced: np.ndarray
    graph: ContextGraph
    config: "PipelineConfig"
    format_version: str = FORMAT_VERSION

    @property
    def count(self) -> int:
        return self.segments.count


@dataclass(frozen=True)
class RetrievalResult:
    """Greedy selection trace.

    ``selected`` pairs each chosen segment index with its marginal gain
    at pick time (selection order); ``step_probabilities`` snapshots the
    Markov-adjusted distribution of every step.
    """

    selected: tuple[tuple[int, float], ...]
    step_probabilities: tuple[np.ndarray, ...]
    logdet: float
    kl_value: float
    temperature_used: float

    @property
    def indices(self) -> list[int]:
        return [k for k, _ in self.selected]


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def _query_cosines(enhanced_units: np.ndarray, query_embedding: np.ndarray) -> np.ndarray:
    q = np.asarray(query_embedding, dtype=float)
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        return np.zeros(enhanced_units.shape[0])
    return np.clip(enhanced_units @ (q / norm), -1.0, 1.0)


def _enhanced_matrix(index) -> np.ndarray:
    if isinstance(index, SegmentIndex):
        return index.enhanced
    return np.asarray(index, dtype=float)


def relevance_distribution(
    index: "SegmentIndex | np.ndarray",
    query_embedding: np.ndarray,
    selected: Sequence[int],
    config: RetrievalConfig,
) -> np.ndarray:
    """Softmax over cosine relevance boosted by novelty.

    Novelty of a candidate is 1 minus its maximum cosine to the already
    selected segments (1 when nothing is selected yet). All segments
    receive probability mass; selected ones are only excluded when a
    pick is made.
    """
    units = unit_rows(_enhanced_matrix(index))
    qcos = _query_cosines(units, query_embedding)
    if len(selected):
        sel = units[np.fromiter(selected, dtype=int)]
        novelty = 1.0 - np.max(units @ sel.T, axis=1)
    else:
        novelty = np.ones(units.shape[0])
    phi = qcos * (1.0 + config.eta * novelty)
    return _softmax(phi / config.temperature_rho)


def _psd_factor(
    probabilities: np.ndarray, embedding_units: np.ndarray, omega: float
) -> tuple[np.ndarray, bool]:
    """Low-rank factor F with F F^T = PSD projection of the raw kernel.

    The raw kernel P_i P_j (1 - omega cos_ij) equals B M B^T with
    B = [P, sqrt(omega) * diag(P) U] and M = diag(1, -I), so its
    nonzero spectrum lives in a (1+dim)-dimensional space and the
    eigenvalue clipping can be done there at any K. The flag reports
    whether clipping changed an eigenvalue by more than 1e-9.
    """
    p = np.asarray(probabilities, dtype=float)
    b = np.concatenate(
        [p[:, None], math.sqrt(omega) * (p[:, None] * embedding_units)], axis=1
    )
    r0 = b.shape[1]
    signs = np.concatenate([[1.0], -np.ones(r0 - 1)])
    s = b.T @ b
    s_vals, s_vecs = np.linalg.eigh((s + s.T) / 2.0)
    s_vals = np.maximum(s_vals, 0.0)
    root = np.sqrt(s_vals)[:, None] * s_vecs.T  # R with R^T R = S
    t = (root * signs[None, :]) @ root.T
    lam, w = np.linalg.eigh((t + t.T) / 2.0)
    changed = bool((lam < -1e-9).any())
    pos = lam > 0.0
    if not pos.any():
        return np.zeros((len(p), 0)), changed
    # eigenvectors of the full kernel: v = B M R^T w, with ||v|| = lam
    v = b @ (signs[:, None] * (root.T @ w[:, pos]))
    norms = np.linalg.norm(v, axis=0)
    keep = norms > 1e-300
    v = v[:, keep]
    lam_pos = lam[pos][keep]
    # scale columns so that F F^T = sum lam * vhat vhat^T
    return v * (np.sqrt(lam_pos) / norms)[None, :], changed


def dpp_kernel(
    probabilities: np.ndarray, embeddings: np.ndarray, config: RetrievalConfig
) -> tuple[np.ndarray, bool]:
    """PSD-repaired determinantal kernel, plus a repair flag.

    The raw entries P_i P_j (1 - omega cos(e_i, e_j)) are not positive
    semidefinite in general; negative eigenvalues are clipped at 0 and
    a small ridge is added to the diagonal.
    """
    units = unit_rows(np.asarray(embeddings, dtype=float))
    factor, changed = _psd_factor(np.asarray(probabilities, dtype=float), units, config.omega)
    kernel = factor @ factor.T
    kernel[np.diag_indices_from(kernel)] += config.psd_ridge
    return kernel, changed


def markov_adjusted(
    probabilities: np.ndarray,
    last_selected: int | None,
    query_cos: np.ndarray,
    config: RetrievalConfig,
) -> np.ndarray:
    """Blend in a bonus for temporal neighbors of the last pick.

    P'(k) = (1-mu) P(k) + mu * [|k - last| = 1] * cos(e_k, e_q), then
    renormalized. The cosine bonus is floored at 0 so the result stays
    a distribution; with no previous pick P is returned unchanged.
    """
    p = np.asarray(probabilities, dtype=float)
    if last_selected is None or config.mu == 0.0:
        return p.copy()
    adjusted = (1.0 - config.mu) * p
    for j in (last_selected - 1, last_selected + 1):
        if 0 <= j < len(p):
            adjusted[j] += config.mu * max(query_cos[j], 0.0)
    total = adjusted.sum()
    if total <= 0.0:
        return p.copy()
    return adjusted / total


def kl_guard(
    probabilities: np.ndarray, config: RetrievalConfig
) -> tuple[np.ndarray, float, float]:
    """Anneal temperature until KL(uniform || P) <= epsilon_kl (bits).

    Raising the temperature by a factor f maps the softmax distribution
    to the renormalized power P^(1/f), which is how the adjustment is
    applied here without access to the raw scores. Returns the adjusted
    distribution, the absolute temperature used, and the final KL.
    """
    base = np.maximum(np.asarray(probabilities, dtype=float), 1e-300)
    base = base / base.sum()
    k = len(base)
    uniform = 1.0 / k

    def kl_bits(p: np.ndarray) -> float:
        return float(np.sum(uniform * (np.log2(uniform) - np.log2(p))))

    current = base
    multiplier = 1.0
    value = kl_bits(current)
    anneals = 0
    while value > config.epsilon_kl and anneals < _MAX_ANNEALS:
        multiplier *= _ANNEAL_FACTOR
        current = base ** (1.0 / multiplier)
        current = current / current.sum()
        value = kl_bits(current)
        anneals += 1
    if value > config.epsilon_kl:
        # unreachable for floored inputs; kept as a hard guarantee
        current = np.full(k, uniform)
        value = 0.0
    return current, config.temperature_rho * multiplier, value


class _DppState:
    """Incremental Cholesky over a kernel exposed by rows.

    Tracks, for every candidate, the conditional variance d_k of the
    kernel given the current selection; the log-determinant gain of
    adding k is log d_k. Mirrors the fast greedy MAP recurrence.
    """

    def __init__(self, diag: np.ndarray, row_fn, max_steps: int):
        self.dvals = np.asarray(diag, dtype=float).copy()
        self.row_fn = row_fn
        self.cis = np.zeros((max_steps, len(self.dvals)))
        self.steps = 0

    def gains(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(
                self.dvals > _PIVOT_FLOOR, np.log(np.maximum(self.dvals, 1e-300)), -np.inf
            )

    def add(self, k: int) -> float:
        d_k = self.dvals[k]
        if not d_k > _PIVOT_FLOOR:
            raise ValueError("cannot extend a degenerate selection")
        t = self.steps
        row = self.row_fn(k)
        eis = (row - self.cis[:t, k] @ self.cis[:t]) / math.sqrt(d_k)
        self.cis[t] = eis
        self.dvals -= eis**2
        self.steps = t + 1
        return math.log(d_k)


def greedy_map_kernel(kernel: np.ndarray, m: int) -> tuple[list[int], float]:
    """Greedy MAP over a PSD kernel alone: maximize logdet step by step.

    Once every remaining candidate would make the selected submatrix
    numerically singular, selection continues by conditional variance
    and the total log-determinant is -inf. Ties break to the smallest
    index.
    """
    k_mat = np.asarray(kernel, dtype=float)
    n = k_mat.shape[0]
    budget = min(m, n)
    state = _DppState(np.diag(k_mat), lambda j: k_mat[j], budget)
    picked: list[int] = []
    mask = np.zeros(n, dtype=bool)
    logdet = 0.0
    for _ in range(budget):
        gains = state.gains()
        gains[mask] = -np.inf
        choice = int(np.argmax(gains))
        if not np.isfinite(gains[choice]):
            logdet = -np.inf
            remaining = np.where(~mask, state.dvals, -np.inf)
            choice = int(np.argmax(remaining))
        else:
            logdet += state.add(choice)
        picked.append(choice)
        mask[choice] = True
    return picked, logdet


def greedy_select(
    index: SegmentIndex, query_embedding: np.ndarray, config: RetrievalConfig
) -> RetrievalResult:
    """Select min(top_m, K) segments by combined marginal gain.

    Each step recomputes the novelty-aware relevance at the annealed
    temperature (fixed once by the KL guard on the selection-free
    distribution), applies the Markov adjustment, and picks the
    unselected segment maximizing

        P(k) + nu * logdet-gain(k) + xi * P_markov(k).

    The determinantal kernel is built once from the guarded initial
    distribution and never changes during the loop.
    """
    k_total = index.count
    if k_total == 0:
        raise EmptyIndex("index holds no segments")
    units = unit_rows(index.enhanced)
    qcos = _query_cosines(units, query_embedding)
    budget = min(config.top_m, k_total)

    initial = _softmax(qcos * (1.0 + config.eta) / config.temperature_rho)
    guarded, temperature, kl_value = kl_guard(initial, config)

    factor, _ = _psd_factor(guarded, units, config.omega)
    diag = (factor * factor).sum(axis=1) + config.psd_ridge

    def kernel_row(j: int) -> np.ndarray:
        row = factor @ factor[j]
        row[j] += config.psd_ridge
        return row

    state = _DppState(diag, kernel_row, budget)
    mask = np.zeros(k_total, dtype=bool)
    novelty_cos = None
    last: int | None = None
    picks: list[tuple[int, float]] = []
    step_probs: list[np.ndarray] = []
    logdet = 0.0
    degenerate = False
    for step in range(budget):
        if step == 0:
            p = guarded
        else:
            novelty = 1.0 - novelty_cos
            p = _softmax(qcos * (1.0 + config.eta * novelty) / temperature)
        p_markov = markov_adjusted(p, last, qcos, config)
        if degenerate:
            gains = p + config.xi * p_markov
            gains[mask] = -np.inf
            choice = int(np.argmax(gains))
            score = float(gains[choice])
        else:
            det_gain = state.gains()
            gains = p + config.nu * det_gain + config.xi * p_markov
            gains[mask] = -np.inf
            choice = int(np.argmax(gains))
            if not np.isfinite(gains[choice]):
                degenerate = True
                logdet = -np.inf
                fallback = p + config.xi * p_markov
                fallback[mask] = -np.inf
                choice = int(np.argmax(fallback))
                score = float(fallback[choice])
            else:
                logdet += state.add(choice)
                score = float(gains[choice])
        picks.append((choice, score))
        step_probs.append(p_markov)
        mask[choice] = True
        last = choice
        chosen_cos = np.clip(units @ units[choice], -1.0, 1.0)
        novelty_cos = (
            chosen_cos if novelty_cos is None else np.maximum(novelty_cos, chosen_cos)
        )
    return RetrievalResult(
        selected=tuple(picks),
        step_probabilities=tuple(step_probs),
        logdet=logdet,
        kl_value=kl_value,
        temperature_used=temperature,
    )


def retrieve(
    index: SegmentIndex,
    query: str,
    encoder: EncoderWeights | None = None,
    config: RetrievalConfig | None = None,
) -> RetrievalResult:
    """Encode the query and run the greedy selection against the index.

    The encoder defaults to the deterministic weights recorded in the
    index config; explicit weights must match the indexed dimensions.
    """
    if index.format_version != FORMAT_VERSION:
        raise VersionMismatch(
            f"index format {index.format_version!r} != supported {FORMAT_VERSION!r}"
        )
    pipeline_cfg = index.config
    if encoder is None:
        encoder = EncoderWeights.generate(
            pipeline_cfg.token_dim, pipeline_cfg.hidden_dim, pipeline_cfg.seed
        )
    if encoder.d != pipeline_cfg.token_dim or encoder.h != pipeline_cfg.hidden_dim:
        raise VersionMismatch(
            f"encoder dims ({encoder.d}, {encoder.h}) do not match index "
            f"({pipeline_cfg.token_dim}, {pipeline_cfg.hidden_dim})"
        )
    if config is None:
        config = pipeline_cfg.retrieval()
    query_embedding = encode_query(query, encoder, pipeline_cfg.theta_q)
    return greedy_select(index, query_embedding, config)
