"""Brute-force reference implementations for the property-test suite.

These are exponential by design and bounded to desk scale; they exist
to check the optimized paths and the theorem-level claims, never to run
in the pipeline.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .corpus import tokenize
from .dedup import SENTINEL, entropy_of_tokens

_MAX_LCS_LEN = 12
_MAX_KERNEL_K = 12
_MAX_KERNEL_M = 4
_MAX_UNIVERSE = 20
_MAX_CANDIDATES = 12


class SizeExceeded(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


def lcs_reference(a: Sequence[str], b: Sequence[str]) -> int:
    """Exhaustive LCS length: try subsequences of ``a`` longest first."""
    if len(a) > _MAX_LCS_LEN or len(b) > _MAX_LCS_LEN:
        raise SizeExceeded(f"sequences longer than {_MAX_LCS_LEN} are out of bounds")

    def is_subsequence(sub: tuple, seq: Sequence[str]) -> bool:
        it = iter(seq)
        return all(tok in it for tok in sub)

    upper = min(len(a), len(b))
    for length in range(upper, 0, -1):
        for picks in combinations(range(len(a)), length):
            candidate = tuple(a[i] for i in picks)
            if is_subsequence(candidate, b):
                return length
    return 0


@dataclass(frozen=True)
class SubsetLogdet:
    subset: tuple[int, ...]
    logdet: float
    degenerate: bool


def brute_force_subset_logdet(kernel: np.ndarray, m: int) -> SubsetLogdet:
    """Best size-m principal submatrix by log-determinant, exhaustively.

    Singular submatrices score -inf; if every subset is singular the
    result is flagged degenerate.
    """
    k_mat = np.asarray(kernel, dtype=float)
    n = k_mat.shape[0]
    if n > _MAX_KERNEL_K or m > _MAX_KERNEL_M:
        raise SizeExceeded(f"bounds are K <= {_MAX_KERNEL_K}, M <= {_MAX_KERNEL_M}")
    best_subset: tuple[int, ...] | None = None
    best = -math.inf
    for subset in combinations(range(n), min(m, n)):
        sub = k_mat[np.ix_(subset, subset)]
        sign, logdet = np.linalg.slogdet(sub)
        value = logdet if sign > 0 else -math.inf
        if value > best or best_subset is None:
            best = value
            best_subset = subset
    return SubsetLogdet(best_subset, best, degenerate=not math.isfinite(best))


@dataclass(frozen=True)
class CoverageInstance:
    """Weighted-coverage surrogate for the greedy selection guarantee."""

    weights: tuple[float, ...]
    candidate_sets: tuple[frozenset[int], ...]
    budget: int

    def __post_init__(self):
        if len(self.weights) > _MAX_UNIVERSE:
            raise SizeExceeded(f"universe larger than {_MAX_UNIVERSE}")
        if len(self.candidate_sets) > _MAX_CANDIDATES:
            raise SizeExceeded(f"more than {_MAX_CANDIDATES} candidates")

    def value(self, chosen: Sequence[int]) -> float:
        covered = set().union(*(self.candidate_sets[i] for i in chosen)) if chosen else set()
        return sum(self.weights[e] for e in covered)


def greedy_coverage(instance: CoverageInstance) -> list[int]:
    chosen: list[int] = []
    covered: set[int] = set()
    for _ in range(min(instance.budget, len(instance.candidate_sets))):
        best_gain = -1.0
        best_i = None
        for i, cand in enumerate(instance.candidate_sets):
            if i in chosen:
                continue
            gain = sum(instance.weights[e] for e in cand - covered)
            if gain > best_gain:
                best_gain = gain
                best_i = i
        chosen.append(best_i)
        covered |= instance.candidate_sets[best_i]
    return chosen


def optimal_coverage(instance: CoverageInstance) -> float:
    size = min(instance.budget, len(instance.candidate_sets))
    best = 0.0
    for subset in combinations(range(len(instance.candidate_sets)), size):
        best = max(best, instance.value(subset))
    return best


def greedy_vs_optimal_coverage(instance: CoverageInstance) -> float:
    """Greedy/optimal value ratio; 1.0 when the optimum is worthless."""
    optimal = optimal_coverage(instance)
    if optimal == 0.0:
        return 1.0
    return instance.value(greedy_coverage(instance)) / optimal


@dataclass(frozen=True)
class RetentionAudit:
    passed: bool
    kappa: float
    iota_proxy: float
    bound_rhs: float
    margin: float
    failures: tuple[str, ...]
    threshold_condition_violations: int


def retention_audit(
    original: Sequence[str], deduplicated: Sequence[str]
) -> RetentionAudit:
    """Recheck the unique-token invariant and the retention trade-off.

    Recomputes kappa and the unique-token retention proxy from scratch,
    verifies that every token absent from the predecessor survived, and
    evaluates the trade-off bound 1 + m/(1-m) with m the minimum
    unique-entropy fraction (entropy proxies; reported, not asserted).
    """
    if len(original) != len(deduplicated):
        raise LengthMismatch(
            f"{len(original)} originals vs {len(deduplicated)} deduplicated"
        )
    failures: list[str] = []
    unique_total = 0
    unique_survived = 0
    min_unique_fraction = math.inf
    for i in range(1, len(original)):
        prev_vocab = set(tokenize(original[i - 1]))
        cur_tokens = tokenize(original[i])
        out = deduplicated[i]
        out_counts = Counter([] if out == SENTINEL else tokenize(out))
        cur_counts = Counter(cur_tokens)
        for tok, count in cur_counts.items():
            if tok in prev_vocab:
                continue
            unique_total += count
            survived = min(count, out_counts[tok])
            unique_survived += survived
            if survived < count:
                failures.append(f"pair {i}: lost unique token {tok!r}")
        h_total = entropy_of_tokens(cur_tokens)
        if h_total > 0:
            unique_tokens = [t for t in cur_tokens if t not in prev_vocab]
            fraction = entropy_of_tokens(unique_tokens) / h_total
            min_unique_fraction = min(min_unique_fraction, fraction)
    in_chars = sum(len(c) for c in original)
    out_chars = sum(len(c) for c in deduplicated)
    kappa = out_chars / in_chars if in_chars else 1.0
    iota = unique_survived / unique_total if unique_total else 1.0
    if math.isinf(min_unique_fraction):
        bound = math.nan
    elif min_unique_fraction >= 1.0:
        bound = math.inf
    else:
        bound = 1.0 + min_unique_fraction / (1.0 - min_unique_fraction)
    margin = kappa + iota - bound if math.isfinite(bound) else math.nan
    violations = 0
    # the threshold-vs-unique-information condition from the retention
    # theorem is diagnostic only; count how often it fails to hold
    from .dedup import DedupConfig, adaptive_threshold

    config = DedupConfig()
    for i in range(1, len(original)):
        cur_tokens = tokenize(original[i])
        if not cur_tokens:
            continue
        h_total = entropy_of_tokens(cur_tokens)
        if h_total <= 0:
            continue
        prev_vocab = set(tokenize(original[i - 1]))
        unique_tokens = [t for t in cur_tokens if t not in prev_vocab]
        fraction = entropy_of_tokens(unique_tokens) / h_total
        if adaptive_threshold(original[i], config) >= 1.0 - fraction:
            violations += 1
    return RetentionAudit(
        passed=not failures,
        kappa=kappa,
        iota_proxy=iota,
        bound_rhs=bound,
        margin=margin,
        failures=tuple(failures),
        threshold_condition_violations=violations,
    )
