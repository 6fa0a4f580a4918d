"""Inter-caption redundancy removal via token-level LCS.

A caption is pruned against its immediate (original) predecessor when
their token similarity exceeds an entropy-adaptive threshold. Only
tokens on the matched common subsequence are removable, so tokens that
do not occur in the predecessor always survive.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import tokenize

SENTINEL = "[same as previous]"


class EmptyCaption(ValueError):
    pass


@dataclass(frozen=True)
class DedupConfig:
    """Threshold parameters: theta(c) = alpha + beta * H(c)/|c|."""

    alpha: float = 0.6
    beta: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class DedupReport:
    kappa: float
    iota_proxy: float
    removed_tokens: int


def token_lcs(a: Sequence[str], b: Sequence[str]) -> list[int]:
    """Positions in ``b`` forming one longest common subsequence with ``a``.

    Among equal-length LCSs the match with the earliest b-indices is
    returned, which makes downstream removal deterministic.
    """
    m, n = len(a), len(b)
    if m == 0 or n == 0:
        return []
    # suffix[i][j] = LCS length of a[i:], b[j:]
    suffix = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m - 1, -1, -1):
        row = suffix[i]
        nxt = suffix[i + 1]
        ai = a[i]
        for j in range(n - 1, -1, -1):
            if ai == b[j]:
                row[j] = nxt[j + 1] + 1
            else:
                row[j] = nxt[j] if nxt[j] >= row[j + 1] else row[j + 1]
    positions = []
    i = j = 0
    while i < m and j < n and suffix[i][j] > 0:
        if a[i] == b[j] and suffix[i][j] == suffix[i + 1][j + 1] + 1:
            positions.append(j)
            i += 1
            j += 1
        elif suffix[i + 1][j] == suffix[i][j]:
            # skipping a[i] keeps the b-pointer as far left as possible
            i += 1
        else:
            j += 1
    return positions


def similarity(prev: str, cur: str) -> float:
    """2*|LCS| / (|prev|+|cur|) over token counts; 0 when both empty."""
    a = tokenize(prev)
    b = tokenize(cur)
    total = len(a) + len(b)
    if total == 0:
        return 0.0
    return 2.0 * len(token_lcs(a, b)) / total


def entropy_of_tokens(tokens: Sequence[str]) -> float:
    n = len(tokens)
    if n == 0:
        return 0.0
    counts = Counter(tokens)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def shannon_entropy(text: str) -> float:
    """Empirical unigram entropy (bits) over whitespace tokens."""
    return entropy_of_tokens(tokenize(text))


def adaptive_threshold(caption: str, config: DedupConfig) -> float:
    """alpha + beta * H(c)/|c| with |c| in tokens, clamped to [0,1]."""
    tokens = tokenize(caption)
    if not tokens:
        raise EmptyCaption("cannot compute threshold of an empty caption")
    theta = config.alpha + config.beta * entropy_of_tokens(tokens) / len(tokens)
    return min(max(theta, 0.0), 1.0)


def dedup_pair(prev: str, cur: str, config: DedupConfig) -> str:
    """Remove from ``cur`` the LCS shared with ``prev`` when similar enough.

    Returns ``cur`` unchanged below the threshold; returns the sentinel
    when removal leaves nothing.
    """
    a = tokenize(prev)
    b = tokenize(cur)
    if not a or not b:
        return cur
    if similarity(prev, cur) <= adaptive_threshold(cur, config):
        return cur
    removed = set(token_lcs(a, b))
    survivors = [tok for pos, tok in enumerate(b) if pos not in removed]
    if not survivors:
        return SENTINEL
    return " ".join(survivors)


def dedup_stream(captions: Iterable[str], config: DedupConfig) -> tuple[list[str], DedupReport]:
    """Sequentially deduplicate a temporally ordered caption stream.

    Each caption is compared against its *original* predecessor, never
    against the deduplicated one, so removed content cannot resurface
    as unique. The report carries the character compression ratio kappa
    and the unique-token retention proxy iota.
    """
    originals = list(captions)
    output: list[str] = []
    removed_tokens = 0
    unique_total = 0
    unique_survived = 0
    for i, cur in enumerate(originals):
        if i == 0:
            output.append(cur)
            continue
        prev = originals[i - 1]
        new = dedup_pair(prev, cur, config)
        out_tokens = [] if new == SENTINEL else tokenize(new)
        cur_tokens = tokenize(cur)
        removed_tokens += len(cur_tokens) - len(out_tokens)
        prev_vocab = set(tokenize(prev))
        out_counts = Counter(out_tokens)
        for tok, count in Counter(cur_tokens).items():
            if tok not in prev_vocab:
                unique_total += count
                unique_survived += min(count, out_counts[tok])
        output.append(new)
    in_chars = sum(len(c) for c in originals)
    out_chars = sum(len(c) for c in output)
    kappa = out_chars / in_chars if in_chars else 1.0
    iota = unique_survived / unique_total if unique_total else 1.0
    return output, DedupReport(kappa=kappa, iota_proxy=iota, removed_tokens=removed_tokens)
