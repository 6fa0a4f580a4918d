"""Fixed-length temporal segmentation and information-density search.

Entries are assigned to segments by start time (half-open windows, no
splitting). Each segment renders a deterministic fused text view and an
information density, entropy per character, which drives the search for
the density-optimal segment size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .corpus import TimedText, Track, tokenize
from .dedup import entropy_of_tokens

NO_CONTENT = "[no content]"


class InvalidSegmentSize(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    index: int
    t_start: float
    t_end: float
    captions: tuple[TimedText, ...]
    transcripts: tuple[TimedText, ...]
    fused_text: str

    @property
    def is_empty(self) -> bool:
        return not self.captions and not self.transcripts


@dataclass(frozen=True)
class SegmentSet:
    segments: tuple[Segment, ...]
    segment_size: float
    total_duration: float

    @property
    def count(self) -> int:
        return len(self.segments)


def _merged_entries(
    captions: Sequence[TimedText], transcripts: Sequence[TimedText]
) -> list[tuple[TimedText, str]]:
    # captions sort before transcripts on exact start ties; order is
    # otherwise the stable input order
    tagged = [(e, "VISUAL", 0) for e in captions] + [(e, "AUDIO", 1) for e in transcripts]
    tagged.sort(key=lambda item: (item[0].start, item[2]))
    return [(e, label) for e, label, _ in tagged]


def _render(captions: Sequence[TimedText], transcripts: Sequence[TimedText]) -> str:
    merged = _merged_entries(captions, transcripts)
    if not merged:
        return NO_CONTENT
    return "\n".join(
        f"[{e.start:.1f}-{e.end:.1f}] {label}: {e.text}" for e, label in merged
    )


def fuse_segment_text(segment: Segment) -> str:
    """Deterministic interleaved rendering of a segment's entries."""
    return _render(segment.captions, segment.transcripts)


def segment_token_text(segment: Segment) -> str:
    """Raw contained texts joined in temporal order, without markup.

    This is the token stream used for both entropy and embedding, so
    formatting never inflates either.
    """
    return " ".join(e.text for e, _ in _merged_entries(segment.captions, segment.transcripts))


def segment_tracks(captions: Track, transcripts: Track, segment_size: float) -> SegmentSet:
    """Tile [0, duration) with windows of ``segment_size`` seconds.

    Every entry lands in exactly one segment by its start time; empty
    segments are retained so the tiling has no gaps.
    """
    if not segment_size > 0:
        raise InvalidSegmentSize(f"segment size must be positive, got {segment_size}")
    duration = max(captions.duration, transcripts.duration)
    count = math.ceil(duration / segment_size) if duration > 0 else 0
    cap_bins: list[list[TimedText]] = [[] for _ in range(count)]
    trs_bins: list[list[TimedText]] = [[] for _ in range(count)]
    for track, bins in ((captions, cap_bins), (transcripts, trs_bins)):
        for entry in track.entries:
            k = min(int(entry.start // segment_size), count - 1)
            bins[k].append(entry)
    segments = []
    for k in range(count):
        t0 = k * segment_size
        t1 = duration if k == count - 1 else (k + 1) * segment_size
        caps = tuple(cap_bins[k])
        trs = tuple(trs_bins[k])
        segments.append(Segment(k, t0, t1, caps, trs, _render(caps, trs)))
    return SegmentSet(tuple(segments), segment_size, duration)


def information_density(segment: Segment) -> float:
    """Token entropy of contained texts divided by their character length.

    Empty segments have density 0 by convention.
    """
    texts = [e.text for e in segment.captions] + [e.text for e in segment.transcripts]
    total_chars = sum(len(t) for t in texts)
    if total_chars == 0:
        return 0.0
    tokens = [tok for t in texts for tok in tokenize(t)]
    return entropy_of_tokens(tokens) / total_chars


def min_density(segset: SegmentSet) -> float:
    """Minimum density over non-empty segments (0 when all are empty).

    Empty segments are excluded so silent stretches do not force the
    minimum to 0 for every candidate size.
    """
    densities = [information_density(s) for s in segset.segments if not s.is_empty]
    return min(densities) if densities else 0.0


def density_sweep(
    captions: Track, transcripts: Track, candidates: Sequence[float]
) -> list[tuple[float, float]]:
    """(candidate, min density) for each candidate segment size."""
    if not candidates:
        raise InvalidSegmentSize("candidate list is empty")
    out = []
    for cand in candidates:
        segset = segment_tracks(captions, transcripts, cand)
        out.append((cand, min_density(segset)))
    return out


def optimal_segment_size(
    captions: Track, transcripts: Track, candidates: Sequence[float]
) -> float:
    """Candidate maximizing min-over-segments density; ties go small."""
    best_cand = None
    best_score = -math.inf
    for cand, score in sorted(density_sweep(captions, transcripts, candidates)):
        if score > best_score:
            best_cand = cand
            best_score = score
    return best_cand
