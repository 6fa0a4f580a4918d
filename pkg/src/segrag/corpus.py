"""Parsing and validation of timestamped caption/transcript tracks.

Input files are UTF-8, one JSON object per line with keys ``start``,
``end`` (seconds) and ``text``. Extra keys are ignored. Text is
normalized (NFC, collapsed whitespace) before any downstream length or
entropy computation.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

CAPTION = "caption"
TRANSCRIPT = "transcript"

TrackKind = Literal["caption", "transcript"]


class CorpusError(ValueError):
    """Base class for track ingestion failures."""


class MalformedLine(CorpusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class InvalidInterval(CorpusError):
    pass


class OverlapError(CorpusError):
    pass


class EmptyTrack(CorpusError):
    pass


class KindMismatch(CorpusError):
    pass


def normalize_text(text: str) -> str:
    """NFC-normalize and collapse internal whitespace."""
    return " ".join(unicodedata.normalize("NFC", text).split())


def tokenize(text: str) -> list[str]:
    """Whitespace tokens of the normalized text."""
    return normalize_text(text).split()


@dataclass(frozen=True)
class TimedText:
    """One timestamped text unit; the atomic input."""

    start: float
    end: float
    text: str


@dataclass(frozen=True)
class Track:
    kind: str
    entries: tuple[TimedText, ...]
    duration: float

    @property
    def is_empty(self) -> bool:
        return not self.entries

    def texts(self) -> list[str]:
        return [e.text for e in self.entries]


@dataclass(frozen=True)
class ValidatedPair:
    captions: Track
    transcripts: Track
    duration: float
    silent: bool


def _parse_line(line_no: int, raw: str) -> TimedText:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "expected a JSON object")
    try:
        start = float(obj["start"])
        end = float(obj["end"])
        text = obj["text"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine(line_no, "need numeric start/end and string text") from exc
    if not isinstance(text, str):
        raise MalformedLine(line_no, "text must be a string")
    if start < 0:
        raise InvalidInterval(f"line {line_no}: negative start {start}")
    if not end > start:
        raise InvalidInterval(f"line {line_no}: end {end} <= start {start}")
    norm = normalize_text(text)
    if not norm:
        raise MalformedLine(line_no, "text empty after normalization")
    return TimedText(start, end, norm)


def parse_track(
    path: str | Path,
    kind: TrackKind,
    *,
    overlap_slack: float = 0.0,
    allow_empty: bool = False,
) -> Track:
    """Parse a line-delimited JSON track file into a sorted Track.

    Entries are sorted ascending by start (stable). Consecutive entries
    may overlap by at most ``overlap_slack`` seconds; more is an error.
    An empty track raises EmptyTrack unless ``allow_empty`` (silent
    videos have a valid empty transcript side).
    """
    if kind not in (CAPTION, TRANSCRIPT):
        raise KindMismatch(f"unknown track kind {kind!r}")
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            entries.append(_parse_line(line_no, raw))
    if not entries:
        if allow_empty:
            return Track(kind, (), 0.0)
        raise EmptyTrack(f"{path}: no valid entries")
    entries.sort(key=lambda e: e.start)
    for prev, cur in zip(entries, entries[1:]):
        overlap = prev.end - cur.start
        if overlap > overlap_slack:
            raise OverlapError(
                f"entries at {prev.start:.3f}s and {cur.start:.3f}s "
                f"overlap by {overlap:.3f}s (slack {overlap_slack:.3f}s)"
            )
    duration = max(e.end for e in entries)
    return Track(kind, tuple(entries), duration)


def track_to_jsonl(track: Track) -> str:
    """Serialize a Track back to its line-delimited JSON form."""
    lines = [
        json.dumps({"start": e.start, "end": e.end, "text": e.text}, ensure_ascii=False)
        for e in track.entries
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def track_from_entries(kind: TrackKind, entries: Iterable[TimedText]) -> Track:
    """Build a Track from in-memory entries, enforcing sort order."""
    ordered = tuple(sorted(entries, key=lambda e: e.start))
    duration = max((e.end for e in ordered), default=0.0)
    return Track(kind, ordered, duration)


def validate_pair(captions: Track, transcripts: Track) -> ValidatedPair:
    """Check kinds and combine durations; empty transcripts are flagged.

    Raises KindMismatch if the tracks are swapped and EmptyTrack when
    both sides are empty.
    """
    if captions.kind != CAPTION:
        raise KindMismatch(f"captions track has kind {captions.kind!r}")
    if transcripts.kind != TRANSCRIPT:
        raise KindMismatch(f"transcripts track has kind {transcripts.kind!r}")
    if captions.is_empty and transcripts.is_empty:
        raise EmptyTrack("both tracks are empty")
    duration = max(captions.duration, transcripts.duration)
    return ValidatedPair(captions, transcripts, duration, silent=transcripts.is_empty)
