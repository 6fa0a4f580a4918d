"""Versioned on-disk container for a SegmentIndex.

The container is an npz archive: a JSON header (format version, config
snapshot, segment contents) plus the embedding matrices and the CSR
adjacency arrays. ``index_to_json`` mirrors the same content losslessly
for debugging.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .corpus import TimedText
from .graph import ContextGraph
from .retriever import FORMAT_VERSION, SegmentIndex, VersionMismatch
from .segmenter import Segment, SegmentSet


def _entry_to_list(entry: TimedText) -> list:
    return [entry.start, entry.end, entry.text]


def _segment_to_dict(seg: Segment) -> dict:
    return {
        "index": seg.index,
        "start": seg.t_start,
        "end": seg.t_end,
        "captions": [_entry_to_list(e) for e in seg.captions],
        "transcripts": [_entry_to_list(e) for e in seg.transcripts],
        "fused_text": seg.fused_text,
    }


def _segment_from_dict(data: dict) -> Segment:
    return Segment(
        index=int(data["index"]),
        t_start=float(data["start"]),
        t_end=float(data["end"]),
        captions=tuple(TimedText(s, e, t) for s, e, t in data["captions"]),
        transcripts=tuple(TimedText(s, e, t) for s, e, t in data["transcripts"]),
        fused_text=data["fused_text"],
    )


def _header(index: SegmentIndex) -> dict:
    return {
        "format_version": index.format_version,
        "config": index.config.to_dict(),
        "segment_size": index.segments.segment_size,
        "total_duration": index.segments.total_duration,
        "segments": [_segment_to_dict(s) for s in index.segments.segments],
    }


def save_index(index: SegmentIndex, path: str | Path) -> None:
    np.savez_compressed(
        path,
        header=np.array(json.dumps(_header(index), sort_keys=True)),
        local=index.local,
        enhanced=index.enhanced,
        adj_indptr=index.graph.indptr,
        adj_indices=index.graph.indices,
        adj_weights=index.graph.weights,
    )


def _index_from_parts(
    header: dict,
    local: np.ndarray,
    enhanced: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    weights: np.ndarray,
) -> SegmentIndex:
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"index format {version!r} != supported {FORMAT_VERSION!r}")
    segset = SegmentSet(
        segments=tuple(_segment_from_dict(s) for s in header["segments"]),
        segment_size=float(header["segment_size"]),
        total_duration=float(header["total_duration"]),
    )
    graph = ContextGraph(
        count=segset.count,
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
        weights=np.asarray(weights, dtype=float),
    )
    return SegmentIndex(
        segments=segset,
        local=np.asarray(local, dtype=float),
        enhanced=np.asarray(enhanced, dtype=float),
        graph=graph,
        config=PipelineConfig.from_dict(header["config"]),
        format_version=version,
    )


def load_index(path: str | Path) -> SegmentIndex:
    with np.load(path) as data:
        header = json.loads(str(data["header"]))
        return _index_from_parts(
            header,
            data["local"],
            data["enhanced"],
            data["adj_indptr"],
            data["adj_indices"],
            data["adj_weights"],
        )


def index_to_json(index: SegmentIndex) -> dict:
    """Lossless JSON mirror of the container."""
    out = _header(index)
    out["local"] = index.local.tolist()
    out["enhanced"] = index.enhanced.tolist()
    out["adjacency"] = {
        "indptr": index.graph.indptr.tolist(),
        "indices": index.graph.indices.tolist(),
        "weights": index.graph.weights.tolist(),
    }
    return out


def index_from_json(data: dict) -> SegmentIndex:
    adj = data["adjacency"]
    return _index_from_parts(
        data,
        np.asarray(data["local"], dtype=float),
        np.asarray(data["enhanced"], dtype=float),
        np.asarray(adj["indptr"], dtype=np.int64),
        np.asarray(adj["indices"], dtype=np.int64),
        np.asarray(adj["weights"], dtype=float),
    )
