"""End-to-end diarization over precomputed segment embeddings.

Modes mirror the component ladder: Leiden on the raw cosine graph, on the
KNN-sparsified graph, on the GCN-refined merged graph, and finally with
second-speaker labels gated by an overlap mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gcn import GcnWeights, gcn_forward
from .graphs import EmbeddingSet, build_subgraph, cosine_affinity, knn_graph, merge_subgraphs
from .leiden import LeidenConfig, leiden
from .osd import OverlapMask, apply_overlap, belonging_coefficients, second_community
from .timeline import DiarizationTimeline

MODES = ("raw_leiden", "knn_leiden", "cdgcn_no_osd", "cdgcn")

_EPS = 1e-9


@dataclass
class SegmentationConfig:
    window_seconds: float = 1.5
    shift_seconds: float = 0.75

    def __post_init__(self):
        if not 0 < self.shift_seconds <= self.window_seconds:
            raise ValueError("need 0 < shift <= window")


@dataclass
class PipelineConfig:
    knn_k: int = 300
    gamma: float = 0.6
    seed: int = 0
    frame_duration: float = 0.01
    max_iterations: int = 100
    theta: float = 0.0


def segment_speech(vad_regions, config: SegmentationConfig | None = None):
    """Slide fixed windows over each speech region.

    Full windows start every shift; when the audio left uncovered at the
    region end is at least half a window, one short segment covers that
    tail. Regions too short for a full window yield a single segment
    spanning the whole region. Returns a list of (start, duration) pairs.
    """
    cfg = config or SegmentationConfig()
    window, shift = cfg.window_seconds, cfg.shift_seconds
    segments = []
    prev_end = -math.inf
    for start, end in vad_regions:
        if end <= start:
            raise ValueError(f"inverted region ({start}, {end})")
        if start < prev_end - _EPS:
            raise ValueError(f"region ({start}, {end}) overlaps the previous one")
        prev_end = end
        t = start
        placed = 0
        while t + window <= end + _EPS:
            segments.append((t, window))
            t += shift
            placed += 1
        if placed == 0:
            # Region shorter than a window: one segment spanning it.
            segments.append((start, end - start))
            continue
        covered_end = (t - shift) + window
        tail = end - covered_end
        if tail >= 0.5 * window - _EPS and tail > _EPS:
            segments.append((covered_end, tail))
    return segments


def read_vad_regions(path):
    """Read '<start> <end>' lines (seconds); blank lines are skipped."""
    regions = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path} line {lineno}: expected '<start> <end>'")
        try:
            start, end = float(parts[0]), float(parts[1])
        except ValueError:
            raise ValueError(f"{path} line {lineno}: values are not numbers") from None
        regions.append((start, end))
    return regions


def write_vad_regions(path, regions) -> None:
    Path(path).write_text("".join(f"{s:.3f} {e:.3f}\n" for s, e in regions))


def _covered_frames(start: float, end: float, frame_duration: float, total: int):
    """Index range of frames whose centers fall in [start, end)."""
    f0 = max(0, math.ceil(start / frame_duration - 0.5 - _EPS))
    f1 = min(total, math.ceil(end / frame_duration - 0.5 - _EPS))
    return f0, f1


def _frame_attribution(segments: np.ndarray, labels: np.ndarray, frame_duration: float,
                       vad_regions=None):
    """Assign each frame the label of the covering segment with the nearest
    center; frames outside every segment (or outside the VAD) stay -1.

    Returns (per-frame label, per-frame segment index).
    """
    ends = segments[:, 0] + segments[:, 1]
    total = max(1, math.ceil(ends.max() / frame_duration - _EPS))
    frame_segment = np.full(total, -1, dtype=np.int64)
    best = np.full(total, np.inf)
    for idx in range(len(segments)):
        start, duration = segments[idx]
        f0, f1 = _covered_frames(start, start + duration, frame_duration, total)
        if f1 <= f0:
            continue
        centers = (np.arange(f0, f1) + 0.5) * frame_duration
        dist = np.abs(centers - (start + duration / 2.0))
        better = dist < best[f0:f1]
        frame_segment[f0:f1][better] = idx
        best[f0:f1][better] = dist[better]
    if vad_regions is not None:
        speech = np.zeros(total, dtype=bool)
        for start, end in vad_regions:
            f0, f1 = _covered_frames(start, end, frame_duration, total)
            speech[f0:f1] = True
        frame_segment[~speech] = -1
    primary = np.full(total, -1, dtype=np.int64)
    covered = frame_segment >= 0
    primary[covered] = labels[frame_segment[covered]]
    return primary, frame_segment


def refine_graph(emb: EmbeddingSet, aff: np.ndarray, weights: GcnWeights, k: int):
    """Predict linkage probabilities on every pivot sub-graph and merge them."""
    n = emb.count
    predictions = []
    for pivot in range(n):
        sub = build_subgraph(aff, emb, pivot, k)
        probs = gcn_forward(sub, weights)
        predictions.append((pivot, sub.members[1:], probs))
    return merge_subgraphs(predictions, n)


def run_pipeline(emb: EmbeddingSet, mode: str, weights: GcnWeights | None = None,
                 mask: OverlapMask | None = None, config: PipelineConfig | None = None,
                 vad_regions=None, file_id: str = "session"):
    """Cluster segment embeddings and emit a timeline plus RTTM records.

    mode selects the graph fed to community detection (raw cosine graph,
    KNN graph, or GCN-refined graph) and whether overlap labels are added;
    the GCN modes need weights and the overlap mode also needs a mask.
    Community labels become speakers "spk<index>".
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {', '.join(MODES)}")
    cfg = config or PipelineConfig()
    n = emb.count
    if n == 0:
        raise ValueError("embedding set is empty")
    if mode in ("cdgcn_no_osd", "cdgcn") and weights is None:
        raise ValueError(f"mode {mode} requires GCN weights")
    if mode == "cdgcn" and mask is None:
        raise ValueError("mode cdgcn requires an overlap mask")

    aff = cosine_affinity(emb)
    if mode == "raw_leiden":
        graph = knn_graph(aff, max(1, n - 1))
    elif mode == "knn_leiden":
        graph = knn_graph(aff, cfg.knn_k)
    else:
        graph = refine_graph(emb, aff, weights, min(cfg.knn_k, max(1, n - 1)))

    partition = leiden(graph, LeidenConfig(gamma=cfg.gamma, seed=cfg.seed,
                                           max_iterations=cfg.max_iterations, theta=cfg.theta))
    primary, frame_segment = _frame_attribution(emb.segments, partition.labels,
                                                cfg.frame_duration, vad_regions)
    if mode == "cdgcn":
        belonging = belonging_coefficients(graph, partition)
        second = second_community(belonging, partition.labels)
        timeline = apply_overlap(primary, frame_segment, second, mask, cfg.frame_duration)
    else:
        timeline = DiarizationTimeline(cfg.frame_duration, primary)
    return timeline, timeline.to_records(file_id)
