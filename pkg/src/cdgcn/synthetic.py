"""Synthetic diarization sessions with known ground truth.

Sessions place one speaker per speech region (plus an optional region
where two speakers talk at once), draw cluster embeddings around fixed
mean directions on the unit sphere, and carry the matching reference
records, VAD regions and oracle overlap mask. Used by the test suite and
the demo scripts; no audio is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import EmbeddingSet, SubGraph, build_subgraph, cosine_affinity
from .osd import OverlapMask
from .pipeline import SegmentationConfig, segment_speech
from .timeline import RttmRecord


@dataclass
class SyntheticSession:
    embeddings: EmbeddingSet
    speaker: np.ndarray          # primary speaker id per segment
    second_speaker: np.ndarray   # second speaker id per segment, -1 where none
    vad_regions: list
    reference: list
    overlap_mask: OverlapMask
    file_id: str

    @property
    def speaker_count(self) -> int:
        labels = set(self.speaker.tolist()) | set(self.second_speaker[self.second_speaker >= 0].tolist())
        return len(labels)


def _orthonormal_directions(count: int, dim: int, rng) -> np.ndarray:
    if count > dim:
        raise ValueError(f"cannot fit {count} orthonormal directions in {dim} dimensions")
    q, _ = np.linalg.qr(rng.normal(size=(dim, count)))
    return q.T


def _draw_cluster(mean: np.ndarray, count: int, noise: float, rng) -> np.ndarray:
    jitter = rng.normal(scale=noise / math.sqrt(mean.size), size=(count, mean.size))
    vectors = mean + jitter
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _mask_from_regions(regions, end: float, frame_duration: float) -> OverlapMask:
    total = max(1, math.ceil(end / frame_duration - 1e-9))
    frames = np.zeros(total, dtype=bool)
    for start, stop in regions:
        f0 = max(0, math.ceil(start / frame_duration - 0.5 - 1e-9))
        f1 = min(total, math.ceil(stop / frame_duration - 0.5 - 1e-9))
        frames[f0:f1] = True
    return OverlapMask(frames=frames, frame_duration=frame_duration)


def make_session(num_speakers: int = 4, segments_per_speaker: int = 50, dim: int = 16,
                 noise: float = 0.12, gap_seconds: float = 1.0, seed: int = 0,
                 mean_cosine: float | None = None,
                 file_id: str = "synthetic") -> SyntheticSession:
    """One solo speech region per speaker, speakers on orthogonal directions.

    Every region is tiled by the standard 1.5 s / 0.75 s windows, so each
    speaker contributes exactly segments_per_speaker segments. For two
    speakers, mean_cosine places their mean directions at that cosine
    instead of orthogonally (useful to teach the linkage predictor that
    adjacent clusters are still different speakers).
    """
    rng = np.random.default_rng(seed)
    seg_cfg = SegmentationConfig()
    means = _orthonormal_directions(num_speakers, dim, rng)
    if mean_cosine is not None:
        if num_speakers != 2:
            raise ValueError("mean_cosine only applies to two-speaker sessions")
        means = np.stack([
            means[0],
            mean_cosine * means[0] + math.sqrt(1.0 - mean_cosine**2) * means[1],
        ])
    region_len = (segments_per_speaker - 1) * seg_cfg.shift_seconds + seg_cfg.window_seconds

    vad_regions = []
    reference = []
    vectors = []
    segments = []
    speaker = []
    t = 0.0
    for spk in range(num_speakers):
        region = (t, t + region_len)
        vad_regions.append(region)
        reference.append(RttmRecord(file_id, round(region[0], 3), round(region_len, 3), f"ref{spk}"))
        spans = segment_speech([region], seg_cfg)
        assert len(spans) == segments_per_speaker
        segments.extend(spans)
        vectors.append(_draw_cluster(means[spk], len(spans), noise, rng))
        speaker.extend([spk] * len(spans))
        t = region[1] + gap_seconds

    emb = EmbeddingSet(np.vstack(vectors), np.array(segments))
    end = vad_regions[-1][1]
    return SyntheticSession(
        embeddings=emb,
        speaker=np.array(speaker, dtype=np.int64),
        second_speaker=np.full(len(segments), -1, dtype=np.int64),
        vad_regions=vad_regions,
        reference=reference,
        overlap_mask=_mask_from_regions([], end, 0.01),
        file_id=file_id,
    )


def make_overlap_session(solo_seconds: float = 24.0, overlap_seconds: float = 12.0,
                         dim: int = 16, noise: float = 0.12, mean_cosine: float = 0.25,
                         mix: tuple[float, float] = (0.85, 0.4), gap_seconds: float = 1.0,
                         seed: int = 0, file_id: str = "overlap") -> SyntheticSession:
    """Two adjacent speakers with a both-at-once region in the middle.

    Speaker means sit at the given cosine of each other; segments in the
    overlap region get mixture embeddings weighted toward speaker 0, with
    speaker 1 as ground-truth second speaker, and the oracle mask flags
    exactly those frames.
    """
    rng = np.random.default_rng(seed)
    seg_cfg = SegmentationConfig()
    base = _orthonormal_directions(2, dim, rng)
    mean_a = base[0]
    mean_b = mean_cosine * base[0] + math.sqrt(1.0 - mean_cosine**2) * base[1]

    starts = [0.0, solo_seconds + gap_seconds,
              solo_seconds + 2 * gap_seconds + overlap_seconds]
    lengths = [solo_seconds, overlap_seconds, solo_seconds]
    vad_regions = [(s, s + l) for s, l in zip(starts, lengths)]

    vectors = []
    segments = []
    speaker = []
    second = []
    for region_idx, region in enumerate(vad_regions):
        spans = segment_speech([region], seg_cfg)
        segments.extend(spans)
        if region_idx == 0:
            vectors.append(_draw_cluster(mean_a, len(spans), noise, rng))
            speaker.extend([0] * len(spans))
            second.extend([-1] * len(spans))
        elif region_idx == 1:
            mixture = mix[0] * mean_a + mix[1] * mean_b
            mixture = mixture / np.linalg.norm(mixture)
            vectors.append(_draw_cluster(mixture, len(spans), noise, rng))
            speaker.extend([0] * len(spans))
            second.extend([1] * len(spans))
        else:
            vectors.append(_draw_cluster(mean_b, len(spans), noise, rng))
            speaker.extend([1] * len(spans))
            second.extend([-1] * len(spans))

    reference = [
        RttmRecord(file_id, round(starts[0], 3), round(lengths[0], 3), "ref0"),
        RttmRecord(file_id, round(starts[1], 3), round(lengths[1], 3), "ref0"),
        RttmRecord(file_id, round(starts[1], 3), round(lengths[1], 3), "ref1"),
        RttmRecord(file_id, round(starts[2], 3), round(lengths[2], 3), "ref1"),
    ]
    emb = EmbeddingSet(np.vstack(vectors), np.array(segments))
    end = vad_regions[-1][1]
    return SyntheticSession(
        embeddings=emb,
        speaker=np.array(speaker, dtype=np.int64),
        second_speaker=np.array(second, dtype=np.int64),
        vad_regions=vad_regions,
        reference=reference,
        overlap_mask=_mask_from_regions([vad_regions[1]], end, 0.01),
        file_id=file_id,
    )


def linkage_labels(session: SyntheticSession, members: np.ndarray) -> np.ndarray:
    """1 where the member shares at least one speaker with the pivot."""
    pivot = members[0]

    def speakers_of(idx):
        out = {int(session.speaker[idx])}
        if session.second_speaker[idx] >= 0:
            out.add(int(session.second_speaker[idx]))
        return out

    pivot_speakers = speakers_of(pivot)
    return np.array([float(bool(pivot_speakers & speakers_of(j))) for j in members[1:]])


def rotate_batches(batches, rotations: int, seed: int = 0):
    """Append copies of (SubGraph, labels) batches with features mapped
    through random orthogonal matrices.

    Labels and adjacency are rotation invariant (features are
    pivot-relative differences), so augmenting this way teaches the
    linkage predictor to ignore the embedding basis, which transfers
    better to sessions with unseen speaker directions.
    """
    from scipy.stats import ortho_group

    if rotations <= 0 or not batches:
        return list(batches)
    dim = batches[0][0].features.shape[1]
    rng = np.random.default_rng(seed)
    out = list(batches)
    for _ in range(rotations):
        q = ortho_group.rvs(dim, random_state=rng)
        out += [
            (SubGraph(sub.pivot, sub.members, sub.features @ q, sub.adjacency), labels)
            for sub, labels in batches
        ]
    return out


def linkage_training_batches(session: SyntheticSession, k: int, rotations: int = 0,
                             seed: int = 0):
    """(SubGraph, labels) pairs, one per pivot segment of the session."""
    aff = cosine_affinity(session.embeddings)
    batches = []
    for pivot in range(session.embeddings.count):
        sub = build_subgraph(aff, session.embeddings, pivot, k)
        batches.append((sub, linkage_labels(session, sub.members)))
    return rotate_batches(batches, rotations, seed=seed)
