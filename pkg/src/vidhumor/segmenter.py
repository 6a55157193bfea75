"""Shot-based video segmentation refined with utterance start times.

A video is first split at visual content changes (mean HSV pixel delta
between consecutive sampled frames), then further split wherever an
utterance begins, so each segment is visually and verbally coherent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Transcript

DEFAULT_THRESHOLD = 27.0
DEFAULT_MIN_SCENE_S = 0.6
BOUNDARY_DEDUP_S = 0.05  # sub-frame jitter at 5fps sampling


@dataclass(frozen=True)
class FrameFeature:
    """Per-frame mean pixel value in HSV space, each channel in [0, 255]."""

    time_s: float
    hsv_mean: tuple[float, float, float]


@dataclass(frozen=True)
class Segment:
    index: int
    start_s: float
    end_s: float
    origin: str  # "shot_boundary" | "utterance_refined" | "whole_video"

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def _rgb_to_hsv_mean(image: np.ndarray) -> tuple[float, float, float]:
    """Mean HSV of an 8-bit RGB image, channels scaled to [0, 255]."""
    rgb = image.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.max(rgb, axis=-1)
    mn = np.min(rgb, axis=-1)
    delta = v - mn
    s = np.where(v > 0, delta / np.where(v > 0, v, 1) * 255.0, 0.0)
    # Hue in [0, 6), then scaled to [0, 255].
    h = np.zeros_like(v)
    nz = delta > 0
    rmax = nz & (v == r)
    gmax = nz & ~rmax & (v == g)
    bmax = nz & ~rmax & ~gmax
    h[rmax] = ((g - b)[rmax] / delta[rmax]) % 6.0
    h[gmax] = (b - r)[gmax] / delta[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / delta[bmax] + 4.0
    h = h / 6.0 * 255.0
    return (float(h.mean()), float(s.mean()), float(v.mean()))


def frame_features(
    frames: Iterable[tuple[float, np.ndarray]]
) -> list[FrameFeature]:
    """Compute one HSV mean-pixel feature per (time, RGB image) pair."""
    out: list[FrameFeature] = []
    shape: Optional[tuple] = None
    for time_s, image in frames:
        image = np.asarray(image)
        if image.ndim != 3 or image.shape[-1] != 3:
            raise ValueError(f"expected HxWx3 RGB image, got shape {image.shape}")
        if shape is None:
            shape = image.shape
        elif image.shape != shape:
            raise ValueError(
                f"frame dimensions changed: {shape} then {image.shape}"
            )
        if out and time_s <= out[-1].time_s:
            raise ValueError("frame times must be strictly increasing")
        out.append(FrameFeature(time_s=time_s, hsv_mean=_rgb_to_hsv_mean(image)))
    return out


def read_feature_sidecar(path: str | Path) -> list[FrameFeature]:
    """Read a precomputed per-frame feature file (CSV: time_s,h,s,v)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            t, h, s, v = (float(x) for x in row[:4])
            out.append(FrameFeature(time_s=t, hsv_mean=(h, s, v)))
    return out


def content_delta(a: FrameFeature, b: FrameFeature) -> float:
    """Mean absolute per-channel difference between two HSV mean triples."""
    return sum(abs(x - y) for x, y in zip(a.hsv_mean, b.hsv_mean)) / 3.0


def detect_shots(
    features: Sequence[FrameFeature],
    threshold: float = DEFAULT_THRESHOLD,
    min_scene_s: float = DEFAULT_MIN_SCENE_S,
) -> list[float]:
    """Find shot boundary times where the content delta exceeds `threshold`.

    A boundary is only placed if the preceding scene is at least
    `min_scene_s` long.
    """
    if not features:
        raise ValueError("detect_shots requires at least one frame feature")
    boundaries: list[float] = []
    last_cut = features[0].time_s
    for prev, cur in zip(features, features[1:]):
        if content_delta(prev, cur) > threshold and (
            cur.time_s - last_cut >= min_scene_s
        ):
            boundaries.append(cur.time_s)
            last_cut = cur.time_s
    return boundaries


def refine_with_utterances(
    shot_boundaries: Sequence[float],
    transcript: Optional[Transcript],
    duration_s: float,
) -> list[Segment]:
    """Merge shot boundaries with utterance start times into tiled segments.

    Boundary candidates closer than BOUNDARY_DEDUP_S are merged (first one
    wins). The output segments tile [0, duration_s] exactly; with no
    boundaries at all, a single whole-video segment is returned.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    candidates: list[tuple[float, str]] = [
        (t, "shot_boundary") for t in shot_boundaries
    ]
    if transcript is not None:
        candidates.extend((u.start_s, "utterance_refined")
                          for u in transcript.utterances)
    # Keep candidates strictly inside the video; prefer shot boundaries when
    # a shot cut and an utterance start coincide within the tolerance.
    candidates = [
        (t, origin) for t, origin in candidates
        if BOUNDARY_DEDUP_S < t < duration_s - BOUNDARY_DEDUP_S
    ]
    candidates.sort(key=lambda c: (c[0], c[1] != "shot_boundary"))
    merged: list[tuple[float, str]] = []
    for t, origin in candidates:
        if merged and t - merged[-1][0] <= BOUNDARY_DEDUP_S:
            continue
        merged.append((t, origin))

    if not merged:
        return [Segment(index=0, start_s=0.0, end_s=duration_s,
                        origin="whole_video")]

    # A segment is attributed to the boundary that ends it; the final
    # segment inherits the origin of the boundary that starts it.
    cuts = merged + [(duration_s, merged[-1][1])]
    segments: list[Segment] = []
    start = 0.0
    for i, (t, seg_origin) in enumerate(cuts):
        segments.append(Segment(index=i, start_s=start, end_s=t,
                                origin=seg_origin))
        start = t
    return segments


def segment_video(
    features: Sequence[FrameFeature],
    transcript: Optional[Transcript],
    duration_s: float,
    threshold: float = DEFAULT_THRESHOLD,
    min_scene_s: float = DEFAULT_MIN_SCENE_S,
) -> list[Segment]:
    """Full segmentation: shot detection then utterance refinement."""
    boundaries = detect_shots(features, threshold, min_scene_s) if features else []
    return refine_with_utterances(boundaries, transcript, duration_s)
