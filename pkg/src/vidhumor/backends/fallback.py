"""Reference in-process moment localizer.

A trained localizer is an external backend; this fallback scores each
segment by cosine similarity between the query embedding and the segment
caption embedding, and returns the top-k segment intervals. It exercises
the same downstream IoU math as a real localizer.
"""

from __future__ import annotations

from typing import Sequence

from ..segmenter import Segment
from .client import BackendClient
from .protocol import MomentCandidate


def fallback_localize(
    query: str,
    segments: Sequence[Segment],
    captions: Sequence[str],
    client: BackendClient,
    top_k: int = 5,
) -> list[MomentCandidate]:
    """Rank segment intervals by caption-to-query embedding similarity."""
    if len(segments) != len(captions):
        raise ValueError("need one caption per segment")
    if not segments:
        return []
    vectors = client.embed([query, *captions])
    qv = vectors[0]
    scored = []
    for seg, cv in zip(segments, vectors[1:]):
        score = sum(a * b for a, b in zip(qv, cv))
        scored.append(MomentCandidate(seg.start_s, seg.end_s, score))
    scored.sort(key=lambda c: -c.score)
    return scored[:top_k]
