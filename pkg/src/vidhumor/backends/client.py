"""High-level client over the backend wire protocol.

The client owns all response normalization so downstream code can rely on
it regardless of backend quirks: embeddings come back unit-norm, audio tags
sorted by confidence, caption lists padded to exactly k per frame,
retrieval ties broken toward the lowest index, localization candidates
truncated and sorted by score.
"""

from __future__ import annotations

import math
import threading
from typing import Optional, Sequence

from ..corpus import Transcript
from .protocol import (
    CompletionRequest,
    MomentCandidate,
    ProtocolError,
    RetryPolicy,
    Transport,
    call_with_retry,
)

DEFAULT_MAX_INFLIGHT = 4

# Sampling temperatures for the two completion roles: deterministic for
# funny-utterance detection, mildly sampled for explanation generation.
DETECTION_TEMPERATURE = 0.0
EXPLANATION_TEMPERATURE = 0.3


class BackendClient:
    """All model calls go through here; safe for concurrent use."""

    def __init__(self, transport: Transport,
                 retry: RetryPolicy = RetryPolicy(),
                 max_inflight: int = DEFAULT_MAX_INFLIGHT):
        self.transport = transport
        self.retry = retry
        self._slots = threading.Semaphore(max_inflight)

    def _call(self, kind: str, payload: dict):
        with self._slots:
            return call_with_retry(self.transport, kind, payload, self.retry)

    # -- speech ------------------------------------------------------------

    def asr(self, audio: str) -> Transcript:
        data = self._call("asr", {"audio": audio})
        try:
            return Transcript.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"asr: bad transcript payload: {exc}") from exc

    # -- vision ------------------------------------------------------------

    def caption_frames(self, frames: Sequence[str], prompt: str,
                       k: int) -> list[list[str]]:
        """Exactly k caption candidates per frame; short lists are padded by
        repetition."""
        if k < 1:
            raise ValueError("k must be >= 1")
        data = self._call(
            "caption", {"frames": list(frames), "prompt": prompt, "k": k}
        )
        captions = data.get("captions") if isinstance(data, dict) else None
        if not isinstance(captions, list) or len(captions) != len(frames):
            raise ProtocolError(
                f"caption: expected {len(frames)} caption lists"
            )
        out = []
        for per_frame in captions:
            if not per_frame:
                raise ProtocolError("caption: empty caption list for a frame")
            padded = list(per_frame[:k])
            while len(padded) < k:
                padded.append(padded[len(padded) % len(per_frame)])
            out.append(padded)
        return out

    def retrieve_best(self, segment: str,
                      candidates: Sequence[str]) -> tuple[int, float]:
        """Index and score of the best-matching candidate; ties go to the
        lowest index."""
        if not candidates:
            raise ValueError("candidates must be non-empty")
        data = self._call(
            "retrieve", {"segment": segment, "candidates": list(candidates)}
        )
        scores = data.get("scores") if isinstance(data, dict) else None
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise ProtocolError("retrieve: expected one score per candidate")
        best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        return best, float(scores[best])

    # -- audio -------------------------------------------------------------

    def audiotag(self, audio: str) -> list[tuple[str, float]]:
        """Audio event tags as (label, confidence), sorted descending."""
        data = self._call("audiotag", {"audio": audio})
        tags = data.get("tags") if isinstance(data, dict) else None
        if not isinstance(tags, list):
            raise ProtocolError("audiotag: expected a tag list")
        out = []
        for item in tags:
            label, conf = item[0], float(item[1])
            if not 0.0 <= conf <= 1.0:
                raise ProtocolError(
                    f"audiotag: confidence {conf} outside [0, 1]"
                )
            out.append((str(label), conf))
        out.sort(key=lambda t: -t[1])
        return out

    # -- text --------------------------------------------------------------

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        """One unit-norm vector per text (normalized client-side)."""
        if not texts:
            raise ValueError("texts must be non-empty")
        data = self._call("embed", {"texts": list(texts)})
        vectors = data.get("vectors") if isinstance(data, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProtocolError("embed: expected one vector per text")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise ProtocolError(f"embed: mixed dimensions in batch: {dims}")
        out = []
        for v in vectors:
            norm = math.sqrt(sum(x * x for x in v))
            if norm == 0:
                raise ProtocolError("embed: zero vector in response")
            out.append([x / norm for x in v])
        return out

    def complete(self, req: CompletionRequest) -> str:
        data = self._call(
            "complete",
            {
                "prompt": req.prompt,
                "temperature": req.temperature,
                "max_sentences": req.max_sentences,
            },
        )
        text = data.get("text") if isinstance(data, dict) else None
        if not isinstance(text, str):
            raise ProtocolError("complete: missing text")
        return text

    # -- localization ------------------------------------------------------

    def localize(self, video: str, query: str,
                 top_k: int = 5) -> list[MomentCandidate]:
        """Up to top_k moment candidates, sorted by score descending.
        Candidates may overlap."""
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        data = self._call(
            "localize", {"video": video, "query": query, "top_k": top_k}
        )
        raw = data.get("candidates") if isinstance(data, dict) else None
        if not isinstance(raw, list):
            raise ProtocolError("localize: expected a candidate list")
        try:
            cands = [MomentCandidate(float(s), float(e), float(score))
                     for s, e, score in raw]
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"localize: bad candidate: {exc}") from exc
        cands.sort(key=lambda c: -c.score)
        return cands[:top_k]


def detect_prompt_request(prompt: str,
                          max_sentences: Optional[int] = None
                          ) -> CompletionRequest:
    """Completion request with the funny-utterance-detection temperature."""
    return CompletionRequest(prompt=prompt, temperature=DETECTION_TEMPERATURE,
                             max_sentences=max_sentences)


def explain_prompt_request(prompt: str,
                           max_sentences: Optional[int] = None
                           ) -> CompletionRequest:
    """Completion request with the explanation-generation temperature."""
    return CompletionRequest(prompt=prompt,
                             temperature=EXPLANATION_TEMPERATURE,
                             max_sentences=max_sentences)
