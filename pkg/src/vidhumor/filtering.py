"""Four-step multimodal humor filter plus the manual safety-triage states.

Decision logic per video:
  a. no speech or non-English transcript -> reject(a)
  b. no funny utterance found from caption+transcript -> reject(b)
  c. funny from caption+transcript but NOT from transcript alone
     -> accept(c): the humor needs the visual channel
  d. funny from both: generate an explanation with and without the caption;
     if the two explanations are too similar (cosine above threshold) the
     caption adds nothing -> reject(d), otherwise accept(d).

Backend transport failures never produce verdicts; they surface as
retryable errors so curation decisions always reflect model output.
"""

from __future__ import annotations

import datetime
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .backends import (
    BackendClient,
    detect_prompt_request,
    explain_prompt_request,
)
from .corpus import StateError, Transcript, Utterance, VideoRecord, transition
from .metrics import cosine

logger = logging.getLogger(__name__)

STAGES = ("a_media", "b_funny_with_caption", "c_transcript_only",
          "d_divergence")

SAFETY_CRITERIA = (
    "discrimination",
    "animal_cruelty",
    "dangerous_or_selfharm",
    "obscenity",
    "shocking",
)

DEFAULT_DIVERGENCE_THRESHOLD = 0.6


@dataclass(frozen=True)
class FilterVerdict:
    video_id: str
    decision: str  # "accept" | "reject"
    stage: str
    detail: str = ""

    def __post_init__(self):
        if self.decision not in ("accept", "reject"):
            raise ValueError(f"bad decision {self.decision!r}")
        if self.stage not in STAGES:
            raise ValueError(f"bad stage {self.stage!r}")
        if self.decision == "accept" and self.stage in (
            "a_media", "b_funny_with_caption"
        ):
            raise ValueError("accept verdicts can only come from stage c or d")

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "decision": self.decision,
            "stage": self.stage,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterVerdict":
        return cls(video_id=d["video_id"], decision=d["decision"],
                   stage=d["stage"], detail=d.get("detail", ""))


@dataclass(frozen=True)
class SafetyVerdict:
    video_id: str
    decision: str  # "keep" | "remove"
    criterion: Optional[str]
    reviewer: str
    at: str  # ISO-8601 timestamp
    watched_fully: Optional[bool] = None

    def __post_init__(self):
        if self.decision not in ("keep", "remove"):
            raise ValueError(f"bad decision {self.decision!r}")
        if self.decision == "remove":
            if self.criterion not in SAFETY_CRITERIA:
                raise ValueError(
                    f"remove requires a criterion from {SAFETY_CRITERIA}"
                )
        elif self.criterion is not None:
            raise ValueError("keep verdicts must not carry a criterion")
        if not self.reviewer:
            raise ValueError("reviewer must be non-empty")

    @classmethod
    def now(cls, video_id: str, decision: str, reviewer: str,
            criterion: Optional[str] = None,
            watched_fully: Optional[bool] = None) -> "SafetyVerdict":
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return cls(video_id=video_id, decision=decision, criterion=criterion,
                   reviewer=reviewer, at=stamp, watched_fully=watched_fully)

    def to_dict(self) -> dict:
        d = {
            "video_id": self.video_id,
            "decision": self.decision,
            "criterion": self.criterion,
            "reviewer": self.reviewer,
            "at": self.at,
        }
        if self.watched_fully is not None:
            d["watched_fully"] = self.watched_fully
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SafetyVerdict":
        return cls(video_id=d["video_id"], decision=d["decision"],
                   criterion=d.get("criterion"), reviewer=d["reviewer"],
                   at=d["at"], watched_fully=d.get("watched_fully"))


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

# Shipped defaults are paraphrases; deployments can override them with
# plain-text files (see load_templates).
_DEFAULT_WITH_CAPTION = (
    "Video caption: {caption}\n"
    "Transcript:\n{transcript}\n"
    "Considering both the video caption and the transcript, which utterance "
    "is funny? Quote the funny utterance exactly, or answer \"None\" if no "
    "utterance is funny."
)

_DEFAULT_TRANSCRIPT_ONLY = (
    "Transcript:\n{transcript}\n"
    "Considering only the transcript, which utterance is funny? Quote the "
    "funny utterance exactly, or answer \"None\" if no utterance is funny."
)

_DEFAULT_EXPLAIN_WITH_CAPTION = (
    "Video caption: {caption}\n"
    "Transcript:\n{transcript}\n"
    "In one sentence, explain why this video is funny."
)

_DEFAULT_EXPLAIN_TRANSCRIPT_ONLY = (
    "Transcript:\n{transcript}\n"
    "In one sentence, explain why this video is funny."
)


@dataclass(frozen=True)
class FilterTemplates:
    with_caption: str = _DEFAULT_WITH_CAPTION
    transcript_only: str = _DEFAULT_TRANSCRIPT_ONLY
    explain_with_caption: str = _DEFAULT_EXPLAIN_WITH_CAPTION
    explain_transcript_only: str = _DEFAULT_EXPLAIN_TRANSCRIPT_ONLY


_TEMPLATE_FILES = {
    "with_caption": "filter_b_with_caption.txt",
    "transcript_only": "filter_c_transcript_only.txt",
    "explain_with_caption": "filter_d_explain_with_caption.txt",
    "explain_transcript_only": "filter_d_explain_transcript_only.txt",
}


def load_templates(config_dir: str | Path) -> FilterTemplates:
    """Load prompt templates from a directory, defaulting per missing file."""
    kwargs = {}
    for attr, fname in _TEMPLATE_FILES.items():
        p = Path(config_dir) / fname
        if p.exists():
            kwargs[attr] = p.read_text(encoding="utf-8")
    return FilterTemplates(**kwargs)


@dataclass(frozen=True)
class FilterConfig:
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD
    templates: FilterTemplates = field(default_factory=FilterTemplates)
    video_caption_prompt: str = "Who is doing what?"


def format_transcript(transcript: Transcript) -> str:
    return "\n".join(
        f"{i + 1}. {u.text}" for i, u in enumerate(transcript.utterances)
    )


_NORM_RE = re.compile(r"[^a-z0-9 ]+")


def _normalize(text: str) -> str:
    return _NORM_RE.sub("", text.lower()).strip()


def match_utterance(reply: str,
                    transcript: Transcript) -> Optional[Utterance]:
    """Match an LLM reply to a transcript utterance by normalized substring
    containment; no match counts as "none found"."""
    norm_reply = _normalize(reply)
    if not norm_reply:
        return None
    for u in transcript.utterances:
        norm_u = _normalize(u.text)
        if norm_u and norm_u in norm_reply:
            return u
    logger.warning("funny-utterance reply matched no utterance: %r", reply)
    return None


# ---------------------------------------------------------------------------
# Pipeline steps
# ---------------------------------------------------------------------------

def step_a_media(
    record: VideoRecord, client: BackendClient,
    config: FilterConfig = FilterConfig(),
) -> Union[FilterVerdict, tuple[str, Transcript]]:
    """Transcribe and caption the video; gate on speech presence and
    language."""
    transcript = client.asr(record.media.audio)
    if not transcript.utterances:
        return FilterVerdict(record.id, "reject", "a_media", "no speech")
    lang = transcript.language.lower()
    if lang != "en" and not lang.startswith("en-"):
        return FilterVerdict(
            record.id, "reject", "a_media",
            f"non-English ({transcript.language})",
        )
    captions = client.caption_frames(
        [record.media.frames_dir], config.video_caption_prompt, k=1
    )
    return captions[0][0], transcript


def step_b_funny_with_caption(
    caption: str, transcript: Transcript, client: BackendClient,
    templates: FilterTemplates = FilterTemplates(),
) -> Optional[Utterance]:
    prompt = templates.with_caption.format(
        caption=caption, transcript=format_transcript(transcript)
    )
    reply = client.complete(detect_prompt_request(prompt))
    return match_utterance(reply, transcript)


def step_c_transcript_only(
    transcript: Transcript, client: BackendClient,
    templates: FilterTemplates = FilterTemplates(),
) -> Optional[Utterance]:
    prompt = templates.transcript_only.format(
        transcript=format_transcript(transcript)
    )
    reply = client.complete(detect_prompt_request(prompt))
    return match_utterance(reply, transcript)


def step_d_divergence(
    video_id: str, caption: str, transcript: Transcript,
    client: BackendClient, threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
    templates: FilterTemplates = FilterTemplates(),
) -> FilterVerdict:
    """Compare explanations generated with vs without the caption.

    High similarity means the caption does not change the explanation, so
    the humor is not multimodal; strictly above the threshold rejects,
    exactly at the threshold accepts.
    """
    tr = format_transcript(transcript)
    with_cap = client.complete(explain_prompt_request(
        templates.explain_with_caption.format(caption=caption, transcript=tr),
        max_sentences=1,
    ))
    without_cap = client.complete(explain_prompt_request(
        templates.explain_transcript_only.format(transcript=tr),
        max_sentences=1,
    ))
    va, vb = client.embed([with_cap, without_cap])
    sim = cosine(va, vb)
    detail = f"similarity={sim:.6f}"
    if sim > threshold:
        return FilterVerdict(video_id, "reject", "d_divergence", detail)
    return FilterVerdict(video_id, "accept", "d_divergence", detail)


def run_filter(
    record: VideoRecord, client: BackendClient,
    config: FilterConfig = FilterConfig(),
    stage_limit: Optional[str] = None,
) -> Optional[FilterVerdict]:
    """Compose steps a through d for one ingested record.

    With a stage_limit of "a".."c" the pipeline stops early; None is
    returned when no decision was reached by the limited stage.
    """
    if record.state != "ingested":
        raise StateError(
            f"record {record.id} is {record.state}, expected ingested"
        )
    step_a = step_a_media(record, client, config)
    if isinstance(step_a, FilterVerdict):
        return step_a
    if stage_limit == "a":
        return None
    caption, transcript = step_a
    found_b = step_b_funny_with_caption(caption, transcript, client,
                                        config.templates)
    if found_b is None:
        return FilterVerdict(record.id, "reject", "b_funny_with_caption",
                             "no funny utterance found")
    if stage_limit == "b":
        return None
    found_c = step_c_transcript_only(transcript, client, config.templates)
    if found_c is None:
        return FilterVerdict(
            record.id, "accept", "c_transcript_only",
            f"multimodal: funny only with caption ({found_b.text!r})",
        )
    if stage_limit == "c":
        return None
    return step_d_divergence(record.id, caption, transcript, client,
                             config.divergence_threshold, config.templates)


def apply_verdict(record: VideoRecord, verdict: FilterVerdict) -> VideoRecord:
    """Advance a record's state according to its filter verdict."""
    if verdict.video_id != record.id:
        raise ValueError("verdict/record id mismatch")
    if verdict.decision == "accept":
        return transition(record, "filter_accepted")
    return transition(record, "filtered_rejected", stage=verdict.stage)


# ---------------------------------------------------------------------------
# Safety triage
# ---------------------------------------------------------------------------

def triage_enqueue(record: VideoRecord) -> VideoRecord:
    if record.state != "filter_accepted":
        raise StateError(
            f"record {record.id} is {record.state}, expected filter_accepted"
        )
    return transition(record, "triage_pending")


def triage_record(record: VideoRecord, verdict: SafetyVerdict) -> VideoRecord:
    """Apply one human safety verdict; verdicts are append-only upstream."""
    if verdict.video_id != record.id:
        raise ValueError("verdict/record id mismatch")
    if record.state != "triage_pending":
        raise StateError(
            f"record {record.id} is {record.state}, expected triage_pending"
        )
    if verdict.decision == "keep":
        return transition(record, "published")
    return transition(record, "triage_rejected", criterion=verdict.criterion)
