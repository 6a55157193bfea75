"""Fine-grained video-to-text prompt construction.

One prompt per video: a fixed header instruction, the sound tags in
parentheses, then one "Scene:" block per segment in chronological order
holding the segment's best caption and its speaker-labeled utterances, and
a footer asking for an explanation of up to three sentences. Rendering is
byte-deterministic so prompts can be golden-file tested and used as mock
completion keys.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .backends import BackendClient, explain_prompt_request
from .corpus import Transcript, Utterance, VideoRecord
from .segmenter import (
    FrameFeature,
    Segment,
    read_feature_sidecar,
    segment_video,
)

logger = logging.getLogger(__name__)

MODALITIES = ("visual", "speech", "sound")

DEFAULT_K = 20
DEFAULT_FPS = 5.0
DEFAULT_CAPTION_PROMPT = "Who is doing what?"
SOUND_TAG_CONFIDENCE = 0.3
SOUND_TAG_TOP = 3

DEFAULT_HEADER = (
    "Please generate an explanation of why this video is funny, as if you "
    "are watching the video."
)
DEFAULT_FOOTER = (
    "Explain why the video is funny in up to three sentences."
)


class MediaError(Exception):
    """A media bundle is missing or unusable."""


class PromptError(Exception):
    """Prompt construction or completion failed."""


@dataclass(frozen=True)
class PromptConfig:
    k: int = DEFAULT_K
    fps: float = DEFAULT_FPS
    caption_prompt: str = DEFAULT_CAPTION_PROMPT
    header: str = DEFAULT_HEADER
    footer: str = DEFAULT_FOOTER
    ablate: frozenset = frozenset()

    @property
    def enabled(self) -> frozenset:
        return frozenset(MODALITIES) - self.ablate


@dataclass(frozen=True)
class SegmentCaption:
    segment_index: int
    caption: str
    retrieval_score: float
    corpus_size: int  # frames x K candidates this caption was chosen from

    def __post_init__(self):
        if self.corpus_size < 1:
            raise ValueError("corpus_size must be >= 1")


@dataclass(frozen=True)
class SoundTagSet:
    """Top audio tags above the confidence floor, strongest first."""

    tags: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if len(self.tags) > SOUND_TAG_TOP:
            raise ValueError(f"at most {SOUND_TAG_TOP} tags allowed")
        for _, conf in self.tags:
            if conf <= SOUND_TAG_CONFIDENCE:
                raise ValueError(
                    f"tag confidence {conf} not above {SOUND_TAG_CONFIDENCE}"
                )

    def header(self) -> str:
        if not self.tags:
            return ""
        return "(" + ", ".join(label for label, _ in self.tags) + ")"


@dataclass(frozen=True)
class PromptBlock:
    start_s: float
    caption: Optional[str]  # None when the visual modality is ablated
    utterances: tuple[tuple[str, str], ...] = ()  # (speaker, text)


@dataclass(frozen=True)
class PromptDocument:
    header_instruction: str
    sound_header: str  # "(tag, tag)" or "" when ablated/empty
    blocks: tuple[PromptBlock, ...]
    footer_instruction: str

    def __post_init__(self):
        starts = [b.start_s for b in self.blocks]
        if starts != sorted(starts):
            raise ValueError("blocks must be in chronological order")

    def render(self) -> str:
        parts = [self.header_instruction]
        if self.sound_header:
            parts.append(self.sound_header)
        for block in self.blocks:
            lines = []
            if block.caption is not None:
                lines.append(f"Scene: {block.caption}")
            else:
                lines.append("Scene:")
            for speaker, text in block.utterances:
                lines.append(f"{speaker}: {text}")
            parts.append("\n".join(lines))
        parts.append(self.footer_instruction)
        return "\n\n".join(parts) + "\n"


_SPEAKER_LINE = re.compile(r"^(Speaker \d+): (.*)$")


def parse_prompt(text: str) -> PromptDocument:
    """Inverse of PromptDocument.render for round-trip checks."""
    paragraphs = [p for p in text.split("\n\n") if p.strip()]
    if len(paragraphs) < 2:
        raise PromptError("prompt must have a header and a footer")
    header = paragraphs[0]
    footer = paragraphs[-1].rstrip("\n")
    body = paragraphs[1:-1]
    sound_header = ""
    if body and body[0].startswith("(") and body[0].endswith(")"):
        sound_header = body[0]
        body = body[1:]
    blocks = []
    for i, para in enumerate(body):
        lines = para.split("\n")
        if not lines[0].startswith("Scene:"):
            raise PromptError(f"block does not start with scene marker: "
                              f"{lines[0]!r}")
        caption: Optional[str] = lines[0][len("Scene:"):].strip() or None
        utts = []
        for line in lines[1:]:
            m = _SPEAKER_LINE.match(line)
            if not m:
                raise PromptError(f"unparseable utterance line: {line!r}")
            utts.append((m.group(1), m.group(2)))
        blocks.append(PromptBlock(start_s=float(i), caption=caption,
                                  utterances=tuple(utts)))
    return PromptDocument(
        header_instruction=header,
        sound_header=sound_header,
        blocks=tuple(blocks),
        footer_instruction=footer,
    )


# ---------------------------------------------------------------------------
# Frame sampling and caption corpora
# ---------------------------------------------------------------------------

def frame_times(segment: Segment, fps: float = DEFAULT_FPS) -> list[float]:
    """Sampling times within [start, end): start, start + 1/fps, ...

    Always at least the segment start, even for segments shorter than one
    frame interval.
    """
    if fps <= 0:
        raise ValueError("fps must be > 0")
    times = []
    i = 0
    while True:
        t = segment.start_s + i / fps
        if t >= segment.end_s - 1e-9 and i > 0:
            break
        times.append(t)
        i += 1
    return times


_FRAME_NAME = re.compile(r"^frame_(\d+)\.(\w+)$")


def list_frames(frames_dir: str | Path) -> list[tuple[float, str]]:
    """Frames on disk as (time_s, path), named frame_<milliseconds>.<ext>."""
    d = Path(frames_dir)
    if not d.is_dir():
        raise MediaError(f"frames directory not found: {frames_dir}")
    out = []
    for p in sorted(d.iterdir()):
        m = _FRAME_NAME.match(p.name)
        if m:
            out.append((int(m.group(1)) / 1000.0, str(p)))
    out.sort()
    return out


def nearest_frames(times: Sequence[float],
                   available: Sequence[tuple[float, str]],
                   fps: float = DEFAULT_FPS) -> list[str]:
    """Pick the closest stored frame for each sampling time.

    Lookup tolerance is half a frame interval; anything farther means the
    bundle is missing frames.
    """
    if not available:
        raise MediaError("no frames available")
    tolerance = 1.0 / (2.0 * fps)
    refs = []
    for t in times:
        best_time, best_ref = min(available, key=lambda a: abs(a[0] - t))
        if abs(best_time - t) > tolerance + 1e-9:
            raise MediaError(
                f"no frame within {tolerance:.3f}s of t={t:.3f}s"
            )
        refs.append(best_ref)
    return refs


@dataclass(frozen=True)
class CaptionCorpus:
    segment_index: int
    captions: tuple[str, ...]
    frame_count: int
    k: int

    @property
    def size(self) -> int:
        return len(self.captions)


def build_caption_corpus(
    segment: Segment,
    frames: Sequence[tuple[float, str]],
    client: BackendClient,
    k: int = DEFAULT_K,
    fps: float = DEFAULT_FPS,
    caption_prompt: str = DEFAULT_CAPTION_PROMPT,
) -> CaptionCorpus:
    """Candidate captions for one segment: k per sampled frame."""
    times = frame_times(segment, fps)
    refs = nearest_frames(times, frames, fps)
    per_frame = client.caption_frames(refs, caption_prompt, k)
    flat = tuple(c for frame_captions in per_frame for c in frame_captions)
    return CaptionCorpus(segment_index=segment.index, captions=flat,
                         frame_count=len(refs), k=k)


def select_segment_caption(segment_ref: str, corpus: CaptionCorpus,
                           client: BackendClient) -> SegmentCaption:
    """Retrieval-select the best caption from a segment's corpus."""
    if not corpus.captions:
        raise ValueError("caption corpus is empty")
    index, score = client.retrieve_best(segment_ref, corpus.captions)
    return SegmentCaption(
        segment_index=corpus.segment_index,
        caption=corpus.captions[index],
        retrieval_score=score,
        corpus_size=corpus.size,
    )


# ---------------------------------------------------------------------------
# Speech and audio
# ---------------------------------------------------------------------------

_ASSIGNMENT = re.compile(r"(\d+)\s*[:\-=]+\s*(?:Speaker\s*)?(\d+)",
                         re.IGNORECASE)


def assign_speakers(transcript: Transcript,
                    client: BackendClient) -> Transcript:
    """Label each utterance "Speaker k" via the completion backend.

    A single utterance is always Speaker 1. Unparseable replies degrade to
    labeling everything Speaker 1 rather than dropping the speech modality.
    """
    n = len(transcript.utterances)
    if n == 0:
        raise ValueError("transcript has no utterances")
    if n == 1:
        return replace(
            transcript,
            utterances=(replace(transcript.utterances[0], speaker="Speaker 1"),),
        )
    numbered = "\n".join(
        f"{i + 1}. {u.text}" for i, u in enumerate(transcript.utterances)
    )
    prompt = (
        "Predict the number of speakers in this conversation and assign a "
        "speaker to each utterance. Answer one line per utterance in the "
        "form \"<utterance number>: Speaker <speaker number>\".\n\n"
        f"{numbered}"
    )
    reply = client.complete(explain_prompt_request(prompt))
    assignment: dict[int, int] = {}
    for m in _ASSIGNMENT.finditer(reply):
        utt_no, spk_no = int(m.group(1)), int(m.group(2))
        if 1 <= utt_no <= n and 1 <= spk_no <= n:
            assignment.setdefault(utt_no, spk_no)
    if len(assignment) != n:
        logger.warning(
            "speaker-separation reply unparseable (%d/%d assigned); "
            "labeling all utterances Speaker 1", len(assignment), n,
        )
        assignment = {i: 1 for i in range(1, n + 1)}
    utterances = tuple(
        replace(u, speaker=f"Speaker {assignment[i + 1]}")
        for i, u in enumerate(transcript.utterances)
    )
    return replace(transcript, utterances=utterances)


def collect_sound_tags(audio: str, client: BackendClient) -> SoundTagSet:
    """Top 3 audio tags with confidence strictly above 0.3."""
    tags = client.audiotag(audio)
    kept = [(label, conf) for label, conf in tags
            if conf > SOUND_TAG_CONFIDENCE]
    return SoundTagSet(tags=tuple(kept[:SOUND_TAG_TOP]))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def assemble_prompt(
    segments: Sequence[Segment],
    captions: Sequence[SegmentCaption],
    transcript: Optional[Transcript],
    tags: SoundTagSet,
    config: PromptConfig = PromptConfig(),
) -> PromptDocument:
    """Put the modalities together chronologically, honoring ablations.

    Utterances are assigned to the segment containing their start time and
    are never split across blocks.
    """
    enabled = config.enabled
    if not enabled:
        raise ValueError("at least one modality must stay enabled")
    ordered = sorted(segments, key=lambda s: s.start_s)
    caption_of = {c.segment_index: c.caption for c in captions}

    def block_utterances(seg: Segment, is_last: bool) -> tuple:
        if "speech" not in enabled or transcript is None:
            return ()
        out = []
        for u in transcript.utterances:
            inside = seg.start_s <= u.start_s < seg.end_s or (
                is_last and u.start_s >= seg.end_s
            )
            if inside:
                out.append((u.speaker or "Speaker 1", u.text))
        return tuple(out)

    blocks = tuple(
        PromptBlock(
            start_s=seg.start_s,
            caption=(caption_of.get(seg.index)
                     if "visual" in enabled else None),
            utterances=block_utterances(seg, i == len(ordered) - 1),
        )
        for i, seg in enumerate(ordered)
    )
    return PromptDocument(
        header_instruction=config.header,
        sound_header=tags.header() if "sound" in enabled else "",
        blocks=blocks,
        footer_instruction=config.footer,
    )


def explain(prompt_text: str, client: BackendClient,
            max_sentences: int = 3) -> str:
    """One explanation completion for a rendered prompt."""
    reply = client.complete(
        explain_prompt_request(prompt_text, max_sentences=max_sentences)
    )
    if not reply.strip():
        raise PromptError("empty completion")
    return reply


# ---------------------------------------------------------------------------
# Whole-video orchestration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PromptBuildResult:
    video_id: str
    document: PromptDocument
    segments: tuple[Segment, ...]
    captions: tuple[SegmentCaption, ...]
    tags: SoundTagSet
    meta: dict = field(default_factory=dict)


def load_frame_features(frames_dir: str | Path) -> list[FrameFeature]:
    """Per-frame features from the bundle's precomputed sidecar, if present.

    Decoding raster frames for feature extraction is left to callers with
    image tooling; bundles produced by the extraction scripts always carry
    the sidecar.
    """
    sidecar = Path(frames_dir) / "features.csv"
    if sidecar.exists():
        return read_feature_sidecar(sidecar)
    return []


def build_video_prompt(record: VideoRecord, client: BackendClient,
                       config: PromptConfig = PromptConfig()
                       ) -> PromptBuildResult:
    """Segment one video and assemble its multimodal prompt."""
    features = load_frame_features(record.media.frames_dir)
    transcript = client.asr(record.media.audio)
    segments = segment_video(
        features, transcript if transcript.utterances else None,
        record.duration_s,
    )

    captions: list[SegmentCaption] = []
    if "visual" in config.enabled:
        frames = list_frames(record.media.frames_dir)
        for seg in segments:
            corpus = build_caption_corpus(
                seg, frames, client, k=config.k, fps=config.fps,
                caption_prompt=config.caption_prompt,
            )
            seg_ref = f"{record.media.frames_dir}#seg{seg.index}"
            captions.append(select_segment_caption(seg_ref, corpus, client))

    if "speech" in config.enabled and transcript.utterances:
        transcript = assign_speakers(transcript, client)

    tags = (collect_sound_tags(record.media.audio, client)
            if "sound" in config.enabled else SoundTagSet())

    document = assemble_prompt(segments, captions, transcript, tags, config)
    meta = {
        "segments": len(segments),
        "k": config.k,
        "fps": config.fps,
        "ablate": sorted(config.ablate),
        "corpus_sizes": [c.corpus_size for c in captions],
    }
    return PromptBuildResult(
        video_id=record.id,
        document=document,
        segments=tuple(segments),
        captions=tuple(captions),
        tags=tags,
        meta=meta,
    )
