"""Corpus data model: records, manifests, annotation validation, stats, splits.

All timestamps are in seconds from the start of the video. Records are
immutable after construction; state changes go through :func:`transition`,
which returns a new record.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random
from typing import Any, Iterable, Optional

# Pipeline states in order. A record never moves from a rejected state
# back toward published.
STATES = (
    "ingested",
    "filtered_rejected",
    "filter_accepted",
    "triage_pending",
    "triage_rejected",
    "published",
)

_ALLOWED_TRANSITIONS = {
    "ingested": {"filtered_rejected", "filter_accepted"},
    "filter_accepted": {"triage_pending"},
    "triage_pending": {"triage_rejected", "published"},
    "filtered_rejected": set(),
    "triage_rejected": set(),
    "published": set(),
}


class CorpusError(Exception):
    """Base class for corpus-layer errors."""


class ManifestError(CorpusError):
    """Malformed or inconsistent manifest content."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class StateError(CorpusError):
    """Illegal record state transition."""


@dataclass(frozen=True)
class MediaBundleRef:
    """Paths to the on-disk media bundle of one video."""

    frames_dir: str
    audio: str
    transcript: Optional[str] = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"frames_dir": self.frames_dir, "audio": self.audio}
        if self.transcript is not None:
            d["transcript"] = self.transcript
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MediaBundleRef":
        return cls(
            frames_dir=d.get("frames_dir", ""),
            audio=d.get("audio", ""),
            transcript=d.get("transcript"),
        )


@dataclass(frozen=True)
class FunnyMoment:
    """One annotated funny moment: interval plus a free-text explanation."""

    start_s: float
    end_s: float
    explanation: str

    def to_dict(self) -> dict:
        return {
            "start_s": self.start_s,
            "end_s": self.end_s,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FunnyMoment":
        return cls(
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            explanation=str(d.get("explanation", "")),
        )


@dataclass(frozen=True)
class Utterance:
    start_s: float
    end_s: float
    text: str
    speaker: Optional[str] = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "start_s": self.start_s,
            "end_s": self.end_s,
            "text": self.text,
        }
        if self.speaker is not None:
            d["speaker"] = self.speaker
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Utterance":
        return cls(
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            text=str(d["text"]),
            speaker=d.get("speaker"),
        )


@dataclass(frozen=True)
class Transcript:
    """Timestamped speech. Utterances are sorted by start; overlap is allowed
    (crosstalk)."""

    utterances: tuple[Utterance, ...]
    language: str = "und"

    def __post_init__(self):
        starts = [u.start_s for u in self.utterances]
        if starts != sorted(starts):
            raise ValueError("utterances must be sorted by start_s")
        for u in self.utterances:
            if not (u.start_s < u.end_s):
                raise ValueError(f"utterance interval inverted: {u}")
            if not u.text:
                raise ValueError("utterance text must be non-empty")

    def to_dict(self) -> dict:
        return {
            "language": self.language,
            "utterances": [u.to_dict() for u in self.utterances],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        return cls(
            utterances=tuple(Utterance.from_dict(u) for u in d.get("utterances", [])),
            language=d.get("language", "und"),
        )


@dataclass(frozen=True)
class VideoRecord:
    id: str
    source_url: str
    duration_s: float
    media: MediaBundleRef
    state: str = "ingested"
    reject_stage: Optional[str] = None
    reject_criterion: Optional[str] = None
    annotations: tuple[FunnyMoment, ...] = ()
    extra: dict = field(default_factory=dict, compare=True)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "id": self.id,
            "source_url": self.source_url,
            "duration_s": self.duration_s,
            "media": self.media.to_dict(),
            "annotations": [m.to_dict() for m in self.annotations],
            "state": self.state,
        }
        if self.reject_stage is not None:
            d["reject_stage"] = self.reject_stage
        if self.reject_criterion is not None:
            d["reject_criterion"] = self.reject_criterion
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VideoRecord":
        known = {
            "id",
            "source_url",
            "duration_s",
            "media",
            "annotations",
            "state",
            "reject_stage",
            "reject_criterion",
        }
        extra = {k: v for k, v in d.items() if k not in known}
        return cls(
            id=str(d["id"]),
            source_url=str(d.get("source_url", "")),
            duration_s=float(d["duration_s"]),
            media=MediaBundleRef.from_dict(d.get("media", {})),
            state=d.get("state", "ingested"),
            reject_stage=d.get("reject_stage"),
            reject_criterion=d.get("reject_criterion"),
            annotations=tuple(
                FunnyMoment.from_dict(m) for m in d.get("annotations", [])
            ),
            extra=extra,
        )


def transition(record: VideoRecord, new_state: str, *, stage: Optional[str] = None,
               criterion: Optional[str] = None) -> VideoRecord:
    """Return a copy of `record` moved to `new_state`, enforcing pipeline order."""
    if new_state not in STATES:
        raise StateError(f"unknown state {new_state!r}")
    if new_state not in _ALLOWED_TRANSITIONS.get(record.state, set()):
        raise StateError(
            f"record {record.id}: illegal transition {record.state} -> {new_state}"
        )
    if new_state == "filtered_rejected" and stage is None:
        raise StateError("filtered_rejected requires the rejecting stage")
    if new_state == "triage_rejected" and criterion is None:
        raise StateError("triage_rejected requires a safety criterion")
    return replace(record, state=new_state, reject_stage=stage,
                   reject_criterion=criterion)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

MAX_MOMENTS = 3
DEFAULT_DURATION_WARN_S = 30.0


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = "error"  # "error" or "warning"


def validate_annotations(record: VideoRecord,
                         duration_warn_s: float = DEFAULT_DURATION_WARN_S
                         ) -> list[Violation]:
    """Check a record's annotations against the schema invariants.

    Returns violations rather than raising; an empty error-severity set means
    the record is well-formed. Long durations produce a warning, not an error.
    """
    out: list[Violation] = []
    if record.duration_s <= 0:
        out.append(Violation("nonpositive_duration",
                             f"{record.id}: duration_s must be > 0"))
    if len(record.annotations) > MAX_MOMENTS:
        out.append(Violation(
            "moment_count_exceeded",
            f"{record.id}: {len(record.annotations)} moments, cap is {MAX_MOMENTS}",
        ))
    for i, m in enumerate(record.annotations):
        if m.end_s <= m.start_s:
            out.append(Violation(
                "inverted_interval",
                f"{record.id}: moment {i} has end_s <= start_s "
                f"({m.start_s}, {m.end_s})",
            ))
        elif m.start_s < 0 or m.end_s > record.duration_s:
            out.append(Violation(
                "out_of_bounds",
                f"{record.id}: moment {i} [{m.start_s}, {m.end_s}] outside "
                f"[0, {record.duration_s}]",
            ))
        if not m.explanation.strip():
            out.append(Violation(
                "empty_explanation", f"{record.id}: moment {i} has no explanation"
            ))
    if record.duration_s > duration_warn_s:
        out.append(Violation(
            "duration_above_cap",
            f"{record.id}: duration {record.duration_s}s exceeds the "
            f"{duration_warn_s}s guideline",
            severity="warning",
        ))
    return out


_BECAUSE_RE = re.compile(r"\bbecause\b|\bsince\b|\bdue to\b", re.IGNORECASE)


def lint_explanation_format(record: VideoRecord) -> list[Violation]:
    """Optional lint: flag explanations lacking a justification clause.

    Advisory only; never a hard rejection.
    """
    out = []
    for i, m in enumerate(record.annotations):
        if m.explanation.strip() and not _BECAUSE_RE.search(m.explanation):
            out.append(Violation(
                "missing_justification",
                f"{record.id}: moment {i} explanation has no "
                "'because'-style clause",
                severity="warning",
            ))
    return out


# ---------------------------------------------------------------------------
# Manifest I/O (JSON lines, one record per line, unknown fields preserved)
# ---------------------------------------------------------------------------

def ingest_manifest(path: str | Path) -> list[VideoRecord]:
    """Read a line-delimited manifest into validated records.

    Raises ManifestError with the offending line number on parse failures,
    invariant violations, or duplicate ids.
    """
    records: list[VideoRecord] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"malformed record: {exc.msg}", lineno) from exc
            try:
                record = VideoRecord.from_dict(data)
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"invalid record: {exc}", lineno) from exc
            if record.id in seen:
                raise ManifestError(
                    f"duplicate id {record.id!r} (first seen on line "
                    f"{seen[record.id]})",
                    lineno,
                )
            errors = [v for v in validate_annotations(record)
                      if v.severity == "error"]
            if errors:
                raise ManifestError(
                    f"record {record.id!r} invalid: {errors[0].message}", lineno
                )
            seen[record.id] = lineno
            records.append(record)
    return records


def write_manifest(records: Iterable[VideoRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StatsReport:
    video_count: int
    explanation_count: int
    by_moments: dict[int, int]
    mean_explanation_words: float

    def to_dict(self) -> dict:
        return {
            "video_count": self.video_count,
            "explanation_count": self.explanation_count,
            "by_moments": dict(self.by_moments),
            "mean_explanation_words": self.mean_explanation_words,
        }


def corpus_stats(records: list[VideoRecord]) -> StatsReport:
    by_moments = Counter(len(r.annotations) for r in records)
    by_moments.pop(0, None)
    word_counts = [
        len(m.explanation.split())
        for r in records
        for m in r.annotations
    ]
    n_expl = sum(len(r.annotations) for r in records)
    mean_words = sum(word_counts) / len(word_counts) if word_counts else 0.0
    return StatsReport(
        video_count=len(records),
        explanation_count=n_expl,
        by_moments=dict(sorted(by_moments.items())),
        mean_explanation_words=mean_words,
    )


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitAssignment:
    scheme: str  # "kfold5" or "tvt_811"
    seed: int
    fold_of: dict  # id -> fold index (kfold) or partition label (tvt)

    def folds(self) -> dict:
        """Invert fold_of: fold -> sorted list of ids."""
        out: dict[Any, list[str]] = {}
        for vid, fold in self.fold_of.items():
            out.setdefault(fold, []).append(vid)
        return {k: sorted(v) for k, v in out.items()}

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "seed": self.seed,
                "assignment": dict(self.fold_of)}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitAssignment":
        return cls(scheme=d["scheme"], seed=int(d["seed"]),
                   fold_of=dict(d["assignment"]))


def make_kfold_splits(ids: list[str], k: int = 5, seed: int = 0) -> SplitAssignment:
    """Shuffle ids and deal them into k folds whose sizes differ by at most 1.

    Rotation convention for downstream use: iteration i tests fold i,
    validates fold (i+1) mod k, trains on the rest.
    """
    if len(ids) < k:
        raise ValueError(f"need at least {k} ids, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    shuffled = list(ids)
    Random(seed).shuffle(shuffled)
    fold_of = {vid: i % k for i, vid in enumerate(shuffled)}
    return SplitAssignment(scheme=f"kfold{k}", seed=seed, fold_of=fold_of)


def kfold_rotation(assignment: SplitAssignment, iteration: int,
                   k: int = 5) -> dict:
    """Return the train/val/test id lists for one rotation iteration."""
    folds = assignment.folds()
    test = folds.get(iteration, [])
    val = folds.get((iteration + 1) % k, [])
    train = sorted(
        vid for vid, f in assignment.fold_of.items()
        if f != iteration and f != (iteration + 1) % k
    )
    return {"train": train, "val": val, "test": test}


def make_tvt_split(ids: list[str], ratios: tuple[int, int, int] = (8, 1, 1),
                   seed: int = 0) -> SplitAssignment:
    """8:1:1-style partition; the remainder after flooring goes to training."""
    if len(ids) < sum(ratios):
        raise ValueError(f"need at least {sum(ratios)} ids, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    total = sum(ratios)
    n = len(ids)
    n_val = n * ratios[1] // total
    n_test = n * ratios[2] // total
    shuffled = list(ids)
    Random(seed).shuffle(shuffled)
    fold_of: dict[str, str] = {}
    for vid in shuffled[:n_val]:
        fold_of[vid] = "val"
    for vid in shuffled[n_val:n_val + n_test]:
        fold_of[vid] = "test"
    for vid in shuffled[n_val + n_test:]:
        fold_of[vid] = "train"
    return SplitAssignment(scheme="tvt_811", seed=seed, fold_of=fold_of)


def write_split(assignment: SplitAssignment, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(assignment.to_dict(), fh, indent=2)


def read_split(path: str | Path) -> SplitAssignment:
    with open(path, encoding="utf-8") as fh:
        return SplitAssignment.from_dict(json.load(fh))
