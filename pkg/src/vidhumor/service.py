"""REST service for human safety triage and report browsing.

All state mutations funnel through CorpusStore under one lock; verdicts go
to an append-only JSONL log that is replayed at startup, so restarting the
service reproduces the exact queue state. The manifest itself is never
rewritten in place.
"""

import json
import threading
from pathlib import Path
from typing import Optional

from .corpus import (
    StateError,
    Transcript,
    VideoRecord,
    corpus_stats,
)
from .filtering import (
    SAFETY_CRITERIA,
    FilterVerdict,
    SafetyVerdict,
    apply_verdict,
    triage_enqueue,
    triage_record,
)


class CorpusStore:
    """Single-writer, multi-reader record store with a replayable audit log."""

    def __init__(self, records: list[VideoRecord],
                 log_path: Optional[str | Path] = None):
        self._lock = threading.Lock()
        self._order = [r.id for r in records]
        self._records = {r.id: r for r in records}
        self._filter_verdicts: dict[str, FilterVerdict] = {}
        self._safety_log: list[SafetyVerdict] = []
        self.log_path = Path(log_path) if log_path else None
        if self.log_path and self.log_path.exists():
            self._replay()

    def _replay(self) -> None:
        assert self.log_path is not None
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                if entry["type"] == "filter":
                    v = FilterVerdict.from_dict(entry["verdict"])
                    self._apply_filter_locked(v, persist=False)
                elif entry["type"] == "enqueue":
                    rid = entry["video_id"]
                    self._records[rid] = triage_enqueue(self._records[rid])
                elif entry["type"] == "safety":
                    v = SafetyVerdict.from_dict(entry["verdict"])
                    self._apply_safety_locked(v, persist=False)

    def _append_log(self, entry: dict) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")

    # -- record access -----------------------------------------------------

    def get(self, video_id: str) -> VideoRecord:
        return self._records[video_id]

    def all_records(self) -> list[VideoRecord]:
        return [self._records[i] for i in self._order]

    # -- filter verdicts ---------------------------------------------------

    def _apply_filter_locked(self, verdict: FilterVerdict,
                             persist: bool = True) -> VideoRecord:
        record = apply_verdict(self._records[verdict.video_id], verdict)
        self._records[verdict.video_id] = record
        self._filter_verdicts[verdict.video_id] = verdict
        if persist:
            self._append_log({"type": "filter", "verdict": verdict.to_dict()})
        return record

    def apply_filter_verdict(self, verdict: FilterVerdict) -> VideoRecord:
        with self._lock:
            return self._apply_filter_locked(verdict)

    def filter_verdict(self, video_id: str) -> Optional[FilterVerdict]:
        return self._filter_verdicts.get(video_id)

    # -- triage ------------------------------------------------------------

    def enqueue_accepted(self) -> int:
        """Move every filter-accepted record into the triage queue."""
        moved = 0
        with self._lock:
            for rid in self._order:
                if self._records[rid].state == "filter_accepted":
                    self._records[rid] = triage_enqueue(self._records[rid])
                    self._append_log({"type": "enqueue", "video_id": rid})
                    moved += 1
        return moved

    def _apply_safety_locked(self, verdict: SafetyVerdict,
                             persist: bool = True) -> VideoRecord:
        record = triage_record(self._records[verdict.video_id], verdict)
        self._records[verdict.video_id] = record
        self._safety_log.append(verdict)
        if persist:
            self._append_log({"type": "safety", "verdict": verdict.to_dict()})
        return record

    def record_safety_verdict(self, verdict: SafetyVerdict) -> VideoRecord:
        with self._lock:
            return self._apply_safety_locked(verdict)

    def pending(self) -> list[VideoRecord]:
        return [self._records[i] for i in self._order
                if self._records[i].state == "triage_pending"]

    def reviewed_count(self) -> int:
        return sum(1 for r in self._records.values()
                   if r.state in ("published", "triage_rejected"))

    def safety_log(self) -> list[SafetyVerdict]:
        return list(self._safety_log)


def _transcript_preview(record: VideoRecord,
                        limit: int = 5) -> Optional[list[dict]]:
    path = record.media.transcript
    if not path or not Path(path).exists():
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            transcript = Transcript.from_dict(json.load(fh))
    except (ValueError, KeyError):
        return None
    return [u.to_dict() for u in transcript.utterances[:limit]]


def create_app(store: CorpusStore, reports_dir: Optional[str | Path] = None,
               media_root: Optional[str | Path] = None,
               static_dir: Optional[str | Path] = None):
    from fastapi import FastAPI, HTTPException
    from fastapi.staticfiles import StaticFiles
    from pydantic import BaseModel

    app = FastAPI(title="vidhumor triage service")

    class VerdictBody(BaseModel):
        decision: str
        criterion: Optional[str] = None
        reviewer: str
        watched_fully: Optional[bool] = None

    @app.get("/api/triage/criteria")
    def criteria():
        return {"criteria": list(SAFETY_CRITERIA)}

    @app.get("/api/triage/next")
    def triage_next():
        pending = store.pending()
        view: dict = {
            "pending": len(pending),
            "reviewed": store.reviewed_count(),
            "next": None,
        }
        if pending:
            record = pending[0]
            fv = store.filter_verdict(record.id)
            view["next"] = {
                "video_id": record.id,
                "media": {
                    "frames_dir": record.media.frames_dir,
                    "audio": record.media.audio,
                    "url": f"/media/{record.id}",
                },
                "duration_s": record.duration_s,
                "transcript_preview": _transcript_preview(record),
                "filter_detail": fv.detail if fv else None,
            }
        return view

    @app.post("/api/triage/{video_id}/verdict")
    def post_verdict(video_id: str, body: VerdictBody):
        try:
            verdict = SafetyVerdict.now(
                video_id=video_id,
                decision=body.decision,
                reviewer=body.reviewer,
                criterion=body.criterion,
                watched_fully=body.watched_fully,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            record = store.record_safety_verdict(verdict)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown video {video_id!r}")
        except StateError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {
            "video_id": record.id,
            "state": record.state,
            "criterion": record.reject_criterion,
        }

    @app.get("/api/stats")
    def stats():
        records = store.all_records()
        by_state: dict[str, int] = {}
        for r in records:
            by_state[r.state] = by_state.get(r.state, 0) + 1
        return {
            "corpus": corpus_stats(records).to_dict(),
            "by_state": by_state,
            "pending": len(store.pending()),
            "reviewed": store.reviewed_count(),
        }

    @app.get("/api/reports/latest")
    def latest_report():
        if reports_dir is None:
            raise HTTPException(status_code=404, detail="no reports directory")
        candidates = sorted(
            Path(reports_dir).glob("*.json"),
            key=lambda p: p.stat().st_mtime,
        )
        if not candidates:
            raise HTTPException(status_code=404, detail="no reports yet")
        with open(candidates[-1], encoding="utf-8") as fh:
            return json.load(fh)

    if media_root is not None and Path(media_root).is_dir():
        app.mount("/media", StaticFiles(directory=str(media_root)),
                  name="media")
    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")

    return app
