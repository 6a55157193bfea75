import json
import threading

import pytest
from fastapi.testclient import TestClient

from conftest import make_record
from vidhumor.filtering import SAFETY_CRITERIA, FilterVerdict
from vidhumor.service import CorpusStore, create_app


def accepted_records(n):
    return [make_record(f"v{i}", state="triage_pending") for i in range(n)]


def store_with_queue(n=3, log_path=None):
    return CorpusStore(accepted_records(n), log_path=log_path)


def client_for(store, **kwargs):
    return TestClient(create_app(store, **kwargs))


class TestQueue:
    def test_next_returns_first_pending(self):
        client = client_for(store_with_queue())
        body = client.get("/api/triage/next").json()
        assert body["pending"] == 3
        assert body["reviewed"] == 0
        assert body["next"]["video_id"] == "v0"

    def test_empty_queue(self):
        store = CorpusStore([make_record("v0", state="ingested")])
        body = client_for(store).get("/api/triage/next").json()
        assert body["pending"] == 0
        assert body["next"] is None

    def test_next_advances_after_verdict(self):
        client = client_for(store_with_queue())
        client.post("/api/triage/v0/verdict",
                    json={"decision": "keep", "reviewer": "alice"})
        body = client.get("/api/triage/next").json()
        assert body["next"]["video_id"] == "v1"
        assert (body["pending"], body["reviewed"]) == (2, 1)

    def test_filter_detail_surfaces(self):
        store = CorpusStore([make_record("v0")])
        store.apply_filter_verdict(
            FilterVerdict("v0", "accept", "d_divergence", "similarity=0.120000")
        )
        store.enqueue_accepted()
        body = client_for(store).get("/api/triage/next").json()
        assert body["next"]["filter_detail"] == "similarity=0.120000"

    def test_media_url_present(self):
        client = client_for(store_with_queue())
        assert client.get("/api/triage/next").json()["next"]["media"]["url"] \
            == "/media/v0"


class TestCriteria:
    def test_lists_all_five(self):
        body = client_for(store_with_queue()).get("/api/triage/criteria").json()
        assert body["criteria"] == list(SAFETY_CRITERIA)
        assert len(body["criteria"]) == 5


class TestVerdicts:
    def test_keep_publishes(self):
        client = client_for(store_with_queue())
        resp = client.post("/api/triage/v0/verdict",
                           json={"decision": "keep", "reviewer": "alice"})
        assert resp.status_code == 200
        assert resp.json()["state"] == "published"

    def test_remove_with_criterion(self):
        client = client_for(store_with_queue())
        resp = client.post("/api/triage/v1/verdict", json={
            "decision": "remove", "criterion": "obscenity",
            "reviewer": "bob"})
        assert resp.status_code == 200
        assert resp.json() == {"video_id": "v1", "state": "triage_rejected",
                               "criterion": "obscenity"}

    def test_remove_without_criterion_is_422(self):
        client = client_for(store_with_queue())
        resp = client.post("/api/triage/v0/verdict",
                           json={"decision": "remove", "reviewer": "bob"})
        assert resp.status_code == 422

    def test_keep_with_criterion_is_422(self):
        client = client_for(store_with_queue())
        resp = client.post("/api/triage/v0/verdict", json={
            "decision": "keep", "criterion": "obscenity", "reviewer": "bob"})
        assert resp.status_code == 422

    def test_unknown_criterion_is_422(self):
        client = client_for(store_with_queue())
        resp = client.post("/api/triage/v0/verdict", json={
            "decision": "remove", "criterion": "boring", "reviewer": "bob"})
        assert resp.status_code == 422

    def test_unknown_video_is_404(self):
        client = client_for(store_with_queue())
        resp = client.post("/api/triage/zz/verdict",
                           json={"decision": "keep", "reviewer": "bob"})
        assert resp.status_code == 404

    def test_double_verdict_is_409(self):
        client = client_for(store_with_queue())
        payload = {"decision": "keep", "reviewer": "alice"}
        assert client.post("/api/triage/v0/verdict",
                           json=payload).status_code == 200
        assert client.post("/api/triage/v0/verdict",
                           json=payload).status_code == 409

    def test_watched_fully_recorded(self):
        store = store_with_queue()
        client = client_for(store)
        client.post("/api/triage/v0/verdict", json={
            "decision": "keep", "reviewer": "alice", "watched_fully": True})
        assert store.safety_log()[0].watched_fully is True


class TestStats:
    def test_states_and_counts(self):
        store = store_with_queue(3)
        client = client_for(store)
        client.post("/api/triage/v0/verdict",
                    json={"decision": "keep", "reviewer": "a"})
        client.post("/api/triage/v1/verdict", json={
            "decision": "remove", "criterion": "shocking", "reviewer": "a"})
        body = client.get("/api/stats").json()
        assert body["by_state"] == {"published": 1, "triage_rejected": 1,
                                    "triage_pending": 1}
        assert (body["pending"], body["reviewed"]) == (1, 2)
        assert body["corpus"]["video_count"] == 3


class TestReports:
    def test_latest_by_mtime(self, tmp_path):
        import os
        old = tmp_path / "a.json"
        new = tmp_path / "b.json"
        old.write_text('{"which": "old"}')
        new.write_text('{"which": "new"}')
        os.utime(old, (1000, 1000))
        os.utime(new, (2000, 2000))
        client = client_for(store_with_queue(), reports_dir=tmp_path)
        assert client.get("/api/reports/latest").json() == {"which": "new"}

    def test_no_reports_is_404(self, tmp_path):
        client = client_for(store_with_queue(), reports_dir=tmp_path)
        assert client.get("/api/reports/latest").status_code == 404

    def test_no_reports_dir_is_404(self):
        client = client_for(store_with_queue())
        assert client.get("/api/reports/latest").status_code == 404


class TestDurability:
    def test_replay_reproduces_queue(self, tmp_path):
        log = tmp_path / "verdicts.log"
        store = CorpusStore([make_record(f"v{i}") for i in range(3)],
                            log_path=log)
        for i in range(3):
            store.apply_filter_verdict(
                FilterVerdict(f"v{i}", "accept", "d_divergence", ""))
        store.enqueue_accepted()
        client = client_for(store)
        client.post("/api/triage/v0/verdict",
                    json={"decision": "keep", "reviewer": "alice"})
        client.post("/api/triage/v1/verdict", json={
            "decision": "remove", "criterion": "obscenity", "reviewer": "bob"})

        reborn = CorpusStore([make_record(f"v{i}") for i in range(3)],
                             log_path=log)
        assert [r.id for r in reborn.pending()] == ["v2"]
        assert reborn.reviewed_count() == 2
        assert reborn.get("v0").state == "published"
        assert reborn.get("v1").reject_criterion == "obscenity"

    def test_log_is_append_only_jsonl(self, tmp_path):
        log = tmp_path / "verdicts.log"
        store = store_with_queue(2, log_path=log)
        client = client_for(store)
        client.post("/api/triage/v0/verdict",
                    json={"decision": "keep", "reviewer": "alice"})
        client.post("/api/triage/v1/verdict",
                    json={"decision": "keep", "reviewer": "alice"})
        lines = [json.loads(ln) for ln in log.read_text().splitlines()]
        assert [e["type"] for e in lines] == ["safety", "safety"]
        assert lines[0]["verdict"]["video_id"] == "v0"

    def test_restart_rejects_duplicate(self, tmp_path):
        log = tmp_path / "verdicts.log"
        client = client_for(store_with_queue(1, log_path=log))
        client.post("/api/triage/v0/verdict",
                    json={"decision": "keep", "reviewer": "alice"})
        reborn = client_for(store_with_queue(1, log_path=log))
        resp = reborn.post("/api/triage/v0/verdict",
                           json={"decision": "keep", "reviewer": "bob"})
        assert resp.status_code == 409


class TestConcurrency:
    def test_racing_verdicts_one_winner(self):
        store = store_with_queue(1)
        client = client_for(store)
        codes = []
        barrier = threading.Barrier(8)

        def post():
            barrier.wait()
            resp = client.post("/api/triage/v0/verdict",
                               json={"decision": "keep", "reviewer": "r"})
            codes.append(resp.status_code)

        threads = [threading.Thread(target=post) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(codes) == [200] + [409] * 7
        assert store.reviewed_count() == 1


class TestTranscriptPreview:
    def test_preview_truncates_to_five(self, tmp_path):
        utts = [{"start_s": float(i), "end_s": i + 0.5, "text": f"line {i}"}
                for i in range(8)]
        path = tmp_path / "t.json"
        path.write_text(json.dumps({"language": "en", "utterances": utts}))
        import dataclasses
        from vidhumor.corpus import MediaBundleRef
        record = dataclasses.replace(
            make_record("v0", state="triage_pending"),
            media=MediaBundleRef(frames_dir="f", audio="a",
                                 transcript=str(path)),
        )
        client = client_for(CorpusStore([record]))
        preview = client.get("/api/triage/next").json()["next"][
            "transcript_preview"]
        assert len(preview) == 5
        assert preview[0]["text"] == "line 0"

    def test_missing_transcript_is_null(self):
        client = client_for(store_with_queue(1))
        body = client.get("/api/triage/next").json()
        assert body["next"]["transcript_preview"] is None
