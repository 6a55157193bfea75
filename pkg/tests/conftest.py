import json

import pytest

from vidhumor.backends import BackendClient, RetryPolicy, ScriptedTransport
from vidhumor.corpus import FunnyMoment, MediaBundleRef, VideoRecord


def make_record(vid="v1", duration=10.0, moments=(), state="ingested",
                **extra):
    return VideoRecord(
        id=vid,
        source_url=f"https://example.com/{vid}",
        duration_s=duration,
        media=MediaBundleRef(frames_dir=f"media/{vid}/frames",
                             audio=f"media/{vid}/{vid}.wav"),
        state=state,
        annotations=tuple(FunnyMoment(*m) for m in moments),
        extra=dict(extra),
    )


def scripted_client(fixture, max_attempts=3):
    return BackendClient(
        ScriptedTransport(fixture),
        retry=RetryPolicy(max_attempts=max_attempts, backoff_s=0.0),
    )


@pytest.fixture
def tmp_manifest(tmp_path):
    def write(records, name="manifest.jsonl"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                line = r if isinstance(r, str) else json.dumps(r.to_dict())
                fh.write(line + "\n")
        return path

    return write
