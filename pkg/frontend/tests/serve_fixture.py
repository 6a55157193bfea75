"""Serve the triage API over a 5-item in-memory queue, for UI tests.

Usage: python3 serve_fixture.py <port>
"""

import sys

import uvicorn

from vidhumor.corpus import MediaBundleRef, VideoRecord
from vidhumor.service import CorpusStore, create_app


def records():
    return [
        VideoRecord(
            id=f"v{i}",
            source_url=f"https://example.com/v{i}",
            duration_s=4.0,
            media=MediaBundleRef(frames_dir=f"media/v{i}/frames",
                                 audio=f"media/v{i}/v{i}.wav"),
            state="triage_pending",
        )
        for i in range(5)
    ]


def main():
    port = int(sys.argv[1])
    app = create_app(CorpusStore(records()))
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="error")


if __name__ == "__main__":
    main()
