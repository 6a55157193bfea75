"""Deterministic scripted backends for tests and offline runs.

A fixture file maps request keys to canned responses, one section per
backend kind. Media references are matched by full string, file name, or
file stem, with "*" as a catch-all. Completion replies can additionally be
matched by prompt hash or by substring rules, since real prompts are built
at runtime and exact keys would be brittle.

The same fixture drives both the in-process ScriptedTransport and the
HTTP mock server (see create_mock_app), so unit tests and end-to-end runs
replay identical responses.
"""

import hashlib
import json
import math
from pathlib import Path
from random import Random
from typing import Any, Optional

from .protocol import KINDS, ProtocolError, TransportError, Transport

DEFAULT_EMBED_DIM = 8


def load_fixture(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def pseudo_embedding(text: str, dim: int = DEFAULT_EMBED_DIM) -> list[float]:
    """Deterministic unit vector derived from the text content.

    Identical texts map to identical vectors; distinct texts to (almost
    surely) distinct ones. Used as the mock embedder's fallback for texts
    not scripted explicitly.
    """
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8],
                          "big")
    rng = Random(seed)
    v = [rng.gauss(0.0, 1.0) for _ in range(dim)]
    norm = math.sqrt(sum(x * x for x in v)) or 1.0
    return [x / norm for x in v]


def _lookup(table: dict, ref: str):
    """Fixture lookup by full ref, file name, file stem, then catch-all."""
    for key in (ref, Path(ref).name, Path(ref).stem, "*"):
        if key in table:
            return table[key]
    raise ProtocolError(f"no fixture entry for {ref!r}")


class ScriptedTransport:
    """Pure transport replaying a fixture: same request, same response."""

    def __init__(self, fixture: dict):
        self.fixture = fixture

    def call(self, kind: str, payload: dict) -> Any:
        if kind not in KINDS:
            raise ProtocolError(f"unknown backend kind {kind!r}")
        handler = getattr(self, f"_{kind}")
        return handler(payload)

    def _asr(self, payload: dict) -> dict:
        return _lookup(self.fixture.get("asr", {}), payload["audio"])

    def _caption(self, payload: dict) -> dict:
        table = self.fixture.get("caption", {})
        return {"captions": [list(_lookup(table, f))
                             for f in payload["frames"]]}

    def _retrieve(self, payload: dict) -> dict:
        table = self.fixture.get("retrieve", {})
        scores_by_text = _lookup(table, payload["segment"])
        return {"scores": [float(scores_by_text.get(c, 0.0))
                           for c in payload["candidates"]]}

    def _audiotag(self, payload: dict) -> dict:
        return {"tags": _lookup(self.fixture.get("audiotag", {}),
                                payload["audio"])}

    def _embed(self, payload: dict) -> dict:
        table = self.fixture.get("embed", {})
        dim = int(self.fixture.get("embed_dim", DEFAULT_EMBED_DIM))
        vectors = [table.get(t) or pseudo_embedding(t, dim)
                   for t in payload["texts"]]
        return {"vectors": vectors}

    def _complete(self, payload: dict) -> dict:
        prompt = payload["prompt"]
        table = self.fixture.get("complete", {})
        if prompt in table:
            return {"text": table[prompt]}
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        if digest in table:
            return {"text": table[digest]}
        for rule in self.fixture.get("complete_rules", []):
            needles = rule.get("contains", [])
            if all(n in prompt for n in needles):
                return {"text": rule["reply"]}
        raise ProtocolError("no completion scripted for this prompt")

    def _localize(self, payload: dict) -> dict:
        cands = _lookup(self.fixture.get("localize", {}), payload["query"])
        return {"candidates": cands}


class FlakyTransport:
    """Fails the first `failures` calls with a TransportError, then delegates.

    Exercises the client retry policy in tests.
    """

    def __init__(self, inner: Transport, failures: int):
        self.inner = inner
        self.failures = failures
        self.calls = 0

    def call(self, kind: str, payload: dict) -> Any:
        self.calls += 1
        if self.calls <= self.failures:
            raise TransportError(f"scripted failure {self.calls}")
        return self.inner.call(kind, payload)


def create_mock_app(fixture: dict):
    """FastAPI app replaying a fixture over the backend wire protocol."""
    from fastapi import FastAPI, Request

    transport = ScriptedTransport(fixture)
    app = FastAPI(title="vidhumor mock backend")

    @app.post("/{kind}")
    async def handle(kind: str, request: Request):
        try:
            payload = await request.json()
        except Exception:
            return {"ok": False, "error": "invalid JSON body"}
        try:
            data = transport.call(kind, payload)
        except ProtocolError as exc:
            return {"ok": False, "error": str(exc)}
        return {"ok": True, "data": data}

    return app


def serve_mock(fixture_path: str | Path, port: int,
               host: str = "127.0.0.1") -> None:
    """Blocking mock-backend server over a fixture file."""
    import uvicorn

    app = create_mock_app(load_fixture(fixture_path))
    uvicorn.run(app, host=host, port=port, log_level="warning")
