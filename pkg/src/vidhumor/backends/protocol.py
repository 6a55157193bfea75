"""Wire protocol shared by every model backend.

Every backend kind (asr, caption, retrieve, audiotag, embed, complete,
localize) is reached the same way: POST {base_url}/{kind} with a JSON body,
answered by an envelope {"ok": true, "data": ...} or
{"ok": false, "error": "..."}. Media is always passed by reference, never
inlined.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Protocol

import requests

KINDS = ("asr", "caption", "retrieve", "audiotag", "embed", "complete",
         "localize")


class BackendError(Exception):
    """Base class for backend failures."""


class TransportError(BackendError):
    """The backend could not be reached or did not answer in time.

    Transport errors are retryable and never produce curation verdicts.
    """


class ProtocolError(BackendError):
    """The backend answered, but the response violates the wire contract."""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_s: float = 0.5

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class BackendEndpoint:
    kind: str
    base_url: str
    timeout_s: float = 30.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.0
    max_sentences: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class MomentCandidate:
    start_s: float
    end_s: float
    score: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(
                f"candidate interval inverted: [{self.start_s}, {self.end_s}]"
            )


class Transport(Protocol):
    """One request to one backend kind; raises TransportError/ProtocolError."""

    def call(self, kind: str, payload: dict) -> Any:  # pragma: no cover
        ...


class HttpTransport:
    """POSTs JSON request bodies to per-kind HTTP endpoints."""

    def __init__(self, endpoints: dict[str, BackendEndpoint]):
        self.endpoints = endpoints
        self._session = requests.Session()

    def call(self, kind: str, payload: dict) -> Any:
        try:
            ep = self.endpoints[kind]
        except KeyError:
            raise ProtocolError(f"no endpoint configured for kind {kind!r}")
        url = f"{ep.base_url.rstrip('/')}/{kind}"
        try:
            resp = self._session.post(url, json=payload, timeout=ep.timeout_s)
        except requests.RequestException as exc:
            raise TransportError(f"{kind}: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"{kind}: server error {resp.status_code}")
        try:
            envelope = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{kind}: non-JSON response") from exc
        if not isinstance(envelope, dict) or "ok" not in envelope:
            raise ProtocolError(f"{kind}: missing response envelope")
        if not envelope["ok"]:
            raise ProtocolError(f"{kind}: {envelope.get('error', 'unknown error')}")
        return envelope.get("data")


def call_with_retry(transport: Transport, kind: str, payload: dict,
                    policy: RetryPolicy,
                    sleep=time.sleep) -> Any:
    """Retry transport-level failures up to policy.max_attempts tries."""
    last: TransportError | None = None
    for attempt in range(policy.max_attempts):
        try:
            return transport.call(kind, payload)
        except TransportError as exc:
            last = exc
            if attempt + 1 < policy.max_attempts and policy.backoff_s > 0:
                sleep(policy.backoff_s * (attempt + 1))
    assert last is not None
    raise last
