from .protocol import (
    KINDS,
    BackendEndpoint,
    BackendError,
    CompletionRequest,
    MomentCandidate,
    ProtocolError,
    RetryPolicy,
    TransportError,
    HttpTransport,
)
from .client import (
    BackendClient,
    DETECTION_TEMPERATURE,
    EXPLANATION_TEMPERATURE,
    detect_prompt_request,
    explain_prompt_request,
)
from .mock import (
    FlakyTransport,
    ScriptedTransport,
    create_mock_app,
    load_fixture,
    pseudo_embedding,
    serve_mock,
)
from .fallback import fallback_localize

__all__ = [
    "KINDS",
    "BackendEndpoint",
    "BackendError",
    "BackendClient",
    "CompletionRequest",
    "MomentCandidate",
    "ProtocolError",
    "RetryPolicy",
    "TransportError",
    "HttpTransport",
    "ScriptedTransport",
    "FlakyTransport",
    "create_mock_app",
    "load_fixture",
    "pseudo_embedding",
    "serve_mock",
    "fallback_localize",
    "DETECTION_TEMPERATURE",
    "EXPLANATION_TEMPERATURE",
    "detect_prompt_request",
    "explain_prompt_request",
]
