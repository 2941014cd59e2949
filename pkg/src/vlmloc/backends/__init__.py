"""Pluggable model backends: HTTP chat endpoint, simulated oracle, replay."""

from .base import DEFAULT_MAX_RETRIES, QueryRequest, VlmBackend, query
from .openai_http import HttpBackendConfig, HttpChatBackend, RateLimiter
from .oracle import OracleBackend, OracleConfig, nearest_badge
from .replay import RecordingBackend, ReplayBackend, request_hash

__all__ = [
    "DEFAULT_MAX_RETRIES",
    "QueryRequest",
    "VlmBackend",
    "query",
    "HttpBackendConfig",
    "HttpChatBackend",
    "RateLimiter",
    "OracleBackend",
    "OracleConfig",
    "nearest_badge",
    "RecordingBackend",
    "ReplayBackend",
    "request_hash",
]
