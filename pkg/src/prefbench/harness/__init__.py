"""Experiment driver: prompt construction, chat backends, sessions, transcripts."""

from .backends import (
    API_KEY_ENV,
    BackendConfig,
    ChatBackend,
    HttpChatBackend,
    MockDecisionBackend,
    make_backend,
)
from .parsing import ParsedAllocation, parse_allocations
from .prompts import ChatMessage, Treatment, TreatmentKind, build_prompt
from .sessions import (
    SESSION_ROUNDS,
    RequestRecord,
    Transcript,
    TranscriptWriter,
    load_transcript,
    run_decision_session,
    run_recommendation_session,
    transcript_to_dataset,
)

__all__ = [
    "API_KEY_ENV",
    "BackendConfig",
    "ChatBackend",
    "ChatMessage",
    "HttpChatBackend",
    "MockDecisionBackend",
    "ParsedAllocation",
    "RequestRecord",
    "SESSION_ROUNDS",
    "Transcript",
    "TranscriptWriter",
    "Treatment",
    "TreatmentKind",
    "build_prompt",
    "load_transcript",
    "make_backend",
    "parse_allocations",
    "run_decision_session",
    "run_recommendation_session",
    "transcript_to_dataset",
]
