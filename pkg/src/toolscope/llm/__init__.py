"""Chat-model gateway: prompt templates, reply parsing, HTTP client and the offline mock."""

from .client import ChatBackend, ChatRequest, HttpChatClient, chat
from .parsing import MERGE_BAD, MERGE_OK, Verdict, parse_agent_reply, parse_classifier_reply, parse_merger_reply, parse_verdict
from .prompts import TEMPLATE_IDS, render, template_slots, template_text

__all__ = [
    "ChatBackend",
    "ChatRequest",
    "HttpChatClient",
    "chat",
    "MERGE_BAD",
    "MERGE_OK",
    "Verdict",
    "parse_agent_reply",
    "parse_classifier_reply",
    "parse_merger_reply",
    "parse_verdict",
    "TEMPLATE_IDS",
    "render",
    "template_slots",
    "template_text",
]
