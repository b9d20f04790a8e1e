"""Keep only events whose sender-recipient relation is rare."""

from __future__ import annotations

from collections import Counter
from typing import NamedTuple, Sequence

from .events import EmailEvent

# Key components are joined with a control character so "a"+"bc" can never
# alias "ab"+"c".
KEY_SEPARATOR = "\x1f"


class RelationKey(NamedTuple):
    src_ip: str
    direction: str
    mail_from: str
    mail_to: str

    def joined(self) -> str:
        return KEY_SEPARATOR.join(self)


def relation_key(event: EmailEvent) -> RelationKey:
    return RelationKey(event.src_ip, event.direction, event.mail_from, event.mail_to)


def select_rare(events: Sequence[EmailEvent], threshold: int = 2) -> list[EmailEvent]:
    """Events whose relation key occurs at most `threshold` times within
    `events`, preserving input order. Counting happens over the given
    (novelty-flagged) set only. threshold 0 selects nothing.
    """
    counts = Counter(relation_key(e) for e in events)
    return [e for e in events if counts[relation_key(e)] <= threshold]
