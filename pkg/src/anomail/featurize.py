"""Turn email events into the token documents the embedding trains on."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EmptyCorpus
from .events import Corpus, EmailEvent

# Unicode-aware: any run of non-alphanumeric characters (underscore included)
# separates tokens.
_NON_ALNUM = re.compile(r"[\W_]+", re.UNICODE)


@dataclass(frozen=True)
class TokenDocument:
    event_id: str
    tokens: tuple[str, ...]


def _slug(text: str) -> str:
    """Collapse free text to a single lowercase token: "X <x@a.com>" -> "x_x_a_com"."""
    parts = [p for p in _NON_ALNUM.split(text.lower()) if p]
    return "_".join(parts)


def subject_tokens(subject: str) -> list[str]:
    return [t for t in _NON_ALNUM.split(subject.lower()) if t]


def featurize(event: EmailEvent) -> TokenDocument:
    """Build the field-tagged token list for one event.

    Tagged tokens come first in a fixed order (direction, country, sender,
    slugged header From, slugged user agent), followed by the subject words.
    Prefixes keep the per-field vocabularies disjoint, so a subject word
    like "us" can never collide with a country token. Tags whose value
    slugs to nothing are dropped; direction and country are always present.
    """
    tokens = [
        "dir=" + event.direction,
        "country=" + event.src_country.lower(),
        "from=" + event.mail_from,
    ]
    hfrom = _slug(event.header_from)
    if hfrom:
        tokens.append("hfrom=" + hfrom)
    agent = _slug(event.user_agent)
    if agent:
        tokens.append("ua=" + agent)
    tokens.extend(subject_tokens(event.subject))
    return TokenDocument(event.event_id, tuple(tokens))


def featurize_corpus(corpus: Corpus) -> list[TokenDocument]:
    """One TokenDocument per event, preserving corpus order."""
    if not corpus.events:
        raise EmptyCorpus("cannot featurize an empty corpus")
    return [featurize(event) for event in corpus.events]
