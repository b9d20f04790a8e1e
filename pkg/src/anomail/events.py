"""Email event record, canonical JSONL codec, and raw header parsing."""

from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from email.utils import getaddresses
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InvalidValue, MalformedLine, MissingRequired, NoHeaders

DIRECTIONS = ("inbound", "outbound", "internal")

# Canonical JSONL field order; also the set of required fields minus the
# two that default to "".
_FIELDS = (
    "event_id",
    "timestamp",
    "src_ip",
    "src_country",
    "direction",
    "mail_from",
    "mail_to",
    "header_from",
    "subject",
    "user_agent",
)
_OPTIONAL = {"subject", "user_agent"}

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 instant into an aware UTC datetime (second precision)."""
    if not isinstance(text, str):
        raise InvalidValue(f"timestamp must be a string, got {type(text).__name__}")
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise InvalidValue(f"bad timestamp {text!r}: {exc}") from None
    if ts.tzinfo is None:
        raise InvalidValue(f"timestamp {text!r} lacks a UTC offset")
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class EmailEvent:
    """One normalized email header observation (the unit of detection).

    Addresses are lowercased on construction; header_from, subject and
    user_agent are kept raw because case carries signal. Timestamps are
    normalized to UTC at second precision.
    """

    event_id: str
    timestamp: datetime
    src_ip: str
    src_country: str
    direction: str
    mail_from: str
    mail_to: str
    header_from: str = ""
    subject: str = ""
    user_agent: str = ""

    def __post_init__(self):
        if not self.event_id:
            raise InvalidValue("event_id must be nonempty")
        if not isinstance(self.timestamp, datetime) or self.timestamp.tzinfo is None:
            raise InvalidValue("timestamp must be an aware datetime")
        object.__setattr__(
            self,
            "timestamp",
            self.timestamp.astimezone(timezone.utc).replace(microsecond=0),
        )
        try:
            ipaddress.ip_address(self.src_ip)
        except ValueError:
            raise InvalidValue(f"src_ip {self.src_ip!r} is not a valid IP address") from None
        country = self.src_country.upper()
        if not _COUNTRY_RE.match(country):
            raise InvalidValue(f"src_country {self.src_country!r} is not a 2-letter code")
        object.__setattr__(self, "src_country", country)
        if self.direction not in DIRECTIONS:
            raise InvalidValue(
                f"direction {self.direction!r} not one of {', '.join(DIRECTIONS)}"
            )
        if not self.mail_from:
            raise InvalidValue("mail_from must be nonempty")
        if not self.mail_to:
            raise InvalidValue("mail_to must be nonempty")
        object.__setattr__(self, "mail_from", self.mail_from.lower())
        object.__setattr__(self, "mail_to", self.mail_to.lower())


def serialize_event(event: EmailEvent) -> str:
    """Render one event as its canonical JSONL line (no trailing newline)."""
    record = {
        "event_id": event.event_id,
        "timestamp": format_timestamp(event.timestamp),
        "src_ip": event.src_ip,
        "src_country": event.src_country,
        "direction": event.direction,
        "mail_from": event.mail_from,
        "mail_to": event.mail_to,
        "header_from": event.header_from,
        "subject": event.subject,
        "user_agent": event.user_agent,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def parse_event_line(line: str) -> EmailEvent:
    """Parse one canonical JSONL line into a validated EmailEvent.

    Unknown fields are ignored; missing subject/user_agent default to "".
    Raises MalformedLine for structural problems and InvalidValue for
    field values that violate the event invariants.
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"not valid JSON: {exc}") from None
    if not isinstance(record, dict):
        raise MalformedLine("line is not a JSON object")
    values = {}
    for name in _FIELDS:
        if name in record:
            value = record[name]
            if not isinstance(value, str):
                raise MalformedLine(f"field {name!r} must be a string")
            values[name] = value
        elif name in _OPTIONAL:
            values[name] = ""
        else:
            raise MalformedLine(f"missing required field {name!r}")
    values["timestamp"] = parse_timestamp(values["timestamp"])
    return EmailEvent(**values)


@dataclass(frozen=True)
class Corpus:
    """An immutable, timestamp-sorted collection of events with unique ids."""

    events: tuple[EmailEvent, ...]
    source_label: str = ""

    def __post_init__(self):
        ordered = tuple(sorted(self.events, key=lambda e: e.timestamp))
        object.__setattr__(self, "events", ordered)
        seen: set[str] = set()
        for event in ordered:
            if event.event_id in seen:
                raise InvalidValue(f"duplicate event_id {event.event_id!r} in corpus")
            seen.add(event.event_id)

    def __len__(self) -> int:
        return len(self.events)


def read_corpus(path: str | Path, source_label: str | None = None) -> Corpus:
    """Read a JSONL event file. Blank lines are skipped; a bad line raises
    MalformedLine carrying its 1-based line number."""
    path = Path(path)
    events = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                events.append(parse_event_line(line))
            except (MalformedLine, InvalidValue) as exc:
                raise MalformedLine(str(exc), line_no=line_no) from None
    return Corpus(tuple(events), source_label if source_label is not None else str(path))


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for event in corpus.events:
            handle.write(serialize_event(event))
            handle.write("\n")


def _unfold(text: str) -> dict[str, str]:
    """Unfold RFC-5322 style headers into a {lowercase name: value} map.

    Continuation lines (leading whitespace) are joined with a single
    space, so unfolding already-unfolded text is a no-op. The first
    occurrence of each header name wins.
    """
    headers: dict[str, str] = {}
    current: str | None = None
    for line in text.splitlines():
        if not line.strip():
            if headers:
                break  # blank line ends the header block
            continue
        if line[0] in (" ", "\t") and current is not None:
            headers[current] = headers[current] + " " + line.strip()
            continue
        name, sep, value = line.partition(":")
        if not sep or not name.strip():
            current = None
            continue
        key = name.strip().lower()
        if key not in headers:
            headers[key] = value.strip()
            current = key
        else:
            current = None
    return headers


def parse_raw_headers(text: str, envelope: Mapping[str, object]) -> EmailEvent:
    """Derive an event from a raw header block plus sidecar envelope metadata.

    The block supplies subject, header_from (From), mail_to (first To
    address) and user_agent (User-Agent, else X-Mailer). The envelope
    mapping must supply event_id, timestamp, src_ip, src_country,
    direction and mail_from, which never appear in the headers.
    """
    headers = _unfold(text)
    if not headers:
        raise NoHeaders("no parseable header line found")
    if "from" not in headers:
        raise MissingRequired("no From header")
    if "to" not in headers:
        raise MissingRequired("no To header")
    addresses = [addr for _, addr in getaddresses([headers["to"]]) if addr]
    if not addresses:
        raise MissingRequired(f"To header {headers['to']!r} contains no address")

    required = ("event_id", "timestamp", "src_ip", "src_country", "direction", "mail_from")
    missing = [name for name in required if name not in envelope]
    if missing:
        raise MissingRequired(f"envelope metadata lacks {', '.join(missing)}")
    ts = envelope["timestamp"]
    timestamp = ts if isinstance(ts, datetime) else parse_timestamp(str(ts))

    return EmailEvent(
        event_id=str(envelope["event_id"]),
        timestamp=timestamp,
        src_ip=str(envelope["src_ip"]),
        src_country=str(envelope["src_country"]),
        direction=str(envelope["direction"]),
        mail_from=str(envelope["mail_from"]),
        mail_to=addresses[0],
        header_from=headers["from"],
        subject=headers.get("subject", ""),
        user_agent=headers.get("user-agent", headers.get("x-mailer", "")),
    )


def corpus_from_events(events: Iterable[EmailEvent], source_label: str = "") -> Corpus:
    return Corpus(tuple(events), source_label)
