"""Labeled synthetic email corpora: stable baseline traffic plus injected
anomalies, so acceptance tests run at desk scale with ground truth."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import InvalidSpec
from .events import Corpus, EmailEvent

ANOMALY_KINDS = ("novel_sender_phish", "account_takeover_burst", "malvertisement_blast")

BENIGN = "benign"
ANOMALOUS = "anomalous"

_DAY = timedelta(days=1)

_BASELINE_UAS = (
    "Microsoft Outlook 16.0",
    "Apple Mail (2.3654.120.0.1)",
    "Mozilla Thunderbird 78.5.1",
    "Zimbra 9.0.0_GA_3990",
    "iPhone Mail (18B92)",
)
_ANOMALY_UAS = ("swaks v20201014.0", "PHPMailer 6.1.8")

_SUBJECT_THEMES = (
    "weekly status report",
    "project sync notes",
    "timesheet approval",
    "build results summary",
    "support ticket update",
    "quarterly budget review",
    "meeting room booking",
    "vpn maintenance notice",
)

# Candidate origins for anomalies; filtered against the baseline countries.
_ANOMALY_COUNTRIES = ("KP", "IR", "SY", "BY", "CU", "SD")

_ANOMALY_SUBJECT_THEMES: Mapping[str, str] = {
    "novel_sender_phish": "new sign-in attempt verify",
    "account_takeover_burst": "urgent wire transfer request",
    "malvertisement_blast": "exclusive discount offer today",
}


@dataclass(frozen=True)
class AnomalySpec:
    kind: str = "novel_sender_phish"
    count: int = 1
    window_start: timedelta = timedelta(days=1)
    window_end: timedelta = timedelta(days=2)

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise InvalidSpec(f"unknown anomaly kind {self.kind!r}")
        if self.count < 1:
            raise InvalidSpec("anomaly count must be >= 1")
        if self.window_end <= self.window_start or self.window_start < timedelta(0):
            raise InvalidSpec("anomaly window must be a positive span with start >= 0")


@dataclass(frozen=True)
class GeneratorSpec:
    n_senders: int = 50
    recipients_per_sender: int = 8
    events_per_relation_per_day: int = 10
    subject_pool_size: int = 40
    baseline_countries: tuple[str, ...] = ("US", "DE", "GB", "FR", "JP")
    duration: timedelta = timedelta(days=2)
    anomalies: tuple[AnomalySpec, ...] = ()
    seed: int = 0
    start: datetime = datetime(2020, 12, 1, tzinfo=timezone.utc)

    def __post_init__(self):
        for name in ("n_senders", "recipients_per_sender", "subject_pool_size"):
            if getattr(self, name) < 1:
                raise InvalidSpec(f"{name} must be >= 1")
        # Baseline relations must repeat enough per day to never look rare.
        if self.events_per_relation_per_day < 5:
            raise InvalidSpec("events_per_relation_per_day must be >= 5")
        if not self.baseline_countries:
            raise InvalidSpec("baseline_countries must be nonempty")
        days = self.duration / _DAY
        if self.duration <= timedelta(0) or days != int(days):
            raise InvalidSpec("duration must be a positive whole number of days")
        for anomaly in self.anomalies:
            if anomaly.window_end > self.duration:
                raise InvalidSpec("anomaly window extends past corpus duration")


def _sender_ip(index: int) -> str:
    return f"10.{(index // 65536) % 256}.{(index // 256) % 256}.{index % 256}"


def _anomaly_ip(index: int) -> str:
    return f"203.0.113.{index % 254 + 1}" if index < 254 else f"198.18.{index // 254}.{index % 254 + 1}"


def generate(spec: GeneratorSpec) -> tuple[Corpus, dict[str, str]]:
    """Build the corpus and its {event_id: benign|anomalous} label map.

    Baseline senders keep a stable IP, country, direction, user agent and
    a small personal subject pool; each (sender, recipient) relation emits
    events_per_relation_per_day events at uniform second offsets per day.
    Anomalies get an unseen sender, an IP from a country outside the
    baseline set, a globally unique subject, and relation multiplicity 1.
    """
    rng = np.random.default_rng(int(spec.seed))
    n_days = int(spec.duration / _DAY)

    subject_pool = [
        f"{_SUBJECT_THEMES[i % len(_SUBJECT_THEMES)]} {i}" for i in range(spec.subject_pool_size)
    ]
    novel_countries = [c for c in _ANOMALY_COUNTRIES if c not in spec.baseline_countries]
    if spec.anomalies and not novel_countries:
        raise InvalidSpec("baseline_countries covers every candidate anomaly country")

    records: list[tuple[datetime, EmailEvent, str]] = []

    recipients: list[str] = []
    for s in range(spec.n_senders):
        sender = f"user{s:03d}@corp-a.example"
        header_from = f"User {s:03d} <{sender}>"
        country = spec.baseline_countries[int(rng.integers(0, len(spec.baseline_countries)))]
        direction = ("inbound", "outbound", "internal")[int(rng.integers(0, 3))]
        agent = _BASELINE_UAS[int(rng.integers(0, len(_BASELINE_UAS)))]
        src_ip = _sender_ip(s)
        pool_size = min(5, len(subject_pool))
        subjects = [subject_pool[i] for i in rng.choice(len(subject_pool), pool_size, replace=False)]
        for r in range(spec.recipients_per_sender):
            recipient = f"staff{s * spec.recipients_per_sender + r:04d}@corp.example"
            recipients.append(recipient)
            for day in range(n_days):
                day_start = spec.start + day * _DAY
                offsets = rng.integers(0, 86400, size=spec.events_per_relation_per_day)
                for offset in offsets:
                    subject = subjects[int(rng.integers(0, len(subjects)))]
                    ts = day_start + timedelta(seconds=int(offset))
                    records.append((ts, _partial_event(
                        ts, src_ip, country, direction, sender, recipient,
                        header_from, subject, agent,
                    ), BENIGN))

    unique_counter = 0
    for anomaly in spec.anomalies:
        span = int((anomaly.window_end - anomaly.window_start).total_seconds())
        theme = _ANOMALY_SUBJECT_THEMES[anomaly.kind]
        if anomaly.kind == "novel_sender_phish":
            senders = [
                (f"security{unique_counter + j:05d}@mail-{unique_counter + j:05d}.example",
                 _anomaly_ip(unique_counter + j))
                for j in range(anomaly.count)
            ]
            direction = "inbound"
        elif anomaly.kind == "account_takeover_burst":
            if anomaly.count > 2 * len(recipients):
                raise InvalidSpec("burst count exceeds 2x recipient pool; relations would repeat")
            addr = f"helpdesk{unique_counter:05d}@corp-a.example"
            senders = [(addr, _anomaly_ip(unique_counter))] * anomaly.count
            direction = "outbound"
        else:  # malvertisement_blast
            if anomaly.count > 2 * len(recipients):
                raise InvalidSpec("blast count exceeds 2x recipient pool; relations would repeat")
            addr = f"promo{unique_counter:05d}@deals-{unique_counter:05d}.example"
            senders = [(addr, _anomaly_ip(unique_counter))] * anomaly.count
            direction = "inbound"
        country = novel_countries[int(rng.integers(0, len(novel_countries)))]
        agent = _ANOMALY_UAS[int(rng.integers(0, len(_ANOMALY_UAS)))]
        target_order = rng.permutation(len(recipients))
        for j in range(anomaly.count):
            sender, src_ip = senders[j]
            recipient = recipients[int(target_order[j % len(recipients)])]
            subject = f"{theme} x{unique_counter:06d}"
            ts = spec.start + anomaly.window_start + timedelta(seconds=int(rng.integers(0, span)))
            records.append((ts, _partial_event(
                ts, src_ip, country, direction, sender, recipient,
                f"IT Notice <{sender}>", subject, agent,
            ), ANOMALOUS))
            unique_counter += 1

    records.sort(key=lambda item: item[0])
    events = []
    labels: dict[str, str] = {}
    for i, (_, partial, label) in enumerate(records):
        event_id = f"e{i:07d}"
        events.append(EmailEvent(
            event_id=event_id,
            timestamp=partial.timestamp,
            src_ip=partial.src_ip,
            src_country=partial.src_country,
            direction=partial.direction,
            mail_from=partial.mail_from,
            mail_to=partial.mail_to,
            header_from=partial.header_from,
            subject=partial.subject,
            user_agent=partial.user_agent,
        ))
        labels[event_id] = label
    corpus = Corpus(tuple(events), source_label=f"synthetic(seed={spec.seed})")
    return corpus, labels


def _partial_event(ts, src_ip, country, direction, sender, recipient,
                   header_from, subject, agent) -> EmailEvent:
    return EmailEvent(
        event_id="pending",
        timestamp=ts,
        src_ip=src_ip,
        src_country=country,
        direction=direction,
        mail_from=sender,
        mail_to=recipient,
        header_from=header_from,
        subject=subject,
        user_agent=agent,
    )


def write_labels(labels: Mapping[str, str], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for event_id in sorted(labels):
            handle.write(json.dumps({"event_id": event_id, "label": labels[event_id]}))
            handle.write("\n")


def read_labels(path: str | Path) -> dict[str, str]:
    labels: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                labels[record["event_id"]] = record["label"]
    return labels
