"""Rolling train/detect cycles over batch files or replayed streams.

One cycle: featurize the train and detect windows, embed them jointly,
fit LOF on the train vectors, score the detect vectors, keep negative
scores, keep rare relations among those, and build the correlation graph
over what remains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Callable, Iterable, Iterator, Sequence

from .embedding import DocVector, EmbeddingParams, train as train_embedding
from .errors import (
    EmptyDetectWindow,
    MalformedLine,
    OutOfOrderEvent,
    TooFewTrainingEvents,
)
from .events import (
    Corpus,
    EmailEvent,
    format_timestamp,
    parse_event_line,
    read_corpus,
)
from .featurize import featurize
from .graph import CorrelationGraph, build_graph, export_graph
from .novelty import NoveltyParams, decision_scores, filter_novel, fit
from .rareness import RelationKey, relation_key, select_rare

_DAY = timedelta(hours=24)


@dataclass
class WindowConfig:
    train_duration: timedelta = _DAY
    detect_duration: timedelta = _DAY
    embedding: EmbeddingParams = field(default_factory=EmbeddingParams)
    novelty: NoveltyParams = field(default_factory=NoveltyParams)
    rareness_threshold: int = 2

    def __post_init__(self):
        if self.train_duration <= timedelta(0) or self.detect_duration <= timedelta(0):
            raise ValueError("window durations must be positive")
        if self.rareness_threshold < 0:
            raise ValueError("rareness_threshold must be >= 0")


@dataclass
class FlaggedEvent:
    event_id: str
    score: float
    relation: RelationKey
    subject: str
    src_ip: str
    src_country: str


@dataclass
class DetectionReport:
    train_start: datetime
    train_end: datetime
    detect_start: datetime
    detect_end: datetime
    counts: dict[str, int]
    flagged: list[FlaggedEvent]
    graph: CorrelationGraph

    def to_dict(self) -> dict:
        return {
            "train_window": {
                "start": format_timestamp(self.train_start),
                "end": format_timestamp(self.train_end),
            },
            "detect_window": {
                "start": format_timestamp(self.detect_start),
                "end": format_timestamp(self.detect_end),
            },
            "counts": dict(self.counts),
            "flagged": [
                {
                    "event_id": f.event_id,
                    "score": f.score,
                    "relation_key": {
                        "src_ip": f.relation.src_ip,
                        "direction": f.relation.direction,
                        "mail_from": f.relation.mail_from,
                        "mail_to": f.relation.mail_to,
                    },
                    "subject": f.subject,
                    "src_ip": f.src_ip,
                    "src_country": f.src_country,
                }
                for f in self.flagged
            ],
            "graph": json.loads(export_graph(self.graph, "json")),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))


def run_cycle(
    train: Sequence[EmailEvent],
    detect: Sequence[EmailEvent],
    cfg: WindowConfig,
    train_bounds: tuple[datetime, datetime] | None = None,
    detect_bounds: tuple[datetime, datetime] | None = None,
    vectors_hook: Callable[[list[DocVector]], None] | None = None,
) -> DetectionReport:
    """Run one full detection cycle and assemble its report.

    Window bounds default to the observed timestamp extent of each side;
    run_rolling passes the nominal window bounds instead. vectors_hook,
    when given, receives every trained DocVector (debug dump).
    """
    if len(train) <= cfg.novelty.n_neighbors:
        raise TooFewTrainingEvents(
            f"training window has {len(train)} events; need more than "
            f"n_neighbors={cfg.novelty.n_neighbors}"
        )
    if not detect:
        raise EmptyDetectWindow("detect window has no events")

    docs = [featurize(e) for e in train] + [featurize(e) for e in detect]
    vectors = train_embedding(docs, cfg.embedding)
    if vectors_hook is not None:
        vectors_hook(vectors)

    model = fit(vectors[: len(train)], cfg.novelty)
    scores = decision_scores(model, vectors[len(train):])
    novel_ids = set(filter_novel(scores, cfg.novelty.decision_threshold))
    novel_events = [e for e in detect if e.event_id in novel_ids]
    rare_events = select_rare(novel_events, cfg.rareness_threshold)

    score_by_id = {s.event_id: s.score for s in scores}
    flagged = [
        FlaggedEvent(
            event_id=e.event_id,
            score=score_by_id[e.event_id],
            relation=relation_key(e),
            subject=e.subject,
            src_ip=e.src_ip,
            src_country=e.src_country,
        )
        for e in rare_events
    ]

    if train_bounds is None:
        times = [e.timestamp for e in train]
        train_bounds = (min(times), max(times))
    if detect_bounds is None:
        times = [e.timestamp for e in detect]
        detect_bounds = (min(times), max(times))

    return DetectionReport(
        train_start=train_bounds[0],
        train_end=train_bounds[1],
        detect_start=detect_bounds[0],
        detect_end=detect_bounds[1],
        counts={
            "train_events": len(train),
            "detect_events": len(detect),
            "novel": len(novel_events),
            "rare": len(rare_events),
        },
        flagged=flagged,
        graph=build_graph(rare_events),
    )


class BatchFileSource:
    """Replays a JSONL corpus file; events come out timestamp-sorted."""

    kind = "batch_file"

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def __iter__(self) -> Iterator[EmailEvent]:
        return iter(read_corpus(self.path).events)


class LineStreamSource:
    """Reads newline-delimited events from a byte or text stream (file,
    named pipe, socket makefile). Enforces non-decreasing timestamps up to
    `tolerance`; position state is the current line number."""

    kind = "line_stream"

    def __init__(self, stream: IO, tolerance: timedelta = timedelta(0)):
        self.stream = stream
        self.tolerance = tolerance
        self.line_no = 0

    def __iter__(self) -> Iterator[EmailEvent]:
        last: datetime | None = None
        for raw in self.stream:
            self.line_no += 1
            line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
            if not line.strip():
                continue
            try:
                event = parse_event_line(line)
            except MalformedLine as exc:
                raise MalformedLine(str(exc), line_no=self.line_no) from None
            if last is not None and event.timestamp < last - self.tolerance:
                raise OutOfOrderEvent(
                    f"line {self.line_no}: timestamp {format_timestamp(event.timestamp)} "
                    f"regressed behind {format_timestamp(last)}"
                )
            if last is None or event.timestamp > last:
                last = event.timestamp
            yield event


class CorpusSource:
    """In-memory adapter over an already-loaded corpus."""

    kind = "batch_file"

    def __init__(self, corpus: Corpus):
        self.corpus = corpus

    def __iter__(self) -> Iterator[EmailEvent]:
        return iter(self.corpus.events)


def run_rolling(
    source: Iterable[EmailEvent],
    cfg: WindowConfig,
    vectors_hook: Callable[[list[DocVector]], None] | None = None,
) -> Iterator[DetectionReport]:
    """Partition the event timeline into consecutive detect windows and
    run one cycle per window.

    Windows are anchored at the first event's timestamp. The first window
    only establishes the baseline (cold start). A window is closed as soon
    as an event at or past its end arrives; the final, possibly partial,
    window is flushed when the source is exhausted, so batch and stream
    adapters see identical window boundaries. Windows containing no events
    produce no report.
    """
    history: list[EmailEvent] = []  # events inside the trailing train span
    window: list[EmailEvent] = []
    window_start: datetime | None = None
    window_index = 0

    def close_window(start: datetime) -> Iterator[DetectionReport]:
        nonlocal history, window, window_index
        end = start + cfg.detect_duration
        train_from = start - cfg.train_duration
        if window_index >= 1 and window:
            train = [e for e in history if e.timestamp >= train_from]
            yield run_cycle(
                train,
                window,
                cfg,
                train_bounds=(train_from, start),
                detect_bounds=(start, end),
                vectors_hook=vectors_hook,
            )
        next_train_from = end - cfg.train_duration
        history = [e for e in history if e.timestamp >= next_train_from] + [
            e for e in window if e.timestamp >= next_train_from
        ]
        window = []
        window_index += 1

    for event in source:
        if window_start is None:
            window_start = event.timestamp
        while event.timestamp >= window_start + cfg.detect_duration:
            yield from close_window(window_start)
            window_start = window_start + cfg.detect_duration
        window.append(event)
    if window_start is not None and window:
        yield from close_window(window_start)


def report_stamp(report: DetectionReport) -> str:
    """Filesystem-safe ISO-8601 (basic format) detect-window start."""
    return report.detect_start.strftime("%Y%m%dT%H%M%SZ")
