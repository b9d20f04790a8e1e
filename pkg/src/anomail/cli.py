"""Command-line surface: gen, detect, parse-eml, replay."""

from __future__ import annotations

import argparse
import json
import re
import socket
import sys
import time
from datetime import timedelta
from pathlib import Path

from .embedding import EmbeddingParams
from .errors import AnomailError
from .events import (
    Corpus,
    parse_raw_headers,
    parse_timestamp,
    read_corpus,
    write_corpus,
)
from .graph import export_graph
from .novelty import NoveltyParams
from .pipeline import (
    BatchFileSource,
    LineStreamSource,
    WindowConfig,
    report_stamp,
    run_cycle,
    run_rolling,
)
from .synth import AnomalySpec, GeneratorSpec, generate, write_labels

_DURATION_RE = re.compile(r"^(\d+(?:\.\d+)?)([smhd]?)$")
_DURATION_UNITS = {"": 1.0, "s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0}

_CONNECT_TIMEOUT = 10.0


def parse_duration(text: str) -> timedelta:
    match = _DURATION_RE.match(text.strip())
    if not match:
        raise argparse.ArgumentTypeError(
            f"bad duration {text!r} (use e.g. 90s, 30m, 24h, 2d)"
        )
    return timedelta(seconds=float(match.group(1)) * _DURATION_UNITS[match.group(2)])


# Keys accepted in a --config key=value file, with their converters.
_CONFIG_CONVERTERS = {
    "vector_size": int,
    "min_count": int,
    "epochs": int,
    "negative": int,
    "alpha": float,
    "k": int,
    "contamination": float,
    "threshold": float,
    "rareness_threshold": int,
    "seed": int,
    "window": parse_duration,
    "train_window": parse_duration,
    "tolerance": parse_duration,
    "senders": int,
    "recipients": int,
    "events_per_relation": int,
    "subject_pool": int,
    "days": int,
    "anomalies": int,
    "countries": str,
    "anomaly_kind": str,
    "rate": float,
}


def _load_config(path: str, parser: argparse.ArgumentParser) -> dict:
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _CONFIG_CONVERTERS:
            parser.error(f"config {path}: line {line_no}: unknown setting {key!r}")
        try:
            values[key] = _CONFIG_CONVERTERS[key](value.strip())
        except (ValueError, argparse.ArgumentTypeError) as exc:
            parser.error(f"config {path}: line {line_no}: {exc}")
    return values


def _apply_config(args: argparse.Namespace, argv: list[str], parser) -> None:
    """Config file values act as defaults: an explicit flag always wins."""
    if not getattr(args, "config", None):
        return
    explicit = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in _load_config(args.config, parser).items():
        if key not in explicit and hasattr(args, key):
            setattr(args, key, value)


def _print_err(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _parse_hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


# --------------------------------------------------------------------------
# gen
# --------------------------------------------------------------------------

def cmd_gen(args: argparse.Namespace) -> int:
    duration = timedelta(days=args.days)
    anomalies = ()
    if args.anomalies > 0:
        # Anomalies land after the cold-start window, inset one hour from
        # its edge so window anchoring can never strand one in the baseline.
        window_start = timedelta(days=1, hours=1) if args.days >= 2 else timedelta(hours=1)
        anomalies = (
            AnomalySpec(
                kind=args.anomaly_kind,
                count=args.anomalies,
                window_start=window_start,
                window_end=duration,
            ),
        )
    spec = GeneratorSpec(
        n_senders=args.senders,
        recipients_per_sender=args.recipients,
        events_per_relation_per_day=args.events_per_relation,
        subject_pool_size=args.subject_pool,
        baseline_countries=tuple(args.countries.split(",")),
        duration=duration,
        anomalies=anomalies,
        seed=args.seed,
        start=parse_timestamp(args.start),
    )
    corpus, labels = generate(spec)
    out = Path(args.output)
    write_corpus(corpus, out)
    labels_path = Path(args.labels) if args.labels else out.with_name(out.stem + ".labels" + out.suffix)
    write_labels(labels, labels_path)
    summary = {
        "events": len(corpus),
        "benign": sum(1 for v in labels.values() if v == "benign"),
        "anomalous": sum(1 for v in labels.values() if v == "anomalous"),
        "corpus": str(out),
        "labels": str(labels_path),
    }
    print(json.dumps(summary))
    return 0


# --------------------------------------------------------------------------
# detect
# --------------------------------------------------------------------------

def _detect_source(args, parser):
    modes = [
        bool(args.train or args.test),
        bool(args.input),
        bool(args.stream_input),
        args.stream_listen is not None,
        bool(args.stream_connect),
    ]
    if sum(modes) != 1:
        parser.error(
            "choose exactly one input mode: --train/--test, --input, "
            "--stream-input, --stream-listen or --stream-connect"
        )
    if (args.train is None) != (args.test is None):
        parser.error("--train and --test must be given together")


def _open_stream(args):
    if args.stream_input:
        if args.stream_input == "-":
            return sys.stdin.buffer, None
        return open(args.stream_input, "rb"), None
    if args.stream_listen is not None:
        server = socket.create_server(("127.0.0.1", args.stream_listen))
        _print_err(f"listening on 127.0.0.1:{server.getsockname()[1]}")
        conn, peer = server.accept()
        _print_err(f"connection from {peer[0]}:{peer[1]}")
        server.close()
        return conn.makefile("rb"), conn
    host, port = args.stream_connect
    deadline = time.monotonic() + _CONNECT_TIMEOUT
    while True:
        try:
            conn = socket.create_connection((host, port), timeout=_CONNECT_TIMEOUT)
            break
        except OSError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(0.05)
    return conn.makefile("rb"), conn


def cmd_detect(args: argparse.Namespace, parser) -> int:
    _detect_source(args, parser)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    cfg = WindowConfig(
        train_duration=args.train_window or args.window,
        detect_duration=args.window,
        embedding=EmbeddingParams(
            vector_size=args.vector_size,
            min_count=args.min_count,
            epochs=args.epochs,
            negative_samples=args.negative,
            initial_learning_rate=args.alpha,
            seed=args.seed,
        ),
        novelty=NoveltyParams(
            n_neighbors=args.k,
            contamination=args.contamination,
            decision_threshold=args.threshold,
        ),
        rareness_threshold=args.rareness_threshold,
    )

    pending_vectors: list = []
    hook = pending_vectors.append if args.dump_vectors else None

    stream_handle = None
    connection = None
    if args.train:
        train_corpus = read_corpus(args.train)
        test_corpus = read_corpus(args.test)
        reports = iter(
            [run_cycle(list(train_corpus.events), list(test_corpus.events), cfg,
                       vectors_hook=hook)]
        )
    elif args.input:
        reports = run_rolling(BatchFileSource(args.input), cfg, vectors_hook=hook)
    else:
        stream_handle, connection = _open_stream(args)
        source = LineStreamSource(stream_handle, tolerance=args.tolerance)
        reports = run_rolling(source, cfg, vectors_hook=hook)

    try:
        for report in reports:
            stamp = report_stamp(report)
            report_path = out_dir / f"report_{stamp}.json"
            report_path.write_text(report.to_json() + "\n", encoding="utf-8")
            (out_dir / f"graph_{stamp}.json").write_text(
                export_graph(report.graph, "json") + "\n", encoding="utf-8"
            )
            (out_dir / f"graph_{stamp}.dot").write_text(
                export_graph(report.graph, "dot"), encoding="utf-8"
            )
            if args.figures:
                from . import render  # matplotlib import deferred until needed

                render.render_graph_figure(
                    report.graph, out_dir / f"graph_{stamp}.png", seed=args.seed
                )
                render.render_counts_figure(report, out_dir / f"counts_{stamp}.png")
            if pending_vectors:
                vec_path = out_dir / f"vectors_{stamp}.jsonl"
                with vec_path.open("w", encoding="utf-8") as handle:
                    for vec in pending_vectors[-1]:
                        handle.write(json.dumps(
                            {"event_id": vec.event_id, "values": [float(v) for v in vec.values]}
                        ))
                        handle.write("\n")
                pending_vectors.clear()
            print(json.dumps({
                "report": str(report_path),
                "detect_start": report.to_dict()["detect_window"]["start"],
                "counts": report.counts,
            }))
    finally:
        if stream_handle is not None and stream_handle is not sys.stdin.buffer:
            stream_handle.close()
        if connection is not None:
            connection.close()
    return 0


# --------------------------------------------------------------------------
# parse-eml
# --------------------------------------------------------------------------

def cmd_parse_eml(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    sidecar: dict[str, dict] = {}
    with Path(args.sidecar).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                sidecar[record["file"]] = record
    events = []
    failures = 0
    files = sorted(p for p in directory.iterdir() if p.is_file())
    for path in files:
        meta = sidecar.get(path.name)
        if meta is None:
            _print_err(f"warning: {path.name}: no sidecar entry, skipped")
            failures += 1
            continue
        try:
            events.append(parse_raw_headers(path.read_text(encoding="utf-8", errors="replace"), meta))
        except AnomailError as exc:
            _print_err(f"warning: {path.name}: {exc}")
            failures += 1
    if not events:
        _print_err("error: no header file could be parsed")
        return 1
    write_corpus(Corpus(tuple(events), source_label=str(directory)), args.output)
    print(json.dumps({"events": len(events), "skipped": failures, "corpus": args.output}))
    return 0


# --------------------------------------------------------------------------
# replay
# --------------------------------------------------------------------------

def cmd_replay(args: argparse.Namespace) -> int:
    data = Path(args.input).read_bytes()
    lines = [line + b"\n" for line in data.split(b"\n") if line]
    if args.listen is not None:
        server = socket.create_server(("127.0.0.1", args.listen))
        _print_err(f"listening on 127.0.0.1:{server.getsockname()[1]}")
        conn, _ = server.accept()
        server.close()
    else:
        host, port = args.connect
        deadline = time.monotonic() + _CONNECT_TIMEOUT
        while True:
            try:
                conn = socket.create_connection((host, port), timeout=_CONNECT_TIMEOUT)
                break
            except OSError:
                if time.monotonic() >= deadline:
                    raise
                time.sleep(0.05)
    delay = 1.0 / args.rate if args.rate > 0 else 0.0
    try:
        for line in lines:
            conn.sendall(line)
            if delay:
                time.sleep(delay)
        conn.shutdown(socket.SHUT_WR)
    finally:
        conn.close()
    _print_err(f"replayed {len(lines)} events")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anomail",
        description="Header-based anomalous email detection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a labeled synthetic corpus")
    gen.add_argument("--senders", type=int, default=50)
    gen.add_argument("--recipients", type=int, default=8, help="recipients per sender")
    gen.add_argument("--events-per-relation", type=int, default=10,
                     help="events per (sender, recipient) relation per day")
    gen.add_argument("--subject-pool", type=int, default=40)
    gen.add_argument("--countries", default="US,DE,GB,FR,JP")
    gen.add_argument("--days", type=int, default=2)
    gen.add_argument("--anomalies", type=int, default=0, help="injected anomaly count")
    gen.add_argument("--anomaly-kind", default="novel_sender_phish",
                     choices=["novel_sender_phish", "account_takeover_burst",
                              "malvertisement_blast"])
    gen.add_argument("--start", default="2020-12-01T00:00:00Z")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--labels", help="labels output path (default: <output>.labels.jsonl)")
    gen.add_argument("--config", help="key=value defaults file")
    gen.add_argument("-o", "--output", required=True, help="corpus output path")

    detect = sub.add_parser("detect", help="run detection cycles and write reports")
    detect.add_argument("--train", help="training-window corpus (two-file form)")
    detect.add_argument("--test", help="detect-window corpus (two-file form)")
    detect.add_argument("--input", help="single corpus, rolled into windows")
    detect.add_argument("--stream-input", help="JSONL stream path or - for stdin")
    detect.add_argument("--stream-listen", type=int, metavar="PORT",
                        help="accept one JSONL stream connection")
    detect.add_argument("--stream-connect", type=_parse_hostport, metavar="HOST:PORT",
                        help="pull a JSONL stream from a replay endpoint")
    detect.add_argument("--out", required=True, help="report output directory")
    detect.add_argument("--window", type=parse_duration, default=timedelta(hours=24),
                        help="detect window length (default 24h)")
    detect.add_argument("--train-window", type=parse_duration, default=None,
                        help="train window length (default: same as --window)")
    detect.add_argument("--vector-size", type=int, default=40)
    detect.add_argument("--min-count", type=int, default=2)
    detect.add_argument("--epochs", type=int, default=40)
    detect.add_argument("--negative", type=int, default=5)
    detect.add_argument("--alpha", type=float, default=0.025)
    detect.add_argument("--k", type=int, default=20, help="LOF n_neighbors")
    detect.add_argument("--contamination", type=float, default=0.5)
    detect.add_argument("--threshold", type=float, default=0.0,
                        help="novelty decision threshold")
    detect.add_argument("--rareness-threshold", type=int, default=2)
    detect.add_argument("--tolerance", type=parse_duration, default=timedelta(0),
                        help="stream out-of-order tolerance")
    detect.add_argument("--seed", type=int, default=0)
    detect.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                        help="render graph/counts figures per window")
    detect.add_argument("--dump-vectors", action="store_true",
                        help="write per-window document vectors (debug)")
    detect.add_argument("--config", help="key=value defaults file")

    eml = sub.add_parser("parse-eml", help="build a corpus from raw header files")
    eml.add_argument("directory", help="directory of header files")
    eml.add_argument("--sidecar", required=True,
                     help="JSONL envelope metadata keyed by file name")
    eml.add_argument("-o", "--output", required=True)

    replay = sub.add_parser("replay", help="replay a corpus over a byte stream")
    replay.add_argument("--input", required=True)
    replay.add_argument("--connect", type=_parse_hostport, metavar="HOST:PORT")
    replay.add_argument("--listen", type=int, metavar="PORT")
    replay.add_argument("--rate", type=float, default=0.0,
                        help="events per second (0 = unthrottled)")

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config(args, argv, parser)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "detect":
            return cmd_detect(args, parser)
        if args.command == "parse-eml":
            return cmd_parse_eml(args)
        if args.command == "replay":
            if (args.connect is None) == (args.listen is None):
                parser.error("replay needs exactly one of --connect or --listen")
            return cmd_replay(args)
        parser.error(f"unknown command {args.command!r}")
    except AnomailError as exc:
        _print_err(f"error: {exc}")
        return 1
    except OSError as exc:
        _print_err(f"error: {exc}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
