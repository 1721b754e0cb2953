"""Command-line front end for the harvest/extract/train/report pipeline.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 data error (malformed
certificate, corrupt corpus or model, mismatched index, and the like).
File outputs are written to a temporary file and renamed into place, so a
failing run never leaves a partial output file behind.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
import tempfile
from collections.abc import Iterator

from .corpus import build_corpus_index, load_corpus, record_to_line
from .errors import CertsiftError, StorageFull, UsageError
from .features import (
    BogusValueList,
    DEFAULT_SHINGLE_SIZE,
    extract_corpus,
    read_features_csv,
    write_features_csv,
)
from .certs import load_trust_store
from .ml import (
    DEFAULT_SEED,
    Dataset,
    MODEL_KINDS,
    cross_validate,
    load_model,
    train,
)
from .ml.persist import model_to_json
from .probe import ProbeConfig, probe_corpus
from .report import boolean_feature_table, feature_cdf, write_cdf_csv
from .synth import load_spec, sample_corpus

import json


@contextlib.contextmanager
def _atomic_output(path: str | None) -> Iterator:
    """Text stream that becomes `path` only if the writer finishes."""
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".certsift-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _read_domain_list(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [
            line.strip()
            for line in fh
            if line.strip() and not line.lstrip().startswith("#")
        ]


def _note(message: str) -> None:
    print(message, file=sys.stderr)


# --- subcommand handlers ----------------------------------------------------


def _cmd_probe(args: argparse.Namespace) -> int:
    domains = _read_domain_list(args.domains)
    resolver = None
    if args.resolve:
        mapping = {}
        for entry in args.resolve:
            domain, sep, address = entry.partition("=")
            if not sep or not domain or not address:
                raise UsageError(f"--resolve wants DOMAIN=ADDRESS, got {entry!r}")
            mapping[domain.lower()] = address
        resolver = lambda host: mapping.get(host, host)
    config = ProbeConfig(
        connect_timeout_ms=args.timeout,
        handshake_timeout_ms=args.timeout,
        max_concurrency=args.concurrency,
        retries=args.retries,
        http_port=args.http_port,
        https_port=args.https_port,
        resolver=resolver,
    )
    with _atomic_output(args.out) as out:
        summary = probe_corpus(
            domains, config, sink=lambda record: out.write(record_to_line(record) + "\n")
        )
    _note(
        f"probed {summary.total} domains: {summary.both} both, "
        f"{summary.https_only} https_only, {summary.http_only} http_only, "
        f"{summary.neither} neither"
    )
    return 0


def _load_bogus(args: argparse.Namespace) -> BogusValueList | None:
    if getattr(args, "bogus_list", None):
        return BogusValueList.from_file(args.bogus_list)
    return None


def _extract_vectors(args: argparse.Namespace, corpus_path: str):
    records = load_corpus(corpus_path)
    index = None
    if getattr(args, "index_corpus", None):
        index = build_corpus_index(load_corpus(args.index_corpus))
    trust = load_trust_store(args.trust_store) if args.trust_store else []
    return records, extract_corpus(
        records,
        trust_store=trust,
        bogus=_load_bogus(args),
        shingle_size=args.shingle,
        index=index,
    )


def _cmd_extract(args: argparse.Namespace) -> int:
    records, vectors = _extract_vectors(args, args.corpus)
    with _atomic_output(args.out) as out:
        count = write_features_csv(out, vectors)
    _note(f"extracted {count} feature vectors from {len(records)} records")
    return 0


def _hyperparameters(args: argparse.Namespace) -> dict | None:
    overrides = {}
    for key, attr in (
        ("n_trees", "trees"),
        ("max_depth", "depth"),
        ("min_leaf", "min_leaf"),
        ("k", "k"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return overrides or None


def _cmd_train(args: argparse.Namespace) -> int:
    dataset = Dataset(read_features_csv(args.features))
    model = train(dataset, args.algo, _hyperparameters(args), seed=args.seed)
    with _atomic_output(args.model_out) as out:
        json.dump(model_to_json(model), out, indent=1)
        out.write("\n")
    _note(
        f"trained {args.algo} on {len(dataset)} rows (seed {args.seed}); "
        f"model -> {args.model_out or 'stdout'}"
    )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    dataset = Dataset(read_features_csv(args.features))
    report = cross_validate(
        dataset, args.algo, k=args.cv, hyperparameters=_hyperparameters(args), seed=args.seed
    )
    with _atomic_output(args.out) as out:
        out.write(report.to_json())
    _note(report.to_table().rstrip("\n"))
    _note(f"cross-validated {args.algo} with {args.cv} folds (seed {args.seed})")
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if bool(args.features) == bool(args.corpus):
        raise UsageError("exactly one of --features or --corpus is required")
    if args.features:
        vectors = read_features_csv(args.features)
    else:
        _, vectors = _extract_vectors(args, args.corpus)
    with _atomic_output(args.out) as out:
        out.write("domain,label,score\n")
        for fv in vectors:
            label, score = model.predict(fv)
            out.write(f"{fv.domain},{label},{score:.6f}\n")
    _note(f"classified {len(vectors)} rows with the {model.kind} model")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    if args.mode == "table":
        if not args.features:
            raise UsageError("table mode wants at least one --features NAME=PATH")
        corpora = []
        for entry in args.features:
            name, sep, path = entry.partition("=")
            if not sep or not name or not path:
                raise UsageError(f"--features wants NAME=PATH, got {entry!r}")
            corpora.append((name, read_features_csv(path)))
        table = boolean_feature_table(corpora)
        with _atomic_output(args.out) as out:
            table.write_csv(out)
        return 0
    # cdf mode
    if len(args.features) != 1 or "=" in args.features[0]:
        raise UsageError("cdf mode wants exactly one --features PATH")
    if not args.column:
        raise UsageError("cdf mode wants --column f13|f14|f15")
    rows = read_features_csv(args.features[0])
    series = feature_cdf(rows, args.column)
    with _atomic_output(args.out) as out:
        write_cdf_csv(out, series)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    positive = load_spec(args.pos_spec)
    negative = load_spec(args.neg_spec)
    if positive.label != "pos":
        raise UsageError(f"--pos-spec {args.pos_spec} is labeled {positive.label!r}")
    if negative.label != "neg":
        raise UsageError(f"--neg-spec {args.neg_spec} is labeled {negative.label!r}")
    dataset = sample_corpus(positive, negative, args.n, args.seed)
    with _atomic_output(args.out) as out:
        count = write_features_csv(out, dataset.rows)
    _note(f"sampled {count} rows, {args.n} per class (seed {args.seed})")
    return 0


# --- parser -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="certsift",
        description="Harvest TLS certificates, extract fraud-signal features, "
        "and train fraud classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("probe", help="probe domains over HTTP/HTTPS and harvest certificates")
    p.add_argument("--domains", required=True, help="file with one domain per line")
    p.add_argument("--out", help="NDJSON corpus output (default: stdout)")
    p.add_argument("--timeout", type=int, default=5000, metavar="MS",
                   help="connect and handshake timeout in milliseconds")
    p.add_argument("--retries", type=int, default=1)
    p.add_argument("--concurrency", type=int, default=16)
    p.add_argument("--http-port", type=int, default=80)
    p.add_argument("--https-port", type=int, default=443)
    p.add_argument("--resolve", action="append", metavar="DOMAIN=ADDRESS",
                   help="dial ADDRESS for DOMAIN instead of resolving it (repeatable)")
    p.set_defaults(handler=_cmd_probe)

    p = sub.add_parser("extract", help="extract feature vectors from a harvested corpus")
    p.add_argument("--corpus", required=True, help="NDJSON corpus from probe")
    p.add_argument("--out", help="feature CSV output (default: stdout)")
    p.add_argument("--trust-store", help="PEM bundle of trust anchors")
    p.add_argument("--bogus-list", help="file of placeholder subject values, one per line")
    p.add_argument("--shingle", type=int, default=DEFAULT_SHINGLE_SIZE, choices=(1, 2, 3),
                   help="shingle size for the name-similarity feature")
    p.add_argument("--index-corpus",
                   help="corpus to compute duplicate features against "
                   "(default: --corpus itself)")
    p.set_defaults(handler=_cmd_extract)

    def add_training_flags(p: argparse.ArgumentParser, with_model_out: bool) -> None:
        p.add_argument("--features", required=True, help="labeled feature CSV")
        p.add_argument("--algo", required=True, choices=MODEL_KINDS)
        if with_model_out:
            p.add_argument("--model-out", help="model JSON output (default: stdout)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--trees", type=int, help="ensemble size override")
        p.add_argument("--depth", type=int, help="tree depth override")
        p.add_argument("--min-leaf", type=int, help="minimum rows per leaf override")
        p.add_argument("--k", type=int, help="neighbor count override")

    p = sub.add_parser("train", help="train a classifier on labeled features")
    add_training_flags(p, with_model_out=True)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("eval", help="cross-validate a classifier on labeled features")
    add_training_flags(p, with_model_out=False)
    p.add_argument("--cv", type=int, default=10, help="fold count")
    p.add_argument("--out", help="JSON report output (default: stdout)")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("classify", help="apply a trained model")
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--features", help="feature CSV to classify")
    p.add_argument("--corpus", help="NDJSON corpus to extract and classify")
    p.add_argument("--trust-store", help="PEM bundle of trust anchors (with --corpus)")
    p.add_argument("--bogus-list", help="placeholder subject values (with --corpus)")
    p.add_argument("--shingle", type=int, default=DEFAULT_SHINGLE_SIZE, choices=(1, 2, 3))
    p.add_argument("--index-corpus", help="duplicate index corpus (with --corpus)")
    p.add_argument("--out", help="CSV output (default: stdout)")
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("report", help="summarize feature distributions")
    p.add_argument("--mode", required=True, choices=("table", "cdf"))
    p.add_argument("--features", action="append", default=[],
                   metavar="NAME=PATH|PATH",
                   help="table mode: NAME=PATH per corpus (repeatable); "
                   "cdf mode: one feature CSV path")
    p.add_argument("--column", choices=("f13", "f14", "f15"),
                   help="numeric feature for cdf mode")
    p.add_argument("--out", help="CSV output (default: stdout)")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("synth", help="sample a labeled synthetic feature corpus")
    p.add_argument("--pos-spec", required=True,
                   help="fraud-class spec: shipped name or JSON path")
    p.add_argument("--neg-spec", required=True,
                   help="legitimate-class spec: shipped name or JSON path")
    p.add_argument("--n", type=int, required=True, help="rows per class")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="feature CSV output (default: stdout)")
    p.set_defaults(handler=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except StorageFull as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except CertsiftError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
