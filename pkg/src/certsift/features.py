"""The fifteen certificate features and their extraction.

Eight booleans (weak signature digest, placeholder subject, self-signed,
expired, failed verification, shared certificate, shared serial, validity
beyond three years), four categoricals (issuer common name, issuer
organization, issuer country, subject country), and three numerics
(validity days, serial digit count, domain/common-name similarity).

Categorical attributes that are absent get the sentinel value "JustNone"
so classifiers can treat missingness itself as a signal.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

from .certs import (
    OID_MD5_RSA,
    CertificateSummary,
    dn_equal,
    parse_certificate,
    verify_chain,
)
from .corpus import CorpusIndex, DomainRecord, build_corpus_index, latest_records
from .errors import IndexMismatch, MalformedInput, SerializationFailure

log = logging.getLogger(__name__)

MISSING = "JustNone"
LABEL_POSITIVE = "pos"
LABEL_NEGATIVE = "neg"

THREE_YEARS_DAYS = 1095
SECONDS_PER_DAY = 86400

DEFAULT_SHINGLE_SIZE = 2

# Values that certificate-generation tools ship as placeholders.  A subject
# still carrying one was never filled in by a real operator.
DEFAULT_BOGUS_VALUES = (
    "--",
    "somestate",
    "somecity",
    "someorganization",
    "someorganizationalunit",
    "localhost",
    "internet widgits pty ltd",
    "some-state",
    "default city",
    "example",
    "test",
)

FEATURE_NAMES = tuple(f"f{i}" for i in range(1, 16))
BOOLEAN_FEATURES = ("f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8")
CATEGORICAL_FEATURES = ("f9", "f10", "f11", "f12")
NUMERIC_FEATURES = ("f13", "f14", "f15")


@dataclass(frozen=True)
class BogusValueList:
    """Lowercased, trimmed placeholder values to flag in subject names."""

    entries: frozenset[str]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("bogus value list must not be empty")

    @classmethod
    def of(cls, values: Iterable[str]) -> "BogusValueList":
        normalized = {v.strip().lower() for v in values if v.strip()}
        return cls(frozenset(normalized))

    @classmethod
    def default(cls) -> "BogusValueList":
        return cls.of(DEFAULT_BOGUS_VALUES)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "BogusValueList":
        with open(path, encoding="utf-8") as fh:
            values = [line for line in (l.strip() for l in fh) if line]
        return cls.of(values)

    def matches(self, value: str) -> bool:
        return value.strip().lower() in self.entries


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """One domain's features, optionally labeled pos (fraud) or neg."""

    domain: str
    f1: bool  # signed with md5WithRSAEncryption
    f2: bool  # subject carries a placeholder value
    f3: bool  # self-signed (issuer name equals subject name)
    f4: bool  # expired at harvest time
    f5: bool  # chain verification failed
    f6: bool  # exact certificate shared with another domain
    f7: bool  # serial number shared across domain/cert pairs
    f8: bool  # valid for more than three years
    f9: str  # issuer common name
    f10: str  # issuer organization
    f11: str  # issuer country
    f12: str  # subject country
    f13: int  # validity period in whole days
    f14: int  # decimal digits in the serial number
    f15: float  # similarity of domain and subject common name
    label: str | None = None

    def __post_init__(self) -> None:
        if self.label not in (None, LABEL_POSITIVE, LABEL_NEGATIVE):
            raise ValueError(f"label must be pos/neg/None, not {self.label!r}")
        if not (0.0 <= self.f15 <= 1.0):
            raise ValueError(f"f15 out of range: {self.f15}")

    def value(self, name: str):
        return getattr(self, name)


def normalize_hostname(name: str) -> str:
    """Canonicalize a hostname for similarity comparison.

    Trims, lowercases, strips any trailing dot, and drops one leading
    "www." or "*." label so that a site and its common aliases compare
    as the same name.  Inner labels are left alone.
    """
    text = name.strip().lower().rstrip(".")
    for prefix in ("www.", "*."):
        if text.startswith(prefix):
            return text[len(prefix) :]
    return text


def _shingles(text: str, size: int) -> set[str]:
    if len(text) < size:
        return set(text)
    return {text[i : i + size] for i in range(len(text) - size + 1)}


def jaccard(a: str, b: str, shingle_size: int = DEFAULT_SHINGLE_SIZE) -> float:
    """Jaccard similarity of two strings over character shingles.

    Strings shorter than the shingle size fall back to their character
    sets; two empty strings count as identical (1.0).
    """
    if shingle_size not in (1, 2, 3):
        raise ValueError(f"shingle_size must be 1, 2 or 3, not {shingle_size}")
    sa = _shingles(a, shingle_size)
    sb = _shingles(b, shingle_size)
    if not sa and not sb:
        return 1.0
    union = len(sa | sb)
    if union == 0:
        return 1.0
    return len(sa & sb) / union


def serial_digit_count(serial: int) -> int:
    """Number of decimal digits of the serial; zero counts one digit."""
    return len(str(abs(serial)))


def is_bogus_subject(subject, bogus: BogusValueList) -> bool:
    """True iff any subject attribute value is a known placeholder."""
    return any(bogus.matches(value) for value in subject.values())


def extract_features(
    cert: CertificateSummary,
    domain: str,
    harvest_time: int,
    index: CorpusIndex,
    trust_store: Sequence[CertificateSummary],
    bogus: BogusValueList | None = None,
    presented_chain: Sequence[CertificateSummary] = (),
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
) -> FeatureVector:
    """Compute all fifteen features for one harvested certificate.

    The index must have been built over a corpus containing this
    (domain, certificate) pair; anything else raises IndexMismatch, since
    the duplicate features would silently come out wrong.
    """
    # Index identity keeps the full domain; alias stripping is only for f15.
    host = domain.strip().lower().rstrip(".")
    if not index.contains(host, cert.fingerprint):
        raise IndexMismatch(
            f"({host}, {cert.fingerprint[:16]}...) is not in the corpus index"
        )
    if bogus is None:
        bogus = BogusValueList.default()

    outcome = verify_chain(cert, list(presented_chain), list(trust_store), harvest_time)
    validity_days = (cert.not_after - cert.not_before) // SECONDS_PER_DAY
    subject_cn = cert.subject.get("CN") or MISSING
    return FeatureVector(
        domain=host,
        f1=cert.signature_algorithm.oid == OID_MD5_RSA,
        f2=is_bogus_subject(cert.subject, bogus),
        f3=dn_equal(cert.issuer, cert.subject),
        f4=harvest_time > cert.not_after,
        f5=not outcome.ok,
        f6=index.shared_certificate(cert.fingerprint),
        f7=index.shared_serial(cert.serial),
        f8=validity_days > THREE_YEARS_DAYS,
        f9=cert.issuer.get("CN") or MISSING,
        f10=cert.issuer.get("O") or MISSING,
        f11=cert.issuer.get("C") or MISSING,
        f12=cert.subject.get("C") or MISSING,
        f13=validity_days,
        f14=serial_digit_count(cert.serial),
        f15=jaccard(
            normalize_hostname(host), normalize_hostname(subject_cn), shingle_size
        ),
        label=None,
    )


def extract_corpus(
    records: Iterable[DomainRecord],
    trust_store: Sequence[CertificateSummary] = (),
    bogus: BogusValueList | None = None,
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
    index: CorpusIndex | None = None,
) -> list[FeatureVector]:
    """Extract features for every certificate-bearing domain in a corpus.

    Uses the newest record per domain.  When no index is given, one is
    built from the same records.  Records whose certificate bytes do not
    parse are skipped with a warning.
    """
    records = list(records)
    if index is None:
        index = build_corpus_index(records)
    vectors = []
    for record in sorted(latest_records(records), key=lambda r: r.domain):
        if record.cert_der is None:
            continue
        try:
            cert = parse_certificate(record.cert_der)
        except MalformedInput as exc:
            log.warning("skipping %s: %s", record.domain, exc)
            continue
        chain = []
        for der in record.presented_chain_der or ():
            if der == record.cert_der:
                continue
            try:
                chain.append(parse_certificate(der))
            except MalformedInput:
                log.warning("skipping unparseable chain certificate for %s", record.domain)
        vectors.append(
            extract_features(
                cert,
                record.domain,
                record.harvest_time,
                index,
                trust_store,
                bogus=bogus,
                presented_chain=chain,
                shingle_size=shingle_size,
            )
        )
    return vectors


# --- CSV interchange -------------------------------------------------------

CSV_HEADER = ("domain",) + FEATURE_NAMES + ("label",)


def _format_value(name: str, value) -> str:
    if name in BOOLEAN_FEATURES:
        return "1" if value else "0"
    if name in CATEGORICAL_FEATURES:
        return str(value)
    if name == "f15":
        return f"{value:.6f}"
    return str(int(value))


def write_features_csv(out: io.TextIOBase, vectors: Iterable[FeatureVector]) -> int:
    """Write feature vectors as CSV; returns the row count.

    Booleans are 0/1, f15 has six decimal places, and the label column is
    pos, neg, or empty for unlabeled rows.
    """
    writer = csv.writer(out, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    count = 0
    for fv in vectors:
        row = [fv.domain]
        row.extend(_format_value(name, fv.value(name)) for name in FEATURE_NAMES)
        row.append(fv.label or "")
        writer.writerow(row)
        count += 1
    return count


def _parse_bool(text: str, column: str) -> bool:
    if text == "1":
        return True
    if text == "0":
        return False
    raise SerializationFailure(f"column {column} must be 0 or 1, not {text!r}")


def read_features_csv(source: io.TextIOBase | str | os.PathLike) -> list[FeatureVector]:
    """Read feature vectors back from CSV produced by write_features_csv."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_features_csv(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise SerializationFailure("feature CSV is empty") from None
    if tuple(header) != CSV_HEADER:
        raise SerializationFailure(
            f"unexpected feature CSV header: {header!r}"
        )
    vectors = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise SerializationFailure(
                f"line {lineno}: expected {len(CSV_HEADER)} columns, got {len(row)}"
            )
        try:
            values = dict(zip(CSV_HEADER, row))
            label = values["label"] or None
            if label not in (None, LABEL_POSITIVE, LABEL_NEGATIVE):
                raise SerializationFailure(
                    f"line {lineno}: bad label {values['label']!r}"
                )
            vectors.append(
                FeatureVector(
                    domain=values["domain"],
                    **{name: _parse_bool(values[name], name) for name in BOOLEAN_FEATURES},
                    **{name: values[name] for name in CATEGORICAL_FEATURES},
                    f13=int(values["f13"]),
                    f14=int(values["f14"]),
                    f15=float(values["f15"]),
                    label=label,
                )
            )
        except (ValueError, KeyError) as exc:
            raise SerializationFailure(f"line {lineno} does not parse: {exc}") from exc
    return vectors


def relabel(vectors: Iterable[FeatureVector], label: str | None) -> list[FeatureVector]:
    return [replace(fv, label=label) for fv in vectors]
