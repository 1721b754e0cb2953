"""X.509 certificate parsing and chain verification.

The parser reduces a certificate to the handful of fields the feature
extractor cares about (names, validity window, serial, signature algorithm,
SHA-256 fingerprint) and keeps the exact DER bytes as the identity of the
certificate.  Verification builds an issuer path from the certificates a
server presented plus a local trust store and reports a single verdict;
hostname checking is deliberately out of scope because name mismatch is
judged separately by the name-similarity feature.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import re
from dataclasses import dataclass
from enum import Enum

from cryptography import x509
from cryptography.hazmat.primitives.serialization import Encoding

from .errors import MalformedInput

log = logging.getLogger(__name__)

# Short names for the DN attribute types that actually occur in harvested
# certificates.  Anything else keeps its dotted OID.
_DN_ATTR_NAMES = {
    "2.5.4.3": "CN",
    "2.5.4.6": "C",
    "2.5.4.7": "L",
    "2.5.4.8": "ST",
    "2.5.4.10": "O",
    "2.5.4.11": "OU",
    "2.5.4.5": "serialNumber",
    "2.5.4.4": "SN",
    "2.5.4.42": "GN",
    "2.5.4.12": "title",
    "2.5.4.9": "street",
    "2.5.4.17": "postalCode",
    "2.5.4.15": "businessCategory",
    "0.9.2342.19200300.100.1.25": "DC",
    "0.9.2342.19200300.100.1.1": "UID",
    "1.2.840.113549.1.9.1": "emailAddress",
    "1.2.840.113549.1.9.2": "unstructuredName",
}

_SIGNATURE_ALGORITHM_NAMES = {
    "1.2.840.113549.1.1.2": "md2WithRSAEncryption",
    "1.2.840.113549.1.1.4": "md5WithRSAEncryption",
    "1.2.840.113549.1.1.5": "sha1WithRSAEncryption",
    "1.2.840.113549.1.1.11": "sha256WithRSAEncryption",
    "1.2.840.113549.1.1.12": "sha384WithRSAEncryption",
    "1.2.840.113549.1.1.13": "sha512WithRSAEncryption",
    "1.2.840.113549.1.1.10": "rsassaPss",
    "1.2.840.10040.4.3": "dsaWithSha1",
    "2.16.840.1.101.3.4.3.2": "dsaWithSha256",
    "1.2.840.10045.4.1": "ecdsaWithSha1",
    "1.2.840.10045.4.3.2": "ecdsaWithSha256",
    "1.2.840.10045.4.3.3": "ecdsaWithSha384",
    "1.2.840.10045.4.3.4": "ecdsaWithSha512",
    "1.3.101.112": "ed25519",
    "1.3.101.113": "ed448",
}

OID_MD5_RSA = "1.2.840.113549.1.1.4"

_PEM_BLOCK = re.compile(
    rb"-----BEGIN CERTIFICATE-----(.*?)-----END CERTIFICATE-----",
    re.DOTALL,
)


@dataclass(frozen=True)
class DistinguishedName:
    """An X.500 name as an ordered sequence of (type, value) attributes."""

    attributes: tuple[tuple[str, str], ...]

    def get(self, attr_type: str) -> str | None:
        """First non-blank value of the given attribute type, or None."""
        for name, value in self.attributes:
            if name == attr_type and value.strip():
                return value
        return None

    def values(self) -> tuple[str, ...]:
        return tuple(value for _, value in self.attributes)

    def text(self) -> str:
        return ", ".join(f"{name}={value}" for name, value in self.attributes)


@dataclass(frozen=True)
class SignatureAlgorithm:
    oid: str
    name: str


@dataclass(frozen=True)
class CertificateSummary:
    """The parsed fields of one certificate plus its exact DER bytes."""

    serial: int
    signature_algorithm: SignatureAlgorithm
    issuer: DistinguishedName
    subject: DistinguishedName
    not_before: int
    not_after: int
    der_bytes: bytes
    fingerprint: str

    def __repr__(self) -> str:  # keep DER out of debug output
        return (
            f"CertificateSummary(subject={self.subject.text()!r}, "
            f"issuer={self.issuer.text()!r}, serial={self.serial}, "
            f"fingerprint={self.fingerprint[:16]}...)"
        )


class Verdict(Enum):
    VERIFIED = "Verified"
    SELF_SIGNED = "SelfSigned"
    UNTRUSTED_ROOT = "UntrustedRoot"
    EXPIRED = "Expired"
    NOT_YET_VALID = "NotYetValid"
    BAD_SIGNATURE = "BadSignature"
    MALFORMED_CHAIN = "MalformedChain"


@dataclass(frozen=True)
class VerificationOutcome:
    verdict: Verdict
    detail: str

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.VERIFIED


def _convert_name(name: x509.Name) -> DistinguishedName:
    attrs: list[tuple[str, str]] = []
    for rdn in name.rdns:
        for attr in rdn:
            label = _DN_ATTR_NAMES.get(attr.oid.dotted_string, attr.oid.dotted_string)
            value = attr.value
            if isinstance(value, bytes):
                value = value.decode("utf-8", errors="replace")
            attrs.append((label, value))
    return DistinguishedName(tuple(attrs))


def _pem_to_der(blob: bytes) -> bytes:
    blocks = _PEM_BLOCK.findall(blob)
    if len(blocks) != 1:
        raise MalformedInput(
            f"expected exactly one PEM certificate block, found {len(blocks)}"
        )
    try:
        return base64.b64decode(b"".join(blocks[0].split()), validate=True)
    except (ValueError, base64.binascii.Error) as exc:
        raise MalformedInput(f"PEM body is not valid base64: {exc}") from exc


def parse_certificate(blob: bytes | str) -> CertificateSummary:
    """Parse one certificate from DER bytes or PEM text.

    The summary's der_bytes are exactly the bytes that were transported
    (for PEM input, the decoded block body), so the SHA-256 fingerprint
    identifies the certificate as served.  Serials with a negative
    encoding are normalized to their absolute value with a warning.

    Raises MalformedInput for undecodable blobs, for PEM text holding
    anything other than exactly one certificate block, and for
    certificates whose validity window is inverted.
    """
    if isinstance(blob, str):
        blob = blob.encode("utf-8", errors="replace")
    if not blob:
        raise MalformedInput("empty certificate blob")
    if b"-----BEGIN CERTIFICATE-----" in blob:
        der = _pem_to_der(blob)
    else:
        der = bytes(blob)
    try:
        cert = x509.load_der_x509_certificate(der)
    except Exception as exc:
        raise MalformedInput(f"certificate does not decode: {exc}") from exc

    try:
        serial = cert.serial_number
        oid = cert.signature_algorithm_oid.dotted_string
        issuer = _convert_name(cert.issuer)
        subject = _convert_name(cert.subject)
        not_before = int(cert.not_valid_before_utc.timestamp())
        not_after = int(cert.not_valid_after_utc.timestamp())
    except Exception as exc:
        raise MalformedInput(f"certificate fields do not decode: {exc}") from exc

    if serial < 0:
        log.warning("negative serial %d normalized to absolute value", serial)
        serial = -serial
    if not_before > not_after:
        raise MalformedInput(
            f"validity window is inverted ({not_before} > {not_after})"
        )
    return CertificateSummary(
        serial=serial,
        signature_algorithm=SignatureAlgorithm(
            oid=oid, name=_SIGNATURE_ALGORITHM_NAMES.get(oid, oid)
        ),
        issuer=issuer,
        subject=subject,
        not_before=not_before,
        not_after=not_after,
        der_bytes=der,
        fingerprint=hashlib.sha256(der).hexdigest(),
    )


def dn_equal(a: DistinguishedName, b: DistinguishedName) -> bool:
    """Compare two names as multisets of (type, trimmed value) pairs.

    Attribute order does not matter; repeated attributes must occur the
    same number of times on both sides.
    """
    key_a = sorted((name, value.strip()) for name, value in a.attributes)
    key_b = sorted((name, value.strip()) for name, value in b.attributes)
    return key_a == key_b


def load_trust_store(path: str) -> list[CertificateSummary]:
    """Load all PEM certificate blocks from a bundle file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    blocks = _PEM_BLOCK.findall(blob)
    if not blocks:
        raise MalformedInput(f"no PEM certificate blocks in {path}")
    anchors = []
    for body in blocks:
        try:
            der = base64.b64decode(b"".join(body.split()), validate=True)
        except (ValueError, base64.binascii.Error) as exc:
            raise MalformedInput(f"trust store PEM body is not base64: {exc}") from exc
        anchors.append(parse_certificate(der))
    return anchors


def _signature_valid(child: CertificateSummary, parent: CertificateSummary) -> bool:
    """True if parent's key verifies child's signature.

    Any failure to verify (bad signature bytes, key type mismatch, an
    algorithm the crypto backend refuses) counts as invalid.
    """
    try:
        child_x = x509.load_der_x509_certificate(child.der_bytes)
        parent_x = x509.load_der_x509_certificate(parent.der_bytes)
        child_x.verify_directly_issued_by(parent_x)
        return True
    except Exception:
        return False


def _find_issuer(
    candidates: list[CertificateSummary], issuer: DistinguishedName
) -> CertificateSummary | None:
    for cand in candidates:
        if dn_equal(cand.subject, issuer):
            return cand
    return None


_MAX_PATH = 16


def verify_chain(
    leaf: CertificateSummary,
    presented_chain: list[CertificateSummary],
    trust_store: list[CertificateSummary],
    at_time: int,
) -> VerificationOutcome:
    """Build an issuer path for leaf and judge it at the given time.

    The path walks from the leaf through the presented certificates
    (matching issuer name to subject name) until it reaches a trust
    anchor.  Failures are reported in a fixed order: structural problems
    (duplicate presented certificates, issuer loops, absurdly long
    paths) as MalformedChain; a leaf that is its own issuer as
    SelfSigned; a walk that never reaches the store as UntrustedRoot;
    then validity windows leaf-first (Expired / NotYetValid); then
    per-link signature checks (BadSignature).  A leaf that is itself a
    trust anchor verifies against its own key.  Hostname matching is
    not performed here.
    """
    presented = list(presented_chain)
    fingerprints = [c.fingerprint for c in presented]
    if len(set(fingerprints)) != len(fingerprints):
        return VerificationOutcome(
            Verdict.MALFORMED_CHAIN, "duplicate certificates in presented chain"
        )

    anchor_fps = {c.fingerprint for c in trust_store}
    path: list[CertificateSummary]
    self_anchor = leaf.fingerprint in anchor_fps
    if self_anchor:
        path = [leaf]
    elif dn_equal(leaf.issuer, leaf.subject):
        return VerificationOutcome(
            Verdict.SELF_SIGNED, f"leaf is self-signed: {leaf.subject.text()}"
        )
    else:
        path = [leaf]
        seen = {leaf.fingerprint}
        current = leaf
        while True:
            if len(path) > _MAX_PATH:
                return VerificationOutcome(
                    Verdict.MALFORMED_CHAIN, f"path longer than {_MAX_PATH}"
                )
            anchor = _find_issuer(trust_store, current.issuer)
            if anchor is not None:
                path.append(anchor)
                break
            nxt = _find_issuer(
                [c for c in presented if c.fingerprint != leaf.fingerprint],
                current.issuer,
            )
            if nxt is None:
                return VerificationOutcome(
                    Verdict.UNTRUSTED_ROOT,
                    f"no trusted issuer found for {current.issuer.text()!r}",
                )
            if nxt.fingerprint in seen:
                return VerificationOutcome(
                    Verdict.MALFORMED_CHAIN, "issuer loop in presented chain"
                )
            path.append(nxt)
            seen.add(nxt.fingerprint)
            current = nxt

    for cert in path:
        if at_time > cert.not_after:
            which = "leaf" if cert is path[0] else "issuer"
            return VerificationOutcome(
                Verdict.EXPIRED, f"{which} certificate expired: {cert.subject.text()}"
            )
        if at_time < cert.not_before:
            which = "leaf" if cert is path[0] else "issuer"
            return VerificationOutcome(
                Verdict.NOT_YET_VALID,
                f"{which} certificate not yet valid: {cert.subject.text()}",
            )

    if len(path) == 1:
        if not _signature_valid(path[0], path[0]):
            return VerificationOutcome(
                Verdict.BAD_SIGNATURE, "trust anchor self-signature does not verify"
            )
    else:
        for child, parent in zip(path, path[1:]):
            if not _signature_valid(child, parent):
                return VerificationOutcome(
                    Verdict.BAD_SIGNATURE,
                    f"signature on {child.subject.text()!r} does not verify "
                    f"against {parent.subject.text()!r}",
                )

    return VerificationOutcome(Verdict.VERIFIED, f"path length {len(path)}")
