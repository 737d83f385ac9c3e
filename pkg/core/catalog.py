"""
Cipher suite, group and protocol version catalog.

This module holds the fixed lookup tables every endpoint negotiates from:
the cipher suites with their algorithms and version ranges, the named
Diffie-Hellman groups, and the per-version feature table.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional

from core.config import DH_GROUPS, MISREAD_PARAMS
from core.crypto_model import DhGroup
from core.errors import NotFound
from core.models import CipherSuite, Encryption, HashId, KeyExchange, VersionId

V = VersionId
KX = KeyExchange
ENC = Encryption


def _suite(suite_id, kx, enc, hash_id, lo, hi) -> CipherSuite:
    return CipherSuite(suite_id=suite_id, kx=kx, enc=enc, hash=hash_id, min_version=lo, max_version=hi)


CIPHER_SUITES: dict[str, CipherSuite] = {s.suite_id: s for s in (
    # Legacy suites, SSL 2.0 onwards
    _suite("RSA_WITH_NULL_MD5", KX.RSA, ENC.NULL, HashId.WEAK_MD5SHA1, V.SSL20, V.TLS12),
    _suite("RSA_EXPORT_WITH_RC4_40_MD5", KX.RSA_EXPORT, ENC.EXPORT_CIPHER, HashId.WEAK_MD5SHA1, V.SSL20, V.TLS12),
    _suite("RSA_WITH_3DES_EDE_CBC_SHA", KX.RSA, ENC.CBC_BLOCK, HashId.STRONG, V.SSL20, V.TLS12),
    # SSL 3.0 onwards
    _suite("RSA_WITH_AES_128_CBC_SHA", KX.RSA, ENC.CBC_BLOCK, HashId.STRONG, V.SSL30, V.TLS12),
    _suite("RSA_EXPORT_WITH_DES40_CBC_SHA", KX.RSA_EXPORT, ENC.EXPORT_CIPHER, HashId.STRONG, V.SSL30, V.TLS12),
    _suite("DHE_RSA_WITH_3DES_EDE_CBC_SHA", KX.DHE, ENC.CBC_BLOCK, HashId.STRONG, V.SSL30, V.TLS12),
    _suite("DHE_RSA_EXPORT_WITH_DES40_CBC_SHA", KX.DHE_EXPORT, ENC.EXPORT_CIPHER, HashId.STRONG, V.SSL30, V.TLS12),
    # TLS 1.0 onwards
    _suite("ECDHE_RSA_WITH_AES_128_CBC_SHA", KX.ECDHE, ENC.CBC_BLOCK, HashId.STRONG, V.TLS10, V.TLS12),
    # TLS 1.2 only
    _suite("RSA_WITH_AES_128_GCM_SHA256", KX.RSA, ENC.STRONG_AEAD, HashId.STRONG, V.TLS12, V.TLS12),
    _suite("DHE_RSA_WITH_AES_128_GCM_SHA256", KX.DHE, ENC.STRONG_AEAD, HashId.STRONG, V.TLS12, V.TLS12),
    _suite("ECDHE_RSA_WITH_AES_128_GCM_SHA256", KX.ECDHE, ENC.STRONG_AEAD, HashId.STRONG, V.TLS12, V.TLS12),
    # TLS 1.3 (key exchange travels in key_share)
    _suite("TLS13_AES_128_GCM_SHA256", KX.ECDHE, ENC.STRONG_AEAD, HashId.STRONG, V.TLS13_DRAFT10, V.TLS13_FINAL),
    _suite("TLS13_CHACHA20_POLY1305_SHA256", KX.ECDHE, ENC.STRONG_AEAD, HashId.STRONG, V.TLS13_DRAFT10, V.TLS13_FINAL),
)}


# Version feature table. One byte codes are what the sentinel carries.
VERSION_FEATURES = {
    V.SSL20: {"code": 0x02, "finished_mac": False, "weak_finished_hash": False,
              "restart_transcript_on_hrr": False, "sentinel": False},
    V.SSL30: {"code": 0x30, "finished_mac": True, "weak_finished_hash": True,
              "restart_transcript_on_hrr": False, "sentinel": False},
    V.TLS10: {"code": 0x31, "finished_mac": True, "weak_finished_hash": True,
              "restart_transcript_on_hrr": False, "sentinel": False},
    V.TLS11: {"code": 0x32, "finished_mac": True, "weak_finished_hash": True,
              "restart_transcript_on_hrr": False, "sentinel": False},
    V.TLS12: {"code": 0x33, "finished_mac": True, "weak_finished_hash": False,
              "restart_transcript_on_hrr": False, "sentinel": False},
    V.TLS13_DRAFT10: {"code": 0x3A, "finished_mac": True, "weak_finished_hash": False,
                      "restart_transcript_on_hrr": True, "sentinel": False},
    V.TLS13_FINAL: {"code": 0x34, "finished_mac": True, "weak_finished_hash": False,
                    "restart_transcript_on_hrr": False, "sentinel": True},
}


def get_cipher_suite(suite_id: str) -> CipherSuite:
    """
    Look up a cipher suite by id.

    Raises:
        NotFound: If the id is not in the catalog
    """
    try:
        return CIPHER_SUITES[suite_id]
    except KeyError:
        raise NotFound(f"unknown cipher suite {suite_id!r}") from None


def get_all_suites() -> list[CipherSuite]:
    return list(CIPHER_SUITES.values())


@lru_cache(maxsize=None)
def get_group(label: str) -> DhGroup:
    """
    Look up a named group, including the two misread stand-in groups.

    Raises:
        NotFound: If the label is unknown
    """
    if label in DH_GROUPS:
        spec = DH_GROUPS[label]
        return DhGroup(spec["prime"], spec["generator"], label, spec["family"])
    for family in ("DH", "EC"):
        spec = MISREAD_PARAMS[family]
        if spec["label"] == label:
            return DhGroup(spec["prime"], spec["generator"], label, family)
    raise NotFound(f"unknown group {label!r}")


def group_family(label: str) -> str:
    return get_group(label).family


def find_group(prime: int, generator: int) -> Optional[str]:
    """Name of the catalog group with these parameters, if any."""
    for label, spec in DH_GROUPS.items():
        if spec["prime"] == prime and spec["generator"] == generator:
            return label
    return None


def versions_between(low: VersionId, high: VersionId) -> tuple[VersionId, ...]:
    """All versions in [low, high], oldest first."""
    return tuple(v for v in VersionId if low <= v <= high)


def previous_version(version: VersionId) -> Optional[VersionId]:
    ordered = list(VersionId)
    index = ordered.index(version)
    return ordered[index - 1] if index > 0 else None


def version_code(version: VersionId) -> int:
    return VERSION_FEATURES[version]["code"]


def version_from_code(code: int) -> Optional[VersionId]:
    for version, features in VERSION_FEATURES.items():
        if features["code"] == code:
            return version
    return None


def finished_hash(version: VersionId, suite: CipherSuite) -> Optional[HashId]:
    """
    Hash used for the Finished transcript in a given version and suite.

    Returns:
        None for SSL 2.0 (no Finished), the weak hash up to TLS 1.1,
        the suite's hash in TLS 1.2 and the strong hash in TLS 1.3
    """
    features = VERSION_FEATURES[version]
    if not features["finished_mac"]:
        return None
    if features["weak_finished_hash"]:
        return HashId.WEAK_MD5SHA1
    if version.is_tls13:
        return HashId.STRONG
    return suite.hash


def rsa_counterpart(suite: CipherSuite) -> CipherSuite:
    """
    The RSA key-transport suite with the same bulk encryption and version range.

    Used by endpoints that fall back from a forward-secret exchange.
    """
    for candidate in CIPHER_SUITES.values():
        if (candidate.kx is KX.RSA and candidate.enc is suite.enc
                and candidate.min_version <= suite.max_version
                and candidate.max_version >= suite.min_version):
            return candidate
    raise NotFound(f"no RSA counterpart for {suite.suite_id}")
