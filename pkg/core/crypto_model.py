"""
Toy cryptography with explicit strength levels.

Every primitive runs at desk scale. Groups and moduli below the configured
breakability threshold are EXPORT strength and the breaking oracles solve
them for real (baby-step giant-step for discrete logs, trial factoring for
RSA). Anything at or above the threshold is STRONG and the oracles refuse.

Hashing, the PRF and the Finished MAC use real primitives from the
`cryptography` package; only key sizes and the collision oracle are toys.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from cryptography.hazmat.primitives import constant_time, hashes, hmac
from sympy import factorint, isprime, nextprime
from sympy.ntheory import n_order

from core.config import BREAKABILITY, MISREAD_PARAMS, ORACLE_COSTS, RSA_KEYS
from core.errors import EncodingError, GroupError, KeyParamError, OracleUnavailable
from core.models import Encryption, HashId, Strength, VersionId

logger = logging.getLogger(__name__)


def strength_of(modulus: int) -> Strength:
    """Classify a prime or RSA modulus against the breakability threshold."""
    return Strength.EXPORT if modulus < BREAKABILITY["threshold"] else Strength.STRONG


def byte_length(modulus: int) -> int:
    return max(1, (modulus.bit_length() + 7) // 8)


def int_to_bytes(value: int, length: int) -> bytes:
    return value.to_bytes(length, "big")


def seeded_rng(*parts: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of non-negative integers."""
    return np.random.default_rng([int(p) for p in parts])


def uniform_int(rng: np.random.Generator, low: int, high: int) -> int:
    """Draw an integer in [low, high) from rng, for ranges wider than int64."""
    if high <= low:
        raise ValueError("empty range")
    span = high - low
    if span < 2 ** 62:
        return low + int(rng.integers(0, span))
    raw = int.from_bytes(rng.bytes(byte_length(span) + 8), "big")
    return low + raw % span


def derive_seed(*parts: int) -> int:
    """Fold several integers into one 63-bit seed."""
    return int(seeded_rng(*parts).integers(0, 2 ** 63 - 1))


# ============================================================================
# DIFFIE-HELLMAN
# ============================================================================

@lru_cache(maxsize=None)
def _subgroup_order(generator: int, prime: int) -> int:
    return int(n_order(generator, prime))


@dataclass(frozen=True)
class DhGroup:
    """
    A prime-order-field Diffie-Hellman group.

    Attributes:
        prime_p: Group modulus
        generator_g: Generator in [2, p - 2]
        label: Group name used in negotiation
        family: "DH" for finite-field groups, "EC" for the ECDHE stand-ins
    """
    prime_p: int
    generator_g: int
    label: str
    family: str = "DH"

    def __post_init__(self):
        """Reject non-prime moduli and degenerate generators."""
        if self.prime_p < 5 or not isprime(self.prime_p):
            raise GroupError(f"group {self.label}: modulus {self.prime_p} is not a usable prime")
        if not 2 <= self.generator_g <= self.prime_p - 2:
            raise GroupError(f"group {self.label}: generator out of range")

    @property
    def strength(self) -> Strength:
        return strength_of(self.prime_p)

    @property
    def order(self) -> int:
        """Order of the subgroup generated by g."""
        return _subgroup_order(self.generator_g, self.prime_p)

    @property
    def exponent_bound(self) -> int:
        # Computing the order of a STRONG group is pointless work; p - 1 is a multiple.
        if self.strength is Strength.EXPORT:
            return self.order
        return self.prime_p - 1


@dataclass(frozen=True)
class DhKeyPair:
    """
    A Diffie-Hellman key pair.

    Attributes:
        group: Group the key lives in
        secret_exponent: Private exponent
        public_value: g^secret mod p
    """
    group: DhGroup
    secret_exponent: int
    public_value: int

    def __post_init__(self):
        if pow(self.group.generator_g, self.secret_exponent, self.group.prime_p) != self.public_value:
            raise KeyParamError("public value does not match secret exponent")


@dataclass(frozen=True)
class DhPublicValue:
    """A public DH value together with the group it claims to live in."""
    group: DhGroup
    public_value: int

    @property
    def strength(self) -> Strength:
        return self.group.strength


def dh_keygen(group: DhGroup, rng_seed: int) -> DhKeyPair:
    """
    Generate a key pair deterministically from a seed.

    Public values outside [2, p - 2] are redrawn so that every generated key
    is acceptable to dh_shared_secret.

    Args:
        group: Group to generate in
        rng_seed: Non-negative seed

    Returns:
        DhKeyPair with public_value = g^secret mod p
    """
    rng = seeded_rng(rng_seed)
    p, g = group.prime_p, group.generator_g
    bound = group.exponent_bound
    while True:
        secret = uniform_int(rng, 1, bound)
        public = pow(g, secret, p)
        if 2 <= public <= p - 2:
            return DhKeyPair(group=group, secret_exponent=secret, public_value=public)


def dh_shared_secret(own: DhKeyPair, peer_public: int) -> bytes:
    """Encode peer_public^secret mod p as a fixed-width byte string."""
    p = own.group.prime_p
    if not 2 <= peer_public <= p - 2:
        raise KeyParamError(f"peer public value out of range for group {own.group.label}")
    return int_to_bytes(pow(peer_public, own.secret_exponent, p), byte_length(p))


def baby_step_giant_step(generator: int, target: int, prime: int, order: int) -> Optional[int]:
    """
    Solve generator^x = target (mod prime) for x in [0, order).

    Returns:
        The exponent, or None when target is outside the generated subgroup
    """
    if order <= 0:
        return 0
    target %= prime
    if target == 1:
        return 0

    m = math.isqrt(order)
    if m * m < order:
        m += 1

    table = {}
    power = 1
    for j in range(m):
        table.setdefault(power, j)
        power = power * generator % prime

    giant = pow(generator, -m, prime)
    gamma = target
    for i in range(m + 1):
        if gamma in table:
            return (i * m + table[gamma]) % order
        gamma = gamma * giant % prime
    return None


# ============================================================================
# RSA
# ============================================================================

@dataclass(frozen=True)
class RsaPublicKey:
    """Public half of a toy RSA key."""
    modulus_n: int
    public_exp: int

    @property
    def strength(self) -> Strength:
        return strength_of(self.modulus_n)


@dataclass(frozen=True)
class RsaToyKey:
    """
    A toy RSA key pair.

    Attributes:
        modulus_n: Product of two primes
        public_exp: Public exponent
        private_exp: Private exponent
        shared_with_sslv2: Whether an SSLv2 endpoint serves the same key
    """
    modulus_n: int
    public_exp: int
    private_exp: int
    shared_with_sslv2: bool = False

    def __post_init__(self):
        """Encryption followed by decryption must be the identity."""
        sample = 2 % self.modulus_n
        if pow(pow(sample, self.public_exp, self.modulus_n), self.private_exp, self.modulus_n) != sample:
            raise KeyParamError("RSA exponents are not inverse")

    @property
    def strength(self) -> Strength:
        return strength_of(self.modulus_n)

    @property
    def public(self) -> RsaPublicKey:
        return RsaPublicKey(self.modulus_n, self.public_exp)


def rsa_key_from_primes(p: int, q: int, public_exp: int, shared_with_sslv2: bool = False) -> RsaToyKey:
    """Build a key pair from two distinct primes."""
    if p == q or not (isprime(p) and isprime(q)):
        raise KeyParamError("RSA key needs two distinct primes")
    try:
        private_exp = pow(public_exp, -1, (p - 1) * (q - 1))
    except ValueError as exc:
        raise KeyParamError("public exponent not invertible modulo phi") from exc
    return RsaToyKey(p * q, public_exp, private_exp, shared_with_sslv2)


def generate_rsa_key(strength: Strength, seed: int, shared_with_sslv2: bool = False) -> RsaToyKey:
    """
    Generate a deterministic toy RSA key of the requested strength.

    Args:
        strength: EXPORT for ephemeral export keys, STRONG for long-term keys
        seed: Non-negative seed
        shared_with_sslv2: Marks the key as also served by an SSLv2 endpoint

    Returns:
        RsaToyKey whose modulus falls on the requested side of the threshold
    """
    low, high = RSA_KEYS["export_prime_range" if strength is Strength.EXPORT else "strong_prime_range"]
    e = RSA_KEYS["public_exp"]
    rng = seeded_rng(seed)
    while True:
        p = int(nextprime(uniform_int(rng, low, high)))
        q = int(nextprime(uniform_int(rng, low, high)))
        if p == q or math.gcd(e, (p - 1) * (q - 1)) != 1:
            continue
        return rsa_key_from_primes(p, q, e, shared_with_sslv2)


def misread_rsa_key() -> RsaToyKey:
    """The export-size RSA key any non-RSA parameters collapse into when read as RSA."""
    p, q = MISREAD_PARAMS["RSA"]["primes"]
    return rsa_key_from_primes(p, q, MISREAD_PARAMS["RSA"]["public_exp"])


def rsa_wrap_pms(pms: bytes, key: Union[RsaPublicKey, RsaToyKey]) -> bytes:
    """Encrypt a premaster secret under an RSA public key."""
    m = int.from_bytes(pms, "big")
    if not 2 <= m < key.modulus_n:
        raise EncodingError("premaster secret does not fit the RSA message space")
    return int_to_bytes(pow(m, key.public_exp, key.modulus_n), byte_length(key.modulus_n))


def rsa_unwrap_pms(ciphertext: bytes, key: RsaToyKey) -> bytes:
    c = int.from_bytes(ciphertext, "big") % key.modulus_n
    return int_to_bytes(pow(c, key.private_exp, key.modulus_n), byte_length(key.modulus_n))


def _signature_digest(data: bytes, modulus: int) -> int:
    return int.from_bytes(digest_bytes(data, HashId.STRONG), "big") % modulus


def rsa_sign(key: RsaToyKey, data: bytes) -> bytes:
    """Hash-then-sign; unforgeable without the private exponent at every size."""
    h = _signature_digest(data, key.modulus_n)
    return int_to_bytes(pow(h, key.private_exp, key.modulus_n), byte_length(key.modulus_n))


def rsa_verify(key: Union[RsaPublicKey, RsaToyKey], data: bytes, signature: bytes) -> bool:
    s = int.from_bytes(signature, "big")
    if s >= key.modulus_n:
        return False
    return pow(s, key.public_exp, key.modulus_n) == _signature_digest(data, key.modulus_n)


# ============================================================================
# WORK BUDGET AND ORACLES
# ============================================================================

@dataclass(frozen=True)
class Infeasible:
    """Result of an oracle call that did not succeed."""
    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass
class WorkBudget:
    """
    Work units the adversary may still spend.

    Attributes:
        remaining_units: Units left; never increases
        debits: (purpose, cost) for every successful oracle call
    """
    remaining_units: int
    debits: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.remaining_units < 0:
            raise ValueError("Work budget cannot be negative")

    @property
    def spent(self) -> int:
        return sum(cost for _, cost in self.debits)

    def can_afford(self, cost: int) -> bool:
        return cost <= self.remaining_units

    def debit(self, cost: int, purpose: str) -> None:
        if not self.can_afford(cost):
            raise ValueError("debit exceeds remaining budget")
        self.remaining_units -= cost
        self.debits.append((purpose, cost))
        logger.debug("Debited %d units for %s (%d left)", cost, purpose, self.remaining_units)


def dlog_cost(group: DhGroup) -> int:
    return math.isqrt(group.order - 1) + 1 if group.order > 1 else 1


def recover_private(
    public_params: Union[DhPublicValue, RsaPublicKey],
    budget: WorkBudget,
) -> Union[int, Infeasible]:
    """
    Recover the private half of an EXPORT-strength public key.

    For DH values this returns the secret exponent (baby-step giant-step);
    for RSA keys it returns the private exponent (factoring by smallest
    prime factor). STRONG keys and unaffordable work return Infeasible
    without debiting.

    Args:
        public_params: Public DH value with its group, or an RSA public key
        budget: Adversary budget, debited on success

    Returns:
        The recovered secret, or Infeasible
    """
    if isinstance(public_params, DhPublicValue):
        group = public_params.group
        y = public_params.public_value
        if not 1 <= y <= group.prime_p - 1:
            raise KeyParamError("public value outside the group")
        if group.strength is Strength.STRONG:
            return Infeasible(f"group {group.label} is STRONG")
        cost = dlog_cost(group)
        if not budget.can_afford(cost):
            return Infeasible(f"discrete log in {group.label} costs {cost} units")
        secret = baby_step_giant_step(group.generator_g, y, group.prime_p, group.order)
        if secret is None:
            return Infeasible("public value is not in the generated subgroup")
        budget.debit(cost, f"dlog in {group.label}")
        return secret

    if isinstance(public_params, RsaPublicKey):
        n = public_params.modulus_n
        if n < 6:
            raise KeyParamError("RSA modulus too small")
        if public_params.strength is Strength.STRONG:
            return Infeasible("RSA modulus is STRONG")
        factors = factorint(n)
        if len(factors) != 2 or any(exp != 1 for exp in factors.values()):
            raise KeyParamError("RSA modulus is not a product of two distinct primes")
        p, q = sorted(factors)
        if not budget.can_afford(p):
            return Infeasible(f"factoring costs {p} units")
        try:
            private_exp = pow(public_params.public_exp, -1, (p - 1) * (q - 1))
        except ValueError as exc:
            raise KeyParamError("public exponent not invertible") from exc
        budget.debit(p, "factor RSA modulus")
        return private_exp

    raise KeyParamError(f"unsupported public parameters: {type(public_params).__name__}")


def bleichenbacher_decrypt(ciphertext: bytes, key: RsaToyKey, budget: WorkBudget) -> Union[bytes, Infeasible]:
    """Decrypt an RSA-wrapped secret through an SSLv2 endpoint sharing the key."""
    if not key.shared_with_sslv2:
        return Infeasible("no SSLv2 endpoint shares this key")
    cost = ORACLE_COSTS["bleichenbacher"]
    if not budget.can_afford(cost):
        return Infeasible(f"decryption oracle costs {cost} units")
    budget.debit(cost, "bleichenbacher oracle")
    return rsa_unwrap_pms(ciphertext, key)


# ============================================================================
# HASHES, PRF, MACS
# ============================================================================

@dataclass(frozen=True)
class HashAlgo:
    """Transcript hash selector."""
    id: HashId

    @property
    def collision_resistant(self) -> bool:
        return self.id is HashId.STRONG


WEAK_HASH = HashAlgo(HashId.WEAK_MD5SHA1)
STRONG_HASH = HashAlgo(HashId.STRONG)


@dataclass(frozen=True)
class CollisionTable:
    """Chosen-prefix collisions registered by the adversary, as (original, forged) pairs."""
    entries: frozenset[tuple[bytes, bytes]] = frozenset()

    def with_pair(self, original: bytes, forged: bytes) -> CollisionTable:
        return CollisionTable(self.entries | {(original, forged)})


EMPTY_COLLISIONS = CollisionTable()


def digest_bytes(data: bytes, hash_id: HashId) -> bytes:
    if hash_id is HashId.STRONG:
        h = hashes.Hash(hashes.SHA256())
        h.update(data)
        return h.finalize()
    md5 = hashes.Hash(hashes.MD5())
    md5.update(data)
    sha1 = hashes.Hash(hashes.SHA1())
    sha1.update(data)
    return md5.finalize() + sha1.finalize()


def transcript_hash(
    log: Sequence[bytes],
    algo: Union[HashAlgo, HashId],
    collisions: CollisionTable = EMPTY_COLLISIONS,
) -> bytes:
    """
    Hash an ordered handshake log.

    Under the weak hash a log that starts with a registered forged prefix
    hashes exactly like the same log starting with the original prefix.
    """
    algo = algo if isinstance(algo, HashAlgo) else HashAlgo(algo)
    data = b"".join(log)
    if not algo.collision_resistant:
        for original, forged in sorted(collisions.entries):
            if data.startswith(forged):
                data = original + data[len(forged):]
                break
    return digest_bytes(data, algo.id)


def prf(key: bytes, label: str, data: bytes) -> bytes:
    """HMAC-SHA256 keyed pseudorandom function over a labelled input."""
    mac = hmac.HMAC(key or b"\x00", hashes.SHA256())
    mac.update(label.encode("ascii") + b"\x00" + data)
    return mac.finalize()


@dataclass(frozen=True)
class SecretBundle:
    """
    Session secrets.

    Attributes:
        pms: Premaster secret
        ms: Master secret
        k_I: Initiator (client) write key
        k_R: Responder (server) write key
    """
    pms: bytes
    ms: bytes
    k_I: bytes
    k_R: bytes


def derive_secrets(pms: bytes, n_I: bytes, n_R: bytes) -> SecretBundle:
    ms = prf(pms, "ms", n_I + n_R)
    return SecretBundle(
        pms=pms,
        ms=ms,
        k_I=prf(ms, "kI", n_R + n_I),
        k_R=prf(ms, "kR", n_R + n_I),
    )


def finished_mac(ms: bytes, digest: bytes) -> bytes:
    return prf(ms, "fin", digest)


def verify_mac(tag: bytes, ms: bytes, digest: bytes) -> bool:
    return constant_time.bytes_eq(tag, finished_mac(ms, digest))


def register_collision(
    table: CollisionTable,
    original: bytes,
    forged: bytes,
    algo: HashAlgo,
    budget: WorkBudget,
) -> Union[CollisionTable, Infeasible]:
    """Buy a chosen-prefix collision between two transcript prefixes."""
    if algo.collision_resistant:
        raise OracleUnavailable("collision oracle needs a non-collision-resistant hash")
    cost = ORACLE_COSTS["collision"]
    if not budget.can_afford(cost):
        return Infeasible(f"collision costs {cost} units")
    budget.debit(cost, "transcript collision")
    return table.with_pair(original, forged)


# ============================================================================
# RECORDS
# ============================================================================

def _keystream(key: bytes, length: int, sequence: int) -> np.ndarray:
    blocks = []
    counter = 0
    while 32 * len(blocks) < length:
        blocks.append(prf(key, "enc", sequence.to_bytes(8, "big") + counter.to_bytes(4, "big")))
        counter += 1
    return np.frombuffer(b"".join(blocks)[:length], dtype=np.uint8)


def _xor(data: bytes, key: bytes, sequence: int) -> bytes:
    plain = np.frombuffer(data, dtype=np.uint8)
    return np.bitwise_xor(plain, _keystream(key, len(data), sequence)).tobytes()


def seal_record(key: bytes, plaintext: bytes, enc: Encryption, sequence: int = 0) -> tuple[bytes, bytes]:
    """Encrypt one application record; NULL encryption leaves the payload readable."""
    body = plaintext if enc is Encryption.NULL else _xor(plaintext, key, sequence)
    tag = prf(key, "rec", sequence.to_bytes(8, "big") + body)
    return body, tag


def open_record(key: bytes, ciphertext: bytes, tag: bytes, enc: Encryption, sequence: int = 0) -> Optional[bytes]:
    """Decrypt one record, or None when the tag does not verify."""
    expected = prf(key, "rec", sequence.to_bytes(8, "big") + ciphertext)
    if not constant_time.bytes_eq(expected, tag):
        return None
    return ciphertext if enc is Encryption.NULL else _xor(ciphertext, key, sequence)


def cbc_recover(
    record: tuple[bytes, bytes],
    oracle_key: bytes,
    version: VersionId,
    enc: Encryption,
    marker: bytes,
    terminator: bytes,
    budget: WorkBudget,
) -> Union[bytes, Infeasible]:
    """
    Recover the secret after `marker` in an SSL 3.0 CBC record.

    The oracle key stands for the server's padding checks; the adversary
    never learns it, only the recovered bytes.
    """
    if version is not VersionId.SSL30 or enc is not Encryption.CBC_BLOCK:
        return Infeasible("no padding oracle outside SSL 3.0 CBC")
    plaintext = open_record(oracle_key, record[0], record[1], enc)
    if plaintext is None:
        return Infeasible("record rejected by the server")
    start = plaintext.find(marker)
    if start < 0:
        return Infeasible("secret marker not present")
    start += len(marker)
    end = plaintext.find(terminator, start)
    secret = plaintext[start:end if end >= 0 else len(plaintext)]
    cost = ORACLE_COSTS["cbc_per_byte"] * len(secret)
    if not budget.can_afford(cost):
        return Infeasible(f"padding oracle costs {cost} units")
    budget.debit(cost, "cbc padding oracle")
    return secret
