"""
Configuration module for breakability thresholds, oracle costs and toy key material.

This module centralizes every constant that decides what the simulated
adversary can break and how much work it costs. The values are sized for
desk-scale runs: anything below the breakability threshold is solved for
real by the oracles in core.crypto_model, anything above it is refused.

Note: These values are modelling choices, not measurements:
- The threshold stands in for "export-grade" (historically 512-bit keys)
- Work units are abstract; only their ratios to the default budget matter
- Group primes are Mersenne primes so primality checks stay instant

Adjust them to explore how budget and key sizes change the attack matrix.
"""

# ============================================================================
# BREAKABILITY
# ============================================================================
# A modulus or group prime below the threshold is EXPORT strength and can be
# broken by baby-step giant-step or trial factoring within the default budget.
# Anything at or above it is STRONG and every oracle refuses it.

BREAKABILITY = {
    "threshold": 2 ** 24,        # Moduli / primes below this are EXPORT
}

# ============================================================================
# ADVERSARY WORK MODEL
# ============================================================================
# Costs in abstract work units, debited from the adversary's WorkBudget.
# Discrete-log cost is ceil(sqrt(order)); factoring cost is the smallest prime
# factor. The remaining oracles have fixed prices.

ORACLE_COSTS = {
    "bleichenbacher": 50_000,    # One decryption through the SSLv2 oracle
    "collision": 200_000,        # One chosen-prefix transcript collision
    "cbc_per_byte": 256,         # Padding-oracle guesses per recovered byte
}

ADVERSARY_DEFAULTS = {
    "budget_units": 1_000_000,   # Budget when a script does not name one
    "interpret_family": None,    # recover_key reads params as the client view does
}

# ============================================================================
# SESSION PARAMETERS
# ============================================================================

SESSION = {
    "nonce_bytes": 32,           # Length of n_I and n_R
    "max_timeouts": 8,           # Timeouts the network hands out per session
    "max_deliveries": 400,       # Hard stop for the delivery loop
    "default_seed": 7,           # Seed used when a scenario does not name one
}

# Last eight bytes of n_R when a TLS 1.3 final server negotiates below 1.3:
# a seven-byte tag followed by the negotiated version code.
SENTINEL = {
    "tag": b"DOWNGRD",
    "length": 8,
}

# ============================================================================
# GROUPS
# ============================================================================
# "DH" groups model finite-field Diffie-Hellman, "EC" groups model ECDHE as
# DH over a second labelled family. Only the label matters for negotiation.

DH_GROUPS = {
    "ffdhe_export": {"prime": 999_983, "generator": 5, "family": "DH"},
    "ffdhe_strong": {"prime": 2 ** 61 - 1, "generator": 3, "family": "DH"},
    "ec_m31": {"prime": 2 ** 31 - 1, "generator": 7, "family": "EC"},
    "ec_m89": {"prime": 2 ** 89 - 1, "generator": 3, "family": "EC"},
    "ec_m127": {"prime": 2 ** 127 - 1, "generator": 3, "family": "EC"},
}

# Default preference order when an endpoint does not list groups
DEFAULT_GROUPS = ("ec_m127", "ec_m89", "ec_m31", "ffdhe_strong")

# ============================================================================
# MISREAD KEY PARAMETERS
# ============================================================================
# Key bytes read under the wrong algorithm label collapse into these small
# parameter sets, which makes the effective key EXPORT strength.

MISREAD_PARAMS = {
    "DH": {"label": "misread_dh", "prime": 1_000_003, "generator": 2},
    "EC": {"label": "misread_ec", "prime": 65_537, "generator": 3},
    "RSA": {"primes": (1021, 4093), "public_exp": 65_537},
}

# ============================================================================
# RSA KEYS
# ============================================================================

RSA_KEYS = {
    "public_exp": 65_537,
    "strong_prime_range": (2 ** 40, 2 ** 41),   # Long-term keys, ~80-bit modulus
    "export_prime_range": (2 ** 11, 4000),      # Ephemeral export keys, modulus < 2^24
}

# ============================================================================
# APPLICATION DATA
# ============================================================================

APP_DATA = {
    "default_payload": (
        "GET /inbox HTTP/1.1\r\nHost: mail.example\r\n"
        "Cookie: session=7f3a9c2e51d04b68\r\n\r\n"
    ),
    "secret_marker": "Cookie: session=",   # CBC oracle recovers the bytes after this
    "secret_terminator": "\r\n",
}

REPORT = {
    "schema_version": 1,
}

assert BREAKABILITY["threshold"] > MISREAD_PARAMS["DH"]["prime"], \
    "Misread groups must stay below the breakability threshold"
assert RSA_KEYS["export_prime_range"][1] ** 2 < BREAKABILITY["threshold"], \
    "Export RSA moduli must stay below the breakability threshold"
