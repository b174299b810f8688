"""Hashing, Ed25519 signatures, address derivation and multisig checks.

Primitives are deliberately boring: SHA-256 for all digests, Ed25519 over
32-byte seeds for signatures.  Addresses are the first 20 bytes of a double
SHA-256 of the public key, so they cannot be inverted back to a key.  All
functions here are pure and safe to call concurrently.
"""

import hashlib
from dataclasses import dataclass
from typing import Iterable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

DIGEST_LEN = 32
ADDRESS_LEN = 20
SEED_LEN = 32
PUBKEY_LEN = 32
SIG_LEN = 64

# Address derivation applies this many hash rounds before truncation.
ADDRESS_HASH_ROUNDS = 2

_RAW = serialization.Encoding.Raw
_RAW_PUB = serialization.PublicFormat.Raw
_RAW_PRIV = serialization.PrivateFormat.Raw
_NOENC = serialization.NoEncryption()


def sha256(data: bytes) -> bytes:
    """32-byte SHA-256 digest of ``data``."""
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 keypair; ``private_key`` is the 32-byte seed."""

    private_key: bytes
    public_key: bytes

    @property
    def address(self) -> bytes:
        return derive_address(self.public_key)


def generate_keypair(entropy: bytes) -> KeyPair:
    """Derive a keypair deterministically from a 32-byte seed.

    Determinism matters: simulator reproducibility rests on identical seeds
    yielding identical keys.
    """
    if len(entropy) != SEED_LEN:
        raise ValueError(f"entropy must be {SEED_LEN} bytes, got {len(entropy)}")
    sk = ed25519.Ed25519PrivateKey.from_private_bytes(entropy)
    pk = sk.public_key().public_bytes(_RAW, _RAW_PUB)
    return KeyPair(private_key=entropy, public_key=pk)


def derive_address(public_key: bytes) -> bytes:
    """First 20 bytes of the double SHA-256 of the public key."""
    digest = public_key
    for _ in range(ADDRESS_HASH_ROUNDS):
        digest = sha256(digest)
    return digest[:ADDRESS_LEN]


def sign(private_key: bytes, message: bytes) -> bytes:
    """Sign ``message`` with an Ed25519 seed, returning the 64-byte signature."""
    sk = ed25519.Ed25519PrivateKey.from_private_bytes(private_key)
    return sk.sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """True iff ``signature`` is valid for ``message`` under ``public_key``.

    Malformed keys or signatures return False rather than raising.
    """
    try:
        pk = ed25519.Ed25519PublicKey.from_public_bytes(public_key)
        pk.verify(signature, message)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


@dataclass(frozen=True)
class MultisigAccount:
    """A threshold account over 2..16 distinct member addresses."""

    members: tuple[bytes, ...]
    threshold: int

    def __post_init__(self):
        if not 2 <= len(self.members) <= 16:
            raise ValueError("multisig needs between 2 and 16 members")
        if len(set(self.members)) != len(self.members):
            raise ValueError("multisig members must be distinct")
        if not 1 <= self.threshold <= len(self.members):
            raise ValueError("threshold must be between 1 and the member count")
        for m in self.members:
            if len(m) != ADDRESS_LEN:
                raise ValueError("member addresses must be 20 bytes")


def multisig_address(account: MultisigAccount) -> bytes:
    """Address of a threshold account.

    Hashed from the threshold byte plus the sorted member addresses, so the
    address is independent of member listing order.
    """
    blob = bytes([account.threshold]) + b"".join(sorted(account.members))
    return derive_address(blob)


def verify_multisig(
    account: MultisigAccount,
    message: bytes,
    sigs: Iterable[tuple[bytes, bytes, bytes]],
) -> bool:
    """True iff at least ``threshold`` distinct members validly signed ``message``.

    ``sigs`` holds (address, public_key, signature) triples; the public key
    must hash to the claimed address since addresses alone cannot verify.
    Non-member, duplicate and invalid entries are ignored, never fatal, so
    adding signatures can only help.
    """
    member_set = set(account.members)
    signed: set[bytes] = set()
    for address, public_key, signature in sigs:
        if address not in member_set or address in signed:
            continue
        if derive_address(public_key) != address:
            continue
        if verify(public_key, message, signature):
            signed.add(address)
    return len(signed) >= account.threshold
