"""Hashing, signatures, addresses, and multisig verification."""

import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridexchange.crypto import (
    ADDRESS_LEN,
    MultisigAccount,
    derive_address,
    generate_keypair,
    multisig_address,
    sha256,
    sign,
    verify,
    verify_multisig,
)

# Published SHA-256 test vector for the empty string.
EMPTY_SHA256 = bytes.fromhex("e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")


def _kp(tag: bytes):
    return generate_keypair(sha256(tag))


def test_sha256_empty_vector():
    assert sha256(b"") == EMPTY_SHA256


def test_sha256_matches_hashlib():
    for msg in (b"a", b"abc", bytes(1000), b"\xff" * 33):
        assert sha256(msg) == hashlib.sha256(msg).digest()


def test_derive_address_is_double_hash_truncated():
    pair = _kp(b"addr")
    expected = hashlib.sha256(hashlib.sha256(pair.public_key).digest()).digest()[:ADDRESS_LEN]
    assert pair.address == expected
    assert derive_address(pair.public_key) == expected


def test_generate_keypair_deterministic():
    a = _kp(b"seed")
    b = _kp(b"seed")
    assert a == b
    assert _kp(b"other") != a


def test_generate_keypair_rejects_bad_seed_length():
    with pytest.raises(ValueError):
        generate_keypair(b"short")


def test_sign_verify_roundtrip():
    pair = _kp(b"sig")
    msg = b"energy lot 42"
    s = sign(pair.private_key, msg)
    assert len(s) == 64
    assert verify(pair.public_key, msg, s)
    assert not verify(pair.public_key, msg + b"!", s)
    assert not verify(pair.public_key, b"", s)


def test_verify_false_on_garbage_inputs():
    pair = _kp(b"garbage")
    s = sign(pair.private_key, b"m")
    assert not verify(b"notakey", b"m", s)
    assert not verify(pair.public_key, b"m", b"shortsig")
    assert not verify(bytes(32), b"m", s)


@given(st.binary(min_size=0, max_size=256))
def test_signature_covers_whole_message(msg):
    pair = _kp(b"prop")
    s = sign(pair.private_key, msg)
    assert verify(pair.public_key, msg, s)


def test_tampered_signature_fails():
    pair = _kp(b"tamper")
    s = sign(pair.private_key, b"msg")
    for i in range(len(s)):
        bad = bytearray(s)
        bad[i] ^= 0x01
        assert not verify(pair.public_key, b"msg", bytes(bad))


# -- multisig ----------------------------------------------------------------


def _account(n: int, threshold: int) -> tuple[MultisigAccount, list]:
    pairs = [_kp(b"ms%d" % i) for i in range(n)]
    account = MultisigAccount(
        members=tuple(sorted(p.address for p in pairs)), threshold=threshold
    )
    return account, pairs


def test_multisig_requires_threshold():
    account, pairs = _account(3, 2)
    msg = b"registry change"
    one = [(pairs[0].address, pairs[0].public_key, sign(pairs[0].private_key, msg))]
    two = one + [(pairs[1].address, pairs[1].public_key, sign(pairs[1].private_key, msg))]
    assert not verify_multisig(account, msg, one)
    assert verify_multisig(account, msg, two)


def test_multisig_rejects_duplicate_signer():
    account, pairs = _account(3, 2)
    msg = b"dup"
    entry = (pairs[0].address, pairs[0].public_key, sign(pairs[0].private_key, msg))
    assert not verify_multisig(account, msg, [entry, entry])


def test_multisig_rejects_non_member():
    account, pairs = _account(3, 2)
    outsider = _kp(b"outsider")
    msg = b"x"
    sigs = [
        (pairs[0].address, pairs[0].public_key, sign(pairs[0].private_key, msg)),
        (outsider.address, outsider.public_key, sign(outsider.private_key, msg)),
    ]
    assert not verify_multisig(account, msg, sigs)


def test_multisig_rejects_wrong_message_signature():
    account, pairs = _account(2, 2)
    sigs = [
        (p.address, p.public_key, sign(p.private_key, b"other message")) for p in pairs
    ]
    assert not verify_multisig(account, b"intended", sigs)


def test_multisig_account_validation():
    pair = _kp(b"solo")
    with pytest.raises(ValueError):
        MultisigAccount(members=(pair.address,), threshold=1)
    other = _kp(b"solo2")
    with pytest.raises(ValueError):
        MultisigAccount(members=(pair.address, other.address), threshold=3)
    with pytest.raises(ValueError):
        MultisigAccount(members=(pair.address, pair.address), threshold=1)


def test_multisig_address_depends_on_members_and_threshold():
    a2, _ = _account(3, 2)
    a3, _ = _account(3, 3)
    b2, _ = _account(4, 2)
    addrs = {multisig_address(a2), multisig_address(a3), multisig_address(b2)}
    assert len(addrs) == 3
    assert all(len(a) == ADDRESS_LEN for a in addrs)
