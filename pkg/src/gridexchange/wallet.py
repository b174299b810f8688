"""Encrypted on-disk wallet: named Ed25519 keypairs under one passphrase.

The file holds a scrypt-derived Fernet token per key.  Secret bytes live
only inside tokens and in-memory KeyPair objects; nothing here logs or
returns them in serialized form.
"""

import base64
import json
import os
from pathlib import Path

from cryptography.fernet import Fernet, InvalidToken
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from .crypto import KeyPair, generate_keypair

_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1


class WalletError(Exception):
    """Bad passphrase, duplicate name, missing key, or corrupt file."""


def _derive_key(passphrase: str, salt: bytes) -> bytes:
    kdf = Scrypt(salt=salt, length=32, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P)
    return base64.urlsafe_b64encode(kdf.derive(passphrase.encode("utf-8")))


class WalletStore:
    """Name -> keypair store, persisted encrypted-at-rest.

    Construct via :meth:`create` or :meth:`open`; mutations save eagerly.
    """

    def __init__(self, path: Path, fernet: Fernet, doc: dict):
        self._path = path
        self._fernet = fernet
        self._doc = doc

    # -- lifecycle -------------------------------------------------------

    @classmethod
    def create(cls, path: str | Path, passphrase: str) -> "WalletStore":
        path = Path(path)
        if path.exists():
            raise WalletError(f"wallet file already exists: {path}")
        salt = os.urandom(16)
        doc = {"version": 1, "salt": salt.hex(), "keys": {}}
        store = cls(path, Fernet(_derive_key(passphrase, salt)), doc)
        store._save()
        return store

    @classmethod
    def open(cls, path: str | Path, passphrase: str) -> "WalletStore":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
            salt = bytes.fromhex(doc["salt"])
            keys = doc["keys"]
        except FileNotFoundError:
            raise WalletError(f"no wallet file at {path}") from None
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise WalletError(f"corrupt wallet file: {exc}") from exc
        if not isinstance(keys, dict):
            raise WalletError("corrupt wallet file: keys must be an object")
        store = cls(path, Fernet(_derive_key(passphrase, salt)), doc)
        if keys:
            # Proves the passphrase before the caller relies on the store.
            store.get(next(iter(keys)))
        return store

    @classmethod
    def open_or_create(cls, path: str | Path, passphrase: str) -> "WalletStore":
        if Path(path).exists():
            return cls.open(path, passphrase)
        return cls.create(path, passphrase)

    def _save(self) -> None:
        tmp = self._path.with_suffix(self._path.suffix + ".tmp")
        tmp.write_text(json.dumps(self._doc, indent=2, sort_keys=True))
        tmp.replace(self._path)

    # -- keys ------------------------------------------------------------

    def generate(self, name: str) -> KeyPair:
        if name in self._doc["keys"]:
            raise WalletError(f"key name already in use: {name}")
        pair = generate_keypair(os.urandom(32))
        token = self._fernet.encrypt(pair.private_key)
        self._doc["keys"][name] = {
            "address": pair.address.hex(),
            "secret": token.decode("ascii"),
        }
        self._save()
        return pair

    def get(self, name: str) -> KeyPair:
        entry = self._doc["keys"].get(name)
        if entry is None:
            raise WalletError(f"no key named {name!r}")
        try:
            seed = self._fernet.decrypt(entry["secret"].encode("ascii"))
        except InvalidToken:
            raise WalletError("wrong passphrase or corrupt wallet") from None
        pair = generate_keypair(seed)
        if pair.address.hex() != entry["address"]:
            raise WalletError(f"stored address mismatch for {name!r}")
        return pair

    def address(self, name: str) -> bytes:
        entry = self._doc["keys"].get(name)
        if entry is None:
            raise WalletError(f"no key named {name!r}")
        return bytes.fromhex(entry["address"])

    def names(self) -> list[str]:
        return sorted(self._doc["keys"])

    def name_for(self, address: bytes) -> str | None:
        hexaddr = address.hex()
        for name, entry in self._doc["keys"].items():
            if entry["address"] == hexaddr:
                return name
        return None

    def __contains__(self, name: str) -> bool:
        return name in self._doc["keys"]
