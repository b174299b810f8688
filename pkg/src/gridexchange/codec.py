"""Canonical byte encoding primitives.

Layout rules, fixed so every hash in the protocol is well-defined:

* unsigned integers: 64-bit little-endian, always 8 bytes
* byte strings: 32-bit little-endian length, then the bytes
* enum kinds: a single tag byte
* lists: 32-bit little-endian count, then the elements
* maps: encoded as lists of (key, value) sorted by key bytes ascending

The reader is strict: reads past the end raise, and callers are expected to
call :meth:`Reader.finish` so trailing garbage is rejected.
"""

import struct

U64_MAX = 2**64 - 1
U32_MAX = 2**32 - 1

_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")


class DecodeError(ValueError):
    """Raised when bytes do not parse as a canonical encoding."""


class Writer:
    """Accumulates canonically encoded fields."""

    __slots__ = ("_parts",)

    def __init__(self):
        self._parts: list[bytes] = []

    def u64(self, value: int) -> "Writer":
        if not 0 <= value <= U64_MAX:
            raise ValueError(f"u64 out of range: {value}")
        self._parts.append(_U64.pack(value))
        return self

    def u8(self, value: int) -> "Writer":
        if not 0 <= value <= 255:
            raise ValueError(f"u8 out of range: {value}")
        self._parts.append(bytes([value]))
        return self

    def raw(self, data: bytes) -> "Writer":
        """Append bytes with no length prefix; caller owns framing."""
        self._parts.append(data)
        return self

    def bytes_(self, data: bytes) -> "Writer":
        if len(data) > U32_MAX:
            raise ValueError("byte string too long")
        self._parts.append(_U32.pack(len(data)))
        self._parts.append(data)
        return self

    def count(self, n: int) -> "Writer":
        if not 0 <= n <= U32_MAX:
            raise ValueError(f"count out of range: {n}")
        self._parts.append(_U32.pack(n))
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    """Strict cursor over canonically encoded bytes."""

    __slots__ = ("_data", "_pos")

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        end = self._pos + n
        if end > len(self._data):
            raise DecodeError(
                f"truncated input: wanted {n} bytes at offset {self._pos}"
            )
        chunk = self._data[self._pos:end]
        self._pos = end
        return chunk

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def u8(self) -> int:
        return self._take(1)[0]

    def count(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def bytes_(self) -> bytes:
        return self._take(self.count())

    def fixed_bytes(self, expected_len: int) -> bytes:
        """A length-prefixed byte string whose length must equal ``expected_len``."""
        n = self.count()
        if n != expected_len:
            raise DecodeError(f"expected {expected_len}-byte string, got {n}")
        return self._take(n)

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{self.remaining} trailing bytes after value")


def to_hex(data: bytes) -> str:
    return data.hex()


def from_hex(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise DecodeError(f"bad hex string: {text!r}") from exc
