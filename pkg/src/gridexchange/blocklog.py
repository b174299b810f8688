"""Append-only block log persistence.

File layout, bit-exact: 4 magic bytes ``GXB1`` then repeated records of
[u32 little-endian record length][canonical block bytes].

Two framing disciplines serve two callers.  Loading for crash recovery is
tolerant: a trailing partial record (interrupted append) is dropped and the
valid prefix returned.  Verification is strict: any framing irregularity,
including a partial tail, is a failure, because tolerance there would let
flipped length bytes hide a record.
"""

import struct
from pathlib import Path

from .codec import DecodeError
from .model import Block, decode_block, encode_block

MAGIC = b"GXB1"

_LEN = struct.Struct("<I")


class CorruptLogError(Exception):
    """Log bytes unusable at ``offset``; message says why."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


def iter_frames_strict(data: bytes) -> list[tuple[int, memoryview]]:
    """Split log bytes into (offset, record) pairs, rejecting any slack."""
    view = memoryview(data)
    if len(data) < len(MAGIC) or bytes(view[: len(MAGIC)]) != MAGIC:
        raise CorruptLogError(0, "bad magic")
    frames: list[tuple[int, memoryview]] = []
    pos = len(MAGIC)
    while pos < len(data):
        if len(data) - pos < _LEN.size:
            raise CorruptLogError(pos, "truncated length prefix")
        (length,) = _LEN.unpack_from(data, pos)
        start = pos + _LEN.size
        if length == 0:
            raise CorruptLogError(pos, "zero-length record")
        if len(data) - start < length:
            raise CorruptLogError(pos, "truncated record")
        frames.append((start, view[start : start + length]))
        pos = start + length
    return frames


def split_frames_tolerant(data: bytes) -> list[tuple[int, memoryview]]:
    """Like the strict splitter but a partial trailing record is dropped.

    Interior irregularities cannot be distinguished here; undecodable
    records surface when the caller decodes them.
    """
    view = memoryview(data)
    frames: list[tuple[int, memoryview]] = []
    pos = len(MAGIC)
    while pos < len(data):
        if len(data) - pos < _LEN.size:
            break
        (length,) = _LEN.unpack_from(data, pos)
        start = pos + _LEN.size
        if length == 0 or len(data) - start < length:
            break
        frames.append((start, view[start : start + length]))
        pos = start + length
    return frames


def log_bytes(blocks: list[Block]) -> bytes:
    """Full log image for ``blocks``, as the file would contain."""
    parts = [MAGIC]
    for block in blocks:
        record = encode_block(block)
        parts.append(_LEN.pack(len(record)))
        parts.append(record)
    return b"".join(parts)


def append_block_to_log(path: str | Path, block: Block) -> None:
    """Append one framed block, writing the magic on first use."""
    record = encode_block(block)
    with open(path, "ab") as fh:
        if fh.tell() == 0:
            fh.write(MAGIC)
        fh.write(_LEN.pack(len(record)))
        fh.write(record)


def save_chain_to_log(path: str | Path, blocks: list[Block]) -> None:
    Path(path).write_bytes(log_bytes(blocks))


def load_chain_from_log(path: str | Path) -> list[Block]:
    """Read every complete, decodable block from a log file.

    A short or missing magic reads as an empty chain (a crash can leave a
    zero-byte file behind); a complete record that will not decode is a
    :class:`CorruptLogError` naming the offset.
    """
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC):
        return []
    if data[: len(MAGIC)] != MAGIC:
        raise CorruptLogError(0, "bad magic")
    blocks = []
    for offset, frame in split_frames_tolerant(data):
        try:
            blocks.append(decode_block(bytes(frame)))
        except DecodeError as exc:
            raise CorruptLogError(offset, f"undecodable record: {exc}") from exc
    return blocks
