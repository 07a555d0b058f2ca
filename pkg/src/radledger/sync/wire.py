"""Binary sync batch framing.

Byte-exact layout (all integers big-endian, strings UTF-8):

    offset  size  field
    0       4     magic "RSB1"
    4       1     version (0x01)
    5       1     flags (reserved, 0x00)
    6       2     from_replica_id length, then the bytes
    .       2     to_replica_id length, then the bytes
    .       4     central_confirmed count, then per id: 2-byte length + bytes
    .       4     envelope count, then per envelope:
                      4-byte payload length + payload bytes
                      2-byte signature length + signature bytes
                      2-byte signer_cert_id length + id bytes

The in-process transports and the HTTP octet-stream content type both carry
exactly these bytes, so an independent implementation can interoperate.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field


from ..errors import WireFormatError
from ..ledger.records import SignedEnvelope

MAGIC = b"RSB1"
VERSION = 1


@dataclass
class SyncBatch:
    from_replica_id: str
    to_replica_id: str
    envelopes: list[SignedEnvelope] = field(default_factory=list)
    central_confirmed: set[str] = field(default_factory=set)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WireFormatError(
                f"batch truncated at byte {self.pos}: needed {n} more"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def string(self, width: int = 2) -> str:
        length = self.u16() if width == 2 else self.u32()
        return self.take(length).decode("utf-8")


def _put_str(parts: list[bytes], text: str, width: int = 2) -> None:
    raw = text.encode("utf-8")
    parts.append(struct.pack(">H" if width == 2 else ">I", len(raw)))
    parts.append(raw)


def encode_batch(batch: SyncBatch) -> bytes:
    parts: list[bytes] = [MAGIC, bytes([VERSION, 0])]
    _put_str(parts, batch.from_replica_id)
    _put_str(parts, batch.to_replica_id)
    confirmed = sorted(batch.central_confirmed)
    parts.append(struct.pack(">I", len(confirmed)))
    for rid in confirmed:
        _put_str(parts, rid)
    parts.append(struct.pack(">I", len(batch.envelopes)))
    for env in batch.envelopes:
        parts.append(struct.pack(">I", len(env.payload)))
        parts.append(env.payload)
        parts.append(struct.pack(">H", len(env.signature)))
        parts.append(env.signature)
        _put_str(parts, env.signer_cert_id)
    return b"".join(parts)


def decode_batch(data: bytes) -> SyncBatch:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise WireFormatError("bad magic; not a sync batch")
    version = reader.u8()
    if version != VERSION:
        raise WireFormatError(f"unsupported sync batch version {version}")
    reader.u8()  # flags, reserved
    from_id = reader.string()
    to_id = reader.string()
    confirmed = {reader.string() for _ in range(reader.u32())}
    envelopes = []
    for _ in range(reader.u32()):
        payload = reader.take(reader.u32())
        signature = reader.take(reader.u16())
        cert_id = reader.string()
        envelopes.append(SignedEnvelope(payload, signature, cert_id))
    if reader.pos != len(data):
        raise WireFormatError(f"{len(data) - reader.pos} trailing bytes after batch")
    return SyncBatch(from_id, to_id, envelopes, confirmed)
