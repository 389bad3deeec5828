"""Byte-level frame format for the glove link.

Frame layout: msg_type (1 byte), seq (1 byte), payload length (1 byte),
payload (<= 240 bytes), CRC-16/CCITT-FALSE over everything before it
(2 bytes big-endian).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CrcMismatch, TruncatedFrame, UnknownMsgType

MAX_PAYLOAD = 240
HEADER_LEN = 3
CRC_LEN = 2

MSG_SCHED_CHUNK = "SCHED_CHUNK"
MSG_SCHED_COMMIT = "SCHED_COMMIT"
MSG_START = "START"
MSG_STOP = "STOP"
MSG_STATUS_REQ = "STATUS_REQ"
MSG_STATUS = "STATUS"
MSG_SYNC = "SYNC"

MSG_TYPE_IDS = {
    MSG_SCHED_CHUNK: 0x01,
    MSG_SCHED_COMMIT: 0x02,
    MSG_START: 0x03,
    MSG_STOP: 0x04,
    MSG_STATUS_REQ: 0x05,
    MSG_STATUS: 0x06,
    MSG_SYNC: 0x07,
}
MSG_TYPE_NAMES = {v: k for k, v in MSG_TYPE_IDS.items()}


def crc16_ccitt_bitwise(data: bytes, poly: int = 0x1021, init: int = 0xFFFF) -> int:
    """Bit-at-a-time reference implementation."""
    crc = init
    for b in data:
        crc ^= b << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = (crc << 1) ^ poly
            else:
                crc <<= 1
            crc &= 0xFFFF
    return crc


def _build_table(poly: int = 0x1021) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _build_table()


def crc16_ccitt(data: bytes, init: int = 0xFFFF) -> int:
    crc = init
    table = _CRC_TABLE
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ table[((crc >> 8) ^ b) & 0xFF]
    return crc


@dataclass(frozen=True)
class Frame:
    msg_type: str
    seq: int
    payload: bytes = b""

    def __post_init__(self) -> None:
        if self.msg_type not in MSG_TYPE_IDS:
            raise UnknownMsgType(f"msg_type {self.msg_type!r}")
        if not 0 <= self.seq <= 255:
            raise ValueError(f"seq {self.seq} outside [0, 255]")
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")


def encode_frame(frame: Frame) -> bytes:
    head = bytes([MSG_TYPE_IDS[frame.msg_type], frame.seq, len(frame.payload)]) + frame.payload
    return head + crc16_ccitt(head).to_bytes(2, "big")


def decode_frame(data: bytes) -> Frame:
    if len(data) < HEADER_LEN + CRC_LEN:
        raise TruncatedFrame(f"frame of {len(data)} bytes is shorter than the minimum")
    payload_len = data[2]
    expected = HEADER_LEN + payload_len + CRC_LEN
    if len(data) != expected:
        raise TruncatedFrame(f"frame length {len(data)} does not match declared {expected}")
    body = data[:HEADER_LEN + payload_len]
    stored_crc = int.from_bytes(data[-CRC_LEN:], "big")
    if crc16_ccitt(body) != stored_crc:
        raise CrcMismatch(f"crc {stored_crc:#06x} does not validate frame")
    type_id = data[0]
    if type_id not in MSG_TYPE_NAMES:
        raise UnknownMsgType(f"msg_type id {type_id:#04x}")
    return Frame(msg_type=MSG_TYPE_NAMES[type_id], seq=data[1], payload=bytes(data[3:3 + payload_len]))
