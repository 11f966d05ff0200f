"""Simulated NB-IoT radio layer.

Three concerns live here: the link-budget threshold model that carries
the 20 dB narrowband advantage over the GPRS baseline, per-cell
admission bookkeeping, and the bit-exact uplink/downlink frame codec
(big-endian, CRC-16/CCITT-FALSE trailer).
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field
from enum import Enum

NBIOT_MARGIN_DB = 20.0

UPLINK_LEN = 21
DOWNLINK_LEN = 12

FRAME_VERSION = 0x01

# flags byte of UplinkFrame
FLAG_FIRST_LOW = 0x01
FLAG_SECOND_LOW = 0x02
FLAG_LOCK_ENGAGED = 0x04
FLAG_GAMMA_TRIGGERED = 0x08

_UPLINK_BODY = struct.Struct(">BIHBBiiH")   # 19 bytes before the CRC
_DOWNLINK_BODY = struct.Struct(">BIBI")     # 10 bytes before the CRC
_CRC_TRAILER = struct.Struct(">H")


class RadioError(Exception):
    pass


class BadLength(RadioError):
    pass


class BadCrc(RadioError):
    pass


class UnknownVersion(RadioError):
    pass


class UnknownMsgType(RadioError):
    pass


class CellFull(RadioError):
    pass


class NotAttached(RadioError):
    pass


# --- CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection) ---

_CRC_TABLE = []
for _i in range(256):
    _c = _i << 8
    for _ in range(8):
        _c = ((_c << 1) ^ 0x1021) if (_c & 0x8000) else (_c << 1)
    _CRC_TABLE.append(_c & 0xFFFF)


def crc16(data: bytes) -> int:
    crc = 0xFFFF
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ b]
    return crc


# --- link budget ---


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dBm: float
    path_loss_dB: float
    noise_floor_dBm: float

    def __post_init__(self):
        if self.path_loss_dB < 0:
            raise ValueError("path_loss_dB must be >= 0")


def snr(budget: LinkBudget) -> float:
    return budget.tx_power_dBm - budget.path_loss_dB - budget.noise_floor_dBm


class Tech(Enum):
    GPRS_BASELINE = "gprs"
    NB_IOT = "nbiot"


@dataclass(frozen=True)
class RadioTech:
    tech: Tech
    decode_threshold_dB: float


def tech_pair(gprs_threshold_dB: float = 9.0) -> tuple[RadioTech, RadioTech]:
    """Build the GPRS baseline and its NB-IoT counterpart.

    The narrowband threshold sits exactly 20 dB below the baseline; the
    9 dB baseline itself is a config default, not a measured value.
    """
    return (
        RadioTech(Tech.GPRS_BASELINE, gprs_threshold_dB),
        RadioTech(Tech.NB_IOT, gprs_threshold_dB - NBIOT_MARGIN_DB),
    )


def decode_ok(tech: RadioTech, snr_dB: float) -> bool:
    """Deterministic decode: succeeds at or above the tech threshold."""
    return snr_dB >= tech.decode_threshold_dB


# --- frames ---


class MsgType(Enum):
    HEARTBEAT = 0x01
    ALARM = 0x02
    FIX_REPORT = 0x03
    ACK = 0x04


@dataclass(frozen=True)
class UplinkFrame:
    device_id: int
    seq: int
    msg_type: MsgType
    flags: int
    lat_e7: int
    lon_e7: int
    battery_dAh: int
    version: int = FRAME_VERSION

    def __post_init__(self):
        if self.version != FRAME_VERSION:
            raise ValueError(f"unsupported version {self.version}")
        if not 0 <= self.device_id <= 0xFFFFFFFF:
            raise ValueError("device_id out of range")
        if not 0 <= self.seq <= 0xFFFF:
            raise ValueError("seq out of range")
        if not 0 <= self.flags <= 0x0F:
            raise ValueError("flags uses bits 0-3 only")
        if not -(2**31) <= self.lat_e7 < 2**31:
            raise ValueError("lat_e7 out of range")
        if not -(2**31) <= self.lon_e7 < 2**31:
            raise ValueError("lon_e7 out of range")
        if not 0 <= self.battery_dAh <= 0xFFFF:
            raise ValueError("battery_dAh out of range")


class CommandKind(Enum):
    WAKE = 0x10
    LOCATE = 0x11
    SILENCE = 0x12
    PING = 0x13
    UNKNOWN = -1  # decoded but unrecognized; devices ignore it


@dataclass(frozen=True)
class DownlinkCommand:
    device_id: int
    cmd: CommandKind
    nonce: int
    version: int = FRAME_VERSION
    raw_cmd: int | None = None  # wire byte when cmd is UNKNOWN

    def __post_init__(self):
        if not 0 <= self.device_id <= 0xFFFFFFFF:
            raise ValueError("device_id out of range")
        if not 0 <= self.nonce <= 0xFFFFFFFF:
            raise ValueError("nonce out of range")


def encode_frame(frame: UplinkFrame) -> bytes:
    body = _UPLINK_BODY.pack(
        frame.version,
        frame.device_id,
        frame.seq,
        frame.msg_type.value,
        frame.flags,
        frame.lat_e7,
        frame.lon_e7,
        frame.battery_dAh,
    )
    return body + _CRC_TRAILER.pack(crc16(body))


def decode_frame(data: bytes) -> UplinkFrame:
    if len(data) != UPLINK_LEN:
        raise BadLength(f"expected {UPLINK_LEN} bytes, got {len(data)}")
    body, (crc,) = data[:-2], _CRC_TRAILER.unpack(data[-2:])
    if crc16(body) != crc:
        raise BadCrc(f"expected {crc16(body):04X}, found {crc:04X}")
    version, device_id, seq, msg_type, flags, lat, lon, battery = _UPLINK_BODY.unpack(body)
    if version != FRAME_VERSION:
        raise UnknownVersion(f"version {version:#04x}")
    try:
        mt = MsgType(msg_type)
    except ValueError:
        raise UnknownMsgType(f"msg_type {msg_type:#04x}") from None
    if flags > 0x0F:
        raise RadioError(f"reserved flag bits set: {flags:#04x}")
    return UplinkFrame(device_id, seq, mt, flags, lat, lon, battery)


def encode_command(cmd: DownlinkCommand) -> bytes:
    wire = cmd.raw_cmd if cmd.cmd is CommandKind.UNKNOWN else cmd.cmd.value
    if wire is None or not 0 <= wire <= 0xFF:
        raise ValueError("unencodable command byte")
    body = _DOWNLINK_BODY.pack(cmd.version, cmd.device_id, wire, cmd.nonce)
    return body + _CRC_TRAILER.pack(crc16(body))


def decode_command(data: bytes) -> DownlinkCommand:
    """Decode a downlink; unknown command bytes map to UNKNOWN rather
    than erroring, so field devices do not brick on protocol skew."""
    if len(data) != DOWNLINK_LEN:
        raise BadLength(f"expected {DOWNLINK_LEN} bytes, got {len(data)}")
    body, (crc,) = data[:-2], _CRC_TRAILER.unpack(data[-2:])
    if crc16(body) != crc:
        raise BadCrc(f"expected {crc16(body):04X}, found {crc:04X}")
    version, device_id, cmd_byte, nonce = _DOWNLINK_BODY.unpack(body)
    if version != FRAME_VERSION:
        raise UnknownVersion(f"version {version:#04x}")
    try:
        kind = CommandKind(cmd_byte)
    except ValueError:
        return DownlinkCommand(device_id, CommandKind.UNKNOWN, nonce, raw_cmd=cmd_byte)
    return DownlinkCommand(device_id, kind, nonce)


# --- cell admission ---


@dataclass
class CellState:
    """Per-cell attachment registry.

    NB-IoT cells are specified for 50k-100k links; capacity here is
    freely configurable so tests can scale it down (or to zero).
    """

    capacity: int = 50_000
    attached: set[int] = field(default_factory=set)

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")

    @property
    def attached_devices(self) -> int:
        return len(self.attached)


def attach(cell: CellState, device_id: int) -> bool:
    """Attach a device; True if newly attached, False if already there.

    Raises CellFull when admission would exceed capacity.
    """
    if device_id in cell.attached:
        return False
    if len(cell.attached) >= cell.capacity:
        raise CellFull(f"cell at capacity {cell.capacity}")
    cell.attached.add(device_id)
    return True


def detach(cell: CellState, device_id: int) -> None:
    cell.attached.discard(device_id)


# --- delivery ---


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    backoff_base_s: float = 2.0
    backoff_factor: float = 2.0
    airtime_ms: int = 1000

    def backoff_ms(self, failed_attempts: int) -> int:
        return round(self.backoff_base_s * self.backoff_factor ** (failed_attempts - 1) * 1000)


@dataclass(frozen=True)
class Channel:
    budget: LinkBudget
    tech: RadioTech
    residual_loss: float = 0.0
    cell: CellState | None = None

    def __post_init__(self):
        if not 0.0 <= self.residual_loss < 1.0:
            raise ValueError("residual_loss must be in [0, 1)")


@dataclass(frozen=True)
class DeliveryOutcome:
    delivered: bool
    attempts: int
    latency_ms: int  # send-to-delivery when delivered; total time spent otherwise


def transmit(
    frame: UplinkFrame,
    channel: Channel,
    policy: RetryPolicy = RetryPolicy(),
    rng_seed: int = 0,
) -> DeliveryOutcome:
    """Attempt delivery with exponential backoff.

    Per-attempt success is the deterministic decode threshold AND a
    seeded Bernoulli draw against residual_loss, so identical inputs
    always reproduce the same outcome.
    """
    if channel.cell is not None and frame.device_id not in channel.cell.attached:
        raise NotAttached(f"device {frame.device_id} not attached")
    rng = random.Random(rng_seed)
    decodable = decode_ok(channel.tech, snr(channel.budget))
    latency = 0
    for attempt in range(1, policy.max_attempts + 1):
        latency += policy.airtime_ms
        ok = decodable and (channel.residual_loss == 0.0 or rng.random() >= channel.residual_loss)
        if ok:
            return DeliveryOutcome(True, attempt, latency)
        if attempt < policy.max_attempts:
            latency += policy.backoff_ms(attempt)
    return DeliveryOutcome(False, policy.max_attempts, latency)
