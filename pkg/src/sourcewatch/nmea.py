"""NMEA-0183 sentence handling for the GPS module.

The device reads position packets straight off the receiver as ASCII
sentences framed ``$...*HH``. Only GGA and RMC are interpreted; anything
else parses structurally and is ignored by callers. Coordinates are kept
as fixed-point 1e-7 degrees so frames and replays stay byte-stable.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from fractions import Fraction

MAX_SENTENCE_LEN = 82  # chars, including '$' and CRLF

LAT_E7_MAX = 900_000_000
LON_E7_MAX = 1_800_000_000

# metres per degree of latitude (flat-earth approximation, valid for
# offsets far below 1 km)
_M_PER_DEG_LAT = 111_320.0


class NmeaError(Exception):
    """Base class for all parse failures; fuzz inputs never escape it."""


class BadFraming(NmeaError):
    pass


class Oversize(NmeaError):
    pass


class BadChecksum(NmeaError):
    def __init__(self, expected: int, found: int):
        super().__init__(f"checksum mismatch: expected {expected:02X}, found {found:02X}")
        self.expected = expected
        self.found = found


class WrongSentenceType(NmeaError):
    pass


class MalformedField(NmeaError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"field {field!r}: {reason}")
        self.field = field
        self.reason = reason


class FixQuality(Enum):
    NO_FIX = 0
    GPS = 1
    DGPS = 2


@dataclass(frozen=True)
class GeoFix:
    """Position fix in fixed-point units.

    lat_e7/lon_e7 are degrees * 1e7 (north/east positive). A NO_FIX
    quality means the coordinate fields are present but unusable.
    """

    lat_e7: int
    lon_e7: int
    quality: FixQuality
    num_sats: int
    hdop_x10: int
    utc_s_of_day: float

    def __post_init__(self):
        if abs(self.lat_e7) > LAT_E7_MAX:
            raise ValueError(f"lat_e7 out of range: {self.lat_e7}")
        if abs(self.lon_e7) > LON_E7_MAX:
            raise ValueError(f"lon_e7 out of range: {self.lon_e7}")
        if not 0 <= self.num_sats <= 32:
            raise ValueError(f"num_sats out of range: {self.num_sats}")
        if not 0 <= self.hdop_x10 <= 0xFFFF:
            raise ValueError(f"hdop_x10 out of range: {self.hdop_x10}")

    @property
    def usable(self) -> bool:
        return self.quality is not FixQuality.NO_FIX

    def to_dict(self) -> dict:
        return {
            "lat_e7": self.lat_e7,
            "lon_e7": self.lon_e7,
            "quality": self.quality.name.lower(),
            "num_sats": self.num_sats,
            "hdop_x10": self.hdop_x10,
            "utc_s_of_day": self.utc_s_of_day,
        }

    @staticmethod
    def from_dict(d: dict) -> "GeoFix":
        return GeoFix(
            lat_e7=int(d["lat_e7"]),
            lon_e7=int(d["lon_e7"]),
            quality=FixQuality[d["quality"].upper()],
            num_sats=int(d["num_sats"]),
            hdop_x10=int(d["hdop_x10"]),
            utc_s_of_day=float(d["utc_s_of_day"]),
        )


@dataclass(frozen=True)
class NmeaSentence:
    talker: str        # 2 chars, e.g. "GP"
    type: str          # 3 chars, e.g. "GGA"
    fields: tuple[str, ...]
    checksum: int

    @property
    def payload(self) -> str:
        return ",".join((self.talker + self.type,) + self.fields)


def checksum(payload: bytes | str) -> int:
    """XOR fold of every payload byte (the text between '$' and '*')."""
    if isinstance(payload, str):
        payload = payload.encode("ascii")
    c = 0
    for b in payload:
        c ^= b
    return c


def parse_sentence(line: str) -> NmeaSentence:
    """Parse one NMEA line; raises a typed NmeaError on any malformation."""
    if len(line) > MAX_SENTENCE_LEN:
        raise Oversize(f"{len(line)} chars exceeds {MAX_SENTENCE_LEN}")
    stripped = line.rstrip("\r\n")
    if not stripped.startswith("$"):
        raise BadFraming("missing leading '$'")
    star = stripped.rfind("*")
    if star < 0:
        raise BadFraming("missing '*' checksum delimiter")
    payload = stripped[1:star]
    trailer = stripped[star + 1:]
    if len(trailer) != 2:
        raise BadFraming(f"checksum trailer must be 2 hex digits, got {trailer!r}")
    try:
        found = int(trailer, 16)
    except ValueError:
        raise BadFraming(f"non-hex checksum trailer {trailer!r}") from None
    try:
        payload_bytes = payload.encode("ascii")
    except UnicodeEncodeError:
        raise BadFraming("non-ASCII byte in payload") from None
    expected = checksum(payload_bytes)
    if expected != found:
        raise BadChecksum(expected, found)
    parts = payload.split(",")
    address = parts[0]
    if len(address) != 5 or not address.isalnum() or not address.isupper():
        raise BadFraming(f"bad address field {address!r}")
    return NmeaSentence(
        talker=address[:2],
        type=address[2:],
        fields=tuple(parts[1:]),
        checksum=found,
    )


def _round_half_away(x: Fraction) -> int:
    # round-half-away-from-zero on the integer boundary
    if x >= 0:
        return int(x + Fraction(1, 2))
    return -int(-x + Fraction(1, 2))


def _coord_to_e7(raw: str, hemi: str, field: str, deg_digits: int, limit: int) -> int:
    if hemi not in ("N", "S", "E", "W"):
        raise MalformedField(field, f"bad hemisphere {hemi!r}")
    if len(raw) < deg_digits + 2:
        raise MalformedField(field, f"too short: {raw!r}")
    try:
        deg = int(raw[:deg_digits])
        minutes = Fraction(Decimal(raw[deg_digits:]))
    except (ValueError, InvalidOperation):
        raise MalformedField(field, f"not numeric: {raw!r}") from None
    if minutes >= 60:
        raise MalformedField(field, f"minutes {raw[deg_digits:]} >= 60")
    value = _round_half_away((deg + minutes / 60) * 10**7)
    if hemi in ("S", "W"):
        value = -value
    if abs(value) > limit:
        raise MalformedField(field, f"out of range: {value}")
    return value


def _parse_utc(raw: str) -> float:
    if len(raw) < 6:
        raise MalformedField("utc", f"too short: {raw!r}")
    try:
        h = int(raw[0:2])
        m = int(raw[2:4])
        s = float(raw[4:])
    except ValueError:
        raise MalformedField("utc", f"not numeric: {raw!r}") from None
    if h > 23 or m > 59 or s >= 61.0:
        raise MalformedField("utc", f"out of range: {raw!r}")
    return h * 3600 + m * 60 + s


def extract_fix(s: NmeaSentence) -> GeoFix:
    """Convert a parsed GGA sentence into a GeoFix."""
    if s.type != "GGA":
        raise WrongSentenceType(f"expected GGA, got {s.type}")
    if len(s.fields) < 8:
        raise MalformedField("fields", f"GGA needs >= 8 fields, got {len(s.fields)}")
    utc_raw, lat_raw, lat_hemi, lon_raw, lon_hemi, q_raw, sats_raw, hdop_raw = s.fields[:8]
    try:
        quality = FixQuality(int(q_raw))
    except ValueError:
        raise MalformedField("quality", f"unsupported value {q_raw!r}") from None
    if quality is FixQuality.NO_FIX:
        # receiver has no solution: coordinate fields may be empty
        return GeoFix(0, 0, FixQuality.NO_FIX, 0, 0, 0.0)
    lat = _coord_to_e7(lat_raw, lat_hemi, "lat", 2, LAT_E7_MAX)
    lon = _coord_to_e7(lon_raw, lon_hemi, "lon", 3, LON_E7_MAX)
    utc = _parse_utc(utc_raw)
    try:
        sats = int(sats_raw)
    except ValueError:
        raise MalformedField("num_sats", f"not numeric: {sats_raw!r}") from None
    try:
        hdop = _round_half_away(Fraction(Decimal(hdop_raw)) * 10)
    except (InvalidOperation, ValueError):
        raise MalformedField("hdop", f"not numeric: {hdop_raw!r}") from None
    if not 0 <= sats <= 32:
        raise MalformedField("num_sats", f"out of range: {sats}")
    if not 0 <= hdop <= 0xFFFF:
        raise MalformedField("hdop", f"out of range: {hdop}")
    return GeoFix(lat, lon, quality, sats, hdop, utc)


def _e7_to_ddmm(value_e7: int, deg_digits: int) -> tuple[str, str]:
    """Split |degrees*1e7| into zero-padded degrees and minutes text.

    Minutes carry 6 decimals: 1e-6 min = 1.67e-8 deg, comfortably inside
    the 1-ulp round-trip budget at 1e-7 degrees.
    """
    total = abs(value_e7)
    deg, rem = divmod(total, 10**7)
    # minutes * 1e6, rounded half away from zero
    min_x1e6 = _round_half_away(Fraction(rem * 60, 10))
    if min_x1e6 >= 60_000_000:
        deg += 1
        min_x1e6 -= 60_000_000
    whole, frac = divmod(min_x1e6, 10**6)
    return f"{deg:0{deg_digits}d}", f"{whole:02d}.{frac:06d}"


def emit_gga(fix: GeoFix, talker: str = "GP") -> str:
    """Render a fix as a GGA sentence with a valid checksum.

    Round-trips through parse_sentence/extract_fix to within 1 ulp per
    coordinate.
    """
    if fix.quality is FixQuality.NO_FIX:
        payload = f"{talker}GGA,,,,,,0,00,,,M,,M,,"
    else:
        lat_deg, lat_min = _e7_to_ddmm(fix.lat_e7, 2)
        lon_deg, lon_min = _e7_to_ddmm(fix.lon_e7, 3)
        lat_hemi = "N" if fix.lat_e7 >= 0 else "S"
        lon_hemi = "E" if fix.lon_e7 >= 0 else "W"
        s = fix.utc_s_of_day
        hh = int(s // 3600)
        mm = int(s % 3600 // 60)
        ss = s - hh * 3600 - mm * 60
        utc = f"{hh:02d}{mm:02d}{ss:05.2f}"
        hdop = f"{fix.hdop_x10 // 10}.{fix.hdop_x10 % 10}"
        payload = (
            f"{talker}GGA,{utc},{lat_deg}{lat_min},{lat_hemi},"
            f"{lon_deg}{lon_min},{lon_hemi},{fix.quality.value},"
            f"{fix.num_sats:02d},{hdop},0.0,M,0.0,M,,"
        )
    line = f"${payload}*{checksum(payload):02X}\r\n"
    assert len(line) <= MAX_SENTENCE_LEN
    return line


def simulate_fix(
    true_lat_e7: int,
    true_lon_e7: int,
    sigma_m: float,
    seed: int,
    utc_s_of_day: float = 0.0,
) -> tuple[GeoFix, str]:
    """Apply seeded Gaussian horizontal noise and emit the NMEA line.

    Flat-earth noise model; only valid for sigma far below 1 km.
    """
    if sigma_m < 0:
        raise ValueError("sigma_m must be >= 0")
    rng = random.Random(seed)
    lat_deg = true_lat_e7 / 1e7
    north_m = rng.gauss(0.0, sigma_m) if sigma_m > 0 else 0.0
    east_m = rng.gauss(0.0, sigma_m) if sigma_m > 0 else 0.0
    dlat = north_m / _M_PER_DEG_LAT
    cos_lat = math.cos(math.radians(lat_deg))
    if abs(cos_lat) < 1e-6:
        cos_lat = 1e-6  # poles: degenerate longitude scaling, clamp
    dlon = east_m / (_M_PER_DEG_LAT * cos_lat)
    lat_e7 = max(-LAT_E7_MAX, min(LAT_E7_MAX, true_lat_e7 + round(dlat * 1e7)))
    lon_e7 = max(-LON_E7_MAX, min(LON_E7_MAX, true_lon_e7 + round(dlon * 1e7)))
    fix = GeoFix(lat_e7, lon_e7, FixQuality.GPS, 8, 9, utc_s_of_day)
    return fix, emit_gga(fix)
