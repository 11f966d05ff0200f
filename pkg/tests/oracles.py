"""Independent oracles, kept deliberately separate from the implementations.

Each function here re-derives an expected value by the dumbest correct
route available (bit-serial CRC, byte loops, day stepping, interval
sums) so the production code paths are checked against something that
shares no code with them.
"""

from __future__ import annotations


def xor_checksum(payload: bytes) -> int:
    c = 0
    for b in payload:
        c ^= b
    return c


def crc16_ccitt_false_bitwise(data: bytes) -> int:
    """Bit-serial CRC-16/CCITT-FALSE; check value crc(b'123456789') == 0x29B1."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


assert crc16_ccitt_false_bitwise(b"123456789") == 0x29B1


def day_stepped_lifetime_years(
    capacity_mAh: float,
    avg_current_mA: float,
    self_discharge_per_year: float,
    horizon_years: float = 100.0,
) -> float:
    """Discrete day-by-day battery simulation: decay, then draw."""
    daily_decay = (1.0 - self_discharge_per_year) ** (1.0 / 365.25)
    daily_draw = avg_current_mA * 24.0
    remaining = capacity_mAh
    days = 0
    max_days = int(horizon_years * 365.25)
    while days < max_days:
        after_decay = remaining * daily_decay
        after_draw = after_decay - daily_draw
        if after_draw <= 0.0:
            # linear fraction of the final day
            frac = after_decay / daily_draw if daily_draw > 0 else 1.0
            return (days + min(1.0, frac)) / 365.25
        remaining = after_draw
        days += 1
    return horizon_years


def interval_sum_mAh(
    intervals: list[tuple[str, int, int]],
    duration_ms: int,
    sleep_uA: dict[str, float],
    active_mA: dict[str, float],
) -> dict[str, float]:
    """Recompute per-component charge from raw (component, t0_ms, t1_ms)
    active intervals plus sleep draw over the rest of the run."""
    active_ms: dict[str, int] = {}
    for component, t0, t1 in intervals:
        active_ms[component] = active_ms.get(component, 0) + (t1 - t0)
    totals = {}
    for component in sleep_uA:
        act = active_ms.get(component, 0)
        slp = duration_ms - act
        totals[component] = (
            active_mA[component] * act / 3_600_000.0
            + (sleep_uA[component] / 1000.0) * slp / 3_600_000.0
        )
    return totals
