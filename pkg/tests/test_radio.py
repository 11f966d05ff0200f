import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sourcewatch import radio
from sourcewatch.radio import (
    BadCrc,
    BadLength,
    CellFull,
    CellState,
    Channel,
    CommandKind,
    DownlinkCommand,
    LinkBudget,
    MsgType,
    NotAttached,
    RadioTech,
    RetryPolicy,
    Tech,
    UnknownMsgType,
    UnknownVersion,
    UplinkFrame,
    attach,
    crc16,
    decode_command,
    decode_frame,
    decode_ok,
    detach,
    encode_command,
    encode_frame,
    snr,
    tech_pair,
    transmit,
)

from oracles import crc16_ccitt_false_bitwise

GOLDEN = json.loads((Path(__file__).parent / "fixtures" / "frame_golden.json").read_text())


def _uplink_from_fields(fields: dict) -> UplinkFrame:
    return UplinkFrame(
        device_id=fields["device_id"],
        seq=fields["seq"],
        msg_type=MsgType[fields["msg_type"].upper()],
        flags=fields["flags"],
        lat_e7=fields["lat_e7"],
        lon_e7=fields["lon_e7"],
        battery_dAh=fields["battery_dAh"],
    )


def _downlink_from_fields(fields: dict) -> DownlinkCommand:
    return DownlinkCommand(
        device_id=fields["device_id"],
        cmd=CommandKind[fields["cmd"].upper()],
        nonce=fields["nonce"],
    )


# --- CRC ---

def test_crc16_matches_bitwise_oracle_on_check_value():
    assert crc16(b"123456789") == crc16_ccitt_false_bitwise(b"123456789") == 0x29B1


def test_crc16_matches_bitwise_oracle_on_random_data():
    rng = random.Random(4)
    for _ in range(500):
        data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64)))
        assert crc16(data) == crc16_ccitt_false_bitwise(data)


# --- link budget ---

def test_snr_identity():
    assert snr(LinkBudget(23.0, 120.0, -114.0)) == pytest.approx(17.0)


def test_snr_zero_path_loss():
    assert snr(LinkBudget(23.0, 0.0, -114.0)) == pytest.approx(137.0)


@given(st.floats(0, 200, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_snr_linear_in_path_loss(extra):
    base = snr(LinkBudget(23.0, 0.0, -114.0))
    assert snr(LinkBudget(23.0, extra, -114.0)) == pytest.approx(base - extra)


def test_tech_pair_threshold_offset_is_exactly_20():
    gprs, nbiot = tech_pair(9.0)
    assert gprs.decode_threshold_dB - nbiot.decode_threshold_dB == 20.0
    assert gprs.tech is Tech.GPRS_BASELINE
    assert nbiot.tech is Tech.NB_IOT


def test_decode_ok_window_example():
    gprs, nbiot = tech_pair(9.0)
    assert not decode_ok(gprs, 0.0)
    assert decode_ok(nbiot, 0.0)


def test_decode_ok_boundary_at_threshold():
    gprs, _ = tech_pair(9.0)
    assert decode_ok(gprs, 9.0)          # >= convention
    assert not decode_ok(gprs, 8.999)


# --- codec golden vectors ---

@pytest.mark.parametrize("vector", GOLDEN["uplink"], ids=lambda v: v["fields"]["msg_type"])
def test_uplink_golden_vectors(vector):
    frame = _uplink_from_fields(vector["fields"])
    assert encode_frame(frame).hex() == vector["hex"]
    assert decode_frame(bytes.fromhex(vector["hex"])) == frame


@pytest.mark.parametrize("vector", GOLDEN["downlink"], ids=lambda v: v["fields"]["cmd"])
def test_downlink_golden_vectors(vector):
    cmd = _downlink_from_fields(vector["fields"])
    assert encode_command(cmd).hex() == vector["hex"]
    assert decode_command(bytes.fromhex(vector["hex"])) == cmd


def test_uplink_frame_is_21_bytes():
    assert len(bytes.fromhex(GOLDEN["uplink"][0]["hex"])) == radio.UPLINK_LEN == 21


def test_downlink_is_12_bytes():
    assert len(bytes.fromhex(GOLDEN["downlink"][0]["hex"])) == radio.DOWNLINK_LEN == 12


uplink_frames = st.builds(
    UplinkFrame,
    device_id=st.integers(0, 0xFFFFFFFF),
    seq=st.integers(0, 0xFFFF),
    msg_type=st.sampled_from(list(MsgType)),
    flags=st.integers(0, 0x0F),
    lat_e7=st.integers(-(2**31), 2**31 - 1),
    lon_e7=st.integers(-(2**31), 2**31 - 1),
    battery_dAh=st.integers(0, 0xFFFF),
)


@given(uplink_frames)
@settings(max_examples=500, deadline=None)
def test_uplink_round_trip(frame):
    assert decode_frame(encode_frame(frame)) == frame


@given(
    st.integers(0, 0xFFFFFFFF),
    st.sampled_from([CommandKind.WAKE, CommandKind.LOCATE, CommandKind.SILENCE, CommandKind.PING]),
    st.integers(0, 0xFFFFFFFF),
)
@settings(max_examples=300, deadline=None)
def test_downlink_round_trip(device_id, cmd, nonce):
    command = DownlinkCommand(device_id, cmd, nonce)
    assert decode_command(encode_command(command)) == command


def test_decode_rejects_wrong_length():
    with pytest.raises(BadLength):
        decode_frame(b"\x00" * 20)
    with pytest.raises(BadLength):
        decode_frame(b"\x00" * 22)
    with pytest.raises(BadLength):
        decode_command(b"\x00" * 11)


def test_decode_rejects_bad_crc():
    data = bytearray(bytes.fromhex(GOLDEN["uplink"][0]["hex"]))
    data[-1] ^= 0xFF
    with pytest.raises(BadCrc):
        decode_frame(bytes(data))


def _reencode_with_valid_crc(data: bytearray) -> bytes:
    body = bytes(data[:-2])
    return body + crc16(body).to_bytes(2, "big")


def test_decode_rejects_unknown_version():
    data = bytearray(bytes.fromhex(GOLDEN["uplink"][0]["hex"]))
    data[0] = 0x02
    with pytest.raises(UnknownVersion):
        decode_frame(_reencode_with_valid_crc(data))


def test_decode_rejects_unknown_msg_type():
    data = bytearray(bytes.fromhex(GOLDEN["uplink"][0]["hex"]))
    data[7] = 0x7F
    with pytest.raises(UnknownMsgType):
        decode_frame(_reencode_with_valid_crc(data))


def test_unknown_downlink_command_byte_decodes_as_unknown():
    data = bytearray(bytes.fromhex(GOLDEN["downlink"][0]["hex"]))
    data[5] = 0x7F
    cmd = decode_command(_reencode_with_valid_crc(data))
    assert cmd.cmd is CommandKind.UNKNOWN
    assert cmd.raw_cmd == 0x7F


def test_every_single_byte_corruption_of_golden_frame_is_detected():
    original = bytes.fromhex(GOLDEN["uplink"][1]["hex"])
    rejected = 0
    total = 0
    for pos in range(len(original)):
        for value in range(256):
            if value == original[pos]:
                continue
            total += 1
            corrupted = original[:pos] + bytes([value]) + original[pos + 1:]
            with pytest.raises(radio.RadioError):
                decode_frame(corrupted)
            rejected += 1
    assert rejected == total == 21 * 255


def test_frame_field_range_validation():
    with pytest.raises(ValueError):
        UplinkFrame(2**32, 0, MsgType.HEARTBEAT, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        UplinkFrame(0, 2**16, MsgType.HEARTBEAT, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        UplinkFrame(0, 0, MsgType.HEARTBEAT, 0x10, 0, 0, 0)
    with pytest.raises(ValueError):
        UplinkFrame(0, 0, MsgType.HEARTBEAT, 0, 2**31, 0, 0)


# --- cell admission ---

def test_attach_until_capacity_then_refuse():
    cell = CellState(capacity=5)
    for device_id in range(5):
        assert attach(cell, device_id) is True
    with pytest.raises(CellFull):
        attach(cell, 99)
    assert cell.attached_devices == 5


def test_attach_is_idempotent_per_device():
    cell = CellState(capacity=1)
    assert attach(cell, 7) is True
    assert attach(cell, 7) is False
    assert cell.attached_devices == 1


def test_attach_zero_capacity_refuses_first():
    cell = CellState(capacity=0)
    with pytest.raises(CellFull):
        attach(cell, 1)


def test_attach_detach_interleaving_never_exceeds_capacity():
    rng = random.Random(11)
    cell = CellState(capacity=20)
    live = set()
    for _ in range(2_000):
        device_id = rng.randrange(60)
        if rng.random() < 0.5:
            try:
                attach(cell, device_id)
                live.add(device_id)
            except CellFull:
                assert len(live) == 20 and device_id not in live
        else:
            detach(cell, device_id)
            live.discard(device_id)
        assert cell.attached_devices == len(live) <= 20


# --- delivery ---

def _channel(path_loss=120.0, residual_loss=0.0, cell=None, tech=None):
    if tech is None:
        _, tech = tech_pair(9.0)
    return Channel(LinkBudget(23.0, path_loss, -114.0), tech, residual_loss, cell)


def test_transmit_clean_channel_delivers_first_attempt():
    frame = _uplink_from_fields(GOLDEN["uplink"][0]["fields"])
    outcome = transmit(frame, _channel(), RetryPolicy(airtime_ms=1000), rng_seed=5)
    assert outcome.delivered
    assert outcome.attempts == 1
    assert outcome.latency_ms == 1000


def test_transmit_undecodable_fails_after_max_attempts():
    gprs, _ = tech_pair(9.0)
    frame = _uplink_from_fields(GOLDEN["uplink"][0]["fields"])
    # SNR = 23 - 130 + 114 = 7 dB < 9 dB threshold
    outcome = transmit(frame, _channel(130.0, tech=gprs), RetryPolicy(max_attempts=4), rng_seed=5)
    assert not outcome.delivered
    assert outcome.attempts == 4


def test_transmit_is_reproducible():
    frame = _uplink_from_fields(GOLDEN["uplink"][0]["fields"])
    channel = _channel(residual_loss=0.5)
    a = transmit(frame, channel, rng_seed=123)
    b = transmit(frame, channel, rng_seed=123)
    assert a == b


def test_transmit_requires_attachment():
    cell = CellState(capacity=10)
    frame = _uplink_from_fields(GOLDEN["uplink"][0]["fields"])
    with pytest.raises(NotAttached):
        transmit(frame, _channel(cell=cell), rng_seed=1)
    attach(cell, frame.device_id)
    assert transmit(frame, _channel(cell=cell), rng_seed=1).delivered


def test_transmit_attempt_distribution_is_geometric():
    # statistical oracle: with residual loss p the attempt count is
    # geometric(1-p); compare observed pmf over 10k seeded trials
    frame = _uplink_from_fields(GOLDEN["uplink"][0]["fields"])
    channel = _channel(residual_loss=0.5)
    policy = RetryPolicy(max_attempts=30)
    counts: dict[int, int] = {}
    trials = 10_000
    for seed in range(trials):
        outcome = transmit(frame, channel, policy, rng_seed=seed)
        assert outcome.delivered
        counts[outcome.attempts] = counts.get(outcome.attempts, 0) + 1
    for k in (1, 2, 3, 4):
        expected = 0.5**k
        observed = counts.get(k, 0) / trials
        assert abs(observed - expected) / expected < 0.05, (k, observed, expected)


def test_backoff_latency_growth():
    gprs, _ = tech_pair(9.0)
    frame = _uplink_from_fields(GOLDEN["uplink"][0]["fields"])
    policy = RetryPolicy(max_attempts=3, backoff_base_s=2.0, backoff_factor=2.0, airtime_ms=100)
    outcome = transmit(frame, _channel(130.0, tech=gprs), policy, rng_seed=0)
    # 3 airtimes + backoffs of 2s and 4s
    assert outcome.latency_ms == 3 * 100 + 2000 + 4000
