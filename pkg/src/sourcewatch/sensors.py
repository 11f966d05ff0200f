"""Physics-lite models of the three sensing elements.

Gamma sensing is a photodiode behind a thin lead filter: the lead passes
the hard flaw-source gammas but strips the soft depleted-uranium
background, which is the whole discrimination trick. The keyed switches
read through servo circuits wired so that every open-type failure lands
on the unsafe (Low) side. The braid lock is a door-lock state machine
that refuses to close while the source is out.

Default numbers are engineering placeholders; the one hard requirement
is the discrimination invariant, which the test suite enforces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class DomainError(ValueError):
    pass


class BlockedError(Exception):
    """The lock refused to close; the mechanism is now visibly engaged."""

    def __init__(self, braid):
        super().__init__(f"switch ring blocked: braid is {braid.value}")
        self.state = LockState.ENGAGED_BLOCKING


class SwitchLevel(Enum):
    HIGH = "high"
    LOW = "low"   # always the unsafe interpretation


class SourcePosition(Enum):
    RETRACTED = "retracted"
    EXTENDED = "extended"
    SHED = "shed"


class DetectorPosture(Enum):
    ON_GROUND = "on_ground"
    LIFTED = "lifted"


class SwitchFault(Enum):
    NONE = "none"
    STUCK_OPEN = "stuck_open"
    STUCK_CLOSED = "stuck_closed"
    WIRE_BREAK = "wire_break"


class LockState(Enum):
    OPEN = "open"
    CLOSED_SAFE = "closed_safe"
    ENGAGED_BLOCKING = "engaged_blocking"


class Isotope(Enum):
    IR192 = "ir192"
    SE75 = "se75"
    CS137 = "cs137"
    CO60 = "co60"
    DU_SHIELD = "du_shield"

WORKING_ISOTOPES = (Isotope.IR192, Isotope.SE75, Isotope.CS137, Isotope.CO60)


@dataclass(frozen=True)
class RadiationSource:
    isotope: Isotope
    activity_GBq: float
    gamma_constant_mSvh_per_GBq_at_1m: float

    def __post_init__(self):
        if self.activity_GBq <= 0:
            raise DomainError("activity_GBq must be > 0")
        if self.gamma_constant_mSvh_per_GBq_at_1m <= 0:
            raise DomainError("gamma constant must be > 0")


@dataclass(frozen=True)
class GammaSensorConfig:
    threshold_uA: float = 1.0
    responsivity_uA_per_mSvh: float = 1.0
    lead_thickness_mm: float = 2.0
    mu_source_per_mm: float = 0.06   # flaw-source gamma energies: lead is nearly transparent
    mu_du_per_mm: float = 1.5        # soft DU gammas: heavily attenuated
    sense_distance_m: float = 0.05

    def __post_init__(self):
        for name in ("threshold_uA", "responsivity_uA_per_mSvh",
                     "mu_source_per_mm", "mu_du_per_mm", "sense_distance_m"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")
        if self.lead_thickness_mm < 0:
            raise DomainError("lead_thickness_mm must be >= 0")

    @staticmethod
    def from_file(path: str | Path) -> "GammaSensorConfig":
        """Load overrides from a JSON config; keys carry their units."""
        data = json.loads(Path(path).read_text())
        return GammaSensorConfig(**data)


# Typical gamma-ray constants (mSv/h per GBq at 1 m) and a 3.7 GBq test
# activity. DU is expressed as an equivalent point source producing the
# 0.5 mSv/h unshielded background at the sense distance.
DEFAULT_ACTIVITY_GBQ = 3.7
GAMMA_CONSTANTS = {
    Isotope.IR192: 0.13,
    Isotope.SE75: 0.054,
    Isotope.CS137: 0.081,
    Isotope.CO60: 0.351,
}
DU_BACKGROUND_MSVH_UNSHIELDED = 0.5


def default_source(isotope: Isotope, cfg: GammaSensorConfig | None = None) -> RadiationSource:
    cfg = cfg or GammaSensorConfig()
    if isotope is Isotope.DU_SHIELD:
        gamma = DU_BACKGROUND_MSVH_UNSHIELDED * cfg.sense_distance_m**2
        return RadiationSource(isotope, 1.0, gamma)
    return RadiationSource(isotope, DEFAULT_ACTIVITY_GBQ, GAMMA_CONSTANTS[isotope])


def dose_rate(
    source: RadiationSource,
    distance_m: float,
    shield_mm: float = 0.0,
    mu_per_mm: float = 1.0,
) -> float:
    """Point-source dose rate in mSv/h: gamma * A / d^2 * exp(-mu * t)."""
    if distance_m <= 0:
        raise DomainError(f"distance_m must be > 0, got {distance_m}")
    if shield_mm < 0:
        raise DomainError("shield_mm must be >= 0")
    if mu_per_mm <= 0:
        raise DomainError("mu_per_mm must be > 0")
    unshielded = (
        source.gamma_constant_mSvh_per_GBq_at_1m * source.activity_GBq / distance_m**2
    )
    return unshielded * math.exp(-mu_per_mm * shield_mm)


def photo_current(dose_mSvh: float, cfg: GammaSensorConfig) -> float:
    """Photodiode current in uA; zero dose means open circuit, zero draw."""
    if dose_mSvh < 0:
        raise DomainError("dose must be >= 0")
    return cfg.responsivity_uA_per_mSvh * dose_mSvh


def attenuation_mu(source: RadiationSource, cfg: GammaSensorConfig) -> float:
    """Lead attenuation coefficient appropriate to the source's energy."""
    return cfg.mu_du_per_mm if source.isotope is Isotope.DU_SHIELD else cfg.mu_source_per_mm


def sensor_triggered(
    source: RadiationSource,
    distance_m: float,
    cfg: GammaSensorConfig | None = None,
) -> bool:
    """True iff the shielded photocurrent exceeds the preset threshold."""
    cfg = cfg or GammaSensorConfig()
    dose = dose_rate(source, distance_m, cfg.lead_thickness_mm, attenuation_mu(source, cfg))
    return photo_current(dose, cfg) > cfg.threshold_uA


def servo_read(pressed: bool, fault: SwitchFault = SwitchFault.NONE) -> SwitchLevel:
    """Detection-point level for a keyed switch through its servo circuit.

    Open-type failures (stuck open, broken wire) read Low: a dead
    circuit must never masquerade as a safe state. A welded-closed
    contact reads High regardless; that is the one failure this wiring
    cannot catch, and tests document it.
    """
    if fault in (SwitchFault.STUCK_OPEN, SwitchFault.WIRE_BREAK):
        return SwitchLevel.LOW
    if fault is SwitchFault.STUCK_CLOSED:
        return SwitchLevel.HIGH
    return SwitchLevel.HIGH if pressed else SwitchLevel.LOW


def lock_transition(
    current: LockState,
    braid: SourcePosition,
    attempt_close: bool = False,
) -> LockState:
    """Advance the braid-lock mechanism.

    Closing is only possible with the braid fully retracted; any other
    close attempt raises BlockedError and leaves the mechanism engaged,
    which is the operator-visible warning. The lock auto-releases once
    the braid returns (modeling choice; a manual reset would also fit).
    """
    if attempt_close:
        if braid is SourcePosition.RETRACTED:
            return LockState.CLOSED_SAFE
        raise BlockedError(braid)
    if braid is SourcePosition.RETRACTED:
        if current is LockState.ENGAGED_BLOCKING:
            return LockState.OPEN
        return current
    return LockState.ENGAGED_BLOCKING
