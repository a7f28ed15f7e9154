"""Constants, species, internal states and pulse sequences.

All types here are frozen dataclasses; they validate on construction and are
safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

# CODATA 2018
SPEED_OF_LIGHT = 299_792_458.0
HBAR = 1.054_571_817e-34
ATOMIC_MASS_UNIT = 1.660_539_066_60e-27
STANDARD_G = 9.81

SR88_MASS_U = 87.9056
SR88_OMEGA = 2.0 * math.pi * 429e12
SR88_WAVENUMBER = 8.0 * 4.0 * math.pi / 813e-9


class InvalidParameterError(ValueError):
    """A physically meaningless or out-of-range input."""


class State(IntEnum):
    """Internal state label; the integer value is the sign used in mass sums."""

    GROUND = -1
    EXCITED = 1


def as_state(value) -> State:
    try:
        return State(int(value))
    except ValueError:
        raise InvalidParameterError(f"internal state must be -1 or +1, got {value!r}") from None


@dataclass(frozen=True)
class Constants:
    """Speed of light, reduced Planck constant and gravitational acceleration.

    ``g`` is the magnitude of the acceleration, which points along -z.
    ``scaled_units`` marks non-physical values used for verification runs.
    """

    c: float = SPEED_OF_LIGHT
    hbar: float = HBAR
    g: float = STANDARD_G
    scaled_units: bool = False

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise InvalidParameterError(f"c must be positive, got {self.c}")
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise InvalidParameterError(f"hbar must be positive, got {self.hbar}")
        if not (self.g >= 0 and math.isfinite(self.g)):
            raise InvalidParameterError(f"g must be non-negative, got {self.g}")

    @classmethod
    def scaled(cls, c: float = 10.0, hbar: float = 1.0, g: float = 1.0) -> "Constants":
        return cls(c=c, hbar=hbar, g=g, scaled_units=True)

    @property
    def units_mode(self) -> str:
        return "scaled" if self.scaled_units else "physical"


@dataclass(frozen=True)
class Species:
    """Two-level atom with reference mass ``m = (m_plus + m_minus)/2``.

    ``Omega`` is the angular transition frequency. The mass defect
    ``dm = hbar*Omega/c**2`` depends on the constants in use, so derived
    masses are methods taking a :class:`Constants`.
    """

    m: float = SR88_MASS_U * ATOMIC_MASS_UNIT
    Omega: float = SR88_OMEGA

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise InvalidParameterError(f"mass must be positive, got {self.m}")
        if not (self.Omega >= 0 and math.isfinite(self.Omega)):
            raise InvalidParameterError(f"Omega must be non-negative, got {self.Omega}")

    @classmethod
    def with_mass_defect(cls, m: float, dm: float, constants: Constants) -> "Species":
        """Species whose transition frequency reproduces the mass defect ``dm``."""
        return cls(m=m, Omega=dm * constants.c**2 / constants.hbar)

    def dm(self, constants: Constants) -> float:
        return constants.hbar * self.Omega / constants.c**2

    def mass(self, state, constants: Constants) -> float:
        return self.m + int(state) * self.dm(constants) / 2.0

    def m_plus(self, constants: Constants) -> float:
        return self.mass(State.EXCITED, constants)

    def m_minus(self, constants: Constants) -> float:
        return self.mass(State.GROUND, constants)

    def compton_frequency(self, constants: Constants) -> float:
        return self.m * constants.c**2 / constants.hbar

    def check(self, constants: Constants) -> None:
        """Raise if the lighter state would have non-positive mass."""
        if self.m_minus(constants) <= 0:
            raise InvalidParameterError("mass defect exceeds twice the reference mass")


@dataclass(frozen=True)
class LaserPulse:
    """Instantaneous pulse: per-branch kick ``hbar*k`` and imprinted laser phase.

    ``lambda_after`` is the internal state of *both* branches after the pulse.
    """

    t: float
    k_upper: float
    k_lower: float
    lambda_after: State
    phi_upper: float = 0.0
    phi_lower: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lambda_after", as_state(self.lambda_after))
        for name in ("t", "k_upper", "k_lower", "phi_upper", "phi_lower"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"pulse field {name} must be finite")

    def k(self, branch: str) -> float:
        return self.k_upper if branch == "upper" else self.k_lower

    def phi(self, branch: str) -> float:
        return self.phi_upper if branch == "upper" else self.phi_lower


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulses plus the common initial condition at ``t = 0``."""

    pulses: tuple[LaserPulse, ...]
    z0: float = 0.0
    v0: float = 0.0
    lambda0: State = State.GROUND
    t_end: float | None = field(default=None)

    def __post_init__(self):
        pulses = tuple(self.pulses)
        object.__setattr__(self, "pulses", pulses)
        object.__setattr__(self, "lambda0", as_state(self.lambda0))
        if not pulses:
            raise InvalidParameterError("a pulse sequence needs at least one pulse")
        if pulses[0].t < 0:
            raise InvalidParameterError("first pulse time must be >= 0")
        for a, b in zip(pulses, pulses[1:]):
            if not b.t > a.t:
                raise InvalidParameterError("pulse times must be strictly increasing")
        if self.t_end is None:
            object.__setattr__(self, "t_end", pulses[-1].t)
        elif self.t_end < pulses[-1].t:
            raise InvalidParameterError("t_end precedes the last pulse")

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(p.t for p in self.pulses)

    @property
    def segment_lambdas(self) -> tuple[State, ...]:
        """Internal state on each segment between the first and last pulse."""
        return tuple(p.lambda_after for p in self.pulses[:-1])

    def inverted(self) -> "PulseSequence":
        """Same kicks and times with every internal state swapped."""
        pulses = tuple(
            LaserPulse(p.t, p.k_upper, p.k_lower, State(-p.lambda_after), p.phi_upper, p.phi_lower)
            for p in self.pulses
        )
        return PulseSequence(pulses, self.z0, self.v0, State(-self.lambda0), self.t_end)

    def with_wavenumbers_zeroed(self) -> "PulseSequence":
        pulses = tuple(
            LaserPulse(p.t, 0.0, 0.0, p.lambda_after, p.phi_upper, p.phi_lower) for p in self.pulses
        )
        return PulseSequence(pulses, self.z0, self.v0, self.lambda0, self.t_end)

    def geometry_key(self) -> tuple:
        """Times and kicks, ignoring internal states; equal for state-inverted runs."""
        return tuple((p.t, p.k_upper, p.k_lower) for p in self.pulses)


def build_redshift_geometry(
    T1: float,
    T: float,
    k: float,
    inverted: bool = False,
    *,
    z0: float = 0.0,
    v0: float = 0.0,
) -> PulseSequence:
    """Four-pulse geometry with a state flip on the central segment.

    Kicks are ``(+k, -k)``, ``(-k, +k)``, ``(-k, +k)``, ``(+k, -k)`` for
    (upper, lower) at ``t = 0, T1, T1 + T, 2*T1 + T``. The atoms enter in the
    ground state and occupy excited/ground/excited on the three segments, or the
    reverse when ``inverted`` is set.
    """
    if not (T1 > 0 and T > 0 and k > 0):
        raise InvalidParameterError(f"T1, T and k must be positive, got T1={T1}, T={T}, k={k}")
    outer = State.GROUND if inverted else State.EXCITED
    inner = State(-outer)
    entry = inner
    times = (0.0, T1, T1 + T, 2.0 * T1 + T)
    kicks = ((k, -k), (-k, k), (-k, k), (k, -k))
    states = (outer, inner, outer, entry)
    pulses = tuple(
        LaserPulse(t, ku, kl, lam) for t, (ku, kl), lam in zip(times, kicks, states)
    )
    return PulseSequence(pulses, z0=z0, v0=v0, lambda0=entry)
