"""Phase evaluation in the freely falling frame.

The trajectory map is the Galilei shift ``z' = z + g t**2/2``; the Rindler
correction to the time coordinate enters only through ``dt'/dt`` in the proper
time. All expansions are truncated at first order in ``1/c**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from numpy.polynomial import Polynomial

from .kinematics import BranchTrajectory, is_closed, propagate_full_mass, propagate_reference
from .model import Constants, InvalidParameterError, PulseSequence, Species, State
from .phase import OpenInterferometerError, PhaseBreakdown, SegmentProperTime, clock_phase


@dataclass(frozen=True)
class FallingSegment:
    """``z'(t) = z0 + v*(t - t_start) + accel*(t - t_start)**2/2`` in the falling frame."""

    t_start: float
    t_end: float
    z0: float
    v: float
    accel: float
    lam: State
    mass: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def position(self, t: float) -> float:
        s = t - self.t_start
        return self.z0 + self.v * s + 0.5 * self.accel * s * s

    def velocity(self, t: float) -> float:
        return self.v + self.accel * (t - self.t_start)


@dataclass(frozen=True)
class FallingFrameTrajectory:
    branch: str
    segments: tuple[FallingSegment, ...]
    pulse_times: tuple[float, ...]

    def segment_at(self, t: float) -> FallingSegment:
        for seg in self.segments:
            if seg.t_start <= t < seg.t_end:
                return seg
        if self.segments[0].t_start <= t <= self.segments[-1].t_end:
            return self.segments[-1]
        raise InvalidParameterError(f"t={t} outside trajectory span")

    def segment_before(self, t: float) -> FallingSegment:
        for seg in self.segments:
            if seg.t_end == t and seg.duration > 0:
                return seg
        raise InvalidParameterError(f"no segment ends at t={t}")

    def interpulse_segments(self) -> tuple[FallingSegment, ...]:
        first, last = self.pulse_times[0], self.pulse_times[-1]
        return tuple(
            s for s in self.segments if s.t_start >= first and s.t_start < last and s.t_end <= last
        )

    def position(self, t: float) -> float:
        return self.segment_at(t).position(t)

    def velocity(self, t: float) -> float:
        return self.segment_at(t).velocity(t)


def galilei_transform(traj: BranchTrajectory, constants: Constants) -> FallingFrameTrajectory:
    """Shift every segment by ``g t**2/2``; free-fall segments become straight lines."""
    g = constants.g
    ref = traj.ref
    segs = []
    for seg in traj.segments:
        t0 = seg.t_start
        # ref.position(t0) + g t0**2/2, written without the large cancelling terms
        z0 = ref.z0 + ref.v0 * t0 + 0.5 * (g - ref.g) * t0 * t0 + seg.dz0
        v = ref.v0 + (g - ref.g) * t0 + seg.dv0
        accel = (g - ref.g) - seg.excess_accel
        segs.append(FallingSegment(t0, seg.t_end, z0, v, accel, seg.lam, seg.mass))
    return FallingFrameTrajectory(traj.branch, tuple(segs), traj.pulse_times)


def rindler_time(t: float, z: float, constants: Constants) -> float:
    """Falling-frame time ``t' = t [1 + g**2 t**2/(6c**2) + g z/c**2]``."""
    c2, g = constants.c**2, constants.g
    return t * (1.0 + g * g * t * t / (6.0 * c2) + g * z / c2)


def rindler_rate(t: float, z: float, zdot: float, constants: Constants) -> float:
    """``dt'/dt`` along a lab trajectory ``z(t)``, the time derivative of :func:`rindler_time`."""
    c2, g = constants.c**2, constants.g
    return 1.0 + g * g * t * t / (2.0 * c2) + g * z / c2 + g * t * zdot / c2


def residual_recoil(species: Species, T1: float, constants: Constants) -> float:
    """Extra falling-frame momentum ``-dm g T1`` picked up when the mass drops at ``T1``."""
    if not T1 > 0:
        raise InvalidParameterError("T1 must be positive")
    return -species.dm(constants) * constants.g * T1


def transformed_recoil(
    seq: PulseSequence,
    species: Species,
    constants: Constants,
    pulse_index: int,
    branch: str = "upper",
) -> float:
    """Falling-frame momentum jump at a pulse minus the laser kick, from full-mass propagation."""
    upper, lower = propagate_full_mass(seq, species, constants)
    traj = galilei_transform(upper if branch == "upper" else lower, constants)
    pulse = seq.pulses[pulse_index]
    before, after = traj.segment_before(pulse.t), traj.segment_at(pulse.t)
    p_before = before.mass * before.velocity(pulse.t)
    p_after = after.mass * after.velocity(pulse.t)
    return p_after - p_before - constants.hbar * pulse.k(branch)


def _pairs(upper: FallingFrameTrajectory, lower: FallingFrameTrajectory):
    su, sl = upper.interpulse_segments(), lower.interpulse_segments()
    if len(su) != len(sl) or any(a.t_start != b.t_start or a.t_end != b.t_end for a, b in zip(su, sl)):
        raise InvalidParameterError("segment boundaries differ between branches")
    for a, b in zip(su, sl):
        if a.accel != 0.0 or b.accel != 0.0:
            raise InvalidParameterError("falling-frame phase needs uniform gravity")
    return list(zip(su, sl))


def falling_frame_dtaus(
    upper: FallingFrameTrajectory, lower: FallingFrameTrajectory, constants: Constants
) -> list[SegmentProperTime]:
    """Segment proper-time differences from ``int dt (dt'/dt)(1 - z'dot**2/(2c**2))``.

    With ``z = z' - g t**2/2`` the branch-common parts of ``dt'/dt`` drop out and
    the difference integrand is ``[g dz' + g t dv' - dv' * vsum'/2] / c**2``.
    """
    c2, g = constants.c**2, constants.g
    out = []
    for n, (a, b) in enumerate(_pairs(upper, lower), start=1):
        s = Polynomial([0.0, 1.0])
        t = a.t_start + s
        dz = Polynomial([a.z0 - b.z0, a.v - b.v])
        dv = a.v - b.v
        vsum = a.v + b.v
        integrand = (g * dz + g * t * dv - 0.5 * dv * vsum) / c2
        anti = integrand.integ()
        out.append(SegmentProperTime(n, a.lam, float(anti(a.duration) - anti(0.0))))
    return out


def total_phase_falling_frame(
    seq: PulseSequence,
    species: Species,
    constants: Constants,
    trajectories: tuple[BranchTrajectory, BranchTrajectory] | None = None,
) -> PhaseBreakdown:
    """Reference and clock phase recomputed in the freely falling frame.

    The reference part is the free-particle action plus the laser phases
    ``k z' + phi - k g t**2/2`` imprinted on the transformed paths.
    ``trajectories`` lets a caller reuse lab-frame paths generated with a
    different pulse list, e.g. to show that zeroed wave numbers leave the clock
    phase untouched.
    """
    if trajectories is None:
        trajectories = propagate_reference(seq, species, constants)
        if not is_closed(*trajectories):
            raise OpenInterferometerError("interferometer is open under the reference Hamiltonian")
    upper, lower = (galilei_transform(tr, constants) for tr in trajectories)
    m, hbar, g = species.m, constants.hbar, constants.g

    terms = []
    for a, b in _pairs(upper, lower):
        terms.append(0.5 * m * (a.v - b.v) * (a.v + b.v) * a.duration / hbar)
    for p in seq.pulses:
        doppler = 0.5 * g * p.t * p.t
        terms.append(p.k_upper * upper.position(p.t) + p.phi_upper - p.k_upper * doppler)
        terms.append(-(p.k_lower * lower.position(p.t) + p.phi_lower - p.k_lower * doppler))
    t_last = seq.pulses[-1].t
    dz_exit = upper.position(t_last) - lower.position(t_last)
    v_exit = 0.5 * (upper.velocity(t_last) + lower.velocity(t_last))
    terms.append(-m * v_exit * dz_exit / hbar)

    segs = tuple(falling_frame_dtaus(upper, lower, constants))
    return PhaseBreakdown(
        ref_phase=math.fsum(terms),
        segments=segs,
        clock_phase=clock_phase(segs, species.Omega),
        geometry=seq.geometry_key(),
        units_mode=constants.units_mode,
    )
