"""Piecewise-analytic branch trajectories with instantaneous momentum kicks.

Positions are stored as deviations from the free fall of the common initial
condition under the nominal ``g``. Branch differences and laser terms built
from the deviations do not lose digits to the metre-scale drop of the whole
cloud, which is what keeps milliradian clock phases resolvable next to
~1e8 rad reference phases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .model import Constants, InvalidParameterError, PulseSequence, Species, State

BRANCHES = ("upper", "lower")


@dataclass(frozen=True)
class FreeFall:
    """Reference free fall ``z0 + v0*t - g*t**2/2`` shared by both branches."""

    z0: float
    v0: float
    g: float

    def position(self, t: float) -> float:
        return self.z0 + self.v0 * t - 0.5 * self.g * t * t

    def velocity(self, t: float) -> float:
        return self.v0 - self.g * t


@dataclass(frozen=True)
class Segment:
    """Uniformly accelerated flight between two pulses.

    ``dz0``/``dv0`` are the deviations from ``ref`` at ``t_start``.
    ``excess_accel`` is the extra downward acceleration on top of ``ref.g``; it
    is stored rather than the total so that tiny violations keep their digits.
    ``mass`` is the inertial mass used to propagate the segment.
    """

    t_start: float
    t_end: float
    dz0: float
    dv0: float
    lam: State
    excess_accel: float
    mass: float
    ref: FreeFall

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def g(self) -> float:
        return self.ref.g + self.excess_accel

    @property
    def z0(self) -> float:
        return self.position(self.t_start)

    @property
    def v0(self) -> float:
        return self.velocity(self.t_start)

    def deviation(self, t: float) -> float:
        s = t - self.t_start
        return self.dz0 + self.dv0 * s - 0.5 * self.excess_accel * s * s

    def deviation_velocity(self, t: float) -> float:
        return self.dv0 - self.excess_accel * (t - self.t_start)

    def position(self, t: float) -> float:
        return self.ref.position(t) + self.deviation(t)

    def velocity(self, t: float) -> float:
        return self.ref.velocity(t) + self.deviation_velocity(t)


@dataclass(frozen=True)
class BranchTrajectory:
    branch: str
    segments: tuple[Segment, ...]
    ref: FreeFall
    pulse_times: tuple[float, ...]

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def segment_at(self, t: float) -> Segment:
        """Segment containing ``t``; at a pulse time the segment after the pulse."""
        if not (self.t_start <= t <= self.t_end):
            raise InvalidParameterError(f"t={t} outside trajectory span [{self.t_start}, {self.t_end}]")
        for seg in self.segments:
            if seg.t_start <= t < seg.t_end:
                return seg
        return self.segments[-1]

    def interpulse_segments(self) -> tuple[Segment, ...]:
        """Segments between the first and the last pulse, in time order."""
        first, last = self.pulse_times[0], self.pulse_times[-1]
        return tuple(
            s for s in self.segments if s.t_start >= first and s.t_start < last and s.t_end <= last
        )

    def position(self, t: float) -> float:
        return self.segment_at(t).position(t)

    def velocity(self, t: float) -> float:
        return self.segment_at(t).velocity(t)

    def deviation(self, t: float) -> float:
        return self.segment_at(t).deviation(t)

    def deviation_velocity(self, t: float) -> float:
        return self.segment_at(t).deviation_velocity(t)

    def _segment_ending_at(self, t: float) -> Segment | None:
        for seg in self.segments:
            if seg.t_end == t and seg.duration > 0:
                return seg
        return None

    def velocity_before(self, t: float) -> float:
        """Velocity just before a pulse at ``t``; the initial velocity at the start time."""
        seg = self._segment_ending_at(t)
        if seg is not None:
            return seg.velocity(t)
        if t == self.t_start:
            return self.ref.velocity(t)
        raise InvalidParameterError(f"no flight segment ends at t={t}")

    def mass_before(self, t: float) -> float:
        """Inertial mass just before a pulse at ``t`` (not defined at the start time)."""
        seg = self._segment_ending_at(t)
        if seg is None:
            raise InvalidParameterError(f"no flight segment ends at t={t}")
        return seg.mass


def _propagate_branch(
    seq: PulseSequence,
    branch: str,
    hbar: float,
    ref: FreeFall,
    mass_of: Callable[[State], float],
    excess_of: Callable[[State], float],
) -> BranchTrajectory:
    segments: list[Segment] = []
    t, dz, dv = 0.0, 0.0, 0.0
    lam = seq.lambda0

    def fly(t_to: float) -> None:
        nonlocal t, dz, dv
        if t_to <= t:
            return
        seg = Segment(t, t_to, dz, dv, lam, excess_of(lam), mass_of(lam), ref)
        segments.append(seg)
        dz, dv = seg.deviation(t_to), seg.deviation_velocity(t_to)
        t = t_to

    for pulse in seq.pulses:
        fly(pulse.t)
        m_before, lam = mass_of(lam), pulse.lambda_after
        m_after = mass_of(lam)
        kick = hbar * pulse.k(branch)
        if m_after == m_before:
            dv = dv + kick / m_after
        else:
            # momentum is conserved through the mass change, velocity is not
            dv = (m_before * dv + kick + (m_before - m_after) * ref.velocity(pulse.t)) / m_after
    if seq.t_end > t:
        fly(seq.t_end)
    else:
        # zero-length terminal segment keeps the post-kick state of the last pulse
        segments.append(Segment(t, t, dz, dv, lam, excess_of(lam), mass_of(lam), ref))
    return BranchTrajectory(branch, tuple(segments), ref, seq.times)


def propagate_reference(
    seq: PulseSequence,
    species: Species,
    constants: Constants,
    excess_accel: Callable[[State], float] | None = None,
) -> tuple[BranchTrajectory, BranchTrajectory]:
    """Both branches under the reference-mass Hamiltonian.

    Every kick changes the velocity by ``hbar*k/m`` with the reference mass.
    ``excess_accel`` maps the internal state to an extra downward acceleration
    on top of ``constants.g``; this is how equivalence-principle violations
    enter.
    """
    ref = FreeFall(seq.z0, seq.v0, constants.g)
    excess_of = excess_accel or (lambda lam: 0.0)
    mass_of = lambda lam: species.m  # noqa: E731
    return tuple(
        _propagate_branch(seq, b, constants.hbar, ref, mass_of, excess_of) for b in BRANCHES
    )


def propagate_full_mass(
    seq: PulseSequence, species: Species, constants: Constants
) -> tuple[BranchTrajectory, BranchTrajectory]:
    """Both branches with the actual state mass ``m + lam*dm/2`` on every segment."""
    species.check(constants)
    ref = FreeFall(seq.z0, seq.v0, constants.g)
    mass_of = lambda lam: species.mass(lam, constants)  # noqa: E731
    return tuple(
        _propagate_branch(seq, b, constants.hbar, ref, mass_of, lambda lam: 0.0) for b in BRANCHES
    )


def _check_pair(upper: BranchTrajectory, lower: BranchTrajectory) -> None:
    if upper.t_start != lower.t_start or upper.t_end != lower.t_end:
        raise InvalidParameterError("branch trajectories cover different time spans")
    if upper.ref != lower.ref:
        raise InvalidParameterError("branch trajectories start from different initial conditions")


def closure_defect(upper: BranchTrajectory, lower: BranchTrajectory) -> tuple[float, float]:
    """Position and velocity mismatch ``upper - lower`` at the final time."""
    _check_pair(upper, lower)
    t = upper.t_end
    dz = upper.deviation(t) - lower.deviation(t)
    dv = upper.deviation_velocity(t) - lower.deviation_velocity(t)
    return dz, dv


def branch_separation(upper: BranchTrajectory, lower: BranchTrajectory, t: float) -> float:
    _check_pair(upper, lower)
    return upper.deviation(t) - lower.deviation(t)


def is_closed(upper: BranchTrajectory, lower: BranchTrajectory, rtol: float = 1e-12) -> bool:
    """Closure within ``rtol`` of the largest position/velocity magnitude of the run."""
    dz, dv = closure_defect(upper, lower)
    times = [s.t_start for s in upper.segments] + [upper.t_end]
    zscale = max(max(abs(tr.position(t)), abs(branch_separation(upper, lower, t)))
                 for tr in (upper, lower) for t in times)
    vscale = max(abs(tr.velocity(t)) for tr in (upper, lower) for t in times)
    return abs(dz) <= rtol * zscale and abs(dv) <= rtol * vscale
