"""Proper times, clock phase, reference phase and the direct full-mass oracle.

The reference phase (~1e8 rad) and the clock phase (~1e-3 rad) are produced by
separate closed-form expressions and kept apart in :class:`PhaseBreakdown`.
Only :func:`total_phase_direct` forms the naive branch sums, and it exists to
check the perturbative decomposition, not to replace it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .kinematics import (
    BranchTrajectory,
    Segment,
    is_closed,
    propagate_full_mass,
    propagate_reference,
)
from .model import Constants, InvalidParameterError, PulseSequence, Species, State


class OpenInterferometerError(InvalidParameterError):
    """The branches do not reunite under the reference Hamiltonian."""


@dataclass(frozen=True)
class SegmentProperTime:
    index: int
    lam: State
    dtau: float


@dataclass(frozen=True)
class PhaseBreakdown:
    """Reference and clock contributions, stored separately.

    ``geometry`` holds pulse times and kicks so that state-inverted runs can be
    paired safely; ``units_mode`` is copied from the constants used.
    ``ref_split`` optionally holds ``(anchor, remainder)`` with
    ``anchor + remainder == ref_phase`` before rounding. The anchor is the laser
    phase of the common free fall and is bitwise identical for runs sharing a
    geometry, so differences of remainders avoid the ~1e-8 rad rounding of the
    full reference phase.
    """

    ref_phase: float
    segments: tuple[SegmentProperTime, ...]
    clock_phase: float
    geometry: tuple = ()
    units_mode: str = "physical"
    ref_split: tuple[float, float] | None = None

    @property
    def total(self) -> float:
        return self.ref_phase + self.clock_phase


# -- proper time ---------------------------------------------------------------


def _piece_integrals(seg: Segment, a: float, b: float) -> tuple[float, float]:
    """Closed-form ``int zdot**2`` and ``int z`` over ``[a, b]`` within one segment."""
    d = b - a
    z, v, g = seg.position(a), seg.velocity(a), seg.g
    int_v2 = v * v * d - v * g * d * d + g * g * d**3 / 3.0
    int_z = z * d + 0.5 * v * d * d - g * d**3 / 6.0
    return int_v2, int_z


def _pieces(traj: BranchTrajectory, t_a: float, t_b: float):
    for seg in traj.segments:
        a, b = max(seg.t_start, t_a), min(seg.t_end, t_b)
        if b > a:
            yield seg, a, b


def proper_time(
    traj: BranchTrajectory,
    t_a: float,
    t_b: float,
    constants: Constants,
    method: str = "closed",
    nodes: int = 10_000,
) -> float:
    """Proper time ``int dt [1 - zdot**2/(2c**2) + g*z/c**2]`` along one branch.

    ``method="quadrature"`` integrates the same integrand with composite
    Simpson on ``nodes`` intervals per segment, for cross-checking.
    """
    if t_b < t_a:
        raise InvalidParameterError(f"reversed interval [{t_a}, {t_b}]")
    if t_a < traj.t_start or t_b > traj.t_end:
        raise InvalidParameterError("interval outside the trajectory span")
    c2 = constants.c**2
    excess = []
    for seg, a, b in _pieces(traj, t_a, t_b):
        if method == "closed":
            int_v2, int_z = _piece_integrals(seg, a, b)
            excess.append((-0.5 * int_v2 + seg.g * int_z) / c2)
        elif method == "quadrature":
            n = nodes + (nodes % 2)
            t = np.linspace(a, b, n + 1)
            s = t - seg.t_start
            v = seg.ref.velocity(t) + seg.dv0 - seg.excess_accel * s
            z = seg.ref.position(t) + seg.dz0 + seg.dv0 * s - 0.5 * seg.excess_accel * s * s
            excess.append(simpson((-0.5 * v * v + seg.g * z) / c2, x=t))
        else:
            raise ValueError(f"unknown method {method!r}")
    return (t_b - t_a) + math.fsum(excess)


def _paired_segments(upper: BranchTrajectory, lower: BranchTrajectory):
    su, sl = upper.interpulse_segments(), lower.interpulse_segments()
    if len(su) != len(sl):
        raise InvalidParameterError("branches have different segment counts")
    for a, b in zip(su, sl):
        if a.t_start != b.t_start or a.t_end != b.t_end:
            raise InvalidParameterError("segment boundaries differ between branches")
        if a.lam != b.lam or a.excess_accel != b.excess_accel:
            raise InvalidParameterError("internal state must be branch independent")
    return list(zip(su, sl))


def segment_dtaus(
    upper: BranchTrajectory, lower: BranchTrajectory, constants: Constants
) -> list[SegmentProperTime]:
    """Proper-time difference ``tau_upper - tau_lower`` on every inter-pulse segment.

    Evaluated directly from the branch differences, so the result keeps full
    relative precision even though each proper time is ~1e17 times larger.
    """
    c2 = constants.c**2
    out = []
    for n, (su, sl) in enumerate(_paired_segments(upper, lower), start=1):
        d, g = su.duration, su.g
        dz = su.dz0 - sl.dz0
        dv = su.dv0 - sl.dv0
        vsum = 2.0 * su.ref.velocity(su.t_start) + su.dv0 + sl.dv0
        dtau = (-0.5 * dv * vsum * d + g * dv * d * d + g * dz * d) / c2
        out.append(SegmentProperTime(n, su.lam, dtau))
    return out


def clock_phase(segments, Omega: float) -> float:
    """``-(Omega/2) * sum(lam_n * dtau_n)``."""
    if not segments:
        raise InvalidParameterError("no segments")
    return -0.5 * Omega * math.fsum(int(s.lam) * s.dtau for s in segments)


# -- reference phase -----------------------------------------------------------


def _pair_reference_phase(
    seq: PulseSequence,
    upper: BranchTrajectory,
    lower: BranchTrajectory,
    m: float,
    hbar: float,
) -> tuple[float, float]:
    """Action difference plus laser terms for two reference-mass branches.

    The kinetic cross term with the common free-fall velocity is integrated by
    parts; together with the midpoint separation phase of the exit port it
    leaves only boundary products of the (tiny) exit mismatch.

    Returns ``(anchor, remainder)``: the laser phase evaluated on the common
    free fall, and everything else.
    """
    ref = upper.ref
    terms = []
    for su, sl in _paired_segments(upper, lower):
        d, e = su.duration, su.excess_accel
        dz = su.dz0 - sl.dz0
        dv = su.dv0 - sl.dv0
        vbar = 0.5 * (su.dv0 + sl.dv0)
        terms.append(m * dv * (vbar * d - 0.5 * e * d * d) / hbar)
        terms.append(-m * e * (dz * d + 0.5 * dv * d * d) / hbar)

    t_first, t_last = seq.pulses[0].t, seq.pulses[-1].t
    dz_first = upper.deviation(t_first) - lower.deviation(t_first)
    dz_last = upper.deviation(t_last) - lower.deviation(t_last)
    dv_exit = 0.5 * (upper.deviation_velocity(t_last) + lower.deviation_velocity(t_last))
    terms.append(-m * dz_first * ref.velocity(t_first) / hbar)
    terms.append(-m * dz_last * dv_exit / hbar)

    anchor = math.fsum((p.k_upper - p.k_lower) * ref.position(p.t) for p in seq.pulses)
    for p in seq.pulses:
        terms.append(p.k_upper * upper.deviation(p.t) - p.k_lower * lower.deviation(p.t))
        terms.append(p.phi_upper - p.phi_lower)
    return anchor, math.fsum(terms)


def reference_phase(
    seq: PulseSequence,
    upper: BranchTrajectory,
    lower: BranchTrajectory,
    species: Species,
    constants: Constants,
) -> float:
    """Phase of the closed interferometer at the reference mass.

    Raises :class:`OpenInterferometerError` if the branches do not close; use
    :func:`total_phase_direct` for open geometries.
    """
    if not is_closed(upper, lower):
        raise OpenInterferometerError(
            "interferometer is open under the reference Hamiltonian; "
            "use total_phase_direct (midpoint rule) instead"
        )
    return sum(_pair_reference_phase(seq, upper, lower, species.m, constants.hbar))


def breakdown_from_trajectories(
    seq: PulseSequence,
    upper: BranchTrajectory,
    lower: BranchTrajectory,
    species: Species,
    constants: Constants,
) -> PhaseBreakdown:
    anchor, rest = _pair_reference_phase(seq, upper, lower, species.m, constants.hbar)
    segs = tuple(segment_dtaus(upper, lower, constants))
    return PhaseBreakdown(
        ref_phase=anchor + rest,
        ref_split=(anchor, rest),
        segments=segs,
        clock_phase=clock_phase(segs, species.Omega),
        geometry=seq.geometry_key(),
        units_mode=constants.units_mode,
    )


def total_phase_perturbative(
    seq: PulseSequence, species: Species, constants: Constants
) -> PhaseBreakdown:
    """Reference phase plus first-order clock phase of a closed sequence."""
    upper, lower = propagate_reference(seq, species, constants)
    if not is_closed(upper, lower):
        raise OpenInterferometerError("interferometer is open under the reference Hamiltonian")
    return breakdown_from_trajectories(seq, upper, lower, species, constants)


# -- direct oracle -------------------------------------------------------------


def _branch_phase_terms(
    seq: PulseSequence, traj: BranchTrajectory, constants: Constants
) -> dict[str, float]:
    c2, hbar = constants.c**2, constants.hbar
    rest, kinetic, potential = [], [], []
    for seg in traj.interpulse_segments():
        int_v2, int_z = _piece_integrals(seg, seg.t_start, seg.t_end)
        rest.append(-seg.mass * c2 * seg.duration / hbar)
        kinetic.append(0.5 * seg.mass * int_v2 / hbar)
        potential.append(-seg.mass * seg.g * int_z / hbar)
    laser = [p.k(traj.branch) * traj.position(p.t) + p.phi(traj.branch) for p in seq.pulses]
    return {
        "rest": math.fsum(rest),
        "kinetic": math.fsum(kinetic),
        "potential": math.fsum(potential),
        "laser": math.fsum(laser),
    }


def total_phase_direct(seq: PulseSequence, species: Species, constants: Constants) -> float:
    """Phase difference from exact propagation with the actual state masses.

    Each branch accumulates ``(1/hbar) int [-m c**2 + m zdot**2/2 - m g z] dt``
    plus ``k z + phi`` at every pulse. A residual exit mismatch, which appears at
    first order in the mass defect, is closed with the midpoint rule
    ``-pbar * (z_upper - z_lower) / hbar``.
    """
    upper, lower = propagate_full_mass(seq, species, constants)
    pu = _branch_phase_terms(seq, upper, constants)
    pl = _branch_phase_terms(seq, lower, constants)
    t_last = seq.pulses[-1].t
    seg_u, seg_l = upper.segment_at(t_last), lower.segment_at(t_last)
    dz = seg_u.position(t_last) - seg_l.position(t_last)
    pbar = 0.5 * (seg_u.mass * seg_u.velocity(t_last) + seg_l.mass * seg_l.velocity(t_last))
    diffs = [pu[key] - pl[key] for key in pu]
    diffs.append(-pbar * dz / constants.hbar)
    return math.fsum(diffs)


def direct_oracle_scaling(
    seq: PulseSequence, m: float, dms, constants: Constants
) -> tuple[list[dict], float]:
    """Residual ``direct - perturbative`` for several mass defects and its log-log slope.

    A slope of 2 confirms that the perturbative phase is exact to first order.
    """
    rows = []
    for dm in dms:
        species = Species.with_mass_defect(m, dm, constants)
        pert = total_phase_perturbative(seq, species, constants)
        direct = total_phase_direct(seq, species, constants)
        rows.append(
            {
                "dm": dm,
                "dm_over_m": dm / m,
                "direct": direct,
                "ref_phase": pert.ref_phase,
                "clock_phase": pert.clock_phase,
                "residual": (direct - pert.ref_phase) - pert.clock_phase,
            }
        )
    x = np.log([r["dm"] for r in rows])
    y = np.log([abs(r["residual"]) for r in rows])
    slope = float(np.polyfit(x, y, 1)[0]) if len(rows) >= 2 else float("nan")
    return rows, slope
