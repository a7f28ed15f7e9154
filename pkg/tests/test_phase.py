import math

import mpmath as mp
import pytest
from hypothesis import given
from hypothesis import strategies as st

from redshiftai.kinematics import propagate_reference
from redshiftai.model import (
    Constants,
    LaserPulse,
    PulseSequence,
    Species,
    State,
    build_redshift_geometry,
)
from redshiftai.phase import (
    OpenInterferometerError,
    direct_oracle_scaling,
    proper_time,
    reference_phase,
    segment_dtaus,
    total_phase_direct,
    total_phase_perturbative,
)


def hand_dtaus(T1, T, k, v0, m, constants):
    """Segment proper-time differences worked out by hand for the standard geometry.

    With recoil velocity vr = hbar k / m the branch separation is 2 vr t, 2 vr T1
    and 2 vr (T1 - s) on the three segments; integrating the difference of
    -zdot**2/2 + g z segment by segment gives the expressions below.
    """
    c2, g = constants.c**2, constants.g
    vr = constants.hbar * k / m
    return (
        (2 * vr * g * T1**2 - 2 * vr * v0 * T1) / c2,
        2 * vr * g * T1 * T / c2,
        (-2 * vr * g * T1 * (T + T1) + 2 * vr * v0 * T1) / c2,
    )


def mp_branch_tau(seq, branch, m, constants, t_a, t_b):
    """Proper time along one branch at 40 digits by adaptive quadrature of the naive path."""
    with mp.workdps(40):
        c2, g, hbar = mp.mpf(constants.c) ** 2, mp.mpf(constants.g), mp.mpf(constants.hbar)
        z, v, t0 = mp.mpf(seq.z0), mp.mpf(seq.v0), mp.mpf(0)
        states = []
        for p in seq.pulses:
            t = mp.mpf(p.t)
            z, v = z + v * (t - t0) - g * (t - t0) ** 2 / 2, v - g * (t - t0)
            v += hbar * mp.mpf(p.k(branch)) / mp.mpf(m)
            t0 = t
            states.append((t, z, v))
        total = mp.mpf(0)
        for (ts, zs, vs), nxt in zip(states, states[1:] + [None]):
            te = nxt[0] if nxt else mp.mpf(seq.t_end)
            a, b = max(ts, mp.mpf(t_a)), min(te, mp.mpf(t_b))
            if b <= a:
                continue

            def rate(t, ts=ts, zs=zs, vs=vs):
                s = t - ts
                zz = zs + vs * s - g * s * s / 2
                vv = vs - g * s
                return -vv * vv / (2 * c2) + g * zz / c2

            total += mp.quad(rate, [a, b])
        return total


# -- proper time ---------------------------------------------------------------


def test_dtau2_matches_redshift_formula(sr, k_sr):
    c, sp = sr
    T1, T = 0.25, 0.5
    up, lo = propagate_reference(build_redshift_geometry(T1, T, k_sr), sp, c)
    d = segment_dtaus(up, lo, c)
    expected = 2 * c.g * c.hbar * k_sr * T1 * T / (sp.m * c.c**2)
    assert d[1].dtau == pytest.approx(expected, rel=1e-12)
    assert abs(math.fsum(s.dtau for s in d)) <= 1e-12 * abs(expected)


@given(
    st.floats(0.01, 1.0), st.floats(0.01, 2.0), st.floats(1e6, 1e9), st.floats(-3.0, 3.0)
)
def test_segment_dtaus_match_hand_derivation(T1, T, k, v0):
    c, sp = Constants(), Species()
    up, lo = propagate_reference(build_redshift_geometry(T1, T, k, v0=v0), sp, c)
    got = [s.dtau for s in segment_dtaus(up, lo, c)]
    want = hand_dtaus(T1, T, k, v0, sp.m, c)
    scale = max(abs(w) for w in want)
    for g_, w in zip(got, want):
        assert g_ == pytest.approx(w, abs=1e-11 * scale)


@pytest.mark.parametrize("v0,z0", [(0.0, 0.0), (1.5, -2.0)])
def test_segment_dtaus_match_high_precision_quadrature(v0, z0):
    c = Constants.scaled()
    sp = Species.with_mass_defect(1.0, 1e-4, c)
    seq = build_redshift_geometry(0.7, 1.3, 2.0, z0=z0, v0=v0)
    up, lo = propagate_reference(seq, sp, c)
    edges = seq.times
    for s, a, b in zip(segment_dtaus(up, lo, c), edges, edges[1:]):
        oracle = mp_branch_tau(seq, "upper", sp.m, c, a, b) - mp_branch_tau(seq, "lower", sp.m, c, a, b)
        assert s.dtau == pytest.approx(float(oracle), rel=1e-12)


def test_segment_dtaus_physical_quadrature(sr, k_sr):
    c, sp = sr
    seq = build_redshift_geometry(0.25, 0.5, k_sr)
    up, lo = propagate_reference(seq, sp, c)
    d = segment_dtaus(up, lo, c)
    oracle = mp_branch_tau(seq, "upper", sp.m, c, 0.25, 0.75) - mp_branch_tau(seq, "lower", sp.m, c, 0.25, 0.75)
    assert d[1].dtau == pytest.approx(float(oracle), rel=1e-10)


def test_proper_time_closed_vs_simpson(scaled):
    c, sp = scaled
    seq = build_redshift_geometry(0.7, 1.3, 2.0, v0=0.4)
    up, _ = propagate_reference(seq, sp, c)
    closed = proper_time(up, 0.0, seq.t_end, c) - seq.t_end
    quad = proper_time(up, 0.0, seq.t_end, c, method="quadrature", nodes=2000) - seq.t_end
    assert closed == pytest.approx(quad, rel=1e-10)


def test_proper_time_rejects_bad_interval(scaled):
    c, sp = scaled
    up, _ = propagate_reference(build_redshift_geometry(1.0, 1.0, 1.0), sp, c)
    with pytest.raises(ValueError):
        proper_time(up, 1.0, 0.5, c)
    with pytest.raises(ValueError):
        proper_time(up, 0.0, 10.0, c)
    with pytest.raises(ValueError):
        proper_time(up, 0.0, 1.0, c, method="trapezoid")


# -- clock and reference phase -------------------------------------------------


def test_clock_phase_strontium(sr, k_sr):
    c, sp = sr
    b = total_phase_perturbative(build_redshift_geometry(0.25, 0.5, k_sr), sp, c)
    # hand value: Omega * 2 g hbar k T1 T / (m c^2)
    assert b.clock_phase == pytest.approx(6.5709e-3, rel=1e-4)
    assert 3e-3 <= b.clock_phase <= 20e-3
    assert b.total == b.ref_phase + b.clock_phase


def test_reference_phase_strontium(sr, k_sr):
    c, sp = sr
    b = total_phase_perturbative(build_redshift_geometry(0.25, 0.5, k_sr), sp, c)
    assert b.ref_phase == pytest.approx(-4.5489e8, rel=1e-4)
    b6 = total_phase_perturbative(build_redshift_geometry(0.25, 0.6, k_sr), sp, c)
    assert abs(b6.ref_phase) > 5e8


@given(st.floats(0.01, 1.0), st.floats(0.01, 2.0), st.floats(1e6, 1e9), st.floats(-3, 3))
def test_reference_phase_closed_form(T1, T, k, v0):
    c, sp = Constants(), Species()
    seq = build_redshift_geometry(T1, T, k, v0=v0)
    up, lo = propagate_reference(seq, sp, c)
    assert reference_phase(seq, up, lo, sp, c) == pytest.approx(-2 * k * c.g * T1 * (T + T1), rel=1e-12)


def test_inverted_run_flips_clock_only(sr, k_sr):
    c, sp = sr
    n = total_phase_perturbative(build_redshift_geometry(0.25, 0.5, k_sr), sp, c)
    i = total_phase_perturbative(build_redshift_geometry(0.25, 0.5, k_sr, inverted=True), sp, c)
    assert i.ref_phase == n.ref_phase
    assert i.clock_phase == pytest.approx(-n.clock_phase, rel=1e-14)


def test_no_state_flip_means_no_clock_phase(sr, k_sr):
    c, sp = sr
    std = build_redshift_geometry(0.25, 0.5, k_sr)
    pulses = tuple(LaserPulse(p.t, p.k_upper, p.k_lower, State.EXCITED) for p in std.pulses)
    b = total_phase_perturbative(PulseSequence(pulses, lambda0=State.GROUND), sp, c)
    assert abs(b.clock_phase) < 1e-12 * 6.57e-3


def test_laser_phase_offsets_add(sr, k_sr):
    c, sp = sr
    std = build_redshift_geometry(0.25, 0.5, k_sr)
    pulses = list(std.pulses)
    p = pulses[2]
    pulses[2] = LaserPulse(p.t, p.k_upper, p.k_lower, p.lambda_after, phi_upper=0.3, phi_lower=0.1)
    b0 = total_phase_perturbative(std, sp, c)
    b1 = total_phase_perturbative(PulseSequence(tuple(pulses), lambda0=std.lambda0), sp, c)
    assert b1.ref_phase - b0.ref_phase == pytest.approx(0.2, abs=1e-7)


def test_open_interferometer_rejected(sr):
    c, sp = sr
    seq = PulseSequence(
        (LaserPulse(0.0, 1e7, -1e7, State.EXCITED), LaserPulse(0.5, -1e7, 1e7, State.GROUND)),
        t_end=1.0,
    )
    up, lo = propagate_reference(seq, sp, c)
    with pytest.raises(OpenInterferometerError):
        reference_phase(seq, up, lo, sp, c)
    with pytest.raises(OpenInterferometerError):
        total_phase_perturbative(seq, sp, c)


# -- direct oracle -------------------------------------------------------------


def test_direct_oracle_second_order_agreement():
    c = Constants.scaled()
    seq = build_redshift_geometry(1.0, 2.0, 1.0)
    rows, slope = direct_oracle_scaling(seq, 1.0, [1e-3, 5e-4, 2.5e-4, 1.25e-4], c)
    assert slope == pytest.approx(2.0, abs=0.1)
    for r in rows:
        assert abs(r["residual"]) < 1e-2 * abs(r["clock_phase"])


def test_direct_oracle_without_mass_defect_is_reference_phase():
    c = Constants.scaled()
    seq = build_redshift_geometry(1.0, 2.0, 1.0)
    sp = Species(m=1.0, Omega=0.0)
    direct = total_phase_direct(seq, sp, c)
    ref = -2 * 1.0 * c.g * 1.0 * 3.0
    assert direct == pytest.approx(ref, rel=4 * 2.0**-52)


def test_direct_oracle_handles_open_geometry():
    c = Constants.scaled()
    seq = PulseSequence(
        (LaserPulse(0.0, 1.0, -1.0, State.EXCITED), LaserPulse(1.0, -1.0, 1.0, State.GROUND)),
        t_end=1.0,
    )
    value = total_phase_direct(seq, Species.with_mass_defect(1.0, 1e-4, c), c)
    assert math.isfinite(value)
