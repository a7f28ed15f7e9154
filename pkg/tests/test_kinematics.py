import pytest
from hypothesis import given
from hypothesis import strategies as st

from redshiftai.kinematics import (
    branch_separation,
    closure_defect,
    is_closed,
    propagate_full_mass,
    propagate_reference,
)
from redshiftai.model import (
    Constants,
    InvalidParameterError,
    LaserPulse,
    PulseSequence,
    Species,
    State,
    build_redshift_geometry,
)


def naive_path(seq, branch, m, hbar, g, t):
    """Absolute position by stepping through the pulses; independent of the deviation form."""
    z, v, t0 = seq.z0, seq.v0, 0.0
    for p in seq.pulses:
        if p.t > t:
            break
        z, v = z + v * (p.t - t0) - 0.5 * g * (p.t - t0) ** 2, v - g * (p.t - t0)
        v += hbar * p.k(branch) / m
        t0 = p.t
    return z + v * (t - t0) - 0.5 * g * (t - t0) ** 2


geometry = st.tuples(
    st.floats(0.01, 1.0),  # T1
    st.floats(0.01, 2.0),  # T
    st.floats(1e6, 1e9),  # k
    st.floats(-5.0, 5.0),  # v0
    st.floats(-10.0, 10.0),  # z0
)


@given(geometry)
def test_standard_geometry_closes(params):
    T1, T, k, v0, z0 = params
    c, sp = Constants(), Species()
    up, lo = propagate_reference(build_redshift_geometry(T1, T, k, z0=z0, v0=v0), sp, c)
    dz, dv = closure_defect(up, lo)
    sep = 2 * c.hbar * k * T1 / sp.m
    assert abs(dz) <= 1e-12 * sep
    assert abs(dv) <= 1e-12 * c.hbar * k / sp.m
    assert is_closed(up, lo)


@given(geometry)
def test_central_separation(params):
    T1, T, k, v0, z0 = params
    c, sp = Constants(), Species()
    up, lo = propagate_reference(build_redshift_geometry(T1, T, k, z0=z0, v0=v0), sp, c)
    expected = 2 * c.hbar * k * T1 / sp.m
    for t in (T1, T1 + 0.5 * T, T1 + T):
        assert branch_separation(up, lo, t) == pytest.approx(expected, rel=1e-12)


@given(geometry, st.floats(0.0, 1.0))
def test_positions_match_naive_stepping(params, frac):
    T1, T, k, v0, z0 = params
    c, sp = Constants(), Species()
    seq = build_redshift_geometry(T1, T, k, z0=z0, v0=v0)
    t = frac * seq.t_end
    for tr in propagate_reference(seq, sp, c):
        expected = naive_path(seq, tr.branch, sp.m, c.hbar, c.g, t)
        assert tr.position(t) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_kicks_change_velocity_by_recoil(sr):
    c, sp = sr
    seq = build_redshift_geometry(0.25, 0.5, 1e8)
    up, lo = propagate_reference(seq, sp, c)
    vr = c.hbar * 1e8 / sp.m
    assert up.velocity(0.0) == pytest.approx(vr, rel=1e-14)
    assert lo.velocity(0.0) == pytest.approx(-vr, rel=1e-14)
    assert up.velocity_before(0.25) - up.velocity(0.25) == pytest.approx(vr, rel=1e-12)


def test_violation_keeps_closure(sr):
    c, sp = sr
    excess = lambda lam: (1e-3 if lam == State.EXCITED else -2e-3) * c.g  # noqa: E731
    up, lo = propagate_reference(build_redshift_geometry(0.25, 0.5, 1e8), sp, c, excess)
    assert closure_defect(up, lo) == (0.0, 0.0)
    assert up.segments[0].g == pytest.approx(c.g * 1.001, rel=1e-15)


def test_open_sequence_detected(sr):
    c, sp = sr
    seq = PulseSequence(
        (LaserPulse(0.0, 1e7, -1e7, State.EXCITED), LaserPulse(0.5, -1e7, 1e7, State.GROUND)),
        t_end=1.0,
    )
    up, lo = propagate_reference(seq, sp, c)
    assert not is_closed(up, lo)
    dz, dv = closure_defect(up, lo)
    assert dz == pytest.approx(2 * c.hbar * 1e7 / sp.m * 0.5, rel=1e-12)


@given(st.floats(1e-8, 1e-3), st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_full_mass_conserves_momentum(dm, T1, T):
    c = Constants.scaled()
    sp = Species.with_mass_defect(1.0, dm, c)
    seq = build_redshift_geometry(T1, T, 1.0)
    for tr in propagate_full_mass(seq, sp, c):
        for i, p in enumerate(seq.pulses):
            m_before = sp.mass(seq.lambda0, c) if i == 0 else tr.mass_before(p.t)
            p_before = m_before * tr.velocity_before(p.t)
            p_after = tr.segment_at(p.t).mass * tr.velocity(p.t)
            assert p_after - p_before == pytest.approx(c.hbar * p.k(tr.branch), rel=1e-9, abs=1e-12)


def test_full_mass_opens_at_first_order(scaled):
    c, sp = scaled
    up, lo = propagate_full_mass(build_redshift_geometry(1.0, 2.0, 1.0), sp, c)
    dz, _ = closure_defect(up, lo)
    assert dz != 0.0
    assert abs(dz) < 10 * sp.dm(c)


def test_outside_span_rejected(sr):
    c, sp = sr
    up, _ = propagate_reference(build_redshift_geometry(0.25, 0.5, 1e8), sp, c)
    with pytest.raises(InvalidParameterError):
        up.position(2.0)
