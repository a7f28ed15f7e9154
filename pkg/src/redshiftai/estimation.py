"""Violation model, (alpha, dbeta) extraction, noise budget and Monte Carlo campaigns."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .kinematics import is_closed, propagate_reference
from .model import (
    SR88_WAVENUMBER,
    Constants,
    InvalidParameterError,
    PulseSequence,
    Species,
    State,
    build_redshift_geometry,
)
from .phase import OpenInterferometerError, PhaseBreakdown, breakdown_from_trajectories

BETA_LIMIT = 1e-2
NOISE_CHUNK = 1024


@dataclass(frozen=True)
class ViolationParams:
    """State-dependent coupling to gravity, ``g -> (1 + beta_lam) g``."""

    beta_plus: float = 0.0
    beta_minus: float = 0.0

    def __post_init__(self):
        for name in ("beta_plus", "beta_minus"):
            b = getattr(self, name)
            if not (math.isfinite(b) and abs(b) < BETA_LIMIT):
                raise InvalidParameterError(f"|{name}| must be below {BETA_LIMIT}, got {b}")

    @property
    def dbeta(self) -> float:
        return self.beta_plus - self.beta_minus

    def alpha(self, species: Species, constants: Constants) -> float:
        """Redshift violation implied by the dilaton relation ``dm * alpha = m * dbeta``."""
        return species.m * self.dbeta / species.dm(constants)

    def beta(self, state) -> float:
        return self.beta_plus if int(state) == State.EXCITED else self.beta_minus

    def excess_accel(self, constants: Constants):
        """State -> extra downward acceleration ``beta_lam * g``."""
        plus, minus = self.beta_plus * constants.g, self.beta_minus * constants.g
        return lambda lam: plus if int(lam) == State.EXCITED else minus


@dataclass(frozen=True)
class NoiseModel:
    """Per-cycle noise sources of the alternating four-run measurement.

    ``vibration_accel`` is the acceleration-noise equivalent of one run.
    ``interleaved`` selects shared-pulse operation, where consecutive runs of
    the same configuration see telescoping vibration phases; ``leakage`` is the
    fraction of vibration amplitude that stays uncorrelated.
    """

    atom_flux: float = 1e5
    cycle_time: float = 4.0
    vibration_accel: float = 5e-10
    interleaved: bool = True
    leakage: float = 0.0
    shot_noise: bool = True

    def __post_init__(self):
        if not self.atom_flux > 0:
            raise InvalidParameterError("atom_flux must be positive")
        if not self.cycle_time > 0:
            raise InvalidParameterError("cycle_time must be positive")
        if not self.vibration_accel >= 0:
            raise InvalidParameterError("vibration_accel must be non-negative")
        if not 0.0 <= self.leakage <= 1.0:
            raise InvalidParameterError("leakage must lie in [0, 1]")


@dataclass(frozen=True)
class CampaignPlan:
    """Geometry alternated within one cycle: normal and inverted runs at each ``T``."""

    T1: float = 0.25
    k: float = SR88_WAVENUMBER
    T_values: tuple[float, ...] = (0.4, 0.6)

    def __post_init__(self):
        object.__setattr__(self, "T_values", tuple(float(t) for t in self.T_values))
        if not (self.T1 > 0 and self.k > 0) or any(t <= 0 for t in self.T_values):
            raise InvalidParameterError("T1, k and every T must be positive")
        if len(set(self.T_values)) < 2:
            raise InvalidParameterError("at least two distinct T values are needed")

    @property
    def runs_per_cycle(self) -> int:
        return 2 * len(self.T_values)


@dataclass(frozen=True)
class CycleRecord:
    index: int
    inverted: bool
    T: float
    phase: float
    shot: float
    vibration: float


@dataclass(frozen=True)
class Extraction:
    alpha: float
    dbeta: float
    condition_number: float
    residuals: tuple[float, ...] = ()

    @property
    def rms_residual(self) -> float:
        if not self.residuals:
            return 0.0
        return float(np.sqrt(np.mean(np.square(self.residuals))))


# -- violation model -----------------------------------------------------------


def violated_phase(
    seq: PulseSequence, species: Species, constants: Constants, v: ViolationParams
) -> PhaseBreakdown:
    """Phase with gravity rescaled by ``1 + beta`` of the instantaneous internal state.

    Trajectories and proper times are both recomputed; the linear violation
    formulas are test targets, not the implementation.
    """
    upper, lower = propagate_reference(seq, species, constants, v.excess_accel(constants))
    if not is_closed(upper, lower):
        raise OpenInterferometerError("interferometer is open under the reference Hamiltonian")
    return breakdown_from_trajectories(seq, upper, lower, species, constants)


def differential_signal(run_normal: PhaseBreakdown, run_inverted: PhaseBreakdown) -> float:
    """Difference of a normal and a state-inverted run of the same geometry."""
    if run_normal.geometry != run_inverted.geometry:
        raise InvalidParameterError("runs do not share pulse times and kicks")
    sn, si = run_normal.ref_split, run_inverted.ref_split
    if sn is not None and si is not None and sn[0] == si[0]:
        dref = sn[1] - si[1]
    else:
        dref = run_normal.ref_phase - run_inverted.ref_phase
    return dref + (
        run_normal.clock_phase - run_inverted.clock_phase
    )


def redshift_coefficient(T1: float, k: float, species: Species, constants: Constants) -> float:
    """``2 Omega dtau_2 / T``: slope in ``T`` of the redshift part of the differential signal."""
    c, hbar, g = constants.c, constants.hbar, constants.g
    return 2.0 * species.Omega * 2.0 * g * hbar * k * T1 / (species.m * c * c)


def uff_coefficient(T1: float, k: float, constants: Constants) -> float:
    return 2.0 * k * constants.g * T1


def linear_differential_signal(
    T: float, T1: float, k: float, alpha: float, dbeta: float, species: Species, constants: Constants
) -> float:
    """Leading-order differential signal with ``alpha`` and ``dbeta`` treated as independent."""
    c1 = redshift_coefficient(T1, k, species, constants)
    c2 = uff_coefficient(T1, k, constants)
    return c1 * T * (1.0 + alpha) - c2 * (T + T1) * dbeta


def _design(T, T1, k, species, constants) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    c1 = redshift_coefficient(T1, k, species, constants)
    c2 = uff_coefficient(T1, k, constants)
    return np.column_stack([c1 * T, -c2 * (T + T1)])


def _solve(T, dphi, T1, k, species, constants) -> Extraction:
    T = np.asarray(T, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    if np.unique(T).size < 2:
        raise InvalidParameterError("need at least two distinct T values; the system is singular")
    A = _design(T, T1, k, species, constants)
    # unknowns are alpha and dbeta; the (1) of (1 + alpha) moves to the data side
    y = dphi - A[:, 0]
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    sol, *_ = np.linalg.lstsq(As, y, rcond=None)
    alpha, dbeta = sol / scale
    cond = float(np.linalg.cond(As))
    residuals = tuple(y - A @ np.array([alpha, dbeta])) if T.size > 2 else ()
    return Extraction(float(alpha), float(dbeta), cond, residuals)


def extract_alpha_dbeta(
    signals, T1: float, k: float, species: Species, constants: Constants
) -> Extraction:
    """Least-squares ``(alpha, dbeta)`` from ``(T, dphi)`` pairs of differential signals."""
    signals = list(signals)
    if len(signals) < 2:
        raise InvalidParameterError("need at least two signals")
    T, dphi = zip(*signals)
    return _solve(T, dphi, T1, k, species, constants)


# -- noise budget --------------------------------------------------------------


def shot_noise(n_atoms: float) -> float:
    if not n_atoms >= 1:
        raise InvalidParameterError(f"need at least one atom, got {n_atoms}")
    return 1.0 / math.sqrt(n_atoms)


def vibration_phase_noise(noise: NoiseModel, T1: float, T: float, k: float) -> float:
    """Per-run phase noise ``2 k da T1 (T + T1)``, the same transfer as gravity itself."""
    return 2.0 * k * noise.vibration_accel * T1 * (T + T1)


def _per_cycle_variances(noise: NoiseModel, plan: CampaignPlan) -> tuple[np.ndarray, np.ndarray]:
    """Variance of each differential signal from shot and vibration noise, one cycle."""
    n_run = noise.atom_flux * noise.cycle_time / plan.runs_per_cycle
    shot = 2.0 * shot_noise(n_run) ** 2 if noise.shot_noise else 0.0
    vib = [2.0 * vibration_phase_noise(noise, plan.T1, T, plan.k) ** 2 for T in plan.T_values]
    return np.full(len(plan.T_values), shot), np.array(vib)


def sensitivity_budget(
    noise: NoiseModel,
    plan: CampaignPlan,
    t_avg: float,
    species: Species,
    constants: Constants,
) -> tuple[float, float]:
    """1-sigma uncertainties of ``(alpha, dbeta)`` after averaging for ``t_avg``.

    Shot noise averages as ``1/sqrt(t_avg)``; the correlated part of the
    vibration noise averages as ``1/t_avg`` in interleaved operation.
    """
    if t_avg < noise.cycle_time:
        raise InvalidParameterError(
            f"t_avg={t_avg} s is shorter than one measurement cycle ({noise.cycle_time} s)"
        )
    n = t_avg / noise.cycle_time
    shot, vib = _per_cycle_variances(noise, plan)
    if noise.interleaved:
        vib_scale = (1.0 - noise.leakage**2) / n**2 + noise.leakage**2 / n
    else:
        vib_scale = 1.0 / n
    var = shot / n + vib * vib_scale
    pinv = np.linalg.pinv(_design(plan.T_values, plan.T1, plan.k, species, constants))
    cov = pinv @ np.diag(var) @ pinv.T
    return float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1]))


# -- Monte Carlo ---------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloResult:
    alpha: float
    dbeta: float
    sigma_alpha: float
    sigma_dbeta: float
    n_cycles: int
    extraction: Extraction
    configs: tuple[tuple[float, bool], ...]
    phases: np.ndarray = field(repr=False)
    shot: np.ndarray = field(repr=False)
    vibration: np.ndarray = field(repr=False)

    def records(self) -> list[CycleRecord]:
        out = []
        for i in range(self.n_cycles):
            for j, (T, inverted) in enumerate(self.configs):
                out.append(
                    CycleRecord(
                        i,
                        inverted,
                        T,
                        float(self.phases[i, j]),
                        float(self.shot[i, j]),
                        float(self.vibration[i, j]),
                    )
                )
        return out


@lru_cache(maxsize=256)
def _model_run(T1, T, k, inverted, species, constants, v) -> PhaseBreakdown:
    seq = build_redshift_geometry(T1, T, k, inverted)
    return violated_phase(seq, species, constants, v)


def _standard_normals(seed: int, n_rows: int, width: int) -> np.ndarray:
    """Rows of N(0, 1) draws; row ``i`` depends only on ``seed`` and ``i // NOISE_CHUNK``."""
    chunks = []
    for c in range(-(-n_rows // NOISE_CHUNK)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        chunks.append(rng.standard_normal((NOISE_CHUNK, width)))
    return np.concatenate(chunks)[:n_rows]


def _variance_of_mean(x: np.ndarray, interleaved: bool) -> float:
    """Empirical variance of ``mean(x)``.

    Interleaved noise makes consecutive per-cycle estimates an MA(1) sequence,
    for which ``var(mean) = [g0 + 2 g1 (1 - 1/n)] / n`` exactly, with ``g0`` and
    ``g1`` the lag-0 and lag-1 autocovariances. Without interleaving the cycles
    are independent and ``g1`` is dropped.
    """
    n = x.size
    d = x - x.mean()
    g0 = float(d @ d) / (n - 1)
    if not interleaved or n < 3:
        return g0 / n
    g1 = float(d[1:] @ d[:-1]) / (n - 1)
    var = (g0 + 2.0 * g1 * (1.0 - 1.0 / n)) / n
    # sampling noise can push the white part below zero; keep the telescoping floor
    return max(var, -2.0 * g1 / n**2, 0.0)


def monte_carlo_campaign(
    noise: NoiseModel,
    plan: CampaignPlan,
    v: ViolationParams,
    t_avg: float,
    seed: int,
    species: Species,
    constants: Constants,
) -> MonteCarloResult:
    """Simulate ``t_avg`` seconds of alternating normal/inverted runs and fit ``(alpha, dbeta)``.

    Each cycle holds one normal and one inverted run per ``T``. Noise draws are
    indexed by cycle and generated in fixed-size chunks from
    ``SeedSequence(seed, spawn_key=(chunk,))``, so a longer campaign extends a
    shorter one with the same seed. Reported uncertainties come from the
    per-cycle estimates through :func:`_variance_of_mean`.
    """
    n = int(math.floor(t_avg / noise.cycle_time + 1e-9))
    if n < 2:
        raise InvalidParameterError(f"t_avg={t_avg} s gives {n} cycle(s); at least 2 are needed")
    configs = tuple((T, inv) for T in plan.T_values for inv in (False, True))
    runs = [_model_run(plan.T1, T, plan.k, inv, species, constants, v) for T, inv in configs]
    r = len(configs)

    draws = _standard_normals(seed, n + 1, 3 * r)
    shot_draw, white, shared = draws[:n, :r], draws[:n, r : 2 * r], draws[:, 2 * r :]

    sigma_shot = (
        shot_noise(noise.atom_flux * noise.cycle_time / r) if noise.shot_noise else 0.0
    )
    shot = sigma_shot * shot_draw
    transfer = np.array([vibration_phase_noise(noise, plan.T1, T, plan.k) for T, _ in configs])
    if noise.interleaved:
        eps = noise.leakage
        unit = math.sqrt(1.0 - eps * eps) * (shared[1:] - shared[:-1]) / math.sqrt(2.0) + eps * white
    else:
        unit = white
    vibration = transfer * unit
    total_noise = shot + vibration

    ref = np.array([b.ref_phase for b in runs])
    clock = np.array([b.clock_phase for b in runs])
    phases = (ref + clock) + total_noise

    n_T = len(plan.T_values)
    dphi = np.empty((n, n_T))
    for j in range(n_T):
        a, b = 2 * j, 2 * j + 1
        signal = differential_signal(runs[a], runs[b])
        dphi[:, j] = signal + (total_noise[:, a] - total_noise[:, b])

    T_arr = np.tile(np.array(plan.T_values), n)
    fit = _solve(T_arr, dphi.ravel(), plan.T1, plan.k, species, constants)

    A = _design(plan.T_values, plan.T1, plan.k, species, constants)
    per_cycle = (dphi - A[:, 0]) @ np.linalg.pinv(A).T
    sig = np.sqrt([_variance_of_mean(per_cycle[:, j], noise.interleaved) for j in range(2)])
    return MonteCarloResult(
        alpha=fit.alpha,
        dbeta=fit.dbeta,
        sigma_alpha=float(sig[0]),
        sigma_dbeta=float(sig[1]),
        n_cycles=n,
        extraction=fit,
        configs=configs,
        phases=phases,
        shot=shot,
        vibration=vibration,
    )
