"""
Two-site DMFT self-consistency.

Each iteration re-solves the Cartan parameters for the current hybridization,
measures omega2 on a high-rate series and omega1 on a low-rate series, computes
the quasiparticle weight and updates V <- sqrt(Z).
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import (DEFAULT_ETA, DEFAULT_MAX_ITER, DEFAULT_MAX_RERUNS, DEFAULT_RATE_MULTIPLIER,
               DEFAULT_SETTLE_STEPS, DEFAULT_SOLUTIONS, DEFAULT_TIME_POINTS, DEFAULT_TOLERANCE,
               DEFAULT_V0, RATE_BAND)
from .cartan import CartanSolution, derive_seed, solve_randomized
from .circuit import optimize_ansatz_angle
from .lehmann import closed_form_poles
from .lie import CartanDecomposition, decompose
from .pauli import AimParameters, jw_aim_hamiltonian
from .sim import NoiseModel
from .spectral import (HIGH, LOW, OMEGA1_MASK, OMEGA1_WINDOW, OMEGA2_WINDOW, PADDING, GreensSeries,
                       PeakPair, RatePlan, Spectrum, dft_spectrum, extract_omega1, extract_omega2, measure_series,
                       plan_rates, relative_amplitude, time_grid)
from .validation import InputValidator

logger = logging.getLogger(__name__)

TOLERANCE = 'tolerance'
MAX_ITER = 'max_iter'
OMEGA1_NOT_FOUND = 'omega1_not_found'

# Critical interaction of the two-site Mott transition
U_CRITICAL = 6.0

# Sum-rule tolerance for the fitted amplitudes
AMPLITUDE_TOLERANCE = 1e-6


class InvalidGeometry(Exception):
    """Raised when measured frequencies admit no physical pole structure."""
    pass


def quasiparticle_weight(omega1: float, omega2: float, V: float) -> float:
    """Z = omega1^2 omega2^2 / (V^2 (omega1^2 + omega2^2 - V^2)), independent of the amplitudes.

    Raises:
        InvalidGeometry: when V = 0 or the denominator is not positive
    """
    if V == 0:
        raise InvalidGeometry("Quasiparticle weight needs V != 0")
    denom = V * V * (omega1 ** 2 + omega2 ** 2 - V * V)
    if denom <= 0:
        raise InvalidGeometry(f"omega1={omega1}, omega2={omega2} inconsistent with V={V}")
    return (omega1 * omega2) ** 2 / denom


def amplitudes(omega1: float, omega2: float, V: float) -> Tuple[float, float]:
    """(alpha1, alpha2) from the sum rule and the regularity of the self-energy at omega = 0."""
    if omega1 == omega2:
        raise ValueError("Amplitudes are undefined for degenerate poles omega1 == omega2")
    if V == 0:
        raise ValueError("Amplitudes need V != 0")
    alpha2 = ((omega1 / V) ** 2 - 1.0) / (2.0 * ((omega1 / omega2) ** 2 - 1.0))
    return 0.5 - alpha2, alpha2


@dataclass(frozen=True)
class SelfEnergyModel:
    omega1: float
    omega2: float
    V: float
    alpha1: float
    alpha2: float

    def __post_init__(self):
        if abs(2.0 * (self.alpha1 + self.alpha2) - 1.0) > AMPLITUDE_TOLERANCE:
            raise ValueError(f"Sum rule violated: 2*alpha1 + 2*alpha2 = {2 * (self.alpha1 + self.alpha2)}")

    @classmethod
    def from_poles(cls, omega1: float, omega2: float, V: float) -> 'SelfEnergyModel':
        if omega1 == omega2:
            return cls(omega1, omega2, V, 0.5, 0.0)
        return cls(omega1, omega2, V, *amplitudes(omega1, omega2, V))

    @property
    def is_physical(self) -> bool:
        return min(self.alpha1, self.alpha2) >= -AMPLITUDE_TOLERANCE

    def greens(self, z: np.ndarray) -> np.ndarray:
        """Four-pole G(z) of the two-site impurity."""
        z = np.asarray(z, dtype=complex)
        return (self.alpha1 * (1.0 / (z - self.omega1) + 1.0 / (z + self.omega1))
                + self.alpha2 * (1.0 / (z - self.omega2) + 1.0 / (z + self.omega2)))

    def bare_greens(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return 0.5 / (z - self.V) + 0.5 / (z + self.V)


def self_energy(model: SelfEnergyModel, omega, regularized: bool = True):
    """Sigma(omega) of the two-site model.

    The regularized form enforces omega * Sigma(omega) -> 0 so the slope at
    omega = 0 is finite; the unregularized form is Dyson's 1/G0 - 1/G.
    """
    omega = np.asarray(omega, dtype=complex)
    if not regularized:
        return 1.0 / model.bare_greens(omega) - 1.0 / model.greens(omega)
    v2 = model.V ** 2
    s = model.omega1 ** 2 + model.omega2 ** 2
    weight = model.alpha1 + model.alpha2
    numer = omega * v2 * (omega ** 2 + 2.0 * v2 * weight - s)
    denom = 2.0 * omega ** 2 * v2 * weight - (model.omega1 * model.omega2) ** 2
    return omega - numer / denom


def spectral_function(model: SelfEnergyModel, eta: float = DEFAULT_ETA,
                      omega: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Local density of states A(omega) = -Im G(omega + i eta) / pi.

    Returns:
        (omega grid, A); the default grid spans [-30, 30]
    """
    InputValidator.validate_float(eta, 'eta', min_val=0.0, allow_min=False)
    if omega is None:
        omega = np.linspace(-30.0, 30.0, 12001)
    omega = np.asarray(omega, dtype=float)
    return omega, -np.imag(model.greens(omega + 1j * eta)) / math.pi


def exact_quasiparticle_weight(U: float) -> float:
    """Self-consistent two-site weight 1 - (U/6)^2 below the transition, 0 above."""
    return 1.0 - (U / U_CRITICAL) ** 2 if U < U_CRITICAL else 0.0


@dataclass(frozen=True)
class MeasurementConfig:
    n_points: int = DEFAULT_TIME_POINTS
    shots: Optional[int] = None
    noise: Optional[NoiseModel] = None
    n_solutions: int = DEFAULT_SOLUTIONS
    seed: int = 0
    rate_multiplier: float = DEFAULT_RATE_MULTIPLIER
    max_attempts: int = DEFAULT_MAX_RERUNS
    padding: int = PADDING

    def __post_init__(self):
        InputValidator.validate_integer(self.n_points, min_val=8)
        InputValidator.validate_shots(self.shots)
        InputValidator.validate_integer(self.n_solutions, min_val=1)
        InputValidator.validate_seed(self.seed)
        InputValidator.validate_rate_multiplier(self.rate_multiplier, RATE_BAND)
        InputValidator.validate_integer(self.max_attempts, min_val=1)
        InputValidator.validate_integer(self.padding, min_val=1)

    @property
    def exact(self) -> bool:
        return self.shots is None


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    V: float
    omega1: float
    omega2: float
    Z: float
    V_new: float
    found1: bool = True
    z_clamped: bool = False


@dataclass
class DmftState:
    U: float
    V: float
    history: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    terminated_reason: Optional[str] = None

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def v_sequence(self) -> List[float]:
        """Hybridizations in order; a step without omega1 contributes no V_new."""
        if not self.history:
            return [self.V]
        vs = [r.V for r in self.history]
        if math.isfinite(self.history[-1].V_new):
            vs.append(self.history[-1].V_new)
        return vs

    @property
    def z_final(self) -> float:
        """Square of the mean of the last two hybridizations.

        A loop that lost omega1 reports 0: the quasiparticle peak has vanished.
        """
        if self.terminated_reason == OMEGA1_NOT_FOUND:
            return 0.0
        vs = self.v_sequence
        return ((vs[-1] + vs[-2]) / 2.0) ** 2 if len(vs) > 1 else vs[-1] ** 2

    def final_model(self) -> Optional[SelfEnergyModel]:
        if not self.history:
            return None
        last = self.history[-1]
        return SelfEnergyModel.from_poles(last.omega1, last.omega2, last.V)


def _predict(prev: PeakPair, V_old: float, V_new: float, U: float) -> PeakPair:
    """Carry measured frequencies to a new V by the ratio of the two-site closed-form poles."""
    old, new = closed_form_poles(U, V_old), closed_form_poles(U, V_new)
    omega1 = prev.omega1 * new.omega1 / old.omega1 if prev.found1 else 0.0
    return PeakPair(omega1, prev.omega2 * new.omega2 / old.omega2, prev.found1, prev.amp1_rel, prev.amp2_rel)


def initial_estimate(U: float, V: float) -> PeakPair:
    poles = closed_form_poles(U, V)
    amp1, amp2 = poles.amplitudes
    return PeakPair(poles.omega1, poles.omega2, True, amp1, amp2)


@dataclass(frozen=True)
class Measurement:
    peaks: PeakPair
    plan: RatePlan
    series: Dict[str, GreensSeries]
    spectra: Dict[str, Spectrum]
    solutions: List[CartanSolution]
    theta_gs: float


def rerun_until_omega1(measure_round: Callable[[int], Measurement], rounds: int) -> Measurement:
    """Repeat a whole measurement round until omega1 is found or ``rounds`` are spent.

    ``measure_round(index)`` must draw fresh seeds for every index > 0.
    """
    measurement = measure_round(0)
    for index in range(1, rounds):
        if measurement.peaks.found1:
            break
        logger.warning(f"omega1 missing after round {index}; remeasuring both rates")
        measurement = measure_round(index)
    return measurement


def measure_peaks(U: float, V: float, decomposition: CartanDecomposition, config: MeasurementConfig,
                  expected: PeakPair, seed: int) -> Measurement:
    """Green's-function measurement: omega2 from the high rate, then omega1 from the low rate.

    Sampled runs that lose omega1 repeat the whole round, both rates and the
    Cartan solves, with fresh seeds up to ``config.max_attempts`` times.

    Raises:
        PeakNotFound: when omega2 cannot be detected
    """
    rounds = 1 if config.exact else config.max_attempts
    return rerun_until_omega1(
        lambda index: _measure_round(U, V, decomposition, config, expected,
                                     seed if index == 0 else derive_seed(seed, 3, index)),
        rounds)


def _measure_round(U: float, V: float, decomposition: CartanDecomposition, config: MeasurementConfig,
                   expected: PeakPair, seed: int) -> Measurement:
    hamiltonian = jw_aim_hamiltonian(AimParameters.half_filled(U, V))
    solutions = solve_randomized(hamiltonian, decomposition, config.n_solutions, derive_seed(seed, 0))
    theta = optimize_ansatz_angle(U, V)
    plan = plan_rates(expected, config.rate_multiplier, RATE_BAND, config.n_points)
    rerun = not config.exact
    series: Dict[str, GreensSeries] = {}

    def measure(dt: float, tag: str, stream: int):
        t_grid = time_grid(dt, config.n_points)

        def spectrum_for(attempt: int) -> Spectrum:
            series[tag] = measure_series(solutions, t_grid, theta, config.shots, config.noise,
                                         derive_seed(seed, stream, attempt), tag)
            return dft_spectrum(series[tag], config.padding)
        return spectrum_for

    window2 = (OMEGA2_WINDOW[0] * expected.omega2, OMEGA2_WINDOW[1] * expected.omega2)
    mask1 = (OMEGA1_MASK[0] * expected.omega1, OMEGA1_MASK[1] * expected.omega1)
    omega2, spec_high = extract_omega2(measure(plan.dt_high, HIGH, 1), window2, mask1,
                                       config.max_attempts, rerun)

    target1 = expected.omega1 if expected.found1 and expected.omega1 > 0 else plan.omega_s_low / plan.multiplier_low
    window1 = (OMEGA1_WINDOW[0] * target1, OMEGA1_WINDOW[1] * target1)
    omega1, found1, spec_low = extract_omega1(measure(plan.dt_low, LOW, 2), window1, omega2,
                                              plan.omega_s_low, config.max_attempts, rerun)

    amp1 = relative_amplitude(spec_low, omega1) if found1 else 0.0
    amp2 = relative_amplitude(spec_high, omega2)
    return Measurement(PeakPair(omega1, omega2, found1, amp1, amp2), plan, series,
                       {HIGH: spec_high, LOW: spec_low}, solutions, theta)


def dmft_iterate(U: float, V0: float = DEFAULT_V0, tol: float = DEFAULT_TOLERANCE,
                 max_iter: int = DEFAULT_MAX_ITER, config: Optional[MeasurementConfig] = None,
                 settle_steps: int = DEFAULT_SETTLE_STEPS, mixing: float = 0.0,
                 decomposition: Optional[CartanDecomposition] = None) -> DmftState:
    """Run the V <- sqrt(Z) loop until ``settle_steps`` consecutive updates move V by at most ``tol``.

    Args:
        U: on-site interaction
        V0: initial hybridization
        tol: convergence tolerance on |dV|
        max_iter: iteration cap
        config: measurement settings; defaults to exact expectations
        settle_steps: consecutive small updates required
        mixing: linear mixing m in V_new = (1 - m) sqrt(Z) + m V
        decomposition: reuse an existing Cartan decomposition

    Returns:
        DmftState with the per-iteration history and termination reason

    Raises:
        PeakNotFound: when omega2 cannot be detected
        InvalidGeometry: when the measured frequencies are unphysical
    """
    U = InputValidator.validate_interaction(U)
    V0 = InputValidator.validate_hybridization(V0)
    tol = InputValidator.validate_float(tol, 'tol', min_val=0.0, allow_min=False)
    max_iter = InputValidator.validate_integer(max_iter, min_val=1)
    settle_steps = InputValidator.validate_integer(settle_steps, min_val=1)
    mixing = InputValidator.validate_float(mixing, 'mixing', min_val=0.0, max_val=1.0)
    if mixing == 1.0:
        raise ValueError("mixing must be below 1")
    config = config or MeasurementConfig()

    state = DmftState(U, V0)
    if U > 0 and decomposition is None:
        decomposition = decompose(jw_aim_hamiltonian(AimParameters.half_filled(U, V0)))
    expected = initial_estimate(U, V0) if U > 0 else None
    V = V0
    settled = 0

    for iteration in range(1, max_iter + 1):
        if U == 0:
            measured = PeakPair(V, V, True, 1.0, 0.0)
        else:
            measured = measure_peaks(U, V, decomposition, config, expected,
                                     derive_seed(config.seed, iteration)).peaks

        if not measured.found1:
            state.history.append(IterationRecord(iteration, V, 0.0, measured.omega2, 0.0, float('nan'),
                                                 found1=False))
            state.terminated_reason = OMEGA1_NOT_FOUND
            logger.warning(f"U={U}: omega1 not found at iteration {iteration}; terminating")
            return state

        Z = quasiparticle_weight(measured.omega1, measured.omega2, V)
        clamped = Z > 1.0
        if clamped:
            logger.warning(f"U={U} iteration {iteration}: Z={Z:.4f} > 1, clamped")
        V_new = (1.0 - mixing) * math.sqrt(min(Z, 1.0)) + mixing * V
        state.history.append(IterationRecord(iteration, V, measured.omega1, measured.omega2, Z, V_new,
                                             z_clamped=clamped))
        logger.info(f"U={U} iteration {iteration}: omega1={measured.omega1:.5f} "
                    f"omega2={measured.omega2:.5f} Z={Z:.5f} V {V:.5f} -> {V_new:.5f}")

        settled = settled + 1 if abs(V_new - V) <= tol else 0
        if U > 0 and V_new > 0:
            expected = _predict(measured, V, V_new, U)
        V = V_new
        state.V = V
        if settled >= settle_steps:
            state.converged = True
            state.terminated_reason = TOLERANCE
            logger.info(f"U={U}: converged after {iteration} iterations, Z_final={state.z_final:.5f}")
            return state
        if V <= 0:
            state.terminated_reason = OMEGA1_NOT_FOUND
            return state

    state.terminated_reason = MAX_ITER
    logger.warning(f"U={U}: no convergence within {max_iter} iterations")
    return state


@dataclass
class PhaseRow:
    U: float
    Z_final: float
    Z_exact: float
    iterations: int
    terminated_reason: str
    state: Optional[DmftState] = None
    error: Optional[str] = None


def _phase_point(args) -> PhaseRow:
    U, index, V0, tol, max_iter, config, settle_steps, mixing = args
    point_config = replace(config, seed=derive_seed(config.seed, index))
    try:
        state = dmft_iterate(U, V0, tol, max_iter, point_config, settle_steps, mixing)
    except Exception as e:
        logger.error(f"Phase-diagram point U={U} failed: {e}")
        return PhaseRow(U, float('nan'), exact_quasiparticle_weight(U), 0, 'error', None, str(e))
    return PhaseRow(U, state.z_final, exact_quasiparticle_weight(U), state.iterations,
                    state.terminated_reason, state)


def phase_diagram(U_list: Sequence[float], config: Optional[MeasurementConfig] = None, jobs: int = 1,
                  V0: float = DEFAULT_V0, tol: float = DEFAULT_TOLERANCE, max_iter: int = DEFAULT_MAX_ITER,
                  settle_steps: int = DEFAULT_SETTLE_STEPS, mixing: float = 0.0) -> List[PhaseRow]:
    """Run the DMFT loop for every U and compare Z_final with the exact self-consistent weight.

    Each point gets a seed derived from its position in ``U_list``, so results
    do not depend on ``jobs``. Failed points are recorded and the sweep continues.
    """
    U_list = InputValidator.validate_u_list(U_list)
    jobs = InputValidator.validate_integer(jobs, min_val=1)
    config = config or MeasurementConfig()
    tasks = [(U, i, V0, tol, max_iter, config, settle_steps, mixing) for i, U in enumerate(U_list)]
    logger.info(f"Phase diagram over {len(tasks)} interaction values with {jobs} job(s)")
    if jobs == 1:
        return [_phase_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_phase_point, tasks))
