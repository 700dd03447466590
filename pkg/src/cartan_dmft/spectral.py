"""
Two-rate Green's-function sampling, DFT spectra, aliasing and peak detection.

The high-rate series resolves the Hubbard-band pole omega2; the low-rate series
resolves the quasiparticle pole omega1, where the aliased image of omega2 is
masked. omega2 is always detected first.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from . import DEFAULT_MAX_RERUNS, DEFAULT_RATE_MULTIPLIER, DEFAULT_TIME_POINTS, RATE_BAND
from .cartan import CartanSolution, derive_seed
from .circuit import greens_function_circuit, optimize_circuit
from .sim import NoiseModel, measure_ancilla

logger = logging.getLogger(__name__)

HIGH = 'high'
LOW = 'low'

# Zero-padding factor of the DFT
PADDING = 4

# Bins (in units of the unpadded resolution) zeroed around omega = 0
DC_BINS = 2

# Search windows relative to the previous estimate
OMEGA1_WINDOW = (0.5, 1.75)
OMEGA2_WINDOW = (0.6, 1.4)
OMEGA1_MASK = (0.5, 1.5)

# Lowest frequency used to plan the low rate when omega1 has vanished
MIN_FREQUENCY = 0.05

# Sidelobe height of a rectangular window is about 1/(pi k) at k bins
SIDELOBE_FACTOR = 4.0 / math.pi

Window = Tuple[float, float]


class SeriesError(Exception):
    """Raised for time series that are not uniformly sampled."""
    pass


class RerunSignal(Exception):
    """Raised when no peak qualifies; the series must be remeasured with a fresh seed."""
    pass


class PeakNotFound(Exception):
    """Raised when a required peak is still missing after all reruns."""
    pass


@dataclass(frozen=True)
class GreensSeries:
    times: np.ndarray
    values: np.ndarray
    rate_tag: str

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)
        if self.rate_tag not in (HIGH, LOW):
            raise SeriesError(f"Unknown rate tag {self.rate_tag!r}")
        if times.ndim != 1 or times.shape != values.shape or len(times) < 3:
            raise SeriesError("Times and values must be equal-length vectors of at least 3 samples")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise SeriesError("Times must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-12 * max(1.0, abs(times[-1])):
            raise SeriesError("Times are not uniformly spaced")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    bin_width: float
    resolution: float
    n_samples: int
    dc_cutoff: float

    @property
    def nyquist(self) -> float:
        return float(self.frequencies[-1])


@dataclass(frozen=True)
class PeakPair:
    omega1: float
    omega2: float
    found1: bool
    amp1_rel: float
    amp2_rel: float

    def __post_init__(self):
        if self.found1 and self.omega1 > 0 and self.omega1 > self.omega2:
            raise ValueError(f"Expected omega1 <= omega2, got {self.omega1} and {self.omega2}")


@dataclass(frozen=True)
class RatePlan:
    dt_high: float
    dt_low: float
    multiplier_high: float
    multiplier_low: float

    @property
    def omega_s_high(self) -> float:
        return 2.0 * math.pi / self.dt_high

    @property
    def omega_s_low(self) -> float:
        return 2.0 * math.pi / self.dt_low


def time_grid(dt: float, n_points: int = DEFAULT_TIME_POINTS) -> np.ndarray:
    return np.arange(n_points) * dt


def nint(x: float) -> int:
    """Round half up: ceil(floor(2x) / 2)."""
    return int(math.ceil(math.floor(2.0 * x) / 2.0))


def alias_frequency(omega: float, omega_s: float) -> float:
    """Apparent frequency |omega - omega_s NINT(omega / omega_s)| of a sampled cosine."""
    if omega_s <= 0:
        raise ValueError("Sampling frequency must be positive")
    return abs(omega - omega_s * nint(omega / omega_s))


def alias_clearance(omega1: float, omega2: float, omega_s: float,
                    n_points: int = DEFAULT_TIME_POINTS) -> float:
    """Distance, in resolution bins, from the alias of omega2 to the omega1 search window."""
    alias = alias_frequency(omega2, omega_s)
    lo, hi = OMEGA1_WINDOW[0] * omega1, OMEGA1_WINDOW[1] * omega1
    if lo <= alias <= hi:
        return 0.0
    resolution = omega_s / n_points
    return min(abs(alias - lo), abs(alias - hi)) / resolution


def plan_rates(prev: PeakPair, multiplier: float = DEFAULT_RATE_MULTIPLIER, band: Window = RATE_BAND,
               n_points: int = DEFAULT_TIME_POINTS, min_frequency: float = MIN_FREQUENCY) -> RatePlan:
    """Sampling steps for the high- and low-rate series.

    The low-rate multiplier stays at ``multiplier`` unless the alias of omega2
    falls within sidelobe range of the omega1 window; the band is then scanned
    for the multiplier with the widest clearance.
    """
    dt_high = 2.0 * math.pi / (multiplier * prev.omega2)
    target = prev.omega1 if prev.found1 and prev.omega1 > 0 else min_frequency
    if target != prev.omega1:
        logger.info(f"omega1 unavailable; planning the low rate for {min_frequency}")

    chosen = multiplier
    if prev.amp1_rel > 0:
        required = max(2.0, SIDELOBE_FACTOR * prev.amp2_rel / prev.amp1_rel)
        clearance = alias_clearance(target, prev.omega2, multiplier * target, n_points)
        if clearance < required:
            candidates = np.arange(band[0], band[1] + 1e-9, 0.05)
            scores = [alias_clearance(target, prev.omega2, m * target, n_points) for m in candidates]
            best = max(scores)
            ties = [m for m, s in zip(candidates, scores) if s == best]
            chosen = float(min(ties, key=lambda m: abs(m - multiplier)))
            logger.info(f"Alias of omega2 {clearance:.1f} bins from the omega1 window; "
                        f"low-rate multiplier {multiplier} -> {chosen:.2f}")

    return RatePlan(dt_high, 2.0 * math.pi / (chosen * target), multiplier, chosen)


def dft_spectrum(series: GreensSeries, padding: int = PADDING, dc_bins: float = DC_BINS) -> Spectrum:
    """Magnitude spectrum for omega >= 0 of the zero-padded, untapered series."""
    n = len(series)
    n_pad = padding * n
    magnitudes = np.abs(np.fft.rfft(series.values, n=n_pad))
    frequencies = 2.0 * math.pi * np.fft.rfftfreq(n_pad, d=series.dt)
    resolution = 2.0 * math.pi / (n * series.dt)
    dc_cutoff = dc_bins * resolution
    magnitudes[frequencies < dc_cutoff] = 0.0
    return Spectrum(frequencies, magnitudes, float(frequencies[1]), resolution, n, dc_cutoff)


def relative_amplitude(spec: Spectrum, omega: float) -> float:
    """|DFT| at omega over N/2, an estimate of the cosine amplitude."""
    return float(np.interp(omega, spec.frequencies, spec.magnitudes)) / (spec.n_samples / 2.0)


def interpolate_peak(spec: Spectrum, index: int) -> float:
    """Parabolic refinement of a peak position from its two neighbouring bins."""
    if index <= 0 or index >= len(spec.magnitudes) - 1:
        return float(spec.frequencies[index])
    left, mid, right = spec.magnitudes[index - 1:index + 2]
    denom = left - 2.0 * mid + right
    if denom == 0:
        return float(spec.frequencies[index])
    offset = float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))
    return float(spec.frequencies[index] + offset * spec.bin_width)


def _outside(frequencies: np.ndarray, masks: Sequence[Window]) -> np.ndarray:
    keep = np.ones(len(frequencies), dtype=bool)
    for lo, hi in masks:
        keep &= ~((frequencies >= lo) & (frequencies <= hi))
    return keep


def baseline(spec: Spectrum, masks: Sequence[Window] = ()) -> Tuple[float, float]:
    """Mean and standard deviation over the DC-removed spectrum outside ``masks``."""
    keep = _outside(spec.frequencies, masks) & (spec.frequencies >= spec.dc_cutoff)
    values = spec.magnitudes[keep]
    if len(values) == 0:
        return 0.0, 0.0
    return float(values.mean()), float(values.std())


def window_peaks(spec: Spectrum, window: Window, threshold: float,
                 masks: Sequence[Window] = (), edge: float = 0.0) -> List[int]:
    """Local maxima above ``threshold`` inside ``window``, strongest first."""
    lo, hi = window
    indices, _ = find_peaks(spec.magnitudes)
    freqs = spec.frequencies[indices]
    keep = (freqs >= lo + edge) & (freqs <= hi - edge) & _outside(freqs, masks)
    keep &= spec.magnitudes[indices] > threshold
    selected = indices[keep]
    return sorted(selected.tolist(), key=lambda i: spec.magnitudes[i], reverse=True)


def detect_omega2(spec: Spectrum, expected: Window, mask_omega1: Window, widen: bool = True) -> float:
    """Strongest peak above mean + 2 sigma in the omega2 window.

    With ``widen`` an empty window is followed by a search of the whole
    spectrum above the DC cutoff, still outside the omega1 mask.

    Raises:
        RerunSignal: when nothing qualifies
    """
    mean, sigma = baseline(spec, [mask_omega1])
    threshold = mean + 2.0 * sigma
    window = (expected[0], min(expected[1], spec.nyquist))
    peaks = window_peaks(spec, window, threshold, [mask_omega1])[:2]
    if not peaks and widen:
        widest = (spec.dc_cutoff, spec.nyquist)
        peaks = window_peaks(spec, widest, threshold, [mask_omega1])[:2]
        if peaks:
            logger.info(f"omega2 missing from {window}; found in the widened range {widest}")
    if not peaks:
        raise RerunSignal(f"No omega2 peak above {threshold:.4g} in {window}")
    return interpolate_peak(spec, peaks[0])


def detect_omega1(spec: Spectrum, expected: Window, omega2: float, omega_s: float) -> Tuple[float, bool]:
    """omega1 through the escalating threshold ladder mean, mean + sigma, mean + 2 sigma.

    A stage accepts one or two peaks; more than two escalates to the next
    stage. The alias of omega2 is masked and peaks within one resolution bin
    of the window edges are ignored.

    Raises:
        RerunSignal: when every stage fails
    """
    alias = alias_frequency(omega2, omega_s)
    mask = (alias - spec.resolution, alias + spec.resolution)
    mean, sigma = baseline(spec, [mask])
    window = (expected[0], min(expected[1], spec.nyquist))
    for stage in range(3):
        threshold = mean + stage * sigma
        peaks = window_peaks(spec, window, threshold, [mask], edge=spec.resolution)
        if not peaks:
            raise RerunSignal(f"No omega1 peak above {threshold:.4g} (stage {stage})")
        if len(peaks) <= 2:
            return interpolate_peak(spec, peaks[0]), True
        logger.debug(f"{len(peaks)} omega1 candidates at stage {stage}; raising the threshold")
    raise RerunSignal("Too many omega1 candidates at every threshold")


def measure_series(sol_list: Sequence[CartanSolution], t_grid: Sequence[float], theta_gs: float,
                   shots: Optional[int] = None, noise: Optional[NoiseModel] = None, seed: int = 0,
                   rate_tag: str = HIGH) -> GreensSeries:
    """Average the Hadamard-test <Z_a> over Cartan solutions at every time point.

    ``shots=None`` gives exact expectations. Noisy circuits are peephole
    optimized before simulation.
    """
    if not sol_list:
        raise ValueError("At least one Cartan solution is required")
    values = np.zeros(len(t_grid))
    lowest = 1.0
    for i, t in enumerate(t_grid):
        total = 0.0
        for j, solution in enumerate(sol_list):
            circuit = greens_function_circuit(solution, float(t), theta_gs)
            if noise is not None:
                circuit = optimize_circuit(circuit)
            value, retention = measure_ancilla(circuit, noise, shots, derive_seed(seed, i, j))
            lowest = min(lowest, retention)
            total += value
        values[i] = total / len(sol_list)
    logger.debug(f"{rate_tag}-rate series: {len(t_grid)} points, lowest retention {lowest:.3f}")
    return GreensSeries(np.asarray(t_grid, dtype=float), values, rate_tag)


def extract_omega2(measure: Callable[[int], Spectrum], expected: Window, mask_omega1: Window,
                   max_attempts: int = DEFAULT_MAX_RERUNS, rerun: bool = True) -> Tuple[float, Spectrum]:
    """detect_omega2 with reruns; ``measure(attempt)`` returns a fresh spectrum.

    Raises:
        PeakNotFound: when every attempt fails
    """
    for attempt in range(max_attempts if rerun else 1):
        spec = measure(attempt)
        try:
            return detect_omega2(spec, expected, mask_omega1), spec
        except RerunSignal as e:
            logger.warning(f"omega2 attempt {attempt + 1} failed: {e}")
    raise PeakNotFound(f"omega2 not found in window {expected}")


def extract_omega1(measure: Callable[[int], Spectrum], expected: Window, omega2: float, omega_s: float,
                   max_attempts: int = DEFAULT_MAX_RERUNS, rerun: bool = True) -> Tuple[float, bool, Spectrum]:
    """detect_omega1 with reruns; returns (0, False, last spectrum) when every attempt fails."""
    spec = None
    for attempt in range(max_attempts if rerun else 1):
        spec = measure(attempt)
        try:
            omega, found = detect_omega1(spec, expected, omega2, omega_s)
            return omega, found, spec
        except RerunSignal as e:
            logger.warning(f"omega1 attempt {attempt + 1} failed: {e}")
    return 0.0, False, spec
