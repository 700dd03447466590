"""
Exact simulation backend: statevector and density-matrix propagation, shot
sampling, readout confusion with its mitigation, and half-filling post-selection.

Outcome bitstrings list qubit 0 first, so the ancilla of the Green's-function
circuit is the last character.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from . import DEFAULT_CNOT_ERROR
from .circuit import ANCILLA, SYSTEM_QUBITS, Circuit, apply_gate
from .validation import InputValidator, ValidationError

logger = logging.getLogger(__name__)

STATEVECTOR = 'statevector'
DENSITY_MATRIX = 'density-matrix'

# Width caps per simulation mode
WIDTH_CAPS = {STATEVECTOR: 12, DENSITY_MATRIX: 6}

ReadoutPair = Tuple[float, float]


class WidthError(Exception):
    """Raised when a circuit is wider than the simulator cap."""
    pass


class PostSelectionError(Exception):
    """Raised when no shot survives post-selection."""
    pass


class SingularConfusionError(Exception):
    """Raised when a readout confusion matrix cannot be inverted."""
    pass


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing CNOT error plus per-qubit readout flips (p(1|0), p(0|1))."""

    cnot_depolarizing: float = DEFAULT_CNOT_ERROR
    readout_flip: Tuple[ReadoutPair, ...] = ()

    def __post_init__(self):
        InputValidator.validate_probability(self.cnot_depolarizing, "CNOT depolarizing probability")
        for p10, p01 in self.readout_flip:
            InputValidator.validate_probability(p10, "Readout flip p(1|0)")
            InputValidator.validate_probability(p01, "Readout flip p(0|1)")

    @classmethod
    def uniform_readout(cls, cnot_depolarizing: float, p10: float, p01: float, n: int) -> 'NoiseModel':
        return cls(cnot_depolarizing, tuple((p10, p01) for _ in range(n)))

    def readout_for(self, n: int) -> List[ReadoutPair]:
        pairs = list(self.readout_flip[:n])
        return pairs + [(0.0, 0.0)] * (n - len(pairs))


@dataclass(frozen=True)
class QuantumState:
    mode: str
    data: np.ndarray
    n: int

    def probabilities(self) -> np.ndarray:
        dim = 1 << self.n
        if self.mode == STATEVECTOR:
            probs = np.abs(self.data.reshape(dim)) ** 2
        else:
            probs = np.real(np.diagonal(self.data.reshape(dim, dim))).copy()
        probs = np.clip(probs, 0.0, None)
        return probs / probs.sum()

    def vector(self) -> np.ndarray:
        if self.mode != STATEVECTOR:
            raise ValueError("Only statevector states have an amplitude vector")
        return self.data.reshape(1 << self.n)

    def density_matrix(self) -> np.ndarray:
        dim = 1 << self.n
        if self.mode == STATEVECTOR:
            psi = self.vector()
            return np.outer(psi, psi.conj())
        return self.data.reshape(dim, dim)

    def is_valid(self, tol: float = 1e-10) -> bool:
        if self.mode == STATEVECTOR:
            return abs(np.linalg.norm(self.vector()) - 1.0) <= tol
        rho = self.density_matrix()
        if not np.allclose(rho, rho.conj().T, atol=tol):
            return False
        if abs(np.trace(rho) - 1.0) > tol:
            return False
        return bool(np.linalg.eigvalsh(rho).min() >= -tol)


def depolarize_pair(rho: np.ndarray, a: int, b: int, epsilon: float, n: int) -> np.ndarray:
    """(1 - eps) rho + eps (I/4 on a,b) (x) Tr_ab rho on a (2,)*2n density tensor."""
    axes = [a, b, n + a, n + b]
    moved = np.moveaxis(rho, axes, [0, 1, 2, 3])
    reduced = np.einsum('abab...->...', moved)
    eye = np.eye(2)
    mixed = np.einsum('ac,bd,...->abcd...', eye, eye, reduced) / 4.0
    return np.moveaxis((1.0 - epsilon) * moved + epsilon * mixed, [0, 1, 2, 3], axes)


def run(c: Circuit, noise: Optional[NoiseModel] = None, mode: Optional[str] = None) -> QuantumState:
    """Propagate |0...0> through ``c``.

    Without noise the default is a statevector run; with noise the state is a
    density matrix and every CNOT is followed by the depolarizing channel on
    its operand pair.
    """
    if mode is None:
        mode = STATEVECTOR if noise is None else DENSITY_MATRIX
    if mode not in WIDTH_CAPS:
        raise ValueError(f"Unknown simulation mode {mode!r}")
    if mode == STATEVECTOR and noise is not None and noise.cnot_depolarizing > 0:
        raise ValueError("Depolarizing noise needs a density-matrix run")
    n = c.width
    if n > WIDTH_CAPS[mode]:
        raise WidthError(f"Circuit width {n} exceeds the {mode} cap of {WIDTH_CAPS[mode]}")

    if mode == STATEVECTOR:
        psi = np.zeros((2,) * n, dtype=complex)
        psi[(0,) * n] = 1.0
        for gate in c.gates:
            psi = apply_gate(psi, gate)
        return QuantumState(mode, psi, n)

    epsilon = noise.cnot_depolarizing if noise is not None else 0.0
    rho = np.zeros((2,) * (2 * n), dtype=complex)
    rho[(0,) * (2 * n)] = 1.0
    for gate in c.gates:
        rho = apply_gate(rho, gate)
        rho = apply_gate(rho, gate, offset=n, conjugate=True)
        if gate.kind == 'CNOT' and epsilon > 0.0:
            rho = depolarize_pair(rho, gate.qubits[0], gate.qubits[1], epsilon, n)
    return QuantumState(mode, rho, n)


def _marginal(probs: np.ndarray, n: int, qubit: int) -> Tuple[float, float]:
    if not 0 <= qubit < n:
        raise IndexError(f"Qubit {qubit} out of range for {n} qubits")
    tensor = probs.reshape((2,) * n)
    return float(tensor.take(0, axis=qubit).sum()), float(tensor.take(1, axis=qubit).sum())


def expectation_Z(state: QuantumState, qubit: int) -> float:
    """Pr(0) - Pr(1) on ``qubit``."""
    p0, p1 = _marginal(state.probabilities(), state.n, qubit)
    return p0 - p1


def confusion_matrix(p10: float, p01: float) -> np.ndarray:
    """Column j is the reported-outcome distribution for true outcome j."""
    return np.array([[1.0 - p10, p01], [p10, 1.0 - p01]])


def apply_confusion(probs: np.ndarray, readout: Sequence[ReadoutPair], inverse: bool = False) -> np.ndarray:
    """Per-qubit confusion (or its inverse) on a distribution over n qubits.

    A readout list shorter than n leaves the remaining qubits unflipped.

    Raises:
        ValidationError: when the list is longer than n or the size is not a power of two
    """
    probs = np.asarray(probs, dtype=float)
    n = len(probs).bit_length() - 1
    if len(probs) != 1 << n:
        raise ValidationError(f"Distribution size {len(probs)} is not a power of two")
    if len(readout) > n:
        raise ValidationError(f"{len(readout)} readout pairs for {n} qubits")
    readout = list(readout) + [(0.0, 0.0)] * (n - len(readout))
    tensor = probs.reshape((2,) * n)
    for q, (p10, p01) in enumerate(readout):
        if p10 == 0.0 and p01 == 0.0:
            continue
        m = confusion_matrix(p10, p01)
        if inverse:
            if abs(np.linalg.det(m)) < 1e-12:
                raise SingularConfusionError(f"Readout confusion on qubit {q} is singular")
            m = np.linalg.inv(m)
        tensor = np.moveaxis(np.tensordot(m, tensor, axes=([1], [q])), 0, q)
    return tensor.reshape(1 << n)


def bitstring(index: int, n: int) -> str:
    return format(index, f'0{n}b')


def in_half_filled_sector(bits: str) -> bool:
    """One particle per spin block: (q0 q1) and (q2 q3) each in {10, 01}."""
    return bits[0] != bits[1] and bits[2] != bits[3]


@lru_cache(maxsize=None)
def sector_mask(n: int) -> np.ndarray:
    return np.array([in_half_filled_sector(bitstring(i, n)) for i in range(1 << n)])


@dataclass(frozen=True)
class ShotRecord:
    """Outcome counts; ``retained`` marks the outcomes kept by post-selection."""

    n: int
    counts: Dict[str, int]
    total_shots: int
    post_selected: int
    retained: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if sum(self.counts.values()) != self.total_shots:
            raise ValueError("Counts do not add up to the total shot count")
        if self.post_selected > self.total_shots:
            raise ValueError("Retained shots exceed the total")

    @property
    def retention(self) -> float:
        return self.post_selected / self.total_shots

    def distribution(self) -> np.ndarray:
        probs = np.zeros(1 << self.n)
        for bits, count in self.counts.items():
            probs[int(bits, 2)] = count
        return probs / self.total_shots

    def ancilla_expectation(self, ancilla: int = ANCILLA) -> float:
        """<Z> on ``ancilla`` over the retained shots."""
        if self.post_selected == 0:
            raise PostSelectionError("No retained shots")
        signed = sum((1 if bits[ancilla] == '0' else -1) * count
                     for bits, count in self.counts.items() if bits in self.retained)
        return signed / self.post_selected

    def dumps(self) -> str:
        lines = ["bitstring,count,retained"]
        for bits in sorted(self.counts):
            lines.append(f"{bits},{self.counts[bits]},{int(bits in self.retained)}")
        return '\n'.join(lines) + '\n'

    @classmethod
    def loads(cls, text: str) -> 'ShotRecord':
        counts: Dict[str, int] = {}
        retained = set()
        for line in text.splitlines()[1:]:
            if not line.strip():
                continue
            bits, count, kept = line.strip().split(',')
            counts[bits] = int(count)
            if kept == '1':
                retained.add(bits)
        if not counts:
            raise ValueError("Shot record has no outcomes")
        n = len(next(iter(counts)))
        return cls(n, counts, sum(counts.values()),
                   sum(counts[b] for b in retained), frozenset(retained))


def sample_shots(state: QuantumState, shots: int, readout_flip: Optional[Sequence[ReadoutPair]] = None,
                 seed: Optional[int] = None) -> ShotRecord:
    """Seeded multinomial sampling after the per-qubit readout confusion."""
    InputValidator.validate_integer(shots, min_val=1)
    probs = state.probabilities()
    if readout_flip:
        probs = apply_confusion(probs, list(readout_flip)[:state.n])
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, probs)
    counts = {bitstring(i, state.n): int(c) for i, c in enumerate(draws) if c > 0}
    return ShotRecord(state.n, counts, shots, shots, frozenset(counts))


def mitigate_readout(record: ShotRecord, readout_flip: Sequence[ReadoutPair]) -> np.ndarray:
    """Inverse tensor-product confusion applied to the empirical distribution.

    Negative entries are clipped to zero and the result renormalized.
    """
    corrected = apply_confusion(record.distribution(), list(readout_flip)[:record.n], inverse=True)
    corrected = np.clip(corrected, 0.0, None)
    total = corrected.sum()
    if total <= 0.0:
        raise PostSelectionError("Mitigated distribution has no weight")
    return corrected / total


def post_select(record: ShotRecord, system_qubits: int = SYSTEM_QUBITS) -> ShotRecord:
    """Keep shots whose system bits have one particle in each spin block.

    Raises:
        PostSelectionError: when no shot survives
    """
    if system_qubits != SYSTEM_QUBITS:
        raise ValueError(f"Post-selection expects {SYSTEM_QUBITS} system qubits")
    kept = frozenset(b for b in record.counts if b in record.retained and in_half_filled_sector(b))
    retained = sum(record.counts[b] for b in kept)
    if retained == 0:
        raise PostSelectionError(f"All {record.total_shots} shots failed post-selection")
    return ShotRecord(record.n, record.counts, record.total_shots, retained, kept)


def sector_expectation(probs: np.ndarray, n: int, ancilla: int = ANCILLA) -> float:
    """Ancilla <Z> of a distribution restricted to the half-filled sector."""
    restricted = np.where(sector_mask(n), probs, 0.0)
    mass = restricted.sum()
    if mass <= 0.0:
        raise PostSelectionError("Distribution has no weight in the half-filled sector")
    p0, p1 = _marginal(restricted / mass, n, ancilla)
    return p0 - p1


def measure_ancilla(c: Circuit, noise: Optional[NoiseModel] = None, shots: Optional[int] = None,
                    seed: Optional[int] = None) -> Tuple[float, float]:
    """Run, sample, mitigate and post-select one circuit.

    Returns:
        (ancilla <Z>, retention fraction); ``shots=None`` uses exact probabilities
    """
    state = run(c, noise if noise is not None and noise.cnot_depolarizing > 0 else None)
    probs = state.probabilities()
    if shots is None:
        retention = float(probs[sector_mask(c.width)].sum())
        return sector_expectation(probs, c.width), retention

    readout = noise.readout_for(c.width) if noise is not None else []
    record = sample_shots(state, shots, readout, seed)
    kept = post_select(record)
    distribution = mitigate_readout(record, readout) if readout else record.distribution()
    return sector_expectation(distribution, c.width), kept.retention
