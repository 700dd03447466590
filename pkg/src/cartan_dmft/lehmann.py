"""
Exact-diagonalization reference for the half-filled two-site impurity model.

Provides the Lehmann pole/residue form of Re<X0(t) X0>, the closed-form poles
and the exact self-consistent hybridization.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .pauli import PAULI_MATRICES, AimParameters, jw_aim_hamiltonian

logger = logging.getLogger(__name__)

# Excitation energies closer than this merge into one pole
POLE_MERGE_TOLERANCE = 1e-8

# Residues below this are ignored
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class PoleSet:
    omega1: float
    omega2: float
    alpha1: float
    alpha2: float
    ground_energy: float

    @property
    def amplitudes(self) -> Tuple[float, float]:
        """Cosine amplitudes 2*alpha1 and 2*alpha2 of Re<X0(t) X0>."""
        return 2.0 * self.alpha1, 2.0 * self.alpha2


def _impurity_observable(name: str, n: int = 4) -> np.ndarray:
    factors = [PAULI_MATRICES[name]] + [PAULI_MATRICES['I']] * (n - 1)
    result = factors[0]
    for f in factors[1:]:
        result = np.kron(result, f)
    return result


@lru_cache(maxsize=256)
def _spectrum(U: float, V: float) -> Tuple[np.ndarray, np.ndarray]:
    hamiltonian = jw_aim_hamiltonian(AimParameters.half_filled(U, V)).to_matrix()
    energies, vectors = np.linalg.eigh(hamiltonian)
    if energies[1] - energies[0] < 1e-10:
        raise ValueError(f"Degenerate ground state at U={U}, V={V}")
    return energies, vectors


def ground_state(U: float, V: float) -> Tuple[float, np.ndarray]:
    energies, vectors = _spectrum(float(U), float(V))
    return float(energies[0]), vectors[:, 0]


def greens_correlator(U: float, V: float, times: Sequence[float],
                      first: str = 'X', second: str = 'X') -> np.ndarray:
    """Re<B(t) A> in the ground state, with A = first and B = second on qubit 0."""
    energies, vectors = _spectrum(float(U), float(V))
    a = vectors.conj().T @ _impurity_observable(first) @ vectors[:, 0]
    b = vectors[:, 0].conj() @ _impurity_observable(second) @ vectors
    excitation = energies - energies[0]
    phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), excitation))
    return np.real(phases @ (a * b))


def greens_function(U: float, V: float, times: Sequence[float]) -> np.ndarray:
    """Re<X0(t) X0> = sum_n |<n|X0|0>|^2 cos((E_n - E_0) t)."""
    return greens_correlator(U, V, times, 'X', 'X')


def impurity_poles(U: float, V: float) -> PoleSet:
    """Group the Lehmann residues of X0 into the two pole energies.

    For U = 0 only the pole at V carries weight; it is reported as omega1 = omega2
    with alpha2 = 0.
    """
    energies, vectors = _spectrum(float(U), float(V))
    overlaps = np.abs(vectors.conj().T @ _impurity_observable('X') @ vectors[:, 0]) ** 2
    groups: List[List[float]] = []
    for energy, weight in sorted(zip(energies - energies[0], overlaps)):
        if weight < WEIGHT_FLOOR:
            continue
        if groups and abs(energy - groups[-1][0]) <= POLE_MERGE_TOLERANCE * max(1.0, abs(energy)):
            groups[-1][1] += weight
        else:
            groups.append([energy, weight])

    if len(groups) == 1:
        omega, weight = groups[0]
        return PoleSet(float(omega), float(omega), float(weight / 2.0), 0.0, float(energies[0]))
    if len(groups) != 2:
        raise ValueError(f"Expected two poles at U={U}, V={V}, found {len(groups)}")
    (w1, r1), (w2, r2) = groups
    return PoleSet(float(w1), float(w2), float(r1 / 2.0), float(r2 / 2.0), float(energies[0]))


def closed_form_poles(U: float, V: float) -> PoleSet:
    """Analytic two-site poles: omega_{1,2} = sqrt(4V^2 + u^2) -/+ sqrt(V^2 + u^2), u = U/4."""
    u = U / 4.0
    a = math.sqrt(4.0 * V * V + u * u)
    b = math.sqrt(V * V + u * u)
    omega1, omega2 = a - b, a + b
    alpha2 = ((omega1 / V) ** 2 - 1.0) / (2.0 * ((omega1 / omega2) ** 2 - 1.0))
    return PoleSet(omega1, omega2, 0.5 - alpha2, alpha2, -a)


def self_consistent_hybridization(U: float) -> float:
    """Fixed point of V <- sqrt(Z(V)) with Z(V) = 9V^2 / (9V^2 + U^2/4)."""
    if U >= 6.0:
        return 0.0
    return math.sqrt(1.0 - (U / 6.0) ** 2)
