"""
Pauli-string algebra in symplectic form and the Jordan-Wigner impurity Hamiltonian.

A string on n qubits is stored as two n-bit masks. Bit j of ``x_bits`` and
``z_bits`` describes qubit j: (0,0) is I, (1,0) is X, (0,1) is Z and (1,1) is Y.
Qubit 0 is the leftmost character of a text label and the leftmost Kronecker
factor of a dense matrix.
"""

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .validation import InputValidator, ValidationError

logger = logging.getLogger(__name__)

PHASES = (1.0 + 0j, 1j, -1.0 + 0j, -1j)

PAULI_MATRICES = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}

# Coefficients below this magnitude are dropped from sums
DROP_TOLERANCE = 1e-15

Key = Tuple[int, int]


class QubitMismatchError(ValueError):
    """Raised when Pauli objects on different qubit counts are combined."""
    pass


def popcount(value: int) -> int:
    return bin(value).count('1')


def product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Power of i picked up by P(x1,z1)·P(x2,z2) = i^k P(x1^x2, z1^z2)."""
    x3, z3 = x1 ^ x2, z1 ^ z2
    return (popcount(x1 & z1) + popcount(x2 & z2) + 2 * popcount(z1 & x2)
            - popcount(x3 & z3)) % 4


def strings_commute(x1: int, z1: int, x2: int, z2: int) -> bool:
    return (popcount(x1 & z2) + popcount(z1 & x2)) % 2 == 0


def label_from_bits(n: int, x_bits: int, z_bits: int) -> str:
    chars = []
    for q in range(n):
        x = (x_bits >> q) & 1
        z = (z_bits >> q) & 1
        chars.append('IZXY'[x * 2 + z])
    return ''.join(chars)


def bits_from_label(label: str) -> Tuple[int, int]:
    x_bits = z_bits = 0
    for q, ch in enumerate(label):
        if ch not in 'IXYZ':
            raise ValueError(f"Invalid Pauli character {ch!r} in {label!r}")
        if ch in 'XY':
            x_bits |= 1 << q
        if ch in 'ZY':
            z_bits |= 1 << q
    return x_bits, z_bits


def string_matrix(n: int, x_bits: int, z_bits: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the unit Pauli string."""
    label = label_from_bits(n, x_bits, z_bits)
    return reduce(np.kron, [PAULI_MATRICES[ch] for ch in label])


@dataclass(frozen=True)
class PauliTerm:
    """A phased, real-scaled Pauli string: coeff * i^phase * P(x_bits, z_bits)."""

    n: int
    x_bits: int
    z_bits: int
    phase: int = 0
    coeff: float = 1.0

    def __post_init__(self):
        limit = 1 << self.n
        if self.n < 1 or not (0 <= self.x_bits < limit and 0 <= self.z_bits < limit):
            raise ValueError(f"Bit masks out of range for {self.n} qubits")
        object.__setattr__(self, 'phase', self.phase % 4)

    @classmethod
    def from_label(cls, label: str, coeff: float = 1.0, phase: int = 0) -> 'PauliTerm':
        x_bits, z_bits = bits_from_label(label)
        return cls(len(label), x_bits, z_bits, phase, coeff)

    @property
    def key(self) -> Key:
        return (self.x_bits, self.z_bits)

    @property
    def label(self) -> str:
        return label_from_bits(self.n, self.x_bits, self.z_bits)

    @property
    def y_count(self) -> int:
        return popcount(self.x_bits & self.z_bits)

    @property
    def support(self) -> List[int]:
        mask = self.x_bits | self.z_bits
        return [q for q in range(self.n) if (mask >> q) & 1]

    def is_identity(self) -> bool:
        return self.x_bits == 0 and self.z_bits == 0 and self.phase == 0

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def unit(self) -> 'PauliTerm':
        """The bare string with unit coefficient and no phase."""
        return PauliTerm(self.n, self.x_bits, self.z_bits)

    def commutes_with(self, other: 'PauliTerm') -> bool:
        _check_width(self.n, other.n)
        return strings_commute(self.x_bits, self.z_bits, other.x_bits, other.z_bits)

    def to_matrix(self) -> np.ndarray:
        return self.coeff * PHASES[self.phase] * string_matrix(self.n, self.x_bits, self.z_bits)

    def __str__(self) -> str:
        prefix = ('', 'i', '-', '-i')[self.phase]
        return f"{prefix}{self.coeff!r}*{self.label}"


def _check_width(n_a: int, n_b: int) -> None:
    if n_a != n_b:
        raise QubitMismatchError(f"Qubit counts differ: {n_a} != {n_b}")


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Exact product a·b with phase tracking."""
    _check_width(a.n, b.n)
    k = product_phase(a.x_bits, a.z_bits, b.x_bits, b.z_bits)
    return PauliTerm(a.n, a.x_bits ^ b.x_bits, a.z_bits ^ b.z_bits,
                     a.phase + b.phase + k, a.coeff * b.coeff)


def commutator(a: PauliTerm, b: PauliTerm) -> Optional[PauliTerm]:
    """Return [a, b], or None when the strings commute."""
    _check_width(a.n, b.n)
    if strings_commute(a.x_bits, a.z_bits, b.x_bits, b.z_bits):
        return None
    product = multiply(a, b)
    return PauliTerm(product.n, product.x_bits, product.z_bits, product.phase, 2.0 * product.coeff)


class PauliSum:
    """Hermitian real-coefficient combination of Pauli strings.

    Terms are keyed by (x_bits, z_bits); duplicates merge and zero coefficients
    are dropped. Instances are treated as immutable.
    """

    __slots__ = ('n', '_terms')

    def __init__(self, n: int, terms: Iterable[PauliTerm] = ()):
        self.n = n
        acc: Dict[Key, float] = {}
        for term in terms:
            _check_width(n, term.n)
            if not term.is_hermitian():
                raise ValueError(f"Term {term} has an imaginary phase")
            value = term.coeff if term.phase == 0 else -term.coeff
            acc[term.key] = acc.get(term.key, 0.0) + value
        self._terms = {k: c for k, c in acc.items() if abs(c) > DROP_TOLERANCE}

    @classmethod
    def from_map(cls, n: int, mapping: Dict[Key, float]) -> 'PauliSum':
        result = cls.__new__(cls)
        result.n = n
        result._terms = {k: float(c) for k, c in mapping.items() if abs(c) > DROP_TOLERANCE}
        return result

    @classmethod
    def from_labels(cls, pairs: Sequence[Tuple[float, str]]) -> 'PauliSum':
        if not pairs:
            raise ValueError("At least one term is needed to infer the qubit count")
        return cls(len(pairs[0][1]), [PauliTerm.from_label(lbl, c) for c, lbl in pairs])

    @classmethod
    def parse(cls, text: str, n: Optional[int] = None) -> 'PauliSum':
        """Parse the "0.5*XXII + -1.0*ZIZI" text form (a " - " separator is also accepted)."""
        text = text.strip()
        if text in ('', '0'):
            if n is None:
                raise ValueError("Empty sum needs an explicit qubit count")
            return cls(n)
        chunks = text.replace(' - ', ' + -').split(' + ')
        terms = []
        for chunk in chunks:
            coeff_text, _, label = chunk.strip().partition('*')
            if not label:
                raise ValueError(f"Malformed term {chunk!r}")
            label = InputValidator.validate_pauli_label(label, n)
            terms.append(PauliTerm.from_label(label, float(coeff_text)))
        width = n if n is not None else terms[0].n
        return cls(width, terms)

    def items(self) -> Iterator[Tuple[Key, float]]:
        return iter(self._terms.items())

    def as_map(self) -> Dict[Key, float]:
        return dict(self._terms)

    def keys(self) -> List[Key]:
        return sorted(self._terms)

    def terms(self) -> List[PauliTerm]:
        return [PauliTerm(self.n, x, z, 0, self._terms[(x, z)]) for x, z in sorted(self._terms)]

    def coefficient(self, key: Key) -> float:
        return self._terms.get(key, 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self.terms())

    def __add__(self, other: 'PauliSum') -> 'PauliSum':
        _check_width(self.n, other.n)
        merged = dict(self._terms)
        for key, c in other.items():
            merged[key] = merged.get(key, 0.0) + c
        return PauliSum.from_map(self.n, merged)

    def __sub__(self, other: 'PauliSum') -> 'PauliSum':
        return self + other * -1.0

    def __mul__(self, scalar: float) -> 'PauliSum':
        return PauliSum.from_map(self.n, {k: c * scalar for k, c in self._terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliSum) and self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def allclose(self, other: 'PauliSum', atol: float = 1e-12) -> bool:
        _check_width(self.n, other.n)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= atol for k in keys)

    def norm(self) -> float:
        """Norm induced by trace_inner."""
        return float(np.sqrt(sum(c * c for c in self._terms.values())))

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n
        matrix = np.zeros((dim, dim), dtype=complex)
        for (x, z), c in self._terms.items():
            matrix += c * string_matrix(self.n, x, z)
        return matrix

    def __str__(self) -> str:
        if not self._terms:
            return '0'
        parts = []
        for term in self.terms():
            if not parts:
                parts.append(f"{term.coeff!r}*{term.label}")
            elif term.coeff < 0:
                parts.append(f" - {-term.coeff!r}*{term.label}")
            else:
                parts.append(f" + {term.coeff!r}*{term.label}")
        return ''.join(parts)

    def __repr__(self) -> str:
        return f"PauliSum({self.n}, {str(self)!r})"


def trace_inner(a: PauliSum, b: PauliSum) -> float:
    """Normalized trace inner product Tr(AB)/2^n."""
    _check_width(a.n, b.n)
    if len(b) < len(a):
        a, b = b, a
    return float(sum(c * b.coefficient(key) for key, c in a.items()))


@dataclass(frozen=True)
class AimParameters:
    """Anderson impurity model with ``n_bath`` bath sites.

    ``epsilon[0]`` is the impurity level and ``epsilon[i]`` the level of bath
    site i; ``hybridization[i-1]`` couples the impurity to bath site i.
    """

    n_bath: int
    hybridization: Tuple[float, ...]
    epsilon: Tuple[float, ...]
    U: float
    mu: float

    def __post_init__(self):
        InputValidator.validate_bath_sites(self.n_bath)
        InputValidator.validate_interaction(self.U)
        if len(self.hybridization) != self.n_bath:
            raise ValidationError(f"Expected {self.n_bath} hybridization values, got {len(self.hybridization)}")
        if len(self.epsilon) != self.n_bath + 1:
            raise ValidationError(f"Expected {self.n_bath + 1} on-site energies, got {len(self.epsilon)}")

    @classmethod
    def half_filled(cls, U: float, V: float) -> 'AimParameters':
        """Two-site model at half filling: mu = U/2, impurity level 0, bath level U/2."""
        return cls(1, (float(V),), (0.0, U / 2.0), float(U), U / 2.0)

    @property
    def n_qubits(self) -> int:
        return 2 * (self.n_bath + 1)


def _z_chain(start: int, stop: int) -> int:
    """Z mask on qubits strictly between start and stop."""
    mask = 0
    for q in range(start + 1, stop):
        mask |= 1 << q
    return mask


def jw_aim_hamiltonian(p: AimParameters) -> PauliSum:
    """Jordan-Wigner image of the impurity Hamiltonian with identity terms dropped.

    Spin-up modes occupy qubits 0..N_b and spin-down modes qubits N_b+1..2N_b+1,
    the impurity first in each block. An occupied mode is |1>.
    """
    n = p.n_qubits
    block = p.n_bath + 1
    terms: List[PauliTerm] = []
    for offset in (0, block):
        imp = offset
        for i, v in enumerate(p.hybridization, start=1):
            bath = offset + i
            chain = _z_chain(imp, bath)
            pair = (1 << imp) | (1 << bath)
            terms.append(PauliTerm(n, pair, chain, 0, v / 2.0))
            terms.append(PauliTerm(n, pair, chain | pair, 0, v / 2.0))
        for i, eps in enumerate(p.epsilon):
            terms.append(PauliTerm(n, 0, 1 << (offset + i), 0, -(eps - p.mu) / 2.0))
    up, down = 1 << 0, 1 << block
    quarter = p.U / 4.0
    terms.append(PauliTerm(n, 0, up | down, 0, quarter))
    terms.append(PauliTerm(n, 0, up, 0, -quarter))
    terms.append(PauliTerm(n, 0, down, 0, -quarter))
    hamiltonian = PauliSum(n, terms)
    logger.debug(f"Built {n}-qubit impurity Hamiltonian with {len(hamiltonian)} strings")
    return hamiltonian


def annihilation_operator(n: int, mode: int) -> np.ndarray:
    """Dense Jordan-Wigner annihilation operator Z^(x mode) (x) |0><1| (x) I."""
    lowering = np.array([[0, 1], [0, 0]], dtype=complex)
    factors = [PAULI_MATRICES['Z']] * mode + [lowering] + [PAULI_MATRICES['I']] * (n - mode - 1)
    return reduce(np.kron, factors)
