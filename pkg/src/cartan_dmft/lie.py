"""
Hamiltonian algebra generation and its Cartan decomposition.

Basis elements are unit Pauli strings P, each standing for the direction iP of
a real Lie algebra. All orderings are deterministic so that repeated runs give
identical decompositions.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Set, Tuple

from .pauli import Key, PauliSum, PauliTerm, strings_commute

logger = logging.getLogger(__name__)

ROLES = ('g', 'k', 'm', 'h', 'k0', 'k1')


class ClosureCapError(Exception):
    """Raised when commutator closure grows beyond the configured cap."""
    pass


class InvolutionError(Exception):
    """Raised when the Y-parity involution does not place the Hamiltonian in m."""
    pass


@dataclass(frozen=True)
class AlgebraBasis:
    role: str
    n: int
    elements: Tuple[PauliTerm, ...]

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"Unknown basis role {self.role!r}")

    @classmethod
    def from_keys(cls, role: str, n: int, keys: Iterable[Key]) -> 'AlgebraBasis':
        return cls(role, n, tuple(PauliTerm(n, x, z) for x, z in keys))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def keys(self) -> List[Key]:
        return [e.key for e in self.elements]

    def labels(self) -> List[str]:
        return [e.label for e in self.elements]

    def __contains__(self, term: PauliTerm) -> bool:
        return term.key in set(self.keys())

    def dumps(self) -> str:
        """Line-oriented text: a role header, then one Pauli label per line."""
        lines = [f"# role: {self.role}", f"# qubits: {self.n}"]
        lines.extend(self.labels())
        return '\n'.join(lines) + '\n'

    @classmethod
    def loads(cls, text: str) -> 'AlgebraBasis':
        role = None
        n = None
        labels = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                name, _, value = line[1:].partition(':')
                if name.strip() == 'role':
                    role = value.strip()
                elif name.strip() == 'qubits':
                    n = int(value)
                continue
            labels.append(line)
        if role is None:
            raise ValueError("Missing role header")
        elements = tuple(PauliTerm.from_label(label) for label in labels)
        if n is None:
            if not elements:
                raise ValueError("Empty basis without a qubit header")
            n = elements[0].n
        return cls(role, n, elements)


@dataclass(frozen=True)
class CartanDecomposition:
    """The string sets g = k + m, the Cartan subalgebra h and the split k = k0 + k1."""

    g: AlgebraBasis
    k: AlgebraBasis
    m: AlgebraBasis
    h: AlgebraBasis
    k0: AlgebraBasis
    k1: AlgebraBasis

    @property
    def n(self) -> int:
        return self.g.n

    def bases(self) -> List[AlgebraBasis]:
        return [self.g, self.k, self.m, self.h, self.k0, self.k1]


def generate_closure(h: PauliSum, cap: Optional[int] = None) -> AlgebraBasis:
    """Smallest set of strings containing h's strings and closed under commutators.

    Strings are listed generation by generation; each generation is sorted by
    its (x_bits, z_bits) key.
    """
    if len(h) == 0:
        raise ValueError("Cannot generate an algebra from an empty Hamiltonian")
    n = h.n
    limit = cap if cap is not None else 4 ** n - 1

    frontier = sorted(h.keys())
    order: List[Key] = list(frontier)
    seen: Set[Key] = set(frontier)
    if len(order) > limit:
        raise ClosureCapError(f"Hamiltonian already has {len(order)} strings (cap {limit})")

    generation = 0
    while frontier:
        found: Set[Key] = set()
        for xa, za in frontier:
            for xb, zb in order:
                if strings_commute(xa, za, xb, zb):
                    continue
                key = (xa ^ xb, za ^ zb)
                if key not in seen:
                    found.add(key)
        frontier = sorted(found)
        seen.update(frontier)
        order.extend(frontier)
        generation += 1
        if len(order) > limit:
            raise ClosureCapError(f"Algebra exceeds {limit} elements after {generation} generations")

    logger.debug(f"Closure finished after {generation} generations with dimension {len(order)}")
    return AlgebraBasis.from_keys('g', n, order)


def involution_split(g: AlgebraBasis, hamiltonian: Optional[PauliSum] = None) -> Tuple[AlgebraBasis, AlgebraBasis]:
    """Split g by Y-count parity: odd strings form k, even strings form m."""
    if hamiltonian is not None:
        odd = [t.label for t in hamiltonian.terms() if t.y_count % 2]
        if odd:
            raise InvolutionError(f"Hamiltonian strings with odd Y-count: {', '.join(odd)}")
    k = tuple(e for e in g if e.y_count % 2 == 1)
    m = tuple(e for e in g if e.y_count % 2 == 0)
    return AlgebraBasis('k', g.n, k), AlgebraBasis('m', g.n, m)


def find_cartan_subalgebra(m: AlgebraBasis, hamiltonian: Optional[PauliSum] = None) -> AlgebraBasis:
    """Greedy maximal abelian subset of m seeded with the first Hamiltonian string in m."""
    if len(m) == 0:
        raise ValueError("m is empty")
    seed = m.elements[0]
    if hamiltonian is not None:
        hamiltonian_keys = set(hamiltonian.keys())
        for element in m:
            if element.key in hamiltonian_keys:
                seed = element
                break

    chosen = [seed]
    for element in m:
        if element.key == seed.key:
            continue
        if all(element.commutes_with(member) for member in chosen):
            chosen.append(element)
    return AlgebraBasis('h', m.n, tuple(chosen))


def partition_k(k: AlgebraBasis) -> Tuple[AlgebraBasis, AlgebraBasis]:
    """Split k into strings commuting with X on qubit 0 (k0) and the rest (k1)."""
    x0 = PauliTerm(k.n, 1, 0)
    k0 = tuple(e for e in k if e.commutes_with(x0))
    k1 = tuple(e for e in k if not e.commutes_with(x0))
    return AlgebraBasis('k0', k.n, k0), AlgebraBasis('k1', k.n, k1)


def decompose(hamiltonian: PauliSum, cap: Optional[int] = None) -> CartanDecomposition:
    """Closure, involution split, Cartan subalgebra and k partition in one call."""
    g = generate_closure(hamiltonian, cap)
    k, m = involution_split(g, hamiltonian)
    h = find_cartan_subalgebra(m, hamiltonian)
    k0, k1 = partition_k(k)
    logger.info(f"Algebra dimensions: g={len(g)} k={len(k)} m={len(m)} h={len(h)} k0={len(k0)} k1={len(k1)}")
    return CartanDecomposition(g, k, m, h, k0, k1)


def brackets_within(a: AlgebraBasis, b: AlgebraBasis, target: AlgebraBasis) -> bool:
    """True when every nonzero [a_i, b_j] lies along a string of target."""
    allowed = set(target.keys())
    for ea in a:
        for eb in b:
            if strings_commute(ea.x_bits, ea.z_bits, eb.x_bits, eb.z_bits):
                continue
            if (ea.x_bits ^ eb.x_bits, ea.z_bits ^ eb.z_bits) not in allowed:
                return False
    return True


def check_cartan_conditions(k: AlgebraBasis, m: AlgebraBasis) -> bool:
    """[k,k] in k, [k,m] in m and [m,m] in k."""
    return brackets_within(k, k, k) and brackets_within(k, m, m) and brackets_within(m, m, k)


def is_abelian(basis: AlgebraBasis) -> bool:
    elements = basis.elements
    return all(elements[i].commutes_with(elements[j])
               for i in range(len(elements)) for j in range(i + 1, len(elements)))


def is_maximal_abelian(h: AlgebraBasis, m: AlgebraBasis) -> bool:
    """No element of m outside h commutes with every element of h."""
    if not is_abelian(h):
        return False
    members = set(h.keys())
    for element in m:
        if element.key in members:
            continue
        if all(element.commutes_with(member) for member in h):
            return False
    return True
