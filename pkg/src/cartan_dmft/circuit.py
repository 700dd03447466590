"""
Gate-level circuits: ground-state ansatz, Pauli exponentials, the Hadamard-test
Green's-function circuit, peephole optimization and linear-chain routing.

Qubits 0-3 hold the impurity model (spin-up impurity, spin-up bath, spin-down
impurity, spin-down bath); the Green's-function circuit adds the ancilla as
qubit 4.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .cartan import CartanSolution
from .pauli import PauliTerm, jw_aim_hamiltonian, AimParameters

logger = logging.getLogger(__name__)

SYSTEM_QUBITS = 4
ANCILLA = 4

SINGLE_QUBIT_KINDS = ('H', 'S', 'Sdg', 'X', 'Rx', 'Rz')
ROTATION_KINDS = ('Rx', 'Rz')
GATE_KINDS = SINGLE_QUBIT_KINDS + ('CNOT',)

# Default chain for linear connectivity: ancilla at one end
LINEAR_CHAIN = (ANCILLA, 0, 1, 2, 3)

# Number of CNOTs the reference hardware circuit used after transpiling
REFERENCE_CNOT_COUNT = 77

_INVERSE_KIND = {'H': 'H', 'S': 'Sdg', 'Sdg': 'S', 'X': 'X'}

_FIXED_MATRICES = {
    'H': np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0),
    'S': np.diag([1, 1j]).astype(complex),
    'Sdg': np.diag([1, -1j]).astype(complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
}

_CNOT_TENSOR = np.array([[1, 0, 0, 0],
                         [0, 1, 0, 0],
                         [0, 0, 0, 1],
                         [0, 0, 1, 0]], dtype=complex).reshape(2, 2, 2, 2)


class CircuitError(Exception):
    """Raised for malformed gates or circuits that do not fit their inputs."""
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: Tuple[int, ...]
    theta: Optional[float] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"Unknown gate kind {self.kind!r}")
        expected = 2 if self.kind == 'CNOT' else 1
        if len(self.qubits) != expected:
            raise CircuitError(f"{self.kind} takes {expected} qubit(s), got {self.qubits}")
        if self.kind == 'CNOT' and self.qubits[0] == self.qubits[1]:
            raise CircuitError("CNOT control and target must differ")
        if self.kind in ROTATION_KINDS:
            if self.theta is None or not math.isfinite(self.theta):
                raise CircuitError(f"{self.kind} needs a finite angle")
        elif self.theta is not None:
            raise CircuitError(f"{self.kind} takes no angle")

    def inverse(self) -> 'Gate':
        if self.kind in ROTATION_KINDS:
            return Gate(self.kind, self.qubits, -self.theta)
        if self.kind == 'CNOT':
            return self
        return Gate(_INVERSE_KIND[self.kind], self.qubits)

    def matrix(self) -> np.ndarray:
        """2x2 matrix, or the (2,2,2,2) control-target tensor for CNOT."""
        if self.kind == 'CNOT':
            return _CNOT_TENSOR
        if self.kind == 'Rx':
            c, s = math.cos(self.theta / 2.0), math.sin(self.theta / 2.0)
            return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
        if self.kind == 'Rz':
            half = self.theta / 2.0
            return np.diag([np.exp(-1j * half), np.exp(1j * half)])
        return _FIXED_MATRICES[self.kind]

    def to_line(self) -> str:
        parts = [self.kind.upper()] + [str(q) for q in self.qubits]
        if self.theta is not None:
            parts.append(f"{self.theta:.17g}")
        return ' '.join(parts)


_KIND_BY_NAME = {kind.upper(): kind for kind in GATE_KINDS}


def apply_gate(tensor: np.ndarray, gate: Gate, offset: int = 0, conjugate: bool = False) -> np.ndarray:
    """Apply ``gate`` to the qubit axes of ``tensor`` starting at ``offset``.

    With ``conjugate`` the complex-conjugated gate is applied, which is how the
    bra side of a density matrix transforms.
    """
    m = gate.matrix()
    if conjugate:
        m = m.conj()
    if gate.kind == 'CNOT':
        axes = [offset + q for q in gate.qubits]
        moved = np.tensordot(m, tensor, axes=([2, 3], axes))
        return np.moveaxis(moved, [0, 1], axes)
    axis = offset + gate.qubits[0]
    moved = np.tensordot(m, tensor, axes=([1], [axis]))
    return np.moveaxis(moved, 0, axis)


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: Tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for gate in self.gates:
            if any(q < 0 or q >= self.width for q in gate.qubits):
                raise CircuitError(f"Gate {gate.to_line()} outside width {self.width}")

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == 'CNOT')

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: 'Circuit') -> 'Circuit':
        if self.width != other.width:
            raise CircuitError(f"Cannot join circuits of width {self.width} and {other.width}")
        return Circuit(self.width, self.gates + other.gates)

    def widened(self, width: int) -> 'Circuit':
        if width < self.width:
            raise CircuitError("Cannot shrink a circuit")
        return Circuit(width, self.gates)

    def relabeled(self, mapping: Dict[int, int], width: Optional[int] = None) -> 'Circuit':
        gates = tuple(Gate(g.kind, tuple(mapping.get(q, q) for q in g.qubits), g.theta) for g in self.gates)
        return Circuit(width if width is not None else self.width, gates)

    def inverse(self) -> 'Circuit':
        return Circuit(self.width, tuple(g.inverse() for g in reversed(self.gates)))

    def rotation_angles(self) -> List[float]:
        return [g.theta for g in self.gates if g.kind in ROTATION_KINDS]

    def shape(self) -> List[Tuple[str, Tuple[int, ...]]]:
        """Gate sequence without angles."""
        return [(g.kind, g.qubits) for g in self.gates]

    def unitary(self) -> np.ndarray:
        dim = 1 << self.width
        tensor = np.eye(dim, dtype=complex).reshape((2,) * self.width + (dim,))
        for gate in self.gates:
            tensor = apply_gate(tensor, gate)
        return tensor.reshape(dim, dim)

    def dumps(self) -> str:
        lines = [f"# width: {self.width}"] + [g.to_line() for g in self.gates]
        return '\n'.join(lines) + '\n'

    @classmethod
    def loads(cls, text: str) -> 'Circuit':
        width = None
        gates = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                name, _, value = line[1:].partition(':')
                if name.strip() == 'width':
                    width = int(value)
                continue
            parts = line.split()
            kind = _KIND_BY_NAME.get(parts[0].upper())
            if kind is None:
                raise CircuitError(f"Unknown gate {parts[0]!r}")
            n_qubits = 2 if kind == 'CNOT' else 1
            qubits = tuple(int(p) for p in parts[1:1 + n_qubits])
            theta = float(parts[1 + n_qubits]) if kind in ROTATION_KINDS else None
            gates.append(Gate(kind, qubits, theta))
        if width is None:
            width = 1 + max((q for g in gates for q in g.qubits), default=0)
        return cls(width, tuple(gates))


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-12) -> bool:
    """Entrywise equality of two matrices after removing a global phase."""
    index = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(a[index]) < 1e-300:
        return bool(np.allclose(a, b, atol=atol))
    phase = b[index] / a[index]
    phase /= abs(phase)
    return bool(np.max(np.abs(a * phase - b)) <= atol)


def ground_state_ansatz(theta: float, width: int = SYSTEM_QUBITS) -> Circuit:
    """Fixed ansatz preparing -(cos(phi)(|1010>+|0101>) + sin(phi)(|1001>+|0110>))/sqrt(2), phi = theta/2 + pi/4."""
    half_pi = math.pi / 2.0
    gates = [Gate('X', (q,)) for q in range(SYSTEM_QUBITS)]
    gates += [Gate('Rx', (1,), half_pi), Gate('Sdg', (1,))]
    gates += [Gate('Rx', (2,), theta), Gate('Rx', (2,), half_pi), Gate('Sdg', (2,))]
    gates += [Gate('CNOT', (1, 2)), Gate('CNOT', (2, 3)), Gate('CNOT', (1, 0))]
    return Circuit(width, tuple(gates))


def ansatz_state(theta: float) -> np.ndarray:
    return ground_state_ansatz(theta).unitary()[:, 0]


def ansatz_energy(theta: float, hamiltonian: np.ndarray) -> float:
    psi = ansatz_state(theta)
    return float(np.real(np.vdot(psi, hamiltonian @ psi)))


def ground_energy(U: float, V: float) -> float:
    """-sqrt(4V^2 + (U/4)^2), the two-site ground energy without the constant shift."""
    return -math.sqrt(4.0 * V * V + (U / 4.0) ** 2)


def optimize_ansatz_angle(U: float, V: float, grid_points: int = 64) -> float:
    """Minimize the prepared-state energy over theta in [-pi, pi).

    Raises:
        ValueError: for V = 0, where the ground space is degenerate
    """
    if V == 0:
        raise ValueError("Ansatz angle is undefined for V = 0 (degenerate ground space)")
    hamiltonian = jw_aim_hamiltonian(AimParameters.half_filled(U, V)).to_matrix()
    grid = np.linspace(-math.pi, math.pi, grid_points, endpoint=False)
    energies = [ansatz_energy(x, hamiltonian) for x in grid]
    best = grid[int(np.argmin(energies))]
    step = grid[1] - grid[0]
    result = optimize.minimize_scalar(lambda x: ansatz_energy(x, hamiltonian),
                                      bounds=(best - step, best + step), method='bounded',
                                      options={'xatol': 1e-12})
    theta = (float(result.x) + math.pi) % (2.0 * math.pi) - math.pi
    logger.debug(f"Ansatz angle for U={U} V={V}: theta={theta:.12f} E={result.fun:.12f}")
    return theta


def compile_pauli_exponential(p: PauliTerm, theta: float, width: Optional[int] = None) -> Circuit:
    """Circuit for exp(-i theta p) using a basis change and a CNOT parity ladder.

    The coefficient and sign of ``p`` scale the angle; an identity string gives
    an empty fragment.
    """
    if not p.is_hermitian():
        raise CircuitError(f"Pauli term {p} is not Hermitian")
    n = width if width is not None else p.n
    angle = theta * p.coeff * (1.0 if p.phase == 0 else -1.0)
    support = p.support
    if not support:
        return Circuit(n)

    label = p.label
    into: List[Gate] = []
    for q in support:
        if label[q] == 'X':
            into.append(Gate('H', (q,)))
        elif label[q] == 'Y':
            into.append(Gate('Sdg', (q,)))
            into.append(Gate('H', (q,)))
    ladder = [Gate('CNOT', (a, b)) for a, b in zip(support, support[1:])]
    core = [Gate('Rz', (support[-1],), 2.0 * angle)]
    gates = into + ladder + core + list(reversed(ladder)) + [g.inverse() for g in reversed(into)]
    return Circuit(n, tuple(gates))


def _controlled_observable(observable: str, control: int, target: int) -> List[Gate]:
    if observable == 'X':
        return [Gate('CNOT', (control, target))]
    if observable == 'Y':
        return [Gate('Sdg', (target,)), Gate('CNOT', (control, target)), Gate('S', (target,))]
    raise CircuitError(f"Unsupported observable {observable!r}")


def _exponential_block(strings: Iterable[PauliTerm], angles: Iterable[float], width: int) -> Circuit:
    block = Circuit(width)
    for p, angle in zip(strings, angles):
        block = block + compile_pauli_exponential(p, angle, width)
    return block


def evolution_block(solution: CartanSolution, t: float, width: int = SYSTEM_QUBITS + 1,
                    fold_k0: bool = True) -> Circuit:
    """exp(-iHt) as K exp(-ith) K^dag, or K1 exp(-ith) K1^dag when k0 is folded into preparation."""
    d = solution.decomposition
    kappa = dict(zip(d.k.keys(), solution.kappa))
    outer = d.k1 if fold_k0 else d.k
    left = _exponential_block(outer, [kappa[p.key] for p in outer], width)
    middle = _exponential_block(d.h, [t * eta for eta in solution.eta], width)
    right = _exponential_block(outer, [-kappa[p.key] for p in outer], width)
    return left + middle + right


def greens_function_circuit(solution: CartanSolution, t: float, theta_gs: float,
                            observables: Tuple[str, str] = ('X', 'X')) -> Circuit:
    """Hadamard test whose ancilla <Z> is Re<B(t) A> for (A, B) = observables on qubit 0.

    For (X, X) the k0 factor commutes with X0 and is applied once to the
    prepared state; only the exp(-ith) angles depend on t.
    """
    if solution.n != SYSTEM_QUBITS:
        raise CircuitError(f"Green's-function circuit needs a {SYSTEM_QUBITS}-qubit solution, got {solution.n}")
    first, second = observables
    width = SYSTEM_QUBITS + 1
    fold = (first, second) == ('X', 'X')
    circuit = ground_state_ansatz(theta_gs, width)
    if fold:
        d = solution.decomposition
        kappa = dict(zip(d.k.keys(), solution.kappa))
        circuit = circuit + _exponential_block(d.k0, [kappa[p.key] for p in d.k0], width)
    circuit = circuit + Circuit(width, (Gate('H', (ANCILLA,)),))
    circuit = circuit + Circuit(width, tuple(_controlled_observable(first, ANCILLA, 0)))
    circuit = circuit + evolution_block(solution, t, width, fold_k0=fold)
    circuit = circuit + Circuit(width, tuple(_controlled_observable(second, ANCILLA, 0)))
    circuit = circuit + Circuit(width, (Gate('H', (ANCILLA,)),))
    return circuit


def _wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]; a 2pi shift of Rx/Rz only changes the global phase."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def _next_on_wires(gates: Sequence[Optional[Gate]], index: int) -> Optional[int]:
    wires = set(gates[index].qubits)
    for j in range(index + 1, len(gates)):
        gate = gates[j]
        if gate is not None and wires & set(gate.qubits):
            return j
    return None


def _peephole_pass(gates: List[Optional[Gate]]) -> bool:
    changed = False
    for i in range(len(gates)):
        gate = gates[i]
        if gate is None:
            continue
        if gate.kind in ROTATION_KINDS and abs(_wrap_angle(gate.theta)) < 1e-12:
            gates[i] = None
            changed = True
            continue
        j = _next_on_wires(gates, i)
        if j is None:
            continue
        other = gates[j]
        if other.qubits != gate.qubits:
            continue
        if gate.kind in ROTATION_KINDS and other.kind == gate.kind:
            gates[i] = None
            gates[j] = Gate(gate.kind, gate.qubits, _wrap_angle(gate.theta + other.theta))
            changed = True
        elif gate.kind not in ROTATION_KINDS and other == gate.inverse():
            gates[i] = None
            gates[j] = None
            changed = True
    return changed


def optimize_circuit(c: Circuit) -> Circuit:
    """Cancel self-inverse pairs, merge same-axis rotations and drop identity rotations.

    Two gates interact only when no gate between them touches their qubits.
    The result equals the input up to a global phase and never has more CNOTs.
    """
    gates: List[Optional[Gate]] = list(c.gates)
    while _peephole_pass(gates):
        gates = [g for g in gates if g is not None]
    result = Circuit(c.width, tuple(g for g in gates if g is not None))
    logger.debug(f"Optimized circuit: {len(c)} -> {len(result)} gates, "
                 f"{c.cnot_count} -> {result.cnot_count} CNOTs")
    return result


def _swap(a: int, b: int) -> List[Gate]:
    return [Gate('CNOT', (a, b)), Gate('CNOT', (b, a)), Gate('CNOT', (a, b))]


def route_linear(c: Circuit, chain: Sequence[int] = LINEAR_CHAIN) -> Circuit:
    """Make every CNOT nearest-neighbour on ``chain`` by SWAPping the control over and back."""
    if sorted(chain) != list(range(c.width)):
        raise CircuitError(f"Chain {tuple(chain)} does not cover the {c.width} circuit qubits")
    position = {q: i for i, q in enumerate(chain)}
    routed: List[Gate] = []
    for gate in c.gates:
        if gate.kind != 'CNOT':
            routed.append(gate)
            continue
        control, target = gate.qubits
        step = 1 if position[target] > position[control] else -1
        path = [chain[i] for i in range(position[control], position[target], step)]
        swaps: List[Gate] = []
        for a, b in zip(path, path[1:]):
            swaps.extend(_swap(a, b))
        # After the swaps the control state sits on the last qubit of the path
        routed.extend(swaps)
        routed.append(Gate('CNOT', (path[-1], target)))
        routed.extend(reversed(swaps))
    return Circuit(c.width, tuple(routed))


def is_nearest_neighbour(c: Circuit, chain: Sequence[int] = LINEAR_CHAIN) -> bool:
    position = {q: i for i, q in enumerate(chain)}
    return all(abs(position[g.qubits[0]] - position[g.qubits[1]]) == 1
               for g in c.gates if g.kind == 'CNOT')


@dataclass(frozen=True)
class CnotReport:
    all_to_all: int
    optimized: int
    linear: int
    reference: int = REFERENCE_CNOT_COUNT


def cnot_report(solution: CartanSolution, theta_gs: float, t: float = 1.0,
                chain: Sequence[int] = LINEAR_CHAIN) -> CnotReport:
    """CNOT counts of the Green's-function circuit before and after optimization and routing."""
    raw = greens_function_circuit(solution, t, theta_gs)
    optimized = optimize_circuit(raw)
    linear = optimize_circuit(route_linear(optimized, chain))
    report = CnotReport(raw.cnot_count, optimized.cnot_count, linear.cnot_count)
    logger.info(f"Green's-function CNOTs: raw={report.all_to_all} optimized={report.optimized} "
                f"linear={report.linear} (reference {report.reference})")
    return report
