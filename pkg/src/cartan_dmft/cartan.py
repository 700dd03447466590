"""
Numerical KHK factorization of the Hamiltonian evolution.

For K = prod_j exp(i kappa_j k_j) the objective f(kappa) = <K v K^dag, H> is
extremized with v = sum_j gamma^j h_j. At an extremum K^dag H K lies in the
Cartan subalgebra and exp(-itH) = K exp(-it sum_j eta_j h_j) K^dag for all t.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from .lie import AlgebraBasis, CartanDecomposition
from .pauli import Key, PauliSum, PauliTerm, product_phase, strings_commute, trace_inner

logger = logging.getLogger(__name__)

GAMMA = math.pi

# Relative residual tolerance: |K^dag H K outside h| <= RESIDUAL_TOLERANCE * |H|
RESIDUAL_TOLERANCE = 1e-10

NEWTON_STEPS = 20

# Two solutions whose K coefficients agree modulo pi within this are the same
DUPLICATE_TOLERANCE = 1e-6


class CartanSolveError(Exception):
    """Raised when no valid KHK factorization is reached from a starting point."""
    pass


def _rotation_sign(px: int, pz: int, x: int, z: int) -> int:
    """Real sign s with i * (p q) = s * r for anticommuting strings p, q."""
    return 1 if (product_phase(px, pz, x, z) + 1) % 4 == 0 else -1


def adjoint_rotate(theta: float, p: PauliTerm, s: PauliSum) -> PauliSum:
    """Exact conjugation exp(i theta p) s exp(-i theta p) for a unit string p."""
    if theta == 0.0:
        return s
    c2, s2 = math.cos(2.0 * theta), math.sin(2.0 * theta)
    px, pz = p.x_bits, p.z_bits
    out: Dict[Key, float] = {}
    for (x, z), c in s.items():
        if strings_commute(px, pz, x, z):
            out[(x, z)] = out.get((x, z), 0.0) + c
            continue
        out[(x, z)] = out.get((x, z), 0.0) + c * c2
        target = (x ^ px, z ^ pz)
        out[target] = out.get(target, 0.0) + c * s2 * _rotation_sign(px, pz, x, z)
    return PauliSum.from_map(s.n, out)


def adjoint_derivative(p: PauliTerm, s: PauliSum) -> PauliSum:
    """i[p, s], the derivative of adjoint_rotate at theta = 0."""
    px, pz = p.x_bits, p.z_bits
    out: Dict[Key, float] = {}
    for (x, z), c in s.items():
        if strings_commute(px, pz, x, z):
            continue
        target = (x ^ px, z ^ pz)
        out[target] = out.get(target, 0.0) + 2.0 * c * _rotation_sign(px, pz, x, z)
    return PauliSum.from_map(s.n, out)


def conjugate(kappa: Sequence[float], k_basis: AlgebraBasis, s: PauliSum, inverse: bool = False) -> PauliSum:
    """K s K^dag, or K^dag s K when ``inverse`` is set."""
    if inverse:
        for theta, p in zip(kappa, k_basis):
            s = adjoint_rotate(-theta, p, s)
    else:
        for theta, p in reversed(list(zip(kappa, k_basis))):
            s = adjoint_rotate(theta, p, s)
    return s


def cartan_vector(h_basis: AlgebraBasis, gamma: float = GAMMA) -> PauliSum:
    """v = sum_j gamma^j h_j, rescaled to unit norm."""
    powers = np.array([j * math.log(gamma) for j in range(1, len(h_basis) + 1)])
    # Work in log space; only ratios matter once v is normalized
    weights = np.exp(powers - powers.max())
    weights /= np.linalg.norm(weights)
    return PauliSum(h_basis.n, [PauliTerm(e.n, e.x_bits, e.z_bits, 0, float(w))
                                for e, w in zip(h_basis, weights)])


def _check_kappa(kappa: Sequence[float], k_basis: AlgebraBasis) -> None:
    if len(kappa) != len(k_basis):
        raise ValueError(f"Expected {len(k_basis)} coefficients, got {len(kappa)}")


def objective(kappa: Sequence[float], k_basis: AlgebraBasis, v: PauliSum, hamiltonian: PauliSum) -> float:
    """f(kappa) = <K v K^dag, H>."""
    _check_kappa(kappa, k_basis)
    return trace_inner(conjugate(kappa, k_basis, v), hamiltonian)


def objective_and_gradient(kappa: Sequence[float], k_basis: AlgebraBasis, v: PauliSum,
                           hamiltonian: PauliSum) -> Tuple[float, np.ndarray]:
    """Objective plus its analytic gradient from one forward and one backward sweep."""
    _check_kappa(kappa, k_basis)
    elements = k_basis.elements
    count = len(elements)

    # states[j] = Ad_j ... Ad_{count-1} v
    states: List[PauliSum] = [v] * (count + 1)
    for j in reversed(range(count)):
        states[j] = adjoint_rotate(kappa[j], elements[j], states[j + 1])
    value = trace_inner(states[0], hamiltonian)

    gradient = np.zeros(count)
    pulled = hamiltonian
    for j in range(count):
        gradient[j] = trace_inner(adjoint_derivative(elements[j], states[j]), pulled)
        pulled = adjoint_rotate(-kappa[j], elements[j], pulled)
    return value, gradient


@dataclass(frozen=True)
class CartanSolution:
    """Solved coefficients of one KHK factorization."""

    decomposition: CartanDecomposition
    kappa: Tuple[float, ...]
    eta: Tuple[float, ...]
    residual: float
    f_value: float
    seed: Optional[int] = None

    @property
    def n(self) -> int:
        return self.decomposition.n

    def h_operator(self) -> PauliSum:
        """sum_j eta_j h_j."""
        h = self.decomposition.h
        return PauliSum(h.n, [PauliTerm(e.n, e.x_bits, e.z_bits, 0, c) for e, c in zip(h, self.eta)])

    def k_unitary(self) -> np.ndarray:
        dim = 1 << self.n
        result = np.eye(dim, dtype=complex)
        for theta, p in zip(self.kappa, self.decomposition.k):
            result = result @ (math.cos(theta) * np.eye(dim) + 1j * math.sin(theta) * p.to_matrix())
        return result

    def h_unitary(self, t: float) -> np.ndarray:
        """exp(-i t sum_j eta_j h_j) from the commuting factors."""
        dim = 1 << self.n
        result = np.eye(dim, dtype=complex)
        for eta, p in zip(self.eta, self.decomposition.h):
            angle = t * eta
            result = result @ (math.cos(angle) * np.eye(dim) - 1j * math.sin(angle) * p.to_matrix())
        return result

    def evolution_unitary(self, t: float) -> np.ndarray:
        """K exp(-ith) K^dag."""
        k = self.k_unitary()
        return k @ self.h_unitary(t) @ k.conj().T

    def dumps(self) -> str:
        """Structured text with 17 significant digits per coefficient."""
        lines = [
            "# cartan solution",
            f"# qubits: {self.n}",
            f"# seed: {self.seed if self.seed is not None else 'none'}",
            f"# residual: {self.residual:.17g}",
            f"# f_value: {self.f_value:.17g}",
        ]
        for p, value in zip(self.decomposition.k, self.kappa):
            lines.append(f"kappa {p.label} {value:.17g}")
        for p, value in zip(self.decomposition.h, self.eta):
            lines.append(f"eta {p.label} {value:.17g}")
        return '\n'.join(lines) + '\n'

    @classmethod
    def loads(cls, text: str, decomposition: CartanDecomposition) -> 'CartanSolution':
        header: Dict[str, str] = {}
        values: Dict[str, List[Tuple[str, float]]] = {'kappa': [], 'eta': []}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                name, sep, value = line[1:].partition(':')
                if sep:
                    header[name.strip()] = value.strip()
                continue
            kind, label, value = line.split()
            if kind not in values:
                raise ValueError(f"Unknown coefficient kind {kind!r}")
            values[kind].append((label, float(value)))

        if [label for label, _ in values['kappa']] != decomposition.k.labels():
            raise ValueError("Stored k strings do not match the decomposition")
        if [label for label, _ in values['eta']] != decomposition.h.labels():
            raise ValueError("Stored h strings do not match the decomposition")
        seed_text = header.get('seed', 'none')
        return cls(
            decomposition=decomposition,
            kappa=tuple(v for _, v in values['kappa']),
            eta=tuple(v for _, v in values['eta']),
            residual=float(header.get('residual', 'nan')),
            f_value=float(header.get('f_value', 'nan')),
            seed=None if seed_text == 'none' else int(seed_text),
        )


def extract_h(kappa: Sequence[float], decomposition: CartanDecomposition,
              hamiltonian: PauliSum) -> Tuple[Tuple[float, ...], float]:
    """Project K^dag H K onto h; return (eta, norm of the remainder)."""
    rotated = conjugate(kappa, decomposition.k, hamiltonian, inverse=True)
    h_keys = decomposition.h.keys()
    eta = tuple(rotated.coefficient(key) for key in h_keys)
    inside = set(h_keys)
    residual = math.sqrt(sum(c * c for key, c in rotated.items() if key not in inside))
    return eta, residual


def _hessian(grad: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference Hessian from an analytic gradient, symmetrized."""
    n = len(x)
    hess = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        hess[:, j] = (grad(x + e) - grad(x - e)) / (2.0 * step)
    return 0.5 * (hess + hess.T)


def _newton_polish(fun, kappa: np.ndarray, f_value: float, decomposition: CartanDecomposition,
                   hamiltonian: PauliSum, limit: float, max_steps: int = NEWTON_STEPS) -> Tuple[np.ndarray, float]:
    """Refine a quasi-Newton endpoint until the residual meets ``limit``.

    A step (or a halved step) is taken only when it lowers the residual, so
    the returned point is never worse than the input.
    """
    residual = extract_h(kappa, decomposition, hamiltonian)[1]
    for step in range(max_steps):
        if residual <= limit:
            break
        g = fun(kappa)[1]
        hess = _hessian(lambda x: fun(x)[1], kappa)
        delta = np.linalg.lstsq(hess, -g, rcond=1e-8)[0]
        for scale in (1.0, 0.5, 0.25):
            trial = kappa + scale * delta
            trial_residual = extract_h(trial, decomposition, hamiltonian)[1]
            if trial_residual < residual:
                kappa, residual = trial, trial_residual
                f_value = float(fun(kappa)[0])
                break
        else:
            logger.debug(f"Newton polish stalled at residual {residual:.3e} after {step} steps")
            break
    return kappa, f_value


def solve(hamiltonian: PauliSum, decomposition: CartanDecomposition, seed: int,
          gtol: float = 1e-10, maxiter: int = 10000, tolerance: Optional[float] = None) -> CartanSolution:
    """Locate a local extremum of the Cartan objective from a seeded random start.

    Args:
        hamiltonian: Hamiltonian whose strings generated ``decomposition``
        decomposition: Output of ``lie.decompose``
        seed: Seed for the uniform [-pi, pi) starting coefficients
        gtol: Gradient-norm tolerance of the quasi-Newton search
        maxiter: Iteration cap of the quasi-Newton search
        tolerance: Allowed residual; defaults to 1e-10 * |H|

    Returns:
        CartanSolution whose residual passed the tolerance

    Raises:
        CartanSolveError: when the search stalls or lands on a spurious extremum
    """
    k_basis = decomposition.k
    limit = tolerance if tolerance is not None else RESIDUAL_TOLERANCE * max(hamiltonian.norm(), 1.0)
    rng = np.random.default_rng(seed)
    start = rng.uniform(-math.pi, math.pi, size=len(k_basis))
    v = cartan_vector(decomposition.h)

    if len(k_basis) == 0:
        kappa = np.zeros(0)
        f_value = trace_inner(v, hamiltonian)
    else:
        def fun(x):
            return objective_and_gradient(x, k_basis, v, hamiltonian)

        result = optimize.minimize(fun, start, jac=True, method='BFGS',
                                   options={'gtol': gtol, 'maxiter': maxiter})
        if result.nit >= maxiter:
            raise CartanSolveError(f"Optimizer hit {maxiter} iterations (seed {seed})")
        kappa, f_value = result.x, float(result.fun)

        # Newton steps on the analytic gradient, kept while the residual falls
        kappa, f_value = _newton_polish(fun, kappa, f_value, decomposition, hamiltonian, limit)

        grad_norm = float(np.linalg.norm(fun(kappa)[1]))
        if grad_norm > gtol:
            logger.warning(f"Gradient norm {grad_norm:.3e} above {gtol:.1e} for seed {seed}")

    eta, residual = extract_h(kappa, decomposition, hamiltonian)
    logger.debug(f"Cartan solve seed={seed}: f={f_value:.12f} residual={residual:.3e}")
    if residual > limit:
        raise CartanSolveError(f"Residual {residual:.3e} above tolerance {limit:.3e} (seed {seed})")

    return CartanSolution(decomposition, tuple(float(x) for x in kappa), tuple(float(e) for e in eta),
                          residual, float(f_value), seed)


def derive_seed(*entropy: int) -> int:
    """Deterministic 32-bit child seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def same_solution(a: CartanSolution, b: CartanSolution, tol: float = DUPLICATE_TOLERANCE) -> bool:
    """True when the K coefficients agree modulo pi (equal K up to sign)."""
    diff = np.asarray(a.kappa) - np.asarray(b.kappa)
    wrapped = np.mod(diff + math.pi / 2.0, math.pi) - math.pi / 2.0
    return bool(np.max(np.abs(wrapped), initial=0.0) <= tol)


def solve_randomized(hamiltonian: PauliSum, decomposition: CartanDecomposition, count: int,
                     seed: int, max_attempts: int = 5) -> List[CartanSolution]:
    """``count`` independently seeded solutions, distinct where the starts allow.

    A start that fails or lands on an already found solution is retried
    with the next derived seed. If every attempt repeats an earlier
    solution the first repeat is kept and a warning is logged.
    """
    solutions: List[CartanSolution] = []
    for index in range(count):
        repeat: Optional[CartanSolution] = None
        for attempt in range(max_attempts):
            child = derive_seed(seed, index, attempt)
            try:
                candidate = solve(hamiltonian, decomposition, child)
            except CartanSolveError as e:
                logger.warning(f"Retrying Cartan solve {index}: {e}")
                continue
            if any(same_solution(candidate, other) for other in solutions):
                logger.info(f"Cartan solve {index} repeated an earlier solution (seed {child}), retrying")
                repeat = repeat or candidate
                continue
            solutions.append(candidate)
            break
        else:
            if repeat is None:
                raise CartanSolveError(f"No valid solution for start {index} after {max_attempts} attempts")
            logger.warning(f"Cartan solve {index} found no new solution; keeping seed {repeat.seed}")
            solutions.append(repeat)
    return solutions


def khk_error(hamiltonian: PauliSum, solution: CartanSolution, t: float) -> float:
    """Frobenius distance between exp(-itH) and the KHK reconstruction."""
    exact = linalg.expm(-1j * t * hamiltonian.to_matrix())
    return float(np.linalg.norm(exact - solution.evolution_unitary(t)))
