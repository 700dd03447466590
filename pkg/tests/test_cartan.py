#!/usr/bin/env python3
"""
Tests for the KHK solver: adjoint action, gradient, residual and the
fast-forwarded evolution against the exact matrix exponential
"""
import sys
from pathlib import Path

import numpy as np
from scipy import linalg

# Add the src directory to Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from cartan_dmft.cartan import (RESIDUAL_TOLERANCE, CartanSolution, adjoint_rotate, cartan_vector, derive_seed,
                                khk_error, objective, objective_and_gradient, same_solution, solve_randomized)
from cartan_dmft.lie import decompose
from cartan_dmft.pauli import AimParameters, PauliSum, PauliTerm, jw_aim_hamiltonian


def _setup(U=2.0, V=0.944):
    h = jw_aim_hamiltonian(AimParameters.half_filled(U, V))
    return h, decompose(h)


def test_adjoint_rotate_matches_dense():
    """exp(i theta p) s exp(-i theta p) computed symbolically equals the dense product"""
    print("Testing adjoint rotation...")
    s = PauliSum.parse("0.5*XXII + 0.3*ZIZI - 0.2*IIYY")
    p = PauliTerm.from_label('YXZI')
    theta = 0.37
    u = linalg.expm(1j * theta * p.to_matrix())
    dense = u @ s.to_matrix() @ u.conj().T
    assert np.allclose(adjoint_rotate(theta, p, s).to_matrix(), dense, atol=1e-12), "Rotation mismatch"
    print("   ✓ Symbolic rotation matches expm")


def test_gradient_matches_finite_differences():
    """Analytic gradient agrees with central differences"""
    print("Testing objective gradient...")
    h, d = _setup()
    v = cartan_vector(d.h)
    rng = np.random.default_rng(3)
    kappa = rng.uniform(-np.pi, np.pi, size=len(d.k))
    value, grad = objective_and_gradient(kappa, d.k, v, h)
    assert abs(value - objective(kappa, d.k, v, h)) < 1e-12
    step = 1e-6
    for j in range(len(kappa)):
        e = np.zeros_like(kappa)
        e[j] = step
        numeric = (objective(kappa + e, d.k, v, h) - objective(kappa - e, d.k, v, h)) / (2 * step)
        assert abs(numeric - grad[j]) < 1e-6, f"Component {j}: {numeric} vs {grad[j]}"
    print("   ✓ Gradient matches")


def test_cartan_vector_normalized():
    """v has unit norm and strictly increasing weights"""
    print("Testing the Cartan vector...")
    _, d = _setup()
    v = cartan_vector(d.h)
    assert abs(v.norm() - 1.0) < 1e-12
    weights = [v.coefficient(e.key) for e in d.h]
    assert all(a < b for a, b in zip(weights, weights[1:])), "Weights not increasing"
    print("   ✓ Unit norm, generic weights")


def test_solution_reproduces_evolution():
    """K exp(-ith) K^dag equals exp(-itH) for several times"""
    print("Testing KHK evolution...")
    h, d = _setup()
    solution = solve_randomized(h, d, 1, 11)[0]
    assert solution.residual < 1e-8, f"Residual {solution.residual}"
    for t in (0.5, 1.0, 5.0, 20.0):
        error = khk_error(h, solution, t)
        assert error < 1e-7, f"t={t}: error {error}"
    print(f"   ✓ residual {solution.residual:.2e}")


def test_h_spectrum_matches_hamiltonian():
    """The h part carries the spectrum of H"""
    print("Testing spectrum of h...")
    h, d = _setup(U=4.0, V=0.6)
    solution = solve_randomized(h, d, 1, 5)[0]
    expected = np.sort(np.linalg.eigvalsh(h.to_matrix()))
    got = np.sort(np.linalg.eigvalsh(solution.h_operator().to_matrix()))
    assert np.allclose(expected, got, atol=1e-8), "Spectra differ"
    print("   ✓ Same eigenvalues")


def test_k_unitary_is_unitary():
    print("Testing K unitarity...")
    h, d = _setup()
    k = solve_randomized(h, d, 1, 2)[0].k_unitary()
    assert np.allclose(k @ k.conj().T, np.eye(16), atol=1e-12)
    print("   ✓ K K^dag = 1")


def test_randomized_solutions_are_seeded():
    """Same master seed gives the same solutions; each solution is valid"""
    print("Testing randomized solves...")
    h, d = _setup()
    first = solve_randomized(h, d, 2, seed=42)
    second = solve_randomized(h, d, 2, seed=42)
    assert len(first) == 2
    assert [s.kappa for s in first] == [s.kappa for s in second], "Solutions not reproducible"
    assert first[0].seed != first[1].seed
    for s in first:
        assert khk_error(h, s, 3.0) < 1e-7
    print("   ✓ Reproducible and valid")


def test_derive_seed_deterministic():
    print("Testing seed derivation...")
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
    assert 0 <= derive_seed(0) < 2 ** 32
    print("   ✓ Deterministic 32-bit seeds")


def test_solution_text_format():
    """dumps/loads keep every coefficient"""
    print("Testing solution text format...")
    h, d = _setup()
    solution = solve_randomized(h, d, 1, 9)[0]
    again = CartanSolution.loads(solution.dumps(), d)
    assert again.kappa == solution.kappa and again.eta == solution.eta
    assert again.seed == solution.seed
    print("   ✓ 17-digit text preserves values")


def test_residual_within_tolerance_over_many_seeds():
    """Every accepted solve meets 1e-10 |H| across many seeds and model points"""
    print("Testing residual tolerance over many seeds...")
    points = [(4.0, 1.0), (1.0, 0.5), (8.0, 0.116), (2.0, 0.944), (3.0, 0.7), (7.0, 0.2)]
    for U, V in points:
        h, d = _setup(U, V)
        limit = RESIDUAL_TOLERANCE * max(h.norm(), 1.0)
        for seed in range(10):
            solutions = solve_randomized(h, d, 2, seed)
            assert len(solutions) == 2, f"U={U} V={V} seed={seed}: {len(solutions)} solutions"
            for s in solutions:
                assert s.residual <= limit, f"U={U} V={V} seed={seed}: residual {s.residual:.3e} > {limit:.3e}"
    print(f"   ✓ {len(points) * 10} randomized solves within tolerance")


def test_evolution_error_flat_in_time():
    """The KHK error stays at round-off from t = 0.1 to t = 100"""
    print("Testing KHK error over long times...")
    for U, V in ((2.0, 0.944), (4.0, 0.6), (8.0, 0.116)):
        h, d = _setup(U, V)
        solution = solve_randomized(h, d, 1, 17)[0]
        errors = [khk_error(h, solution, t) for t in (0.1, 1.0, 10.0, 100.0)]
        assert max(errors) < 1e-8, f"U={U}: errors {errors}"
        # Less than 2x spread once errors are above the 1e-10 round-off floor
        floor = max(min(errors), 1e-10)
        assert max(errors) < 2.0 * floor, f"U={U}: error grows with t {errors}"
    print("   ✓ Error flat in t")


def test_randomized_solutions_are_distinct():
    """Solutions from one master seed differ as K unitaries"""
    print("Testing distinct randomized solutions...")
    h, d = _setup()
    first, second = solve_randomized(h, d, 2, seed=42)
    assert not same_solution(first, second), "Duplicate solutions returned"
    assert same_solution(first, first)
    shifted = CartanSolution(d, tuple(k + np.pi for k in first.kappa), first.eta, first.residual,
                             first.f_value, first.seed)
    assert same_solution(first, shifted), "A shift by pi gives the same K up to sign"
    print("   ✓ Distinct modulo pi")


ALL_TESTS = [test_adjoint_rotate_matches_dense, test_gradient_matches_finite_differences,
             test_cartan_vector_normalized, test_solution_reproduces_evolution,
             test_h_spectrum_matches_hamiltonian, test_k_unitary_is_unitary,
             test_randomized_solutions_are_seeded, test_derive_seed_deterministic, test_solution_text_format,
             test_residual_within_tolerance_over_many_seeds, test_evolution_error_flat_in_time,
             test_randomized_solutions_are_distinct]


if __name__ == '__main__':
    failed = 0
    for test in ALL_TESTS:
        try:
            test()
        except AssertionError as e:
            print(f"   ✗ {test.__name__}: {e}")
            failed += 1
    print(f"\n{len(ALL_TESTS) - failed}/{len(ALL_TESTS)} tests passed")
    sys.exit(0 if failed == 0 else 1)
