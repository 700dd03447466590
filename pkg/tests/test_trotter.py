#!/usr/bin/env python3
"""
Tests for the Trotter comparator: fragments, CNOT costs, the error fit and
the fidelity model against the fixed-depth circuit
"""
import sys
from pathlib import Path

from scipy import linalg

# Add the src directory to Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from cartan_dmft.circuit import ANCILLA, equal_up_to_phase, is_nearest_neighbour
from cartan_dmft.lehmann import greens_function
from cartan_dmft.pauli import PauliSum
from cartan_dmft.sim import expectation_Z, run
from cartan_dmft.trotter import (ALL_TO_ALL, LINEAR, FidelityModel, best_steps, cartan_reference,
                                 fidelity_landscape, fit_error_coefficient, select_norm_convention, total_fidelity,
                                 trotter2_circuit, trotter_cnot_cost, trotter_error, trotter_evolution, xx_plus_yy_fragment)
from cartan_dmft.validation import ValidationError

U, V = 2.0, 0.94


def test_fragment_is_exact():
    """The two-CNOT fragment equals exp(-i theta (XX + YY))"""
    print("Testing the XX+YY fragment...")
    generator = PauliSum.parse("1.0*XX + 1.0*YY").to_matrix()
    for theta in (0.0, 0.23, 1.4, -0.8):
        expected = linalg.expm(-1j * theta * generator)
        got = xx_plus_yy_fragment(0, 1, theta, 2).unitary()
        assert equal_up_to_phase(got, expected, atol=1e-12), f"theta={theta}"
    print("   ✓ Fragment exact")


def test_cnot_counts():
    """6r + 2 CNOTs all-to-all, 6r + 11 on the linear chain"""
    print("Testing CNOT counts...")
    for r in (1, 4, 17):
        all_to_all = trotter2_circuit(U, V, 2.0, r, ALL_TO_ALL)
        linear = trotter2_circuit(U, V, 2.0, r, LINEAR)
        assert all_to_all.cnot_count == trotter_cnot_cost(r, ALL_TO_ALL) == 6 * r + 2
        assert linear.cnot_count == trotter_cnot_cost(r, LINEAR) == 6 * r + 11, \
            f"r={r}: {linear.cnot_count} CNOTs"
        assert is_nearest_neighbour(linear)
    print("   ✓ Counts match")


def test_linear_circuit_measures_correlator():
    """With many steps the linear Hadamard test reproduces Re<X0(t) X0>"""
    print("Testing the linear Trotter circuit...")
    t = 1.0
    value = expectation_Z(run(trotter2_circuit(U, V, t, 50, LINEAR)), ANCILLA)
    expected = greens_function(U, V, [t])[0]
    assert abs(value - expected) < 1e-3, f"{value} vs {expected}"
    print(f"   ✓ {value:.5f} vs exact {expected:.5f}")


def test_error_scaling():
    """Error vanishes at t = 0 and falls about fourfold when r doubles"""
    print("Testing Trotter error scaling...")
    assert trotter_error(U, V, 0.0, 4) < 1e-12
    e1, e2 = trotter_error(U, V, 2.0, 16), trotter_error(U, V, 2.0, 32)
    ratio = e2 / e1
    assert 0.2 < ratio < 0.3, f"Ratio {ratio}"
    assert abs(trotter_error(U, V, 2.0, 16, normalized=True) - e1 / 4.0) < 1e-12
    print(f"   ✓ ratio {ratio:.3f}")


def test_norm_convention_selected():
    """The unnormalized Frobenius fit reproduces 0.152 within 10%"""
    print("Testing the error fit...")
    chosen, fits = select_norm_convention(U, V)
    assert not chosen.normalized
    assert 0.137 <= chosen.coefficient <= 0.167, f"c = {chosen.coefficient}"
    assert fits[True].coefficient < fits[False].coefficient
    print(f"   ✓ c = {chosen.coefficient:.4f}")


def test_fit_stable_under_grid_refinement():
    """Halving the time step and adding step counts moves c by under 5%"""
    print("Testing fit stability under grid refinement...")
    coarse = fit_error_coefficient(U, V)
    fine = fit_error_coefficient(U, V, [1.0 + 0.5 * i for i in range(15)], (4, 8, 16, 24, 32, 40, 48, 56, 64))
    assert fine.points > coarse.points
    assert abs(fine.coefficient - coarse.coefficient) < 0.05 * coarse.coefficient, \
        f"{coarse.coefficient:.4f} -> {fine.coefficient:.4f}"
    assert 0.137 <= fine.coefficient <= 0.167, f"refined c = {fine.coefficient}"
    print(f"   ✓ c = {coarse.coefficient:.4f} coarse, {fine.coefficient:.4f} refined")


def test_fit_skips_early_and_coarse_points():
    """Points with short times or large steps stay out of the fit"""
    print("Testing the fit window...")
    try:
        fit_error_coefficient(U, V, [1.0, 2.0, 8.0], (4, 8))
        assert False, "Expected ValueError for a grid with no asymptotic point"
    except ValueError:
        pass
    fit = fit_error_coefficient(U, V, [2.0, 8.0], (16, 64))
    assert fit.points == 1, f"{fit.points} points"
    print("   ✓ Only late, fine-step points fitted")


def test_cartan_reference():
    print("Testing the fixed-depth reference...")
    assert abs(cartan_reference(0.9921) - 0.543) < 1e-3
    assert cartan_reference(1.0) == 1.0
    print(f"   ✓ 0.9921^77 = {cartan_reference(0.9921):.4f}")


def test_best_steps_at_target_time():
    """At t = 8 the best Trotter circuit stays below the fixed-depth circuit"""
    print("Testing optimal step count...")
    point = best_steps(0.152, 8.0, 0.9921)
    assert point.r_opt == 17, f"r_opt = {point.r_opt}"
    assert abs(point.f_max - 0.298) < 0.002, f"F_max = {point.f_max}"
    assert point.f_max < cartan_reference(0.9921)
    for r in (16, 18):
        assert total_fidelity(0.152, 8.0, r, 0.9921) <= point.f_max
    print(f"   ✓ F_max = {point.f_max:.4f} at r = {point.r_opt}")


def test_best_fidelity_non_increasing_in_time():
    """The max-over-r curve never rises with t"""
    print("Testing the max-over-r curve...")
    times = [0.5 * i for i in range(1, 33)]
    curve = fidelity_landscape(U, V, times, [1, 8, 32], coefficient=0.152).curve
    values = [point.f_max for point in curve]
    for (t0, a), (t1, b) in zip(zip(times, values), zip(times[1:], values[1:])):
        assert b <= a + 1e-12, f"F_max rises from {a:.6f} at t={t0} to {b:.6f} at t={t1}"
    print(f"   ✓ F_max falls from {values[0]:.4f} to {values[-1]:.4f}")


def test_fidelity_model():
    print("Testing the fidelity model...")
    model = FidelityModel(0.99, 10, 0.5)
    assert abs(model.f_runtime - 0.99 ** 10) < 1e-15
    assert abs(model.f_total - 0.5 * 0.99 ** 10) < 1e-15
    try:
        FidelityModel(1.2, 10, 0.5)
        assert False, "Expected ValidationError"
    except ValidationError:
        pass
    print("   ✓ F_total = F_alg F_cnot^n")


def test_landscape_shape():
    print("Testing the landscape...")
    landscape = fidelity_landscape(U, V, [1.0, 8.0], [1, 8, 32], coefficient=0.152)
    assert len(landscape.rows) == 6 and len(landscape.curve) == 2
    assert all(0.0 <= row.f_total <= 1.0 for row in landscape.rows)
    first = [row for row in landscape.rows if row.t == 8.0 and row.r == 1][0]
    assert first.f_trotter == 0.0, "Saturated Trotter fidelity should clip to zero"
    assert landscape.cartan_band[0] < landscape.cartan_band[1]
    print("   ✓ Grid and curve")


def test_evolution_validates_steps():
    print("Testing step validation...")
    try:
        trotter_evolution(U, V, 1.0, 0)
        assert False, "Expected ValidationError"
    except ValidationError:
        pass
    print("   ✓ r >= 1 enforced")


ALL_TESTS = [test_fragment_is_exact, test_cnot_counts, test_linear_circuit_measures_correlator,
             test_error_scaling, test_norm_convention_selected, test_fit_stable_under_grid_refinement,
             test_fit_skips_early_and_coarse_points, test_cartan_reference,
             test_best_steps_at_target_time, test_best_fidelity_non_increasing_in_time,
             test_fidelity_model, test_landscape_shape,
             test_evolution_validates_steps]


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
