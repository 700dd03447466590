#!/usr/bin/env python3
"""
Tests for the DMFT layer: quasiparticle weight, amplitudes, self-energy,
spectral function and the V <- sqrt(Z) loop
"""
import math
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np
from scipy import integrate

# Add the src directory to Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from cartan_dmft.dmft import (OMEGA1_NOT_FOUND, TOLERANCE, DmftState, InvalidGeometry, IterationRecord,
                              MeasurementConfig, SelfEnergyModel, amplitudes, dmft_iterate,
                              exact_quasiparticle_weight, initial_estimate, measure_peaks, phase_diagram,
                              quasiparticle_weight, rerun_until_omega1, self_energy, spectral_function)
from cartan_dmft.lehmann import closed_form_poles
from cartan_dmft.lie import decompose
from cartan_dmft.pauli import AimParameters, jw_aim_hamiltonian
from cartan_dmft.validation import ValidationError


def test_quasiparticle_weight_closed_form():
    """With two-site poles, Z(V) = 9V^2 / (9V^2 + U^2/4)"""
    print("Testing quasiparticle weight...")
    for U, V in ((2.0, 0.944), (4.0, 0.5), (8.0, 0.3)):
        poles = closed_form_poles(U, V)
        z = quasiparticle_weight(poles.omega1, poles.omega2, V)
        expected = 9 * V * V / (9 * V * V + U * U / 4)
        assert abs(z - expected) < 1e-12, f"U={U} V={V}: {z} vs {expected}"
    print("   ✓ Z matches the two-site formula")


def test_quasiparticle_weight_guards():
    print("Testing invalid geometries...")
    for args in ((0.5, 1.0, 0.0), (0.1, 0.1, 2.0)):
        try:
            quasiparticle_weight(*args)
            assert False, f"Expected InvalidGeometry for {args}"
        except InvalidGeometry:
            pass
    print("   ✓ V = 0 and negative denominators rejected")


def test_amplitudes_match_residues():
    """Fitted amplitudes equal the Lehmann residues"""
    print("Testing amplitudes...")
    for U, V in ((2.0, 0.944), (5.0, 0.6)):
        poles = closed_form_poles(U, V)
        a1, a2 = amplitudes(poles.omega1, poles.omega2, V)
        assert abs(a1 - poles.alpha1) < 1e-12 and abs(a2 - poles.alpha2) < 1e-12
        assert abs(2 * (a1 + a2) - 1.0) < 1e-12
    try:
        amplitudes(1.0, 1.0, 1.0)
        assert False, "Expected ValueError"
    except ValueError:
        pass
    print("   ✓ Residues and sum rule")


def test_self_energy_slope():
    """1 - dSigma/domega at 0 equals 1/Z and Sigma(0) = 0"""
    print("Testing the self-energy...")
    U, V = 3.0, 0.8
    poles = closed_form_poles(U, V)
    model = SelfEnergyModel.from_poles(poles.omega1, poles.omega2, V)
    h = 1e-5
    slope = (self_energy(model, h) - self_energy(model, -h)).real / (2 * h)
    z = quasiparticle_weight(poles.omega1, poles.omega2, V)
    assert abs((1 - slope) - 1 / z) < 1e-6, f"{1 - slope} vs {1 / z}"
    assert abs(self_energy(model, 0.0)) < 1e-12
    print(f"   ✓ 1 - Sigma'(0) = {1 - slope:.6f}")


def test_dyson_self_energy_matches_off_axis():
    """Away from the real axis both forms agree for the two-site poles"""
    print("Testing Dyson form...")
    U, V = 2.0, 0.944
    poles = closed_form_poles(U, V)
    model = SelfEnergyModel.from_poles(poles.omega1, poles.omega2, V)
    z = np.array([0.3 + 0.5j, 1.7 + 0.2j, -2.2 + 1.0j])
    assert np.allclose(self_energy(model, z), self_energy(model, z, regularized=False), atol=1e-9)
    print("   ✓ Forms agree")


def test_spectral_function_sum_rule():
    """A(omega) integrates to about one and is symmetric"""
    print("Testing the spectral function...")
    poles = closed_form_poles(2.0, 0.944)
    model = SelfEnergyModel.from_poles(poles.omega1, poles.omega2, 0.944)
    omega, curve = spectral_function(model, 0.2)
    weight = integrate.trapezoid(curve, omega)
    assert abs(weight - 1.0) < 0.02, f"Integrated weight {weight}"
    assert np.allclose(curve, curve[::-1], atol=1e-12)
    assert model.is_physical
    print(f"   ✓ integral {weight:.4f}")


def test_sum_rule_enforced():
    print("Testing the sum-rule check...")
    try:
        SelfEnergyModel(1.0, 2.0, 1.0, 0.4, 0.4)
        assert False, "Expected ValueError"
    except ValueError:
        pass
    print("   ✓ 2 alpha1 + 2 alpha2 = 1 enforced")


def test_exact_weight():
    print("Testing the exact weight...")
    assert abs(exact_quasiparticle_weight(2.0) - 8 / 9) < 1e-12
    assert exact_quasiparticle_weight(6.0) == 0.0 and exact_quasiparticle_weight(10.0) == 0.0
    print("   ✓ 1 - (U/6)^2, zero past the transition")


def test_z_final_averages_last_two():
    print("Testing Z_final...")
    state = DmftState(2.0, 0.9, [IterationRecord(1, 0.5, 0.5, 2.0, 0.64, 0.8),
                                 IterationRecord(2, 0.8, 0.7, 2.5, 0.81, 0.9)])
    assert state.v_sequence == [0.5, 0.8, 0.9]
    assert abs(state.z_final - 0.85 ** 2) < 1e-12
    print("   ✓ ((V_n + V_n-1)/2)^2")


def test_noninteracting_loop():
    """U = 0 drives V to 1 and converges after the settle steps"""
    print("Testing the U = 0 loop...")
    state = dmft_iterate(0.0, 0.5)
    assert state.converged and state.terminated_reason == TOLERANCE
    assert state.iterations == 4, f"{state.iterations} iterations"
    assert abs(state.V - 1.0) < 1e-12 and abs(state.z_final - 1.0) < 1e-12
    print("   ✓ V -> 1 in 4 iterations")


def test_measure_peaks_exact():
    """Exact-mode measurement recovers both poles"""
    print("Testing a measurement round...")
    U, V = 2.0, 0.944
    decomposition = decompose(jw_aim_hamiltonian(AimParameters.half_filled(U, V)))
    config = MeasurementConfig(n_solutions=1)
    result = measure_peaks(U, V, decomposition, config, initial_estimate(U, V), seed=1)
    poles = closed_form_poles(U, V)
    assert result.peaks.found1
    assert abs(result.peaks.omega1 - poles.omega1) < 0.01, f"omega1 {result.peaks.omega1}"
    assert abs(result.peaks.omega2 - poles.omega2) < 0.02, f"omega2 {result.peaks.omega2}"
    assert set(result.series) == {'high', 'low'}
    print(f"   ✓ omega1={result.peaks.omega1:.4f} omega2={result.peaks.omega2:.4f}")


def test_interacting_loop_converges():
    """U = 2 converges near the exact self-consistent weight 8/9"""
    print("Testing the U = 2 loop...")
    state = dmft_iterate(2.0, 0.5, config=MeasurementConfig(n_solutions=1))
    assert state.terminated_reason == TOLERANCE, state.terminated_reason
    assert abs(state.z_final - 8 / 9) < 0.03, f"Z_final {state.z_final}"
    assert 0.923 <= state.V <= 0.963, f"V = {state.V}"
    assert all(r.found1 for r in state.history)
    print(f"   ✓ Z_final={state.z_final:.4f} after {state.iterations} iterations")


def test_missing_omega1_step_is_not_averaged():
    """A step without omega1 records no V_new and the run reports a vanished weight"""
    print("Testing Z_final after a lost omega1...")
    state = DmftState(7.0, 0.4, [IterationRecord(1, 0.5, 0.2, 3.6, 0.16, 0.4),
                                 IterationRecord(2, 0.4, 0.0, 3.6, 0.0, float('nan'), found1=False)],
                      terminated_reason=OMEGA1_NOT_FOUND)
    assert state.v_sequence == [0.5, 0.4], state.v_sequence
    assert state.z_final == 0.0
    running = DmftState(7.0, 0.4, state.history[:1])
    assert abs(running.z_final - 0.45 ** 2) < 1e-12
    print("   ✓ NaN step left out, Z_final = 0")


def test_lost_omega1_reruns_whole_round():
    """Rounds repeat with new indices until omega1 appears or the budget is spent"""
    print("Testing whole-round reruns...")
    calls = []

    def fake_round(found_at):
        def measure_round(index):
            calls.append(index)
            return SimpleNamespace(peaks=SimpleNamespace(found1=index >= found_at), index=index)
        return measure_round

    assert rerun_until_omega1(fake_round(2), 3).index == 2 and calls == [0, 1, 2]
    calls.clear()
    result = rerun_until_omega1(fake_round(5), 3)
    assert not result.peaks.found1 and calls == [0, 1, 2]
    calls.clear()
    assert rerun_until_omega1(fake_round(0), 3).peaks.found1 and calls == [0]
    print("   ✓ At most max_attempts rounds")


def test_strong_coupling_upper_peak():
    """Deep in the insulating regime omega2 sits at U/2 within one bin"""
    print("Testing omega2 at U = 8...")
    U, V = 8.0, 0.116
    decomposition = decompose(jw_aim_hamiltonian(AimParameters.half_filled(U, V)))
    result = measure_peaks(U, V, decomposition, MeasurementConfig(n_solutions=1), initial_estimate(U, V), seed=3)
    resolution = result.spectra['high'].resolution
    assert abs(result.peaks.omega2 - 4.0) < resolution, f"omega2 {result.peaks.omega2} (bin {resolution:.4f})"
    print(f"   ✓ omega2 = {result.peaks.omega2:.4f}, bin {resolution:.4f}")


def test_loop_arguments_validated():
    print("Testing loop arguments...")
    for kwargs in ({'mixing': 1.0}, {'tol': 0.0}, {'max_iter': 0}):
        try:
            dmft_iterate(0.0, 0.5, **kwargs)
            assert False, f"Expected rejection of {kwargs}"
        except (ValueError, ValidationError):
            pass
    print("   ✓ Bad arguments rejected")


def test_phase_diagram_independent_of_jobs():
    print("Testing phase-diagram parallelism...")
    serial = phase_diagram([0.0, 7.0], max_iter=3, jobs=1, config=MeasurementConfig(n_solutions=1))
    parallel = phase_diagram([0.0, 7.0], max_iter=3, jobs=2, config=MeasurementConfig(n_solutions=1))
    for a, b in zip(serial, parallel):
        assert a.U == b.U and a.terminated_reason == b.terminated_reason
        assert a.Z_final == b.Z_final or (math.isnan(a.Z_final) and math.isnan(b.Z_final))
    assert serial[0].Z_exact == 1.0 and serial[1].Z_exact == 0.0
    assert serial[1].terminated_reason in (TOLERANCE, OMEGA1_NOT_FOUND, 'max_iter', 'error')
    print(f"   ✓ {[(r.U, r.terminated_reason) for r in serial]}")


ALL_TESTS = [test_quasiparticle_weight_closed_form, test_quasiparticle_weight_guards,
             test_amplitudes_match_residues, test_self_energy_slope, test_dyson_self_energy_matches_off_axis,
             test_spectral_function_sum_rule, test_sum_rule_enforced, test_exact_weight,
             test_z_final_averages_last_two, test_noninteracting_loop, test_measure_peaks_exact,
             test_interacting_loop_converges, test_missing_omega1_step_is_not_averaged,
             test_lost_omega1_reruns_whole_round, test_strong_coupling_upper_peak, test_loop_arguments_validated,
             test_phase_diagram_independent_of_jobs]


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
