#!/usr/bin/env python3
"""
Tests for the exact-diagonalization reference: Lehmann poles, the closed
form and the exact correlator
"""
import math
import sys
from pathlib import Path

import numpy as np

# Add the src directory to Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from cartan_dmft.circuit import ground_energy
from cartan_dmft.lehmann import (closed_form_poles, greens_correlator, greens_function, ground_state,
                                 impurity_poles, self_consistent_hybridization)


def test_closed_form_matches_diagonalization():
    """Analytic poles and residues equal the ones from the Lehmann sum"""
    print("Testing closed-form poles...")
    for U, V in ((2.0, 0.944), (4.0, 0.5), (8.0, 0.2), (1.0, 1.3)):
        exact = impurity_poles(U, V)
        closed = closed_form_poles(U, V)
        for name in ('omega1', 'omega2', 'alpha1', 'alpha2', 'ground_energy'):
            a, b = getattr(exact, name), getattr(closed, name)
            assert abs(a - b) < 1e-9, f"U={U} V={V} {name}: {a} vs {b}"
    print("   ✓ Closed form agrees")


def test_reference_point():
    """U = 2, V = 0.944 poles"""
    print("Testing the reference point...")
    poles = closed_form_poles(2.0, 0.944)
    assert abs(poles.omega1 - 0.884846) < 1e-5, f"omega1 = {poles.omega1}"
    assert abs(poles.omega2 - 3.021326) < 1e-5, f"omega2 = {poles.omega2}"
    assert abs(poles.alpha1 + poles.alpha2 - 0.5) < 1e-12
    assert poles.alpha1 > poles.alpha2 > 0
    print(f"   ✓ omega1={poles.omega1:.6f} omega2={poles.omega2:.6f}")


def test_correlator_is_two_cosines():
    """Re<X0(t) X0> = 2 alpha1 cos(omega1 t) + 2 alpha2 cos(omega2 t)"""
    print("Testing the correlator...")
    U, V = 3.0, 0.7
    poles = closed_form_poles(U, V)
    times = np.linspace(0.0, 20.0, 101)
    a1, a2 = poles.amplitudes
    expected = a1 * np.cos(poles.omega1 * times) + a2 * np.cos(poles.omega2 * times)
    assert np.allclose(greens_function(U, V, times), expected, atol=1e-10)
    assert abs(greens_function(U, V, [0.0])[0] - 1.0) < 1e-12
    print("   ✓ Two-cosine form")


def test_yx_correlator_is_sine_like():
    """Re<Y0(t) X0> vanishes at t = 0"""
    print("Testing the mixed correlator...")
    values = greens_correlator(2.0, 0.944, [0.0, 0.5, 1.0], 'X', 'Y')
    assert abs(values[0]) < 1e-12
    print("   ✓ Zero at t = 0")


def test_noninteracting_single_pole():
    """At U = 0 only the pole at V carries weight"""
    print("Testing U = 0...")
    poles = impurity_poles(0.0, 0.8)
    assert abs(poles.omega1 - 0.8) < 1e-10 and poles.omega1 == poles.omega2
    assert abs(poles.alpha1 - 0.5) < 1e-12 and poles.alpha2 == 0.0
    print("   ✓ Single pole")


def test_ground_energy():
    print("Testing the ground energy...")
    for U, V in ((2.0, 0.944), (10.0, 0.1)):
        energy, vector = ground_state(U, V)
        assert abs(energy - ground_energy(U, V)) < 1e-10
        assert abs(np.linalg.norm(vector) - 1.0) < 1e-12
    print("   ✓ -sqrt(4V^2 + U^2/16)")


def test_self_consistent_hybridization():
    print("Testing the exact fixed point...")
    assert abs(self_consistent_hybridization(2.0) - math.sqrt(1 - 1 / 9)) < 1e-12
    assert abs(self_consistent_hybridization(2.0) - 0.9428) < 1e-4
    assert self_consistent_hybridization(6.0) == 0.0
    assert self_consistent_hybridization(9.0) == 0.0
    print("   ✓ V* = sqrt(1 - (U/6)^2) below U = 6")


ALL_TESTS = [test_closed_form_matches_diagonalization, test_reference_point, test_correlator_is_two_cosines,
             test_yx_correlator_is_sine_like, test_noninteracting_single_pole, test_ground_energy,
             test_self_consistent_hybridization]


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
