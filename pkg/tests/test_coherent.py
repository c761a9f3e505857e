import math
from fractions import Fraction

import numpy as np
import pytest

from superphase import coherent as co
from superphase.grassmann import GrassmannElement


def test_ladder_commutator_identity_below_top():
    space = co.FockSpace(8)
    a = space.lowering()
    comm = a @ a.T - a.T @ a
    # exact statement on the first D-1 states; floats add only rounding
    assert np.max(np.abs(comm[:7, :7] - np.eye(7))) < 1e-13
    # the whole defect sits in the discarded top state
    assert comm[7, 7] == pytest.approx(-7.0, abs=1e-12)
    assert space.commutator_defect() < 1e-13


def test_two_mode_cross_commutators_vanish():
    space = co.FockSpace(10, modes=2)
    aq, ap = space.lowering(0), space.lowering(1)
    assert np.max(np.abs(aq @ ap - ap @ aq)) == 0.0
    assert np.max(np.abs(aq @ ap.T - ap.T @ aq)) < 1e-15
    assert space.commutator_defect(0) < 1e-13
    assert space.commutator_defect(1) < 1e-13
    assert len(space.guard_indices()) == 25


def test_quadrature_commutator_is_i():
    space = co.FockSpace(12)
    x, y = space.quadratures()
    comm = space.guarded(x @ y - y @ x)
    assert np.max(np.abs(comm - 1j * np.eye(6))) < 1e-12


def test_space_validation():
    with pytest.raises(ValueError):
        co.FockSpace(1)
    with pytest.raises(ValueError):
        co.FockSpace(8, modes=3)
    with pytest.raises(ValueError):
        co.FockSpace(8, modes=2).lowering(2)


def test_vacuum_state_at_zero():
    s = co.coherent_state(0.0, 8)
    assert s.vector[0] == 1.0
    assert np.max(np.abs(s.vector[1:])) == 0.0
    assert s.eigen_residual() < 1e-15


def test_matches_power_series():
    z, dim = 0.7 - 0.3j, 24
    s = co.coherent_state(z, dim)
    series = np.array([z ** k / math.sqrt(math.factorial(k)) for k in range(dim)])
    series *= math.exp(-0.5 * abs(z) ** 2)
    assert np.max(np.abs(s.vector - series)) < 1e-12


def test_eigen_residual_example():
    assert co.coherent_state(1.0, 32).eigen_residual() < 1e-12


def test_eigen_residual_tail_bound():
    for z, dim in [(1.3 + 0.4j, 12), (0.9j, 8), (1.8, 16)]:
        s = co.coherent_state(z, dim)
        bound = abs(z) ** dim / math.sqrt(math.factorial(dim - 1))
        assert s.eigen_residual() <= bound + 1e-13


def test_overlap_gaussian_law():
    z1, z2 = 0.7 - 0.3j, 0.2 + 0.5j
    s1 = co.coherent_state(z1, 24)
    s2 = co.coherent_state(z2, 24)
    assert abs(s1.overlap(s1) - 1.0) < 1e-12
    assert abs(abs(s1.overlap(s2)) ** 2 - math.exp(-abs(z1 - z2) ** 2)) < 1e-12
    # full phase, not just the modulus
    closed = np.exp(-0.5 * abs(z1) ** 2 - 0.5 * abs(z2) ** 2 + np.conj(z1) * z2)
    assert abs(s1.overlap(s2) - closed) < 1e-12


def test_truncation_guards():
    with pytest.raises(ValueError):
        co.coherent_state(0.5, 6)
    with pytest.raises(ValueError):
        co.coherent_state(3.0, 8)
    with pytest.raises(ValueError):
        co.classical_coherent_pair(0.0, 3.0, 8)


def test_normalization_guard():
    space = co.FockSpace(8)
    bad = np.zeros(8, dtype=complex)
    bad[0] = 0.5
    with pytest.raises(ValueError):
        co.CoherentState(space, bad, 0.0)


def test_displacement_unitarity():
    u = co.displacement_matrix(0.8 - 0.2j, 16)
    gap = co.FockSpace(16).guarded(u.conj().T @ u - np.eye(16))
    assert np.max(np.abs(gap)) < 1e-12


def test_pair_displacement_unitarity():
    u = co.pair_displacement_matrix(0.4 + 0.1j, -0.3 + 0.2j, 12)
    space = co.FockSpace(12, modes=2)
    gap = space.guarded(u.conj().T @ u - space.identity())
    assert np.max(np.abs(gap)) < 1e-12


def test_pair_is_simultaneous_eigenstate():
    # the quadrature-form exponent must reproduce the product of the
    # per-mode displacements; the per-mode residuals certify it
    pair = co.classical_coherent_pair(0.4 + 0.2j, -0.3 + 0.35j, 20)
    rq, rp = pair.eigen_residual()
    assert rq < 1e-10 and rp < 1e-10
    assert pair.eigen_residual(0) == rq


def test_pair_vacuum():
    pair = co.classical_coherent_pair(0.0, 0.0, 8)
    assert pair.vector[0] == 1.0
    assert np.max(np.abs(pair.vector[1:])) == 0.0


def test_pair_scalar_product_closed_form():
    a = (0.4 + 0.2j, -0.3 + 0.35j)
    b = (0.1 - 0.25j, 0.3 + 0.1j)
    sa = co.classical_coherent_pair(a[0], a[1], 20)
    sb = co.classical_coherent_pair(b[0], b[1], 20)
    assert abs(sa.overlap(sb) - co.pair_overlap_closed_form(a, b)) < 1e-10
    assert abs(co.pair_overlap_closed_form(a, a) - 1.0) < 1e-14


def test_mode_resolution_matrix():
    m = co.mode_resolution_matrix(12)
    gap = co.FockSpace(12).guarded(m - np.eye(12))
    assert np.max(np.abs(gap)) < 1e-8


def test_pair_completeness():
    assert co.pair_completeness_residual(16) < 1e-6


def test_eigenvalue_decompositions_round_trip():
    q, p, hbar = 0.37, -1.21, 0.7
    z = co.phase_point_eigenvalue(q, p, hbar)
    assert z == pytest.approx((q + 1j * p) / math.sqrt(2 * hbar), abs=1e-15)
    qq, pp = co.eigenvalue_phase_point(z, hbar)
    assert qq == pytest.approx(q, rel=1e-14)
    assert pp == pytest.approx(p, rel=1e-14)

    vals = (0.3, -0.8, 1.1, 0.45)
    zq, zp = co.classical_eigenvalues(*vals)
    assert zq == pytest.approx((0.3 - 0.8j) / math.sqrt(2), abs=1e-15)
    back = co.classical_phase_point(zq, zp)
    assert back == pytest.approx(vals, rel=1e-14)


def test_displaced_fermion_vacuum_coefficients():
    reg = co.fermion_registry()
    state = co.displaced_fermion_vacuum(registry=reg)
    vac = state[()]
    assert vac.body() == 1
    assert vac.coefficient(('cq', 'cbq')) == Fraction(-1, 2)
    assert vac.coefficient(('cp', 'cbp')) == Fraction(-1, 2)
    # (c^q cbar_q)(c^p cbar_p)/4 in product order
    assert vac.coefficient(('cq', 'cbq', 'cp', 'cbp')) == Fraction(1, 4)
    assert state[('q',)].coefficient(('cbq',)) == 1
    assert state[('p',)].coefficient(('cbp',)) == 1
    top = GrassmannElement.gen(reg, 'cbq') * GrassmannElement.gen(reg, 'cbp')
    assert state[('q', 'p')] == -top


def test_displacement_factorizes_over_modes():
    reg = co.fermion_registry()
    joint = co.displaced_fermion_vacuum(registry=reg)
    st_q = co.displaced_fermion_vacuum(modes=('q',), registry=reg)
    seq = co.displaced_fermion_vacuum(modes=('p',), registry=reg, start=st_q)
    assert set(joint) == set(seq)
    for occ in joint:
        assert joint[occ] == seq[occ]


def test_grassmann_eigenstate_both_modes():
    for mode in ('q', 'p'):
        residual = co.grassmann_coherent_check(mode)
        assert residual, 'cancellation should be nontrivial'
        assert all(e.is_zero() for e in residual.values())


def test_grassmann_vacuum_zero_eigenvalue():
    for mode in ('q', 'p'):
        residual = co.grassmann_coherent_check(mode, displaced=False)
        assert all(e.is_zero() for e in residual.values())


def test_grassmann_check_validates_mode():
    with pytest.raises(ValueError):
        co.grassmann_coherent_check('x')
