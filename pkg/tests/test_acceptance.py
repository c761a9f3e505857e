"""Whole-package acceptance checks.

One test per advertised guarantee.  Each test measures its residuals,
asserts the stated tolerance, and enforces a wall-clock budget, so
``pytest tests/test_acceptance.py -v`` reads as a scorecard with one
pass/fail line per guarantee.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np

from superphase import coherent, kvn, pathint
from superphase.dynamics import (CHARGE_NAMES, ExtendedState,
                                 PendulumHamiltonian, charge_values,
                                 integrate, jacobi_check)
from superphase.grassmann import SuperMatrix
from superphase.opalgebra import (OperatorAlgebra, OrderingSpec,
                                  base_space_action_check, build_charges,
                                  graded_commutator, grassmann_delta,
                                  grassmann_ordering_check,
                                  liouvillian_ordering, op_superfield,
                                  susy_algebra_check)
from superphase.superfield import (SuperInstant, SuperInterval,
                                   _h_tilde_direct, berezin_reduce,
                                   field_registry, instant_registry,
                                   lagrangian_identity, odd_symbol,
                                   substitute, susy_transform)
from superphase.symexpr import parse

OSC = '(q^2 + p^2)/2'
FREE = 'p^2/2'


def _poly_family(seed, count=20):
    """Random polynomial Hamiltonians, degree <= 4, alternating n = 1, 2."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        n = 1 if i % 2 == 0 else 2
        names = ['q%d' % (k + 1) for k in range(n)]
        names += ['p%d' % (k + 1) for k in range(n)]
        H = parse('0').promoted(n)
        for _ in range(rng.randint(1, 4)):
            exp = [0] * (2 * n)
            for _ in range(rng.randint(0, 4)):
                exp[rng.randrange(2 * n)] += 1
            parts = ['%s^%d' % (nm, k) for nm, k in zip(names, exp) if k]
            H = H + parse(' * '.join(parts) if parts else '1', n=n) * Fraction(
                rng.randint(-4, 4), rng.randint(1, 3))
        out.append(H)
    return out


FAMILY = _poly_family(29)


def _residual(e):
    if e.is_zero():
        return 0.0
    return max(abs(complex(c)) for c in e.terms.values())


def _hermitian_weights(rng, n, m):
    # solve the normalization plus symmetry constraints for the first two
    # position weights, everything else drawn freely
    b = [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(m + 1)]
    b[-1] = 1 - sum(b[:-1])
    a = [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(n + 1)]
    rhs = n * sum(bj * (m - 2 * j) for j, bj in enumerate(b))
    S = 1 - sum(a[2:])
    T = Fraction(rhs, m) - sum(aj * (n - 2 * j) for j, aj in enumerate(a) if j >= 2)
    a1 = Fraction(n * S - T, 2)
    return [S - a1, a1] + a[2:], b


class _Clock:
    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self._t0
        return False


def _score(label, budget, clock, detail):
    line = '[PASS] %s: %s (%.2fs, budget %.0fs)' % (
        label, detail, clock.seconds, budget)
    print(line)
    assert clock.seconds < budget, line


def test_01_superspace_weight_reduces_to_generator():
    with _Clock() as ck:
        worst = 0.0
        for H in FAMILY:
            top = berezin_reduce(substitute(H).reconstruct())
            worst = max(worst, _residual(top - _h_tilde_direct(H, field_registry(H.n))))
    assert worst == 0.0
    _score('01 superspace reduction', 5.0, ck,
           'exact over %d random systems' % len(FAMILY))


def test_02_weight_splits_into_lagrangian_and_surface_term():
    with _Clock() as ck:
        worst = max(_residual(lagrangian_identity(H)) for H in FAMILY)
    assert worst == 0.0
    _score('02 surface-term split', 5.0, ck, 'exact over the same family')


def test_03_charge_algebra_closes_and_brs_is_nilpotent():
    with _Clock() as ck:
        bracket = nil = base = 0.0
        for H in FAMILY:
            bracket = max(bracket, _residual(susy_algebra_check(H)))
            ch = build_charges(H)
            nil = max(nil, _residual(graded_commutator(ch.q_brs, ch.q_brs)))
            for charge in ('q_brs', 'qbar_brs', 'q_h', 'qbar_h'):
                for r in base_space_action_check(H, charge):
                    base = max(base, _residual(r))
    assert bracket == 0.0
    assert nil == 0.0
    assert base == 0.0
    _score('03 charge algebra', 10.0, ck,
           'bracket closure, nilpotency, base-space action all exact')


def test_04_field_commutator_is_symplectic_odd_delta():
    with _Clock() as ck:
        worst = 0.0
        for n in (1, 2):
            al = OperatorAlgebra(n, outer=('theta', 'thetabar',
                                           'thetap', 'thetabarp'))
            dd = grassmann_delta(al)
            for a in range(2 * n):
                for b in range(2 * n):
                    C = graded_commutator(op_superfield(al, a),
                                          op_superfield(al, b, primed=True))
                    worst = max(worst, _residual(C - al.omega.upper(a, b) * dd))
    assert worst == 0.0
    _score('04 field commutator', 5.0, ck, 'exact for n = 1, 2')


def test_05_selfadjoint_orderings_collapse_others_fail():
    rng = random.Random(41)
    with _Clock() as ck:
        good = 0
        while good < 50:
            n, m = rng.randint(1, 3), rng.randint(1, 3)
            a, b = _hermitian_weights(rng, n, m)
            r = liouvillian_ordering(OrderingSpec(n, m, a, b))
            assert r['hermitian'] and r['hermitian_dagger']
            assert r['matches_pre_point']
            good += 1
        bad = 0
        draws = 0
        while bad < 50:
            draws += 1
            assert draws < 1000
            n, m = rng.randint(1, 3), rng.randint(1, 3)
            a, b = _hermitian_weights(rng, n, m)
            if bad % 2:
                a = list(a)
                a[0] += 1
                a[-1] -= 1
            else:
                b = list(b)
                b[0] += Fraction(1, 2)
                b[-1] -= Fraction(1, 2)
            sp = OrderingSpec(n, m, a, b)
            if sp.hermitian():
                continue
            rv = liouvillian_ordering(sp)
            assert not rv['hermitian_dagger']
            assert not rv['matches_pre_point']
            bad += 1
        worst = max(_residual(grassmann_ordering_check(H)) for H in FAMILY[:6])
    assert worst == 0.0
    _score('05 ordering equivalence', 30.0, ck,
           '50 self-adjoint sets collapse, 50 violating sets rejected')


def test_06_unit_superdeterminant_and_invariant_intervals():
    with _Clock() as ck:
        reg = instant_registry()
        eps = odd_symbol(reg, 'eps')
        epsbar = odd_symbol(reg, 'epsbar')
        sm = SuperMatrix(reg, [[1]], [[-eps, epsbar]], [[0], [0]],
                         [[1, 0], [0, 1]])
        sdet_gap = _residual(sm.sdet() - 1)
        p1 = SuperInstant.symbolic(reg, '1')
        p2 = SuperInstant.symbolic(reg, '2')
        iv = SuperInterval(p1, p2)
        ivt = SuperInterval(susy_transform(p1, 'eps', 'epsbar'),
                            susy_transform(p2, 'eps', 'epsbar'))
        inv_gap = max(_residual(ivt.interval() - iv.interval()),
                      _residual(ivt.interval_left() - iv.interval_left()),
                      _residual(ivt.interval_right() - iv.interval_right()))
    assert sdet_gap == 0.0
    assert inv_gap == 0.0
    _score('06 transformation jacobian', 1.0, ck,
           'sdet = 1 and all three intervals invariant, symbolic parameters')


def test_07_ghost_variation_tracks_trajectory_variation():
    pend = PendulumHamiltonian()
    osc = parse(OSC)
    with _Clock() as ck:
        e1 = jacobi_check(pend, [0.9, 0.2], [0.3, -0.4], 5.0, 1e-3)
        e2 = jacobi_check(pend, [0.9, 0.2], [0.3, -0.4], 5.0, 5e-4)
        ratio = e1 / e2
        gap = jacobi_check(osc, [1.0, 0.0], [0.5, 0.5], 5.0, 1e-4)
    assert 1.8 <= ratio <= 2.2
    assert gap < 1e-10
    _score('07 variation transport', 10.0, ck,
           'pendulum halving ratio %.3f, oscillator gap %.1e' % (ratio, gap))


def _drift(H, state, t):
    flow = integrate(H, state, 0.0, t, 1e-3)
    ref = charge_values(H, flow.states[0])
    worst = 0.0
    stride = max(1, len(flow.states) // 8)
    for st in flow.states[::stride] + [flow.final()]:
        ch = charge_values(H, st)
        for name in CHARGE_NAMES:
            worst = max(worst, _residual(ch[name] - ref[name]))
    return worst / max(t, 1.0)


def test_08_all_charges_conserved_along_the_flow():
    rng = np.random.default_rng(3)
    with _Clock() as ck:
        s = ExtendedState(rng.normal(size=2), lam=rng.normal(size=2),
                          c=np.eye(2), cb=np.eye(2))
        d_osc = _drift(parse(OSC), s, 2.0 * math.pi)
        s = ExtendedState([0.9, 0.2], lam=rng.normal(size=2),
                          c=np.eye(2), cb=np.eye(2))
        d_pend = _drift(PendulumHamiltonian(), s, 2.0)
    assert d_osc < 1e-8
    assert d_pend < 1e-8
    _score('08 conserved charges', 10.0, ck,
           'drift per unit time: oscillator %.1e, pendulum %.1e'
           % (d_osc, d_pend))


def test_09_wave_density_consistency_and_recurrence():
    with _Clock() as ck:
        osc = parse(OSC)
        grid = kvn.PhaseGrid.square(8.0, 256)
        wave = kvn.gaussian_wave(grid, center=(1.5, 0.0), sigma=0.5)
        period = 2.0 * math.pi
        psi_t = kvn.evolve(osc, wave, period, 2e-3)
        rho_t = kvn.evolve(osc, wave.density(), period, 2e-3)
        dist = psi_t.density().l2_distance(rho_t)
        # over a full period the characteristics map is the identity, so
        # the transported wave must reproduce the initial one
        rec = psi_t.l2_distance(wave)
    assert dist < 1e-6
    assert rec < 1e-6
    _score('09 phase-space wave transport', 120.0, ck,
           'density gap %.1e, recurrence gap %.1e' % (dist, rec))


def test_10_sliced_kernels_exact_convergent_and_transformed():
    with _Clock() as ck:
        free_gap = 0.0
        for n_sl in (1, 2, 3, 5, 8, 13, 21, 34):
            k = pathint.qpi_kernel_q(FREE, 0.3, 1.1, 1.0, n_sl)
            free_gap = max(free_gap,
                           abs(k - pathint.free_particle_kernel(0.3, 1.1, 1.0)))
        ref = pathint.oscillator_kernel(1.0, 0.3, 1.1, 1.0)
        errs = [abs(pathint.qpi_kernel_q(OSC, 0.3, 1.1, 1.0, n_sl) - ref)
                for n_sl in (8, 16, 32, 64, 128)]
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        four = max(pathint.fourier_consistency_residual(OSC, 0.2, -0.7, 1.0,
                                                        n_sl)
                   for n_sl in (5, 64))
    assert free_gap < 1e-12
    assert all(1.8 <= r <= 2.2 for r in ratios)
    assert four < 1e-8
    _score('10 sliced kernels', 60.0, ck,
           'free gap %.1e, halving ratios %s, transform gap %.1e'
           % (free_gap, ['%.3f' % r for r in ratios], four))


def _smooth_source(seed):
    rng = np.random.default_rng(seed)
    amp = rng.uniform(0.2, 0.5, size=(2, 3))
    freq = rng.uniform(0.5, 2.5, size=(2, 3))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=(2, 3))

    def j(t):
        return (amp * np.sin(freq * t + phase)).sum(axis=1)
    return j


def test_11_lattice_motion_residual_is_first_order_in_the_step():
    src = _smooth_source(7)
    with _Clock() as ck:
        gaps = []
        for text in (FREE, OSC):
            rows = pathint.residual_sweep(text, src, 1.0, (64, 128),
                                          mode='quantum', hbar=1.0)
            gaps.append(rows[0]['norm'] / rows[1]['norm'])
            rows = pathint.residual_sweep(text, src, 1.0, (64, 128),
                                          mode='classical', phi0=(1.0, 0.0))
            gaps.append(rows[0]['norm'] / rows[1]['norm'])
    assert all(1.8 <= g <= 2.2 for g in gaps)
    _score('11 lattice motion residual', 60.0, ck,
           'halving ratios %s' % ['%.3f' % g for g in gaps])


def test_12_coherent_states_even_and_odd_sectors():
    with _Clock() as ck:
        eig = max(coherent.coherent_state(z, 32).eigen_residual()
                  for z in (1.0, 0.45 + 0.8j, -0.6j, -0.95))
        za = (0.4 + 0.2j, -0.3 + 0.35j)
        zb = (0.1 - 0.25j, 0.3 + 0.1j)
        sa = coherent.classical_coherent_pair(za[0], za[1], 16)
        sb = coherent.classical_coherent_pair(zb[0], zb[1], 16)
        pair_gap = abs(sa.overlap(sb) - coherent.pair_overlap_closed_form(za, zb))
        comp = coherent.pair_completeness_residual(16)
        odd = 0.0
        for mode in ('q', 'p'):
            res = coherent.grassmann_coherent_check(mode)
            odd = max([odd] + [_residual(e) for e in res.values()])
    assert eig < 1e-12
    assert pair_gap < 1e-10
    assert comp < 1e-6
    assert odd == 0.0
    _score('12 coherent states', 30.0, ck,
           'eigen %.1e, overlap %.1e, completeness %.1e, odd sector exact'
           % (eig, pair_gap, comp))
