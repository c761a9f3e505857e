import csv
import math

import numpy as np
import pytest

from superphase.dynamics import (
    ExtendedState, PendulumHamiltonian, as_hamiltonian, charge_values,
    flow_map, odd_basis_registry, _state_elements,
)
from superphase.pathint import (
    BoundaryForm, FocalError, GeneratingFunctional, QuadraticAction,
    SlicedWeightSource, SuperSource, compose_kernel_q, cpi_sliced_kernel,
    ds_residual_classical, ds_residual_quantum, fourier_consistency_residual,
    fourier_transformed_kernel, free_particle_kernel, oscillator_kernel,
    oscillator_kernel_momentum, qpi_kernel_p, qpi_kernel_q, residual_sweep,
    semigroup_residual, slice_ordering_phase, write_kernel_ladder_csv,
    write_residual_sweep_csv,
)
from superphase.superfield import berezin_reduce, evaluate_element
from superphase.symexpr import parse

OSC = '(q^2 + p^2)/2'
FREE = 'p^2/2'


def smooth_source(s):
    return (0.4 * math.sin(2.1 * s + 0.3), 0.3 * math.cos(1.7 * s - 0.5))


# ---------------------------------------------------------------------------
# construction and exact assembly

def test_rejects_nonquadratic_and_bad_arguments():
    with pytest.raises(ValueError):
        QuadraticAction('q^3', 1.0, 4)
    with pytest.raises(ValueError):
        QuadraticAction('q1*p2', 1.0, 4)
    with pytest.raises(ValueError):
        QuadraticAction(OSC, -1.0, 4)
    with pytest.raises(ValueError):
        QuadraticAction(OSC, 1.0, 0)
    with pytest.raises(ValueError):
        QuadraticAction(OSC, 1.0, 4, polarization='x')
    with pytest.raises(TypeError):
        QuadraticAction(3.0, 1.0, 4)


def test_assembly_matches_literal_slice_sum():
    # the matrix form and the shared-source Lagrangian sum are the same
    # functional: random lattice paths, both polarizations
    rng = np.random.default_rng(7)
    H = 'p^2/2 + q^2/2 + q*p/4 + q/3 + p/5 + 1/7'
    for pol in ('q', 'p'):
        act = QuadraticAction(H, 1.3, 6, (0.4, -1.2), pol)
        for _ in range(4):
            x = rng.integers(-3, 4, size=len(act.interior)).astype(float)
            assert abs(act.quadratic_value(x) - act.evaluate(x)) < 1e-12


def test_matrix_is_symmetric_with_unit_kinetic_couplings():
    act = QuadraticAction(FREE, 1.0, 4, (0.0, 1.0))
    S = act.matrix
    assert np.array_equal(S, S.T)
    # p_n couples q_n and q_{n-1} with +-1 regardless of eps
    i_q1 = act.interior.index(('q', 1))
    i_p1 = act.interior.index(('p', 1))
    i_p2 = act.interior.index(('p', 2))
    assert S[i_p1, i_q1] == 1.0 and S[i_p2, i_q1] == -1.0


# ---------------------------------------------------------------------------
# closed-form oracles (validated here, then used as references)

def test_oscillator_kernel_solves_the_evolution_equation():
    # independent check of the closed form: finite-difference residual of
    # i hbar dK/dt = (-hbar^2/2 d^2/dq1^2 + om^2 q1^2/2) K
    for om, q0, q1, t in ((1.0, 0.4, -0.3, 0.9), (0.7, -0.2, 0.5, 1.4)):
        ht, hq = 1e-5, 1e-4
        K = lambda tt, qq: oscillator_kernel(om, q0, qq, tt)
        dt = (K(t + ht, q1) - K(t - ht, q1)) / (2 * ht)
        dqq = (K(t, q1 + hq) - 2 * K(t, q1) + K(t, q1 - hq)) / hq ** 2
        resid = abs(1j * dt + dqq / 2 - om ** 2 * q1 ** 2 / 2 * K(t, q1))
        assert resid / abs(K(t, q1)) < 1e-5


def test_momentum_oscillator_kernel_solves_its_equation():
    # p-space evolution: i dK/dt = (p^2/2 - om^2/2 d^2/dp^2) K
    for om, p0, p1, t in ((1.0, 0.4, -0.3, 0.9), (0.7, -0.2, 0.5, 1.4)):
        ht, hp = 1e-5, 1e-4
        K = lambda tt, pp: oscillator_kernel_momentum(om, p0, pp, tt)
        dt = (K(t + ht, p1) - K(t - ht, p1)) / (2 * ht)
        dpp = (K(t, p1 + hp) - 2 * K(t, p1) + K(t, p1 - hp)) / hp ** 2
        resid = abs(1j * dt + om ** 2 / 2 * dpp - p1 ** 2 / 2 * K(t, p1))
        assert resid / abs(K(t, p1)) < 1e-5


def test_oscillator_kernel_small_frequency_is_free():
    a = oscillator_kernel(1e-7, 0.3, 1.1, 0.8)
    b = free_particle_kernel(0.3, 1.1, 0.8)
    assert abs(a - b) < 1e-10


def test_closed_forms_reject_focal_times():
    with pytest.raises(FocalError):
        oscillator_kernel(1.0, 0.0, 0.0, math.pi)
    with pytest.raises(FocalError):
        oscillator_kernel_momentum(1.0, 0.0, 0.0, 2 * math.pi)


# ---------------------------------------------------------------------------
# coordinate kernel

def test_free_kernel_exact_at_every_slice_count():
    ref = free_particle_kernel(0.0, 1.3, 1.0)
    for N in (1, 2, 5, 17):
        k = qpi_kernel_q(FREE, 0.0, 1.3, 1.0, N)
        assert abs(k - ref) < 1e-12
        assert abs(abs(k) - (2 * math.pi) ** -0.5) < 1e-12


def test_free_kernel_with_other_hbar():
    hb = 0.5
    k = qpi_kernel_q(FREE, 0.0, 1.0, 1.0, 7, hbar=hb)
    assert abs(k - free_particle_kernel(0.0, 1.0, 1.0, hbar=hb)) < 1e-12


def test_single_slice_short_time_is_a_nascent_delta():
    t = 1e-3
    k = qpi_kernel_q(FREE, 0.5, 0.9, t, 1)
    assert abs(abs(k) - (2 * math.pi * t) ** -0.5) < 1e-9 * abs(k)
    # phase is the quadratic spread (q1-q0)^2/2t above the -pi/4 branch
    wrapped = np.angle(k * np.exp(1j * (math.pi / 4 - 0.4 ** 2 / (2 * t))))
    assert abs(wrapped) < 1e-10


def test_oscillator_kernel_error_halves_per_doubling():
    ref = oscillator_kernel(1.0, 0.3, -0.4, 1.0)
    errs = [abs(qpi_kernel_q(OSC, 0.3, -0.4, 1.0, N) - ref)
            for N in (16, 32, 64)]
    assert errs[2] < 5e-4
    for a, b in zip(errs, errs[1:]):
        assert 1.8 < a / b < 2.2


def test_oscillator_kernel_past_the_focal_time():
    # t=4 sits beyond the first focal point; only the dropped branch phase
    # keeps the sliced value converging to the closed form
    ref = oscillator_kernel(1.0, 0.3, -0.4, 4.0)
    e1 = abs(qpi_kernel_q(OSC, 0.3, -0.4, 4.0, 128) - ref)
    e2 = abs(qpi_kernel_q(OSC, 0.3, -0.4, 4.0, 256) - ref)
    assert e2 < 0.05 * abs(ref)
    assert 1.8 < e1 / e2 < 2.2


# ---------------------------------------------------------------------------
# momentum kernel and Fourier consistency

def test_momentum_kernel_of_free_particle_is_delta_supported():
    with pytest.raises(FocalError):
        qpi_kernel_p(FREE, 0.1, 0.1, 1.0, 8)
    with pytest.raises(FocalError):
        fourier_transformed_kernel(FREE, 0.1, 0.1, 1.0, 8)


def test_mollified_free_momentum_kernel():
    # small restoring force regularizes the delta; the sliced kernel then
    # approaches the closed p-space form whose peak grows like 1/om
    for om, N in ((0.2, 128), (0.1, 256)):
        H = '(p^2 + %r*q^2)/2' % om ** 2
        k = qpi_kernel_p(H, 0.3, 0.3, 1.0, N)
        ref = oscillator_kernel_momentum(om, 0.3, 0.3, 1.0)
        assert abs(k - ref) < 1e-5 * abs(ref)
    a = abs(oscillator_kernel_momentum(0.2, 0.3, 0.3, 1.0))
    b = abs(oscillator_kernel_momentum(0.1, 0.3, 0.3, 1.0))
    assert abs(b / a - math.sqrt(0.2 / 0.1) * math.sqrt(math.sin(0.2) / math.sin(0.1))) < 1e-12


def test_momentum_kernel_converges_to_closed_form():
    ref = oscillator_kernel_momentum(1.0, 0.3, -0.4, 1.0)
    errs = [abs(qpi_kernel_p(OSC, 0.3, -0.4, 1.0, N) - ref)
            for N in (16, 32, 64)]
    for a, b in zip(errs, errs[1:]):
        assert 1.8 < a / b < 2.2


def test_fourier_consistency_with_ordering_phase():
    # K_p equals the double transform of K_q times the kinetic ordering
    # phase, exactly at every N
    for N in (5, 64):
        assert fourier_consistency_residual(OSC, 0.3, 0.7, 1.0, N) < 1e-8
    # without the phase the gap is O(eps): the factor is load-bearing
    kp = qpi_kernel_p(OSC, 0.3, 0.7, 1.0, 64)
    ft = fourier_transformed_kernel(OSC, 0.3, 0.7, 1.0, 64)
    assert abs(kp - ft) > 1e-4
    ph = slice_ordering_phase(OSC, 0.3, 0.7, 1.0 / 64)
    assert abs(kp - ph * ft) < 1e-12


def test_ordering_phase_requires_separable_hamiltonian():
    with pytest.raises(ValueError):
        slice_ordering_phase('q*p', 0.0, 1.0, 0.1)


# ---------------------------------------------------------------------------
# composition

def test_semigroup_composition_at_equal_step():
    assert semigroup_residual(OSC, 0.2, 0.9, 0.4, 8, 0.6, 12) < 1e-8
    assert semigroup_residual(FREE, -0.3, 1.1, 0.5, 10, 0.5, 10) < 1e-8


def test_composition_rejects_mismatched_steps():
    with pytest.raises(ValueError):
        compose_kernel_q(OSC, 0.0, 1.0, 0.4, 8, 0.6, 11)


def test_boundary_form_agrees_with_direct_kernel():
    rng = np.random.default_rng(11)
    act = QuadraticAction(OSC, 1.0, 9, (0.3, 0.8))
    bf = act.boundary_form()
    assert isinstance(bf, BoundaryForm)
    assert abs(bf.value((0.3, 0.8)) - act.kernel()) < 1e-12
    for _ in range(3):
        y = rng.normal(size=2)
        other = QuadraticAction(OSC, 1.0, 9, y)
        assert abs(bf.value(y) - other.kernel()) < 1e-12


# ---------------------------------------------------------------------------
# classical sliced flow

def test_classical_slices_close_the_oscillator_orbit():
    f = cpi_sliced_kernel(OSC, (1.0, 0.5), 2 * math.pi, 16)
    assert np.max(np.abs(f.endpoint - (1.0, 0.5))) < 1e-8
    assert abs(f.determinant - 1.0) < 1e-10
    for d in f.slice_determinants:
        assert abs(d - 1.0) < 1e-12


def test_slice_count_does_not_change_the_classical_map():
    pend = PendulumHamiltonian()
    f1 = cpi_sliced_kernel(pend, (1.0, 0.3), 1.2, 1, dt=2e-4)
    f100 = cpi_sliced_kernel(pend, (1.0, 0.3), 1.2, 100, dt=2e-4)
    assert np.max(np.abs(f1.endpoint - f100.endpoint)) < 1e-8
    assert np.max(np.abs(f1.jacobian - f100.jacobian)) < 1e-6
    one = flow_map(pend, (1.0, 0.3), 1.2, dt=2e-4)
    assert np.max(np.abs(f100.endpoint - one)) < 1e-8
    assert abs(f100.determinant - 1.0) < 1e-10


def test_quadratic_slices_match_the_integrator():
    H = 'p^2/2 + q^2/2 + q/2'
    f = cpi_sliced_kernel(H, (0.4, -0.2), 1.7, 5)
    g = flow_map(as_hamiltonian(H), (0.4, -0.2), 1.7, dt=1e-4)
    assert np.max(np.abs(f.endpoint - g)) < 1e-8


# ---------------------------------------------------------------------------
# equation-of-motion residuals

def test_quantum_residual_free_particle_no_source():
    r = ds_residual_quantum(FREE, None, 1.0, 100)
    assert r['norm'] < 1e-12


def test_quantum_residual_scales_linearly_with_the_step():
    for H in (FREE, OSC):
        r1 = ds_residual_quantum(H, smooth_source, 1.0, 100, 0.2, 0.9)
        r2 = ds_residual_quantum(H, smooth_source, 1.0, 200, 0.2, 0.9)
        assert r1['norm'] > 0
        assert 1.7 < r1['norm'] / r2['norm'] < 2.3


def test_quantum_functional_value():
    zf = GeneratingFunctional(OSC, 1.0, 30, boundary=(0.2, 0.9))
    assert zf.value(None) == qpi_kernel_q(OSC, 0.2, 0.9, 1.0, 30)
    # a real source only turns the phase
    assert abs(abs(zf.value(smooth_source)) - abs(zf.value(None))) < 1e-12
    assert abs(zf.value(smooth_source) - zf.value(None)) > 1e-3


def test_quantum_mean_path_hits_the_boundary():
    zf = GeneratingFunctional(OSC, 1.0, 20, boundary=(0.2, 0.9))
    path = zf.mean_path(None)
    assert path[0, 0] == 0.2 and path[-1, 0] == 0.9
    assert math.isnan(path[0, 1])
    assert np.all(np.isfinite(path[1:, :]))


def test_classical_residual_free_particle_no_source():
    r = ds_residual_classical(FREE, None, 1.0, 50, (1.0, 0.7))
    assert r['norm'] < 1e-12
    # support is the straight line
    path = r['path']
    assert np.max(np.abs(path[:, 1] - 0.7)) < 1e-12
    assert np.max(np.abs(path[:, 0] - (1.0 + 0.7 * np.linspace(0, 1, 51)))) < 1e-10


def test_classical_residual_scales_linearly_with_the_step():
    r1 = ds_residual_classical(OSC, smooth_source, 1.0, 100, (1.0, 0.0))
    r2 = ds_residual_classical(OSC, smooth_source, 1.0, 200, (1.0, 0.0))
    assert r1['norm'] > 0
    assert 1.7 < r1['norm'] / r2['norm'] < 2.3


def test_classical_response_is_additive_for_quadratic_flows():
    J1 = lambda s: (0.3 * math.sin(s), 0.2 * math.cos(2 * s))
    J2 = lambda s: (-0.1 * math.cos(3 * s), 0.4 * math.sin(s + 1))
    J12 = lambda s: tuple(np.add(J1(s), J2(s)))
    make = lambda: GeneratingFunctional(OSC, 1.0, 40, 'classical',
                                        phi0=(1.0, 0.0))
    gap = make().response(J12) - make().response(J1) - make().response(J2)
    assert np.max(np.abs(gap)) < 1e-9


def test_newton_failure_is_reported():
    # backward step x = q0 + eps x^2 has no real root here
    zf = GeneratingFunctional('p*q^2', 1.0, 1, 'classical', phi0=(1.0, 0.5))
    with pytest.raises(RuntimeError):
        zf.driven_path()


def test_odd_currents_are_rejected_numerically():
    zf = GeneratingFunctional(OSC, 1.0, 10, boundary=(0.0, 1.0))
    j = lambda s: (0.1, 0.2)
    assert zf.value(SuperSource(j_phi=j)) == zf.value(j)
    with pytest.raises(ValueError):
        zf.value(SuperSource(j_phi=j, j_c=j))


# ---------------------------------------------------------------------------
# shared weight source

def test_both_pipelines_draw_on_one_parsed_hamiltonian():
    src = SlicedWeightSource(OSC)
    act = QuadraticAction(src.hamiltonian, 1.0, 8, (0.0, 1.0))
    assert act.hamiltonian is src.hamiltonian
    assert act.weights.hamiltonian is src.hamiltonian
    assert src.extended.poly is src.hamiltonian
    # quantum side: the assembled form reproduces the literal weight
    x = np.linspace(-1, 1, len(act.interior))
    assert abs(act.quadratic_value(x) - act.evaluate(x)) < 1e-12


def test_classical_weight_top_is_the_extended_generator():
    rng = np.random.default_rng(13)
    src = SlicedWeightSource(OSC)
    s = ExtendedState(rng.normal(size=2), lam=rng.normal(size=2),
                      c=rng.normal(size=(2, 2)), cb=rng.normal(size=(2, 2)),
                      lam_bilinear=rng.normal(size=(2, 2, 2))
                      + 1j * rng.normal(size=(2, 2, 2)))
    reg = odd_basis_registry(1)
    c_el, cb_el, lam_el = _state_elements(s, reg)
    env = {'q1': s.phi[0], 'p1': s.phi[1], 'lq1': lam_el[0], 'lp1': lam_el[1]}
    for a in range(2):
        env['c%d' % (a + 1)] = c_el[a]
        env['cb%d' % (a + 1)] = cb_el[a]
    top = berezin_reduce(src.classical_expansion())
    expect = evaluate_element(top, env, reg)
    got = charge_values(src.extended, s)['htilde']
    keys = set(expect.terms) | set(got.terms)
    gap = max(abs(complex(expect.terms.get(m, 0.0))
                  - complex(got.terms.get(m, 0.0))) for m in keys)
    assert gap < 1e-9


def test_classical_rates_flow_through_the_same_object():
    src = SlicedWeightSource(OSC)
    s = ExtendedState(np.array([1.0, 2.0]))
    ds = src.classical_rates(s)
    assert np.allclose(ds.phi, [2.0, -1.0])


# ---------------------------------------------------------------------------
# file output

def test_kernel_ladder_csv(tmp_path):
    out = tmp_path / 'ladder.csv'
    ref = oscillator_kernel(1.0, 0.3, -0.4, 1.0)
    write_kernel_ladder_csv(out, OSC, 0.3, -0.4, 1.0, (8, 16, 32),
                            reference=ref)
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [r['slices'] for r in rows] == ['8', '16', '32']
    errs = [float(r['err']) for r in rows]
    assert errs[0] > errs[1] > errs[2]
    for r in rows:
        k = complex(float(r['re']), float(r['im']))
        assert abs(abs(k) - float(r['abs'])) < 1e-12


def test_residual_sweep_csv(tmp_path):
    out = tmp_path / 'sweep.csv'
    rows = residual_sweep(OSC, smooth_source, 1.0, (50, 100), mode='quantum',
                          q0=0.2, q1=0.9)
    rows += residual_sweep(OSC, smooth_source, 1.0, (50, 100),
                           mode='classical', phi0=(1.0, 0.0))
    write_residual_sweep_csv(out, rows)
    with open(out) as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == 4
    assert {r['mode'] for r in back} == {'quantum', 'classical'}
    for r in back:
        assert float(r['norm']) > 0
