"""Batch front-end: parse a config, run verification suites, emit reports.

Five suites mirror the library layout.  The symbolic suite takes the
configured Hamiltonian (its residuals are exact zeros for any admitted
polynomial); the numeric suites run fixed canonical systems whose exact
reference solutions are known, with the step sizes, grid sizes and seeds
taken from the config.  Reports are deterministic for a given config and
seed, up to the per-check timing fields.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
import time
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:           # pragma: no cover
    import tomli as tomllib

import numpy as np

from . import coherent, kvn, pathint
from .dynamics import (
    CHARGE_NAMES, ExtendedState, PendulumHamiltonian, charge_values,
    integrate, jacobi_check, write_trajectory_csv,
)
from .grassmann import GrassmannElement, SuperMatrix
from .opalgebra import (
    OperatorAlgebra, OrderingSpec, build_charges, graded_commutator,
    grassmann_delta, grassmann_ordering_check, liouvillian_ordering,
    op_superfield, base_space_action_check, susy_algebra_check,
)
from .superfield import (
    SuperInstant, SuperInterval, _h_tilde_direct, berezin_reduce,
    field_registry, instant_registry, lagrangian_identity, odd_symbol,
    substitute, susy_transform,
)
from .symexpr import parse

__all__ = [
    'ConfigError', 'RunConfig', 'Report',
    'run_identities', 'run_dynamics', 'run_kvn', 'run_pathint',
    'run_coherent', 'main',
]

OSC_TEXT = '(q^2 + p^2)/2'


class ConfigError(ValueError):
    """Invalid configuration or Hamiltonian; maps to exit code 2."""


_CONFIG_KEYS = {
    'hamiltonian': str, 'n': int, 'extent': float, 'dt': float, 't': float,
    'slices': int, 'grid': int, 'dim': int, 'sigma': float, 'hbar': float,
    'seed': int, 'out': str,
}

_POSITIVE = ('n', 'extent', 'dt', 't', 'slices', 'grid', 'dim', 'sigma', 'hbar')


class RunConfig:
    """One run's parameters; file values first, flags override."""

    __slots__ = ('hamiltonian', 'n', 'extent', 'dt', 't', 'slices', 'grid',
                 'dim', 'sigma', 'hbar', 'seed', 'out', 'emit_json', 'h_expr')

    def __init__(self, **kw):
        self.hamiltonian = OSC_TEXT
        self.n = 1
        self.extent = 8.0
        self.dt = 1e-3
        self.t = 1.0
        self.slices = 64
        self.grid = 256
        self.dim = 32
        self.sigma = 0.5
        self.hbar = 1.0
        self.seed = 7
        self.out = None
        self.emit_json = False
        for k, v in kw.items():
            if k not in _CONFIG_KEYS and k != 'emit_json':
                raise ConfigError('unknown config key %r' % k)
            setattr(self, k, v)
        self._validate()

    def _validate(self):
        for k in _CONFIG_KEYS:
            want = _CONFIG_KEYS[k]
            v = getattr(self, k)
            if v is None:
                continue
            try:
                setattr(self, k, want(v))
            except (TypeError, ValueError):
                raise ConfigError('config key %r must be %s' % (k, want.__name__))
        for k in _POSITIVE:
            if getattr(self, k) <= 0:
                raise ConfigError('config key %r must be positive' % k)
        if self.grid & (self.grid - 1) or self.grid < 4:
            raise ConfigError('grid must be a power of two, at least 4')
        if self.dim < 8:
            raise ConfigError('dim must be at least 8')
        if self.seed < 0:
            raise ConfigError('seed must be non-negative')
        try:
            self.h_expr = parse(self.hamiltonian, n=self.n)
        except Exception as exc:
            raise ConfigError('Hamiltonian does not parse: %s' % exc)

    @classmethod
    def from_sources(cls, config_path=None, **overrides):
        kw = {}
        if config_path is not None:
            try:
                with open(config_path, 'rb') as fh:
                    data = tomllib.load(fh)
            except OSError as exc:
                raise ConfigError('cannot read config: %s' % exc)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError('config does not parse: %s' % exc)
            for k, v in data.items():
                kw[k] = v
        for k, v in overrides.items():
            if v is not None and v is not False:
                kw[k] = v
        return cls(**kw)


class Report:
    """Per-check records; human and machine renderings share the rows."""

    def __init__(self, suite):
        self.suite = suite
        self.rows = []

    def add(self, check, anchor, ok, residual, tolerance, seconds):
        self.rows.append({
            'check': check,
            'anchor': anchor,
            'status': 'pass' if ok else 'fail',
            'residual': None if residual is None else float(residual),
            'tolerance': float(tolerance),
            'seconds': round(float(seconds), 3),
        })

    @property
    def passed(self):
        return all(r['status'] == 'pass' for r in self.rows)

    def to_dict(self):
        return {'suite': self.suite,
                'status': 'pass' if self.passed else 'fail',
                'checks': self.rows}

    def to_text(self):
        lines = ['suite %s' % self.suite]
        for r in self.rows:
            res = 'n/a' if r['residual'] is None else '%.3e' % r['residual']
            line = ('[%s] %-34s residual=%s tol=%.1e (%.2fs) %s'
                    % (r['status'].upper(), r['check'], res,
                       r['tolerance'], r['seconds'], r['anchor']))
            if 'note' in r:
                line += '  %s' % r['note']
            lines.append(line)
        return '\n'.join(lines)


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _elem_residual(e):
    """Largest coefficient magnitude of a symbolic element (0 for zero)."""
    if hasattr(e, 'is_zero') and e.is_zero():
        return 0.0
    return max(abs(complex(c)) for c in e.terms.values())


def _random_hamiltonians(seed, count=20):
    """Polynomial H family: n alternating in {1, 2}, degree <= 4,
    rational coefficients."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        n = 1 if i % 2 == 0 else 2
        H = parse('0').promoted(n)
        names = ['q%d' % (k + 1) for k in range(n)] + ['p%d' % (k + 1) for k in range(n)]
        for _ in range(rng.randint(1, 4)):
            e = [0] * (2 * n)
            for _ in range(rng.randint(0, 4)):
                e[rng.randrange(2 * n)] += 1
            parts = ['%s^%d' % (nm, k) for nm, k in zip(names, e) if k]
            mono = ' * '.join(parts) if parts else '1'
            H = H + parse(mono, n=n) * Fraction(rng.randint(-4, 4), rng.randint(1, 3))
        out.append(H)
    return out


def _hermitian_weights(rng, n, m):
    """Random ordering weights meeting normalization and the symmetry
    condition that makes the built Liouvillian self-adjoint."""
    b = [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(m + 1)]
    b[-1] = 1 - sum(b[:-1])
    a = [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(n + 1)]
    rhs = n * sum(bj * (m - 2 * j) for j, bj in enumerate(b))
    S = 1 - sum(a[2:])
    T = Fraction(rhs, m) - sum(aj * (n - 2 * j) for j, aj in enumerate(a) if j >= 2)
    a1 = Fraction(n * S - T, 2)
    return [S - a1, a1] + a[2:], b


# ---------------------------------------------------------------------------
# suites


def run_identities(cfg):
    rep = Report('identities')
    family = _random_hamiltonians(cfg.seed, 20)
    if cfg.hamiltonian != OSC_TEXT:
        family.append(cfg.h_expr)

    with _Timer() as tm:
        worst = 0.0
        for H in family:
            reg = field_registry(H.n)
            top = berezin_reduce(substitute(H).reconstruct())
            worst = max(worst, _elem_residual(top - _h_tilde_direct(H, reg)))
    rep.add('berezin-top-component', 'generator-from-superspace-weight',
            worst == 0.0, worst, 0.0, tm.seconds)

    with _Timer() as tm:
        worst = max(_elem_residual(lagrangian_identity(H)) for H in family)
    rep.add('lagrangian-surface-term', 'weight-total-derivative-split',
            worst == 0.0, worst, 0.0, tm.seconds)

    with _Timer() as tm:
        worst = 0.0
        nil = 0.0
        for H in family:
            worst = max(worst, _elem_residual(susy_algebra_check(H)))
            ch = build_charges(H)
            nil = max(nil, _elem_residual(graded_commutator(ch.q_brs, ch.q_brs)))
    rep.add('susy-bracket-closure', 'odd-charge-pair-generates-evolution',
            worst == 0.0, worst, 0.0, tm.seconds)
    rep.add('brs-nilpotency', 'odd-charge-squares-to-zero',
            nil == 0.0, nil, 0.0, tm.seconds)

    with _Timer() as tm:
        worst = 0.0
        for H in family[:6]:
            for charge in ('q_brs', 'qbar_brs', 'q_h', 'qbar_h'):
                for r in base_space_action_check(H, charge):
                    worst = max(worst, _elem_residual(r))
    rep.add('base-space-action', 'charges-act-as-superspace-shifts',
            worst == 0.0, worst, 0.0, tm.seconds)

    with _Timer() as tm:
        worst = 0.0
        for n in (1, 2):
            al = OperatorAlgebra(n, outer=('theta', 'thetabar', 'thetap', 'thetabarp'))
            dd = grassmann_delta(al)
            for a in range(2 * n):
                for b in range(2 * n):
                    C = graded_commutator(op_superfield(al, a),
                                          op_superfield(al, b, primed=True))
                    worst = max(worst, _elem_residual(C - al.omega.upper(a, b) * dd))
    rep.add('superfield-commutator', 'equal-time-bracket-is-odd-delta',
            worst == 0.0, worst, 0.0, tm.seconds)

    with _Timer() as tm:
        rng = random.Random(cfg.seed + 1)
        bad = 0
        for _ in range(8):
            n, m = rng.randint(1, 3), rng.randint(1, 3)
            a, b = _hermitian_weights(rng, n, m)
            r = liouvillian_ordering(OrderingSpec(n, m, a, b))
            if not (r['hermitian'] and r['hermitian_dagger'] and r['matches_pre_point']):
                bad += 1
            av = list(a)
            av[0] += 1
            av[-1] -= 1
            sp = OrderingSpec(n, m, av, b)
            if not sp.hermitian():
                rv = liouvillian_ordering(sp)
                if rv['hermitian_dagger'] or rv['matches_pre_point']:
                    bad += 1
        worst = max((_elem_residual(grassmann_ordering_check(H)) for H in family[:6]),
                    default=0.0)
    rep.add('ordering-equivalence', 'self-adjoint-orderings-collapse',
            bad == 0 and worst == 0.0, float(bad) + worst, 0.0, tm.seconds)

    with _Timer() as tm:
        reg = instant_registry()
        eps = odd_symbol(reg, 'eps')
        epsbar = odd_symbol(reg, 'epsbar')
        sm = SuperMatrix(reg, [[1]], [[-eps, epsbar]], [[0], [0]],
                         [[1, 0], [0, 1]])
        sdet_gap = _elem_residual(sm.sdet() - 1)
        p1 = SuperInstant.symbolic(reg, '1')
        p2 = SuperInstant.symbolic(reg, '2')
        iv = SuperInterval(p1, p2)
        q1 = susy_transform(p1, 'eps', 'epsbar')
        q2 = susy_transform(p2, 'eps', 'epsbar')
        ivt = SuperInterval(q1, q2)
        gap = max(_elem_residual(ivt.interval() - iv.interval()),
                  _elem_residual(ivt.interval_left() - iv.interval_left()),
                  _elem_residual(ivt.interval_right() - iv.interval_right()))
    rep.add('sdet-and-interval-invariance', 'unit-jacobian-invariant-intervals',
            sdet_gap == 0.0 and gap == 0.0, sdet_gap + gap, 0.0, tm.seconds)
    return rep


def _charge_drift(H, state, t, dt):
    flow = integrate(H, state, 0.0, t, dt)
    ref = charge_values(H, flow.states[0])
    worst = 0.0
    stride = max(1, len(flow.states) // 8)
    for st in flow.states[::stride] + [flow.final()]:
        ch = charge_values(H, st)
        for name in CHARGE_NAMES:
            diff = ch[name] - ref[name]
            worst = max(worst, _elem_residual(diff))
    return worst / max(t, 1.0)


def run_dynamics(cfg):
    rep = Report('dynamics')
    rng = np.random.default_rng(cfg.seed)
    osc = parse(OSC_TEXT)
    pend = PendulumHamiltonian()

    with _Timer() as tm:
        s = ExtendedState(rng.normal(size=2), lam=rng.normal(size=2),
                          c=np.eye(2), cb=np.eye(2))
        drift = _charge_drift(osc, s, 2.0 * math.pi, cfg.dt)
    rep.add('oscillator-charge-drift', 'nine-conserved-coefficient-sets',
            drift < 1e-8, drift, 1e-8, tm.seconds)

    with _Timer() as tm:
        s = ExtendedState([0.9, 0.2], lam=rng.normal(size=2),
                          c=np.eye(2), cb=np.eye(2))
        drift = _charge_drift(pend, s, 2.0, cfg.dt)
    rep.add('pendulum-charge-drift', 'nine-conserved-coefficient-sets',
            drift < 1e-8, drift, 1e-8, tm.seconds)

    with _Timer() as tm:
        e1 = jacobi_check(pend, [0.9, 0.2], [0.3, -0.4], 5.0, 1e-3, dt=cfg.dt)
        e2 = jacobi_check(pend, [0.9, 0.2], [0.3, -0.4], 5.0, 5e-4, dt=cfg.dt)
        ratio = e1 / e2
        osc_err = jacobi_check(osc, [1.0, 0.0], [0.5, 0.5], 5.0, 1e-4, dt=cfg.dt)
    rep.add('pendulum-jacobi-ratio', 'ghost-equals-trajectory-variation',
            1.8 <= ratio <= 2.2, abs(ratio - 2.0), 0.2, tm.seconds)
    rep.add('oscillator-jacobi-gap', 'ghost-equals-trajectory-variation',
            osc_err < 1e-10, osc_err, 1e-10, tm.seconds)

    if cfg.out:
        flow = integrate(osc, ExtendedState([1.0, 0.0], lam=[0.0, 1.0],
                                            c=np.eye(2), cb=np.eye(2)),
                         0.0, cfg.t, cfg.dt)
        write_trajectory_csv(flow, osc, os.path.join(cfg.out, 'trajectory.csv'))
    return rep


def run_kvn(cfg):
    rep = Report('kvn')
    osc = parse(OSC_TEXT)
    grid = kvn.PhaseGrid.square(cfg.extent, cfg.grid)
    wave = kvn.gaussian_wave(grid, center=(1.5, 0.0), sigma=cfg.sigma)

    with _Timer() as tm:
        psi_t = kvn.evolve(osc, wave, cfg.t, cfg.dt)
        rho_t = kvn.evolve(osc, wave.density(), cfg.t, cfg.dt)
        dist = psi_t.density().l2_distance(rho_t)
    rep.add('density-wave-consistency', 'squared-wave-evolves-as-density',
            dist < 1e-6, dist, 1e-6, tm.seconds)

    with _Timer() as tm:
        period = kvn.evolve(osc, wave, 2.0 * math.pi, 2e-3)
        rec = period.l2_distance(wave)
    rep.add('oscillator-recurrence', 'closed-orbits-return-the-wave',
            rec < 1e-6, rec, 1e-6, tm.seconds)

    if cfg.out:
        kvn.write_grid_dump(psi_t, os.path.join(cfg.out, 'kvn_state.bin'))
        kvn.write_marginals_csv(psi_t, os.path.join(cfg.out, 'kvn_marginals.csv'))
    return rep


def _random_source(seed):
    rng = np.random.default_rng(seed)
    amp = rng.uniform(0.2, 0.5, size=(2, 3))
    freq = rng.uniform(0.5, 2.5, size=(2, 3))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=(2, 3))

    def j(t):
        val = amp * np.sin(freq * t + phase)
        return val.sum(axis=1)
    return j


def run_pathint(cfg):
    rep = Report('pathint')
    osc = OSC_TEXT
    free = 'p^2/2'

    with _Timer() as tm:
        worst = 0.0
        for n_sl in (1, 3, 8, 32):
            k = pathint.qpi_kernel_q(free, 0.3, 1.1, cfg.t, n_sl, hbar=cfg.hbar)
            worst = max(worst, abs(k - pathint.free_particle_kernel(0.3, 1.1, cfg.t, hbar=cfg.hbar)))
    rep.add('free-kernel-exact-at-any-slicing', 'flat-weight-gaussian-closure',
            worst < 1e-12, worst, 1e-12, tm.seconds)

    ladder = (8, 16, 32, 64, 128)
    with _Timer() as tm:
        ref = pathint.oscillator_kernel(1.0, 0.3, 1.1, cfg.t, hbar=cfg.hbar)
        errs = [abs(pathint.qpi_kernel_q(osc, 0.3, 1.1, cfg.t, n_sl, hbar=cfg.hbar) - ref)
                for n_sl in ladder]
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        gap = max(abs(r - 2.0) for r in ratios)
    rep.add('oscillator-kernel-error-halving', 'slice-error-linear-in-step',
            gap <= 0.3, gap, 0.3, tm.seconds)

    with _Timer() as tm:
        four = max(pathint.fourier_consistency_residual(osc, 0.2, -0.7, cfg.t, n_sl,
                                                        hbar=cfg.hbar)
                   for n_sl in (5, cfg.slices))
    rep.add('polarization-fourier-consistency', 'momentum-kernel-from-transform',
            four < 1e-8, four, 1e-8, tm.seconds)

    with _Timer() as tm:
        src = _random_source(cfg.seed)
        gaps = []
        for text in (free, osc):
            rows = pathint.residual_sweep(text, src, cfg.t,
                                          (cfg.slices, 2 * cfg.slices),
                                          mode='quantum', hbar=cfg.hbar)
            gaps.append(rows[0]['norm'] / rows[1]['norm'])
        rows_c = pathint.residual_sweep(osc, src, cfg.t,
                                        (cfg.slices, 2 * cfg.slices),
                                        mode='classical', phi0=(1.0, 0.0))
        gaps.append(rows_c[0]['norm'] / rows_c[1]['norm'])
        gap = max(abs(g - 2.0) for g in gaps)
    rep.add('discrete-eom-residual-halving', 'source-derivative-recovers-motion',
            gap <= 0.3, gap, 0.3, tm.seconds)

    if cfg.out:
        pathint.write_kernel_ladder_csv(
            os.path.join(cfg.out, 'kernel_ladder.csv'), osc, 0.3, 1.1, cfg.t,
            ladder, hbar=cfg.hbar, reference=ref)
        all_rows = pathint.residual_sweep(osc, src, cfg.t,
                                          (cfg.slices, 2 * cfg.slices),
                                          mode='quantum', hbar=cfg.hbar)
        all_rows += rows_c
        pathint.write_residual_sweep_csv(
            os.path.join(cfg.out, 'residual_sweep.csv'), all_rows)
    return rep


def run_coherent(cfg):
    rep = Report('coherent')

    with _Timer() as tm:
        resid = coherent.coherent_state(1.0, cfg.dim).eigen_residual()
    rep.add('ladder-eigenstate-residual', 'displaced-vacuum-eigenvector',
            resid < 1e-12, resid, 1e-12, tm.seconds)

    with _Timer() as tm:
        a = (0.4 + 0.2j, -0.3 + 0.35j)
        b = (0.1 - 0.25j, 0.3 + 0.1j)
        sa = coherent.classical_coherent_pair(a[0], a[1], 16)
        sb = coherent.classical_coherent_pair(b[0], b[1], 16)
        gap = abs(sa.overlap(sb) - coherent.pair_overlap_closed_form(a, b))
    rep.add('pair-scalar-product', 'two-mode-overlap-exponential',
            gap < 1e-10, gap, 1e-10, tm.seconds)

    with _Timer() as tm:
        comp = coherent.pair_completeness_residual(16)
    rep.add('pair-completeness', 'polar-quadrature-identity',
            comp < 1e-6, comp, 1e-6, tm.seconds)

    with _Timer() as tm:
        worst = 0.0
        for mode in ('q', 'p'):
            res = coherent.grassmann_coherent_check(mode)
            worst = max([worst] + [_elem_residual(e) for e in res.values()])
    rep.add('odd-eigenstate-exact', 'nilpotent-displacement-eigenvalue',
            worst == 0.0, worst, 0.0, tm.seconds)
    return rep


# ---------------------------------------------------------------------------
# entry point

_RUNNERS = {
    'identities': run_identities,
    'dynamics': run_dynamics,
    'kvn': run_kvn,
    'pathint': run_pathint,
    'coherent': run_coherent,
}


def _build_parser():
    p = argparse.ArgumentParser(
        prog='superphase',
        description='run verification suites and simulations in batch')
    p.add_argument('subcommand', choices=sorted(_RUNNERS) + ['all'])
    p.add_argument('--config', metavar='PATH', help='TOML config file')
    p.add_argument('--hamiltonian', metavar='TEXT', help='Hamiltonian override')
    p.add_argument('--out', metavar='DIR', help='directory for data files')
    p.add_argument('--seed', type=int, metavar='U64', help='seed override')
    p.add_argument('--json', action='store_true', help='print the JSON report')
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_sources(
            config_path=args.config, hamiltonian=args.hamiltonian,
            out=args.out, seed=args.seed, emit_json=args.json)
    except ConfigError as exc:
        print('config error: %s' % exc, file=sys.stderr)
        return 2
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)

    names = sorted(_RUNNERS) if args.subcommand == 'all' else [args.subcommand]
    reports = []
    for nm in names:
        try:
            reports.append(_RUNNERS[nm](cfg))
        except Exception as exc:        # a dying suite is a failure, not a crash
            rep = Report(nm)
            rep.add('suite-aborted', 'execution-error', False,
                    None, 0.0, 0.0)
            rep.rows[-1]['note'] = '%s: %s' % (type(exc).__name__, exc)
            reports.append(rep)
    ok = all(r.passed for r in reports)

    payload = {'status': 'pass' if ok else 'fail',
               'suites': [r.to_dict() for r in reports]}
    if cfg.emit_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for r in reports:
            print(r.to_text())
        print('%d checks, %d failed'
              % (sum(len(r.rows) for r in reports),
                 sum(1 for r in reports for row in r.rows if row['status'] == 'fail')))
    if cfg.out:
        with open(os.path.join(cfg.out, 'report.json'), 'w') as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return 0 if ok else 1


if __name__ == '__main__':          # pragma: no cover
    sys.exit(main())
