"""Flow of the extended phase-space system.

The first-order equations couple the phase-space point, the auxiliary
momenta and the ghost directions:

    dphi^a/dt = omega^{ab} d_b H
    dc^a/dt   = omega^{ad} d_d d_b H c^b
    dcb_b/dt  = -cb_a omega^{ad} d_d d_b H
    dlam_b/dt = -omega^{ad} d_d d_b H lam_a
                - i cb_a omega^{ad} d_d d_f d_b H c^f

The ghost equations are linear, so c^a and cb_a are carried as real
coefficient matrices over an odd frame frozen at the initial time.  The
last term of the lam equation is an even bilinear in that frame and is
tracked exactly as a rank-2 tensor (one frame index from cb, one from c)
rather than dropped.

Hamiltonians enter through a small evaluable interface (value plus
derivatives up to third order); polynomial expressions are adapted
automatically and a hand-coded pendulum is included as the standard
non-polynomial example.
"""

import csv
import math
from functools import lru_cache

import numpy as np

from .grassmann import GeneratorRegistry, GrassmannElement
from .symexpr import PolyExpr, SymplecticForm, parse

__all__ = [
    'PolyHamiltonian', 'PendulumHamiltonian', 'as_hamiltonian',
    'ExtendedState', 'FlowResult', 'extended_rhs', 'integrate',
    'jacobi_check', 'flow_map', 'charge_values', 'odd_basis_registry',
    'cpi_kernel_characteristics', 'write_trajectory_csv',
]

CHARGE_NAMES = ('q_brs', 'qbar_brs', 'q_h', 'qbar_h', 'k', 'kbar',
                'q_g', 'n', 'nbar', 'htilde')


class PolyHamiltonian:
    """Evaluable wrapper around a polynomial in (q_i, p_i).

    Precomputes the gradient, Hessian and third-derivative polynomials
    once; only the structurally nonzero entries are evaluated.
    """

    def __init__(self, poly):
        if isinstance(poly, str):
            poly = parse(poly)
        if not isinstance(poly, PolyExpr):
            raise TypeError('expected a polynomial or source text')
        self.poly = poly
        self.n = poly.n
        d = 2 * poly.n
        grad = [poly.diff_index(a) for a in range(d)]
        self._grad = {a: P for a, P in enumerate(grad) if P.terms}
        self._hess = {}
        self._third = {}
        for a, Pa in self._grad.items():
            for b in range(d):
                Pab = Pa.diff_index(b)
                if not Pab.terms:
                    continue
                self._hess[a, b] = Pab
                for e in range(d):
                    Pabe = Pab.diff_index(e)
                    if Pabe.terms:
                        self._third[a, b, e] = Pabe

    @property
    def dim(self):
        return 2 * self.n

    def value(self, phi):
        return float(self.poly.evaluate(list(phi)))

    def gradient(self, phi):
        out = np.zeros(self.dim)
        phi = list(phi)
        for a, P in self._grad.items():
            out[a] = P.evaluate(phi)
        return out

    def hessian(self, phi):
        out = np.zeros((self.dim, self.dim))
        phi = list(phi)
        for (a, b), P in self._hess.items():
            out[a, b] = P.evaluate(phi)
        return out

    def third(self, phi):
        d = self.dim
        out = np.zeros((d, d, d))
        phi = list(phi)
        for (a, b, e), P in self._third.items():
            out[a, b, e] = P.evaluate(phi)
        return out


class PendulumHamiltonian:
    """H = p^2/2 - cos q with derivatives coded by hand."""

    n = 1
    dim = 2

    def value(self, phi):
        q, p = float(phi[0]), float(phi[1])
        return 0.5 * p * p - math.cos(q)

    def gradient(self, phi):
        q, p = float(phi[0]), float(phi[1])
        return np.array([math.sin(q), p])

    def hessian(self, phi):
        q = float(phi[0])
        return np.array([[math.cos(q), 0.0], [0.0, 1.0]])

    def third(self, phi):
        q = float(phi[0])
        out = np.zeros((2, 2, 2))
        out[0, 0, 0] = -math.sin(q)
        return out


def as_hamiltonian(H):
    """Coerce to the evaluable interface; polynomials and source text are
    wrapped, anything else must already expose derivatives to third order."""
    if isinstance(H, (PolyExpr, str)):
        return PolyHamiltonian(H)
    for name in ('value', 'gradient', 'hessian', 'third'):
        if not hasattr(H, name):
            raise TypeError(
                'hamiltonian lacks %r: derivatives up to third order are '
                'required' % name)
    return H


def _ghost_block(x, d, default_identity):
    if x is None:
        return np.eye(d) if default_identity else np.zeros((d, 0))
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if x != 0:
            raise ValueError('scalar ghost data must be 0')
        return np.zeros((d, 0))
    if x.ndim == 1:
        x = x.reshape(d, 1)
    if x.ndim != 2 or x.shape[0] != d:
        raise ValueError('ghost coefficients must be (2n, k)')
    return x.copy()


class ExtendedState:
    """State of the extended system.

    phi and lam are real vectors of length 2n.  c[a, j] and cb[a, j] are
    the coefficients of the ghosts over the odd frame (column j is frame
    element j); by default both start as the identity, i.e. the frame is
    the initial ghost configuration itself.  lam_bilinear[b, j, k] is the
    even coefficient of (frame cb_j)(frame c_k) inside lam_b; it starts
    at zero and is fed by the third-derivative term.
    """

    __slots__ = ('phi', 'lam', 'c', 'cb', 'lam_bilinear')

    def __init__(self, phi, lam=None, c=None, cb=None, lam_bilinear=None):
        self.phi = np.atleast_1d(np.asarray(phi, dtype=float)).copy()
        d = self.phi.size
        if d == 0 or d % 2:
            raise ValueError('phase space needs an even, positive dimension')
        if lam is None:
            self.lam = np.zeros(d)
        else:
            self.lam = np.atleast_1d(np.asarray(lam, dtype=float)).copy()
            if self.lam.shape != (d,):
                raise ValueError('lam must match phi in length')
        self.c = _ghost_block(c, d, default_identity=c is None)
        self.cb = _ghost_block(cb, d, default_identity=cb is None)
        m, k = self.cb.shape[1], self.c.shape[1]
        if lam_bilinear is None:
            self.lam_bilinear = np.zeros((d, m, k), dtype=complex)
        else:
            self.lam_bilinear = np.asarray(lam_bilinear, dtype=complex).copy()
            if self.lam_bilinear.shape != (d, m, k):
                raise ValueError('lam_bilinear must be (2n, cb columns, c columns)')

    @property
    def dim(self):
        return self.phi.size

    @property
    def n(self):
        return self.phi.size // 2

    @property
    def _shape(self):
        return (self.dim, self.cb.shape[1], self.c.shape[1])

    def copy(self):
        return ExtendedState(self.phi, self.lam, self.c, self.cb,
                             self.lam_bilinear)

    def __repr__(self):
        return 'ExtendedState(phi=%r, lam=%r, c=%r, cb=%r)' % (
            self.phi.tolist(), self.lam.tolist(),
            self.c.tolist(), self.cb.tolist())


class FlowResult:
    """Trajectory on a strictly increasing time grid."""

    __slots__ = ('times', 'states', 'dt', 'order')

    def __init__(self, times, states, dt, order=4):
        self.times = np.asarray(times, dtype=float)
        if self.times.ndim != 1 or len(states) != self.times.size:
            raise ValueError('one state per time')
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError('times must be strictly increasing')
        self.states = list(states)
        self.dt = float(dt)
        self.order = int(order)

    def final(self):
        return self.states[-1]

    def __len__(self):
        return len(self.states)


@lru_cache(maxsize=None)
def _omega(n):
    w = SymplecticForm(n).matrix()
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def odd_basis_registry(n):
    """Odd frame registry: e_j spans the c directions and eb_j the cb
    directions, all real, 1-based like the field symbols."""
    names = tuple('e%d' % (j + 1) for j in range(2 * n)) \
        + tuple('eb%d' % (j + 1) for j in range(2 * n))
    return GeneratorRegistry(names, {g: g for g in names})


def _pack(s):
    return np.concatenate([
        s.phi.astype(complex), s.lam.astype(complex),
        s.c.astype(complex).ravel(), s.cb.astype(complex).ravel(),
        s.lam_bilinear.ravel()])


def _unpack(y, shape):
    d, m, k = shape
    o = 2 * d
    phi = y[:d].real.copy()
    lam = y[d:o].real.copy()
    c = y[o:o + d * k].real.reshape(d, k).copy()
    o += d * k
    cb = y[o:o + d * m].real.reshape(d, m).copy()
    o += d * m
    bil = y[o:].reshape(d, m, k).copy()
    return ExtendedState(phi, lam, c, cb, bil)


def _rhs_packed(ham, y, shape):
    d, m, k = shape
    o = 2 * d
    phi = y[:d].real
    lam = y[d:o]
    c = y[o:o + d * k].reshape(d, k)
    o += d * k
    cb = y[o:o + d * m].reshape(d, m)
    o += d * m
    bil = y[o:].reshape(d, m, k)

    omega = _omega(d // 2)
    M = omega @ ham.hessian(phi)
    out = np.empty_like(y)
    pos = 2 * d
    out[:d] = omega @ ham.gradient(phi)
    out[d:pos] = -(M.T @ lam)
    out[pos:pos + d * k] = (M @ c).ravel()
    pos += d * k
    out[pos:pos + d * m] = (-(M.T @ cb)).ravel()
    pos += d * m
    dbil = -np.einsum('ab,ajk->bjk', M, bil)
    if m and k:
        T = np.einsum('ad,dfb->afb', omega, ham.third(phi))
        dbil = dbil - 1j * np.einsum('aj,afb,fk->bjk', cb, T, c)
    out[pos:] = dbil.ravel()
    return out


def extended_rhs(H, s):
    """Right-hand side of the extended equations at state s, returned in
    the same layout as the state."""
    ham = as_hamiltonian(H)
    return _unpack(_rhs_packed(ham, _pack(s), s._shape), s._shape)


def _rk4_step(ham, y, h, shape):
    k1 = _rhs_packed(ham, y, shape)
    k2 = _rhs_packed(ham, y + (0.5 * h) * k1, shape)
    k3 = _rhs_packed(ham, y + (0.5 * h) * k2, shape)
    k4 = _rhs_packed(ham, y + h * k3, shape)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(H, s0, t0, t1, dt):
    """Classical fourth-order fixed-step flow from t0 to t1.

    The last step is shortened so the final grid point lands on t1
    exactly.  Raises on a non-finite state or step size.
    """
    ham = as_hamiltonian(H)
    dt = float(dt)
    if not (dt > 0) or not math.isfinite(dt):
        raise ValueError('step size must be positive and finite')
    t0, t1 = float(t0), float(t1)
    if t1 < t0:
        raise ValueError('backward integration is not supported')
    shape = s0._shape
    y = _pack(s0)
    if not np.isfinite(y).all():
        raise FloatingPointError('non-finite initial state')

    times = [t0]
    states = [s0.copy()]
    span = t1 - t0
    nsteps = 0 if span == 0 else max(1, math.ceil(span / dt - 1e-9))
    for i in range(nsteps):
        ti = t0 + i * dt
        h = min(dt, t1 - ti)
        y = _rk4_step(ham, y, h, shape)
        if not np.isfinite(y).all():
            raise FloatingPointError('state became non-finite at t=%g'
                                     % (ti + h))
        times.append(t1 if i == nsteps - 1 else t0 + (i + 1) * dt)
        states.append(_unpack(y, shape))
    return FlowResult(times, states, dt)


def flow_map(H, phi0, t, dt=1e-3):
    """Transported phase-space point only (ghost blocks left empty)."""
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
    d = phi0.size
    s = ExtendedState(phi0, c=np.zeros((d, 0)), cb=np.zeros((d, 0)))
    return integrate(H, s, 0.0, t, dt).final().phi


def jacobi_check(H, phi0, v, t, h, dt=1e-3):
    """Max-norm gap between the transported ghost direction and the
    forward-difference variation of the flow map.

    The ghost c starts at v (a single frame column), the comparison flow
    starts at phi0 + h v; the gap is first order in h.
    """
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = phi0.size
    s0 = ExtendedState(phi0, c=v.reshape(d, 1), cb=np.zeros((d, 0)))
    end = integrate(H, s0, 0.0, t, dt).final()
    shifted = flow_map(H, phi0 + h * v, t, dt=dt)
    gap = end.c[:, 0] - (shifted - end.phi) / h
    return float(np.max(np.abs(gap)))


def _state_elements(s, registry):
    """Ghost and auxiliary-momentum values as elements over the frame
    registry: (c list, cb list, lam list), one entry per index a."""
    d, m, k = s._shape
    if k > len(registry.names) // 2 or m > len(registry.names) // 2:
        raise ValueError('frame larger than the registry')
    e = [GrassmannElement.gen(registry, 'e%d' % (j + 1)) for j in range(k)]
    eb = [GrassmannElement.gen(registry, 'eb%d' % (j + 1)) for j in range(m)]
    c_el, cb_el, lam_el = [], [], []
    for a in range(d):
        x = GrassmannElement.zero(registry)
        for j in range(k):
            if s.c[a, j]:
                x = x + e[j] * float(s.c[a, j])
        c_el.append(x)
        x = GrassmannElement.zero(registry)
        for j in range(m):
            if s.cb[a, j]:
                x = x + eb[j] * float(s.cb[a, j])
        cb_el.append(x)
        x = GrassmannElement.scalar(registry, complex(s.lam[a]))
        for j in range(m):
            for l in range(k):
                coef = s.lam_bilinear[a, j, l]
                if coef:
                    x = x + eb[j] * e[l] * complex(coef)
        lam_el.append(x)
    return c_el, cb_el, lam_el


def charge_values(H, s, registry=None):
    """The conserved charges evaluated on a state, as elements over the
    odd frame registry.

    Returns a name-to-element map covering the two translation charges,
    their H-deformed partners, the two ghost quadratics, the ghost
    number, the two H contractions and the evolution generator.
    """
    ham = as_hamiltonian(H)
    d = s.dim
    if registry is None:
        registry = odd_basis_registry(s.n)
    c_el, cb_el, lam_el = _state_elements(s, registry)
    w = SymplecticForm(s.n)
    grad = ham.gradient(s.phi)
    hess = ham.hessian(s.phi)
    zero = GrassmannElement.zero(registry)
    i_unit = complex(0.0, 1.0)

    q_brs = zero
    qbar_brs = zero
    for a in range(d):
        q_brs = q_brs + c_el[a] * lam_el[a] * i_unit
        for b in range(d):
            sgn = w.upper(a, b)
            if sgn:
                qbar_brs = qbar_brs + cb_el[a] * lam_el[b] * (i_unit * sgn)

    n_c = zero
    nbar_c = zero
    for a in range(d):
        if grad[a]:
            n_c = n_c + c_el[a] * float(grad[a])
        for b in range(d):
            sgn = w.upper(a, b)
            if sgn and grad[b]:
                nbar_c = nbar_c + cb_el[a] * float(sgn * grad[b])

    k_ch = zero
    kbar_ch = zero
    for a in range(d):
        for b in range(d):
            up = w.upper(a, b)
            if up:
                k_ch = k_ch + c_el[a] * c_el[b] * (-0.5 * up)  # lower index
                kbar_ch = kbar_ch + cb_el[a] * cb_el[b] * (0.5 * up)

    q_g = zero
    for a in range(d):
        q_g = q_g + c_el[a] * cb_el[a]

    htilde = zero
    for a in range(d):
        for b in range(d):
            sgn = w.upper(a, b)
            if sgn and grad[b]:
                htilde = htilde + lam_el[a] * float(sgn * grad[b])
    M = _omega(s.n) @ hess
    for a in range(d):
        for b in range(d):
            if M[a, b]:
                htilde = htilde + cb_el[a] * c_el[b] * (i_unit * M[a, b])

    return {
        'q_brs': q_brs, 'qbar_brs': qbar_brs,
        'q_h': q_brs - n_c, 'qbar_h': qbar_brs + nbar_c,
        'k': k_ch, 'kbar': kbar_ch, 'q_g': q_g,
        'n': n_c, 'nbar': nbar_c, 'htilde': htilde,
    }


def cpi_kernel_characteristics(H, phi0, t, points=None, sigma=0.1, dt=1e-3):
    """Characteristic curve of the delta-supported propagation.

    The kernel transports weight along the classical flow, so its entire
    content at time t is the transported point; for comparisons against
    sampled data the delta factor is mollified by an isotropic Gaussian
    of width sigma.  Returns a dict with 'endpoint', 'sigma' and, when
    sampling points are given, 'values' at those points.
    """
    endpoint = flow_map(H, phi0, t, dt=dt)
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError('mollifier width must be positive')
    out = {'endpoint': endpoint, 'sigma': sigma}
    if points is not None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != endpoint.size:
            raise ValueError('sample points must live in the phase space')
        diff = pts - endpoint[None, :]
        norm = (2.0 * math.pi * sigma ** 2) ** (-endpoint.size / 2.0)
        out['values'] = norm * np.exp(
            -np.sum(diff * diff, axis=1) / (2.0 * sigma ** 2))
    return out


def _mono_label(registry, mono):
    if not mono:
        return '1'
    return '.'.join(registry.names[i] for i in mono)


def write_trajectory_csv(flow, H, path):
    """Trajectory dump: time, phi, lam, ghost coefficients and the charge
    coefficients (split into real and imaginary parts), one row per grid
    point."""
    ham = as_hamiltonian(H)
    s0 = flow.states[0]
    d, m, k = s0._shape
    n = s0.n
    registry = odd_basis_registry(n)

    rows_charges = [charge_values(ham, s, registry) for s in flow.states]
    monos = {name: set() for name in CHARGE_NAMES}
    for ch in rows_charges:
        for name in CHARGE_NAMES:
            monos[name].update(ch[name].terms.keys())
    monos = {name: sorted(ms, key=lambda t: (len(t), t))
             for name, ms in monos.items()}

    header = ['t']
    header += ['q%d' % (i + 1) for i in range(n)]
    header += ['p%d' % (i + 1) for i in range(n)]
    header += ['lq%d' % (i + 1) for i in range(n)]
    header += ['lp%d' % (i + 1) for i in range(n)]
    header += ['c%d_e%d' % (a + 1, j + 1) for a in range(d) for j in range(k)]
    header += ['cb%d_eb%d' % (a + 1, j + 1) for a in range(d) for j in range(m)]
    for name in CHARGE_NAMES:
        for mo in monos[name]:
            label = '%s[%s]' % (name, _mono_label(registry, mo))
            header += [label + '.re', label + '.im']

    with open(path, 'w', newline='') as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for t, s, ch in zip(flow.times, flow.states, rows_charges):
            row = [repr(float(t))]
            row += [repr(float(x)) for x in s.phi]
            row += [repr(float(x)) for x in s.lam]
            row += [repr(float(x)) for x in s.c.ravel()]
            row += [repr(float(x)) for x in s.cb.ravel()]
            for name in CHARGE_NAMES:
                el = ch[name]
                for mo in monos[name]:
                    v = complex(el.terms.get(mo, 0.0))
                    row += [repr(v.real), repr(v.imag)]
            out.writerow(row)
