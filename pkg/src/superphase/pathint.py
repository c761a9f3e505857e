"""Time-sliced propagators for one-dimensional quadratic systems.

The N-slice coordinate action is assembled exactly as a quadratic form
over the integration variables,

    A = sum_n [ p_n (q_n - q_{n-1}) - eps H(p_n, q_n) ],    (q_0, q_N) fixed,

with the momentum polarization mirrored through the discrete surface
term,

    B = sum_n [ -q_n (p_n - p_{n-1}) - eps H(p_n, q_n) ],   (p_0, p_N) fixed.

Kernels are evaluated in the closed Gaussian form (log-amplitude plus
signature phase), never by sampling.  The same parsed Hamiltonian also
feeds the classical sliced flow and the source-coupled generating
functionals, whose discrete equation-of-motion residuals vanish linearly
with the slice step.
"""

from __future__ import annotations

import cmath
import csv
import math
from collections import namedtuple

import numpy as np
from scipy.linalg import expm

from . import dynamics
from .superfield import substitute
from .symexpr import PolyExpr, parse

__all__ = [
    'FocalError', 'SlicedWeightSource', 'QuadraticAction', 'BoundaryForm',
    'GeneratingFunctional', 'SuperSource', 'SlicedFlow',
    'qpi_kernel_q', 'qpi_kernel_p', 'free_particle_kernel',
    'oscillator_kernel', 'oscillator_kernel_momentum',
    'fourier_transformed_kernel', 'slice_ordering_phase',
    'fourier_consistency_residual', 'compose_kernel_q', 'semigroup_residual',
    'cpi_sliced_kernel', 'ds_residual_quantum', 'ds_residual_classical',
    'residual_sweep', 'write_kernel_ladder_csv', 'write_residual_sweep_csv',
]

_OMEGA = np.array([[0.0, 1.0], [-1.0, 0.0]])

# Relative eigenvalue cutoff below which a sliced Gaussian form counts as
# singular (focal point, or a delta-supported kernel such as the free
# particle in the momentum polarization).
_SINGULAR_TOL = 1e-10


class FocalError(ValueError):
    """The sliced Gaussian form is singular: the kernel is not a number."""


def _quadratic_coefficients(hamiltonian):
    """Return (poly, (hpp, hqq, hpq, hp, hq, h0)) with H written as
    hpp p^2/2 + hqq q^2/2 + hpq pq + hp p + hq q + h0."""
    P = parse(hamiltonian) if isinstance(hamiltonian, str) else hamiltonian
    if not isinstance(P, PolyExpr):
        raise TypeError('expected a polynomial or source text')
    if P.n != 1:
        raise ValueError('sliced kernels cover one degree of freedom')
    if P.degree() > 2:
        raise ValueError('closed Gaussian slicing needs a quadratic hamiltonian')
    hpp = hqq = hpq = hp = hq = h0 = 0.0
    for e, coef in P.terms.items():
        c = complex(coef)
        if c.imag:
            raise ValueError('hamiltonian coefficients must be real')
        c = c.real
        if e == (0, 0):
            h0 = c
        elif e == (1, 0):
            hq = c
        elif e == (0, 1):
            hp = c
        elif e == (2, 0):
            hqq = 2 * c
        elif e == (0, 2):
            hpp = 2 * c
        else:
            hpq = c
    return P, (hpp, hqq, hpq, hp, hq, h0)


class SlicedWeightSource:
    """One parsed Hamiltonian feeding both slicing pipelines.

    The quantum weight is the literal slice-Lagrangian sum (coordinate or
    momentum polarization); the classical weight draws on the identical
    polynomial through the superfield expansion and the extended flow
    equations.  Keeping a single object makes the correspondence between
    the two constructions checkable by identity rather than by convention.
    """

    def __init__(self, hamiltonian):
        P = parse(hamiltonian) if isinstance(hamiltonian, str) else hamiltonian
        if not isinstance(P, PolyExpr):
            raise TypeError('expected a polynomial or source text')
        self.hamiltonian = P
        self.extended = dynamics.as_hamiltonian(P)

    def quantum_action(self, qs, ps, eps, polarization='q'):
        """Direct evaluation of the slice sum on explicit lattice paths.

        'q': qs = (q_0 .. q_N), ps = (p_1 .. p_N).
        'p': ps = (p_0 .. p_N), qs = (q_1 .. q_N).
        """
        H = self.hamiltonian
        qs = [float(v) for v in qs]
        ps = [float(v) for v in ps]
        if polarization == 'q':
            if len(qs) != len(ps) + 1:
                raise ValueError('coordinate path needs one more point than the momentum path')
            total = 0.0
            for n in range(1, len(qs)):
                p = ps[n - 1]
                total += p * (qs[n] - qs[n - 1]) - eps * H.evaluate([qs[n], p])
            return total
        if polarization == 'p':
            if len(ps) != len(qs) + 1:
                raise ValueError('momentum path needs one more point than the coordinate path')
            total = 0.0
            for n in range(1, len(ps)):
                q = qs[n - 1]
                total += -q * (ps[n] - ps[n - 1]) - eps * H.evaluate([q, ps[n]])
            return total
        raise ValueError("polarization must be 'q' or 'p'")

    def classical_expansion(self):
        """Superfield expansion of the Hamiltonian; its top component is the
        extended generator the classical weight exponentiates."""
        return substitute(self.hamiltonian)

    def classical_rates(self, state):
        return dynamics.extended_rhs(self.extended, state)


class BoundaryForm:
    """Sliced kernel with the interior integrated out:

        value(y) = exp(log_amp + i phase0 + (i/hbar)(y.G.y/2 + g1.y + g0))

    over the two boundary values y."""

    __slots__ = ('log_amp', 'phase0', 'G', 'g1', 'g0', 'hbar')

    def __init__(self, log_amp, phase0, G, g1, g0, hbar):
        self.log_amp = float(log_amp)
        self.phase0 = float(phase0)
        self.G = np.asarray(G, dtype=float)
        self.g1 = np.asarray(g1, dtype=float)
        self.g0 = float(g0)
        self.hbar = float(hbar)

    def value(self, y):
        y = np.asarray(y, dtype=float)
        expo = 0.5 * y @ self.G @ y + self.g1 @ y + self.g0
        return cmath.exp(complex(self.log_amp, self.phase0 + expo / self.hbar))

    def fourier(self, b0, b1):
        """(1/2 pi hbar) * integral dy0 dy1 e^{(i/hbar)(b0 y0 - b1 y1)} value(y),
        evaluated on the exact quadratic form."""
        lin = self.g1 + np.array([b0, -b1], dtype=float)
        w = np.linalg.eigvalsh(self.G)
        scale = max(np.max(np.abs(w)), 1.0)
        if np.min(np.abs(w)) <= _SINGULAR_TOL * scale:
            raise FocalError('boundary form is delta-supported: transform undefined')
        sig = int(np.sum(w > 0) - np.sum(w < 0))
        x = np.linalg.solve(self.G, lin)
        log_amp = self.log_amp - 0.5 * float(np.sum(np.log(np.abs(w))))
        phase = self.phase0 + math.pi * sig / 4 + (self.g0 - 0.5 * lin @ x) / self.hbar
        return cmath.exp(complex(log_amp, phase))


class QuadraticAction:
    """Exact quadratic-form data of the N-slice action.

    Integration variables: q_1..q_{N-1}, p_1..p_N ('q' polarization) or
    q_1..q_N, p_1..p_{N-1} ('p').  The exponent splits as

        A(x; y) = x.S.x/2 + (b0 + B.y).x + y.C2.y/2 + c1.y + c0

    with x the interior variables and y the two boundary values.  The
    kernel carries one (2 pi hbar)^{-1} per momentum integral, so the net
    normalization is (2 pi hbar)^{-1/2}.
    """

    def __init__(self, hamiltonian, t, N, boundary=None, polarization='q', hbar=1.0):
        if int(N) != N or N < 1:
            raise ValueError('slice count must be a positive integer')
        if not (t > 0 and math.isfinite(t)):
            raise ValueError('time must be positive and finite')
        if not (hbar > 0 and math.isfinite(hbar)):
            raise ValueError('hbar must be positive')
        if polarization not in ('q', 'p'):
            raise ValueError("polarization must be 'q' or 'p'")
        self.hamiltonian, self.coefficients = _quadratic_coefficients(hamiltonian)
        self.weights = SlicedWeightSource(self.hamiltonian)
        self.N = int(N)
        self.t = float(t)
        self.eps = self.t / self.N
        self.hbar = float(hbar)
        self.polarization = polarization
        self.boundary = (np.zeros(2) if boundary is None
                         else np.asarray(boundary, dtype=float).reshape(2))

        N = self.N
        if polarization == 'q':
            self.interior = ([('q', n) for n in range(1, N)]
                             + [('p', n) for n in range(1, N + 1)])
        else:
            self.interior = ([('q', n) for n in range(1, N + 1)]
                             + [('p', n) for n in range(1, N)])
        self._index = {s: i for i, s in enumerate(self.interior)}
        nv = len(self.interior)
        self.S = np.zeros((nv, nv))
        self.b0 = np.zeros(nv)
        self.Bc = np.zeros((nv, 2))
        self.C2 = np.zeros((2, 2))
        self.c1 = np.zeros(2)
        self.c0 = 0.0
        self._assemble()

    # boundary slots: ('q',0)/('q',N) in the coordinate polarization,
    # ('p',0)/('p',N) in the momentum one
    def _slot(self, kind, n):
        if (kind, n) in self._index:
            return 'i', self._index[kind, n]
        return 'b', 0 if n == 0 else 1

    def _quad(self, s1, s2, w):
        k1, i1 = self._slot(*s1)
        k2, i2 = self._slot(*s2)
        if k1 == 'i' and k2 == 'i':
            if i1 == i2:
                self.S[i1, i1] += 2 * w
            else:
                self.S[i1, i2] += w
                self.S[i2, i1] += w
        elif k1 == 'i':
            self.Bc[i1, i2] += w
        elif k2 == 'i':
            self.Bc[i2, i1] += w
        elif i1 == i2:
            self.C2[i1, i1] += 2 * w
        else:
            self.C2[i1, i2] += w
            self.C2[i2, i1] += w

    def _lin(self, s, w):
        k, i = self._slot(*s)
        if k == 'i':
            self.b0[i] += w
        else:
            self.c1[i] += w

    def _assemble(self):
        hpp, hqq, hpq, hp, hq, h0 = self.coefficients
        eps = self.eps
        for n in range(1, self.N + 1):
            if self.polarization == 'q':
                self._quad(('p', n), ('q', n), 1.0)
                self._quad(('p', n), ('q', n - 1), -1.0)
            else:
                self._quad(('q', n), ('p', n), -1.0)
                self._quad(('q', n), ('p', n - 1), 1.0)
            self._quad(('p', n), ('p', n), -eps * hpp / 2)
            self._quad(('q', n), ('q', n), -eps * hqq / 2)
            self._quad(('q', n), ('p', n), -eps * hpq)
            self._lin(('p', n), -eps * hp)
            self._lin(('q', n), -eps * hq)
            self.c0 += -eps * h0

    @property
    def matrix(self):
        return self.S.copy()

    def linear(self, boundary=None):
        y = self.boundary if boundary is None else np.asarray(boundary, float)
        return self.b0 + self.Bc @ y

    def constant(self, boundary=None):
        y = self.boundary if boundary is None else np.asarray(boundary, float)
        return 0.5 * y @ self.C2 @ y + self.c1 @ y + self.c0

    def quadratic_value(self, interior, boundary=None):
        """Action value from the assembled quadratic form."""
        x = np.asarray(interior, dtype=float)
        return float(0.5 * x @ self.S @ x + self.linear(boundary) @ x
                     + self.constant(boundary))

    def evaluate(self, interior, boundary=None):
        """Action value from the literal slice sum (shared weight source);
        must agree with quadratic_value exactly."""
        x = np.asarray(interior, dtype=float)
        y = self.boundary if boundary is None else np.asarray(boundary, float)
        N = self.N
        if self.polarization == 'q':
            qs = np.concatenate([[y[0]], x[:N - 1], [y[1]]])
            ps = x[N - 1:]
        else:
            qs = x[:N]
            ps = np.concatenate([[y[0]], x[N:], [y[1]]])
        return self.weights.quantum_action(qs, ps, self.eps, self.polarization)

    def _interior_eigen(self):
        w = np.linalg.eigvalsh(self.S)
        scale = max(float(np.max(np.abs(w))), 1.0)
        if float(np.min(np.abs(w))) <= _SINGULAR_TOL * scale:
            raise FocalError(
                'singular sliced Gaussian form (%s polarization, N=%d): '
                'focal point or delta-supported kernel'
                % (self.polarization, self.N))
        return w

    def gaussian_value(self, extra_linear=None, extra_const=0.0):
        """Closed-form Gaussian integral over the interior variables at the
        stored boundary, with an optional source shift of the linear term."""
        w = self._interior_eigen()
        b = self.linear()
        if extra_linear is not None:
            b = b + extra_linear
        sig = int(np.sum(w > 0) - np.sum(w < 0))
        logdet = float(np.sum(np.log(np.abs(w))))
        x = np.linalg.solve(self.S, b)
        nv = len(b)
        log_amp = ((nv / 2 - self.N) * math.log(2 * math.pi * self.hbar)
                   - 0.5 * logdet)
        expo = self.constant() + extra_const - 0.5 * b @ x
        return cmath.exp(complex(log_amp, math.pi * sig / 4 + expo / self.hbar))

    def kernel(self):
        return self.gaussian_value()

    def boundary_form(self):
        """Integrate the interior analytically, leaving the quadratic form in
        the two boundary values (Schur complement of S)."""
        w = self._interior_eigen()
        sig = int(np.sum(w > 0) - np.sum(w < 0))
        logdet = float(np.sum(np.log(np.abs(w))))
        rhs = np.hstack([self.b0[:, None], self.Bc])
        X = np.linalg.solve(self.S, rhs)
        G = self.C2 - self.Bc.T @ X[:, 1:]
        g1 = self.c1 - self.Bc.T @ X[:, 0]
        g0 = self.c0 - 0.5 * self.b0 @ X[:, 0]
        nv = self.S.shape[0]
        log_amp = ((nv / 2 - self.N) * math.log(2 * math.pi * self.hbar)
                   - 0.5 * logdet)
        return BoundaryForm(log_amp, math.pi * sig / 4, G, g1, g0, self.hbar)


def qpi_kernel_q(hamiltonian, q0, q1, t, N, hbar=1.0):
    """N-slice propagator between coordinate boundaries."""
    return QuadraticAction(hamiltonian, t, N, (q0, q1), 'q', hbar).kernel()


def qpi_kernel_p(hamiltonian, p0, p1, t, N, hbar=1.0):
    """N-slice propagator between momentum boundaries (surface-term
    polarization); delta-supported configurations raise FocalError."""
    return QuadraticAction(hamiltonian, t, N, (p0, p1), 'p', hbar).kernel()


def fourier_transformed_kernel(hamiltonian, p0, p1, t, N, hbar=1.0):
    """Double transform of the sliced coordinate kernel over both of its
    boundaries, done on the exact boundary-reduced Gaussian form."""
    bf = QuadraticAction(hamiltonian, t, N, None, 'q', hbar).boundary_form()
    return bf.fourier(p0, p1)


def slice_ordering_phase(hamiltonian, p0, p1, eps, hbar=1.0):
    """Boundary factor exp(-i eps [f(p1) - f(p0)] / hbar), f the momentum
    part of H.  The two polarizations order the kinetic slice factor on
    opposite sides, which conjugates the transfer operator by exp(i eps f);
    separable Hamiltonians only."""
    _, (hpp, hqq, hpq, hp, hq, h0) = _quadratic_coefficients(hamiltonian)
    if hpq:
        raise ValueError('ordering phase requires a separable hamiltonian')
    f = lambda p: 0.5 * hpp * p * p + hp * p
    return cmath.exp(complex(0.0, -eps * (f(p1) - f(p0)) / hbar))


def fourier_consistency_residual(hamiltonian, p0, p1, t, N, hbar=1.0):
    """|K_p - phase * FT(K_q)| at equal slicing; exactly zero in infinite
    precision once the ordering phase is carried."""
    kp = qpi_kernel_p(hamiltonian, p0, p1, t, N, hbar)
    ft = fourier_transformed_kernel(hamiltonian, p0, p1, t, N, hbar)
    ph = slice_ordering_phase(hamiltonian, p0, p1, t / N, hbar)
    return abs(kp - ph * ft)


def compose_kernel_q(hamiltonian, q0, q1, t1, N1, t2, N2, hbar=1.0):
    """Integral over the shared boundary of two sliced kernels, evaluated on
    the exact boundary forms; requires a common slice step."""
    e1, e2 = t1 / N1, t2 / N2
    if abs(e1 - e2) > 1e-12 * max(e1, e2):
        raise ValueError('composition requires a common slice step')
    f1 = QuadraticAction(hamiltonian, t1, N1, None, 'q', hbar).boundary_form()
    f2 = QuadraticAction(hamiltonian, t2, N2, None, 'q', hbar).boundary_form()
    a = f1.G[1, 1] + f2.G[0, 0]
    scale = max(1.0, float(np.max(np.abs(f1.G))), float(np.max(np.abs(f2.G))))
    if abs(a) <= _SINGULAR_TOL * scale:
        raise FocalError('composition point is focal')
    lin = f1.G[0, 1] * q0 + f2.G[0, 1] * q1 + f1.g1[1] + f2.g1[0]
    const = (0.5 * f1.G[0, 0] * q0 ** 2 + f1.g1[0] * q0 + f1.g0
             + 0.5 * f2.G[1, 1] * q1 ** 2 + f2.g1[1] * q1 + f2.g0)
    log_amp = (f1.log_amp + f2.log_amp
               + 0.5 * math.log(2 * math.pi * hbar) - 0.5 * math.log(abs(a)))
    phase = (f1.phase0 + f2.phase0 + math.pi * math.copysign(1.0, a) / 4
             + (const - lin * lin / (2 * a)) / hbar)
    return cmath.exp(complex(log_amp, phase))


def semigroup_residual(hamiltonian, q0, q1, t1, N1, t2, N2, hbar=1.0):
    comp = compose_kernel_q(hamiltonian, q0, q1, t1, N1, t2, N2, hbar)
    direct = qpi_kernel_q(hamiltonian, q0, q1, t1 + t2, N1 + N2, hbar)
    return abs(comp - direct)


def free_particle_kernel(q0, q1, t, hbar=1.0):
    """(2 pi i hbar t)^{-1/2} exp(i (q1-q0)^2 / 2 hbar t); the slicing
    reproduces it exactly at every N."""
    if not (t > 0):
        raise ValueError('time must be positive')
    amp = (2 * math.pi * hbar * t) ** -0.5
    return amp * cmath.exp(complex(0.0, (q1 - q0) ** 2 / (2 * hbar * t)
                                   - math.pi / 4))


def _maslov(omega, t):
    s = math.sin(omega * t)
    if abs(s) < 1e-12:
        raise FocalError('focal time: sin(omega t) vanishes')
    return s, math.floor(omega * t / math.pi)


def oscillator_kernel(omega, q0, q1, t, hbar=1.0):
    """Closed-form oscillator propagator in position space, with the branch
    phase dropping by pi/2 at each focal time."""
    s, m = _maslov(omega, t)
    amp = math.sqrt(omega / (2 * math.pi * hbar * abs(s)))
    phase = (omega * ((q0 * q0 + q1 * q1) * math.cos(omega * t) - 2 * q0 * q1)
             / (2 * hbar * s) - math.pi / 4 - m * math.pi / 2)
    return amp * cmath.exp(1j * phase)


def oscillator_kernel_momentum(omega, p0, p1, t, hbar=1.0):
    """Position form transported to momentum space (effective mass
    1/omega^2); the small-omega limit is the mollified free-particle delta."""
    s, m = _maslov(omega, t)
    amp = math.sqrt(1.0 / (2 * math.pi * hbar * omega * abs(s)))
    phase = (((p0 * p0 + p1 * p1) * math.cos(omega * t) - 2 * p0 * p1)
             / (2 * hbar * omega * s) - math.pi / 4 - m * math.pi / 2)
    return amp * cmath.exp(1j * phase)


class SlicedFlow:
    """Composition of single-slice deterministic propagation maps."""

    __slots__ = ('endpoint', 'jacobian', 'slice_jacobians')

    def __init__(self, endpoint, jacobian, slice_jacobians):
        self.endpoint = np.asarray(endpoint, dtype=float)
        self.jacobian = np.asarray(jacobian, dtype=float)
        self.slice_jacobians = [np.asarray(j, dtype=float)
                                for j in slice_jacobians]

    @property
    def slice_determinants(self):
        return [float(np.linalg.det(j)) for j in self.slice_jacobians]

    @property
    def determinant(self):
        out = 1.0
        for d in self.slice_determinants:
            out *= d
        return out

    def __repr__(self):
        return 'SlicedFlow(endpoint=%r, slices=%d)' % (
            self.endpoint.tolist(), len(self.slice_jacobians))


def cpi_sliced_kernel(hamiltonian, phi0, t, N, dt=1e-3):
    """Classical sliced propagation: N delta-supported slice maps composed
    into a flow map with its Jacobi matrix.  Quadratic Hamiltonians use the
    exact affine matrix exponential per slice; anything else integrates each
    slice with the extended-flow integrator."""
    if int(N) != N or N < 1:
        raise ValueError('slice count must be a positive integer')
    ham = dynamics.as_hamiltonian(hamiltonian)
    phi = np.asarray(phi0, dtype=float).reshape(2)
    if getattr(ham, 'n', None) != 1:
        raise ValueError('sliced classical kernels cover one degree of freedom')
    eps = float(t) / int(N)
    quadratic = (isinstance(ham, dynamics.PolyHamiltonian)
                 and ham.poly.degree() <= 2)
    slices = []
    if quadratic:
        hess = ham.hessian(np.zeros(2))
        hlin = ham.gradient(np.zeros(2))
        aug = np.zeros((3, 3))
        aug[:2, :2] = _OMEGA @ hess
        aug[:2, 2] = _OMEGA @ hlin
        step = expm(eps * aug)
        A, d = step[:2, :2], step[:2, 2]
        for _ in range(int(N)):
            phi = A @ phi + d
            slices.append(A)
    else:
        for _ in range(int(N)):
            s0 = dynamics.ExtendedState(phi, c=np.eye(2), cb=np.zeros((2, 0)))
            end = dynamics.integrate(ham, s0, 0.0, eps, min(dt, eps)).final()
            phi = end.phi
            slices.append(end.c.real)
    jac = np.eye(2)
    for j in slices:
        jac = j @ jac
    return SlicedFlow(phi, jac, slices)


SuperSource = namedtuple('SuperSource', ['j_phi', 'j_lam', 'j_c', 'j_cb'])
SuperSource.__new__.__defaults__ = (None, None, None, None)
SuperSource.__doc__ = """Current multiplet coupled to the classical sliced
functional.  Only the phase-space current j_phi enters numerics; the
lambda and ghost currents live in the symbolic weight (superfield and
operator pipelines) and are rejected by the numeric entry points."""


def _phi_current(source):
    if source is None:
        return lambda s: np.zeros(2)
    if isinstance(source, SuperSource):
        if (source.j_lam is not None or source.j_c is not None
                or source.j_cb is not None):
            raise ValueError('lambda and ghost currents are symbolic only; '
                             'numeric evaluation takes the phi current')
        return _phi_current(source.j_phi)
    if callable(source):
        return lambda s: np.asarray(source(s), dtype=float).reshape(2)
    raise TypeError('source must be a callable of time, a SuperSource, or None')


class GeneratingFunctional:
    """Source-coupled sliced functional Z[J].

    mode 'quantum': the closed Gaussian over the coordinate-polarization
    slicing with sources coupled as eps * J per slice, so the lattice
    functional derivative (1/eps) d/dJ_n pulls down the driven mean path.

    mode 'classical': support on the driven implicit slice map
    phi_n = phi_{n-1} + eps * Omega (grad H(phi_n) - J(t_n)), solved by
    Newton iteration, with Z = exp(i sum_n eps J(t_n).phi_n).
    """

    def __init__(self, hamiltonian, t, N, mode='quantum', boundary=None,
                 phi0=None, hbar=1.0):
        if mode not in ('quantum', 'classical'):
            raise ValueError("mode must be 'quantum' or 'classical'")
        self.mode = mode
        self.t = float(t)
        self.N = int(N)
        self.eps = self.t / self.N
        self.hbar = float(hbar)
        if mode == 'quantum':
            self.action = QuadraticAction(hamiltonian, t, N, boundary, 'q', hbar)
            self.hamiltonian = self.action.hamiltonian
        else:
            if phi0 is None:
                raise ValueError('classical mode needs an initial phase-space point')
            self.ham = dynamics.as_hamiltonian(hamiltonian)
            if getattr(self.ham, 'n', None) != 1:
                raise ValueError('one degree of freedom only')
            self.phi0 = np.asarray(phi0, dtype=float).reshape(2)

    def _samples(self, source):
        J = _phi_current(source)
        return np.array([J(n * self.eps) for n in range(self.N + 1)])

    # -- quantum branch -------------------------------------------------

    def _source_terms(self, J):
        act = self.action
        extra = np.zeros(len(act.interior))
        for (kind, n), i in act._index.items():
            extra[i] = act.eps * J[n, 0 if kind == 'q' else 1]
        # boundary slots are q_0 and q_N: their sources only add a phase
        const = act.eps * (J[0, 0] * act.boundary[0]
                           + J[self.N, 0] * act.boundary[1])
        return extra, const

    def value(self, source=None):
        if self.mode == 'classical':
            J = self._samples(source)
            phi = self.driven_path(source)
            acc = sum(self.eps * float(J[n] @ phi[n])
                      for n in range(1, self.N + 1))
            return cmath.exp(1j * acc)
        extra, const = self._source_terms(self._samples(source))
        return self.action.gaussian_value(extra, const)

    def mean_path(self, source=None):
        """Driven stationary lattice path (q_n, p_n); p_0 is not a lattice
        variable and is reported as nan."""
        if self.mode != 'quantum':
            raise ValueError('mean_path belongs to the quantum mode')
        act = self.action
        extra, _ = self._source_terms(self._samples(source))
        x = -np.linalg.solve(act.S, act.linear() + extra)
        path = np.full((self.N + 1, 2), np.nan)
        path[0, 0] = act.boundary[0]
        path[self.N, 0] = act.boundary[1]
        for (kind, n), i in act._index.items():
            path[n, 0 if kind == 'q' else 1] = x[i]
        return path

    def residual(self, source=None):
        """Discrete equation-of-motion residual of the continuum stencil
        applied to the driven path; one row per interior slice."""
        J = self._samples(source)
        hpp, hqq, hpq, hp, hq, _ = (self.action.coefficients
                                    if self.mode == 'quantum'
                                    else (0,) * 6)
        if self.mode == 'quantum':
            hess = np.array([[hqq, hpq], [hpq, hpp]])
            hlin = np.array([hq, hp])
            path = self.mean_path(source)
            R = np.empty((self.N - 1, 2))
            for n in range(2, self.N + 1):
                drift = _OMEGA @ (hess @ path[n] + hlin)
                R[n - 2] = (path[n] - path[n - 1]) / self.eps - drift \
                    + _OMEGA @ J[n]
            return R
        phi = self.driven_path(source)
        R = np.empty((self.N - 1, 2))
        for n in range(1, self.N):
            grad = self.ham.gradient(phi[n])
            R[n - 1] = ((phi[n + 1] - phi[n - 1]) / (2 * self.eps)
                        - _OMEGA @ (grad - J[n]))
        return R

    # -- classical branch -----------------------------------------------

    def driven_path(self, source=None):
        if self.mode != 'classical':
            raise ValueError('driven_path belongs to the classical mode')
        J = self._samples(source)
        phi = np.empty((self.N + 1, 2))
        phi[0] = self.phi0
        eye = np.eye(2)
        for n in range(1, self.N + 1):
            x = phi[n - 1].copy()
            for _ in range(60):
                F = x - phi[n - 1] - self.eps * (_OMEGA @ (self.ham.gradient(x)
                                                           - J[n]))
                if not np.all(np.isfinite(F)):
                    break
                if np.max(np.abs(F)) <= 1e-12 * (1.0 + np.max(np.abs(x))):
                    break
                Jac = eye - self.eps * (_OMEGA @ self.ham.hessian(x))
                x = x - np.linalg.solve(Jac, F)
            else:
                raise RuntimeError('implicit slice map failed to converge '
                                   'at slice %d' % n)
            if not np.all(np.isfinite(x)):
                raise RuntimeError('implicit slice map diverged at slice %d' % n)
            phi[n] = x
        return phi

    def response(self, source):
        """Path shift relative to the source-free flow; additive in the
        source for quadratic Hamiltonians."""
        return self.driven_path(source) - self.driven_path(None)


def ds_residual_quantum(hamiltonian, source, t, N, q0=0.0, q1=0.0, hbar=1.0):
    """Residual of the discretized operator equation of motion on the
    quantum generating functional; O(eps), exactly zero for the free
    particle without sources."""
    Z = GeneratingFunctional(hamiltonian, t, N, 'quantum', (q0, q1), hbar=hbar)
    R = Z.residual(source)
    return {'residual': R, 'norm': float(np.max(np.abs(R))),
            'value': Z.value(source)}


def ds_residual_classical(hamiltonian, source, t, N, phi0):
    """Residual of the same stencil on the classical functional, whose
    support is the driven implicit slice map."""
    Z = GeneratingFunctional(hamiltonian, t, N, 'classical', phi0=phi0)
    R = Z.residual(source)
    phi = Z.driven_path(source)
    return {'residual': R, 'norm': float(np.max(np.abs(R))),
            'value': Z.value(source), 'path': phi}


def residual_sweep(hamiltonian, source, t, slice_counts, mode='quantum',
                   q0=0.0, q1=0.0, phi0=(1.0, 0.0), hbar=1.0):
    rows = []
    for N in slice_counts:
        if mode == 'quantum':
            r = ds_residual_quantum(hamiltonian, source, t, N, q0, q1, hbar)
        else:
            r = ds_residual_classical(hamiltonian, source, t, N, phi0)
        rows.append({'mode': mode, 'slices': int(N), 'step': t / N,
                     'norm': r['norm']})
    return rows


def write_kernel_ladder_csv(path, hamiltonian, q0, q1, t, slice_counts,
                            hbar=1.0, reference=None):
    """Kernel table over a slice-count ladder; the err column compares
    against a reference value when one is supplied."""
    ref = complex(reference) if reference is not None else None
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh)
        w.writerow(['slices', 'step', 're', 'im', 'abs', 'err'])
        for N in slice_counts:
            K = qpi_kernel_q(hamiltonian, q0, q1, t, N, hbar)
            err = '' if ref is None else repr(abs(K - ref))
            w.writerow([int(N), repr(t / N), repr(K.real), repr(K.imag),
                        repr(abs(K)), err])


def write_residual_sweep_csv(path, rows):
    with open(path, 'w', newline='') as fh:
        w = csv.DictWriter(fh, fieldnames=['mode', 'slices', 'step', 'norm'])
        w.writeheader()
        for row in rows:
            w.writerow({'mode': row['mode'], 'slices': row['slices'],
                        'step': repr(row['step']), 'norm': repr(row['norm'])})
