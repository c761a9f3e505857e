"""Grid evolution of L2 waves on phase space.

A wave psi(q, p) evolves by i dpsi/dt = L psi with the first-order
generator

    L = -i (d_p H) d_q + i (d_q H) d_p

so |psi|^2 obeys the same advection equation and stays a Liouville
density.  The discretization is spectral in space (periodic rectangle,
power-of-two sizes) with classical fourth-order time stepping; the
generator is hyperbolic and any numerical diffusion would blur the
|psi|^2 consistency this module exists to check.

The domain is periodic purely for the Fourier transform's sake.  Waves
must stay away from the boundary (a three-cell shell is enforced) and a
warning is raised when spectral content piles up in the top modes.

The ghost content of a wave factorizes for the linear ghost equations:
the grid carries the scalar component and the form components are
transported along characteristics by the Jacobi propagator of
`dynamics`, see ghost_sector_transport.
"""

import csv
import math
import struct
import warnings

import numpy as np
from scipy import fft as _fft

from .dynamics import ExtendedState, as_hamiltonian, integrate
from .symexpr import PolyExpr, parse

__all__ = [
    'PhaseGrid', 'KvNWave', 'gaussian_wave', 'sample_wave',
    'liouvillian_apply', 'evolve', 'rho_consistency', 'observable_flow',
    'ghost_sector_transport', 'write_grid_dump', 'read_grid_dump',
    'write_marginals_csv',
]

WRAP_SHELL = 3          # cells of guard band at each edge
WRAP_TOL = 1e-8         # relative amplitude allowed in the guard band
ALIAS_TOL = 1e-8        # top-mode energy fraction that triggers a warning
NORM_TOL = 1e-6         # relative norm drift that aborts a run


def _power_of_two(n):
    return n >= 4 and (n & (n - 1)) == 0


class PhaseGrid:
    """Periodic rectangle [q_min, q_max) x [p_min, p_max).

    Sizes must be powers of two; spectral differentiation uses the exact
    Fourier wavenumbers of the box.
    """

    def __init__(self, q_min, q_max, p_min, p_max, n_q, n_p):
        if not (q_max > q_min and p_max > p_min):
            raise ValueError('empty domain')
        if not (_power_of_two(n_q) and _power_of_two(n_p)):
            raise ValueError('grid sizes must be powers of two (and >= 4)')
        self.q_min, self.q_max = float(q_min), float(q_max)
        self.p_min, self.p_max = float(p_min), float(p_max)
        self.n_q, self.n_p = int(n_q), int(n_p)
        self.dq = (self.q_max - self.q_min) / self.n_q
        self.dp = (self.p_max - self.p_min) / self.n_p
        self.q = self.q_min + self.dq * np.arange(self.n_q)
        self.p = self.p_min + self.dp * np.arange(self.n_p)
        self.kq = 2.0 * math.pi * _fft.fftfreq(self.n_q, self.dq)
        self.kp = 2.0 * math.pi * _fft.fftfreq(self.n_p, self.dp)

    @property
    def shape(self):
        return (self.n_q, self.n_p)

    @property
    def cell(self):
        return self.dq * self.dp

    def mesh(self):
        return np.meshgrid(self.q, self.p, indexing='ij')

    def compatible(self, other):
        return (self.shape == other.shape
                and (self.q_min, self.q_max, self.p_min, self.p_max)
                == (other.q_min, other.q_max, other.p_min, other.p_max))

    @classmethod
    def square(cls, half_width, n):
        return cls(-half_width, half_width, -half_width, half_width, n, n)


class KvNWave:
    """Complex field on a PhaseGrid."""

    def __init__(self, grid, psi):
        self.grid = grid
        self.psi = np.asarray(psi, dtype=complex)
        if self.psi.shape != grid.shape:
            raise ValueError('field shape does not match the grid')

    def norm(self):
        return math.sqrt(float(np.sum(np.abs(self.psi) ** 2)) * self.grid.cell)

    def l2_distance(self, other):
        if not self.grid.compatible(other.grid):
            raise ValueError('waves live on different grids')
        return math.sqrt(float(np.sum(np.abs(self.psi - other.psi) ** 2))
                         * self.grid.cell)

    def density(self):
        """|psi|^2 wrapped as a wave so it can be evolved by the same code."""
        return KvNWave(self.grid, np.abs(self.psi) ** 2 + 0j)

    def copy(self):
        return KvNWave(self.grid, self.psi.copy())


def sample_wave(grid, fn):
    Q, P = grid.mesh()
    return KvNWave(grid, np.asarray(fn(Q, P), dtype=complex))


def gaussian_wave(grid, center=(0.0, 0.0), sigma=0.5, wavevector=(0.0, 0.0)):
    """Normalized Gaussian, optionally carrying a plane-wave phase."""
    q0, p0 = center
    kq, kp = wavevector
    Q, P = grid.mesh()
    amp = np.exp(-((Q - q0) ** 2 + (P - p0) ** 2) / (4.0 * sigma ** 2))
    phase = np.exp(1j * (kq * Q + kp * P))
    w = KvNWave(grid, amp * phase)
    return KvNWave(grid, w.psi / w.norm())


def _grid_velocity(H, grid):
    """Advection field (d_p H, -d_q H) sampled on the grid."""
    Q, P = grid.mesh()
    if isinstance(H, str):
        H = parse(H)
    if isinstance(H, PolyExpr):
        if H.n != 1:
            raise ValueError('grid evolution needs a single degree of freedom')
        dq = H.diff_index(0).evaluate([Q, P]) + np.zeros(grid.shape)
        dp = H.diff_index(1).evaluate([Q, P]) + np.zeros(grid.shape)
    else:
        ham = as_hamiltonian(H)
        dq = np.empty(grid.shape)
        dp = np.empty(grid.shape)
        for i in range(grid.n_q):
            for j in range(grid.n_p):
                g = ham.gradient((Q[i, j], P[i, j]))
                dq[i, j] = g[0]
                dp[i, j] = g[1]
    return dq, dp


class _Advection:
    """Prepared spectral advection on a fixed grid for a fixed H."""

    def __init__(self, H, grid):
        dq_h, dp_h = _grid_velocity(H, grid)
        self.grid = grid
        self.vq = dp_h          # qdot
        self.vp = -dq_h         # pdot
        self.speed = float(np.max(np.hypot(dq_h, dp_h)))
        self.ikq = (1j * grid.kq)[:, None]
        self.ikp = (1j * grid.kp)[None, :]

    def gradient(self, psi):
        gq = _fft.ifft(self.ikq * _fft.fft(psi, axis=0), axis=0)
        gp = _fft.ifft(self.ikp * _fft.fft(psi, axis=1), axis=1)
        return gq, gp

    def rhs(self, psi):
        """dpsi/dt = -i L psi, the advection form."""
        gq, gp = self.gradient(psi)
        return -(self.vq * gq + self.vp * gp)


def _alias_fraction(psi):
    """Energy fraction sitting in the highest-frequency row and column."""
    hat = _fft.fft2(psi)
    power = np.abs(hat) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    nq, np_ = psi.shape
    top = float(power[nq // 2, :].sum() + power[:, np_ // 2].sum()
                - power[nq // 2, np_ // 2])
    return top / total


def _check_alias(psi):
    frac = _alias_fraction(psi)
    if frac > ALIAS_TOL:
        warnings.warn('spectral content in the top modes (fraction %.3g): '
                      'the grid under-resolves this wave' % frac,
                      RuntimeWarning, stacklevel=3)


def _check_wrap(psi, where):
    peak = float(np.max(np.abs(psi)))
    if peak == 0.0:
        return
    s = WRAP_SHELL
    edge = max(float(np.max(np.abs(psi[:s, :]))),
               float(np.max(np.abs(psi[-s:, :]))),
               float(np.max(np.abs(psi[:, :s]))),
               float(np.max(np.abs(psi[:, -s:]))))
    if edge > WRAP_TOL * peak:
        raise RuntimeError(
            'wave support reached the domain boundary %s (edge/peak = %.3g); '
            'the periodic wrap is an artifact, enlarge the domain' %
            (where, edge / peak))


def liouvillian_apply(H, wave):
    """One application of the generator L to a wave (spectral gradients)."""
    adv = _Advection(H, wave.grid)
    _check_alias(wave.psi)
    return KvNWave(wave.grid, 1j * adv.rhs(wave.psi))


def evolve(H, wave, t, dt):
    """Evolution over time t with fixed fourth-order steps of size dt.

    Guards: the CFL-like bound dt * max|grad H| / min spacing <= 0.5 is
    required up front; the norm must not drift by more than a part in
    1e6 and the support must stay off the boundary shell, both checked
    every step.
    """
    t = float(t)
    dt = float(dt)
    if not (dt > 0) or not math.isfinite(dt):
        raise ValueError('step size must be positive and finite')
    if t < 0:
        raise ValueError('backward evolution is not supported')
    if t == 0:
        return wave.copy()
    grid = wave.grid
    adv = _Advection(H, grid)
    cfl = dt * adv.speed / min(grid.dq, grid.dp)
    if cfl > 0.5 + 1e-12:
        raise ValueError('time step too large: dt max|grad H| / spacing '
                         '= %.3g exceeds 0.5' % cfl)
    _check_wrap(wave.psi, 'initially')
    _check_alias(wave.psi)

    psi = wave.psi.copy()
    norm0 = wave.norm()
    scale = math.sqrt(grid.cell)
    nsteps = max(1, math.ceil(t / dt - 1e-9))
    for i in range(nsteps):
        h = min(dt, t - i * dt)
        k1 = adv.rhs(psi)
        k2 = adv.rhs(psi + (0.5 * h) * k1)
        k3 = adv.rhs(psi + (0.5 * h) * k2)
        k4 = adv.rhs(psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norm = math.sqrt(float(np.sum(np.abs(psi) ** 2))) * scale
        drift = abs(norm - norm0) / norm0 if norm0 else abs(norm)
        if drift > NORM_TOL:
            raise RuntimeError(
                'norm drift %.3g after step %d (t = %.6g): evolution is no '
                'longer unitary, reduce dt or refine the grid'
                % (drift, i + 1, min((i + 1) * dt, t)))
        _check_wrap(psi, 'at t = %.6g' % min((i + 1) * dt, t))
    _check_alias(psi)
    return KvNWave(grid, psi)


def rho_consistency(H, wave, t, dt):
    """L2 distance between |psi(t)|^2 and the separately evolved density.

    Both fields ride the same generator, so the distance is numerical
    error only.
    """
    rho0 = wave.density()
    psi_t = evolve(H, wave, t, dt)
    rho_t = evolve(H, rho0, t, dt)
    return psi_t.density().l2_distance(rho_t)


def observable_flow(O, alpha, dalpha, wave):
    """Flow of a wave in the parameter of an arbitrary observable.

    The generator is the Lie derivative along O's Hamiltonian vector
    field (the scalar part of the full superspace generator), which is
    exactly the Liouvillian with O in place of H; O = H and alpha = t
    reproduce evolve.
    """
    if isinstance(O, str):
        O = parse(O)
    if not isinstance(O, PolyExpr):
        raise TypeError('the observable must be polynomial')
    return evolve(O, wave, alpha, dalpha)


def ghost_sector_transport(H, components, phi0, t, dt=1e-3):
    """Transport of the form components along one characteristic.

    components = (f0, f1, ftop) with f1 a length-2 coefficient row of the
    one-form part.  The wave's ghost argument rides the linearized flow,
    so pulling back through it carries the one-form block with the
    inverse Jacobi propagator and scales the top form by its inverse
    determinant (unity, so densities are preserved).  Returns a dict
    with the transported components and the endpoint.
    """
    f0, f1, ftop = components
    f1 = np.asarray(f1, dtype=complex).reshape(2)
    phi0 = np.asarray(phi0, dtype=float).reshape(2)
    s = ExtendedState(phi0, cb=np.zeros((2, 0)))
    end = integrate(H, s, 0.0, t, dt).final()
    jac = end.c
    det = float(np.linalg.det(jac))
    inv = np.linalg.inv(jac)
    return {
        'endpoint': end.phi,
        'zero_form': complex(f0),
        'one_form': f1 @ inv,
        'top_form': complex(ftop) / det,
        'propagator': jac,
    }


# ---- snapshots ----

_DUMP_HEADER = struct.Struct('<2q4d')


def write_grid_dump(wave, path):
    """Binary snapshot: header (N_q, N_p as int64, the four bounds as
    doubles), then the field row-major as little-endian double pairs
    (re, im)."""
    g = wave.grid
    with open(path, 'wb') as fh:
        fh.write(_DUMP_HEADER.pack(g.n_q, g.n_p, g.q_min, g.q_max,
                                   g.p_min, g.p_max))
        fh.write(np.ascontiguousarray(wave.psi, dtype='<c16').tobytes())


def read_grid_dump(path):
    with open(path, 'rb') as fh:
        n_q, n_p, q0, q1, p0, p1 = _DUMP_HEADER.unpack(
            fh.read(_DUMP_HEADER.size))
        data = np.frombuffer(fh.read(), dtype='<c16')
    if data.size != n_q * n_p:
        raise ValueError('truncated grid dump')
    grid = PhaseGrid(q0, q1, p0, p1, n_q, n_p)
    return KvNWave(grid, data.reshape(n_q, n_p).astype(complex))


def write_marginals_csv(wave, path):
    """Position and momentum marginals of |psi|^2, zip-padded columns."""
    g = wave.grid
    rho = np.abs(wave.psi) ** 2
    mq = rho.sum(axis=1) * g.dp
    mp = rho.sum(axis=0) * g.dq
    rows = max(g.n_q, g.n_p)
    with open(path, 'w', newline='') as fh:
        out = csv.writer(fh)
        out.writerow(['q', 'rho_q', 'p', 'rho_p'])
        for i in range(rows):
            row = ['', '', '', '']
            if i < g.n_q:
                row[0] = repr(float(g.q[i]))
                row[1] = repr(float(mq[i]))
            if i < g.n_p:
                row[2] = repr(float(g.p[i]))
                row[3] = repr(float(mp[i]))
            out.writerow(row)
