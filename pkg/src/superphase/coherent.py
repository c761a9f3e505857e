"""Coherent states on a truncated ladder space, and their odd analogue.

The quantum mode carries the usual annihilator a with a|k> = sqrt(k)|k-1>;
a coherent state is the matrix-exponential displacement of the vacuum,

    |z> = exp[z a+ - z* a] |0>,        a|z> = z|z>.

The classical construction uses two commuting modes, one for the pair
(q, lambda_q) and one for (p, lambda_p), annihilated by

    a_q = (q + i lambda_q)/sqrt(2),    a_p = (p + i lambda_p)/sqrt(2),

and displaces the two-mode vacuum through the quadrature combination
exp[i lam_q q + i lam_p p - i q lambda_q - i p lambda_p] (operators wear
the hats, the prefactors are the displacement parameters).  Everything
here lives on a finite truncation, so ladder identities hold exactly
only below the top state; assertions are therefore confined to the lower
D/2 block throughout.

The odd counterpart is exact: the displaced fermionic vacuum is expanded
symbolically over four anticommuting parameters, and the eigenvalue
residual of the annihilators on it is returned as an algebra element
that cancels identically, not to rounding.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.linalg import expm

from .grassmann import GeneratorRegistry, GrassmannElement

__all__ = [
    'FockSpace', 'CoherentState',
    'coherent_state', 'classical_coherent_pair',
    'displacement_matrix', 'pair_displacement_matrix',
    'pair_overlap_closed_form', 'mode_resolution_matrix',
    'pair_completeness_residual',
    'phase_point_eigenvalue', 'eigenvalue_phase_point',
    'classical_eigenvalues', 'classical_phase_point',
    'displaced_fermion_vacuum', 'grassmann_coherent_check',
]

_MIN_DIM = 8


def _ladder(dim):
    a = np.zeros((dim, dim))
    for k in range(1, dim):
        a[k - 1, k] = math.sqrt(k)
    return a


class FockSpace:
    """Truncated number basis, one mode or two commuting modes.

    Mode 0 is the quantum mode (or the (q, lambda_q) pair), mode 1 the
    (p, lambda_p) pair; two-mode operators act on the Kronecker product
    with mode 0 as the left factor.
    """

    __slots__ = ('dim', 'modes', '_a')

    def __init__(self, dim, modes=1):
        dim = int(dim)
        if dim < 2:
            raise ValueError('truncation needs at least two states')
        if modes not in (1, 2):
            raise ValueError('one or two modes only')
        self.dim = dim
        self.modes = modes
        self._a = _ladder(dim)

    @property
    def size(self):
        return self.dim ** self.modes

    def identity(self):
        return np.eye(self.size)

    def vacuum(self):
        v = np.zeros(self.size, dtype=complex)
        v[0] = 1.0
        return v

    def lowering(self, mode=0):
        self._check_mode(mode)
        if self.modes == 1:
            return self._a.copy()
        eye = np.eye(self.dim)
        if mode == 0:
            return np.kron(self._a, eye)
        return np.kron(eye, self._a)

    def raising(self, mode=0):
        return self.lowering(mode).T.copy()

    def quadratures(self, mode=0):
        """Hermitian pair (X, Y) with a = (X + iY)/sqrt(2), [X, Y] = i
        on the guarded block.  For the classical modes these are the
        coordinate and its lambda partner."""
        a = self.lowering(mode)
        ad = a.T
        x = (a + ad) / math.sqrt(2.0)
        y = -1j * (a - ad) / math.sqrt(2.0)
        return x, y

    def _check_mode(self, mode):
        if not 0 <= mode < self.modes:
            raise ValueError('mode index out of range')

    def guard_indices(self):
        """Flat indices of the trusted block: every occupation < dim/2."""
        g = self.dim // 2
        if self.modes == 1:
            return list(range(g))
        return [i * self.dim + j for i in range(g) for j in range(g)]

    def guarded(self, matrix):
        idx = self.guard_indices()
        return np.asarray(matrix)[np.ix_(idx, idx)]

    def commutator_defect(self, mode=0):
        """max |[a, a+] - 1| over the guarded block (zero up to rounding;
        the identity fails only at the discarded top state)."""
        a = self.lowering(mode)
        comm = a @ a.T - a.T @ a
        return float(np.max(np.abs(self.guarded(comm) - self.guarded(self.identity()))))

    def __repr__(self):
        return 'FockSpace(dim=%d, modes=%d)' % (self.dim, self.modes)


class CoherentState:
    """Displaced vacuum: unit coefficient vector plus its eigenvalue(s)."""

    __slots__ = ('space', 'vector', 'eigenvalue')

    def __init__(self, space, vector, eigenvalue):
        vector = np.asarray(vector, dtype=complex)
        if vector.shape != (space.size,):
            raise ValueError('coefficient vector does not match the space')
        norm = float(np.linalg.norm(vector))
        # displacements are unitary, so anything far from unit norm means
        # the construction itself went wrong, not just the truncation
        if abs(norm - 1.0) > 1e-8:
            raise ValueError('state is not normalized (norm %.3e)' % norm)
        self.space = space
        self.vector = vector / norm
        self.eigenvalue = eigenvalue

    def overlap(self, other):
        """<self|other>."""
        if self.space.size != other.space.size:
            raise ValueError('space mismatch')
        return complex(np.vdot(self.vector, other.vector))

    def eigen_residual(self, mode=None):
        """|| (a - z) |state> ||, per mode for a two-mode state."""
        if self.space.modes == 1:
            a = self.space.lowering(0)
            return float(np.linalg.norm(a @ self.vector - self.eigenvalue * self.vector))
        if mode is None:
            return tuple(self.eigen_residual(m) for m in range(self.space.modes))
        z = self.eigenvalue[mode]
        a = self.space.lowering(mode)
        return float(np.linalg.norm(a @ self.vector - z * self.vector))

    def __repr__(self):
        return 'CoherentState(eigenvalue=%r, dim=%d, modes=%d)' % (
            self.eigenvalue, self.space.dim, self.space.modes)


def _check_truncation(z, dim, label='z'):
    if dim < _MIN_DIM:
        raise ValueError('truncation dimension must be at least %d' % _MIN_DIM)
    if abs(z) ** 2 >= dim:
        raise ValueError('|%s|^2 = %.3g is not below the truncation %d; '
                         'the tail weight makes the state unreliable'
                         % (label, abs(z) ** 2, dim))


def displacement_matrix(z, dim):
    """exp[z a+ - z* a] on the truncated single mode."""
    a = _ladder(dim)
    return expm(z * a.T - np.conj(z) * a)


def coherent_state(z, dim):
    """Displace the vacuum to the eigenvalue z.

    The result matches the normalized power series
    e^{-|z|^2/2} sum_k z^k/sqrt(k!) |k> up to the truncation tail, and
    (a - z) on it is bounded by |z|^dim/sqrt((dim-1)!).
    """
    z = complex(z)
    _check_truncation(z, dim)
    space = FockSpace(dim, modes=1)
    vec = displacement_matrix(z, dim) @ space.vacuum()
    return CoherentState(space, vec, z)


def pair_displacement_matrix(z_q, z_p, dim):
    """Two-mode displacement in the quadrature form.

    The exponent is i lam_q X_q + i lam_p X_p - i q Y_q - i p Y_p with
    (q, lam_q) and (p, lam_p) the real/imaginary decompositions of the
    two eigenvalues; it equals the product of the per-mode displacements."""
    q, lam_q, p, lam_p = classical_phase_point(z_q, z_p)
    space = FockSpace(dim, modes=2)
    xq, yq = space.quadratures(0)
    xp, yp = space.quadratures(1)
    gen = 1j * (lam_q * xq + lam_p * xp - q * yq - p * yp)
    return expm(gen)


def classical_coherent_pair(z_q, z_p, dim):
    """Simultaneous eigenstate of the two commuting classical modes."""
    z_q = complex(z_q)
    z_p = complex(z_p)
    _check_truncation(z_q, dim, 'z_q')
    _check_truncation(z_p, dim, 'z_p')
    space = FockSpace(dim, modes=2)
    vec = pair_displacement_matrix(z_q, z_p, dim) @ space.vacuum()
    return CoherentState(space, vec, (z_q, z_p))


def pair_overlap_closed_form(pair_a, pair_b):
    """<pair_a | pair_b> for two two-mode eigenvalue pairs (z_q, z_p):

        exp[-|z_q|^2/2 - |w_q|^2/2 + z_q* w_q] * (same for the p mode),

    with pair_a = (z_q, z_p) on the bra side."""
    out = 0.0 + 0.0j
    for za, zb in zip(pair_a, pair_b):
        out += -0.5 * abs(za) ** 2 - 0.5 * abs(zb) ** 2 + np.conj(za) * zb
    return complex(np.exp(out))


# ---------------------------------------------------------------------------
# resolution of the identity


def mode_resolution_matrix(dim, radial=None, angular=None, r_max=None):
    """(1/pi) integral d^2z |z><z| over one mode by polar quadrature.

    Gauss-Legendre in the radius on (0, r_max], a uniform angular grid
    (exact for the Fourier modes the truncation can hold), coherent
    vectors from the normalized power series.  Converges to the identity
    on the trusted block once r_max^2 comfortably exceeds the guarded
    occupation numbers.
    """
    if radial is None:
        radial = 4 * dim
    if angular is None:
        angular = 4 * dim + 2
    if r_max is None:
        r_max = math.sqrt(3.0 * dim)
    nodes, weights = np.polynomial.legendre.leggauss(radial)
    r = 0.5 * r_max * (nodes + 1.0)
    wr = 0.5 * r_max * weights
    phi = 2.0 * math.pi * np.arange(angular) / angular
    ks = np.arange(dim)
    # log-space radial profile e^{-r^2/2} r^k / sqrt(k!)
    lg = np.array([0.5 * math.lgamma(k + 1) for k in ks])
    prof = np.exp(-0.5 * r[:, None] ** 2
                  + ks[None, :] * np.log(r)[:, None] - lg[None, :])
    out = np.zeros((dim, dim), dtype=complex)
    phases = np.exp(1j * np.outer(phi, ks))
    dphi = 2.0 * math.pi / angular
    for i in range(len(r)):
        c = prof[i] * phases           # (angular, dim) coherent coefficients
        block = c.conj().T @ c          # sum over the angular grid
        out += (wr[i] * r[i] * dphi / math.pi) * block.T
    return out


def pair_completeness_residual(dim, radial=None, angular=None, r_max=None):
    """Operator-norm gap of (1/pi^2) int d^2z_q d^2z_p |..><..| from the
    identity, on the lower D/2 block of the two-mode space.

    The integrand factorizes over the modes and the quadrature grid is a
    product grid, so the double integral is the Kronecker square of the
    single-mode resolution.
    """
    m1 = mode_resolution_matrix(dim, radial=radial, angular=angular, r_max=r_max)
    space = FockSpace(dim, modes=2)
    gap = space.guarded(np.kron(m1, m1) - space.identity())
    return float(np.linalg.norm(gap, 2))


# ---------------------------------------------------------------------------
# eigenvalue decompositions


def phase_point_eigenvalue(q, p, hbar=1.0):
    """z = (q + i p)/sqrt(2 hbar)."""
    return (q + 1j * p) / math.sqrt(2.0 * hbar)


def eigenvalue_phase_point(z, hbar=1.0):
    """Inverse of phase_point_eigenvalue: (q, p)."""
    s = math.sqrt(2.0 * hbar)
    return s * z.real, s * z.imag


def classical_eigenvalues(q, lam_q, p, lam_p):
    """(z_q, z_p) = ((q + i lam_q)/sqrt(2), (p + i lam_p)/sqrt(2))."""
    s = math.sqrt(2.0)
    return (q + 1j * lam_q) / s, (p + 1j * lam_p) / s


def classical_phase_point(z_q, z_p):
    """Inverse of classical_eigenvalues: (q, lam_q, p, lam_p)."""
    s = math.sqrt(2.0)
    z_q = complex(z_q)
    z_p = complex(z_p)
    return s * z_q.real, s * z_q.imag, s * z_p.real, s * z_p.imag


# ---------------------------------------------------------------------------
# odd coherent states, exact

_FERMION_GENERATORS = ('cq', 'cp', 'cbq', 'cbp')
_PARAM_OF = {'q': ('cq', 'cbq'), 'p': ('cp', 'cbp')}
_MODE_ORDER = ('q', 'p')


def fermion_registry():
    """Four real odd parameters: c^q, c^p and their bars."""
    return GeneratorRegistry(_FERMION_GENERATORS,
                             {g: g for g in _FERMION_GENERATORS})


def _vacuum_state(registry):
    return {(): GrassmannElement.scalar(registry, 1)}


def _clean(state):
    return {occ: coef for occ, coef in state.items() if not coef.is_zero()}


def _add_term(state, occ, coef):
    cur = state.get(occ)
    state[occ] = coef if cur is None else cur + coef


def _apply_create(state, mode):
    """Left action of the creator for `mode`; kets keep their coefficients
    on the right, so only the creation-string reordering carries signs."""
    out = {}
    for occ, coef in state.items():
        if mode in occ:
            continue
        pos = sum(1 for m in _MODE_ORDER if m in occ and _MODE_ORDER.index(m) < _MODE_ORDER.index(mode))
        new = tuple(m for m in _MODE_ORDER if m in occ or m == mode)
        _add_term(out, new, -coef if pos & 1 else coef)
    return _clean(out)


def _apply_annihilate(state, mode):
    """Left action of the barred annihilator for `mode`."""
    out = {}
    for occ, coef in state.items():
        if mode not in occ:
            continue
        pos = occ.index(mode)
        new = occ[:pos] + occ[pos + 1:]
        _add_term(out, new, -coef if pos & 1 else coef)
    return _clean(out)


def _param_mult(state, element):
    """Left multiplication by an odd parameter: it graded-commutes past
    each basis ket before it can join the right-hand coefficient."""
    out = {}
    for occ, coef in state.items():
        sign = -1 if len(occ) & 1 else 1
        _add_term(out, occ, (element * coef) * sign)
    return _clean(out)


def _displacement_step(state, registry, modes):
    """One application of the exponent
    -c^a (bar annihilator) - cbar_a (creator), summed over modes."""
    out = {}
    for mode in modes:
        c_name, cb_name = _PARAM_OF[mode]
        c = GrassmannElement.gen(registry, c_name)
        cb = GrassmannElement.gen(registry, cb_name)
        for occ, coef in _param_mult(_apply_annihilate(state, mode), c).items():
            _add_term(out, occ, -coef)
        for occ, coef in _param_mult(_apply_create(state, mode), cb).items():
            _add_term(out, occ, -coef)
    return _clean(out)


def displaced_fermion_vacuum(modes=_MODE_ORDER, registry=None, start=None):
    """Expand F|0> with F = exp[-c^a (bar ann.) - cbar_a (creator)] summed
    over the requested modes, exactly; the exponent is nilpotent, so the
    series terminates on its own."""
    if registry is None:
        registry = fermion_registry()
    state = dict(start) if start is not None else _vacuum_state(registry)
    acc = dict(state)
    k = 0
    while acc:
        k += 1
        acc = _displacement_step(acc, registry, modes)
        acc = {occ: coef * Fraction(1, k) for occ, coef in acc.items()}
        for occ, coef in acc.items():
            _add_term(state, occ, coef)
        if k > 8:
            raise RuntimeError('displacement series failed to terminate')
    return _clean(state)


def grassmann_coherent_check(mode='q', displaced=True, registry=None):
    """Residual of the odd eigenvalue property on the displaced vacuum.

    Returns {occupancy: element} for (bar annihilator - bar parameter)
    applied to F|0> (or to the bare vacuum when displaced is False, whose
    eigenvalue is zero); every element cancels identically.
    """
    if mode not in _PARAM_OF:
        raise ValueError("mode must be 'q' or 'p'")
    if registry is None:
        registry = fermion_registry()
    if displaced:
        state = displaced_fermion_vacuum(registry=registry)
        eigen = GrassmannElement.gen(registry, _PARAM_OF[mode][1])
    else:
        state = _vacuum_state(registry)
        eigen = GrassmannElement.zero(registry)
    residual = _apply_annihilate(state, mode)
    for occ, coef in _param_mult(state, eigen).items():
        _add_term(residual, occ, -coef)
    return residual
