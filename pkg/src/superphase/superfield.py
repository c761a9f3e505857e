"""Superfields over the two anticommuting partners of time.

The phase-space point, its two ghost directions and the auxiliary
multiplier are packed into one even field per coordinate,

    Phi^a = phi^a + theta c^a + thetabar (omega cb)_a
          + i thetabar theta (omega lam)_a,

and everything in this module is exact algebra on such objects: component
expansions of H[Phi], the Berezin reduction that produces the generating
function of the extended dynamics, the Lagrangian surface-term identity,
supersymmetric instants/intervals of time and the (theta, thetabar)
Heisenberg picture.

Even coefficients live in CPoly, a commutative polynomial ring over named
real symbols (q1, p1, lq1, lp1, their dotted rates, instant times), which
slots into GrassmannElement as a scalar type.
"""

from fractions import Fraction
from functools import lru_cache

from .grassmann import CRat, GeneratorRegistry, GrassmannElement, I_UNIT
from .opalgebra import OperatorAlgebra, build_charges
from .symexpr import PolyExpr, SymplecticForm

__all__ = [
    'CPoly', 'Superfield', 'SuperExpansion', 'SuperInstant', 'SuperInterval',
    'field_registry', 'instant_registry', 'even_symbol', 'odd_symbol',
    'substitute', 'berezin_reduce', 'lagrangian_identity', 'susy_transform',
    'heisenberg_conjugate', 'evaluate_element',
]


def _as_scalar(v):
    if isinstance(v, CPoly):
        return v
    return CRat.coerce(v)


class CPoly:
    """Polynomial in commuting real symbols with exact complex-rational
    coefficients.  terms maps a sorted tuple of (name, exponent) pairs to
    a CRat."""

    __slots__ = ('terms',)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for mono, c in terms.items():
                c = CRat.coerce(c)
                if c != 0:
                    self.terms[tuple(mono)] = c

    @classmethod
    def const(cls, c):
        return cls({(): c})

    @classmethod
    def sym(cls, name, exp=1):
        return cls({((name, exp),): CRat(1)})

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        if isinstance(other, CPoly):
            terms = dict(self.terms)
            for m, c in other.terms.items():
                s = terms.get(m, CRat(0)) + c
                if s == 0:
                    terms.pop(m, None)
                else:
                    terms[m] = s
            out = CPoly()
            out.terms = terms
            return out
        if isinstance(other, (int, Fraction, CRat, float, complex)):
            return self + CPoly.const(other)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        out = CPoly()
        out.terms = {m: -c for m, c in self.terms.items()}
        return out

    def __sub__(self, other):
        o = other if isinstance(other, CPoly) else CPoly.const(other)
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, CPoly):
            acc = {}
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    exps = dict(m1)
                    for name, k in m2:
                        exps[name] = exps.get(name, 0) + k
                    mono = tuple(sorted(exps.items()))
                    c = c1 * c2
                    s = acc.get(mono, CRat(0)) + c
                    if s == 0:
                        acc.pop(mono, None)
                    else:
                        acc[mono] = s
            out = CPoly()
            out.terms = acc
            return out
        if isinstance(other, (int, Fraction, CRat, float, complex)):
            c = CRat.coerce(other)
            if c == 0:
                return CPoly()
            out = CPoly()
            out.terms = {m: x * c for m, x in self.terms.items()}
            return out
        return NotImplemented

    __rmul__ = __mul__

    def conjugate(self):
        # all symbols are real
        out = CPoly()
        out.terms = {m: c.conjugate() if hasattr(c, 'conjugate') else c
                     for m, c in self.terms.items()}
        return out

    def __eq__(self, other):
        if isinstance(other, CPoly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction, CRat, float, complex)):
            if other == 0:
                return not self.terms
            return self.terms == {(): CRat.coerce(other)}
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return '0'
        bits = []
        for mono in sorted(self.terms, key=lambda m: (len(m), m)):
            c = self.terms[mono]
            word = '*'.join(n if k == 1 else '%s^%d' % (n, k) for n, k in mono)
            bits.append('(%r)%s' % (c, '*' + word if word else ''))
        return ' + '.join(bits)


# ---- symbol naming conventions ----

def _phase_name(a, n, dotted=False):
    nm = 'q%d' % (a + 1) if a < n else 'p%d' % (a - n + 1)
    return nm + ('dot' if dotted else '')


def _lam_name(a, n, dotted=False):
    nm = 'lq%d' % (a + 1) if a < n else 'lp%d' % (a - n + 1)
    return nm + ('dot' if dotted else '')


def _c_name(a, dotted=False):
    return 'c%d' % (a + 1) + ('dot' if dotted else '')


def _cb_name(a, dotted=False):
    return 'cb%d' % (a + 1) + ('dot' if dotted else '')


@lru_cache(maxsize=None)
def field_registry(n=1, dotted=False, extra=()):
    """Odd generators for n degrees of freedom: theta < thetabar < c's <
    cb's (< dotted c's and cb's) < extras.  Ghosts and their rates are
    real; theta, thetabar and extras imaginary.  Cached so equal argument
    sets share one registry instance (element equality needs that)."""
    names = ['theta', 'thetabar']
    real = []
    for a in range(2 * n):
        real.append(_c_name(a))
    for a in range(2 * n):
        real.append(_cb_name(a))
    if dotted:
        for a in range(2 * n):
            real.append(_c_name(a, True))
        for a in range(2 * n):
            real.append(_cb_name(a, True))
    names += real + list(extra)
    return GeneratorRegistry(names, {g: g for g in real})


@lru_cache(maxsize=None)
def instant_registry(labels=('1', '2'), extra=('eps', 'epsbar')):
    """Generators theta<i>, thetabar<i> for each instant label, plus
    transformation parameters."""
    names = []
    for lb in labels:
        names += ['theta%s' % lb, 'thetabar%s' % lb]
    names += list(extra)
    return GeneratorRegistry(names)


def even_symbol(registry, name):
    return GrassmannElement.scalar(registry, CPoly.sym(name))


def odd_symbol(registry, name):
    return GrassmannElement.gen(registry, name)


def _poly_at(P, vals):
    """Exact composition of a phase-space polynomial with CPoly values."""
    out = CPoly()
    for e, coef in P.terms.items():
        term = CPoly.const(coef)
        for a, k in enumerate(e):
            for _ in range(k):
                term = term * vals[a]
        out = out + term
    return out


def _strip(x, names):
    """Drop all terms containing any of the named generators."""
    idxs = {x.registry.index(g) for g in names}
    out = GrassmannElement(x.registry)
    out.terms = {m: c for m, c in x.terms.items() if not idxs & set(m)}
    return out


def _parity_flip(x):
    """Scale each term by (-1)^parity of its monomial."""
    out = GrassmannElement(x.registry)
    out.terms = {m: (-c if len(m) & 1 else c) for m, c in x.terms.items()}
    return out


class Superfield:
    """One coordinate of the even superfield, with its full expansion on
    the basis {1, theta, thetabar, thetabar theta}."""

    def __init__(self, registry, n, a, value):
        self.registry = registry
        self.n = n
        self.a = a
        self.value = value

    @classmethod
    def standard(cls, registry, n, a, dotted=False):
        w = SymplecticForm(n)
        th = odd_symbol(registry, 'theta')
        thb = odd_symbol(registry, 'thetabar')
        val = even_symbol(registry, _phase_name(a, n, dotted))
        val = val + th * odd_symbol(registry, _c_name(a, dotted))
        for b in range(2 * n):
            s = w.upper(a, b)
            if s:
                val = val + thb * odd_symbol(registry, _cb_name(b, dotted)) * s
                val = val + (thb * th) * even_symbol(registry, _lam_name(b, n, dotted)) * (I_UNIT * s)
        return cls(registry, n, a, val)

    def base(self):
        return _strip(self.value, ('theta', 'thetabar'))

    def theta_component(self):
        return _strip(self.value.derivative('theta'), ('thetabar',))

    def thetabar_component(self):
        """Coefficient X in the thetabar X writing (theta, thetabar set
        to zero after the derivative)."""
        return _strip(self.value.derivative('thetabar'), ('theta',))

    def top_component(self):
        """Coefficient of thetabar theta."""
        return self.value.berezin(('theta', 'thetabar'))

    def is_hermitian(self):
        return self.value.conjugate() == self.value

    def __repr__(self):
        return 'Superfield(%d of 2n=%d: %r)' % (self.a, 2 * self.n, self.value)


class SuperExpansion:
    """Components (base, theta, thetabar, top) of an even function of the
    superfields, in the writing

        F = base + theta * N + Nbar * thetabar - i thetabar theta * top.
    """

    def __init__(self, registry, base, theta, thetabar, top):
        self.registry = registry
        self.base = base
        self.theta = theta
        self.thetabar = thetabar
        self.top = top

    @classmethod
    def from_element(cls, F):
        base = _strip(F, ('theta', 'thetabar'))
        th = _strip(F.derivative('theta'), ('thetabar',))
        # Nbar thetabar = (-1)^{|Nbar|} thetabar Nbar, so undo the sign
        thb = _parity_flip(_strip(F.derivative('thetabar'), ('theta',)))
        top = I_UNIT * F.berezin(('theta', 'thetabar'))
        return cls(F.registry, base, th, thb, top)

    def reconstruct(self):
        reg = self.registry
        th = odd_symbol(reg, 'theta')
        thb = odd_symbol(reg, 'thetabar')
        out = self.base + th * self.theta
        out = out + self.thetabar * thb          # Nbar written on the left
        out = out + (thb * th) * self.top * CRat(0, -1)
        return out

    def __eq__(self, other):
        if not isinstance(other, SuperExpansion):
            return NotImplemented
        return (self.base == other.base and self.theta == other.theta
                and self.thetabar == other.thetabar and self.top == other.top)

    def __repr__(self):
        return ('SuperExpansion(base=%r,\n  theta=%r,\n  thetabar=%r,\n  top=%r)'
                % (self.base, self.theta, self.thetabar, self.top))


class SuperInstant:
    """A point (t, theta, thetabar) of supertime; components are algebra
    elements so transformed instants stay representable."""

    def __init__(self, registry, t, theta, thetabar):
        self.registry = registry
        self.t = t
        self.theta = theta
        self.thetabar = thetabar

    @classmethod
    def symbolic(cls, registry, label):
        return cls(registry, even_symbol(registry, 't%s' % label),
                   odd_symbol(registry, 'theta%s' % label),
                   odd_symbol(registry, 'thetabar%s' % label))

    def t_left(self, beta=Fraction(1)):
        return self.t + (self.thetabar * self.theta) * beta

    def t_right(self, beta=Fraction(1)):
        return self.t - (self.thetabar * self.theta) * beta

    def __eq__(self, other):
        if not isinstance(other, SuperInstant):
            return NotImplemented
        return (self.t == other.t and self.theta == other.theta
                and self.thetabar == other.thetabar)

    def __repr__(self):
        return 'SuperInstant(t=%r, theta=%r, thetabar=%r)' % (
            self.t, self.theta, self.thetabar)


class SuperInterval:
    """Supersymmetric-invariant distances between two instants.

    beta is the dimensional constant multiplying the odd bilinears (the
    default 1 reproduces the stated relations S_R = S - DeltabarDelta,
    S_L = S + DeltabarDelta exactly).
    """

    def __init__(self, p1, p2, beta=Fraction(1)):
        if p1.registry is not p2.registry:
            raise ValueError('instants over different registries')
        self.p1 = p1
        self.p2 = p2
        self.beta = Fraction(beta)

    def interval(self):
        p1, p2, b = self.p1, self.p2, self.beta
        return (p2.t - p1.t
                + (p2.theta * p1.thetabar - p1.theta * p2.thetabar) * b)

    def interval_left(self):
        p1, p2, b = self.p1, self.p2, self.beta
        return (p2.t_left(b) - p1.t_right(b)
                - (p1.thetabar * p2.theta) * (2 * b))

    def interval_right(self):
        p1, p2, b = self.p1, self.p2, self.beta
        return (p2.t_right(b) - p1.t_left(b)
                + (p2.thetabar * p1.theta) * (2 * b))

    def delta(self):
        return self.p2.theta - self.p1.theta

    def deltabar(self):
        return self.p2.thetabar - self.p1.thetabar


def susy_transform(pt, eps, epsbar):
    """Supersymmetry shift of an instant:

        t -> t - eps thetabar + epsbar theta,
        theta -> theta - eps,  thetabar -> thetabar + epsbar.

    eps/epsbar may be generator names, algebra elements, or 0.
    """
    reg = pt.registry

    def coerce(x):
        if isinstance(x, GrassmannElement):
            return x
        if isinstance(x, str):
            return odd_symbol(reg, x)
        if x == 0:
            return GrassmannElement.zero(reg)
        raise TypeError('parameter must be odd: name, element, or 0')

    e, eb = coerce(eps), coerce(epsbar)
    return SuperInstant(reg,
                        pt.t - e * pt.thetabar + eb * pt.theta,
                        pt.theta - e,
                        pt.thetabar + eb)


def standard_fields(registry, n, dotted=False):
    return [Superfield.standard(registry, n, a, dotted) for a in range(2 * n)]


def substitute(H, fields=None, registry=None):
    """Exact expansion of H evaluated on the superfields.

    Computed by multiplying out the field monomials (the nilpotent Taylor
    series in closed form); returns the four components as a
    SuperExpansion."""
    n = H.n
    if fields is None:
        registry = registry or field_registry(n)
        fields = standard_fields(registry, n)
    else:
        registry = fields[0].registry
    if len(fields) != 2 * n:
        raise ValueError('need one superfield per phase-space coordinate')
    vals = [f.value for f in fields]
    out = GrassmannElement.zero(registry)
    for e, coef in H.terms.items():
        term = GrassmannElement.scalar(registry, CPoly.const(coef))
        for a, k in enumerate(e):
            for _ in range(k):
                term = term * vals[a]
        out = out + term
    return SuperExpansion.from_element(out)


def berezin_reduce(e):
    """i ddtheta ddthetabar of an expression: extracts the top component
    (the nesting puts the rightmost differential innermost)."""
    if isinstance(e, SuperExpansion):
        return e.top
    if isinstance(e, Superfield):
        e = e.value
    return I_UNIT * e.berezin(('theta', 'thetabar'))


def _h_tilde_direct(H, registry):
    """The generator lam omega dH + i cb omega ddH c assembled from plain
    derivatives; used as the reference for the reduced top component."""
    n = H.n
    w = SymplecticForm(n)
    out = GrassmannElement.zero(registry)
    for a in range(2 * n):
        for b in range(2 * n):
            s = w.upper(a, b)
            if not s:
                continue
            lam = even_symbol(registry, _lam_name(a, n))
            out = out + lam * GrassmannElement.scalar(
                registry, _poly_cpoly(H.diff_index(b), n)) * s
            for d in range(2 * n):
                hdd = H.diff_index(b).diff_index(d)
                if not hdd.terms:
                    continue
                piece = odd_symbol(registry, _cb_name(a)) \
                    * GrassmannElement.scalar(registry, _poly_cpoly(hdd, n)) \
                    * odd_symbol(registry, _c_name(d))
                out = out + piece * (I_UNIT * s)
    return out


def _poly_cpoly(P, n):
    return _poly_at(P, [CPoly.sym(_phase_name(a, n)) for a in range(2 * n)])


def lagrangian_identity(H):
    """Residual of the Berezin reduction of L(Phi) against the extended
    Lagrangian minus the total time derivative of (lam_p p + i cb_p c^p).

    The phase-space Lagrangian is sum_i p_i qdot_i - H with the rates kept
    as independent dotted symbols; identically zero."""
    n = H.n
    reg = field_registry(n, dotted=True)
    fields = standard_fields(reg, n)
    dotted = standard_fields(reg, n, dotted=True)

    l_super = GrassmannElement.zero(reg)
    for i in range(n):
        l_super = l_super + fields[n + i].value * dotted[i].value
    l_super = l_super - substitute(H, fields=fields).reconstruct()
    lhs = berezin_reduce(l_super)

    ltilde = GrassmannElement.zero(reg)
    for a in range(2 * n):
        ltilde = ltilde + even_symbol(reg, _lam_name(a, n)) \
            * even_symbol(reg, _phase_name(a, n, dotted=True))
        ltilde = ltilde + odd_symbol(reg, _cb_name(a)) \
            * odd_symbol(reg, _c_name(a, dotted=True)) * I_UNIT
    ltilde = ltilde - substitute(H, fields=fields).top

    surface = GrassmannElement.zero(reg)
    for i in range(n):
        a = n + i
        surface = surface + even_symbol(reg, _lam_name(a, n, dotted=True)) \
            * even_symbol(reg, _phase_name(a, n))
        surface = surface + even_symbol(reg, _lam_name(a, n)) \
            * even_symbol(reg, _phase_name(a, n, dotted=True))
        surface = surface + odd_symbol(reg, _cb_name(a, dotted=True)) \
            * odd_symbol(reg, _c_name(a)) * I_UNIT
        surface = surface + odd_symbol(reg, _cb_name(a)) \
            * odd_symbol(reg, _c_name(a, dotted=True)) * I_UNIT

    return lhs - (ltilde - surface)


def heisenberg_conjugate(G, registry=None):
    """(theta, thetabar) Heisenberg picture of a multiplicative observable:

        S G(phi) S^-1 with S = (1 + theta Q)(1 + Qbar thetabar)

    computed in the operator algebra with the translation charges, then
    mapped back to the supercommutative algebra.  Equals substitute(G)."""
    n = G.n
    registry = registry or field_registry(n)
    al = OperatorAlgebra(n, outer=('theta', 'thetabar'))
    ch = build_charges(G * 0, al)      # BRS charges carry no H dependence
    a_fac = ch.q_brs.outer_left('theta')
    # Qbar thetabar = -thetabar Qbar for the odd charge
    b_fac = (-ch.qbar_brs).outer_left('thetabar')
    one = al.scalar(1)
    s_op = (one + a_fac) * (one + b_fac)
    s_inv = (one - b_fac) * (one - a_fac)
    conj = s_op * al.lift(G) * s_inv
    return SuperExpansion.from_element(_op_to_element(conj, registry, n))


def _op_to_element(x, registry, n):
    """Normal-formed operator words to supercommutative elements, symbol
    by symbol (valid when no ordering ambiguity survives, as after a
    conjugation by multiplicative charges)."""
    names = x.algebra.registry.names
    out = GrassmannElement.zero(registry)
    for (m, w), c in x.terms.items():
        e = GrassmannElement.scalar(registry, c)
        for idx in m:
            e = e * odd_symbol(registry, names[idx])
        for kind, a in w:
            if kind == 'phi':
                e = e * even_symbol(registry, _phase_name(a, n))
            elif kind == 'lam':
                e = e * even_symbol(registry, _lam_name(a, n))
            elif kind == 'c':
                e = e * odd_symbol(registry, _c_name(a))
            else:
                e = e * odd_symbol(registry, _cb_name(a))
        out = out + e
    return out


def evaluate_element(elem, env, registry):
    """Numeric evaluation of a supercommutative element.

    env maps symbol names (even polynomial symbols and odd generators
    alike) to plain numbers or to GrassmannElements over `registry`;
    unlisted names raise KeyError.  Returns an element over `registry`
    with complex coefficients."""
    def _as_elem(v):
        if isinstance(v, GrassmannElement):
            if v.registry is not registry:
                raise ValueError('environment value over a foreign registry')
            return v
        return GrassmannElement.scalar(registry, complex(v))

    out = GrassmannElement.zero(registry)
    for mono, coef in elem.terms.items():
        if isinstance(coef, CPoly):
            val = GrassmannElement.zero(registry)
            for m, c in coef.terms.items():
                term = GrassmannElement.scalar(registry, complex(c))
                for name, k in m:
                    v = _as_elem(env[name])
                    for _ in range(k):
                        term = term * v
                val = val + term
        else:
            val = GrassmannElement.scalar(registry, complex(coef))
        for idx in mono:
            val = val * _as_elem(env[elem.registry.names[idx]])
        out = out + val
    return out
