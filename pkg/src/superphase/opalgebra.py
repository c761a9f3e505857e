"""Graded operator algebra with the classical commutation relations.

Words over the symbols {phi^a, lam_a, c^a, cb_a} with outer Grassmann
parameters, normal ordering driven by

    [phi^a, lam_b] = i delta^a_b,   {c^a, cb_b} = delta^a_b,

and everything built on top of it: the conserved charges, the SUSY
anticommutator, base-space differential actions, two-instant superfield
commutators, and the ordering analysis for Liouvillians of monomial
Hamiltonians.  Normal form puts lam left of phi and cb left of c
(pre-point convention), each block index-sorted.
"""

from fractions import Fraction

from .grassmann import (CRat, GeneratorRegistry, GrassmannElement,
                        _merge_sign, _sort_sign)
from .symexpr import PolyExpr, SymplecticForm

__all__ = ['OperatorAlgebra', 'OpExpr', 'ChargeSet', 'OrderingSpec',
           'graded_commutator', 'build_charges', 'susy_algebra_check',
           'base_space_action_check', 'superfield_commutator',
           'liouvillian_ordering', 'grassmann_ordering_check']

I = CRat(0, 1)

# symbol kinds; normal form sorts blocks in this order
_KIND_ORDER = {'lam': 0, 'phi': 1, 'cb': 2, 'c': 3}
_ODD = {'c', 'cb'}


def _word_parity(word):
    return sum(1 for k, _ in word if k in _ODD) & 1


class OperatorAlgebra:
    """Context: number of degrees of freedom and outer odd parameters."""

    def __init__(self, n=1, outer=()):
        self.n = int(n)
        self.dim = 2 * self.n
        self.omega = SymplecticForm(self.n)
        self.registry = GeneratorRegistry(outer)

    # ---- atoms ----
    def expr(self, terms=None):
        return OpExpr(self, terms)

    def scalar(self, c):
        return OpExpr(self, {((), ()): c})

    def symbol(self, kind, a):
        if not 0 <= a < self.dim:
            raise IndexError('phase-space index out of range')
        return OpExpr(self, {((), ((kind, a),)): CRat(1)})

    def phi(self, a):
        return self.symbol('phi', a)

    def lam(self, a):
        return self.symbol('lam', a)

    def c(self, a):
        return self.symbol('c', a)

    def cb(self, a):
        return self.symbol('cb', a)

    def outer(self, name):
        return OpExpr(self, {((self.registry.index(name),), ()): CRat(1)})

    def lift(self, poly):
        """Commuting polynomial in q_i, p_i -> word sum in the phi^a."""
        if isinstance(poly, (int, Fraction)):
            return self.scalar(CRat(poly))
        if poly.n != self.n:
            raise ValueError('polynomial has wrong number of degrees of freedom')
        out = self.expr()
        for e, coef in poly.terms.items():
            word = []
            for a, k in enumerate(e):
                word.extend([('phi', a)] * k)
            out = out + OpExpr(self, {((), tuple(word)): CRat(coef)})
        return out


class OpExpr:
    """Normal-ordered linear combination of (outer monomial, word) pairs.

    terms: dict[(omono, word)] -> scalar with omono a strictly increasing
    tuple of outer-generator indices and word a tuple of (kind, index)
    symbols.  A term means coeff * (outer product) * (operator word); the
    outer block sits to the left of the word, and outer odd parameters
    anticommute with odd operator symbols (tensor grading rule).
    Construction normalizes, so equality is term-dict equality.
    """

    __slots__ = ('algebra', 'terms')

    def __init__(self, algebra, terms=None, _normalized=False):
        self.algebra = algebra
        if not terms:
            self.terms = {}
        elif _normalized:
            self.terms = {k: v for k, v in terms.items() if v != 0}
        else:
            acc = {}
            for (m, w), c in terms.items():
                c = CRat.coerce(c)
                if c == 0:
                    continue
                for w2, c2 in _normalize_word(tuple(w)).items():
                    _accumulate(acc, (tuple(m), w2), c * c2)
            self.terms = acc

    # ---- ring structure ----
    def _check(self, other):
        if self.algebra is not other.algebra:
            raise ValueError('operator algebra mismatch')

    def __add__(self, other):
        if not isinstance(other, OpExpr):
            other = self.algebra.scalar(CRat.coerce(other))
        self._check(other)
        acc = dict(self.terms)
        for k, c in other.terms.items():
            _accumulate(acc, k, c)
        return OpExpr(self.algebra, acc, _normalized=True)

    __radd__ = __add__

    def __neg__(self):
        return OpExpr(self.algebra, {k: -c for k, c in self.terms.items()},
                      _normalized=True)

    def __sub__(self, other):
        if not isinstance(other, OpExpr):
            other = self.algebra.scalar(CRat.coerce(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, OpExpr):
            c = CRat.coerce(other)
            return OpExpr(self.algebra,
                          {k: v * c for k, v in self.terms.items()},
                          _normalized=True) if c != 0 else self.algebra.expr()
        self._check(other)
        acc = {}
        for (m1, w1), c1 in self.terms.items():
            p1 = _word_parity(w1)
            for (m2, w2), c2 in other.terms.items():
                # outer monomial m2 moves left across the word w1
                sign = -1 if (p1 and len(m2) & 1) else 1
                mono, msign = _merge_sign(m1, m2)
                if mono is None:
                    continue
                coef = c1 * c2 * (sign * msign)
                for w, cw in _normalize_word(w1 + w2).items():
                    _accumulate(acc, (mono, w), coef * cw)
        return OpExpr(self.algebra, acc, _normalized=True)

    def __rmul__(self, other):
        # scalars only; outer generators do not commute with odd words
        if isinstance(other, OpExpr):
            return NotImplemented
        return self * other

    def __eq__(self, other):
        if isinstance(other, OpExpr):
            return self.algebra is other.algebra and self.terms == other.terms
        if other == 0:
            return not self.terms
        return self.terms == {((), ()): CRat.coerce(other)}

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self):
        return not self.terms

    def grade(self):
        """0 even, 1 odd, None mixed (outer parameters count)."""
        gs = {(len(m) + sum(1 for k, _ in w if k in _ODD)) & 1
              for m, w in self.terms}
        if not gs:
            return 0
        return gs.pop() if len(gs) == 1 else None

    # ---- outer-parameter calculus ----
    def outer_derivative(self, name):
        """Left derivative with respect to an outer odd parameter."""
        idx = self.algebra.registry.index(name)
        acc = {}
        for (m, w), c in self.terms.items():
            if idx not in m:
                continue
            pos = m.index(idx)
            m2 = m[:pos] + m[pos + 1:]
            _accumulate(acc, (m2, w), -c if pos & 1 else c)
        return OpExpr(self.algebra, acc, _normalized=True)

    def outer_left(self, name):
        """Multiply by an outer odd parameter from the absolute left."""
        idx = self.algebra.registry.index(name)
        acc = {}
        for (m, w), c in self.terms.items():
            mono, sign = _merge_sign((idx,), m)
            if mono is None:
                continue
            _accumulate(acc, (mono, w), c * sign)
        return OpExpr(self.algebra, acc, _normalized=True)

    def outer_strip(self, name):
        """Drop every term containing the given outer parameter."""
        idx = self.algebra.registry.index(name)
        return OpExpr(self.algebra,
                      {(m, w): c for (m, w), c in self.terms.items()
                       if idx not in m}, _normalized=True)

    def outer_coefficient(self, names):
        """Operator coefficient of an exact outer monomial (given in the
        order written; permutation signs applied)."""
        reg = self.algebra.registry
        mono, sign = _sort_sign(tuple(reg.index(g) for g in names))
        if mono is None:
            return self.algebra.expr()
        acc = {}
        for (m, w), c in self.terms.items():
            if m == mono:
                acc[((), w)] = c * sign
        return OpExpr(self.algebra, acc, _normalized=True)

    def collect_outer(self, registry=None):
        """Map word -> GrassmannElement coefficient over the outer registry."""
        reg = registry or self.algebra.registry
        out = {}
        for (m, w), c in self.terms.items():
            g = out.setdefault(w, GrassmannElement.zero(reg))
            out[w] = g + GrassmannElement(reg, {m: c})
        return out

    # ---- adjoint ----
    def dagger(self):
        """Hermitian conjugate: words reversed, coefficients conjugated.

        phi, lam, c, cb are each self-adjoint under the scalar products
        adopted for the algebra.  Outer parameters are not supported here.
        """
        acc = {}
        for (m, w), c in self.terms.items():
            if m:
                raise ValueError('dagger with outer parameters is not defined')
            for w2, c2 in _normalize_word(tuple(reversed(w))).items():
                _accumulate(acc, ((), w2), c.conjugate() * c2)
        return OpExpr(self.algebra, acc, _normalized=True)

    def __repr__(self):
        if not self.terms:
            return '0'
        names = self.algebra.registry.names
        sym = {'phi': 'phi', 'lam': 'lam', 'c': 'c', 'cb': 'cb'}
        bits = []
        for (m, w) in sorted(self.terms, key=lambda k: (len(k[1]), k)):
            c = self.terms[(m, w)]
            parts = [names[i] for i in m]
            parts += ['%s%d' % (sym[k], a + 1) for k, a in w]
            bits.append('(%r)%s' % (c, ('*' + '*'.join(parts)) if parts else ''))
        return ' + '.join(bits)


def _accumulate(acc, key, c):
    s = acc.get(key)
    s = c if s is None else s + c
    if s == 0:
        acc.pop(key, None)
    else:
        acc[key] = s


def _normalize_word(word):
    """Rewrite a word to normal form; returns dict[word] -> CRat factor.

    Even symbols commute with odd ones, so the word splits into an even
    subword (lam, phi) and an odd subword (cb, c) with no sign.  Each is
    reduced by its two-term rewrite rule until ordered.
    """
    evens = tuple(s for s in word if s[0] not in _ODD)
    odds = tuple(s for s in word if s[0] in _ODD)
    out = {}
    for we, ce in _nf_even(evens).items():
        for wo, co in _nf_odd(odds).items():
            _accumulate(out, (we + wo), ce * co)
    return out


def _nf_even(seq):
    # phi^a lam_b -> lam_b phi^a + i delta^a_b; lam and phi commute
    # within their own kinds
    done = {}
    stack = [(tuple(seq), CRat(1))]
    while stack:
        w, c = stack.pop()
        for i in range(len(w) - 1):
            if w[i][0] == 'phi' and w[i + 1][0] == 'lam':
                swapped = w[:i] + (w[i + 1], w[i]) + w[i + 2:]
                stack.append((swapped, c))
                if w[i][1] == w[i + 1][1]:
                    stack.append((w[:i] + w[i + 2:], c * I))
                break
        else:
            lams = tuple(sorted(s for s in w if s[0] == 'lam'))
            phis = tuple(sorted(s for s in w if s[0] == 'phi'))
            _accumulate(done, lams + phis, c)
    return done


def _nf_odd(seq):
    # c^a cb_b -> delta^a_b - cb_b c^a; then antisymmetric sort inside
    # each block with nilpotency
    done = {}
    stack = [(tuple(seq), CRat(1))]
    while stack:
        w, c = stack.pop()
        for i in range(len(w) - 1):
            if w[i][0] == 'c' and w[i + 1][0] == 'cb':
                swapped = w[:i] + (w[i + 1], w[i]) + w[i + 2:]
                stack.append((swapped, -c))
                if w[i][1] == w[i + 1][1]:
                    stack.append((w[:i] + w[i + 2:], c))
                break
        else:
            cbs = [s[1] for s in w if s[0] == 'cb']
            cs = [s[1] for s in w if s[0] == 'c']
            # relative order of cb's among themselves (and c's) is
            # preserved by the swaps above, so sign comes from sorting
            m1, s1 = _sort_sign(cbs)
            m2, s2 = _sort_sign(cs)
            if m1 is None or m2 is None:
                continue
            word = tuple(('cb', a) for a in m1) + tuple(('c', a) for a in m2)
            _accumulate(done, word, c * (s1 * s2))
    return done


# ---- charges ----

class ChargeSet:
    """The conserved operators generated by a polynomial Hamiltonian."""

    NAMES = ('q_brs', 'qbar_brs', 'q_h', 'qbar_h', 'k', 'kbar', 'q_g',
             'n', 'nbar')

    def __init__(self, algebra, H):
        al = algebra
        n, dim = al.n, al.dim
        w = al.omega

        q_brs = al.expr()
        qbar_brs = al.expr()
        for a in range(dim):
            q_brs = q_brs + I * al.c(a) * al.lam(a)
            for b in range(dim):
                if w.upper(a, b):
                    qbar_brs = qbar_brs + (I * w.upper(a, b)) * al.cb(a) * al.lam(b)

        names = H.var_names()
        dH = [al.lift(H.diff(nm)) for nm in names]
        d2H = [[al.lift(H.diff(na).diff(nb)) for nb in names] for na in names]

        nhat = al.expr()
        nbar = al.expr()
        for a in range(dim):
            nhat = nhat + al.c(a) * dH[a]
            for b in range(dim):
                if w.upper(a, b):
                    nbar = nbar + w.upper(a, b) * al.cb(a) * dH[b]

        k = al.expr()
        kbar = al.expr()
        q_g = al.expr()
        for a in range(dim):
            q_g = q_g + al.c(a) * al.cb(a)
            for b in range(dim):
                if w.lower(a, b):
                    k = k + Fraction(w.lower(a, b), 2) * al.c(a) * al.c(b)
                if w.upper(a, b):
                    kbar = kbar + Fraction(w.upper(a, b), 2) * al.cb(a) * al.cb(b)

        htilde = al.expr()
        for a in range(dim):
            for b in range(dim):
                if w.upper(a, b):
                    htilde = htilde + al.lam(a) * w.upper(a, b) * dH[b]
                for d in range(dim):
                    if w.upper(a, d):
                        htilde = htilde + I * w.upper(a, d) * al.cb(a) * d2H[d][b] * al.c(b)

        self.algebra = al
        self.hamiltonian = H
        self.q_brs = q_brs
        self.qbar_brs = qbar_brs
        self.q_h = q_brs - nhat
        self.qbar_h = qbar_brs + nbar
        self.k = k
        self.kbar = kbar
        self.q_g = q_g
        self.n = nhat
        self.nbar = nbar
        self.htilde = htilde

    def by_name(self, name):
        key = _CHARGE_ALIASES.get(name.lower())
        if key is None:
            raise KeyError('unknown charge %r' % (name,))
        return getattr(self, key)


_CHARGE_ALIASES = {
    'q_brs': 'q_brs', 'qbrs': 'q_brs',
    'qbar_brs': 'qbar_brs', 'qbarbrs': 'qbar_brs',
    'q_h': 'q_h', 'qh': 'q_h',
    'qbar_h': 'qbar_h', 'qbarh': 'qbar_h',
    'k': 'k', 'kbar': 'kbar', 'q_g': 'q_g', 'qg': 'q_g',
    'n': 'n', 'nbar': 'nbar', 'htilde': 'htilde', 'h': 'htilde',
}


def graded_commutator(x, y):
    """xy - (-1)^{|x||y|} yx for homogeneous x, y (anticommutator when
    both are odd)."""
    gx, gy = x.grade(), y.grade()
    if gx is None or gy is None:
        raise ValueError('graded commutator needs homogeneous inputs')
    if gx and gy:
        return x * y + y * x
    return x * y - y * x


def build_charges(H, algebra=None):
    al = algebra or OperatorAlgebra(H.n)
    return ChargeSet(al, H)


def susy_algebra_check(H, algebra=None):
    """Normal form of {Q_H, Qbar_H} - 2i Htilde; zero when the algebra
    closes."""
    ch = build_charges(H, algebra)
    return graded_commutator(ch.q_h, ch.qbar_h) - 2 * I * ch.htilde


# ---- operator-valued superfield and base-space actions ----

def op_superfield(algebra, a, primed=False):
    """Phi^a = phi^a + theta c^a + thetabar (omega cb)^a
    + i thetabar theta (omega lam)^a as an OpExpr over the outer
    parameters (theta, thetabar) or their primed copies."""
    al = algebra
    th = 'thetap' if primed else 'theta'
    thb = 'thetabarp' if primed else 'thetabar'
    out = al.phi(a) + al.c(a).outer_left(th)
    for b in range(al.dim):
        s = al.omega.upper(a, b)
        if s:
            out = out + (s * al.cb(b)).outer_left(thb)
            # i thetabar theta X = -i theta thetabar X in canonical order
            out = out + (I * s * al.lam(b)).outer_left(th).outer_left(thb)
    return out


def op_time_derivative(x, eom):
    """d/dt by the Leibniz rule, sending each symbol to eom[symbol]."""
    al = x.algebra
    out = al.expr()
    for (m, w), c in x.terms.items():
        for k, s in enumerate(w):
            rhs = eom[s]
            acc = {}
            for (m2, w2), c2 in rhs.terms.items():
                # rhs carries no outer part and preserves parity
                _accumulate(acc, (m, w[:k] + w2 + w[k + 1:]), c * c2)
            out = out + OpExpr(al, acc)
    return out


def eom_table(algebra, H):
    """Extended equations of motion as a symbol -> OpExpr map."""
    al = algebra
    names = H.var_names()
    w = al.omega
    dH = [al.lift(H.diff(nm)) for nm in names]
    d2H = [[al.lift(H.diff(na).diff(nb)) for nb in names] for na in names]
    d3H = [[[al.lift(H.diff(na).diff(nb).diff(nc)) for nc in names]
            for nb in names] for na in names]
    table = {}
    for a in range(al.dim):
        phidot = al.expr()
        for b in range(al.dim):
            if w.upper(a, b):
                phidot = phidot + w.upper(a, b) * dH[b]
        table[('phi', a)] = phidot
    for a in range(al.dim):
        cdot = al.expr()
        for d in range(al.dim):
            if w.upper(a, d):
                for b in range(al.dim):
                    cdot = cdot + w.upper(a, d) * d2H[d][b] * al.c(b)
        table[('c', a)] = cdot
    for b in range(al.dim):
        cbdot = al.expr()
        lamdot = al.expr()
        for a in range(al.dim):
            for d in range(al.dim):
                if w.upper(a, d):
                    cbdot = cbdot - al.cb(a) * w.upper(a, d) * d2H[d][b]
                    lamdot = lamdot - w.upper(a, d) * d2H[d][b] * al.lam(a)
                    for f in range(al.dim):
                        lamdot = lamdot - I * w.upper(a, d) * al.cb(a) * d3H[d][f][b] * al.c(f)
        table[('cb', b)] = cbdot
        table[('lam', b)] = lamdot
    return table


def base_space_apply(charge, x, eom):
    """Differential-operator action of a charge on a superfield-valued
    expression: Q_BRS -> -d/dtheta, Qbar_BRS -> d/dthetabar,
    Q_H -> -d/dtheta - thetabar d/dt, Qbar_H -> d/dthetabar + theta d/dt,
    Htilde -> i d/dt."""
    key = _CHARGE_ALIASES.get(charge.lower())
    if key == 'q_brs':
        return -x.outer_derivative('theta')
    if key == 'qbar_brs':
        return x.outer_derivative('thetabar')
    if key == 'q_h':
        return -x.outer_derivative('theta') - op_time_derivative(x, eom).outer_left('thetabar')
    if key == 'qbar_h':
        return x.outer_derivative('thetabar') + op_time_derivative(x, eom).outer_left('theta')
    if key == 'htilde':
        return I * op_time_derivative(x, eom)
    raise KeyError('unknown charge %r' % (charge,))


def base_space_action_check(H, charge, algebra=None):
    """Residuals [Phi^a, O] - (base-space differential action) for each a."""
    al = algebra or OperatorAlgebra(H.n, outer=('theta', 'thetabar'))
    if 'theta' not in al.registry:
        raise ValueError('algebra must register theta, thetabar outer parameters')
    ch = build_charges(H, al)
    eom = eom_table(al, H)
    out = []
    for a in range(al.dim):
        phi_a = op_superfield(al, a)
        target = graded_commutator(phi_a, ch.by_name(charge))
        base = base_space_apply(charge, phi_a, eom)
        out.append(target - base)
    return out


def superfield_commutator(n=1, a=0, b=None, algebra=None):
    """[Phi^a(t,theta,thetabar), Phi^b(t,theta',thetabar')] as an OpExpr.

    Defaults to a = q-index 0 and b = its conjugate momentum index.  The
    identity states this equals omega^{ab} (thetabar-thetabar')
    (theta-theta') times the unit operator.
    """
    al = algebra or OperatorAlgebra(n, outer=('theta', 'thetabar', 'thetap', 'thetabarp'))
    if b is None:
        b = a + al.n
    Qa = op_superfield(al, a)
    Pb = op_superfield(al, b, primed=True)
    return graded_commutator(Qa, Pb)


def grassmann_delta(algebra):
    """delta(thetabar - thetabar') delta(theta - theta') =
    thetabar theta - thetabar theta' - thetabar' theta + thetabar' theta'."""
    al = algebra
    one = al.scalar(1)
    out = al.expr()
    for thb, sb in (('thetabar', 1), ('thetabarp', -1)):
        for th, st in (('theta', 1), ('thetap', -1)):
            out = out + (sb * st) * one.outer_left(th).outer_left(thb)
    return out


# ---- Liouvillian ordering analysis ----

class OrderingSpec:
    """One-parameter family of operator orderings for H = q^n p^m.

    weights alpha (n+1 of them) order lam_q through the q-string, beta
    (m+1) order lam_p through the p-string; both sum to 1.
    """

    def __init__(self, n, m, alpha, beta):
        self.n = int(n)
        self.m = int(m)
        self.alpha = tuple(Fraction(x) for x in alpha)
        self.beta = tuple(Fraction(x) for x in beta)
        if self.n < 0 or self.m < 0:
            raise ValueError('exponents must be non-negative')
        if len(self.alpha) != self.n + 1 or len(self.beta) != self.m + 1:
            raise ValueError('weight count mismatch: need n+1 alphas, m+1 betas')
        if sum(self.alpha) != 1 or sum(self.beta) != 1:
            raise ValueError('weights must sum to 1')

    def hermitian(self):
        lhs = self.m * sum(a * (self.n - 2 * (j - 1))
                           for j, a in enumerate(self.alpha, start=1))
        rhs = self.n * sum(b * (self.m - 2 * (j - 1))
                           for j, b in enumerate(self.beta, start=1))
        return lhs == rhs


def liouvillian_ordering(spec, algebra=None):
    """Build the ordered Liouvillian for H = q^n p^m and reduce it.

    Returns a dict with the built operator's normal form, the pre-point
    normal form it should collapse to when Hermitian, and the Hermiticity
    verdicts from the weight condition and from an explicit dagger.
    """
    al = algebra or OperatorAlgebra(1)
    n, m = spec.n, spec.m
    q, p, lq, lp = ('phi', 0), ('phi', 1), ('lam', 0), ('lam', 1)

    built = al.expr()
    if m > 0:
        for j, a in enumerate(spec.alpha, start=1):
            word = (q,) * (j - 1) + (lq,) + (q,) * (n - j + 1) + (p,) * (m - 1)
            built = built + OpExpr(al, {((), word): CRat(a * m)})
    if n > 0:
        for j, b in enumerate(spec.beta, start=1):
            word = (p,) * (j - 1) + (lp,) + (p,) * (m - j + 1) + (q,) * (n - 1)
            built = built + OpExpr(al, {((), word): CRat(-b * n)})

    pre_point = al.expr()
    if m > 0:
        pre_point = pre_point + OpExpr(al, {((), (lq,) + (q,) * n + (p,) * (m - 1)): CRat(m)})
    if n > 0:
        pre_point = pre_point + OpExpr(al, {((), (lp,) + (p,) * m + (q,) * (n - 1)): CRat(-n)})

    return {
        'built': built,
        'pre_point': pre_point,
        'hermitian': spec.hermitian(),
        'hermitian_dagger': built == built.dagger(),
        'matches_pre_point': built == pre_point,
    }


def grassmann_ordering_check(H, algebra=None):
    """Normal form of the two written forms of the Grassmann part of the
    Liouvillian (cb left of c versus c left of cb); returns their
    difference, which cancels by omega antisymmetry against the symmetric
    second-derivative tensor."""
    al = algebra or OperatorAlgebra(H.n)
    names = H.var_names()
    w = al.omega
    d2H = [[al.lift(H.diff(na).diff(nb)) for nb in names] for na in names]
    g1 = al.expr()
    g2 = al.expr()
    for a in range(al.dim):
        for b in range(al.dim):
            for d in range(al.dim):
                s = w.upper(a, b)
                if s:
                    g1 = g1 + I * s * al.cb(a) * d2H[b][d] * al.c(d)
                    g2 = g2 - I * s * al.c(d) * d2H[b][d] * al.cb(a)
    return g1 - g2
