"""Commuting polynomial calculus on phase-space symbols q_i, p_i.

Exact-rational multivariate polynomials with a small parser, partial
derivatives to any order, the symplectic matrix in the (q..., p...)
ordering and the Hamiltonian vector field.  This is the front-end every
symbolic check consumes; coefficients stay Fractions until a numeric
module asks for floats.
"""

import re
from fractions import Fraction

__all__ = ['PolyExpr', 'SymplecticForm', 'parse', 'hamiltonian_vector_field',
           'poisson_bracket']


class PolyExpr:
    """Polynomial in q1..qn, p1..pn with Fraction coefficients.

    terms maps an exponent tuple of length 2n (q exponents then p
    exponents) to a nonzero Fraction.
    """

    __slots__ = ('n', 'terms')

    def __init__(self, n, terms=None):
        self.n = int(n)
        self.terms = {}
        if terms:
            for e, c in terms.items():
                c = Fraction(c)
                if c != 0:
                    e = tuple(int(x) for x in e)
                    if len(e) != 2 * self.n or any(x < 0 for x in e):
                        raise ValueError('bad exponent vector %r' % (e,))
                    self.terms[e] = c

    # ---- constructors ----
    @classmethod
    def zero(cls, n):
        return cls(n)

    @classmethod
    def const(cls, n, c):
        return cls(n, {(0,) * (2 * n): c})

    @classmethod
    def var(cls, n, name):
        e = [0] * (2 * n)
        e[_var_index(name, n)] = 1
        return cls(n, {tuple(e): 1})

    # ---- variable bookkeeping ----
    def var_names(self):
        return ['q%d' % (i + 1) for i in range(self.n)] + \
               ['p%d' % (i + 1) for i in range(self.n)]

    def promoted(self, n):
        if n == self.n:
            return self
        if n < self.n:
            raise ValueError('cannot demote variable count')
        out = PolyExpr(n)
        for e, c in self.terms.items():
            eq, ep = e[:self.n], e[self.n:]
            out.terms[eq + (0,) * (n - self.n) + ep + (0,) * (n - self.n)] = c
        return out

    def _align(self, other):
        if not isinstance(other, PolyExpr):
            other = PolyExpr.const(self.n, other)
        n = max(self.n, other.n)
        return self.promoted(n), other.promoted(n)

    # ---- ring operations ----
    def __add__(self, other):
        a, b = self._align(other)
        terms = dict(a.terms)
        for e, c in b.terms.items():
            s = terms.get(e, Fraction(0)) + c
            if s == 0:
                terms.pop(e, None)
            else:
                terms[e] = s
        out = PolyExpr(a.n)
        out.terms = terms
        return out

    __radd__ = __add__

    def __neg__(self):
        out = PolyExpr(self.n)
        out.terms = {e: -c for e, c in self.terms.items()}
        return out

    def __sub__(self, other):
        a, b = self._align(other)
        return a + (-b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._align(other)
        acc = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                s = acc.get(e, Fraction(0)) + c1 * c2
                if s == 0:
                    acc.pop(e, None)
                else:
                    acc[e] = s
        out = PolyExpr(a.n)
        out.terms = acc
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PolyExpr):
            if not other.is_constant():
                raise ValueError('non-polynomial construct: division by non-constant')
            other = other.constant_value()
        return self * (Fraction(1) / Fraction(other))

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            raise ValueError('negative power is not polynomial')
        out = PolyExpr.const(self.n, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, PolyExpr):
            a, b = self._align(other)
            return a.terms == b.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == PolyExpr.const(self.n, other).terms
        return NotImplemented

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    # ---- calculus ----
    def diff(self, var, order=1):
        """Exact partial derivative of given order with respect to one
        variable name ('q1', 'p2', ...)."""
        idx = _var_index(var, self.n)
        out = self
        for _ in range(int(order)):
            acc = {}
            for e, c in out.terms.items():
                k = e[idx]
                if k == 0:
                    continue
                e2 = e[:idx] + (k - 1,) + e[idx + 1:]
                acc[e2] = acc.get(e2, Fraction(0)) + c * k
            nxt = PolyExpr(self.n)
            nxt.terms = {e: c for e, c in acc.items() if c != 0}
            out = nxt
        return out

    def diff_index(self, a, order=1):
        """diff by flat phase-space index a (0..n-1 are q's, n..2n-1 p's)."""
        return self.diff(self.var_names()[a], order)

    def is_constant(self):
        return all(not any(e) for e in self.terms)

    def constant_value(self):
        return self.terms.get((0,) * (2 * self.n), Fraction(0))

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def evaluate(self, vals):
        """Numeric value at a point; vals is a length-2n sequence of
        scalars or numpy arrays (broadcasting works term by term)."""
        if len(vals) != 2 * self.n:
            raise ValueError('expected %d coordinates' % (2 * self.n))
        total = 0.0
        for e, c in self.terms.items():
            term = float(c)
            for x, k in zip(vals, e):
                if k:
                    term = term * x ** k
            total = total + term
        return total

    # ---- printing ----
    def to_string(self):
        if not self.terms:
            return '0'
        names = self.var_names()
        bits = []
        for e in sorted(self.terms, key=lambda e: (sum(e), e), reverse=True):
            c = self.terms[e]
            factors = []
            for nm, k in zip(names, e):
                if k == 1:
                    factors.append(nm)
                elif k > 1:
                    factors.append('%s^%d' % (nm, k))
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = '*'.join(factors)
            else:
                body = str(mag) + '*' + '*'.join(factors)
            bits.append(('- ' if c < 0 else '+ ') + body)
        s = ' '.join(bits)
        return s[2:] if s.startswith('+ ') else '-' + s[2:]

    __str__ = to_string

    def __repr__(self):
        return 'PolyExpr(%s)' % self.to_string()


def _var_index(name, n):
    m = re.fullmatch(r'([qp])(\d*)', name)
    if not m:
        raise KeyError('unknown variable %r' % (name,))
    i = int(m.group(2) or 1) - 1
    if not 0 <= i < n:
        raise KeyError('variable %r out of range for n=%d' % (name, n))
    return i if m.group(1) == 'q' else n + i


# ---- parser ----

_TOKEN = re.compile(r'\s*(?:(\d+\.\d+|\d+)|([qp]\d*)|([-+*/^()]))')


def _tokenize(text):
    pos = 0
    toks = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise SyntaxError('bad character %r at position %d' % (text[pos], pos))
            break
        if m.group(1):
            toks.append(('num', m.group(1), m.start(1)))
        elif m.group(2):
            toks.append(('var', m.group(2), m.start(2)))
        else:
            toks.append(('op', m.group(3), m.start(3)))
        pos = m.end()
    toks.append(('end', '', len(text)))
    return toks


class _Parser:
    def __init__(self, toks, n):
        self.toks = toks
        self.i = 0
        self.n = n

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != 'op' or val != op:
            raise SyntaxError('expected %r at position %d' % (op, pos))

    def expr(self):
        kind, val, _ = self.peek()
        neg = False
        if kind == 'op' and val in '+-':
            self.take()
            neg = val == '-'
        out = self.term()
        if neg:
            out = -out
        while True:
            kind, val, _ = self.peek()
            if kind == 'op' and val in '+-':
                self.take()
                rhs = self.term()
                out = out - rhs if val == '-' else out + rhs
            else:
                return out

    def term(self):
        out = self.factor()
        while True:
            kind, val, pos = self.peek()
            if kind == 'op' and val in '*/':
                self.take()
                rhs = self.factor()
                if val == '*':
                    out = out * rhs
                else:
                    if not rhs.is_constant() or rhs.constant_value() == 0:
                        raise SyntaxError(
                            'non-polynomial construct: division by non-constant '
                            'near position %d' % pos)
                    out = out / rhs
            else:
                return out

    def factor(self):
        kind, val, pos = self.peek()
        if kind == 'op' and val in '+-':
            self.take()
            f = self.factor()
            return -f if val == '-' else f
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == 'op' and val == '^':
            self.take()
            ex = self.factor()
            if not ex.is_constant():
                raise SyntaxError('non-polynomial construct: symbolic exponent '
                                  'near position %d' % pos)
            k = ex.constant_value()
            if k.denominator != 1 or k < 0:
                raise SyntaxError('non-polynomial construct: exponent %s '
                                  'near position %d' % (k, pos))
            return base ** int(k)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == 'num':
            if '.' in val:
                return PolyExpr.const(self.n, Fraction(val))
            return PolyExpr.const(self.n, Fraction(int(val)))
        if kind == 'var':
            return PolyExpr.var(self.n, val)
        if kind == 'op' and val == '(':
            out = self.expr()
            self.expect_op(')')
            return out
        raise SyntaxError('unexpected token %r at position %d' % (val or 'end', pos))


def parse(text, n=None):
    """Parse a polynomial in q1..qn, p1..pn ('q'/'p' alias q1/p1).

    Grammar: + - * ^ with rational literals ('1/2' via division) and
    parentheses.  n defaults to the highest variable index present.
    """
    toks = _tokenize(text)
    if n is None:
        n = 1
        for kind, val, _ in toks:
            if kind == 'var':
                idx = int(val[1:] or 1)
                n = max(n, idx)
    parser = _Parser(toks, n)
    out = parser.expr()
    kind, val, pos = parser.peek()
    if kind != 'end':
        raise SyntaxError('unexpected token %r at position %d' % (val, pos))
    return out


class SymplecticForm:
    """ω^{ab} = [[0, I], [-I, 0]] in the (q1..qn, p1..pn) index ordering.

    upper(a, b) is ω^{ab}, lower(a, b) its inverse ω_{ab}; indices run
    0..2n-1.  ω^{ab} ω_{bc} = δ^a_c with ω_{ab} = -ω^{ab} numerically.
    """

    def __init__(self, n):
        self.n = int(n)
        self.dim = 2 * self.n

    def upper(self, a, b):
        if b == a + self.n:
            return 1
        if a == b + self.n:
            return -1
        return 0

    def lower(self, a, b):
        return -self.upper(a, b)

    def matrix(self):
        import numpy as np
        w = np.zeros((self.dim, self.dim))
        for a in range(self.dim):
            for b in range(self.dim):
                w[a, b] = self.upper(a, b)
        return w

    def pairs(self):
        """Nonzero entries of ω^{ab} as (a, b, sign)."""
        out = []
        for a in range(self.n):
            out.append((a, a + self.n, 1))
            out.append((a + self.n, a, -1))
        return out


def hamiltonian_vector_field(H):
    """The 2n components ω^{ab} ∂_b H, ordered (q-rows..., p-rows...)."""
    names = H.var_names()
    out = []
    for a in range(H.n):
        out.append(H.diff(names[H.n + a]))       # +dH/dp_a
    for a in range(H.n):
        out.append(-H.diff(names[a]))            # -dH/dq_a
    return out


def poisson_bracket(f, g):
    """{f, g} = Σ_a,b ω^{ab} ∂_a f ∂_b g."""
    f, g = f._align(g)
    names = f.var_names()
    out = PolyExpr.zero(f.n)
    for i in range(f.n):
        out = out + f.diff(names[i]) * g.diff(names[f.n + i]) \
                  - f.diff(names[f.n + i]) * g.diff(names[i])
    return out
