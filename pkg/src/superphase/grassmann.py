"""Finite Grassmann algebra engine.

Anticommuting generators over exact complex-rational (or float) scalars:
graded products, Berezin integration, complex conjugation and the
superdeterminant of even/odd block supermatrices.  Everything downstream
(superfields, operator normal ordering, coherent-state checks) leans on
this module, so all operations here are pure and exact by default.
"""

from fractions import Fraction

__all__ = [
    'CRat', 'GeneratorRegistry', 'GrassmannElement', 'SuperMatrix',
    'standard_registry',
]


class CRat:
    """Exact complex scalar re + im*i with Fraction components.

    Only ring operations, division and conjugation are provided; that is
    all the algebra needs.  Mixing with float/complex falls through to
    Python complex, which is the 'float backend' of the registry.
    """

    __slots__ = ('re', 'im')

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def coerce(v):
        if isinstance(v, CRat):
            return v
        if isinstance(v, (int, Fraction)):
            return CRat(v)
        return v  # float/complex backend: left as-is

    def __add__(self, other):
        other = CRat.coerce(other)
        if isinstance(other, CRat):
            return CRat(self.re + other.re, self.im + other.im)
        if isinstance(other, (float, complex)):
            return complex(self) + other
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return CRat(-self.re, -self.im)

    def __sub__(self, other):
        other = CRat.coerce(other)
        if isinstance(other, CRat):
            return CRat(self.re - other.re, self.im - other.im)
        if isinstance(other, (float, complex)):
            return complex(self) - other
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = CRat.coerce(other)
        if isinstance(other, CRat):
            return CRat(self.re * other.re - self.im * other.im,
                        self.re * other.im + self.im * other.re)
        if isinstance(other, (float, complex)):
            return complex(self) * other
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = CRat.coerce(other)
        if isinstance(other, CRat):
            d = other.re * other.re + other.im * other.im
            if d == 0:
                raise ZeroDivisionError('division by zero CRat')
            return CRat((self.re * other.re + self.im * other.im) / d,
                        (self.im * other.re - self.re * other.im) / d)
        if isinstance(other, (float, complex)):
            return complex(self) / other
        return NotImplemented

    def __rtruediv__(self, other):
        return CRat.coerce(other) / self if isinstance(other, (int, Fraction)) \
            else other / complex(self)

    def conjugate(self):
        return CRat(self.re, -self.im)

    def __eq__(self, other):
        if isinstance(other, CRat):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        if isinstance(other, (float, complex)):
            return complex(self) == other
        return NotImplemented

    def __hash__(self):
        return hash(complex(self)) if self.im else hash(self.re)

    def __bool__(self):
        return bool(self.re or self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return '%si' % self.im
        return '(%s%+si)' % (self.re, self.im)


I_UNIT = CRat(0, 1)


def _conj_scalar(c):
    return c.conjugate() if hasattr(c, 'conjugate') else c


class GeneratorRegistry:
    """Ordered set of odd generators with per-generator conjugation rules.

    conjugation maps a generator name to its conjugate image with implicit
    + sign (g* = h); generators absent from the map are 'imaginary'
    (g* = -g), which is the convention for θ, θ̄, ε, ε̄.  A generator
    paired with itself is real; that is how c^a, c̄_a are registered so
    the component expansion of a Hermitian superfield stays Hermitian.
    """

    def __init__(self, names, conjugation=None):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError('duplicate generator names')
        self.names = names
        self._index = {g: i for i, g in enumerate(names)}
        conjugation = dict(conjugation or {})
        for g, h in conjugation.items():
            if g not in self._index or h not in self._index:
                raise ValueError('conjugation rule refers to unknown generator')
            # involution: paired rules must be symmetric
            if conjugation.get(h, None) != g:
                raise ValueError('conjugation must be an involution: %s -> %s' % (g, h))
        self.conjugation = conjugation

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise KeyError('unknown generator %r' % (name,)) from None

    def conj_rule(self, idx):
        """(sign, image_index) of the conjugate of generator #idx."""
        g = self.names[idx]
        if g in self.conjugation:
            return 1, self._index[self.conjugation[g]]
        return -1, idx

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._index

    def __repr__(self):
        return 'GeneratorRegistry(%s)' % (', '.join(self.names))


def standard_registry(n=1, extra=()):
    """Registry θ < θ̄ < c^1..c^2n < c̄_1..c̄_2n (< extras, all imaginary).

    c and c̄ are real (self-paired); θ, θ̄ and extras imaginary.
    """
    names = ['theta', 'thetabar']
    names += ['c%d' % a for a in range(1, 2 * n + 1)]
    names += ['cb%d' % a for a in range(1, 2 * n + 1)]
    conj = {g: g for g in names[2:]}
    names += list(extra)
    return GeneratorRegistry(names, conj)


def _merge_sign(m1, m2):
    """Concatenate two strictly increasing index tuples.

    Returns (monomial, sign) or (None, 0) when a generator repeats.
    Sign is the parity of the merge permutation.
    """
    out = []
    sign = 1
    i = j = 0
    n1, n2 = len(m1), len(m2)
    while i < n1 and j < n2:
        a, b = m1[i], m2[j]
        if a == b:
            return None, 0
        if a < b:
            out.append(a)
            i += 1
        else:
            # b jumps over the remaining n1-i generators of m1
            if (n1 - i) & 1:
                sign = -sign
            out.append(b)
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out), sign


def _sort_sign(idxs):
    """Sort an index list, counting inversion parity; None on repeats."""
    lst = list(idxs)
    sign = 1
    # insertion sort; monomials are short
    for i in range(1, len(lst)):
        j = i
        while j > 0 and lst[j - 1] > lst[j]:
            lst[j - 1], lst[j] = lst[j], lst[j - 1]
            sign = -sign
            j -= 1
    for i in range(1, len(lst)):
        if lst[i - 1] == lst[i]:
            return None, 0
    return tuple(lst), sign


class GrassmannElement:
    """Element of the Grassmann algebra over a registry.

    terms maps a strictly increasing tuple of generator indices to a
    nonzero scalar coefficient.  Instances are immutable by convention.
    """

    __slots__ = ('registry', 'terms')

    def __init__(self, registry, terms=None):
        self.registry = registry
        self.terms = {}
        if terms:
            for mono, coef in terms.items():
                coef = CRat.coerce(coef)
                if coef != 0:
                    self.terms[tuple(mono)] = coef

    # ---- constructors ----
    @classmethod
    def zero(cls, registry):
        return cls(registry)

    @classmethod
    def scalar(cls, registry, value):
        return cls(registry, {(): value})

    @classmethod
    def gen(cls, registry, name):
        return cls(registry, {(registry.index(name),): CRat(1)})

    # ---- inspection ----
    def coefficient(self, names):
        """Coefficient of the monomial given by generator names (their order
        contributes the usual permutation sign)."""
        mono, sign = _sort_sign(self.registry.index(g) for g in names)
        if mono is None:
            return CRat(0)
        c = self.terms.get(mono)
        return CRat(0) if c is None else sign * c

    def body(self):
        return self.terms.get((), CRat(0))

    def is_zero(self):
        return not self.terms

    def parity(self):
        """0 even, 1 odd, None if inhomogeneous."""
        ps = {len(m) & 1 for m in self.terms}
        if not ps:
            return 0
        if len(ps) > 1:
            return None
        return ps.pop()

    def even_part(self):
        return GrassmannElement(self.registry,
                                {m: c for m, c in self.terms.items() if not len(m) & 1})

    def odd_part(self):
        return GrassmannElement(self.registry,
                                {m: c for m, c in self.terms.items() if len(m) & 1})

    # ---- ring operations ----
    def _check(self, other):
        if self.registry is not other.registry:
            raise ValueError('registry mismatch')

    def __add__(self, other):
        if not isinstance(other, GrassmannElement):
            other = GrassmannElement.scalar(self.registry, other)
        self._check(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = terms.get(m, CRat(0)) + c
            if s == 0:
                terms.pop(m, None)
            else:
                terms[m] = s
        out = GrassmannElement(self.registry)
        out.terms = terms
        return out

    __radd__ = __add__

    def __neg__(self):
        out = GrassmannElement(self.registry)
        out.terms = {m: -c for m, c in self.terms.items()}
        return out

    def __sub__(self, other):
        if not isinstance(other, GrassmannElement):
            other = GrassmannElement.scalar(self.registry, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GrassmannElement):
            c = CRat.coerce(other)
            out = GrassmannElement(self.registry)
            if c != 0:
                out.terms = {m: x * c for m, x in self.terms.items()}
            return out
        self._check(other)
        acc = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono, sign = _merge_sign(m1, m2)
                if mono is None:
                    continue
                c = c1 * c2
                if sign < 0:
                    c = -c
                s = acc.get(mono, CRat(0)) + c
                if s == 0:
                    acc.pop(mono, None)
                else:
                    acc[mono] = s
        out = GrassmannElement(self.registry)
        out.terms = acc
        return out

    def __rmul__(self, other):
        # scalars commute with everything
        return self * other

    def __eq__(self, other):
        if isinstance(other, GrassmannElement):
            return self.registry is other.registry and self.terms == other.terms
        return self.terms == ({} if other == 0 else {(): CRat.coerce(other)}) \
            if isinstance(other, (int, Fraction, CRat, float, complex)) else NotImplemented

    def __hash__(self):
        return hash((id(self.registry), frozenset(self.terms.items())))

    # ---- Berezin calculus ----
    def derivative(self, name):
        """Left derivative ∂/∂g: move g to the front of each monomial."""
        idx = self.registry.index(name)
        acc = {}
        for mono, coef in self.terms.items():
            if idx not in mono:
                continue
            pos = mono.index(idx)
            rest = mono[:pos] + mono[pos + 1:]
            acc[rest] = -coef if pos & 1 else coef
        out = GrassmannElement(self.registry)
        out.terms = acc
        return out

    def berezin(self, names):
        """∫ dg1 dg2 ... dgk applied with the rightmost differential
        innermost (the nesting convention used throughout).

        ∫dg 1 = 0 and ∫dg g = 1 per generator; each single integration is
        the left derivative.
        """
        out = self
        for g in reversed(tuple(names)):
            out = out.derivative(g)
        return out

    # ---- conjugation ----
    def conjugate(self):
        """Antilinear involution with product reversal (xy)* = y*x*."""
        reg = self.registry
        acc = {}
        for mono, coef in self.terms.items():
            k = len(mono)
            sign = -1 if (k * (k - 1) // 2) & 1 else 1  # reversal of k odd factors
            images = []
            for idx in mono:
                s, h = reg.conj_rule(idx)
                sign *= s
                images.append(h)
            sorted_mono, s2 = _sort_sign(images)
            if sorted_mono is None:
                continue
            c = _conj_scalar(coef)
            if sign * s2 < 0:
                c = -c
            s = acc.get(sorted_mono, CRat(0)) + c
            if s == 0:
                acc.pop(sorted_mono, None)
            else:
                acc[sorted_mono] = s
        out = GrassmannElement(reg)
        out.terms = acc
        return out

    # ---- even-subalgebra inverse ----
    def inverse(self):
        """Inverse of an even element with invertible body.

        x = b(1 + u) with u nilpotent, so x^-1 = b^-1 Σ (-u)^k; the series
        terminates because the generator count is finite.
        """
        if self.parity() not in (0,):
            raise ValueError('inverse defined for even elements only')
        b = self.body()
        if b == 0:
            raise ZeroDivisionError('even element has zero body, not invertible')
        binv = 1 / b if not isinstance(b, CRat) else CRat(1) / b
        u = (self - b) * binv
        out = GrassmannElement.scalar(self.registry, 1)
        term = GrassmannElement.scalar(self.registry, 1)
        for _ in range(len(self.registry)):
            term = term * (-1) * u
            if term.is_zero():
                break
            out = out + term
        return out * binv

    def __repr__(self):
        if not self.terms:
            return '0'
        names = self.registry.names
        bits = []
        for mono in sorted(self.terms, key=lambda m: (len(m), m)):
            coef = self.terms[mono]
            word = '*'.join(names[i] for i in mono) or '1'
            bits.append('(%r)*%s' % (coef, word))
        return ' + '.join(bits)


class SuperMatrix:
    """Block supermatrix [[A, B], [C, D]] over one registry.

    A (even-even) and D (odd-odd) carry even entries, B and C odd entries.
    Entries are GrassmannElements; scalars are promoted.
    """

    def __init__(self, registry, A, B, C, D):
        self.registry = registry
        self.A = self._block(A)
        self.B = self._block(B)
        self.C = self._block(C)
        self.D = self._block(D)
        ne, no = len(self.A), len(self.D)
        if any(len(r) != ne for r in self.A) or any(len(r) != no for r in self.D):
            raise ValueError('A and D must be square')
        if len(self.B) != ne or any(len(r) != no for r in self.B):
            raise ValueError('B must be even-rows x odd-cols')
        if len(self.C) != no or any(len(r) != ne for r in self.C):
            raise ValueError('C must be odd-rows x even-cols')
        for row in self.A + self.D:
            for x in row:
                if x.parity() not in (0,):
                    raise ValueError('A/D entries must be even')
        for row in self.B + self.C:
            for x in row:
                if not x.is_zero() and x.parity() != 1:
                    raise ValueError('B/C entries must be odd')

    def _block(self, rows):
        out = []
        for row in rows:
            r = []
            for x in row:
                if not isinstance(x, GrassmannElement):
                    x = GrassmannElement.scalar(self.registry, x)
                r.append(x)
            out.append(r)
        return out

    # ---- helpers on even-entried square blocks (commutative subalgebra) ----
    def _zero(self):
        return GrassmannElement.zero(self.registry)

    def _matmul(self, X, Y):
        n, k = len(X), len(Y)
        m = len(Y[0]) if k else 0
        out = [[self._zero() for _ in range(m)] for _ in range(n)]
        for i in range(n):
            for j in range(m):
                s = self._zero()
                for l in range(k):
                    s = s + X[i][l] * Y[l][j]
                out[i][j] = s
        return out

    def _even_det(self, M):
        n = len(M)
        if n == 0:
            return GrassmannElement.scalar(self.registry, 1)
        # Laplace expansion; blocks here are tiny (n <= 4 in practice)
        if n == 1:
            return M[0][0]
        det = self._zero()
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for row in M[1:]]
            term = M[0][j] * self._even_det(minor)
            det = det + (term if j % 2 == 0 else -term)
        return det

    def _even_inv(self, M):
        n = len(M)
        det = self._even_det(M)
        if det.body() == 0:
            raise ZeroDivisionError('singular even block')
        dinv = det.inverse()
        if n == 1:
            return [[dinv]]
        cof = [[self._zero() for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(n):
                minor = [row[:j] + row[j + 1:] for k, row in enumerate(M) if k != i]
                c = self._even_det(minor)
                cof[j][i] = c * dinv if (i + j) % 2 == 0 else -(c * dinv)
        return cof

    def sdet(self):
        """Superdeterminant det(A - B D^-1 C) * det(D)^-1."""
        if not self.D:
            return self._even_det(self.A)
        if not self.A:
            return self._even_det(self.D).inverse()
        Dinv = self._even_inv(self.D)
        BDC = self._matmul(self.B, self._matmul(Dinv, self.C))
        n = len(self.A)
        S = [[self.A[i][j] - BDC[i][j] for j in range(n)] for i in range(n)]
        return self._even_det(S) * self._even_det(self.D).inverse()

    def __matmul__(self, other):
        if self.registry is not other.registry:
            raise ValueError('registry mismatch')
        top = self._matmul(self.A, other.A), self._matmul(self.B, other.C)
        A = [[top[0][i][j] + top[1][i][j] for j in range(len(top[0][0]))]
             for i in range(len(top[0]))]
        tb = self._matmul(self.A, other.B), self._matmul(self.B, other.D)
        B = [[tb[0][i][j] + tb[1][i][j] for j in range(len(tb[0][0]))]
             for i in range(len(tb[0]))]
        tc = self._matmul(self.C, other.A), self._matmul(self.D, other.C)
        C = [[tc[0][i][j] + tc[1][i][j] for j in range(len(tc[0][0]))]
             for i in range(len(tc[0]))]
        td = self._matmul(self.C, other.B), self._matmul(self.D, other.D)
        D = [[td[0][i][j] + td[1][i][j] for j in range(len(td[0][0]))]
             for i in range(len(td[0]))]
        return SuperMatrix(self.registry, A, B, C, D)
