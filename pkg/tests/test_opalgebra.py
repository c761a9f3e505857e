import random
from fractions import Fraction

import pytest

from superphase.grassmann import CRat
from superphase.opalgebra import (
    ChargeSet, OperatorAlgebra, OpExpr, OrderingSpec, base_space_action_check,
    build_charges, graded_commutator, grassmann_delta, grassmann_ordering_check,
    liouvillian_ordering, op_superfield, superfield_commutator,
    susy_algebra_check,
)
from superphase.symexpr import parse

I = CRat(0, 1)


@pytest.fixture
def al():
    return OperatorAlgebra(1)


def test_fundamental_commutators(al):
    q, p = al.phi(0), al.phi(1)
    lq, lp = al.lam(0), al.lam(1)
    cq, cbq = al.c(0), al.cb(0)
    assert graded_commutator(q, lq) == al.scalar(I)
    assert graded_commutator(p, lp) == al.scalar(I)
    assert graded_commutator(q, lp).is_zero()
    assert graded_commutator(q, p).is_zero()          # commuting positions
    assert graded_commutator(cq, cbq) == al.scalar(1)
    assert graded_commutator(al.c(0), al.cb(1)).is_zero()
    assert graded_commutator(cq, al.c(1)).is_zero()


def test_commutator_rejects_mixed_grading(al):
    x = al.phi(0) + al.c(0)
    with pytest.raises(ValueError):
        graded_commutator(x, al.phi(0))


def test_normal_form_orders_lam_left_of_phi(al):
    # q lam_q = lam_q q + i
    x = al.phi(0) * al.lam(0)
    assert x == al.lam(0) * al.phi(0) + al.scalar(I)
    # c cb = 1 - cb c
    y = al.c(0) * al.cb(0)
    assert y == al.scalar(1) - al.cb(0) * al.c(0)


def test_normal_form_idempotent_linear_bounded(al):
    rng = random.Random(11)
    atoms = [al.phi(0), al.phi(1), al.lam(0), al.lam(1),
             al.c(0), al.c(1), al.cb(0), al.cb(1)]
    for _ in range(25):
        x = al.scalar(rng.randint(-2, 2))
        for _ in range(rng.randint(1, 6)):
            x = x * rng.choice(atoms)
        y = al.scalar(rng.randint(-3, 3))
        for _ in range(rng.randint(1, 6)):
            y = y * rng.choice(atoms)
        # reconstruction through the constructor is a fixed point
        assert OpExpr(al, x.terms) == x
        assert (x + y) - y == x
        for (_, w) in x.terms:
            assert len(w) <= 6
        # words stay within the ordered block pattern lam phi cb c
        for (_, w) in x.terms:
            ranks = [{'lam': 0, 'phi': 1, 'cb': 2, 'c': 3}[k] for k, _ in w]
            assert ranks == sorted(ranks)


def test_associativity_random(al):
    rng = random.Random(23)
    atoms = [al.phi(0), al.phi(1), al.lam(0), al.lam(1),
             al.c(0), al.c(1), al.cb(0), al.cb(1)]
    for _ in range(15):
        x, y, z = (rng.choice(atoms) * rng.choice(atoms) for _ in range(3))
        assert (x * y) * z == x * (y * z)


def test_charges_free_particle(al):
    ch = build_charges(parse('p^2/2'), al)
    q_brs = I * al.c(0) * al.lam(0) + I * al.c(1) * al.lam(1)
    assert ch.q_brs == q_brs
    # Q_H picks up -c^p dH/dp
    assert ch.q_h == q_brs - al.c(1) * al.phi(1)
    # H = 0 collapses Q_H back to the BRS charge
    ch0 = build_charges(parse('q^2') * 0, al)
    assert ch0.q_h == ch0.q_brs
    assert ch0.htilde.is_zero()


def test_ghost_charge_independent_of_hamiltonian(al):
    a = build_charges(parse('p^2/2'), al).q_g
    b = build_charges(parse('q^2*p^2'), al).q_g
    assert a == b


def test_charge_nilpotency():
    al = OperatorAlgebra(1)
    ch = build_charges(parse('q^2*p^2'), al)
    for name in ('q_brs', 'qbar_brs', 'k', 'kbar', 'q_h', 'qbar_h'):
        op = getattr(ch, name)
        assert graded_commutator(op, op).is_zero(), name


def test_all_charges_conserved():
    for hs in ('p^2/2', 'p^2/2 + q^2/2', 'q^2*p^2', 'q^3*p + q*p^2'):
        ch = build_charges(parse(hs))
        for name in ChargeSet.NAMES:
            r = graded_commutator(ch.htilde, getattr(ch, name))
            assert r.is_zero(), (hs, name)


def test_susy_algebra_closes():
    for hs in ('p^2/2', 'p^2/2 + q^2/2', 'q^2*p^2'):
        assert susy_algebra_check(parse(hs)).is_zero(), hs


def test_susy_algebra_random_polynomials():
    rng = random.Random(5)
    for _ in range(8):
        terms = {}
        for _ in range(rng.randint(1, 4)):
            e = (rng.randint(0, 2), rng.randint(0, 2))
            terms[e] = terms.get(e, 0) + Fraction(rng.randint(-3, 3))
        H = parse('0')
        for (i, j), c in terms.items():
            H = H + parse('q^%d * p^%d' % (i, j)) * c
        assert susy_algebra_check(H).is_zero()


def test_base_space_actions_vanish():
    for hs in ('p^2/2', 'p^2/2 + q^2/2', 'q^2*p^2'):
        H = parse(hs)
        for charge in ('q_brs', 'qbar_brs', 'q_h', 'qbar_h', 'htilde'):
            residuals = base_space_action_check(H, charge)
            assert all(r.is_zero() for r in residuals), (hs, charge)


def test_base_space_unknown_charge():
    with pytest.raises(KeyError):
        base_space_action_check(parse('p^2/2'), 'q_mystery')


def test_superfield_commutator_is_delta_delta():
    al = OperatorAlgebra(1, outer=('theta', 'thetabar', 'thetap', 'thetabarp'))
    C = superfield_commutator(algebra=al)
    assert C == grassmann_delta(al)
    # component extraction: coefficient of thetabar' theta' is -i [q, lam_q] = 1
    piece = C.outer_coefficient(('thetabarp', 'thetap'))
    assert piece == al.scalar(1)
    assert graded_commutator(al.phi(0), al.lam(0)) == al.scalar(I)


def test_superfield_self_commutators_vanish():
    al = OperatorAlgebra(1, outer=('theta', 'thetabar', 'thetap', 'thetabarp'))
    Q, Qp = op_superfield(al, 0), op_superfield(al, 0, primed=True)
    P, Pp = op_superfield(al, 1), op_superfield(al, 1, primed=True)
    assert graded_commutator(Q, Qp).is_zero()
    assert graded_commutator(P, Pp).is_zero()


def test_superfield_commutator_two_dof():
    al = OperatorAlgebra(2, outer=('theta', 'thetabar', 'thetap', 'thetabarp'))
    dd = grassmann_delta(al)
    for a in range(4):
        for b in range(4):
            C = graded_commutator(op_superfield(al, a),
                                  op_superfield(al, b, primed=True))
            assert (C - al.omega.upper(a, b) * dd).is_zero(), (a, b)


def _hermitian_weights(rng, n, m):
    """Random (alpha, beta) meeting normalization and the weight identity."""
    b = [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(m + 1)]
    b[-1] = 1 - sum(b[:-1])
    a = [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(n + 1)]
    rhs = n * sum(bj * (m - 2 * j) for j, bj in enumerate(b))
    S = 1 - sum(a[2:])
    T = Fraction(rhs, m)
    t_rest = sum(aj * (n - 2 * j) for j, aj in enumerate(a) if j >= 2)
    T = T - t_rest
    a1 = Fraction(n * S - T, 2)
    a = [S - a1, a1] + a[2:]
    return a, b


def test_ordering_weyl_and_pre_point():
    half = Fraction(1, 2)
    r = liouvillian_ordering(OrderingSpec(1, 1, [half, half], [half, half]))
    assert r['hermitian'] and r['hermitian_dagger'] and r['matches_pre_point']
    for (n, m) in ((1, 1), (2, 2), (3, 1), (2, 3)):
        a = [Fraction(1)] + [Fraction(0)] * n
        b = [Fraction(1)] + [Fraction(0)] * m
        r = liouvillian_ordering(OrderingSpec(n, m, a, b))
        assert r['matches_pre_point'] and r['built'] == r['pre_point']


def test_ordering_hermitian_collapse_and_violation():
    rng = random.Random(17)
    for _ in range(20):
        n, m = rng.randint(1, 3), rng.randint(1, 3)
        a, b = _hermitian_weights(rng, n, m)
        r = liouvillian_ordering(OrderingSpec(n, m, a, b))
        assert r['hermitian'] and r['hermitian_dagger']
        assert r['matches_pre_point'], (n, m, a, b)
        bad = list(a)
        bad[0] += Fraction(1, 3)
        bad[-1] -= Fraction(1, 3)
        sp = OrderingSpec(n, m, bad, b)
        if sp.hermitian():
            continue
        r = liouvillian_ordering(sp)
        assert not r['hermitian_dagger'] and not r['matches_pre_point']


def test_ordering_condition_matches_dagger_exactly():
    # the weight identity and the explicit adjoint must agree always
    rng = random.Random(29)
    for _ in range(30):
        n, m = rng.randint(0, 3), rng.randint(0, 3)
        a = [Fraction(rng.randint(-2, 2), rng.randint(1, 3)) for _ in range(n + 1)]
        b = [Fraction(rng.randint(-2, 2), rng.randint(1, 3)) for _ in range(m + 1)]
        a[-1] = 1 - sum(a[:-1])
        b[-1] = 1 - sum(b[:-1])
        sp = OrderingSpec(n, m, a, b)
        r = liouvillian_ordering(sp)
        assert r['hermitian'] == r['hermitian_dagger'], (n, m, a, b)


def test_ordering_spec_validation():
    with pytest.raises(ValueError):
        OrderingSpec(1, 1, [Fraction(1)], [Fraction(1), Fraction(0)])
    with pytest.raises(ValueError):
        OrderingSpec(1, 1, [Fraction(1), Fraction(1)], [Fraction(1), Fraction(0)])


def test_grassmann_sector_ordering_equivalence():
    for hs in ('q^2*p^2', 'p^2/2', '0'):
        assert grassmann_ordering_check(parse(hs)).is_zero(), hs


def test_dagger_involution_and_products(al):
    x = al.lam(0) * al.phi(0) * al.phi(1) + I * al.cb(0) * al.c(1)
    assert x.dagger().dagger() == x
    y = al.c(0) * al.lam(1)
    assert (x * y).dagger() == y.dagger() * x.dagger()
