"""Property-based checks on randomly drawn laws."""

from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from rwre import env as E
from rwre import estimators as S
from rwre import renewal as R
from rwre.exactq import propagate

probs = st.lists(st.integers(1, 20), min_size=2, max_size=4)


@st.composite
def forward_laws(draw):
    """One-dimensional laws with jumps in {0..3}, π(0) < 1 at every atom."""
    k = draw(st.integers(1, 3))
    atoms = []
    for _ in range(k):
        w = draw(st.lists(st.integers(0, 10), min_size=4, max_size=4))
        w[1 + draw(st.integers(0, 2))] += 1
        tot = sum(w)
        atoms.append((1 / k, {(z,): c / tot for z, c in enumerate(w) if c}))
    return E.make_law(atoms, (1,))


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(forward_laws())
def test_decomposition_holds(law):
    c = S.kappa_coeffs_formula(law)
    assert c.kappa_m_sq >= -1e-12 and c.kappa_q_sq >= -1e-12
    assert abs(c.kappa_m_sq + c.kappa_q_sq - c.D_total) <= 1e-9 * max(1.0, c.D_total)


@settings(max_examples=25, deadline=None)
@given(forward_laws(), st.integers(0, 2**64 - 1), st.integers(1, 60))
def test_propagation_is_a_probability(law, seed, n):
    pr = propagate(E.Environment(law, seed), 0, n)
    assert abs(pr.mass.sum() + pr.leak - 1) < 1e-12
    assert np.all(np.diff(pr.means) >= -1e-12)  # the walk never moves backward


@settings(max_examples=20, deadline=None)
@given(st.dictionaries(st.integers(1, 6), st.integers(1, 5), min_size=1, max_size=4), st.integers(0, 20))
def test_renewal_routes_agree(w, j):
    tot = sum(w.values())
    law = R.RenewalLaw.from_pmf({k: v / tot for k, v in w.items()})
    j *= law.h
    a = R.exact_moment_L(law, 0, j, 2, "linear").value
    b = R.exact_moment_L(law, 0, j, 2, "dp").value
    assert abs(a - b) <= 1e-9 * max(1.0, a)
    if j > 0:
        assert R.exact_moment_L(law, j, j, 2).value == j**2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_environment_is_a_pure_function_of_seed(seed):
    law = E.one_two_jump()
    a = E.Environment(law, seed)
    b = E.Environment(law, seed)
    assert [a.site_atom((x,)) for x in range(20)] == [b.site_atom((x,)) for x in range(20)]


@settings(max_examples=15, deadline=None)
@given(st.lists(st.fractions(min_value=Fraction(1, 10), max_value=1), min_size=2, max_size=3))
def test_restricted_identity_exact(ps):
    law = E.make_law([(Fraction(1, len(ps)), {(0,): 1 - p, (1,): p}) for p in ps], (1,))
    r = S.restricted_path_coefficients(law)
    assert r.residual == 0
