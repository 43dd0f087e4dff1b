import math
from fractions import Fraction

import numpy as np
import pytest

from rwre import env as E
from rwre import estimators as S
from rwre.walk import sample_blocks


def test_velocity_deterministic():
    law = E.deterministic((2, 1), u_hat=(1, 0))
    bs = sample_blocks(law, count=50)
    v = S.velocity(bs)
    assert v.value.tolist() == [2.0, 1.0]
    assert np.all(v.std_err == 0)
    rep = S.annealed_diffusion(bs)
    assert np.all(rep.D_hat == 0)


def test_velocity_needs_two_blocks():
    with pytest.raises(ValueError):
        S.velocity((np.array([1.0]), np.array([1.0])))


def test_diffusion_report_invariants(onetwo):
    rep = S.annealed_diffusion(sample_blocks(onetwo, count=5000, master_seed=3))
    assert np.allclose(rep.D_hat, rep.D_hat.T, atol=1e-12)
    assert np.linalg.eigvalsh(rep.D_hat).min() >= -1e-9 * np.trace(rep.D_hat)
    js = rep.to_json()
    assert set(js) >= {"quantity", "method", "value", "std_err", "n_samples", "truncation"}


def test_jackknife_mean_matches_classical_se(rng):
    x = rng.normal(size=4000)
    est, se, _ = S.jackknife(lambda a: a.mean(), (x,), n_groups=4000)
    assert est == pytest.approx(x.mean())
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-9)


def test_degeneracy_subspaces():
    sub = S.degeneracy_subspace(E.two_jump_homogeneous((1, 0), (0, 1)))
    assert sub.rank == 1
    assert sub.complement == [[Fraction(1), Fraction(1)]]
    single = S.degeneracy_subspace(E.deterministic((1, 1), u_hat=(1, 0)))
    assert single.rank == 0 and len(single.complement) == 2
    assert S.degeneracy_subspace(E.abscont()).rank == 1
    three = S.degeneracy_subspace(E.make_law([(1.0, {(1, 0): 0.3, (0, 1): 0.3, (1, 1): 0.4})], (1, 1)))
    assert three.rank == 2 and three.complement == []


def test_verify_degeneracy_vacuous_and_deterministic():
    law = E.deterministic((1, 0), u_hat=(1, 0))
    rep = S.annealed_diffusion(sample_blocks(law, count=100))
    out = S.verify_degeneracy(rep, S.degeneracy_subspace(law))
    assert out["pass"] and out["max_abs"] == 0


def test_kappa_formula_closed_forms(lazy, onetwo):
    c = S.kappa_coeffs_formula(lazy)
    assert c.kappa_m_sq == pytest.approx(0.25 / 3.375, abs=1e-12)
    assert c.kappa_q_sq == pytest.approx(1 / 3.375, abs=1e-12)
    c2 = S.kappa_coeffs_formula(onetwo)
    assert c2.kappa_m_sq == pytest.approx(0.04 * 0.6 / 0.8, abs=1e-12)
    assert c2.D_total == pytest.approx(0.24, abs=1e-12)
    js = c2.to_json()
    assert js["truncation"]["terms"] > 1


def test_kappa_m_vanishes_for_constant_drift():
    c = S.kappa_coeffs_formula(E.constant_drift())
    assert c.kappa_m_sq == pytest.approx(0.0, abs=1e-14)
    assert c.kappa_q_sq == pytest.approx(c.D_total, abs=1e-12)


def test_kappa_decomposition_random_law(rng):
    for _ in range(5):
        k = 3
        atoms = []
        for _ in range(k):
            p = rng.dirichlet(np.ones(4))
            atoms.append((1 / k, {(0,): p[0] * 0.5, (1,): p[1] + p[0] * 0.5, (2,): p[2], (3,): p[3]}))
        law = E.make_law(atoms, (1,))
        c = S.kappa_coeffs_formula(law)
        assert c.kappa_m_sq + c.kappa_q_sq == pytest.approx(c.D_total, abs=1e-10)
        assert S.decomposition_check(c, c.D_total)["pass"]


def test_diffusion_1d_matches_blocks(onetwo):
    bs = sample_blocks(onetwo, count=40_000, master_seed=8)
    rep = S.annealed_diffusion(bs, v=1.4)
    assert rep.v_exact
    assert abs(rep.D_hat[0, 0] - S.diffusion_1d(onetwo)) <= 4 * rep.std_err[0, 0]


def test_kappa_formula_rejects_2d():
    with pytest.raises(ValueError):
        S.kappa_coeffs_formula(E.abscont())


def test_kappa_m_alt_lazy_is_exact(lazy):
    alt = S.kappa_m_alt(lazy, replicates=5, horizon=500)
    assert alt.value == pytest.approx(2 / 27, abs=1e-14)
    assert S.kappa_m_alt(E.constant_drift()).value == 0.0


def test_pinfty_density_and_regeneration(onetwo):
    ev = E.WindowEvent([((0,), 1)], level=0, u_hat=(1,))
    exact = S.pinfty_density_1d(onetwo, 1)
    assert exact == pytest.approx(0.5)  # no holding, density is flat
    lazy = E.lazy_nn()
    ev0 = E.WindowEvent([((0,), 0)], level=0, u_hat=(1,))
    target = S.pinfty_density_1d(lazy, 0)
    assert target == pytest.approx(2 / 3)
    a = S.pinfty_via_regeneration(lazy, ev0, 20_000, 4)
    b = S.pinfty_via_limit(lazy, ev0, 200, 20_000, 5)
    assert abs(a.value - target) <= 4 * a.std_err
    assert abs(b.value - target) <= 4 * b.std_err
    full = S.pinfty_via_regeneration(onetwo, E.WindowEvent([], 0), 1000)
    assert full.value == 1.0
    assert ev.constraints


def test_pinfty_limit_n0_is_product_measure():
    law = E.abscont()
    ev = E.WindowEvent([((0, 0), 1)], level=0, u_hat=(1, 0))
    r = S.pinfty_via_limit(law, ev, 0, 30_000, 2)
    assert abs(r.value - 1 / 3) <= 4 * r.std_err


def test_abscont_event_never_seen_after_time_zero():
    law = E.abscont()
    ev = E.abscont_event()
    assert S.pinfty_via_limit(law, ev, 3, 20_000).extra["hits"] == 0
    assert S.pinfty_via_regeneration(law, ev, 5000).extra["hits"] == 0


def test_quenched_mean_fluctuation_degenerate():
    q = S.quenched_mean_fluctuation(E.constant_drift(), 200, 20)
    assert np.allclose(q.scaled, 0, atol=1e-10)


def test_quenched_mean_drift_bounded(lazy):
    out = S.quenched_mean_drift_bound(lazy, [100, 200, 400, 800], n_envs=60)
    assert out["bounded"]
    det = S.quenched_mean_drift_bound(E.deterministic((1,)), [10, 20], n_envs=3)
    assert det["abs_bias"] == [0.0, 0.0]


def test_restricted_coefficients_exact():
    r = S.restricted_path_coefficients(E.lazy_nn())
    assert r.v == (Fraction(2, 3),)
    assert r.kappa0_sq == Fraction(2, 3)
    assert r.residual == 0
    d = S.restricted_path_coefficients(E.deterministic((1, 1), u_hat=(1, 0)))
    assert d.kappa0_sq == 0 and d.D_m == [[0, 0], [0, 0]]
    r2 = S.restricted_path_coefficients(E.restricted_2d())
    assert r2.residual == 0
    with pytest.raises(S.NotRestrictedPath):
        S.restricted_path_coefficients(E.one_two_jump())


def test_p0():
    p0 = S.p0_constant()
    assert abs(p0 - 7.06025) < 1e-4
    assert p0 > 0.5 * (5 + math.sqrt(17))
    assert abs(S.p0_cubic(p0)) < 1e-6


@pytest.mark.parametrize("atoms", [
    [(0.5, {(0,): 10 / 11, (3,): 1 / 11}), (0.5, {(3,): 1.0})],
    [(0.5, {(2,): 1.0}), (0.5, {(0,): 0.5, (2,): 0.5})],
])
def test_kappa_formula_on_sublattice(atoms):
    c = S.kappa_coeffs_formula(E.make_law(atoms, (1,)))
    assert c.truncation["lattice_step"] > 1
    assert c.kappa_m_sq + c.kappa_q_sq == pytest.approx(c.D_total, abs=1e-12)
    assert c.kappa_m_sq > 0


def test_kappa_formula_slow_holding_law_converges():
    law = E.make_law([(1 / 3, {(0,): 10 / 11, (1,): 1 / 11}), (1 / 3, {(0,): 0.5, (3,): 0.5}), (1 / 3, {(2,): 1.0})], (1,))
    c = S.kappa_coeffs_formula(law)
    assert c.kappa_m_sq + c.kappa_q_sq == pytest.approx(c.D_total, abs=1e-10)
