"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -s`` to watch the lines as they come, or
``python tests/test_acceptance.py`` for the lines alone.  The lines are also
repeated in the pytest terminal summary.
"""

from __future__ import annotations

import functools
import json
import math
import time

import numpy as np
import pytest

from rwre import env as E
from rwre import estimators as S
from rwre import exactq as Q
from rwre import renewal as R
from rwre import stats as ST
from rwre.cli import cli_main, example_battery
from rwre.walk import sample_blocks

SEED = 20240601
RESULTS: dict[int, str] = {}


def record(number: int, ok: bool, detail: str, seconds: float) -> None:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  ({seconds:.1f}s)  {detail}"
    RESULTS[number] = line
    print(line, flush=True)


def timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def _battery(name):
    rep, dt = timed(lambda: example_battery(name, SEED))
    failed = [c["check"] for c in rep["checks"] if not c["pass"]]
    return rep, dt, failed


# 1 -------------------------------------------------------------------------
def test_criterion_01_p0(capsys):
    def run():
        code = cli_main(["p0"])
        return code, json.loads(capsys.readouterr().out)

    (code, rep), dt = timed(run)
    # independent oracle: largest real root of -2p^3 + 19p^2 - 37p + 18
    roots = np.roots([-2.0, 19.0, -37.0, 18.0])
    closed = float(max(r.real for r in roots if abs(r.imag) < 1e-12))
    ok = code == 0 and abs(rep["value"] - 7.06025) < 1e-4 and abs(rep["value"] - closed) < 1e-12 and dt < 1
    with capsys.disabled():
        record(1, ok, f"p0={rep['value']:.7f} (cubic root {closed:.7f})", dt)
    assert ok


# 2, 3 ------------------------------------------------------------------------
@pytest.mark.parametrize("number,name", [(2, "lazy-nn"), (3, "one-two-jump")])
def test_criteria_02_03_batteries(number, name):
    rep, dt, failed = _battery(name)
    vals = {c["check"]: c.get("value") for c in rep["checks"]}
    f = lambda k: float(np.ravel(vals[k])[0])
    detail = (f"{name}: v={f('formula v'):.6f} km2={f('formula kappa_m_sq'):.7f} kq2={f('formula kappa_q_sq'):.7f} "
              f"D={f('formula D'):.6f}; MC km2={f('mc kappa_m_sq'):.4f} kq2={f('mc kappa_q_sq'):.4f} "
              f"D={f('mc D'):.4f}" + (f"; failed {failed}" if failed else ""))
    ok = rep["pass"] and dt < 300
    record(number, ok, detail, dt)
    assert ok, failed


# 4 -------------------------------------------------------------------------
def test_criterion_04_degeneracy():
    def run():
        law = E.two_jump_homogeneous((1, 0), (0, 1))
        rep = S.annealed_diffusion(sample_blocks(law, count=100_000, master_seed=SEED))
        a_b = np.array([1.0, -1.0])
        target = 0.25 * np.outer(a_b, a_b)
        comp = np.abs(rep.D_hat - target) <= 4 * rep.std_err
        sub = S.degeneracy_subspace(law)
        q, se = rep.quad_form(sub.complement_unit()[0])
        return rep, comp.all(), q, se

    (rep, comp_ok, q, se), dt = timed(run)
    ok = comp_ok and abs(q) <= 4 * se and dt < 60
    record(4, ok, f"D_hat={np.round(rep.D_hat, 4).tolist()} u'Du={q:.2e} (4se={4 * se:.2e})", dt)
    assert ok


# 5 -------------------------------------------------------------------------
def test_criterion_05_abscont():
    rep, dt, failed = _battery("abscont")
    c = {x["check"]: x for x in rep["checks"]}
    p = c["P(A) at the origin"]
    hits = [c[f"P_n(A) n={n}"]["hits"] for n in (1, 5, 20)]
    ok = (p["pass"] and all(h == 0 for h in hits) and c["P_n(A) n=1"]["walks"] == 10**6 and dt < 300)
    record(5, ok, f"P(A)={p['value']:.5f} vs 1/27={1 / 27:.5f} (se {p['std_err']:.1e}); hits n=1,5,20: {hits}", dt)
    assert ok


# 6 -------------------------------------------------------------------------
def test_criterion_06_si_infty():
    rep, dt, failed = _battery("si-infty")
    c = rep["checks"][0]
    z = [s / e for s, e in zip(c["steps"], c["step_se"])]
    ok = rep["pass"] and dt < 300
    record(6, ok, f"E[s1^cap]={np.round(c['means'], 2).tolist()} step/se={np.round(z, 1).tolist()}", dt)
    assert ok


# 7 -------------------------------------------------------------------------
def test_criterion_07_martingale_identity():
    def run():
        worst, bad = 0.0, 0
        for law in (E.lazy_nn(), E.one_two_jump()):
            for s in S.env_seeds(SEED, 100, 700):
                r, b = Q.martingale_residual(E.Environment(law, s))
                bad += abs(r) > b
                worst = max(worst, abs(r) / b if b > 0 else (0.0 if r == 0 else math.inf))
        return bad, worst

    (bad, worst), dt = timed(run)
    ok = bad == 0 and dt < 60
    record(7, ok, f"200 environments, violations={bad}, max |residual|/bound={worst:.3f}", dt)
    assert ok


# 8 -------------------------------------------------------------------------
def test_criterion_08_exponential_bound():
    def run():
        viol = count = 0
        worst = 0.0
        for law in (E.lazy_nn(), E.one_two_jump(), E.abscont(), E.restricted_2d()):
            lam = Q.lambda0(law) / 2
            for s in S.env_seeds(SEED, 20, 800):
                env = E.Environment(law, s)
                for n in range(1, 31):
                    lhs, rhs = Q.exp_bound_check(env, (0,) * law.dim, n, lam)
                    viol += lhs > rhs
                    count += 1
                    worst = max(worst, lhs / rhs)
        return viol, count, worst

    (viol, count, worst), dt = timed(run)
    ok = viol == 0 and dt < 60
    record(8, ok, f"{count} (law, env, n) checks, violations={viol}, max lhs/rhs={worst:.4f}", dt)
    assert ok


# 9 -------------------------------------------------------------------------
def test_criterion_09_restricted_path():
    def run():
        laws = {"lazy-nn": E.lazy_nn(), "lazy-3": E.lazy_nn((0.25, 0.5, 1.0)), "restricted-2d": E.restricted_2d()}
        res = {k: S.restricted_path_coefficients(v) for k, v in laws.items()}
        kq = S.kappa_coeffs_formula(laws["lazy-nn"]).kappa_q_sq
        cross = abs(float(res["lazy-nn"].kappa0_sq * res["lazy-nn"].v[0] ** 2) - kq)
        # the total matrix is also checked against the independent one-step formula
        d_gap = max(abs(float(res[k].D_total[0][0]) - S.diffusion_1d(laws[k])) for k in ("lazy-nn", "lazy-3"))
        return res, cross, d_gap

    (res, cross, d_gap), dt = timed(run)
    resid = max(float(abs(r.residual)) for r in res.values())
    ok = resid <= 1e-12 and cross <= 1e-12 and d_gap <= 1e-12 and dt < 1
    record(9, ok, f"max identity residual={resid:.1e} (exact), kappa0^2 v^2 - kq2={cross:.1e}, "
                  f"D vs one-step formula {d_gap:.1e}", dt)
    assert ok


# 10 ------------------------------------------------------------------------
CRIT10_TREND_REASON = (
    "Y uniform{1,2}, p=1: E(L_{0,j})/(1+j) rises monotonically to its bound 1 (E(L_{0,j}) = j + c_j, c_j -> 2/3), "
    "so its log-log trend is positive (slope ~ +0.012 +/- 0.001) although the ratio is bounded; see the decisions ledger"
)


@functools.lru_cache(maxsize=None)
def _criterion_10():
    t = time.perf_counter()
    laws = {"uniform{1,2}": R.RenewalLaw.uniform(1, 2), "uniform{1..5}": R.RenewalLaw.uniform(1, 5)}
    exact_ok, oracle_gap, trend = True, 0.0, {}
    j_grid = np.arange(1, 201)
    for name, law in laws.items():
        for p in (1, 2, 3):
            exact_ok &= all(R.exact_moment_L(law, i, i, p).value == i**p for i in range(1, 51))
            res = R.verify_moment_bound(law, p, j_grid)
            trend[(name, p)] = res
        dp = R.L_moments_dp(law, 200, 1)[1, 1:]
        lin = np.array([R.exact_moment_L(law, 0, int(j), 1, "linear").value for j in j_grid])
        oracle_gap = max(oracle_gap, float(np.max(np.abs(dp - lin))))
    return exact_ok, oracle_gap, trend, time.perf_counter() - t


def test_criterion_10_exact_parts():
    exact_ok, gap, trend, dt = _criterion_10()
    others = {k: r for k, r in trend.items() if k != ("uniform{1,2}", 1)}
    assert exact_ok
    assert gap <= 1e-9
    assert all(r["pass"] for r in others.values())
    assert all(np.isfinite(r["C_hat"]) for r in trend.values())
    assert dt < 300


@pytest.mark.xfail(strict=True, reason=CRIT10_TREND_REASON)
def test_criterion_10_trend():
    exact_ok, gap, trend, dt = _criterion_10()
    failing = [f"{k[0]} p={k[1]} slope={r['slope']:+.4f}+/-{r['slope_se']:.4f}" for k, r in trend.items() if not r["pass"]]
    ok = exact_ok and gap <= 1e-9 and not failing and dt < 300
    slopes = ", ".join(f"{k[0]} p={k[1]}: {r['slope']:+.3f}" for k, r in trend.items())
    detail = f"L_ii^p=i^p exact: {exact_ok}; dp vs linear p=1 max gap {gap:.1e}; slopes {slopes}"
    if failing:
        detail += f"; positive trend in {failing} (ratio bounded, C_hat={trend[('uniform{1,2}', 1)]['C_hat']:.4f})"
    record(10, ok, detail, dt)
    assert ok


# 11 ------------------------------------------------------------------------
def test_criterion_11_block_independence():
    def run():
        out = {}
        for law in (E.lazy_nn(), E.one_two_jump(), E.abscont()):
            bs = sample_blocks(law, count=10_000, master_seed=SEED, per_replicate=10_000)
            assert np.all(bs.replicate == 0)  # one walk
            out[law.family + str(law.dim) + str(len(law.site_law))] = ST.block_independence_test(bs.duration, bs.displacement)
        return out

    out, dt = timed(run)
    ok = all(r["pass"] for r in out.values()) and dt < 60
    worst = max(r["statistic"] for r in out.values())
    record(11, ok, f"3 laws x 10^4 blocks from one walk, max |autocorr| lag 1..5 = {worst:.4f} (4se={4e-2:.4f})", dt)
    assert ok


# 12 ------------------------------------------------------------------------
def test_criterion_12_tightness_dichotomy():
    def run():
        grid = np.unique(np.linspace(100, 2000, 20).astype(int))
        deg = ST.tightness_diagnostic(E.constant_drift(), SEED, grid)
        moving = [ST.tightness_diagnostic(E.lazy_nn(), s, grid) for s in S.env_seeds(SEED, 5, 1200)]
        q = S.quenched_mean_fluctuation(E.lazy_nn(), 2000, 2000, SEED)
        return deg, moving, q

    (deg, moving, q), dt = timed(run)
    c0 = max(abs(x) for x in deg["c"])
    var_ok = abs(q.variance - 2 / 27) <= 4 * q.variance_se
    ok = (c0 < 1e-9 and deg["regime"] == "degenerate" and all(m["regime"] == "non-stabilizing" for m in moving)
          and var_ok and dt < 600)
    record(12, ok, f"D=v: max|c_n|={c0:.1e}; lazy-nn non-stabilizing in {sum(m['pass'] for m in moving)}/5 envs; "
                   f"Var c_2000={q.variance:.4f}+/-{q.variance_se:.4f} vs 2/27={2 / 27:.4f}", dt)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
