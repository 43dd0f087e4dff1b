"""Finite-n diagnostics for the limit theorems.

Every check returns a JSON-ready verdict ``{test, statistic, threshold, pass}``
plus whatever supporting numbers a reader needs.  Thresholds are four standard
errors unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from . import _rng
from .env import Environment, EnvironmentLaw
from .exactq import propagate, site_table, velocity_1d
from . import kernels as K
from .walk import _packed_args, first_regeneration_times, replicate_keys

N_SE = 4.0
KS_CRIT_1PCT = 1.6276  # asymptotic Kolmogorov quantile at 0.99
MIN_SAMPLES = 1000


def verdict(test: str, statistic, threshold, passed: bool, **extra) -> dict:
    out = {"test": test, "statistic": statistic, "threshold": threshold, "pass": bool(passed)}
    out.update(extra)
    return out


@dataclass(frozen=True)
class SampleSummary:
    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_statistic_vs_gaussian: float

    def to_json(self) -> dict:
        return asdict(self)


def summarize(samples, ref_variance: float | None = None) -> SampleSummary:
    x = np.asarray(samples, dtype=float)
    n = x.size
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    sd = math.sqrt(var)
    if sd > 0:
        skew = float(sps.skew(x))
        kurt = float(sps.kurtosis(x))
    else:
        skew = kurt = 0.0
    s = math.sqrt(ref_variance) if ref_variance is not None else sd
    ks = float(sps.kstest(x, "norm", args=(0.0, s)).statistic) if s > 0 else (0.0 if np.all(x == 0) else 1.0)
    return SampleSummary(n, float(x.mean()), var, skew, kurt, ks)


def normality_check(samples, target_variance: float | None = None) -> dict:
    """Skewness, excess kurtosis and KS against ``Normal(0, target or sample variance)``.

    Constant samples fail unless ``target_variance == 0`` and they are all 0.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < MIN_SAMPLES:
        raise ValueError(f"normality check needs at least {MIN_SAMPLES} samples, got {n}")
    summ = summarize(x, target_variance)
    if summ.variance == 0.0:
        ok = target_variance == 0 and np.all(x == 0)
        return verdict("normality", 0.0, 0.0, ok, summary=summ.to_json(), degenerate=True)
    se_skew = math.sqrt(6.0 / n)
    se_kurt = math.sqrt(24.0 / n)
    ks_crit = KS_CRIT_1PCT / math.sqrt(n)
    parts = {
        "skewness": abs(summ.skewness) <= N_SE * se_skew,
        "kurtosis": abs(summ.excess_kurtosis) <= N_SE * se_kurt,
        "ks": summ.ks_statistic_vs_gaussian <= ks_crit,
    }
    if target_variance is not None:
        # variance of the sample second moment around the target
        se_var = math.sqrt(max(np.var(x**2, ddof=1), 0.0) / n)
        parts["variance"] = abs(float(np.mean(x**2)) - target_variance) <= N_SE * se_var
    return verdict("normality", summ.ks_statistic_vs_gaussian, ks_crit, all(parts.values()),
                   summary=summ.to_json(), parts=parts, se_skew=se_skew, se_kurt=se_kurt)


def annealed_endpoints(law: EnvironmentLaw, n: int, replicates: int, master_seed=0) -> np.ndarray:
    """``X_n`` under the annealed law, one fresh environment per replicate."""
    keys = [replicate_keys(master_seed, r) for r in range(replicates)]
    ek = np.array([k[0] for k in keys], dtype=np.uint64)
    wk = np.array([k[1] for k in keys], dtype=np.uint64)
    out = np.empty((replicates, law.dim), dtype=np.int64)
    for r in range(replicates):
        pos = K.quenched_path(*_packed_args(law), _rng.key(ek[r]), _rng.key(wk[r]),
                              np.zeros(law.dim, dtype=np.int64), int(n))
        out[r] = pos[-1]
    return out


def quenched_clt_check(env: Environment, n: int, replicates: int, walk_seed=0,
                       kappa_q_sq: float | None = None) -> dict:
    """Samples ``(X_n - E^w X_n)/sqrt(n)`` in one 1d environment.

    The quenched mean and variance are exact.  The sample variance is
    compared with ``kappa_q_sq`` (default: the exact ``Var^w(X_n)/n``) at
    four standard errors, and the samples go through :func:`normality_check`.
    """
    if env.law.dim != 1:
        raise ValueError("quenched CLT check is one-dimensional")
    pr = propagate(env, 0, n)
    mean = float(pr.means[-1])
    qvar = float(pr.variances[-1]) / n
    R = env.law.max_jump
    probs = site_table(env, 0, n * R + 1)
    wk = np.array([_rng.derive_key(walk_seed, w) for w in range(replicates)], dtype=np.uint64)
    x = K.quenched_endpoints_1d(np.ascontiguousarray(probs), probs.shape[0], int(n), wk).astype(float)
    z = (x - mean) / math.sqrt(n)
    target = qvar if kappa_q_sq is None else kappa_q_sq
    m2 = float(np.mean(z**2))
    se = float(np.std(z**2, ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    var_ok = abs(m2 - target) <= N_SE * se if se > 0 else abs(m2 - target) <= 1e-12
    # the exact law of X_n gives two reference distances: how far the
    # finite-n quenched law itself sits from the Gaussian, and how far the
    # samples sit from that exact law (a check on the sampler)
    sites = np.arange(pr.lo, pr.lo + pr.mass.size)
    cdf = np.cumsum(pr.mass)
    ecdf = np.searchsorted(np.sort(x), sites, side="right") / replicates
    ks_exact = float(np.max(np.abs(ecdf - cdf))) if replicates else 0.0
    sd = math.sqrt(max(qvar * n, 0.0))
    d_gauss = float(np.max(np.abs(cdf - sps.norm.cdf((sites + 0.5 - mean) / sd)))) if sd > 0 else 0.0
    if np.all(z == 0):
        norm = verdict("normality", 0.0, 0.0, target == 0, degenerate=True)
    else:
        # X_n lives on a lattice; a uniform jitter of one cell (randomised
        # continuity correction) makes the KS comparison with a continuous law
        # meaningful and moves the variance by only 1/(12n)
        jit = np.random.default_rng(_rng.derive_key(walk_seed, 0x4A17)).uniform(-0.5, 0.5, z.size)
        norm = normality_check(z + jit / math.sqrt(n), None)
    return verdict("quenched_clt", m2, target, var_ok and norm["pass"], std_err=se, exact_qvar=qvar,
                   summary=summarize(z).to_json(), normality=norm, ks_vs_exact_law=ks_exact,
                   ks_exact_law_vs_gaussian=d_gauss, ks_critical=KS_CRIT_1PCT / math.sqrt(max(replicates, 1)))


def tightness_diagnostic(law: EnvironmentLaw, env_seed, n_grid) -> dict:
    """Exact ``c_n = (E^w X_n - n v)/sqrt(n)`` over ``n_grid`` for one environment.

    The error floor collects the propagation's pruned mass and float round-off.
    The series is declared non-stabilising when its range over the top half
    of the grid exceeds four times that floor; otherwise it is reported as
    degenerate/tight.  It is a diagnostic; it cannot prove non-tightness.
    """
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    v = velocity_1d(law)
    pr = propagate(Environment(law, env_seed), 0, int(n_grid[-1]))
    c = (pr.means[n_grid] - n_grid * v) / np.sqrt(n_grid)
    eps = np.finfo(float).eps
    floor_n = (pr.leak * law.max_jump * n_grid + 64 * eps * n_grid * max(law.max_jump, 1)) / np.sqrt(n_grid)
    top = n_grid >= np.median(n_grid)
    rng_top = float(c[top].max() - c[top].min())
    floor = float(floor_n[top].max())
    moving = rng_top > N_SE * floor
    return verdict("tightness", rng_top, N_SE * floor, moving, regime="non-stabilizing" if moving else "degenerate",
                   n=n_grid.tolist(), c=c.tolist(), floor=floor)


def _autocorr(x: np.ndarray, lag: int) -> float:
    x = x - x.mean()
    den = float(x @ x)
    return float(x[:-lag] @ x[lag:]) / den if den > 0 else 0.0


def block_independence_test(durations, displacements=None, max_lag: int = 5, n_bins: int = 4) -> dict:
    """Lag-1..``max_lag`` autocorrelations and a chi-square test on lagged pairs."""
    dur = np.asarray(durations, dtype=float)
    series = {"duration": dur}
    if displacements is not None:
        disp = np.asarray(displacements, dtype=float)
        disp = disp[:, None] if disp.ndim == 1 else disp
        for c in range(disp.shape[1]):
            series[f"displacement{c}"] = disp[:, c]
    n = dur.size
    if n < MIN_SAMPLES:
        raise ValueError(f"block independence needs at least {MIN_SAMPLES} blocks")
    se = 1.0 / math.sqrt(n)
    table = {}
    ok = True
    chi = {}
    for name, x in series.items():
        if np.all(x == x[0]):
            table[name] = [0.0] * max_lag
            continue
        r = [_autocorr(x, k) for k in range(1, max_lag + 1)]
        table[name] = r
        ok &= all(abs(v) <= N_SE * se for v in r)
        # contingency table of (x_i, x_{i+1}) over quantile bins
        edges = np.unique(np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1]))
        b = np.searchsorted(edges, x, side="right")
        k = int(b.max()) + 1
        if k > 1:
            ct = np.zeros((k, k))
            np.add.at(ct, (b[:-1], b[1:]), 1)
            ct = ct[ct.sum(axis=1) > 0][:, ct.sum(axis=0) > 0]
            if min(ct.shape) > 1:
                res = sps.chi2_contingency(ct)
                chi[name] = {"statistic": float(res.statistic), "p_value": float(res.pvalue), "dof": int(res.dof)}
    worst = max((abs(v) for r in table.values() for v in r), default=0.0)
    return verdict("block_independence", worst, N_SE * se, ok, autocorrelation=table, chi_square=chi, n=n)


def annealed_tail_check(law: EnvironmentLaw, n: int, p_bar: float, replicates: int = 20_000, master_seed=0,
                        h_grid=None, min_count: int = 5) -> dict:
    """Empirical ``P(|X_n - n v| > h)`` against the envelope ``h^-p_bar n^(p_bar/2)``.

    ``h_grid`` defaults to ``[3 sqrt(n), 10 sqrt(n)]``.  The log-log slope is
    fitted on grid points with at least ``min_count`` exceedances; with fewer
    than two such points the tail is reported as vanishing on the grid.
    """
    v = np.asarray(velocity_1d(law) if law.dim == 1 else law.site_law.jds[0].drift(), dtype=float)
    if h_grid is None:
        h_grid = np.linspace(3 * math.sqrt(n), 10 * math.sqrt(n), 8)
    h_grid = np.asarray(h_grid, dtype=float)
    x = annealed_endpoints(law, n, replicates, master_seed).astype(float)
    dev = np.linalg.norm(x - n * np.atleast_1d(v), axis=1)
    counts = np.array([(dev > h).sum() for h in h_grid])
    tail = counts / replicates
    use = counts >= min_count
    if use.sum() >= 2:
        lx, ly = np.log(h_grid[use]), np.log(tail[use])
        res = sps.linregress(lx, ly)
        slope, se = float(res.slope), float(res.stderr)
        ok = slope <= -p_bar + N_SE * se
    else:
        slope, se, ok = -math.inf, 0.0, True
    return verdict("annealed_tail", slope, -p_bar, ok, slope_se=se, h=h_grid.tolist(), tail=tail.tolist(),
                   counts=counts.tolist(), envelope=(h_grid ** -p_bar * n ** (p_bar / 2)).tolist())


def sigma1_divergence_probe(law: EnvironmentLaw, caps=(100, 1000, 10_000, 100_000), replicates: int = 1_000_000,
                            master_seed=0) -> dict:
    """Truncated means ``E[sigma_1 ^ cap]`` from one set of replicates.

    Each replicate is run to the largest cap once; smaller truncations are
    read off the same draw, so successive differences are paired.  Passes
    ("divergent") when every step exceeds four standard errors of the paired
    difference.
    """
    caps = sorted(int(c) for c in caps)
    s = first_regeneration_times(law, replicates, master_seed, cap=caps[-1]).astype(float)
    means, steps, ses = [], [], []
    prev = None
    for c in caps:
        t = np.minimum(s, c)
        means.append(float(t.mean()))
        if prev is not None:
            d = t - prev
            steps.append(float(d.mean()))
            ses.append(float(d.std(ddof=1) / math.sqrt(replicates)))
        prev = t
    increasing = all(st > N_SE * se for st, se in zip(steps, ses))
    return verdict("sigma1_divergence", min((st / se if se > 0 else 0.0) for st, se in zip(steps, ses)),
                   N_SE, increasing, caps=caps, means=means, steps=steps, step_se=ses,
                   mean_se=float(np.minimum(s, caps[-1]).std(ddof=1) / math.sqrt(replicates)))
