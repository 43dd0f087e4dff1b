"""Common points of two independent renewal processes.

``L_{i,j}`` is the first level ``l >= 1`` hit both by ``i + S_m`` and by
``j + S'_n``.  Exact values come from two independent constructions: the
overshoot (zeta) chain, whose moments solve small linear systems, and the
joint forward-recurrence chain, whose first return to ``(0, 0)`` is
propagated as a full probability mass function.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np

HORIZON = 1_000_000
PMF_TOL = 1e-15


class RenewalError(ValueError):
    pass


class HorizonExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class RenewalLaw:
    """Finite-support law of a positive integer inter-arrival time ``Y``."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.support) == 0 or len(self.support) != len(self.probs):
            raise RenewalError("support and probabilities must be non-empty and aligned")
        if any(int(k) != k or k < 1 for k in self.support):
            raise RenewalError("support must consist of positive integers")
        if any(p < 0 for p in self.probs) or abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise RenewalError("probabilities must be non-negative and sum to 1")

    @classmethod
    def from_pmf(cls, pmf: dict) -> "RenewalLaw":
        items = sorted((int(k), float(p)) for k, p in pmf.items() if p > 0)
        return cls(tuple(k for k, _ in items), tuple(p for _, p in items))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "RenewalLaw":
        n = hi - lo + 1
        return cls(tuple(range(lo, hi + 1)), (1.0 / n,) * n)

    @property
    def h(self) -> int:
        return reduce(math.gcd, self.support)

    @property
    def rho(self) -> int:
        return max(self.support)

    @cached_property
    def pmf(self) -> np.ndarray:
        """``pmf[k] = P(Y = k)`` for ``k = 0..rho``."""
        out = np.zeros(self.rho + 1)
        out[list(self.support)] = self.probs
        return out

    def moment(self, k: float) -> float:
        return math.fsum(p * y**k for y, p in zip(self.support, self.probs))

    def divided(self) -> "RenewalLaw":
        h = self.h
        return RenewalLaw(tuple(k // h for k in self.support), self.probs)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.choice(np.asarray(self.support, dtype=np.int64), size=size, p=np.asarray(self.probs))


def period_h(law: RenewalLaw) -> int:
    return law.h


def _check_lattice(law: RenewalLaw, *xs):
    for x in xs:
        if x < 0 or x % law.h:
            raise RenewalError(f"{x} is not in h N with h = {law.h}")


# ---------------------------------------------------------------------------
# sampling


def sample_L(law: RenewalLaw, i: int, j: int, rng: np.random.Generator, size: int | None = None,
             horizon: int = HORIZON):
    """Sample ``L_{i,j}``; vectorised over ``size`` replicates."""
    _check_lattice(law, i, j)
    n = 1 if size is None else size
    a = np.full(n, i, dtype=np.int64)
    b = np.full(n, j, dtype=np.int64)
    # the common level must be >= 1, so a process sitting at 0 moves first
    for arr in (a, b):
        z = arr == 0
        arr[z] += law.sample(rng, int(z.sum()))
    while True:
        lo_a = a < b
        lo_b = b < a
        if not (lo_a.any() or lo_b.any()):
            break
        a[lo_a] += law.sample(rng, int(lo_a.sum()))
        b[lo_b] += law.sample(rng, int(lo_b.sum()))
        if a.max() > horizon or b.max() > horizon:
            raise HorizonExceeded(f"no common point below {horizon}")
    return int(a[0]) if size is None else a


def forward_recurrence(law: RenewalLaw, x: int, rng: np.random.Generator, size: int | None = None):
    """Overshoot ``B^0_x`` of the pure renewal process over level ``x``."""
    n = 1 if size is None else size
    s = np.zeros(n, dtype=np.int64)
    while True:
        below = s < x
        if not below.any():
            break
        s[below] += law.sample(rng, int(below.sum()))
    out = s - x
    return int(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# exact distributions


def renewal_function(law: RenewalLaw, n: int) -> np.ndarray:
    """``u[k] = P(k in {S_m})`` for ``k = 0..n``."""
    pmf = law.pmf
    u = np.zeros(n + 1)
    u[0] = 1.0
    for k in range(1, n + 1):
        m = min(k, law.rho)
        u[k] = pmf[1:m + 1] @ u[k - 1::-1][:m]
    return u


def overshoot_pmf(law: RenewalLaw, x: int) -> np.ndarray:
    """``q(x, y) = P(B^0_x = y)`` for ``y = 0..rho-1`` (absorbing at ``x = 0``)."""
    out = np.zeros(law.rho)
    if x == 0:
        out[0] = 1.0
        return out
    u = renewal_function(law, x)
    pmf = law.pmf
    # last renewal strictly below x sits at x - i, next jump is i + y
    for i in range(1, min(x, law.rho) + 1):
        for y in range(0, law.rho - i + 1):
            out[y] += u[x - i] * pmf[i + y]
    return out


def _zeta_moments(law: RenewalLaw, kmax: int) -> np.ndarray:
    """``M[k, x] = E_x[(zeta_1 + zeta_2 + ...)^k]`` for transient ``x < rho``."""
    R = law.rho
    Q = np.array([overshoot_pmf(law, x) for x in range(R)])  # rows x = 0..R-1
    y = np.arange(R, dtype=float)
    M = np.zeros((kmax + 1, R))
    M[0] = 1.0
    if R == 1:
        return M
    T = Q[1:, 1:]
    A = np.eye(R - 1) - T
    for k in range(1, kmax + 1):
        rhs = np.zeros(R)
        for l in range(k):
            rhs += math.comb(k, l) * (Q * (y ** (k - l) * M[l])[None, :]).sum(axis=1)
        M[k, 1:] = np.linalg.solve(A, rhs[1:])
    M[1:, 0] = 0.0
    return M


def _moment_from_zeta(law: RenewalLaw, j: int, p: int, M: np.ndarray) -> float:
    """``E(L_{0,j}^p)`` for ``j >= 1`` on an aperiodic law."""
    q = overshoot_pmf(law, j)
    y = np.arange(law.rho, dtype=float)
    # E T_j^l with T_j = zeta_1 + T_{zeta_1}
    ET = np.zeros(p + 1)
    for l in range(p + 1):
        ET[l] = sum(math.comb(l, m) * float(q @ (y ** (l - m) * M[m])) for m in range(l + 1))
    return math.fsum(math.comb(p, l) * j ** (p - l) * ET[l] for l in range(p + 1))


def _recurrence_step(f: np.ndarray, pmf: np.ndarray, axis: int) -> np.ndarray:
    """One forward-recurrence step applied along ``axis`` of a joint mass array."""
    f = np.moveaxis(f, axis, 0)
    g = np.zeros_like(f)
    g[:-1] = f[1:]
    # from 0 the next renewal is Y away: state Y - 1
    k = np.arange(1, pmf.shape[0])
    g[k - 1] += pmf[1:, None] * f[0][None, :]
    return np.moveaxis(g, 0, axis)


def L_pmf(law: RenewalLaw, i: int, j: int, tol: float = PMF_TOL, horizon: int = HORIZON) -> np.ndarray:
    """Exact ``P(L_{i,j} = l)`` as the first return of the joint chain to ``(0, 0)``.

    The state space is widened past ``rho`` when a delay exceeds it, where the
    chain just counts down.  Propagation stops once the unreturned mass is
    below ``tol``.
    """
    _check_lattice(law, i, j)
    if law.h > 1:
        pm = L_pmf(law.divided(), i // law.h, j // law.h, tol, horizon // law.h)
        out = np.zeros(law.h * (pm.shape[0] - 1) + 1)
        out[:: law.h] = pm
        return out
    size = max(law.rho, i + 1, j + 1)
    pmf = np.zeros(size + 1)
    pmf[: law.rho + 1] = law.pmf
    f = np.zeros((size, size))
    f[i, j] = 1.0
    out = [0.0]
    alive = 1.0
    for _ in range(horizon):
        f = _recurrence_step(_recurrence_step(f, pmf, 0), pmf, 1)
        hit = f[0, 0]
        f[0, 0] = 0.0
        out.append(hit)
        alive = f.sum()
        if alive < tol:
            break
    else:
        raise HorizonExceeded(f"mass {alive:g} left after {horizon} steps")
    return np.asarray(out)


def _apply_p(g: np.ndarray, pmf: np.ndarray, axis: int) -> np.ndarray:
    """Transition operator of the forward-recurrence chain acting on functions."""
    g = np.moveaxis(g, axis, 0)
    out = np.empty_like(g)
    out[1:] = g[:-1]
    k = np.arange(1, pmf.shape[0])
    out[0] = pmf[1:] @ g[k - 1]
    return np.moveaxis(out, 0, axis)


def L_moments_dp(law: RenewalLaw, j_max: int, kmax: int = 3, tol: float = PMF_TOL,
                 horizon: int = HORIZON) -> np.ndarray:
    """``E(L_{0,j}^k)`` for all ``j <= j_max`` and ``k <= kmax`` in one backward pass.

    ``H_n(x, y) = P_{(x,y)}(T_{(0,0)} = n)`` for the joint forward-recurrence
    chain obeys ``H_n = P (H_{n-1} 1{!= (0,0)})``, so the first-return laws
    from every starting state come out of a single recursion.  The pass stops
    once every starting state has less than ``tol`` unreturned mass.
    """
    if law.h > 1:
        base = L_moments_dp(law.divided(), j_max // law.h, kmax, tol, horizon)
        out = np.full((kmax + 1, j_max + 1), np.nan)
        out[:, :: law.h] = base * (law.h ** np.arange(kmax + 1))[:, None]
        return out
    R = law.rho
    ny = max(R, j_max + 1)
    pmf = law.pmf
    target = np.zeros((R, ny))
    target[0, 0] = 1.0
    H = _apply_p(_apply_p(target, pmf, 0), pmf, 1)
    mom = np.zeros((kmax + 1, R, ny))
    # P(T > n) from each start, by the same recursion (no cancellation)
    alive = np.ones((R, ny))
    alive[0, 0] = 0.0
    alive = _apply_p(_apply_p(alive, pmf, 0), pmf, 1)
    for n in range(1, horizon + 1):
        mom += (float(n) ** np.arange(kmax + 1))[:, None, None] * H[None]
        if alive.max() < tol:
            break
        G = H.copy()
        G[0, 0] = 0.0
        H = _apply_p(_apply_p(G, pmf, 0), pmf, 1)
        alive[0, 0] = 0.0
        alive = _apply_p(_apply_p(alive, pmf, 0), pmf, 1)
    else:
        raise HorizonExceeded(f"mass {alive.max():g} left after {horizon} steps")
    return mom[:, 0, : j_max + 1]


@dataclass(frozen=True)
class MomentResult:
    i: int
    j: int
    p: float
    value: float
    std_err: float
    method: str


def exact_moment_L(law: RenewalLaw, i: int, j: int, p: float, method: str = "auto",
                   replicates: int = 100_000, seed: int = 0) -> MomentResult:
    """``E(L_{i,j}^p)``.

    ``method`` is ``"linear"`` (zeta-chain linear systems, integer ``p``),
    ``"dp"`` (exact pmf), ``"mc"`` or ``"auto"`` (linear when possible,
    otherwise dp).
    """
    _check_lattice(law, i, j)
    if method == "auto":
        method = "linear" if float(p).is_integer() else "dp"
    if method == "mc":
        rng = np.random.default_rng(seed)
        s = sample_L(law, i, j, rng, replicates).astype(float) ** p
        return MomentResult(i, j, p, float(s.mean()), float(s.std(ddof=1) / math.sqrt(replicates)), "mc")
    if method == "dp":
        if i == 0 or j == 0:
            m = L_moments_dp(law, max(i, j), int(p)) if float(p).is_integer() and p <= 6 else None
            if m is not None:
                return MomentResult(i, j, p, float(m[int(p), max(i, j)]), 0.0, "dp")
        pm = L_pmf(law, i, j)
        l = np.arange(pm.shape[0], dtype=float)
        return MomentResult(i, j, p, float(pm @ l**p), 0.0, "dp")
    if method != "linear":
        raise ValueError(f"unknown method {method!r}")
    if not float(p).is_integer():
        raise ValueError("the linear-system route needs an integer p")
    p = int(p)
    h = law.h
    base = law.divided() if h > 1 else law
    a, b = sorted((i // h, j // h))
    M = _zeta_moments(base, p)
    if a == b and a > 0:
        val = float(a) ** p
    elif a == 0 and b == 0:
        # condition on the first inter-arrival of one process
        val = math.fsum(pr * _moment_from_zeta(base, y, p, M) for y, pr in zip(base.support, base.probs))
    else:
        # L_{a,b} = a + L_{0,b-a}
        d = b - a
        moms = [_moment_from_zeta(base, d, k, M) for k in range(p + 1)]
        val = math.fsum(math.comb(p, k) * a ** (p - k) * moms[k] for k in range(p + 1))
    return MomentResult(i, j, p, val * h**p, 0.0, "linear")


# ---------------------------------------------------------------------------
# verification helpers


def _ols(x, y, w=None):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(x) if w is None else np.asarray(w, float)
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    resid = y - ym - slope * (x - xm)
    dof = max(x.size - 2, 1)
    se = math.sqrt(np.sum(w * resid**2) / dof / sxx)
    return float(slope), float(se)


def verify_moment_bound(law: RenewalLaw, p: float, j_grid, method: str = "auto", n_se: float = 4.0) -> dict:
    """Ratios ``E(L_{0,j}^p) / (1 + j^p)`` over ``j_grid`` and their log-log trend.

    The trend is the OLS slope of log-ratio on log-j with its OLS standard
    error; it passes when the slope is at most ``n_se`` standard errors above
    zero.  ``C_hat`` is the largest ratio seen.
    """
    j_grid = np.asarray(sorted(j_grid), dtype=int)
    if method == "dp" and float(p).is_integer():
        vals = L_moments_dp(law, int(j_grid[-1]), int(p))[int(p), j_grid]
    else:
        vals = np.array([exact_moment_L(law, 0, int(j), p, method).value for j in j_grid])
    ratio = vals / (1.0 + j_grid.astype(float) ** p)
    slope, se = _ols(np.log(j_grid), np.log(ratio))
    return {"j": j_grid.tolist(), "moment": vals.tolist(), "ratio": ratio.tolist(), "C_hat": float(ratio.max()),
            "slope": slope, "slope_se": se, "method": method, "pass": bool(slope <= n_se * se)}


def zeta_moment_check(law: RenewalLaw, p: float, x_grid) -> dict:
    """Exact ``E_x(zeta_1^p) / E(Y^{p+1})`` over ``x_grid``."""
    y = np.arange(law.rho, dtype=float)
    ey = law.moment(p + 1)
    ratios = [float(overshoot_pmf(law, int(x)) @ y**p) / ey for x in x_grid]
    return {"x": [int(x) for x in x_grid], "ratio": ratios, "max": max(ratios)}


def nu0_tail(law: RenewalLaw, x: int, n_grid, replicates: int = 100_000, seed: int = 0, min_count: int = 5) -> dict:
    """Empirical ``P_x(nu_0 > n)`` for the zeta chain, exact tail, and log-linear fit.

    The fit uses grid points with at least ``min_count`` surviving chains,
    weighted by their counts (binomial variance of the log).
    """
    if x < 1:
        raise ValueError("x must be >= 1")
    rng = np.random.default_rng(seed)
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    state = np.full(replicates, x, dtype=np.int64)
    nu = np.zeros(replicates, dtype=np.int64)
    alive = np.ones(replicates, dtype=bool)
    step = 0
    while alive.any() and step < n_grid[-1] + 1:
        step += 1
        idx = np.flatnonzero(alive)
        current = state[idx]
        # one zeta step: overshoot over the current state
        for s in np.unique(current):
            sel = idx[current == s]
            state[sel] = forward_recurrence(law, int(s), rng, sel.size)
        nu[idx] = step
        alive &= state != 0
    nu[alive] = n_grid[-1] + 1
    emp = np.array([(nu > n).mean() for n in n_grid])
    counts = np.array([(nu > n).sum() for n in n_grid])
    # exact: sub-stochastic powers of Q restricted to transient states
    Q = np.array([overshoot_pmf(law, s) for s in range(law.rho)])[1:, 1:] if law.rho > 1 else np.zeros((0, 0))
    first = overshoot_pmf(law, x)[1:]
    exact = []
    v = first.copy()
    for n in range(0, n_grid[-1] + 1):
        if n == 0:
            exact.append(1.0)
            continue
        exact.append(float(v.sum()))
        v = v @ Q if Q.size else v * 0.0
    exact = np.asarray(exact)[n_grid]
    use = counts >= min_count
    if use.sum() >= 2:
        slope, se = _ols(n_grid[use], np.log(emp[use]), counts[use])
    else:
        slope, se = -math.inf, 0.0
    return {"n": n_grid.tolist(), "empirical": emp.tolist(), "exact": exact.tolist(), "count": counts.tolist(),
            "slope": slope, "slope_se": se, "pass": bool(slope + 4 * se < 0)}


def write_csv(path, rows, key: str) -> None:
    """``rows``: iterables of (key value, estimate, std_err, method)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow([key, "estimate", "std_err", "method"])
        for r in rows:
            w.writerow(list(r))
