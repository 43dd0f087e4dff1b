"""Exact computations in a fixed (quenched) environment.

One-dimensional environments are handled through a *site table*
``probs[x, r] = pi_{x, x+r}`` over a finite window of sites, built with
vectorised hashing; the hot propagation loop is a kernel.  Higher dimensions
fall back to a sparse dictionary propagation, which is only meant for short
horizons.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._accel import jit
from .env import Environment, EnvironmentLaw, dot, vec

PRUNE = 1e-15
MAX_SUPPORT = 2_000_000


class SupportOverflow(RuntimeError):
    pass


class CorrectorError(RuntimeError):
    pass


@dataclass(frozen=True)
class SiteMassFunction:
    entries: dict
    leak: float

    @property
    def total(self) -> float:
        return math.fsum(self.entries.values())

    def mean(self) -> np.ndarray:
        xs = np.array(list(self.entries.keys()), dtype=float)
        ps = np.array(list(self.entries.values()))
        return ps @ xs


@dataclass(frozen=True)
class CorrectorTable:
    a: np.ndarray
    g: np.ndarray
    delta_value: float
    truncation_index: int
    tail_bound: float


# ---------------------------------------------------------------------------
# one-dimensional site tables


def _require_1d(law: EnvironmentLaw):
    if law.dim != 1:
        raise ValueError("operation defined for d = 1 only")
    if law.u_hat[0] <= 0:
        raise ValueError("one-dimensional walks use u_hat = +1")


def atom_rows(law: EnvironmentLaw) -> np.ndarray:
    """``rows[a, r] = pi_{0r}`` for atom ``a``, ``r = 0..R``."""
    _require_1d(law)
    R = law.max_jump
    rows = np.zeros((len(law.site_law), R + 1))
    for a, jd in enumerate(law.site_law.jds):
        for z, p in jd.atoms:
            rows[a, z[0]] = p
    return rows


def site_table(env: Environment, lo: int, hi: int) -> np.ndarray:
    """Jump table for sites ``lo..hi-1`` (row ``x - lo``)."""
    rows = atom_rows(env.law)
    atoms = env.site_atoms(np.arange(lo, hi, dtype=np.int64)[:, None])
    return rows[atoms]


@jit(nogil=True)
def propagate_1d(probs, start, n_steps, prune):
    """Exact law of X_n for a 1d monotone walk on a site table.

    ``probs`` covers sites ``0..len-1``; the walk starts at ``start`` and must
    stay inside.  Returns (mass, lo, leak, means, second_moments); ``mass`` is
    the window of retained mass starting at site ``lo``.
    """
    R = probs.shape[1] - 1
    size = probs.shape[0]
    cur = np.zeros(size)
    nxt = np.zeros(size)
    cur[start] = 1.0
    lo = start
    hi = start + 1
    leak = 0.0
    means = np.zeros(n_steps + 1)
    m2 = np.zeros(n_steps + 1)
    means[0] = start
    m2[0] = start * start
    for n in range(n_steps):
        new_hi = min(hi + R, size)
        for x in range(lo, new_hi):
            nxt[x] = 0.0
        for x in range(lo, hi):
            px = cur[x]
            if px == 0.0:
                continue
            for r in range(R + 1):
                q = probs[x, r]
                if q > 0.0:
                    nxt[x + r] += px * q
        s1 = 0.0
        s2 = 0.0
        new_lo = new_hi
        last = lo
        for x in range(lo, new_hi):
            v = nxt[x]
            if v != 0.0 and v < prune:
                leak += v
                nxt[x] = 0.0
                v = 0.0
            if v != 0.0:
                if x < new_lo:
                    new_lo = x
                last = x
            s1 += v * x
            s2 += v * x * x
        for x in range(lo, new_hi):
            cur[x] = nxt[x]
        lo = new_lo
        hi = last + 1
        means[n + 1] = s1
        m2[n + 1] = s2
    return cur[lo:hi].copy(), lo, leak, means, m2


@dataclass(frozen=True)
class Propagation1D:
    """Law of X_n plus the whole trajectory of first/second moments."""

    mass: np.ndarray
    lo: int
    leak: float
    means: np.ndarray  # E^omega X_m, m = 0..n
    second: np.ndarray  # E^omega X_m^2

    @property
    def variances(self) -> np.ndarray:
        return self.second - self.means**2


def propagate(env: Environment, x0: int, n: int, prune: float = PRUNE) -> Propagation1D:
    _require_1d(env.law)
    R = env.law.max_jump
    x0 = int(x0)
    probs = site_table(env, x0, x0 + n * R + 1)
    mass, lo, leak, means, m2 = propagate_1d(probs, 0, int(n), float(prune))
    # shift back from table coordinates
    means = means + x0
    m2 = m2 + 2 * x0 * (means - x0) + x0 * x0
    return Propagation1D(mass, int(lo) + x0, float(leak), means, m2)


def _forward_sparse(env: Environment, x0, n: int, prune: float) -> SiteMassFunction:
    cur = {vec(x0): 1.0}
    leak = 0.0
    cache = {}
    for _ in range(n):
        nxt: dict = {}
        for x, px in cur.items():
            jd = cache.get(x)
            if jd is None:
                jd = cache[x] = env.site_env(x)
            for z, p in jd.atoms:
                y = tuple(a + b for a, b in zip(x, z))
                nxt[y] = nxt.get(y, 0.0) + px * p
        cur = {}
        for y, p in nxt.items():
            if p < prune:
                leak += p
            else:
                cur[y] = p
        if len(cur) > MAX_SUPPORT:
            raise SupportOverflow(f"support exceeds {MAX_SUPPORT}; raise the pruning threshold")
    return SiteMassFunction(cur, leak)


def forward_law(env: Environment, x0, n: int, prune: float = PRUNE) -> SiteMassFunction:
    """Exact distribution of X_n under the quenched law, pruned below ``prune``."""
    if env.law.dim == 1:
        pr = propagate(env, vec(x0)[0], n, prune)
        entries = {(pr.lo + i,): float(p) for i, p in enumerate(pr.mass) if p > 0}
        return SiteMassFunction(entries, pr.leak)
    return _forward_sparse(env, x0, n, prune)


def quenched_mean(env: Environment, x0, n: int) -> np.ndarray:
    if env.law.dim == 1:
        return np.array([propagate(env, vec(x0)[0], n).means[-1]])
    return forward_law(env, x0, n).mean()


# ---------------------------------------------------------------------------
# hitting probabilities and the corrector (d = 1)


def visit_probs(table: np.ndarray, start: int, n_targets: int) -> np.ndarray:
    """``f[t] = P_start(V_{start+t})`` for ``t < n_targets`` on a site table.

    Holding is eliminated analytically: from site ``s`` the next distinct site
    is ``s + r`` with probability ``pi_{s,s+r} / (1 - pi_ss)``.
    """
    R = table.shape[1] - 1
    f = np.zeros(n_targets)
    if n_targets == 0:
        return f
    f[0] = 1.0
    for t in range(1, n_targets):
        acc = 0.0
        for r in range(1, min(R, t) + 1):
            s = start + t - r
            acc += f[t - r] * table[s, r] / (1.0 - table[s, 0])
        f[t] = acc
    return f


def hitting_prob_1d(env: Environment, x: int, i: int) -> float:
    """``P_x(V_i)``: the walk from ``x`` ever visits ``i``."""
    if i < x:
        raise ValueError("need x <= i")
    if i == x:
        return 1.0
    table = site_table(env, x, i + 1)
    # backward recursion from the target
    R = table.shape[1] - 1
    h = np.zeros(i - x + 1 + R)
    h[i - x] = 1.0
    for k in range(i - x - 1, -1, -1):
        row = table[k]
        h[k] = sum(row[r] * h[k + r] for r in range(1, R + 1)) / (1.0 - row[0])
    return float(h[0])


def velocity_1d(law: EnvironmentLaw) -> float:
    """Exact ``v = E[D/(1-pi_00)] / E[1/(1-pi_00)]`` for a finite 1d mixture."""
    _require_1d(law)
    num = law.expect(lambda jd: jd.drift()[0] / (1.0 - jd.hold))
    den = law.expect(lambda jd: 1.0 / (1.0 - jd.hold))
    return num / den


def meeting_contraction(law: EnvironmentLaw, max_tuples: int = 200_000) -> float:
    """Worst-case probability that a walker skips a site ``d < R`` ahead.

    Maximum over gaps ``d = 1..R-1`` and over every assignment of atoms to the
    ``d`` sites in between; 0 for nearest-neighbour laws.
    """
    _require_1d(law)
    R = law.max_jump
    rows = atom_rows(law)
    A = rows.shape[0]
    worst = 0.0
    for d in range(1, R):
        if A**d > max_tuples:
            raise CorrectorError("too many atom tuples to certify the corrector tail")
        for combo in itertools.product(range(A), repeat=d):
            table = np.vstack([rows[a] for a in combo] + [rows[0]])
            worst = max(worst, 1.0 - visit_probs(table, 0, d + 1)[d])
    return worst


def _tail_envelope(law: EnvironmentLaw, rho: float, index: int) -> float:
    """Bound on ``sum_{i > index} |a_i g_i|``."""
    R = law.max_jump
    if R <= 1:
        return 0.0
    if rho >= 1.0:
        return math.inf
    v = velocity_1d(law)
    w = max(1.0 / (1.0 - jd.hold) for _, jd in law.site_law.atoms)
    gmax = max(abs(jd.drift()[0] - v) for _, jd in law.site_law.atoms)
    k0 = index // (R - 1) + 1
    return w * gmax * (R - 1) * rho**k0 / (1.0 - rho)


def corrector(env: Environment, tol: float = 1e-12, v: float | None = None, site: int = 0,
              index_cap: int = 100_000, rho: float | None = None) -> CorrectorTable:
    """``Delta(T_site omega) = sum_i a_i g_i`` truncated with a certified tail.

    The tail bound uses ``|a_i| <= P_{0,1}(L > i) / (1 - pi_ii)`` together
    with the worst-case per-overtake skip probability from
    :func:`meeting_contraction`.
    """
    law = env.law
    _require_1d(law)
    v = velocity_1d(law) if v is None else v
    rho = meeting_contraction(law) if rho is None else rho
    index = 0
    while _tail_envelope(law, rho, index) >= tol:
        index = 2 * index + 1
        if index > index_cap:
            raise CorrectorError(
                f"tail bound {_tail_envelope(law, rho, index_cap):.3g} still above tol at index {index_cap}")
    n = index + 1
    table = site_table(env, site, site + n + 1)
    f0 = visit_probs(table, 0, n)
    f1 = np.zeros(n)
    f1[1:] = visit_probs(table, 1, n - 1)
    hold = table[:n, 0]
    a = (f0 - f1) / (1.0 - hold)
    R = table.shape[1] - 1
    drift = table[:n] @ np.arange(R + 1)
    g = drift - v
    return CorrectorTable(a, g, math.fsum(a * g), index, _tail_envelope(law, rho, index))


def chi(env: Environment, x: int, tol: float = 1e-12, v: float | None = None) -> float:
    """``chi(x) = sum_{y<x} Delta(T_y omega)``; ``chi(0) = 0``."""
    if x < 0:
        raise ValueError("chi is defined for x >= 0")
    rho = meeting_contraction(env.law)
    return math.fsum(corrector(env, tol, v, site=y, rho=rho).delta_value for y in range(x))


def chi_with_bound(env: Environment, x: int, tol: float = 1e-12, v: float | None = None):
    rho = meeting_contraction(env.law)
    tabs = [corrector(env, tol, v, site=y, rho=rho) for y in range(x)]
    return math.fsum(t.delta_value for t in tabs), math.fsum(t.tail_bound for t in tabs)


def martingale_residual(env: Environment, tol: float = 1e-12, v: float | None = None):
    """``(E^omega[chi(X_1)] - g(omega), certified bound on truncation error)``."""
    law = env.law
    v = velocity_1d(law) if v is None else v
    jd = env.site_env((0,))
    total, bound = 0.0, 0.0
    for z, p in jd.atoms:
        c, b = chi_with_bound(env, z[0], tol, v)
        total += p * c
        bound += p * b
    g = jd.drift()[0] - v
    return total - g, bound


def corrector_identity_residuals(env: Environment, i_max: int) -> np.ndarray:
    """``sum_{j<=i} a_j(T_{i-j} omega) P(X_1 > i-j)`` for ``i = 1..i_max``.

    Each entry should vanish; checked numerically rather than assumed.
    """
    table = site_table(env, 0, 2 * i_max + 2)
    R = table.shape[1] - 1
    tail = np.array([table[0, r + 1:].sum() for r in range(R + 1)] + [0.0] * (i_max + 1))
    out = np.zeros(i_max)
    for i in range(1, i_max + 1):
        acc = 0.0
        for j in range(i + 1):
            s = i - j
            f_s = visit_probs(table, s, j + 1)[j]
            f_s1 = visit_probs(table, s + 1, j)[j - 1] if j >= 1 else 0.0
            acc += (f_s - f_s1) / (1.0 - table[i, 0]) * tail[s]
        out[i - 1] = acc
    return out


# ---------------------------------------------------------------------------
# exponential bound


def lambda0(law: EnvironmentLaw, p: float = 2.0) -> float:
    """Largest ``lambda`` with ``M^p lambda^p <= lambda delta / 2``.

    ``M`` is scaled by ``max|u_hat_c|`` so that ``|z . u_hat| <= M``;
    ``p`` must lie in ``(1, 2]`` for ``exp(-t) <= 1 - t + t^p`` to hold.
    """
    if not 1.0 < p <= 2.0:
        raise ValueError("lambda0 needs 1 < p <= 2")
    M = law.moment_M(p) * max(abs(c) for c in law.u_hat)
    return (law.delta / (2.0 * M**p)) ** (1.0 / (p - 1.0))


def exp_bound_check(env: Environment, x, n: int, lam: float, p: float = 2.0):
    """Exact ``E_x(exp(-lam X_n.u))`` against ``exp(-lam x.u) (1 - lam delta/2)^n``."""
    law = env.law
    lam0 = lambda0(law, p)
    if not 0.0 <= lam <= lam0 * (1 + 1e-12):
        raise ValueError(f"lambda must lie in [0, {lam0}]")
    x = vec(x)
    fl = forward_law(env, x, n)
    lhs = math.fsum(q * math.exp(-lam * dot(y, law.u_hat)) for y, q in fl.entries.items())
    start = math.exp(-lam * dot(x, law.u_hat))
    lhs += fl.leak * start  # pruned mass at its largest possible weight
    rhs = start * (1.0 - lam * law.delta / 2.0) ** n
    return lhs, rhs
