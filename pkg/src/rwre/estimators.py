"""Limit quantities by closed form, by exact recursion and by Monte Carlo.

Closed-form / exact paths exist for finite one-dimensional mixtures (velocity,
diffusion coefficient, quenched-mean and quenched-walk variances) and for
restricted-path laws in any dimension.  Monte Carlo paths work from
regeneration blocks and exact quenched means, with jackknife or delta-method
standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import _rng
from . import kernels as K
from .env import EnvironmentLaw, Environment, WindowEvent, check_hypothesis_E, dot, make_law, vec
from .exactq import atom_rows, propagate, velocity_1d
from .walk import BlockSet, _packed_args, replicate_keys, two_walker_common_points


class NotRestrictedPath(ValueError):
    pass


def _blocks_arrays(blocks):
    if isinstance(blocks, BlockSet):
        return blocks.duration.astype(float), blocks.displacement.astype(float)
    dur, disp = blocks
    disp = np.asarray(disp, dtype=float)
    if disp.ndim == 1:
        disp = disp[:, None]
    return np.asarray(dur, dtype=float), disp


def jackknife(stat, arrays, n_groups: int = 100):
    """Grouped (delete-one-group) jackknife of ``stat(*arrays)``.

    Rows are split into ``n_groups`` contiguous groups.  Returns the full
    estimate, its standard error (same shape) and the leave-one-out values.
    """
    n = arrays[0].shape[0]
    g = max(2, min(n_groups, n))
    edges = np.linspace(0, n, g + 1).astype(int)
    full = np.asarray(stat(*arrays), dtype=float)
    loo = []
    mask = np.ones(n, dtype=bool)
    for k in range(g):
        mask[:] = True
        mask[edges[k]:edges[k + 1]] = False
        loo.append(stat(*(a[mask] for a in arrays)))
    loo = np.asarray(loo, dtype=float)
    se = np.sqrt((g - 1) / g * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return full, se, loo


# ---------------------------------------------------------------------------
# velocity and annealed diffusion matrix


@dataclass(frozen=True)
class Estimate:
    value: np.ndarray | float
    std_err: np.ndarray | float
    n_samples: int
    method: str = "mc"
    extra: dict = field(default_factory=dict)


def velocity(blocks) -> Estimate:
    """``E[X_sigma1] / E[sigma1]`` over i.i.d. blocks, delta-method error."""
    dur, disp = _blocks_arrays(blocks)
    n = dur.shape[0]
    if n < 2:
        raise ValueError("need at least two blocks")
    mt = dur.mean()
    v = disp.mean(axis=0) / mt
    resid = disp - np.outer(dur, v)
    se = resid.std(axis=0, ddof=1) / (math.sqrt(n) * mt)
    return Estimate(v, se, n, "regeneration")


@dataclass(frozen=True)
class DiffusionReport:
    v_hat: np.ndarray
    D_hat: np.ndarray
    std_err: np.ndarray
    n_blocks: int
    v_exact: bool
    jack: np.ndarray  # leave-one-group-out D values, (G, d, d)

    def quad_form(self, u) -> tuple:
        u = np.asarray(u, dtype=float)
        vals = np.einsum("i,gij,j->g", u, self.jack, u)
        g = vals.shape[0]
        se = math.sqrt((g - 1) / g * ((vals - vals.mean()) ** 2).sum())
        return float(u @ self.D_hat @ u), se

    def to_json(self) -> dict:
        return {
            "quantity": "annealed_diffusion",
            "method": "regeneration-blocks",
            "value": {"v": self.v_hat.tolist(), "D": self.D_hat.tolist()},
            "std_err": self.std_err.tolist(),
            "n_samples": self.n_blocks,
            "truncation": {},
            "v_exact": self.v_exact,
        }


def annealed_diffusion(blocks, v=None, n_groups: int = 100) -> DiffusionReport:
    """``E[(X - v T)(X - v T)^t] / E[T]`` over blocks with jackknife errors.

    With ``v=None`` the velocity is re-estimated inside every jackknife
    replicate.
    """
    dur, disp = _blocks_arrays(blocks)
    v_exact = v is not None
    v_fixed = None if v is None else np.atleast_1d(np.asarray(v, dtype=float))

    def stat(t, x):
        vv = x.mean(axis=0) / t.mean() if v_fixed is None else v_fixed
        e = x - np.outer(t, vv)
        m = e.T @ e / t.shape[0] / t.mean()
        return 0.5 * (m + m.T)

    D, se, loo = jackknife(stat, (dur, disp), n_groups)
    v_hat = v_fixed if v_exact else disp.mean(axis=0) / dur.mean()
    return DiffusionReport(v_hat, D, se, dur.shape[0], v_exact, loo)


# ---------------------------------------------------------------------------
# exact rational linear algebra for degeneracy


def _rref(rows):
    m = [list(map(Fraction, r)) for r in rows]
    pivots = []
    r = 0
    ncol = len(m[0]) if m else 0
    for c in range(ncol):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        m[r] = [x / m[r][c] for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m[:r], pivots


@dataclass(frozen=True)
class Subspace:
    rank: int
    span: list  # basis vectors (Fractions)
    complement: list  # basis of the orthogonal complement

    def complement_unit(self) -> list:
        out = []
        for u in self.complement:
            a = np.array([float(c) for c in u])
            out.append(a / np.linalg.norm(a))
        return out


def degeneracy_subspace(law: EnvironmentLaw) -> Subspace:
    """Span of ``{x - y : E pi_0x E pi_0y > 0}`` and its orthogonal complement."""
    J = sorted(law.J)
    d = law.dim
    diffs = [tuple(a - b for a, b in zip(x, y)) for x in J for y in J if x != y]
    if not diffs:
        basis, piv = [], []
    else:
        basis, piv = _rref(diffs)
    # nullspace of the span basis = orthogonal complement
    free = [c for c in range(d) if c not in piv]
    comp = []
    for f in free:
        u = [Fraction(0)] * d
        u[f] = Fraction(1)
        for row, p in zip(basis, piv):
            u[p] = -row[f]
        comp.append(u)
    return Subspace(len(basis), basis, comp)


def verify_degeneracy(report: DiffusionReport, subspace: Subspace, n_se: float = 4.0) -> dict:
    rows = []
    for u in subspace.complement_unit():
        q, se = report.quad_form(u)
        rows.append({"u": u.tolist(), "quad_form": q, "std_err": se, "pass": abs(q) <= n_se * se + 1e-15})
    worst = max((abs(r["quad_form"]) for r in rows), default=0.0)
    return {"directions": rows, "max_abs": worst, "pass": all(r["pass"] for r in rows)}


# ---------------------------------------------------------------------------
# one-dimensional coefficients


@dataclass(frozen=True)
class OneDimCoefficients:
    kappa_m_sq: float
    kappa_q_sq: float
    D_total: float
    v: float
    method: dict
    truncation: dict = field(default_factory=dict)
    std_err: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "quantity": "kappa_coefficients",
            "method": self.method,
            "value": {"kappa_m_sq": self.kappa_m_sq, "kappa_q_sq": self.kappa_q_sq,
                      "D": self.D_total, "v": self.v},
            "std_err": self.std_err,
            "n_samples": 0,
            "truncation": self.truncation,
        }


def _mixture_1d(law: EnvironmentLaw):
    rows = atom_rows(law)
    w = law.site_law.weights
    hold = rows[:, 0]
    w0 = 1.0 / (1.0 - hold)
    R = rows.shape[1] - 1
    z = np.arange(R + 1)
    drift = rows @ z
    return rows, w, hold, w0, drift, R


def diffusion_1d(law: EnvironmentLaw, v: float | None = None) -> float:
    """Exact ``E_0[(X_sigma1 - v sigma1)^2] / E_0[sigma1]`` for a finite 1d mixture."""
    rows, w, hold, w0, drift, R = _mixture_1d(law)
    v = velocity_1d(law) if v is None else v
    z = np.arange(R + 1)
    ratio = rows.copy()
    ratio[:, 0] = 0.0
    ratio = ratio * w0[:, None]
    ex = ratio @ z
    ex2 = ratio @ z**2
    es = w0
    es2 = (1.0 + hold) * w0**2
    per = ex2 - 2 * v * ex * es + v * v * es2
    return float(math.fsum(w * per) / math.fsum(w * w0))


def _window_step(S, A_list, w):
    out = np.zeros_like(S)
    for a, A in enumerate(A_list):
        out += w[a] * (A @ S @ A.T)
    return out


def _jump_gcd(law: EnvironmentLaw) -> int:
    return math.gcd(*(int(z[0]) for _, jd in law.site_law.atoms for z, p in jd.atoms if p > 0 and z[0] != 0))


def _rescaled(law: EnvironmentLaw, step: int) -> EnvironmentLaw:
    atoms = [(wt, {(z[0] // step,): p for z, p in jd.atoms}) for wt, jd in law.site_law.atoms]
    return make_law(atoms, law.u_hat, check=law.check)


def kappa_coeffs_formula(law: EnvironmentLaw, tol: float = 1e-18, max_terms: int = 100_000) -> OneDimCoefficients:
    """Exact quenched-mean and quenched-walk variances for a finite 1d mixture.

    Both series reduce to second moments of windows of hitting probabilities
    ``(h_k, ..., h_{k+R})``, ``h_k = P_k(V_target)``.  Going one site back is
    a random linear map depending only on that site, so the second-moment
    matrix follows an exact backward recursion and every term of both series
    is a finite sum over the atoms.  The series stop once a term falls below
    ``tol`` and the geometric tail estimated from recent term ratios does too.
    """
    if law.dim != 1:
        raise ValueError("kappa coefficients are one-dimensional")
    step = _jump_gcd(law)
    if step > 1:
        # the walk lives on step * Z, where the environment is again i.i.d.
        c = kappa_coeffs_formula(_rescaled(law, step), tol / step**2, max_terms)
        s2 = step * step
        return replace(c, kappa_m_sq=c.kappa_m_sq * s2, kappa_q_sq=c.kappa_q_sq * s2, D_total=c.D_total * s2,
                       v=c.v * step, truncation={**c.truncation, "lattice_step": step})
    rows, w, hold, w0, drift, R = _mixture_1d(law)
    v = velocity_1d(law)
    g = drift - v
    G = g * w0
    Ew0 = math.fsum(w * w0)
    c = np.array([math.fsum(w * w0 * rows[:, k]) / Ew0 for k in range(R + 1)])  # E_inf pi_0k
    r = rows[:, 1:] * w0[:, None]  # pi_0z / (1 - pi_00), z = 1..R
    A_list = []
    for a in range(rows.shape[0]):
        A = np.zeros((R + 1, R + 1))
        A[0, :R] = r[a]
        for j in range(1, R + 1):
            A[j, j - 1] = 1.0
        A_list.append(A)
    b = -c.copy()
    b[0] += 1.0
    EG2 = math.fsum(w * G**2)

    # quenched-walk betas: Phi = r_a . W_1[:R] - W_1[y-1]
    betas = []
    for a in range(rows.shape[0]):
        for y in range(1, R + 1):
            if rows[a, y] == 0.0:
                continue
            beta = np.zeros(R + 1)
            beta[:R] = r[a]
            beta[y - 1] -= 1.0
            betas.append((w[a] * w0[a] * rows[a, y], beta))

    S = np.zeros((R + 1, R + 1))
    S[0, 0] = 1.0
    m_terms, q_terms = [], []
    m_sum = q_sum = 0.0
    tail_m = tail_q = 0.0
    # a quadratic form x'Sx carries round-off of order eps |x|'|S||x|; below
    # that level the terms are noise and cannot decay further
    ulp = 8 * (R + 1) ** 2 * np.finfo(float).eps
    for i in range(max_terms):
        # S is the second moment of W_{t-i} for target t; kappa_m needs W_0 (i steps),
        # kappa_q needs W_1 for target t = i + 1
        aS = np.abs(S)
        tm = max(float(b @ S @ b), 0.0)
        tq = float(sum(c_ * (beta @ S @ beta) for c_, beta in betas))
        noise_m = ulp * float(np.abs(b) @ aS @ np.abs(b))
        noise_q = ulp * float(sum(c_ * (np.abs(beta) @ aS @ np.abs(beta)) for c_, beta in betas))
        m_terms.append(tm)
        q_terms.append(tq)
        m_sum += tm
        q_sum += tq
        if i >= R + 2:
            tail_m = _geom_tail(m_terms, R, noise_m)
            tail_q = _geom_tail(q_terms, R, noise_q)
            if max(tm - noise_m, tq - noise_q) < tol and tail_m < tol and tail_q < tol:
                break
        S = _window_step(S, A_list, w)
    else:
        raise RuntimeError(f"kappa series did not converge within max_terms: {m_terms[-3:]} {q_terms[-3:]}")

    EX = math.fsum(w * G**2)  # E[|E^w(X_sigma1) - v E^w(sigma1)|^2]
    kappa_m = EX * m_sum / v
    first = math.fsum(w * w0 * (hold * v * v + sum(rows[:, y] * (y - v - G) ** 2 for y in range(1, R + 1))))
    kappa_q = (first + EG2 * q_sum) / Ew0
    D = diffusion_1d(law, v)
    trunc = {"terms": len(m_terms), "tail_m": tail_m * EX / v, "tail_q": tail_q * EG2 / Ew0}
    return OneDimCoefficients(kappa_m, kappa_q, D, v,
                              {"kappa_m_sq": "formula", "kappa_q_sq": "formula", "D": "formula"}, trunc)


def _geom_tail(terms, R, noise: float = 0.0) -> float:
    """Geometric tail estimate ``t q / (1 - q)`` from the last ``R+1`` ratios.

    Terms at or below ``noise`` (the round-off level of a term) count as zero.
    """
    recent = terms[-(R + 2):]
    last = max(recent[1:])
    # squared round-off of the hitting probabilities sits near eps^2
    if last <= max(noise, 1e-28 * max(max(terms), 1.0)):
        return 0.0
    ratios = [b / a for a, b in zip(recent[:-1], recent[1:]) if a > 0]
    q = max(ratios) if ratios else 1.0
    if q >= 1.0:
        return math.inf
    return last * q / (1.0 - q)


def kappa_m_alt(law: EnvironmentLaw, replicates: int = 200, horizon: int = 5000, master_seed=0) -> Estimate:
    """``v E[G^2] / E_{0,0}(L)`` with the mean common-point spacing from MC."""
    rows, w, hold, w0, drift, R = _mixture_1d(law)
    v = velocity_1d(law)
    EG2 = math.fsum(w * ((drift - v) * w0) ** 2)
    if EG2 == 0.0:
        return Estimate(0.0, 0.0, 0, "alt")
    cp = two_walker_common_points(law, replicates, master_seed, horizon)
    inc = cp.increments.astype(float)
    # replicate means keep the error honest if increments are weakly dependent
    means = np.array([p.mean() for p in cp.per_replicate])
    counts = np.array([p.size for p in cp.per_replicate])
    EL = inc.mean()
    se_L = math.sqrt(np.sum(counts**2 * (means - EL) ** 2) / (counts.sum() ** 2) * len(means) / max(len(means) - 1, 1))
    val = v * EG2 / EL
    return Estimate(val, val * se_L / EL, inc.size, "alt", {"E_L": EL, "E_L_se": se_L})


def decomposition_check(coeffs: OneDimCoefficients, D: float, se: float = 0.0, n_se: float = 4.0,
                        atol: float = 1e-10) -> dict:
    total = coeffs.kappa_m_sq + coeffs.kappa_q_sq
    comb = math.sqrt(se**2 + coeffs.std_err.get("kappa_m_sq", 0.0) ** 2 + coeffs.std_err.get("kappa_q_sq", 0.0) ** 2)
    resid = total - D
    return {"sum": total, "D": D, "residual": resid, "pass": abs(resid) <= max(n_se * comb, atol)}


# ---------------------------------------------------------------------------
# invariant measure seen from the walker


def _event_arrays(law: EnvironmentLaw, ev: WindowEvent):
    sites = np.array([x for x, _ in ev.constraints], dtype=np.int64).reshape(-1, law.dim)
    atoms = np.array([i for _, i in ev.constraints], dtype=np.int64)
    return sites, atoms


def _keys(master_seed, replicates, offset=0):
    ks = [replicate_keys(master_seed, offset + r) for r in range(replicates)]
    return np.array([k[0] for k in ks], dtype=np.uint64), np.array([k[1] for k in ks], dtype=np.uint64)


def pinfty_via_regeneration(law: EnvironmentLaw, ev: WindowEvent, replicates: int = 10_000, master_seed=0,
                            step_cap: int = 1_000_000) -> Estimate:
    """Ratio estimator of ``E(sum over block k of 1{event}) / E(sigma_1)``."""
    sites, atoms = _event_arrays(law, ev)
    ek, wk = _keys(master_seed, replicates)
    lengths, counts = K.regeneration_window_counts(*_packed_args(law), law.packed.u_hat, ek, wk,
                                                   int(ev.level), sites, atoms, int(step_cap))
    lengths = lengths.astype(float)
    counts = counts.astype(float)
    p = counts.mean() / lengths.mean()
    resid = counts - p * lengths
    se = resid.std(ddof=1) / (math.sqrt(replicates) * lengths.mean())
    return Estimate(float(p), float(se), replicates, "regeneration", {"hits": int(counts.sum())})


def pinfty_via_limit(law: EnvironmentLaw, ev: WindowEvent, n: int, replicates: int = 10_000, master_seed=0) -> Estimate:
    """MC frequency of ``T_{X_n} omega in A`` under the annealed law."""
    sites, atoms = _event_arrays(law, ev)
    ek, wk = _keys(master_seed, replicates)
    hit = K.endpoint_events(*_packed_args(law), ek, wk, int(n), sites, atoms)
    k = int(hit.sum())
    p = k / replicates
    return Estimate(p, math.sqrt(max(p * (1 - p), 0.0) / replicates), replicates, "limit", {"hits": k})


def pinfty_density_1d(law: EnvironmentLaw, atom: int) -> float:
    """Exact ``P_inf(omega_0 = atom)`` via the density ``(1-pi_00)^-1 / E[...]``."""
    _, w, _, w0, _, _ = _mixture_1d(law)
    return float(w[atom] * w0[atom] / math.fsum(w * w0))


# ---------------------------------------------------------------------------
# quenched means across environments


@dataclass(frozen=True)
class QuenchedMeanSample:
    n: int
    scaled: np.ndarray  # (E^w X_n - n v) / sqrt(n) per environment
    qvar: np.ndarray  # Var^w(X_n) / n per environment
    variance: float
    variance_se: float
    qvar_mean: float
    qvar_se: float
    v: float


def env_seeds(master_seed, n_envs: int, offset: int = 0) -> list:
    return [_rng.derive_key(master_seed, offset + e, 7) for e in range(n_envs)]


def quenched_mean_fluctuation(law: EnvironmentLaw, n: int, n_envs: int, master_seed=0,
                              v: float | None = None) -> QuenchedMeanSample:
    """Exact quenched means/variances at time ``n`` over independent environments."""
    v = velocity_1d(law) if v is None else v
    scaled = np.empty(n_envs)
    qvar = np.empty(n_envs)
    for e, s in enumerate(env_seeds(master_seed, n_envs)):
        pr = propagate(Environment(law, s), 0, n)
        scaled[e] = (pr.means[-1] - n * v) / math.sqrt(n)
        qvar[e] = pr.variances[-1] / n
    var = float(np.mean(scaled**2))  # centred at the known limit 0
    # delta-method error of a second moment
    var_se = float(np.std(scaled**2, ddof=1) / math.sqrt(n_envs))
    return QuenchedMeanSample(n, scaled, qvar, var, var_se, float(qvar.mean()),
                              float(qvar.std(ddof=1) / math.sqrt(n_envs)), v)


def quenched_mean_drift_bound(law: EnvironmentLaw, n_grid, n_envs: int = 200, master_seed=0) -> dict:
    """Annealed ``|E_0 X_n - n v|`` over a grid, averaged over exact quenched means."""
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    v = velocity_1d(law) if law.dim == 1 else None
    vals = np.zeros((n_envs, n_grid.size))
    for e, s in enumerate(env_seeds(master_seed, n_envs, offset=10_000)):
        pr = propagate(Environment(law, s), 0, int(n_grid[-1]))
        vals[e] = pr.means[n_grid] - n_grid * v
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(n_envs) if n_envs > 1 else np.zeros_like(mean)
    # slope of the per-env series against n, then averaged: error from env spread
    xc = n_grid - n_grid.mean()
    denom = float(xc @ xc) if xc.size > 1 else 1.0
    slopes = (vals - vals.mean(axis=1, keepdims=True)) @ xc / denom
    slope = float(slopes.mean())
    slope_se = float(slopes.std(ddof=1) / math.sqrt(n_envs)) if n_envs > 1 else 0.0
    return {"n": n_grid.tolist(), "bias": mean.tolist(), "abs_bias": np.abs(mean).tolist(), "std_err": se.tolist(),
            "slope": slope, "slope_se": slope_se, "bounded": abs(slope) <= 4 * slope_se + 1e-12}


# ---------------------------------------------------------------------------
# restricted-path case


@dataclass(frozen=True)
class RestrictedCoefficients:
    v: tuple  # Fractions
    D_m: list
    kappa0_sq: Fraction
    D_q: list
    D_total: list
    residual: Fraction  # max |D_total - D_m - kappa0^2 v v^t|

    def as_float(self) -> dict:
        f = lambda m: [[float(x) for x in row] for row in m]
        return {"v": [float(x) for x in self.v], "D_m": f(self.D_m), "kappa0_sq": float(self.kappa0_sq),
                "D_q": f(self.D_q), "D_total": f(self.D_total), "residual": float(self.residual)}


def restricted_path_coefficients(law: EnvironmentLaw) -> RestrictedCoefficients:
    """Closed-form quantities for laws with a single non-holding jump per site.

    All expectations are finite sums evaluated in exact rational arithmetic
    (probabilities enter as the exact binary value of their float).  Given the
    site, ``lambda_1`` is geometric with mean ``1/(1-pi_00)`` and second moment
    ``(1+pi_00)/(1-pi_00)^2``; ``X_{lambda_1}`` is the site's jump ``w``.
    """
    if not check_hypothesis_E(law).restricted_path:
        raise NotRestrictedPath("law is not of restricted-path type")
    d = law.dim
    zero = (0,) * d
    atoms = []
    for wt, jd in law.site_law.atoms:
        if wt == 0:
            continue
        hold = Fraction(jd.hold)
        jump = next(z for z, p in jd.atoms if z != zero)
        atoms.append((Fraction(wt), hold, tuple(Fraction(c) for c in jump)))
    El = sum(w / (1 - h) for w, h, _ in atoms)
    Exi = [sum(w * j[c] for w, _, j in atoms) for c in range(d)]
    v = tuple(x / El for x in Exi)
    kappa0 = sum(w * h / (1 - h) ** 2 for w, h, _ in atoms) / El

    def outer(a, b):
        return [[x * y for y in b] for x in a]

    Dm = [[Fraction(0)] * d for _ in range(d)]
    Dt = [[Fraction(0)] * d for _ in range(d)]
    for w, h, j in atoms:
        el = 1 / (1 - h)
        el2 = (1 + h) / (1 - h) ** 2
        e = [j[c] - el * v[c] for c in range(d)]
        for r in range(d):
            for s in range(d):
                Dm[r][s] += w * e[r] * e[s]
                Dt[r][s] += w * (j[r] * j[s] - el * (j[r] * v[s] + v[r] * j[s]) + el2 * v[r] * v[s])
    Dm = [[x / El for x in row] for row in Dm]
    Dt = [[x / El for x in row] for row in Dt]
    Dq = [[kappa0 * x for x in row] for row in outer(v, v)]
    resid = max(abs(Dt[r][s] - Dm[r][s] - Dq[r][s]) for r in range(d) for s in range(d))
    return RestrictedCoefficients(v, Dm, kappa0, Dq, Dt, resid)


# ---------------------------------------------------------------------------
# the moment threshold p0


def p0_constant() -> float:
    return 19 / 6 + math.sqrt(139) / 3 * math.cos(math.acos(1504 / 139**1.5) / 3)


def p0_cubic(p: float) -> float:
    return (2 * p - 2) * (5 * p - 9) - p * (p - 3) * (2 * p - 3)
