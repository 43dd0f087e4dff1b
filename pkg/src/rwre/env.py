"""Environment laws, realised environments and hypothesis checks.

A site law is a finite mixture of finitely supported jump distributions on
``Z^d``.  An :class:`Environment` is the pair (law, seed); the jump
distribution at a site is a pure function of the seed and the site, so
environments are unbounded and never stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _rng
from ._accel import HAS_NUMBA, jit

PROB_TOL = 1e-12

FAMILY_FINITE = 0
FAMILY_SI_INFTY = 1

LatticeVector = tuple  # tuple[int, ...]; by-value equality and hashing


class LawError(ValueError):
    """Raised for malformed or hypothesis-violating laws."""


def vec(*coords) -> LatticeVector:
    if len(coords) == 1 and isinstance(coords[0], Iterable):
        coords = tuple(coords[0])
    return tuple(int(c) for c in coords)


def dot(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(int(x) * int(y) for x, y in zip(a, b))


def l1(z: Sequence[int]) -> int:
    return sum(abs(int(c)) for c in z)


@dataclass(frozen=True)
class JumpDistribution:
    """Finitely supported probability vector ``z -> p`` on ``Z^d``.

    Atoms are stored sorted lexicographically by ``z``; zero-probability atoms
    are dropped.
    """

    atoms: tuple

    def __init__(self, atoms):
        if isinstance(atoms, dict):
            atoms = atoms.items()
        items = [(vec(z), float(p)) for z, p in atoms]
        if not items:
            raise LawError("empty jump distribution")
        dims = {len(z) for z, _ in items}
        if len(dims) != 1:
            raise LawError("mixed dimensions in jump distribution")
        zs = [z for z, _ in items]
        if len(set(zs)) != len(zs):
            raise LawError("duplicate jump in jump distribution")
        if any(p < 0 or not math.isfinite(p) for _, p in items):
            raise LawError("negative or non-finite jump probability")
        total = math.fsum(p for _, p in items)
        if abs(total - 1.0) > PROB_TOL:
            raise LawError(f"jump probabilities sum to {total!r}, not 1")
        items = sorted((z, p) for z, p in items if p > 0)
        object.__setattr__(self, "atoms", tuple(items))

    @property
    def dim(self) -> int:
        return len(self.atoms[0][0])

    @property
    def support(self) -> tuple:
        return tuple(z for z, _ in self.atoms)

    def prob(self, z) -> float:
        z = vec(z)
        for y, p in self.atoms:
            if y == z:
                return p
        return 0.0

    @property
    def hold(self) -> float:
        return self.prob((0,) * self.dim)

    def drift(self) -> np.ndarray:
        return np.array([sum(p * z[c] for z, p in self.atoms) for c in range(self.dim)])

    def to_json(self) -> list:
        return [{"z": list(z), "p": p} for z, p in self.atoms]


@dataclass(frozen=True)
class SiteLaw:
    """Finite mixture ``[(weight, JumpDistribution), ...]``; order is kept."""

    atoms: tuple

    def __init__(self, atoms):
        items = [(float(w), jd if isinstance(jd, JumpDistribution) else JumpDistribution(jd)) for w, jd in atoms]
        if not items:
            raise LawError("site law needs at least one atom")
        if any(w < 0 or not math.isfinite(w) for w, _ in items):
            raise LawError("negative site-law weight")
        total = math.fsum(w for w, _ in items)
        if abs(total - 1.0) > PROB_TOL:
            raise LawError(f"site-law weights sum to {total!r}, not 1")
        if len({jd.dim for _, jd in items}) != 1:
            raise LawError("site-law atoms of different dimension")
        object.__setattr__(self, "atoms", tuple(items))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.atoms])

    @property
    def jds(self) -> tuple:
        return tuple(jd for _, jd in self.atoms)

    def __len__(self):
        return len(self.atoms)


class PackedLaw(NamedTuple):
    """Array form of a law consumed by the kernels."""

    family: int
    u_hat: np.ndarray  # (d,) int64
    atom_cdf: np.ndarray  # (A,)
    jump_z: np.ndarray  # (A, K, d) int64
    jump_cdf: np.ndarray  # (A, K)
    n_jumps: np.ndarray  # (A,) int64


@dataclass(frozen=True)
class ForbiddenReport:
    ok: bool
    violating: tuple  # ((atom_index, z), ...)


@dataclass(frozen=True)
class HypothesisE:
    restricted_path: bool
    span_dim: int
    J: frozenset
    badcase: bool  # P(for all z != 0: pi_00 + pi_0z < 1) > 0
    holds: bool


@dataclass(frozen=True, eq=False)
class EnvironmentLaw:
    """I.i.d. product law of environments with forbidden direction ``-u_hat``.

    ``family`` is ``"finite"`` for an explicit mixture.  The parametric
    ``"si-infty-example"`` family keeps a truncated mixture in ``site_law`` for
    exact work (tail mass in ``truncated_mass``) while the simulator samples
    the untruncated law.
    """

    site_law: SiteLaw
    u_hat: LatticeVector
    family: str = "finite"
    params: dict = field(default_factory=dict)
    truncated_mass: float = 0.0
    check: bool = True

    def __post_init__(self):
        object.__setattr__(self, "u_hat", vec(self.u_hat))
        if len(self.u_hat) != self.dim:
            raise LawError("u_hat dimension does not match jumps")
        if not any(self.u_hat):
            raise LawError("u_hat must be nonzero")
        if self.check:
            rep = validate_forbidden_direction(self)
            if not rep.ok:
                raise LawError(f"forbidden direction violated by atoms {rep.violating}")
            if nonnestling_delta(self) <= 0:
                raise LawError("non-nestling hypothesis fails (delta = 0)")

    @property
    def dim(self) -> int:
        return self.site_law.atoms[0][1].dim

    @property
    def delta(self) -> float:
        return nonnestling_delta(self)

    def moment_M(self, p: float) -> float:
        return moment_bound(self, p)

    @cached_property
    def max_jump(self) -> int:
        """Largest ``z . u_hat`` over all support points."""
        return max(dot(z, self.u_hat) for _, jd in self.site_law.atoms for z in jd.support)

    @cached_property
    def J(self) -> frozenset:
        return frozenset(z for w, jd in self.site_law.atoms if w > 0 for z in jd.support)

    @cached_property
    def packed(self) -> PackedLaw:
        jds = self.site_law.jds
        A = len(jds)
        K = max(len(jd.atoms) for jd in jds)
        d = self.dim
        jump_z = np.zeros((A, K, d), dtype=np.int64)
        jump_cdf = np.ones((A, K))
        n_jumps = np.zeros(A, dtype=np.int64)
        for a, jd in enumerate(jds):
            acc = 0.0
            for k, (z, p) in enumerate(jd.atoms):
                jump_z[a, k] = z
                acc += p
                jump_cdf[a, k] = acc
            jump_cdf[a, len(jd.atoms) - 1] = 1.0
            n_jumps[a] = len(jd.atoms)
        atom_cdf = np.cumsum(self.site_law.weights)
        atom_cdf[-1] = 1.0
        fam = FAMILY_SI_INFTY if self.family == "si-infty-example" else FAMILY_FINITE
        return PackedLaw(fam, np.array(self.u_hat, dtype=np.int64), atom_cdf, jump_z, jump_cdf, n_jumps)

    def atom_jd(self, atom: int) -> JumpDistribution:
        if self.family == "si-infty-example":
            return _si_jd(atom)
        return self.site_law.atoms[atom][1]

    # -- exact moments over the (finite) mixture ----------------------------

    def expect(self, f) -> float:
        """``E[f(jd)]`` over the site law (exact finite sum)."""
        return math.fsum(w * f(jd) for w, jd in self.site_law.atoms)

    def to_json(self) -> dict:
        if self.family != "finite":
            return {"family": self.family, "params": dict(self.params)}
        return {
            "dim": self.dim,
            "u_hat": list(self.u_hat),
            "atoms": [{"weight": w, "jumps": jd.to_json()} for w, jd in self.site_law.atoms],
        }


# ---------------------------------------------------------------------------
# hypothesis checks


def validate_forbidden_direction(law: EnvironmentLaw) -> ForbiddenReport:
    bad = []
    for a, (w, jd) in enumerate(law.site_law.atoms):
        for z in jd.support:
            if dot(z, law.u_hat) < 0:
                bad.append((a, z))
    if law.family == "si-infty-example":
        bad = []  # every p_i, q_i has z.u_hat >= 0 by construction
    return ForbiddenReport(not bad, tuple(bad))


def nonnestling_delta(law: EnvironmentLaw) -> float:
    """Smallest drift component along ``u_hat`` over the atoms of the law."""
    vals = [math.fsum(dot(z, law.u_hat) * p for z, p in jd.atoms) for w, jd in law.site_law.atoms if w > 0]
    if law.family == "si-infty-example":
        return 0.0  # inf over i of 4^{-i}
    return max(min(vals), 0.0)


def moment_bound(law: EnvironmentLaw, p: float) -> float:
    if p < 1:
        raise ValueError("moment order p must be >= 1")
    best = 0.0
    for w, jd in law.site_law.atoms:
        if w > 0:
            best = max(best, math.fsum(l1(z) ** p * q for z, q in jd.atoms) ** (1.0 / p))
    return best


def _rank(vectors) -> int:
    rows = [list(map(Fraction, v)) for v in vectors if any(v)]
    if not rows:
        return 0
    # exact Gaussian elimination over the rationals
    rank, ncol = 0, len(rows[0])
    for c in range(ncol):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c] != 0:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def check_hypothesis_E(law: EnvironmentLaw) -> HypothesisE:
    zero = (0,) * law.dim
    restricted_atoms = []
    for w, jd in law.site_law.atoms:
        hold = jd.hold
        restricted_atoms.append(any(z != zero and abs(hold + p - 1.0) <= PROB_TOL for z, p in jd.atoms))
    restricted = all(r for (w, _), r in zip(law.site_law.atoms, restricted_atoms) if w > 0)
    badcase = any(not r for (w, _), r in zip(law.site_law.atoms, restricted_atoms) if w > 0)
    J = law.J
    span = _rank(J)
    holds = badcase and span >= 2
    return HypothesisE(restricted, span, J, badcase, holds)


# ---------------------------------------------------------------------------
# site sampling kernels


@jit
def pick(cdf, n, u):
    for i in range(n - 1):
        if u < cdf[i]:
            return i
    return n - 1


@jit
def si_atom_from_hash(h):
    """p_i / q_i index from a hash: i geometric(1/2) on 1,2,..., side from bit 63."""
    side = int(h >> _rng.u64(63))
    i = 1
    while i < 62 and ((h >> _rng.u64(i - 1)) & _rng.u64(1)) == _rng.u64(0):
        i += 1
    return 2 * (i - 1) + side


@jit
def site_atom(family, atom_cdf, seed, x):
    h = _rng.site_hash(seed, x)
    if family == FAMILY_SI_INFTY:
        return si_atom_from_hash(h)
    return pick(atom_cdf, atom_cdf.shape[0], _rng.to_unit(h))


@jit
def sample_jump(family, jump_z, jump_cdf, n_jumps, atom, u, out):
    if family == FAMILY_SI_INFTY:
        i = atom // 2 + 1
        if u < 0.25**i:
            out[0] = 1
            out[1] = 0
        else:
            out[0] = 0
            out[1] = 1 if atom % 2 == 0 else -1
        return
    k = pick(jump_cdf[atom], n_jumps[atom], u)
    for c in range(out.shape[0]):
        out[c] = jump_z[atom, k, c]


def _si_jd(atom: int) -> JumpDistribution:
    i = atom // 2 + 1
    right = 0.25**i
    side = 1 if atom % 2 == 0 else -1
    return JumpDistribution([((1, 0), right), ((0, side), 1.0 - right)])


# ---------------------------------------------------------------------------
# realised environments


@dataclass(frozen=True)
class Environment:
    law: EnvironmentLaw
    seed: int

    @property
    def key(self):
        return _rng.key(self.seed)

    def site_atom(self, x) -> int:
        pk = self.law.packed
        return int(site_atom(pk.family, pk.atom_cdf, self.key, np.asarray(vec(x), dtype=np.int64)))

    def site_env(self, x) -> JumpDistribution:
        return self.law.atom_jd(self.site_atom(x))

    def site_atoms(self, xs) -> np.ndarray:
        """Atom indices at many sites, vectorised (finite family only)."""
        return atoms_from_hashes(self.law, _rng.site_hash_many(np.uint64(int(self.seed) & _rng.MASK), xs))

    def shifted(self, z) -> "ShiftedEnvironment":
        return ShiftedEnvironment(self, vec(z))


@dataclass(frozen=True)
class ShiftedEnvironment:
    """``T_z omega``: site ``x`` reads the base environment at ``x + z``."""

    base: Environment
    shift: LatticeVector

    def site_env(self, x) -> JumpDistribution:
        return self.base.site_env(tuple(a + b for a, b in zip(vec(x), self.shift)))

    def site_atom(self, x) -> int:
        return self.base.site_atom(tuple(a + b for a, b in zip(vec(x), self.shift)))


def atoms_from_hashes(law: EnvironmentLaw, h: np.ndarray) -> np.ndarray:
    if law.family == "si-infty-example":
        conv = np.uint64 if HAS_NUMBA else int
        return np.array([si_atom_from_hash(conv(v)) for v in np.asarray(h, dtype=np.uint64)], dtype=np.int64)
    u = _rng.unit_many(h)
    idx = np.searchsorted(law.packed.atom_cdf, u, side="right")
    return np.minimum(idx, len(law.site_law) - 1)


def site_env(env: Environment, x) -> JumpDistribution:
    return env.site_env(x)


@dataclass(frozen=True)
class WindowEvent:
    """Cylinder event ``{omega_x is atom i for each (x, i)}``, S_{-k}-measurable."""

    constraints: tuple
    level: int
    u_hat: LatticeVector | None = None

    def __init__(self, constraints, level: int = 0, u_hat=None):
        cons = tuple((vec(x), int(i)) for x, i in constraints)
        object.__setattr__(self, "constraints", cons)
        object.__setattr__(self, "level", int(level))
        object.__setattr__(self, "u_hat", None if u_hat is None else vec(u_hat))
        if u_hat is not None:
            for x, _ in cons:
                if dot(x, self.u_hat) < -self.level:
                    raise LawError(f"site {x} lies below level -{self.level}")

    @property
    def measurability_level(self) -> int:
        return self.level


def event_holds(env: Environment, ev: WindowEvent, base=None) -> bool:
    base = vec(base) if base is not None else (0,) * env.law.dim
    for x, i in ev.constraints:
        if env.site_atom(tuple(a + b for a, b in zip(base, x))) != i:
            return False
    return True


def event_frequency(law: EnvironmentLaw, ev: WindowEvent, seeds: np.ndarray) -> np.ndarray:
    """Vectorised indicator of ``ev`` at the origin for an array of seeds."""
    seeds = np.asarray(seeds)
    hit = np.ones(seeds.shape[0], dtype=bool)
    for x, i in ev.constraints:
        atoms = atoms_from_hashes(law, _rng.site_hash_many(seeds, np.broadcast_to(np.array(x), (seeds.shape[0], len(x)))))
        hit &= atoms == i
    return hit


# ---------------------------------------------------------------------------
# construction helpers, presets and JSON


def make_law(atoms, u_hat, check: bool = True, **kw) -> EnvironmentLaw:
    """``atoms`` is ``[(weight, {z: p, ...}), ...]``."""
    return EnvironmentLaw(SiteLaw([(w, JumpDistribution(jd)) for w, jd in atoms]), vec(u_hat), check=check, **kw)


def lazy_nn(p_values=(0.5, 1.0), weights=None) -> EnvironmentLaw:
    """1d law with ``pi_00 + pi_01 = 1``; ``p_values`` are the ``pi_01``."""
    p_values = list(p_values)
    weights = [1.0 / len(p_values)] * len(p_values) if weights is None else list(weights)
    atoms = [(w, {(0,): 1.0 - p, (1,): p}) for w, p in zip(weights, p_values)]
    return make_law(atoms, (1,), params={"p_values": p_values, "weights": weights}, family="finite")


def one_two_jump(q_values=(0.2, 0.6), weights=None) -> EnvironmentLaw:
    """1d law with ``pi_01 + pi_02 = 1``; ``q_values`` are the ``pi_02``."""
    q_values = list(q_values)
    weights = [1.0 / len(q_values)] * len(q_values) if weights is None else list(weights)
    atoms = [(w, {(1,): 1.0 - q, (2,): q}) for w, q in zip(weights, q_values)]
    return make_law(atoms, (1,))


def deterministic(z0=(1,), u_hat=None) -> EnvironmentLaw:
    z0 = vec(z0)
    return make_law([(1.0, {z0: 1.0})], u_hat if u_hat is not None else z0)


def two_jump_homogeneous(a=(1, 0), b=(0, 1), u_hat=(1, 1)) -> EnvironmentLaw:
    return make_law([(1.0, {vec(a): 0.5, vec(b): 0.5})], u_hat)


def abscont() -> EnvironmentLaw:
    p1 = {(1, 1): 0.5, (1, -1): 0.5}
    p2 = {(1, 1): 0.5, (1, 0): 0.5}
    p3 = {(1, -1): 0.5, (1, 0): 0.5}
    return make_law([(1 / 3, p1), (1 / 3, p2), (1 / 3, p3)], (1, 0))


def abscont_event() -> WindowEvent:
    """``{omega_(-1,0)=p1, omega_(-1,1)=p2, omega_(-1,-1)=p3}``, level 1."""
    return WindowEvent([((-1, 0), 0), ((-1, 1), 1), ((-1, -1), 2)], level=1, u_hat=(1, 0))


def constant_drift() -> EnvironmentLaw:
    """1d law whose drift is constant (D = v) although the atoms differ."""
    return make_law([(0.5, {(1,): 1.0}), (0.5, {(0,): 0.5, (2,): 0.5})], (1,))


def restricted_2d() -> EnvironmentLaw:
    return make_law([(0.5, {(0, 0): 0.5, (1, 0): 0.5}), (0.5, {(1, 1): 1.0})], (1, 0))


def si_infty(i_max: int = 30) -> EnvironmentLaw:
    """Trapping law with infinite mean regeneration time.

    Atoms ``p_i = (1-a_i) d_(1,0) + a_i d_(0,1)`` and ``q_i`` (same with
    ``(0,-1)``), ``a_i = 1 - 4^-i``, each with weight ``2^-(i+1)``.  The
    mixture kept for exact work is truncated at ``i_max``; its dropped mass
    is folded into the last pair and reported in ``truncated_mass``.
    """
    atoms = []
    for i in range(1, i_max + 1):
        w = 2.0 ** -(i + 1)
        if i == i_max:
            w = 2.0 ** -i  # absorb the tail 2^-i_max, split across p and q
        for side in (1, -1):
            atoms.append((w, JumpDistribution([((1, 0), 0.25**i), ((0, side), 1.0 - 0.25**i)])))
    law = EnvironmentLaw(
        SiteLaw(atoms),
        (1, 0),
        family="si-infty-example",
        params={"i_max": i_max},
        truncated_mass=2.0 ** -i_max,
        check=False,
    )
    return law


PRESETS = {
    "lazy-nn": lazy_nn,
    "one-two-jump": one_two_jump,
    "abscont": abscont,
    "si-infty": si_infty,
    "two-jump-homogeneous": two_jump_homogeneous,
    "deterministic": deterministic,
    "constant-drift": constant_drift,
    "restricted-2d": restricted_2d,
}


def law_from_json(obj, check: bool = True) -> EnvironmentLaw:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "family" in obj:
        fam, params = obj["family"], obj.get("params", {})
        if fam == "si-infty-example":
            return si_infty(**params)
        if fam == "lazy-nn":
            return lazy_nn(**params)
        if fam in PRESETS:
            return PRESETS[fam](**params)
        raise LawError(f"unknown law family {fam!r}")
    try:
        dim = int(obj["dim"])
        atoms = []
        for a in obj["atoms"]:
            jd = JumpDistribution([(tuple(j["z"]), j["p"]) for j in a["jumps"]])
            atoms.append((a["weight"], jd))
        law = EnvironmentLaw(SiteLaw(atoms), vec(obj["u_hat"]), check=check)
    except (KeyError, TypeError) as exc:
        raise LawError(f"malformed law JSON: {exc}") from exc
    if law.dim != dim:
        raise LawError("declared dim does not match jump vectors")
    return law
