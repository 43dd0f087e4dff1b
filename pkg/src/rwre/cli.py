"""Command-line experiment runner.

Every subcommand prints (or writes) one UTF-8 JSON report carrying the
library version and a hash of the effective configuration.  Laws come from a
preset name, a JSON file or inline JSON; scalars come from flags.

Exit codes: 0 success, 1 malformed configuration, 2 validation failure,
3 failed assertion in ``examples``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import env as E
from . import estimators as est
from . import exactq as xq
from . import renewal as rn
from . import stats as st
from .walk import run_quenched, sample_blocks

log = logging.getLogger("rwre")

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_ASSERT = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def _read_json_arg(text: str):
    """Inline JSON, or a path to a JSON file."""
    p = Path(text)
    if p.suffix == ".json" or p.exists():
        try:
            return json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read {text}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{text}: invalid JSON ({exc})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc


def law_source(args, cfg: dict):
    source = cfg.get("law")
    if args.law is not None:
        source = args.law if args.law in E.PRESETS else _read_json_arg(args.law)
    if source is None:
        source = "lazy-nn"
    return source


def build_law(source, check: bool = True) -> E.EnvironmentLaw:
    try:
        if isinstance(source, str):
            if source not in E.PRESETS:
                raise ConfigError(f"unknown preset {source!r}; choose from {sorted(E.PRESETS)}")
            return E.PRESETS[source]()
        return E.law_from_json(source, check=check)
    except E.LawError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"malformed law: {exc}") from exc


def master_seed(args, cfg: dict) -> int:
    if os.environ.get("RWRE_SEED"):
        try:
            return int(os.environ["RWRE_SEED"], 0)
        except ValueError as exc:
            raise ConfigError("RWRE_SEED must be an integer") from exc
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    if not 0 <= int(seed) < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return int(seed)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        f = float(x)
        return f if math.isfinite(f) else str(f)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def emit(report: dict, args, cfg: dict) -> None:
    out = {"version": __version__, "config_hash": config_hash(cfg), "command": args.command}
    out.update(report)
    text = json.dumps(_jsonable(out), indent=2, sort_keys=True, ensure_ascii=False)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _write_series_csv(path, header, rows):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# subcommands; each returns (report, exit_code)


def cmd_validate(args, cfg):
    source = law_source(args, cfg)
    try:
        law = build_law(source, check=False)
    except E.LawError as exc:
        return {"valid": False, "error": str(exc)}, EXIT_INVALID
    fb = E.validate_forbidden_direction(law)
    delta = E.nonnestling_delta(law)
    hyp = E.check_hypothesis_E(law)
    sub = est.degeneracy_subspace(law) if law.family == "finite" else None
    ok = fb.ok and (delta > 0 or law.family != "finite")
    rep = {
        "valid": ok,
        "forbidden_direction": {"ok": fb.ok, "violating": [{"atom": a, "z": list(z)} for a, z in fb.violating]},
        "delta": delta,
        "moment_M": {str(p): E.moment_bound(law, p) for p in (1, 2, 3)} if law.family == "finite" else None,
        "hypothesis_E": {"restricted_path": hyp.restricted_path, "span_dim": hyp.span_dim, "holds": hyp.holds},
        "J": [list(z) for z in sorted(law.J)],
        "degeneracy_rank": None if sub is None else sub.rank,
    }
    return rep, EXIT_OK if ok else EXIT_INVALID


def cmd_simulate(args, cfg):
    law = build_law(law_source(args, cfg))
    seed = master_seed(args, cfg)
    n = args.n or 1000
    env = E.Environment(law, est._rng.derive_key(seed, 0))
    path = run_quenched(env, (0,) * law.dim, n, est._rng.derive_key(seed, 1))
    pos = path.positions
    if args.csv:
        _write_series_csv(args.csv, ["n"] + [f"x{c}" for c in range(law.dim)],
                          [[i] + row.tolist() for i, row in enumerate(pos)])
    return {"n": n, "final": pos[-1].tolist(), "mean_velocity": (pos[-1] / n).tolist()}, EXIT_OK


def _blocks(args, cfg, law, count=None):
    seed = master_seed(args, cfg)
    count = count or args.replicates or 10_000
    return sample_blocks(law, count=count, master_seed=seed, workers=args.threads)


def cmd_blocks(args, cfg):
    law = build_law(law_source(args, cfg))
    bs = _blocks(args, cfg, law)
    if args.csv:
        bs.to_csv(args.csv)
    return {"n_blocks": len(bs), "aborted": bs.aborted, "mean_duration": float(bs.duration.mean()),
            "mean_displacement": bs.displacement.mean(axis=0).tolist()}, EXIT_OK


def cmd_velocity(args, cfg):
    law = build_law(law_source(args, cfg))
    v = est.velocity(_blocks(args, cfg, law))
    rep = {"quantity": "velocity", "method": v.method, "value": v.value, "std_err": v.std_err,
           "n_samples": v.n_samples, "truncation": {}}
    if law.dim == 1 and law.family == "finite":
        rep["exact"] = xq.velocity_1d(law)
    return rep, EXIT_OK


def cmd_diffusion(args, cfg):
    law = build_law(law_source(args, cfg))
    bs = _blocks(args, cfg, law)
    v = xq.velocity_1d(law) if (args.exact_v and law.dim == 1) else None
    rep = est.annealed_diffusion(bs, v)
    out = rep.to_json()
    if law.family == "finite":
        sub = est.degeneracy_subspace(law)
        out["degeneracy"] = {"rank": sub.rank, **est.verify_degeneracy(rep, sub)}
    return out, EXIT_OK


def cmd_kappas(args, cfg):
    law = build_law(law_source(args, cfg))
    if law.dim != 1:
        raise ConfigError("kappas needs a one-dimensional law")
    seed = master_seed(args, cfg)
    c = est.kappa_coeffs_formula(law)
    out = c.to_json()
    out["decomposition"] = est.decomposition_check(c, c.D_total)
    if args.replicates:
        q = est.quenched_mean_fluctuation(law, args.n or 2000, args.replicates, seed)
        out["mc"] = {"kappa_m_sq": q.variance, "kappa_m_sq_se": q.variance_se,
                     "kappa_q_sq": q.qvar_mean, "kappa_q_sq_se": q.qvar_se, "n_envs": args.replicates}
        alt = est.kappa_m_alt(law, replicates=max(10, args.replicates // 20), master_seed=seed)
        out["alt"] = {"kappa_m_sq": alt.value, "std_err": alt.std_err}
    return out, EXIT_OK


def _event(args, law):
    if args.event in (None, "abscont"):
        return E.abscont_event()
    obj = _read_json_arg(args.event)
    try:
        return E.WindowEvent([(tuple(x), int(i)) for x, i in obj["constraints"]], obj.get("level", 0), law.u_hat)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed event: {exc}") from exc


def cmd_pinfty(args, cfg):
    law = build_law(law_source(args, cfg))
    ev = _event(args, law)
    seed = master_seed(args, cfg)
    reps = args.replicates or 10_000
    a = est.pinfty_via_regeneration(law, ev, reps, seed)
    b = est.pinfty_via_limit(law, ev, args.n if args.n is not None else 200, reps, seed)
    return {"quantity": "pinfty", "value": {"regeneration": a.value, "limit": b.value},
            "std_err": {"regeneration": a.std_err, "limit": b.std_err}, "n_samples": reps,
            "hits": {"regeneration": a.extra["hits"], "limit": b.extra["hits"]}, "truncation": {}}, EXIT_OK


def cmd_qmean(args, cfg):
    law = build_law(law_source(args, cfg))
    seed = master_seed(args, cfg)
    n = args.n or 2000
    q = est.quenched_mean_fluctuation(law, n, args.replicates or 200, seed)
    grid = sorted({max(1, n // k) for k in (20, 10, 5, 4, 2)} | {n})
    drift = est.quenched_mean_drift_bound(law, grid, min(args.replicates or 200, 200), seed)
    if args.csv:
        _write_series_csv(args.csv, ["n", "estimate", "std_err", "method"],
                          [[a, b, c, "mc"] for a, b, c in zip(drift["n"], drift["bias"], drift["std_err"])])
    return {"quantity": "quenched_mean", "n": n, "value": q.variance, "std_err": q.variance_se,
            "n_samples": q.scaled.size, "qvar_mean": q.qvar_mean, "qvar_se": q.qvar_se, "drift": drift,
            "truncation": {}}, EXIT_OK


def cmd_restricted(args, cfg):
    law = build_law(law_source(args, cfg))
    try:
        r = est.restricted_path_coefficients(law)
    except est.NotRestrictedPath as exc:
        return {"error": str(exc)}, EXIT_INVALID
    out = r.as_float()
    out["exact"] = {"v": [str(x) for x in r.v], "kappa0_sq": str(r.kappa0_sq)}
    return {"quantity": "restricted_path", "value": out, "truncation": {}}, EXIT_OK


def cmd_renewal(args, cfg):
    pmf = args.pmf or cfg.get("pmf") or '{"1": 0.5, "2": 0.5}'
    obj = _read_json_arg(pmf) if isinstance(pmf, str) else pmf
    try:
        law = rn.RenewalLaw.from_pmf(obj)
    except (rn.RenewalError, ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"malformed renewal law: {exc}") from exc
    p = args.p
    j_max = args.n or 200
    grid = list(range(law.h, j_max + 1, law.h))
    res = rn.verify_moment_bound(law, p, grid)
    if args.csv:
        rn.write_csv(args.csv, [(j, m, 0.0, "linear") for j, m in zip(res["j"], res["moment"])], "j")
    return {"quantity": "renewal_moment_bound", "h": law.h, "p": p, "value": res, "truncation": {}}, EXIT_OK


def cmd_diagnose(args, cfg):
    law = build_law(law_source(args, cfg))
    seed = master_seed(args, cfg)
    test = args.test
    if test == "tightness":
        n = args.n or 4000
        return st.tightness_diagnostic(law, seed, np.unique(np.linspace(n // 20, n, 12).astype(int))), EXIT_OK
    if test == "quenched-clt":
        return st.quenched_clt_check(E.Environment(law, seed), args.n or 5000, args.replicates or 1000, seed), EXIT_OK
    if test == "blocks":
        bs = sample_blocks(law, count=args.replicates or 10_000, master_seed=seed, per_replicate=args.replicates or 10_000)
        return st.block_independence_test(bs.duration, bs.displacement), EXIT_OK
    if test == "tail":
        return st.annealed_tail_check(law, args.n or 1000, args.p, args.replicates or 20_000, seed), EXIT_OK
    if test == "sigma1":
        return st.sigma1_divergence_probe(law, replicates=args.replicates or 1_000_000, master_seed=seed), EXIT_OK
    if test == "normality":
        n = args.n or 5000
        x = st.annealed_endpoints(law, n, args.replicates or 2000, seed)[:, 0].astype(float)
        v = xq.velocity_1d(law)
        target = est.diffusion_1d(law) if law.family == "finite" and law.dim == 1 else None
        return st.normality_check((x - n * v) / math.sqrt(n), target), EXIT_OK
    raise ConfigError(f"unknown diagnostic {test!r}")


def cmd_p0(args, cfg):
    v = est.p0_constant()
    return {"quantity": "p0", "value": v, "cubic_residual": est.p0_cubic(v)}, EXIT_OK


# ---------------------------------------------------------------------------
# worked examples


def _within(value, target, se, n_se=4.0):
    return bool(abs(value - target) <= n_se * se)


def example_battery(name: str, seed: int, quick: bool = False, threads: int = 1) -> dict:
    """Closed-form and Monte Carlo checks for one named worked example."""
    checks = []

    def add(label, ok, **info):
        checks.append({"check": label, "pass": bool(ok), **info})

    if name in ("lazy-nn", "one-two-jump"):
        law = E.PRESETS[name]()
        targets = {"lazy-nn": (2 / 3, 2 / 27, 8 / 27, 10 / 27), "one-two-jump": (1.4, 0.03, 0.21, 0.24)}[name]
        v0, km0, kq0, D0 = targets
        c = est.kappa_coeffs_formula(law)
        for label, val, tgt in (("v", c.v, v0), ("kappa_m_sq", c.kappa_m_sq, km0),
                                ("kappa_q_sq", c.kappa_q_sq, kq0), ("D", c.D_total, D0)):
            add(f"formula {label}", abs(val - tgt) <= 1e-10, value=val, target=tgt)
        add("formula decomposition", abs(c.kappa_m_sq + c.kappa_q_sq - c.D_total) <= 1e-10,
            residual=c.kappa_m_sq + c.kappa_q_sq - c.D_total)
        nb = 20_000 if quick else 100_000
        bs = sample_blocks(law, count=nb, master_seed=seed, workers=threads)
        v = est.velocity(bs)
        add("mc v", _within(float(v.value[0]), v0, float(v.std_err[0])), value=v.value, std_err=v.std_err)
        rep = est.annealed_diffusion(bs)
        add("mc D", _within(rep.D_hat[0, 0], D0, rep.std_err[0, 0]), value=rep.D_hat[0, 0], std_err=rep.std_err[0, 0])
        ne = 300 if quick else 2000
        q = est.quenched_mean_fluctuation(law, 2000, ne, seed)
        add("mc kappa_m_sq", _within(q.variance, km0, q.variance_se), value=q.variance, std_err=q.variance_se)
        # Var^w(X_n)/n carries an O(n^-1/2) bias; the check allows it through its own spread
        add("mc kappa_q_sq", _within(q.qvar_mean, kq0, q.qvar_se), value=q.qvar_mean, std_err=q.qvar_se)
        alt = est.kappa_m_alt(law, replicates=50 if quick else 200, horizon=20_000, master_seed=seed)
        se = max(alt.std_err, 1e-12)
        add("alt kappa_m_sq", _within(alt.value, km0, se), value=alt.value, std_err=alt.std_err)
        if name == "lazy-nn":
            r = est.restricted_path_coefficients(law)
            add("restricted cross-identity", abs(float(r.kappa0_sq) * float(r.v[0]) ** 2 - c.kappa_q_sq) <= 1e-12,
                kappa0_v2=float(r.kappa0_sq * r.v[0] ** 2))
    elif name == "two-jump-homogeneous":
        law = E.two_jump_homogeneous()
        bs = sample_blocks(law, count=20_000 if quick else 100_000, master_seed=seed, workers=threads)
        rep = est.annealed_diffusion(bs)
        target = np.array([[0.25, -0.25], [-0.25, 0.25]])
        ok = np.all(np.abs(rep.D_hat - target) <= 4 * rep.std_err)
        add("D matches (a-b)(a-b)^t/4", ok, value=rep.D_hat, std_err=rep.std_err)
        sub = est.degeneracy_subspace(law)
        add("span rank 1", sub.rank == 1, rank=sub.rank)
        dg = est.verify_degeneracy(rep, sub)
        add("complement quadratic form", dg["pass"], **dg)
    elif name == "abscont":
        law = E.abscont()
        ev = E.abscont_event()
        m = 100_000 if quick else 1_000_000
        seeds = np.array([est._rng.derive_key(seed, 27, s) for s in range(m)], dtype=np.uint64)
        f = E.event_frequency(law, ev, seeds)
        p = float(f.mean())
        se = math.sqrt((1 / 27) * (26 / 27) / m)
        add("P(A) at the origin", _within(p, 1 / 27, se), value=p, std_err=se, target=1 / 27)
        for n in (1, 5, 20):
            r = est.pinfty_via_limit(law, ev, n, m, seed)
            add(f"P_n(A) n={n}", r.extra["hits"] == 0, hits=r.extra["hits"], walks=m)
        sub = est.degeneracy_subspace(law)
        add("span rank", sub.rank == 1, rank=sub.rank, note="difference set spans only e2")
    elif name == "si-infty":
        r = st.sigma1_divergence_probe(E.si_infty(), replicates=200_000 if quick else 1_000_000, master_seed=seed)
        add("truncated means diverge", r["pass"], **{k: r[k] for k in ("caps", "means", "steps", "step_se")})
    else:
        raise ConfigError(f"unknown example {name!r}")
    return {"example": name, "checks": checks, "pass": all(c["pass"] for c in checks)}


EXAMPLE_NAMES = ("lazy-nn", "one-two-jump", "abscont", "si-infty", "two-jump-homogeneous")


def cmd_examples(args, cfg):
    seed = master_seed(args, cfg)
    names = [args.name] if args.name else list(EXAMPLE_NAMES)
    reports = [example_battery(n, seed, args.quick, args.threads) for n in names]
    ok = all(r["pass"] for r in reports)
    return {"examples": reports, "pass": ok}, EXIT_OK if ok else EXIT_ASSERT


COMMANDS = {
    "validate": cmd_validate, "simulate": cmd_simulate, "blocks": cmd_blocks, "velocity": cmd_velocity,
    "diffusion": cmd_diffusion, "kappas": cmd_kappas, "pinfty": cmd_pinfty, "qmean": cmd_qmean,
    "restricted": cmd_restricted, "renewal": cmd_renewal, "diagnose": cmd_diagnose, "p0": cmd_p0,
    "examples": cmd_examples,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rwre", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rwre {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (law, master_seed, ...)")
        p.add_argument("--law", help="preset name, JSON file or inline JSON")
        p.add_argument("--seed", type=lambda s: int(s, 0), help="64-bit master seed")
        p.add_argument("--replicates", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--csv", help="optional CSV output")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "examples":
            p.add_argument("--name", choices=EXAMPLE_NAMES)
            p.add_argument("--quick", action="store_true", help="smaller Monte Carlo budgets")
        if name == "pinfty":
            p.add_argument("--event", help="'abscont' or JSON {constraints: [[x, atom], ...], level: k}")
        if name == "diffusion":
            p.add_argument("--exact-v", action="store_true", help="centre with the closed-form velocity (d=1)")
        if name in ("renewal", "diagnose"):
            p.add_argument("--p", type=float, default=2.0 if name == "renewal" else 3.0)
        if name == "renewal":
            p.add_argument("--pmf", help='JSON pmf such as {"1": 0.5, "2": 0.5}')
        if name == "diagnose":
            p.add_argument("--test", required=True,
                           choices=["tightness", "quenched-clt", "blocks", "tail", "sigma1", "normality"])
    return ap


def _effective_config(args, cfg: dict) -> dict:
    eff = dict(cfg)
    for k, v in vars(args).items():
        if k in ("out", "csv", "threads", "verbose", "config") or v is None:
            continue
        eff[k] = v
    if os.environ.get("RWRE_SEED"):
        eff["seed"] = os.environ["RWRE_SEED"]
    return eff


def cli_main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _read_json_arg(args.config) if args.config else {}
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        t0 = time.perf_counter()
        report, code = COMMANDS[args.command](args, cfg)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except E.LawError as exc:
        print(f"invalid law: {exc}", file=sys.stderr)
        return EXIT_INVALID
    emit(report, args, _effective_config(args, cfg))
    return code


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
