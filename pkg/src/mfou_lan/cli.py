"""Command-line interface.

Every command reads its parameters from flags, optionally layered over a
JSON config file (flags win). Exit status is 0 on success, 1 when the
parameters are outside the model's domain and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import DomainError
from .fisher import constants_supercritical, j_integrals
from .harness import (ExperimentConfig, embedding_autocov, lan_remainder_study, mc_central_sequence,
                      pairwise_clouds, raw_vs_projected, regime_sweep, sub_seed)
from .likelihood import build_model, covariance, lan_check
from .model import LocalAlternative, ModelParams, SamplingScheme, scheme_from_kappa
from .reporting import dumps_json, write_csv
from .simulate import SimConfig, read_path_csv, sample_paths, write_path_csv
from .spectral import limit_profiles
from .toeplitz import dump_autocov, mfou_autocov

COMMANDS = ("fisher", "gamma", "simulate", "score", "lan-check", "mc", "regimes", "profile")

DEFAULTS = {
    "sigma": 1.0, "hurst": 0.8, "alpha": 1.0, "n": 512, "kappa": 0.5, "delta": None,
    "reps": 2000, "seed": 0, "h": None, "out": None, "threads": None,
    "n_grid": None, "method": "auto", "format": "csv", "path": None, "draws": 200,
    "bootstrap": 1000,
}

# Seed offsets so that commands sharing one top-level seed draw independent streams.
_SEED_TAG = {"simulate": 1, "lan-check": 2}


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("parameters")
    g.add_argument("--sigma", type=float)
    g.add_argument("--hurst", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--n", type=int, help="sample size")
    g.add_argument("--kappa", type=float, help="mesh exponent, delta = n^-kappa")
    g.add_argument("--delta", type=float, help="explicit mesh (overrides kappa)")
    g.add_argument("--reps", type=int, help="Monte Carlo replications")
    g.add_argument("--seed", type=int)
    g.add_argument("--h", help="local alternative as a comma triple")
    g.add_argument("--out", help="output file or directory")
    g.add_argument("--config", help="JSON file with any of the above (flags win)")
    g.add_argument("--threads", type=int, help="cap on BLAS threads")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfou-lan",
        description="Scores, Fisher information and LAN checks for the mixed fractional "
                    "Ornstein-Uhlenbeck process.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    helps = {
        "fisher": "asymptotic information constants (JSON)",
        "gamma": "autocovariance sequence (binary or CSV)",
        "simulate": "one exact sample path (CSV)",
        "score": "central sequence of a path file",
        "lan-check": "exact vs quadratic log-likelihood ratio for one path",
        "mc": "Monte Carlo covariance, pairwise clouds and raw-vs-projected export",
        "regimes": "normalized trace sweep for H < 3/4",
        "profile": "low-frequency weight w(u) on [-8, 8] (CSV)",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        _common(p)
        if name == "gamma":
            p.add_argument("--format", choices=("bin", "csv"))
        if name == "simulate":
            p.add_argument("--method", choices=("auto", "cholesky", "circulant"))
        if name in ("score", "lan-check"):
            p.add_argument("--path", help="path CSV with columns t_index,x_value")
        if name in ("mc", "regimes"):
            p.add_argument("--n-grid", dest="n_grid", help="comma-separated sample sizes")
        if name == "mc":
            p.add_argument("--bootstrap", type=int)
            p.add_argument("--draws", type=int, help="paths for the LAN remainder study")
    return parser


def _load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags, in increasing priority."""
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(_load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if isinstance(opts["n_grid"], str):
        try:
            opts["n_grid"] = [int(v) for v in opts["n_grid"].split(",")]
        except ValueError as exc:
            raise UsageError(f"bad --n-grid {opts['n_grid']!r}") from exc
    if isinstance(opts["h"], str):
        try:
            opts["h"] = list(LocalAlternative.parse(opts["h"]).h)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return opts


def _params(o) -> ModelParams:
    return ModelParams(float(o["sigma"]), float(o["hurst"]), float(o["alpha"]))


def _scheme(o, n=None) -> SamplingScheme:
    n = int(o["n"] if n is None else n)
    if o["delta"] is not None:
        return SamplingScheme(n, float(o["delta"]))
    return scheme_from_kappa(n, float(o["kappa"]))


def _emit_text(text: str, out):
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _path_from(o, scheme, model, tag):
    if o["path"]:
        x = read_path_csv(o["path"])
        if x.size != scheme.n:
            raise DomainError(f"path has {x.size} points but --n is {scheme.n}")
        return x
    sim = SimConfig("cholesky", sub_seed(o["seed"], tag))
    return sample_paths(scheme.n, 1, sim, chol=model.chol)[0]


def cmd_fisher(o):
    c = constants_supercritical(_params(o))
    _emit_text(dumps_json(c.to_dict()), o["out"])


def cmd_gamma(o):
    g = mfou_autocov(_params(o), _scheme(o))
    if o["format"] == "bin":
        if not o["out"]:
            raise UsageError("binary output needs --out")
        dump_autocov(o["out"], g)
    elif o["out"]:
        write_csv(o["out"], ["lag", "gamma"], [[k, v] for k, v in enumerate(g.gamma)])
    else:
        sys.stdout.write("lag,gamma\n")
        for k, v in enumerate(g.gamma):
            sys.stdout.write(f"{k},{v:.17g}\n")


def cmd_simulate(o):
    params, scheme = _params(o), _scheme(o)
    sim = SimConfig(o["method"], sub_seed(o["seed"], _SEED_TAG["simulate"]))
    method = sim.method
    if method == "auto":
        method = "cholesky" if scheme.n <= 1024 else "circulant"
    if method == "cholesky":
        _, chol = covariance(params, scheme)
        x = sample_paths(scheme.n, 1, sim, chol=chol)[0]
    else:
        x = sample_paths(scheme.n, 1, sim,
                         gamma=embedding_autocov(params, scheme, sim.embedding_pad))[0]
    if o["out"]:
        write_path_csv(o["out"], x)
    else:
        _write_path_stdout(x)


def _write_path_stdout(x):
    sys.stdout.write("t_index,x_value\n")
    for i, v in enumerate(x):
        sys.stdout.write(f"{i},{v:.17g}\n")


def cmd_score(o):
    if not o["path"]:
        raise UsageError("score needs --path")
    x = read_path_csv(o["path"])
    params = _params(o)
    scheme = _scheme(o, n=x.size)
    model = build_model(params, scheme, project=True)
    cs = model.central_sequence(x)
    raw = cs.raw_scores
    out = {
        "n": scheme.n, "delta": scheme.delta,
        "xi": cs.xi, "raw_scores": raw,
        "S_sigma": cs.S_sigma, "R_H": cs.R_H, "R_H_perp": cs.R_H_perp,
        "S_alpha_perp": cs.S_alpha_perp, "finite_n_cov": model.fisher(),
    }
    _emit_text(dumps_json(out), o["out"])


def cmd_lan_check(o):
    params, scheme = _params(o), _scheme(o)
    if o["path"]:
        scheme = _scheme(o, n=read_path_csv(o["path"]).size)
    h = LocalAlternative(tuple(o["h"])) if o["h"] else LocalAlternative((1 / 3 ** 0.5,) * 3)
    model = build_model(params, scheme, project=True)
    x = _path_from(o, scheme, model, _SEED_TAG["lan-check"])
    rep = lan_check(x, params, scheme, h, model=model)
    out = {"n": scheme.n, "h": list(h.h), "theta_shifted": rep.theta_shifted.to_dict(),
           "llr_exact": rep.llr_exact, "llr_lan": rep.llr_lan, "remainder": rep.remainder,
           "half_tr_s1_sq": rep.half_tr_s1_sq, "quadratic_term": rep.quadratic_term,
           "s1_op": rep.s1_op, "s1_frob": rep.s1_frob,
           "decomposition_gap_op": rep.decomposition_gap_op,
           "decomposition_gap_frob": rep.decomposition_gap_frob,
           "logdet_remainder_bound": rep.logdet_remainder_bound}
    _emit_text(dumps_json(out), o["out"])


def _experiment(o) -> ExperimentConfig:
    kw = {}
    if o["n_grid"]:
        kw["n_grid"] = tuple(o["n_grid"])
    if o["h"]:
        kw["h_list"] = [LocalAlternative(tuple(o["h"]))]
    return ExperimentConfig(theta=_params(o), kappa=float(o["kappa"]), replications=int(o["reps"]),
                            seed=int(o["seed"]), out_dir=Path(o["out"] or "mc_out"),
                            bootstrap=int(o["bootstrap"]), **kw)


def cmd_mc(o):
    cfg = _experiment(o)
    reports = mc_central_sequence(cfg)
    pairwise_clouds(cfg, reports)
    summary = raw_vs_projected(cfg, reports)
    lan = lan_remainder_study(cfg, draws=int(o["draws"]), norms=False)
    failed = [{"n": r.n, "error": r.error} for r in reports if r.error]
    for r in reports:
        if r.error is None:
            print(f"n={r.n} max|corr|={r.max_abs_corr_offdiag:.4f} "
                  f"z={np.array2string(r.per_component_z, precision=2)} "
                  f"runtime={r.runtime_seconds:.1f}s")
    for row in summary["per_n"]:
        print(f"n={row['n']} corr(S_sigma,R_H)={row['corr_S_sigma_R_H']:.4f} "
              f"corr(S_sigma,R_H_perp)={row['corr_S_sigma_R_H_perp']:.4f}")
    print("LAN remainder trend:", dumps_json(lan["trends"]))
    for f in failed:
        print(f"n={f['n']} failed: {f['error']}", file=sys.stderr)
    if failed and len(failed) == len(reports):
        raise DomainError("every n failed")


def cmd_regimes(o):
    cfg = _experiment(dict(o, out=o["out"] or "regimes_out"))
    out = regime_sweep(cfg)
    print(dumps_json({"regime": out["regime"], "trends": out["trends"]}))


def cmd_profile(o):
    params = _params(o)
    prof = limit_profiles(params, j_integrals(params)[3])
    u = np.linspace(-8.0, 8.0, 801)
    w = prof.w(u)
    if o["out"]:
        write_csv(o["out"], ["u", "w_u"], [[a, b] for a, b in zip(u, w)])
    else:
        sys.stdout.write("u,w_u\n")
        for a, b in zip(u, w):
            sys.stdout.write(f"{a:.17g},{b:.17g}\n")


HANDLERS = {"fisher": cmd_fisher, "gamma": cmd_gamma, "simulate": cmd_simulate,
            "score": cmd_score, "lan-check": cmd_lan_check, "mc": cmd_mc,
            "regimes": cmd_regimes, "profile": cmd_profile}


def _thread_limit(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(n))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve(args)
        with _thread_limit(opts["threads"]):
            HANDLERS[args.command](opts)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"{parser.prog} {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
