"""Monte Carlo verification experiments and trace-convergence sweeps."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import __version__
from .exceptions import DomainError, RegimeError
from .fisher import (constants_short_memory, constants_subcritical,
                     constants_supercritical)
from .likelihood import (build_model, covariance, lan_check, opf_diagnostics,
                         regime_summary)
from .model import (HurstRegime, LocalAlternative, ModelParams, classify_regime,
                    scheme_from_kappa)
from .reporting import write_csv, write_json
from .simulate import SimConfig, sample_paths
from .toeplitz import DEFAULT_BUILD, BuildConfig, mfou_coefficients

SCORE_HEADER = ["rep", "S_sigma", "S_H", "R_H", "R_H_perp", "S_alpha", "S_alpha_perp",
                "xi1", "xi2", "xi3"]
ELLIPSE_LEVELS = (1.0, 1.5, 2.0, 2.5)
PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class ExperimentConfig:
    theta: ModelParams = field(default_factory=lambda: ModelParams(1.0, 0.8, 1.0))
    kappa: float = 0.5
    n_grid: Sequence[int] = (512, 1024, 2048, 4096)
    replications: int = 2000
    seed: int = 0
    h_list: Sequence[LocalAlternative] = field(
        default_factory=lambda: [LocalAlternative((1 / math.sqrt(3),) * 3)])
    out_dir: Optional[Path] = None
    bootstrap: int = 1000
    sim_method: str = "auto"
    build: BuildConfig = DEFAULT_BUILD

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if list(self.n_grid) != sorted(self.n_grid):
            raise DomainError("n_grid must be sorted ascending")
        if self.replications < 2:
            raise DomainError("replications must be at least 2")
        if self.bootstrap < 10:
            raise DomainError("bootstrap resample count must be at least 10")
        self.h_list = [h if isinstance(h, LocalAlternative) else LocalAlternative(tuple(h))
                       for h in self.h_list]
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.to_dict(),
            "kappa": self.kappa,
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "seed": self.seed,
            "h_list": [list(h.h) for h in self.h_list],
            "bootstrap": self.bootstrap,
            "sim_method": self.sim_method,
            "library_version": __version__,
        }


def sub_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit seed derived from a top-level seed and integer keys."""
    ss = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0])


def bootstrap_variance_se(samples: np.ndarray, resamples: int, seed: int) -> np.ndarray:
    """Bootstrap standard error of each column's sample variance."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    r = x.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2 ** 31,)))
    out = np.empty((resamples, x.shape[1]))
    for b in range(resamples):
        idx = rng.integers(0, r, r)
        out[b] = np.var(x[idx], axis=0, ddof=1)
    return out.std(axis=0, ddof=1)


def corr_offdiag_max(cov: np.ndarray) -> float:
    d = np.sqrt(np.diag(cov))
    corr = cov / np.outer(d, d)
    return float(np.max(np.abs(corr[~np.eye(cov.shape[0], dtype=bool)])))


@dataclass
class McReport:
    n: int
    config: dict
    empirical_cov: np.ndarray
    finite_n_cov: np.ndarray
    asymptotic_cov: np.ndarray
    max_abs_corr_offdiag: float
    per_component_z: np.ndarray
    opf_ratios: dict
    runtime_seconds: float
    bootstrap_se: np.ndarray = None
    scores: np.ndarray = field(default=None, repr=False)
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "empirical_cov": self.empirical_cov,
            "finite_n_cov": self.finite_n_cov,
            "asymptotic_cov": self.asymptotic_cov,
            "max_abs_corr_offdiag": self.max_abs_corr_offdiag,
            "per_component_z": self.per_component_z,
            "opf_ratios": self.opf_ratios,
            "runtime_seconds": self.runtime_seconds,
        }


def embedding_autocov(params: ModelParams, scheme, pad: int = 2,
                      build: BuildConfig = DEFAULT_BUILD) -> np.ndarray:
    """Autocovariances at lags 0..pad*n/2, enough for an embedding of length >= pad*n."""
    lags = max(scheme.n, (pad * scheme.n) // 2 + 1)
    return mfou_coefficients(params, scheme.delta, lags, ("f_total",), build)["f_total"]


def _simulate(cfg: ExperimentConfig, model, n: int, tag: int) -> np.ndarray:
    sim = SimConfig(cfg.sim_method, sub_seed(cfg.seed, tag, n))
    method = sim.method
    if method == "auto":
        method = "cholesky" if n <= 1024 else "circulant"
    if method == "cholesky":
        return sample_paths(n, cfg.replications, sim, chol=model.chol)
    gamma = embedding_autocov(model.params, model.scheme, sim.embedding_pad, cfg.build)
    return sample_paths(n, cfg.replications, sim, gamma=gamma)


def _score_rows(cs, xi):
    raw = cs.raw_scores
    return [[r, raw[r, 0], raw[r, 1], cs.R_H[r], cs.R_H_perp[r], raw[r, 2], cs.S_alpha_perp[r],
             xi[r, 0], xi[r, 1], xi[r, 2]] for r in range(xi.shape[0])]


def mc_central_sequence(cfg: ExperimentConfig, n_values: Optional[Sequence[int]] = None) -> list:
    """Monte Carlo covariance of the central sequence at each n.

    For each n the score matrices are built once, ``replications`` exact
    paths are scored, and the empirical covariance is set against the exact
    finite-n covariance and the asymptotic diagonal.
    """
    if classify_regime(cfg.theta) is not HurstRegime.SUPERCRITICAL:
        raise RegimeError("the central-sequence experiment needs H > 3/4")
    if cfg.replications < 100:
        raise DomainError("covariance experiments need at least 100 replications")
    asym = constants_supercritical(cfg.theta).diagonal()
    reports = []
    for n in (cfg.n_grid if n_values is None else n_values):
        t0 = time.perf_counter()
        conf = dict(cfg.to_dict(), n=n)
        try:
            scheme = scheme_from_kappa(n, cfg.kappa)
            model = build_model(cfg.theta, scheme, cfg.build, project=True)
            paths = _simulate(cfg, model, n, 0)
            cs = model.central_sequence(paths)
            del paths
        except (DomainError, ArithmeticError, RuntimeError) as exc:
            reports.append(McReport(n, conf, None, None, asym, math.nan, None, {}, 0.0,
                                    error=f"{type(exc).__name__}: {exc}"))
            continue
        xi = cs.xi
        emp = np.cov(xi, rowvar=False, ddof=1)
        fin = model.fisher()
        se = bootstrap_variance_se(xi, cfg.bootstrap, sub_seed(cfg.seed, 1, n))
        z = (np.diag(emp) - np.diag(fin)) / se
        opf = opf_diagnostics(model.mats, cfg.build.lanczos_tol, cfg.build.lanczos_max_iter)
        rows = _score_rows(cs, xi)
        del model
        rep = McReport(n, conf, emp, fin, asym, corr_offdiag_max(emp), z, opf,
                       time.perf_counter() - t0, se, np.array([r[1:] for r in rows]))
        if cfg.out_dir is not None:
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            write_csv(cfg.out_dir / f"scores_n{n}.csv", SCORE_HEADER, rows)
            write_json(cfg.out_dir / f"report_n{n}.json", rep.to_json())
        reports.append(rep)
    return reports


def strictly_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


def diagonal_gaps(reports) -> np.ndarray:
    """Relative gaps |finite-n / asymptotic - 1| of the three diagonal entries, per n."""
    return np.array([np.abs(np.diag(r.finite_n_cov) / np.diag(r.asymptotic_cov) - 1.0)
                     for r in reports])


def raw_vs_projected(cfg: ExperimentConfig, reports: Optional[list] = None) -> dict:
    """Correlations of S_sigma with the raw H-score, with R_H (explicit log-delta
    term removed) and with R_H_perp (fully projected), per n.

    At moderate n the strong dependence sits in the raw pair, through the
    sigma log(delta) multiple of S_sigma inside S_H. The link between S_sigma
    and R_H runs through a_n, which grows like log(1/delta), so that
    correlation climbs towards one only slowly. R_H_perp is uncorrelated with
    S_sigma by construction. All three correlations are exported.
    """
    if reports is None:
        reports = mc_central_sequence(cfg)
    out = {"config": cfg.to_dict(), "per_n": []}
    for rep in reports:
        if rep.scores is None:
            continue
        s = rep.scores
        c = np.corrcoef(s[:, :6], rowvar=False)
        out["per_n"].append({
            "n": rep.n,
            "corr_S_sigma_S_H": c[0, 1],
            "corr_S_sigma_R_H": c[0, 2],
            "corr_S_sigma_R_H_perp": c[0, 3],
        })
        if cfg.out_dir is not None:
            write_csv(cfg.out_dir / f"raw_vs_projected_n{rep.n}.csv",
                      ["rep", "S_sigma", "S_H", "R_H", "R_H_perp", "S_alpha", "S_alpha_perp"],
                      [[i] + list(row[:6]) for i, row in enumerate(s)])
    if cfg.out_dir is not None:
        write_json(cfg.out_dir / "raw_vs_projected.json", out)
    return out


def pairwise_clouds(cfg: ExperimentConfig, reports: list) -> dict:
    """Xi samples and axis-aligned ellipse parameters for the three pairs."""
    out = {"config": cfg.to_dict(), "levels": list(ELLIPSE_LEVELS), "per_n": []}
    for rep in reports:
        if rep.scores is None:
            continue
        fin = np.diag(rep.finite_n_cov)
        asym = np.diag(rep.asymptotic_cov)
        pairs = []
        for i, j in PAIRS:
            pairs.append({
                "pair": [i + 1, j + 1],
                "ellipses": [{"z": z, "semi_axes": [z * math.sqrt(fin[i]), z * math.sqrt(fin[j])]}
                             for z in ELLIPSE_LEVELS],
                "asymptotic_ellipses": [
                    {"z": z, "semi_axes": [z * math.sqrt(asym[i]), z * math.sqrt(asym[j])]}
                    for z in ELLIPSE_LEVELS],
            })
        out["per_n"].append({"n": rep.n, "samples": int(rep.scores.shape[0]), "pairs": pairs})
        if cfg.out_dir is not None:
            xi = rep.scores[:, 6:9]
            write_csv(cfg.out_dir / f"xi_cloud_n{rep.n}.csv", ["rep", "xi1", "xi2", "xi3"],
                      [[i, *row] for i, row in enumerate(xi)])
    if cfg.out_dir is not None:
        write_json(cfg.out_dir / "ellipses.json", out)
    return out


def _expected_llr(model, chol_h) -> float:
    """E[log L(theta_h) - log L(theta)] under theta, in closed form."""
    m = solve_triangular(chol_h.lower, model.chol.lower, lower=True, check_finite=False)
    n = model.scheme.n
    return -0.5 * (chol_h.log_det - model.chol.log_det) - 0.5 * (float(np.vdot(m, m)) - n)


def lan_remainder_study(cfg: ExperimentConfig, draws: int = 200,
                        n_values: Optional[Sequence[int]] = None, norms: bool = True) -> dict:
    """Distribution of the LAN remainder per (n, h), with trend flags across n.

    Alongside each h the mirrored alternative -h is evaluated, and the sum
    llr(h) + llr(-h) + h' I h is compared with its exact expectation.
    """
    grid = tuple(cfg.n_grid if n_values is None else n_values)
    results = []
    for n in grid:
        scheme = scheme_from_kappa(n, cfg.kappa)
        model = build_model(cfg.theta, scheme, cfg.build, project=True)
        sim = SimConfig("cholesky", sub_seed(cfg.seed, 2, n))
        paths = sample_paths(n, draws, sim, chol=model.chol)
        for k, h in enumerate(cfg.h_list):
            entry = {"n": n, "h": list(h.h)}
            try:
                rep = lan_check(paths, cfg.theta, scheme, h, cfg.build, model=model, norms=norms)
                mirror = lan_check(paths, cfg.theta, scheme, -h, cfg.build, model=model,
                                   norms=False)
            except DomainError as exc:
                entry["skipped"] = str(exc)
                results.append(entry)
                continue
            rem = np.abs(rep.remainder)
            sym = rep.llr_exact + mirror.llr_exact + rep.quadratic_term
            expected = 0.0
            if h.norm > 0:
                _, chol_p = covariance(rep.theta_shifted, scheme, cfg.build)
                _, chol_m = covariance(mirror.theta_shifted, scheme, cfg.build)
                expected = (_expected_llr(model, chol_p) + _expected_llr(model, chol_m)
                            + rep.quadratic_term)
            entry.update({
                "median_abs_remainder": float(np.median(rem)),
                "p90_abs_remainder": float(np.quantile(rem, 0.9)),
                "half_tr_s1_sq": rep.half_tr_s1_sq,
                "quadratic_term": rep.quadratic_term,
                "s1_op": rep.s1_op,
                "s1_frob": rep.s1_frob,
                "decomposition_gap_op": rep.decomposition_gap_op,
                "decomposition_gap_frob": rep.decomposition_gap_frob,
                "logdet_remainder_bound": rep.logdet_remainder_bound,
                "symmetry_mean": float(np.mean(sym)),
                "symmetry_se": float(np.std(sym, ddof=1) / math.sqrt(draws)),
                "symmetry_expected": float(expected),
                "remainders": rep.remainder,
            })
            results.append(entry)
        del model
    trends = {}
    for k, h in enumerate(cfg.h_list):
        med = [e["median_abs_remainder"] for e in results
               if e["h"] == list(h.h) and "median_abs_remainder" in e]
        trends[str(list(h.h))] = {"medians": med, "decreasing": strictly_decreasing(med),
                                  "first_to_last_decrease": bool(med and med[-1] < med[0])}
    out = {"config": cfg.to_dict(), "draws": draws, "results": results, "trends": trends}
    if cfg.out_dir is not None:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        write_json(cfg.out_dir / "lan_remainder.json",
                   dict(out, results=[{k: v for k, v in e.items() if k != "remainders"}
                                      for e in results]))
    return out


def trace_sweep(theta: ModelParams, kappa: float, n_grid: Sequence[int],
                build: BuildConfig = DEFAULT_BUILD, opf: bool = True) -> list:
    """Deterministic finite-n quantities along the grid for H > 3/4."""
    from .fisher import a_n_asymptotic

    asym = constants_supercritical(theta)
    rows = []
    for n in n_grid:
        scheme = scheme_from_kappa(n, kappa)
        model = build_model(theta, scheme, build, project=True)
        fin = model.fisher()
        row = {
            "n": n,
            "finite_n_cov": fin,
            "relative_gaps": np.abs(np.diag(fin) / np.diag(asym.diagonal()) - 1.0),
            "alpha_raw": model.mats.a_alpha.frob_sq / (2.0 * scheme.t_horizon),
            "orthogonality": model.mats.orthogonality_residuals(),
            "a_n": model.coeffs.a_n,
            "a_n_asymptotic": a_n_asymptotic(theta, scheme),
            "coeffs": model.coeffs,
            "c_sigma_op_norm": None,
        }
        if opf:
            o = opf_diagnostics(model.mats, build.lanczos_tol, build.lanczos_max_iter)
            row["opf"] = o
            row["c_sigma_op_norm"] = o["C_sigma"]["op_norm"]
            row["dperp_rate_product"] = (o["D_H_perp"]["ratio"] * math.sqrt(scheme.t_horizon)
                                         / math.log(n))
        rows.append(row)
        del model
    return rows


def regime_sweep(cfg: ExperimentConfig, with_constants: bool = True) -> dict:
    """Normalized trace quantities per n for 1/2 < H < 3/4 or H < 1/2."""
    regime = classify_regime(cfg.theta)
    if regime is HurstRegime.SUPERCRITICAL:
        raise RegimeError("regime_sweep covers H < 3/4; use mc_central_sequence for H > 3/4")
    rows = []
    for n in cfg.n_grid:
        scheme = scheme_from_kappa(n, cfg.kappa)
        model = build_model(cfg.theta, scheme, cfg.build, project=False)
        s = regime_summary(model.mats, cfg.theta, scheme)
        rows.append(dict(s, n=n))
        del model
    cs = [abs(r["cross_sigma_alpha"]) for r in rows]
    ch = [abs(r["cross_H_alpha"]) for r in rows]
    ae = [abs(r["alpha_entry"] - 1.0 / (2.0 * cfg.theta.alpha)) for r in rows]
    ct = [r["c_tilde_sq_over_n"] for r in rows]
    changes = [abs(b / a - 1.0) for a, b in zip(ct, ct[1:])]
    trends = {
        "cross_sigma_alpha_last_below_first": cs[-1] < cs[0],
        "cross_H_alpha_last_below_first": ch[-1] < ch[0],
        "block_det_positive": all(r["block_det"] > 0 for r in rows),
        "alpha_gap_decreasing": strictly_decreasing(ae),
        "c_tilde_relative_changes": changes,
    }
    out = {"config": cfg.to_dict(), "regime": regime.value, "per_n": rows, "trends": trends}
    if with_constants:
        if regime is HurstRegime.SUBCRITICAL_LONG_MEMORY:
            k = constants_subcritical(cfg.theta)
            out["limit"] = {"K_ss": k.K_ss, "K_sH": k.K_sH, "K_HH": k.K_HH,
                            "block": k.block(), "block_det": k.block_det}
        else:
            k = constants_short_memory(cfg.theta)
            out["limit"] = {"Ktil_ss": k.Ktil_ss, "Ktil_sH": k.Ktil_sH, "Ktil_HH": k.Ktil_HH,
                            "block": k.block}
    if cfg.out_dir is not None:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        write_json(cfg.out_dir / "regime_sweep.json", out)
    return out
