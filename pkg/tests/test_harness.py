import csv
import json
import math

import numpy as np
import pytest

from mfou_lan.exceptions import DomainError, RegimeError
from mfou_lan.harness import (ELLIPSE_LEVELS, SCORE_HEADER, ExperimentConfig, bootstrap_variance_se,
                              corr_offdiag_max, diagonal_gaps, lan_remainder_study,
                              mc_central_sequence, pairwise_clouds, raw_vs_projected, regime_sweep,
                              strictly_decreasing, sub_seed)
from mfou_lan.model import ModelParams

REPORT_KEYS = {"config", "empirical_cov", "finite_n_cov", "asymptotic_cov", "max_abs_corr_offdiag",
               "per_component_z", "opf_ratios", "runtime_seconds"}


def small_cfg(out=None, **kw):
    base = dict(n_grid=(64, 128), replications=200, bootstrap=50, seed=4, out_dir=out)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def mc_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("mc")
    cfg = small_cfg(out)
    return cfg, mc_central_sequence(cfg)


def test_config_validation():
    with pytest.raises(DomainError):
        ExperimentConfig(n_grid=(128, 64))
    with pytest.raises(DomainError):
        ExperimentConfig(bootstrap=5)
    assert ExperimentConfig().to_dict()["library_version"]


def test_sub_seed():
    assert sub_seed(1, 2, 3) == sub_seed(1, 2, 3)
    assert len({sub_seed(1, 0, 64), sub_seed(1, 0, 128), sub_seed(1, 1, 64), sub_seed(2, 0, 64)}) == 4


def test_bootstrap_se_gaussian():
    x = np.random.default_rng(0).standard_normal((4000, 1))
    se = bootstrap_variance_se(x, 200, 1)
    assert se[0] == pytest.approx(math.sqrt(2 / 4000), rel=0.2)


def test_corr_offdiag():
    c = np.array([[4.0, 1.0], [1.0, 1.0]])
    assert corr_offdiag_max(c) == pytest.approx(0.5)


def test_strictly_decreasing():
    assert strictly_decreasing([3, 2, 1]) and not strictly_decreasing([3, 3, 1])


def test_mc_outputs(mc_run):
    cfg, reports = mc_run
    assert [r.n for r in reports] == [64, 128]
    for r in reports:
        assert r.error is None
        assert r.scores.shape == (200, 9)
        assert set(r.to_json()) == REPORT_KEYS
        assert np.allclose(r.empirical_cov, np.cov(r.scores[:, 6:9], rowvar=False))
        saved = json.loads((cfg.out_dir / f"report_n{r.n}.json").read_text())
        assert set(saved) == REPORT_KEYS
        assert saved["config"]["n"] == r.n
        with open(cfg.out_dir / f"scores_n{r.n}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == SCORE_HEADER and len(rows) == 201
    # z-scores should be of order one with a correct finite-n covariance
    assert np.all(np.abs(np.concatenate([r.per_component_z for r in reports])) < 5)
    assert diagonal_gaps(reports).shape == (2, 3)


def test_mc_deterministic(mc_run, tmp_path):
    cfg, reports = mc_run
    again = mc_central_sequence(small_cfg(tmp_path), n_values=(64,))
    a, b = reports[0].to_json(), again[0].to_json()
    a.pop("runtime_seconds")
    b.pop("runtime_seconds")
    assert a["config"] == b["config"]
    assert a["opf_ratios"] == b["opf_ratios"]
    for k in ("empirical_cov", "per_component_z"):
        assert np.array_equal(a[k], b[k])
    assert (cfg.out_dir / "scores_n64.csv").read_text() == (tmp_path / "scores_n64.csv").read_text()


def test_mc_requirements():
    with pytest.raises(RegimeError):
        mc_central_sequence(small_cfg(theta=ModelParams(1.0, 0.6, 1.0)))
    with pytest.raises(DomainError):
        mc_central_sequence(small_cfg(replications=50))


def test_raw_vs_projected(mc_run):
    cfg, reports = mc_run
    out = raw_vs_projected(cfg, reports)
    assert len(out["per_n"]) == 2
    for row in out["per_n"]:
        assert abs(row["corr_S_sigma_S_H"]) > 0.4
        assert abs(row["corr_S_sigma_R_H_perp"]) < abs(row["corr_S_sigma_S_H"]) / 2
    assert (cfg.out_dir / "raw_vs_projected.json").exists()


def test_pairwise_clouds(mc_run):
    cfg, reports = mc_run
    out = pairwise_clouds(cfg, reports)
    for block in out["per_n"]:
        assert block["samples"] == 200
        assert len(block["pairs"]) == 3
        for pair in block["pairs"]:
            zs = [e["z"] for e in pair["ellipses"]]
            assert zs == list(ELLIPSE_LEVELS)
            first, last = pair["ellipses"][0]["semi_axes"], pair["ellipses"][-1]["semi_axes"]
            assert last[0] / first[0] == pytest.approx(2.5)
            assert last[1] / first[1] == pytest.approx(2.5)
    with open(cfg.out_dir / "xi_cloud_n128.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["rep", "xi1", "xi2", "xi3"] and len(rows) == 201


def test_lan_study_small(tmp_path):
    cfg = small_cfg(tmp_path, h_list=[(0.5, 0.0, 0.5), (0.0, 0.0, 0.0)])
    out = lan_remainder_study(cfg, draws=30, norms=False)
    assert len(out["results"]) == 4
    zero = [e for e in out["results"] if e["h"] == [0.0, 0.0, 0.0]]
    assert all(e["median_abs_remainder"] == 0 for e in zero)
    for e in out["results"]:
        assert e["half_tr_s1_sq"] == pytest.approx(e["quadratic_term"], rel=1e-10, abs=1e-15)
    saved = json.loads((tmp_path / "lan_remainder.json").read_text())
    assert "remainders" not in saved["results"][0]


def test_lan_study_skips_out_of_domain(tmp_path):
    cfg = small_cfg(None, h_list=[(0.0, 1e4, 0.0)], n_grid=(64,))
    out = lan_remainder_study(cfg, draws=5, norms=False)
    assert "skipped" in out["results"][0]


def test_regime_sweep_gate():
    with pytest.raises(RegimeError):
        regime_sweep(small_cfg())


def test_regime_sweep_small(tmp_path):
    cfg = small_cfg(tmp_path, theta=ModelParams(1.0, 0.6, 1.0))
    out = regime_sweep(cfg, with_constants=False)
    assert out["regime"] and len(out["per_n"]) == 2
    assert out["trends"]["block_det_positive"]
    assert (tmp_path / "regime_sweep.json").exists()
