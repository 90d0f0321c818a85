"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
from pathlib import Path
import time

import mpmath
import numpy as np
import pytest
from scipy import stats

from hmmdeconv import noise as N
from hmmdeconv.cli import main
from hmmdeconv.estimate1d import (PenaltyConfig, basis_matrix, coefficients_1d, data_window,
                                  fit_1d, kernel_matrix, model_collection_1d)
from hmmdeconv.estimate2d import consecutive_pairs, fit_2d, model_collection_2d
from hmmdeconv.fourier import basis_square_sum, sinc_basis
from hmmdeconv.risk import mc_risk_study, medians_by_n, rate_fit, study_B
from hmmdeconv.simulate import AR1Chain, CIRChain, add_noise, simulate_sv
from hmmdeconv.transition import floor_from_model, surrogate_bound

AR1 = AR1Chain(0.5, 0.0, 1.0)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def test_criterion_01_basis_identity(report):
    t0 = time.perf_counter()
    xs = np.random.default_rng(1).uniform(-50, 50, 100)
    worst = max(abs(basis_square_sum(x, m)[0] - m) for m in (1, 2, 8, 32) for x in xs)
    elapsed = time.perf_counter() - t0
    assert report(1, worst <= 1e-6 and elapsed < 1,
                  f"max |sum phi^2 - m| = {worst:.3g}, {elapsed:.2f} s")


def test_criterion_02_kernel_unbiasedness(report):
    t0 = time.perf_counter()
    n, m = 10 ** 5, 4
    rng = np.random.default_rng(2)
    x = rng.standard_normal(n)
    y = x + rng.laplace(size=n)
    v = kernel_matrix(y, m, N.laplace(), (0, 0))[:, 0]
    t = sinc_basis(m, 0, x)
    gap = abs(v.mean() - t.mean())
    se = (v - t).std(ddof=1) / math.sqrt(n)
    elapsed = time.perf_counter() - t0
    assert report(2, gap <= 4 * se and elapsed < 10,
                  f"|mean v_t(Y) - mean t(X)| = {gap:.3g}, 4 SE = {4 * se:.3g}, {elapsed:.2f} s")


def test_criterion_03_identity_degeneracy(report):
    t0 = time.perf_counter()
    y = np.random.default_rng(3).normal(0.2, 1.5, 2000)
    worst = 0.0
    for m in (2, 8):
        window = data_window(y, m)
        a = coefficients_1d(y, m, N.identity(), window)
        worst = max(worst, np.abs(a - basis_matrix(m, window, y).mean(axis=0)).max())
    elapsed = time.perf_counter() - t0
    assert report(3, worst <= 1e-8 and elapsed < 5, f"max coefficient gap = {worst:.3g}, {elapsed:.2f} s")


def test_criterion_04_contrast_identities_and_norm_bound(report):
    noises = [N.identity(), N.laplace(), N.gaussian(0.5), N.log_chisq()]
    fits, bad = 0, []
    for noise in noises:
        for n in (1000, 5000):
            y = add_noise(AR1.sample(n, 4, n), noise, 4, n)
            try:
                models = model_collection_1d(n, noise).models
            except ValueError:
                models = []
            for m in models:
                est = fit_1d(y[:n], m, noise)
                fits += 1
                if est.contrast_value != -float(np.sum(est.coeffs ** 2)):
                    bad.append((noise.kind, n, m, "gamma_n"))
            try:
                models2 = model_collection_2d(n, noise)
            except ValueError:
                models2 = []
            for m in models2:
                est = fit_2d(consecutive_pairs(y), m, noise)
                fits += 1
                if est.contrast_value != -float(np.sum(est.coeffs ** 2)):
                    bad.append((noise.kind, n, m, "Gamma_n"))
                if est.norm_sq > N.delta_m(noise, m) ** 2:
                    bad.append((noise.kind, n, m, "norm bound"))
    assert report(4, not bad and fits > 0, f"{fits} fitted models, violations: {bad or 'none'}")


def test_criterion_05_delta_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    mpmath.mp.dps = 40
    for m in range(1, 65):
        a = mpmath.pi * m
        ref = (a + 2 * a ** 3 / 3 + a ** 5 / 5) / mpmath.pi
        worst = max(worst, abs(N.delta_m(N.laplace(), m) / float(ref) - 1))
    exact = all(N.delta_m(N.identity(), m) == m for m in range(1, 65))
    elapsed = time.perf_counter() - t0
    assert report(5, worst <= 1e-10 and exact and elapsed < 1,
                  f"max relative error {worst:.3g}, identity exact: {exact}, {elapsed:.2f} s")


def test_criterion_06_penalty_exponents(report):
    got = [N.penalty_exponents(s) for s in (0, 0.5, 1, 2)]
    want = [(0, 0), (0.25, 0), (1, 1), (2, 2)]
    assert report(6, got == want, f"{got}")


def test_criterion_07_laplace_rate(report):
    t0 = time.perf_counter()
    records = mc_risk_study(AR1, N.laplace(), PenaltyConfig(), (500, 2000, 8000), 50,
                            base_seed=2024, threads=4)
    med = medians_by_n(records, "mise_f")
    fit = rate_fit(records, "mise_f")
    vals = [med[n] for n in (500, 2000, 8000)]
    decreasing = vals[0] > vals[1] > vals[2]
    elapsed = time.perf_counter() - t0
    detail = (f"medians {', '.join(f'{v:.4g}' for v in vals)}, slope {fit.slope:.3f}, "
              f"{elapsed:.0f} s")
    assert report(7, decreasing and fit.slope <= -0.6 and elapsed <= 600, detail)


def test_criterion_08_gaussian_rate(report):
    t0 = time.perf_counter()
    records = mc_risk_study(AR1, N.gaussian(0.5), PenaltyConfig(), (1000, 4000, 16000), 20,
                            base_seed=2024, threads=4)
    fits = {k: rate_fit(records, k) for k in ("mise_pi", "mise_F", "mise_f")}
    slope = fits["mise_pi"].slope
    elapsed = time.perf_counter() - t0
    detail = (f"transition slope {slope:.3f} vs -2/3; joint {fits['mise_F'].slope:.3f}, "
              f"marginal {fits['mise_f'].slope:.3f}; {elapsed:.0f} s")
    assert report(8, abs(slope + 2 / 3) <= 0.25 and elapsed <= 900, detail)


def test_criterion_09_transition_surrogate(report):
    t0 = time.perf_counter()
    noise = N.laplace()
    B = study_B(AR1, noise, 2024)
    records = mc_risk_study(AR1, noise, PenaltyConfig(), (8000,), 20, base_seed=2024,
                            threads=4, B=B)
    med = {k: medians_by_n(records, k)[8000] for k in ("mise_pi", "mise_F", "mise_f")}
    floor = floor_from_model(AR1, B)
    bound = surrogate_bound(med["mise_F"], med["mise_f"], floor)
    elapsed = time.perf_counter() - t0
    detail = f"median Pi risk {med['mise_pi']:.4g} <= bound {bound:.4g}, {elapsed:.0f} s"
    assert report(9, med["mise_pi"] <= bound and elapsed <= 600, detail)


def test_criterion_10_simulator_ground_truth(report):
    t0 = time.perf_counter()
    n = 10 ** 5
    checks = {}
    x = AR1Chain(0.5, 1.0, 1.0).sample(n, 10)
    se_mean = x.std() / math.sqrt(x.size) * math.sqrt(1.5 / 0.5)
    checks["ar1 mean"] = abs(x.mean() - 2) <= 4 * se_mean
    se_var = (4 / 3) * math.sqrt(2 / x.size * 1.25 / 0.75)
    checks["ar1 variance"] = abs(x.var() - 4 / 3) <= 4 * se_var

    cir = CIRChain(-1.0, 2, 1.0, 1.0)
    r = cir.sample(n, 11)
    rho = math.exp(-2.0)
    checks["cir mean"] = abs(r.mean() - 1) <= 4 * r.std() / math.sqrt(r.size) * math.sqrt((1 + rho) / (1 - rho))
    # Exp(1) has variance 1 and fourth central moment 9; squares decorrelate at rho^2
    se_v = math.sqrt(8 / r.size * (1 + rho ** 2) / (1 - rho ** 2))
    checks["cir variance"] = abs(r.var() - 1) <= 4 * se_v
    thin = r[::10]
    checks["cir KS"] = stats.kstest(thin, stats.expon.cdf).pvalue > 0.01
    resid = r[1:] - cir.conditional_mean(r[:-1])
    checks["cir conditional mean"] = abs(resid.mean()) <= 4 * resid.std() / math.sqrt(resid.size)
    z = resid * (r[:-1] - r[:-1].mean())
    checks["cir conditional slope"] = abs(z.mean()) <= 4 * z.std() / math.sqrt(z.size)

    xs, ys = simulate_sv(-0.5, 0.8, 1.0, n, 12)
    eps = ys - xs
    ok = True
    for u in (1.0, 3.0, 5.0):
        w = np.exp(-1j * u * eps)
        ref = N.log_chisq_cf(u)
        ok &= abs(w.real.mean() - ref.real) <= 4 * w.real.std() / math.sqrt(n)
        ok &= abs(w.imag.mean() - ref.imag) <= 4 * w.imag.std() / math.sqrt(n)
    checks["sv noise cf"] = bool(ok)
    elapsed = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    assert report(10, not failed and elapsed < 60,
                  f"{len(checks)} checks, failed: {failed or 'none'}, {elapsed:.1f} s")


CLI_CFG = """\
chain.kind = ar1
chain.alpha = 0.5
noise.kind = laplace
simulate.n = 3000
simulate.seed = 9
study.n_list = 2000, 4000, 8000
study.replicates = 4
study.base_seed = 9
study.grid_points = 256
calibrate.n = 2000
calibrate.replicates = 6
transition.grid_points = 41
"""


def _tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(Path(d).rglob("*")) if p.is_file()}


def test_criterion_11_cli_determinism(tmp_path, report):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CLI_CFG)
    same = {}
    for command in ("simulate", "estimate", "risk-study", "calibrate-penalty"):
        trees = []
        for run, threads in enumerate(("1", "1", "4")):
            out = tmp_path / f"{command}-{run}"
            code = main([command, "--config", str(cfg), "--out", str(out), "--threads", threads])
            assert code == 0, command
            trees.append(_tree(out))
        same[command] = bool(trees[0]) and trees[0] == trees[1] == trees[2]
    failed = [c for c, ok in same.items() if not ok]
    assert report(11, not failed, f"byte-identical reruns (1, 1, 4 threads); differing: {failed or 'none'}")
