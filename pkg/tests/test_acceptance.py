"""Acceptance suite: one group of checks per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary ends
with one PASS/FAIL line per criterion. Runtime is roughly fifteen minutes,
dominated by the 33x33 profile-likelihood grid of criterion 7.
"""

import math

import numpy as np
import pytest

from unsupcal import (CalParams, EmConfig, GmmParams, LabeledScoreSet, QuadratureSpec,
                      SynthSpec, drop_labels, e_step, empirical_eer, error_bars, explore,
                      fit_supervised, fit_unsupervised, generate, hessian, kl_decomposition,
                      laplace_fit, m_step, marginalize_pi1, min_dcf, norm_dcf, params_to_theta,
                      peak_report, plugin_llr, predictive_log_lr, theoretical_eer, to_affine)
from unsupcal.model import d_prime
from unsupcal.surface import peak_regions

from .conftest import ABC_TRUTH, DAC_TRUTH, normal_cdf

OPERATING_POINTS = (0.001, 0.01, 0.1, 0.5)


def crit(num, title):
    return pytest.mark.criterion(num, title)


def _show(label, value, limit, ok):
    print(f"{'PASS' if ok else 'FAIL'} {label}: {value:.6g} (limit {limit:g})")
    return ok


# Reference parameter table: mu1, mu2, sigma, d', pi1, and the printed
# (scale, offset) of the matching affine calibration.
ROWS = {
    "ABC super": (8.2, -5.9, 2.9, 4.9, 6.6e-4, 1.7, -2.0),
    "ABC unsup": (9.9, -5.9, 2.9, 5.5, 5.6e-4, 1.9, -3.8),
    "ABC unsup*": (9.6, -5.9, 2.9, 5.4, 5.1e-5, 1.9, -3.5),
    "DAC super": (34.0, -169.3, 48.4, 4.2, 3.9e-2, 0.087, 5.9),
    "DAC unsup": (45.9, -168.7, 48.8, 4.4, 3.4e-2, 0.090, 5.5),
    "DAC unsup*": (72.3, -169.3, 48.0, 5.0, 1.4e-5, 0.105, 5.1),
}

# rows whose printed sigma is too coarsely rounded to meet the tolerance;
# see the project notes for the arithmetic
KNOWN_ROUNDING = {
    "scale": {"ABC unsup*"},
    "dprime": {"ABC unsup", "ABC unsup*"},
}


# -- criterion 1 -------------------------------------------------------------

@crit(1, "parameter table reproduces the affine table")
@pytest.mark.parametrize("row", list(ROWS))
def test_c1_affine_from_parameters(row):
    mu1, mu2, sigma, _, _, scale, offset = ROWS[row]
    a = to_affine(CalParams(mu1, mu2, sigma ** 2))
    tol_scale = 0.05 if row.startswith("ABC") else 0.002
    ok1 = _show(f"{row} scale", abs(a.scale - scale), tol_scale, abs(a.scale - scale) <= tol_scale)
    ok2 = _show(f"{row} offset", abs(a.offset - offset), 0.15, abs(a.offset - offset) <= 0.15)
    assert ok1 and ok2


@crit(1, "parameter table reproduces the affine table")
def test_c1_rounding_explains_misses():
    """Where the face values miss, some input within its printed rounding
    interval reproduces the printed scale."""
    for row in KNOWN_ROUNDING["scale"]:
        mu1, mu2, sigma, _, _, scale, _ = ROWS[row]
        lo = (mu1 - mu2 - 0.1) / (sigma + 0.05) ** 2
        hi = (mu1 - mu2 + 0.1) / (sigma - 0.05) ** 2
        assert lo <= scale + 0.05 and hi >= scale - 0.05


# -- criterion 2 -------------------------------------------------------------

@crit(2, "d' column equals (mu1 - mu2) / sigma")
@pytest.mark.parametrize("row", list(ROWS))
def test_c2_dprime_column(row):
    mu1, mu2, sigma, dp, *_ = ROWS[row]
    err = abs((mu1 - mu2) / sigma - dp)
    assert _show(f"{row} d'", err, 0.05, err <= 0.05)


@crit(2, "d' column equals (mu1 - mu2) / sigma")
def test_c2_rounding_explains_misses():
    for row in KNOWN_ROUNDING["dprime"]:
        mu1, mu2, sigma, dp, *_ = ROWS[row]
        lo = (mu1 - mu2 - 0.1) / (sigma + 0.05)
        hi = (mu1 - mu2 + 0.1) / (sigma - 0.05)
        assert lo <= dp <= hi


# -- criterion 3 -------------------------------------------------------------

@crit(3, "empirical EER follows Phi(-d'/2)")
@pytest.mark.parametrize("dp", [2.0, 4.2, 5.5])
def test_c3_eer_law(dp):
    truth = GmmParams.make(dp / 2, -dp / 2, 1.0, 0.3)
    d = generate(SynthSpec(truth, 10 ** 6, seed=int(dp * 10)))
    eer = empirical_eer(plugin_llr(d.scores, truth.cal), d.labels)
    expected = normal_cdf(-dp / 2)
    assert theoretical_eer(dp) == pytest.approx(expected, rel=1e-12)
    assert _show(f"EER d'={dp}", abs(eer - expected), 0.002, abs(eer - expected) <= 0.002)


# -- criterion 4 -------------------------------------------------------------

SETTINGS = {"DAC": (DAC_TRUTH, 401), "ABC": (ABC_TRUTH, 403)}


@pytest.fixture(scope="module")
def recovered(dac_1e6, abc_1e6):
    out = {}
    for name, data in (("DAC", dac_1e6), ("ABC", abc_1e6)):
        trace = fit_unsupervised(drop_labels(data))
        out[name] = (data, trace, laplace_fit(data, trace))
    return out


@crit(4, "unsupervised recovery and calibration quality")
@pytest.mark.parametrize("name", list(SETTINGS))
def test_c4_parameters_within_error_bars(recovered, name):
    truth, _ = SETTINGS[name]
    _, trace, post = recovered[name]
    bars = error_bars(post)
    z = np.abs(params_to_theta(trace.params) - params_to_theta(truth)) / bars.values
    for k, zk in zip(bars.names, z):
        _show(f"{name} {k} |error| / bar", zk, 5, zk <= 5)
    assert np.all(z <= 5)


@crit(4, "unsupervised recovery and calibration quality")
@pytest.mark.parametrize("name", list(SETTINGS))
def test_c4_heldout_dcf(recovered, name):
    truth, seed = SETTINGS[name]
    _, trace, _ = recovered[name]
    # class-conditional error rates do not depend on the held-out mixing
    # proportion, so a balanced set keeps both rates precise
    held = generate(SynthSpec(GmmParams(truth.cal, 0.5), 10 ** 6, seed=seed))
    llr = plugin_llr(held.scores, trace.params.cal)
    ok = True
    for p in OPERATING_POINTS:
        gap = norm_dcf(llr, held.labels, p).norm_dcf - min_dcf(llr, held.labels, p)
        ok &= _show(f"{name} normDCF - minDCF at {p}", gap, 0.03, gap <= 0.03)
    assert ok


# -- criterion 5 -------------------------------------------------------------

@crit(5, "Laplace approximation is valid")
def test_c5_hessian_against_finite_differences(dac_1e5, dac_fit_1e5):
    _, post = dac_fit_1e5
    Hc = hessian(post.mean, dac_1e5)
    Hf = hessian(post.mean, dac_1e5, method="fd", check=False)
    rel = float(np.max(np.abs(Hc - Hf) / np.abs(Hf)))
    assert _show("Hessian relative difference", rel, 1e-3, rel <= 1e-3)


@crit(5, "Laplace approximation is valid")
def test_c5_covariance_positive_definite(dac_fit_1e5):
    _, post = dac_fit_1e5
    lo = float(np.min(np.linalg.eigvalsh(post.cov)))
    np.linalg.cholesky(post.cov)
    assert _show("smallest covariance eigenvalue", lo, 0, lo > 0)


@crit(5, "Laplace approximation is valid")
def test_c5_error_bars_halve(dac_1e5, dac_fit_1e5):
    _, post = dac_fit_1e5
    big = drop_labels(generate(SynthSpec(DAC_TRUTH, 4 * 10 ** 5, seed=104)))
    post4 = laplace_fit(big, fit_unsupervised(big))
    ratio = error_bars(post4).values / error_bars(post).values
    for k, r in zip(error_bars(post).names, ratio):
        _show(f"bar ratio {k}", r, 0.6, 0.4 <= r <= 0.6)
    assert np.all((ratio >= 0.4) & (ratio <= 0.6))


# -- criterion 6 -------------------------------------------------------------

@crit(6, "plug-in and predictive log-LR agree")
def test_c6_plugin_matches_predictive(dac_fit_1e5):
    _, post = dac_fit_1e5
    post3 = marginalize_pi1(post)
    m = CalParams(post3.mean[0], post3.mean[1], math.exp(post3.mean[2]))
    s = np.linspace(m.mu2 - 3 * m.sigma, m.mu1 + 3 * m.sigma, 401)
    gap = float(np.max(np.abs(predictive_log_lr(s, post3) - plugin_llr(s, m))))
    assert _show("max |predictive - plug-in|", gap, 0.05, gap <= 0.05)


@crit(6, "plug-in and predictive log-LR agree")
def test_c6_decomposition_residual(dac_1e5, dac_fit_1e5):
    _, post = dac_fit_1e5
    m = CalParams(post.mean[0], post.mean[1], math.exp(post.mean[2]))
    probes = np.linspace(m.mu2 - 3 * m.sigma, m.mu1 + 3 * m.sigma, 20)
    worst = max(abs(kl_decomposition(x, dac_1e5, post).residual) for x in probes)
    assert _show("max decomposition residual", worst, 0.02, worst <= 0.02)


# -- criterion 7 -------------------------------------------------------------

@pytest.fixture(scope="module")
def abc_surface(abc_1e6):
    return explore(drop_labels(abc_1e6))


@crit(7, "profile-likelihood surface has one dominant peak")
def test_c7_single_region_with_truth(abc_surface):
    g = abc_surface
    assert g.complete
    labels, n = peak_regions(g)
    ti = int(np.argmin(np.abs(g.d_axis - d_prime(ABC_TRUTH.cal))))
    tj = int(np.argmin(np.abs(g.logit_axis - math.log(ABC_TRUTH.pi1 / (1 - ABC_TRUTH.pi1)))))
    print(peak_report(g))
    _show("regions above 0.01", n, 1, n == 1)
    assert n == 1 and labels[ti, tj] == 1


@crit(7, "profile-likelihood surface has one dominant peak")
def test_c7_profile_dominance(abc_surface, recovered, abc_1e6):
    ll = recovered["ABC"][1].log_likelihood
    excess = float(np.max(abc_surface.log_lik) - ll)
    slack = 1e-6 * abc_1e6.T
    assert _show("max cell excess over the unconstrained fit", excess, slack, excess <= slack)


# -- criterion 8 -------------------------------------------------------------

@crit(8, "DCF properties on random inputs")
def test_c8_dcf_fuzz():
    rng = np.random.default_rng(8)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(2, 300))
        llr = rng.normal(rng.normal(scale=3), rng.uniform(0.1, 10), size=n)
        lab = rng.random(n) < rng.uniform(0.05, 0.95)
        lab[0], lab[1] = True, False
        p = int(rng.integers(1, 1024)) / 1024   # dyadic: 1 - (1 - p) == p
        act = norm_dcf(llr, lab, p).norm_dcf
        mn = min_dcf(llr, lab, p)
        ok = (0.0 <= mn <= act
              and norm_dcf(np.zeros(n), lab, p).norm_dcf == 1.0
              and norm_dcf(-llr, ~lab, 1 - p).norm_dcf == act)
        bad += not ok
    assert _show("fuzz cases violating a property", bad, 0, bad == 0)


# -- criterion 9 -------------------------------------------------------------

@crit(9, "EM properties")
def test_c9_monotone_per_restart(dac_1e5, recovered):
    worst = 0.0
    for trace in (fit_unsupervised(dac_1e5), recovered["ABC"][1]):
        for res in trace.restarts:
            worst = min(worst, float(np.min(np.diff(res.log_likelihoods), initial=0.0)))
    assert _show("largest log-likelihood decrease", -worst, 1e-8, worst >= -1e-8)


@crit(9, "EM properties")
def test_c9_supervised_consistency(dac_1e5):
    sup = fit_supervised(dac_1e5)
    em = m_step(dac_1e5.scores, dac_1e5.labels.astype(float), pi1_clip=0.0)
    for k in ("mu1", "mu2", "sigma2", "pi1"):
        assert getattr(em, k) == pytest.approx(getattr(sup, k), rel=1e-12)


@crit(9, "EM properties")
@pytest.mark.parametrize("a,b", [(3.0, -50.0), (0.02, 7.0)])
def test_c9_affine_equivariance(dac_1e5, a, b):
    x = dac_1e5.scores
    m0 = fit_unsupervised(x).params
    m1 = fit_unsupervised(a * x + b).params
    assert m1.mu1 == pytest.approx(a * m0.mu1 + b, rel=1e-7)
    assert m1.mu2 == pytest.approx(a * m0.mu2 + b, rel=1e-7)
    assert m1.sigma2 == pytest.approx(a * a * m0.sigma2, rel=1e-7)
    assert m1.pi1 == pytest.approx(m0.pi1, rel=1e-7)
    np.testing.assert_allclose(plugin_llr(a * x + b, m1.cal), plugin_llr(x, m0.cal), atol=1e-6)
