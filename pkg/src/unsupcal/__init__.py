"""Unsupervised calibration of detection scores to log-likelihood-ratios.

Scores are modeled as a two-component Gaussian mixture with a shared
variance. Fitting it without labels gives an affine score-to-LLR map;
a Laplace approximation of the parameter posterior measures how much the
missing labels cost, and DCF tools measure the resulting calibration.
"""

from .model import (AffineCal, CalParams, FitError, GmmParams, class_likelihood,
                    class_log_likelihood, d_prime, fit_supervised, plugin_llr,
                    theoretical_eer, to_affine)
from .scores import LabeledScoreSet, ScoreSet, load_scores, summary_stats, write_scores
from .em import (DegenerateFitError, EmConfig, EmTrace, e_step, fit_constrained,
                 fit_unsupervised, gmm_log_likelihood, m_step)
from .laplace import (ErrorBars, GaussianPosterior, LaplaceError, error_bars, hessian,
                      laplace_fit, log_joint, marginalize_pi1, params_to_theta,
                      theta_to_params)
from .predictive import (QuadratureSpec, expected_log_plugin_lr, kl_decomposition,
                         posterior_odds, predictive_log_lr)
from .dcf import bayes_threshold, dcf_report, empirical_eer, min_dcf, norm_dcf
from .surface import SurfaceGrid, explore, peak_report
from .synth import SynthSpec, drop_labels, generate

__version__ = "0.1.0"
