"""
How uncertain is an unsupervised calibration?
=============================================

A Laplace approximation around the EM solution gives a Gaussian posterior
over (mu1, mu2, log sigma^2, log pi1). Its standard deviations are the
error-bars; integrating the class likelihoods over it gives the predictive
log-likelihood-ratio, which we compare with the plug-in value.
"""

import numpy as np

from unsupcal import (GmmParams, SynthSpec, drop_labels, error_bars, expected_log_plugin_lr,
                      fit_unsupervised, generate, laplace_fit, marginalize_pi1, plugin_llr,
                      predictive_log_lr)

truth = GmmParams.make(mu1=45.9, mu2=-168.7, sigma2=48.8 ** 2, pi1=0.034)

for T in (10_000, 100_000, 400_000):
    s = drop_labels(generate(SynthSpec(truth, T, seed=T)))
    trace = fit_unsupervised(s)
    post = laplace_fit(s, trace)
    bars = error_bars(post)
    print(f"T={T:>7}: " + "  ".join(f"{k}={v:.4f}" for k, v in bars.to_dict().items()))

# %%
# The error-bars shrink like 1/sqrt(T). With the largest posterior, the
# predictive and plug-in log-LRs are nearly identical over the bulk of the
# scores and drift apart only far into the tails.

post3 = marginalize_pi1(post)
cal = trace.params.cal
s_prime = np.array([-400.0, -168.7, -60.0, 0.0, 45.9, 200.0, 400.0])
pred = predictive_log_lr(s_prime, post3)
plug = plugin_llr(s_prime, cal)
mean_plug = expected_log_plugin_lr(s_prime, post3)

print("\n   s'   plug-in  predictive  E[plug-in]")
for row in zip(s_prime, plug, pred, mean_plug):
    print("{:6.1f} {:9.4f} {:11.4f} {:11.4f}".format(*row))
