"""Gibbs posterior against the GMM point estimate.

On small cells the griddy Gibbs sampler gives the full-likelihood posterior
of rho; the GMM estimate should agree with its mean to about 0.05.

    python3 demos/gibbs_check.py
"""
import numpy as np

from spatial_exit.gibbs import GibbsConfig, compare_estimators, gibbs_fit
from spatial_exit.synthetic import synthetic_cell

BETA = [0.0, 1.5, -1.0]

c = synthetic_cell(20, 10, 0.3, BETA, seed=3004, block_sd=1.5)
d = gibbs_fit(c.X, c.y, c.W, GibbsConfig(n_burn=500, n_keep=2000, seed=4))
print(f"posterior rho {d.rho_mean:.3f} (sd {d.rho_sd:.3f}), ESS {d.ess['rho']:.0f}")
print("posterior beta", np.round(d.beta_mean, 3), " sd", np.round(d.beta_sd, 3))
q = np.quantile(d.rho_draws, [0.05, 0.5, 0.95])
print("rho 5/50/95%  ", np.round(q, 3))

rep = compare_estimators(c.X, c.y, c.W, GibbsConfig(n_burn=500, n_keep=2000, seed=4))
print(f"GMM rho {rep['gmm']['rho_hat']:.3f}, gap {rep['rho_gap']:.3f} -> {rep['status']}")
