"""Probit MLE and the reduced form of the spatial lag model.

Standard probit is the rho = 0 member of the family; the reduced form
X* = (I - rho W)^-1 X with Sigma = B B' is solved block by block.

    python3 demos/probit_and_reduced_form.py
"""
import numpy as np
from scipy import special

from spatial_exit.errors import PerfectSeparation
from spatial_exit.model import heteroskedastic_probabilities, reduced_form
from spatial_exit.probit import probit_fit
from spatial_exit.synthetic import synthetic_cell
from spatial_exit.weights import weights_from_dense

# intercept-only: beta = Phi^-1(ybar)
y = np.r_[np.ones(30), np.zeros(10)]
fit = probit_fit(np.ones((40, 1)), y)
print("intercept-only  %.10f  Phi^-1(0.75) = %.10f" % (fit.beta_hat[0], special.ndtri(0.75)))

# a cell with no spatial dependence
c = synthetic_cell(10, 50, 0.0, [-0.3, 0.8, -0.6], seed=2)
fit = probit_fit(c.X, c.y)
print("probit beta     ", np.round(fit.beta_hat, 4), " se", np.round(fit.se, 4),
      f" ({fit.iterations} Newton steps)")

# separated outcomes have no finite MLE
X = np.column_stack([np.ones(6), np.arange(6.0)])
try:
    probit_fit(X, np.r_[0, 0, 0, 1, 1, 1.0])
except PerfectSeparation as exc:
    print("separation      ", exc)

# two mutual neighbours: (I - 0.5 W)^-1 = [[1, .5], [.5, 1]] / 0.75
W = weights_from_dense([[0.0, 1.0], [1.0, 0.0]])
rf = reduced_form(W, 0.5, np.eye(2))
print("\nB =\n", rf.x_star)
print("Sigma =\n", rf.sigma.toarray())

# dependence inflates the latent variance, flattening the probabilities
for rho in (0.0, 0.3, 0.6):
    P = heteroskedastic_probabilities(reduced_form(c.W, rho, c.X), c.beta)
    print(f"rho={rho:.1f}  mean P={P.mean():.4f}  sd P={P.std():.4f}")
