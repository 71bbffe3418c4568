"""
Standard probit by maximum likelihood.

All tail quantities go through ``log_ndtr`` so that neither the
log-likelihood nor the inverse Mills ratio underflow for large indices.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import AllSameOutcome, PerfectSeparation, RankDeficient

__all__ = ["ProbitFit", "norm_logpdf", "mills", "probit_loglik",
           "probit_score", "probit_hessian", "probit_fit",
           "separating_direction"]

_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
SEPARATION_BOUND = 50.0


def norm_logpdf(z):
    return -0.5 * np.square(z) - _LOG_SQRT_2PI


def mills(z):
    """Inverse Mills ratio ``phi(z) / Phi(z)``, accurate in both tails."""
    z = np.asarray(z, dtype=float)
    return np.exp(norm_logpdf(z) - special.log_ndtr(z))


def probit_loglik(beta, X, y):
    q = 2.0 * np.asarray(y, dtype=float) - 1.0
    return float(np.sum(special.log_ndtr(q * (X @ beta))))


def probit_score(beta, X, y):
    q = 2.0 * np.asarray(y, dtype=float) - 1.0
    return X.T @ (q * mills(q * (X @ beta)))


def probit_hessian(beta, X, y):
    q = 2.0 * np.asarray(y, dtype=float) - 1.0
    z = q * (X @ beta)
    lam = mills(z)
    w = lam * (lam + z)
    return -(X * w[:, None]).T @ X


def separating_direction(X, y):
    """A direction ``b`` with ``q_i x_i'b >= 0`` for all ``i`` and some ``> 0``.

    Found by the linear program ``max sum q_i x_i'b`` over the unit box;
    its optimum is positive exactly when the data are completely or
    quasi-completely separated, in which case no finite MLE exists.
    Returns ``None`` otherwise.
    """
    A = (2.0 * np.asarray(y, dtype=float) - 1.0)[:, None] * np.asarray(X, dtype=float)
    res = optimize.linprog(-A.sum(axis=0), A_ub=-A, b_ub=np.zeros(len(A)),
                           bounds=[(-1, 1)] * A.shape[1], method="highs")
    if res.status != 0:
        return None
    if -res.fun > 1e-9 * max(1.0, np.abs(A).sum()):
        return res.x
    return None


@dataclass(frozen=True)
class ProbitFit:
    beta_hat: np.ndarray
    vcov: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    loglik_path: tuple = ()

    @property
    def se(self):
        return np.sqrt(np.diag(self.vcov))


def probit_fit(X, y, start=None, max_iter=100, score_tol=1e-8,
               loglik_tol=1e-12):
    """Newton-Raphson with step halving.

    Stops when ``max|score| < score_tol`` or the log-likelihood gain falls
    below ``loglik_tol``.  ``vcov`` is the inverse negative Hessian at the
    optimum.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError("X and y disagree in length")
    if np.all(y == y[0]):
        raise AllSameOutcome("y has a single outcome class")
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficient("X is not of full column rank")
    direction = separating_direction(X, y)
    if direction is not None:
        cols = np.flatnonzero(np.abs(direction) > 1e-9).tolist()
        raise PerfectSeparation(
            f"outcomes are separated along columns {cols}; the likelihood "
            "increases without bound")

    beta = np.zeros(k) if start is None else np.array(start, dtype=float)
    ll = probit_loglik(beta, X, y)
    path = [ll]
    converged = False
    stalls = 0
    it = 0
    while it < max_iter:
        g = probit_score(beta, X, y)
        if np.max(np.abs(g)) < score_tol:
            converged = True
            break
        it += 1
        try:
            step = np.linalg.solve(probit_hessian(beta, X, y), -g)
        except np.linalg.LinAlgError:
            raise PerfectSeparation("Hessian became singular") from None
        # slack for rounding in ll once the optimum is reached
        slack = 1e-13 * max(1.0, abs(ll))
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            ll_new = probit_loglik(cand, X, y)
            if ll_new >= ll - slack:
                break
            t *= 0.5
        else:
            break
        gain = ll_new - ll
        beta, ll = cand, ll_new
        path.append(ll)
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise PerfectSeparation(
                f"|beta| exceeded {SEPARATION_BOUND} with monotone likelihood")
        # two successive negligible gains: flat likelihood
        stalls = stalls + 1 if gain < loglik_tol else 0
        if stalls >= 2:
            converged = True
            break

    vcov = np.linalg.inv(-probit_hessian(beta, X, y))
    vcov = 0.5 * (vcov + vcov.T)
    return ProbitFit(beta, vcov, ll, it, converged, tuple(path))
