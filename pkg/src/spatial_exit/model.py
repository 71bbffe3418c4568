"""
Spatial lag probit: structural model, simulator and GMM estimators.

The latent propensity follows ``Y* = rho W Y* + X beta + eps`` with
``eps ~ N(0, I)``; a firm exits when ``Y* >= 0``.  Solving out ``Y*``
gives ``P(y_i = 1) = Phi(x*_i' beta / sigma_i)`` with
``X* = (I - rho W)^-1 X`` and ``sigma_i^2`` the diagonal of
``[(I - rho W)'(I - rho W)]^-1``.

W is block diagonal (industry blocks), so every solve is done per block.

Parameter vectors inside the estimators are ordered ``(beta, rho)``.
"""

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse, special

from .errors import (DegenerateRhoGradient, NoConvergence,
                     ProbabilityUnderflow, RankDeficient, SingularSystem,
                     StepOutOfDomain)
from .probit import mills, norm_logpdf, probit_fit

__all__ = [
    "FitMethod", "ReducedForm", "LatentSample", "InstrumentMatrix",
    "SpatialFit", "reduced_form", "simulate_latent",
    "heteroskedastic_probabilities", "generalized_residuals",
    "probability_gradients", "build_instruments", "moment_conditions",
    "linearized_gmm_fit", "nl2sls_fit", "RHO_BOUND",
]

RHO_BOUND = 0.99


class FitMethod(enum.Enum):
    LINEARIZED_GMM = "LinearizedGMM"
    NL2SLS = "NL2SLS"
    GIBBS = "Gibbs"


def _lu(A):
    with warnings.catch_warnings():
        # an exactly singular pivot is reported below as SingularSystem
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(A, check_finite=True)
    d = np.abs(np.diag(lu))
    if d.min() <= np.finfo(float).eps * max(d.max(), 1.0) * len(d):
        raise SingularSystem("I - rho W is numerically singular")
    return lu, piv


def _solve_blocks(W, rho, rhs):
    """Solve ``(I - rho W) out = rhs`` block by block."""
    rhs = np.asarray(rhs, dtype=float)
    out = np.array(rhs, copy=True)
    _, multi = W.partition
    for idx, Wb in multi:
        lu = _lu(np.eye(len(idx)) - rho * Wb)
        out[idx] = linalg.lu_solve(lu, rhs[idx])
    return out


@dataclass(frozen=True)
class ReducedForm:
    """``x_star`` is (n, k); ``sigma`` is a sparse block-diagonal (n, n)."""
    x_star: np.ndarray
    sigma: sparse.csr_matrix
    sigma_diag_sqrt: np.ndarray
    rho: float = 0.0


def reduced_form(W, rho, X):
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if W.n != n:
        raise ValueError("W and X disagree in size")
    x_star = np.array(X, copy=True)
    single, multi = W.partition
    rows = [single]
    cols = [single]
    vals = [np.ones(len(single))]
    sd = np.ones(n)
    for idx, Wb in multi:
        lu = _lu(np.eye(len(idx)) - rho * Wb)
        x_star[idx] = linalg.lu_solve(lu, X[idx])
        B = linalg.lu_solve(lu, np.eye(len(idx)))
        S = B @ B.T
        S = 0.5 * (S + S.T)
        sd[idx] = np.sqrt(np.diag(S))
        ii, jj = np.meshgrid(idx, idx, indexing="ij")
        rows.append(ii.ravel())
        cols.append(jj.ravel())
        vals.append(S.ravel())
    sigma = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    return ReducedForm(x_star, sigma, sd, float(rho))


@dataclass(frozen=True)
class LatentSample:
    y_star: np.ndarray
    y: np.ndarray
    eps: np.ndarray
    seed: object
    rho_true: float
    beta_true: np.ndarray


def simulate_latent(W, rho, beta, X, sigma_eps=1.0, seed=None, eps=None):
    """Draw ``eps`` and solve the structural equation for ``Y*``.

    ``eps`` may be supplied to bypass the random draw.
    """
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    if not sigma_eps > 0:
        raise ValueError("sigma_eps must be positive")
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if eps is None:
        rng = np.random.default_rng(seed)
        eps = sigma_eps * rng.standard_normal(X.shape[0])
    eps = np.asarray(eps, dtype=float)
    y_star = _solve_blocks(W, rho, X @ beta + eps)
    y = (y_star >= 0).astype(float)
    return LatentSample(y_star, y, eps, seed, float(rho), beta)


def heteroskedastic_probabilities(rf, beta, return_index=False):
    index = (rf.x_star @ np.asarray(beta, dtype=float)) / rf.sigma_diag_sqrt
    P = special.ndtr(index)
    return (P, index) if return_index else P


def generalized_residuals(P, y, index=None):
    """``(y - P) phi / (P (1 - P))`` evaluated at the probit index.

    With ``index`` given the ratio is formed as a signed inverse Mills ratio,
    which stays finite where ``P`` rounds to 0 or 1.
    """
    y = np.asarray(y, dtype=float)
    if index is None:
        P = np.asarray(P, dtype=float)
        if np.any((P <= 0) | (P >= 1)):
            raise ProbabilityUnderflow("probabilities must lie strictly in (0, 1)")
        index = special.ndtri(P)
    q = 2.0 * y - 1.0
    return q * mills(q * np.asarray(index, dtype=float))


def _index_gradients(W, rho, beta, X):
    """Probit index ``a = x*'beta / sigma`` and its derivatives in beta and rho.

    With ``A = I - rho W`` and ``B = A^-1``: ``d(B X beta)/drho = B W m`` for
    ``m = B X beta``, and ``d Sigma_ii/drho = 2 (B W Sigma)_ii``.
    """
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = X.shape[0]
    x_star = np.array(X, copy=True)
    sd = np.ones(n)
    dm = np.zeros(n)
    dsd = np.zeros(n)
    _, multi = W.partition
    for idx, Wb in multi:
        lu = _lu(np.eye(len(idx)) - rho * Wb)
        B = linalg.lu_solve(lu, np.eye(len(idx)))
        xs = B @ X[idx]
        m = xs @ beta
        S = B @ B.T
        BW = B @ Wb
        s = np.sqrt(np.diag(S))
        x_star[idx] = xs
        sd[idx] = s
        dm[idx] = BW @ m
        dsd[idx] = np.sum(BW * S, axis=1) / s
    m = x_star @ beta
    index = m / sd
    d_beta = x_star / sd[:, None]
    d_rho = dm / sd - m * dsd / sd ** 2
    return index, np.column_stack([d_beta, d_rho])


def probability_gradients(W, rho, beta, X):
    """Index, probabilities, ``dP/dbeta`` (n, k) and ``dP/drho`` (n,)."""
    index, D = _index_gradients(W, rho, beta, X)
    phi = np.exp(norm_logpdf(index))
    G = phi[:, None] * D
    return index, special.ndtr(index), G[:, :-1], G[:, -1]


@dataclass(frozen=True)
class InstrumentMatrix:
    z: np.ndarray
    tag: str
    condition_number: float

    @property
    def q(self):
        return self.z.shape[1]


def build_instruments(X, W):
    """``Z = [X, W X_(-0)]``; the intercept's spatial lag is left out."""
    X = np.asarray(X, dtype=float)
    if not np.allclose(X[:, 0], 1.0):
        raise ValueError("column 0 of X must be the intercept")
    Z = np.hstack([X, W.matrix @ X[:, 1:]])
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise RankDeficient("instrument matrix [X, WX] is rank deficient")
    return InstrumentMatrix(Z, "X+WX", float(np.linalg.cond(Z)))


def _as_instruments(Z, X, W):
    if Z is None:
        return build_instruments(X, W)
    if isinstance(Z, InstrumentMatrix):
        return Z
    Z = np.asarray(Z, dtype=float)
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise RankDeficient("instrument matrix is rank deficient")
    return InstrumentMatrix(Z, "user", float(np.linalg.cond(Z)))


def moment_conditions(beta, rho, X, y, W, Z):
    """Sample moments ``Z' e / n`` with ``e`` the generalized probit residual."""
    Z = _as_instruments(Z, X, W).z
    rf = reduced_form(W, rho, X)
    P, index = heteroskedastic_probabilities(rf, beta, return_index=True)
    e = generalized_residuals(P, y, index=index)
    return Z.T @ e / len(e)


@dataclass(frozen=True)
class SpatialFit:
    rho_hat: float
    beta_hat: np.ndarray
    vcov: np.ndarray
    method: FitMethod
    diagnostics: dict = field(default_factory=dict)

    @property
    def params(self):
        """``(rho, beta...)``"""
        return np.r_[self.rho_hat, self.beta_hat]

    @property
    def se(self):
        """Standard errors ordered ``(rho, beta...)``."""
        return np.sqrt(np.diag(self.vcov))


def _project(Q, A):
    return Q @ (Q.T @ A)


def _second_stage(G_hat, G, v, robust):
    """Least squares of ``v`` on ``G_hat``; 2SLS covariance with residuals ``v - G b``."""
    coef, *_ = np.linalg.lstsq(G_hat, v, rcond=None)
    r = v - G @ coef
    try:
        bread = np.linalg.inv(G_hat.T @ G_hat)
    except np.linalg.LinAlgError:
        raise SingularSystem("projected gradient matrix is singular") from None
    if robust:
        meat = (G_hat * (r ** 2)[:, None]).T @ G_hat
        V = bread @ meat @ bread
    else:
        n, p = G_hat.shape
        V = (r @ r) / (n - p) * bread
    return coef, 0.5 * (V + V.T)


def _to_rho_first(V):
    order = np.r_[V.shape[0] - 1, np.arange(V.shape[0] - 1)]
    return V[np.ix_(order, order)]


def _residual_and_jacobian(y, index, D, residual):
    """Residual and minus its Jacobian, given ``D = d index / d params``.

    ``raw``: ``y - Phi(a)`` with ``-d/dparams = phi(a) D``.
    ``generalized``: ``q lambda(q a)`` (``q = 2y - 1``, ``lambda`` the
    inverse Mills ratio) with ``-d/dparams = lambda (q a + lambda) D``.
    """
    if residual == "raw":
        phi = np.exp(norm_logpdf(index))
        return y - special.ndtr(index), phi[:, None] * D
    if residual == "generalized":
        q = 2.0 * y - 1.0
        lam = mills(q * index)
        return q * lam, (lam * (q * index + lam))[:, None] * D
    raise ValueError(f"residual must be 'raw' or 'generalized', not {residual!r}")


def linearized_gmm_fit(X, y, W, Z=None, residual="raw", robust=True):
    """One-step GMM expanded around the standard probit fit at ``rho = 0``.

    Steps: probit ``beta0``; residual ``u0 = y - Phi(x'beta0)``; gradients
    ``G_beta = phi x`` and ``G_rho = phi (W X beta0)``; project both on Z;
    regress ``u0 + G_beta beta0`` on the projections.

    At ``rho = 0`` the derivative of ``sigma_i`` drops out because
    ``d Sigma_ii/drho = 2 W_ii = 0``.

    ``residual="generalized"`` uses the weighted residual
    ``(y - P) phi / (P (1 - P))`` together with its own derivative in
    place of ``phi``.  ``rho_hat`` is left unconstrained;
    ``|rho_hat| >= 1`` is flagged in the diagnostics.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    pf = probit_fit(X, y)
    beta0 = pf.beta_hat
    eta = X @ beta0
    # index derivatives at rho = 0: x_i and w_i' X beta0
    D = np.column_stack([X, W.matrix @ eta])
    u0, G = _residual_and_jacobian(y, eta, D, residual)

    # G_rho inside the span of G_beta leaves rho unidentified
    g_rho = G[:, k]
    fit_rho, *_ = np.linalg.lstsq(G[:, :k], g_rho, rcond=None)
    scale = np.linalg.norm(G[:, :k])
    if (np.linalg.norm(g_rho) <= 1e-12 * scale
            or np.linalg.norm(g_rho - G[:, :k] @ fit_rho) <= 1e-8 * np.linalg.norm(g_rho)):
        raise DegenerateRhoGradient("rho gradient has no variation beyond the beta gradients")

    inst = _as_instruments(Z, X, W)
    Q, _ = np.linalg.qr(inst.z)
    G_hat = _project(Q, G)
    v = u0 + G[:, :k] @ beta0
    coef, V = _second_stage(G_hat, G, v, robust)
    rho_hat = float(coef[k])
    diag = {
        "iterations": 1,
        "converged": True,
        "instruments": inst.tag,
        "instrument_condition_number": inst.condition_number,
        "residual": residual,
        "robust": robust,
        "rho_outside_unit_interval": abs(rho_hat) >= 1,
        "probit_beta": beta0.tolist(),
        "probit_loglik": pf.loglik,
    }
    return SpatialFit(rho_hat, coef[:k], _to_rho_first(V),
                      FitMethod.LINEARIZED_GMM, diag)


def _nl2sls_state(W, gamma, X, y, Q, residual):
    k = X.shape[1]
    index, D = _index_gradients(W, gamma[k], gamma[:k], X)
    e, Gt = _residual_and_jacobian(y, index, D, residual)
    Qe = Q.T @ e
    return e, Gt, float(Qe @ Qe)


def nl2sls_fit(X, y, W, Z=None, start=None, max_iter=50, tol=1e-6,
               residual="generalized", robust=True, line_search=True,
               max_projections=3):
    """Iterated nonlinear 2SLS with gradients through the exact reduced form.

    Each step is ``Gamma_1 = Gamma_0 + (G_hat' G_hat)^-1 G_hat' e_0`` where
    ``G_hat`` is the projection of the residual Jacobian on Z.  A step whose
    sup-norm is below ``tol`` counts as convergence and is not applied.

    With ``line_search`` the step is halved until the objective
    ``e' Z (Z'Z)^-1 Z' e`` does not increase; without it every step is
    taken in full.  ``rho`` is kept in ``[-0.99, 0.99]``: a step that would
    cross the bound is shortened to land on it, and once there a step
    pointing outward updates ``beta`` alone.  ``max_projections``
    consecutive iterations at the bound raise :class:`StepOutOfDomain`.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if start is None:
        gamma = np.r_[probit_fit(X, y).beta_hat, 0.0]
    else:
        beta_s, rho_s = start
        gamma = np.r_[np.asarray(beta_s, dtype=float), float(rho_s)]
    gamma[k] = float(np.clip(gamma[k], -RHO_BOUND, RHO_BOUND))
    inst = _as_instruments(Z, X, W)
    Q, _ = np.linalg.qr(inst.z)

    converged = False
    stalled = False
    projections = 0
    projected_total = 0
    halvings = 0
    step_norm = np.inf
    it = 0
    e, Gt, obj = _nl2sls_state(W, gamma, X, y, Q, residual)
    while True:
        G_hat = _project(Q, Gt)
        step, *_ = np.linalg.lstsq(G_hat, e, rcond=None)
        # rho on the bound with the step pointing outward: hold rho there
        pinned = abs(gamma[k]) >= RHO_BOUND and step[k] * gamma[k] > 0
        if pinned:
            step_b, *_ = np.linalg.lstsq(G_hat[:, :k], e, rcond=None)
            step = np.r_[step_b, 0.0]
        step_norm = float(np.max(np.abs(step)))
        if step_norm < tol and not pinned:
            converged = True
            break
        if it >= max_iter or stalled:
            break
        t = 1.0
        hit = pinned
        if abs(gamma[k] + step[k]) > RHO_BOUND:
            # shorten the step so rho lands on the bound
            t = (np.sign(step[k]) * RHO_BOUND - gamma[k]) / step[k]
            hit = True
        while True:
            cand = gamma + t * step
            cand[k] = float(np.clip(cand[k], -RHO_BOUND, RHO_BOUND))
            state = _nl2sls_state(W, cand, X, y, Q, residual)
            if not line_search or state[2] <= obj or t < 2.0 ** -30:
                break
            t *= 0.5
            halvings += 1
        if line_search and state[2] > obj:
            stalled = True
            continue
        gamma = cand
        e, Gt, obj = state
        it += 1
        if hit:
            projections += 1
            projected_total += 1
            if projections >= max_projections:
                raise StepOutOfDomain(
                    f"rho held at the bound {RHO_BOUND} on {projections} "
                    "consecutive iterations")
        else:
            projections = 0

    if not converged:
        warnings.warn(f"nl2sls_fit stopped after {it} iterations "
                      f"(last step {step_norm:.3g})", NoConvergence, stacklevel=2)

    # e, Gt and G_hat belong to the returned iterate
    _, V = _second_stage(G_hat, Gt, e + Gt @ gamma, robust)
    diag = {
        "iterations": it,
        "converged": converged,
        "last_step": step_norm,
        "objective": obj,
        "step_halvings": halvings,
        "instruments": inst.tag,
        "instrument_condition_number": inst.condition_number,
        "residual": residual,
        "robust": robust,
        "rho_projections": projected_total,
    }
    return SpatialFit(float(gamma[k]), gamma[:k].copy(), _to_rho_first(V),
                      FitMethod.NL2SLS, diag)
