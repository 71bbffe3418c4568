"""JSON fit reports: the machine-readable form of the coefficient tables."""

import json
import math
import os

import numpy as np
from scipy import special

from . import __version__

__all__ = ["stars", "coefficient_rows", "fit_report", "gibbs_report",
           "write_json", "to_jsonable", "TOOL"]

TOOL = {"name": "spatial_exit", "version": __version__}


def stars(p):
    """Significance marks at 0.1 / 0.05 / 0.01."""
    if p is None or not math.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _row(name, est, se):
    est, se = float(est), float(se)
    z = est / se if se > 0 else float("nan")
    p = float(2 * special.ndtr(-abs(z))) if math.isfinite(z) else float("nan")
    return {"name": name, "estimate": est, "se": se, "z": z, "p": p,
            "stars": stars(p)}


def coefficient_rows(names, estimates, ses):
    return [_row(n, e, s) for n, e, s in zip(names, estimates, ses)]


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def fit_report(fit, design, weights):
    """Report for a :class:`~spatial_exit.model.SpatialFit` on one cell."""
    se = fit.se
    return {
        "method": fit.method.value,
        "cell": _cell(design),
        "weights": weights.metadata(),
        "rho": _row("rho", fit.rho_hat, se[0]),
        "coefficients": coefficient_rows(design.columns, fit.beta_hat, se[1:]),
        "diagnostics": fit.diagnostics,
    }


def gibbs_report(draws, design, weights):
    """Posterior means with posterior standard deviations in the ``se`` slot."""
    return {
        "method": "Gibbs",
        "cell": _cell(design),
        "weights": weights.metadata(),
        "rho": _row("rho", draws.rho_mean, draws.rho_sd),
        "coefficients": coefficient_rows(design.columns, draws.beta_mean,
                                         draws.beta_sd),
        "diagnostics": {**draws.diagnostics, "ess": draws.ess,
                        "n_burn": draws.config.n_burn,
                        "n_keep": draws.config.n_keep},
    }


def _cell(design):
    return {"year": design.year, "block_level": design.block_level.value,
            "n": design.n, "exits": int(design.y.sum()),
            "design_sha256": design.digest()}


def write_json(path, obj):
    """Atomic write of a deterministic JSON document."""
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
