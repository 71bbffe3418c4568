"""
Synthetic designs for simulation studies.

A cell has ``n_blocks`` industry blocks of ``block_size`` firms scattered
around a block centre inside the Shenzhen bounding box.  Covariates mix a
block-level component with firm noise, so that ``W X`` varies across
blocks and ``rho`` is identified through the spatially lagged instruments.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import (EnterpriseRecord, IndustryCode, LegalForm, PanelDataset,
                   Region, build_design)
from .model import simulate_latent
from .weights import D_MIN_KM, build_weights

__all__ = ["SHENZHEN_BBOX", "SyntheticCell", "synthetic_design",
           "synthetic_cell", "recovery_study", "RecoverySummary",
           "synthetic_skeleton", "simulate_exits"]

# lon_min, lat_min, lon_max, lat_max
SHENZHEN_BBOX = (113.75, 22.45, 114.60, 22.85)


@dataclass(frozen=True)
class SyntheticCell:
    X: np.ndarray
    y: np.ndarray
    W: object
    coords: np.ndarray
    labels: np.ndarray
    rho: float
    beta: np.ndarray
    seed: object
    y_star: np.ndarray


def synthetic_design(n_blocks, block_size, k, rng, block_sd=1.0, noise_sd=1.0,
                     spread_deg=0.02):
    """Coordinates, block labels and X = [1, covariates] for one cell."""
    n = n_blocks * block_size
    labels = np.repeat(np.arange(n_blocks), block_size)
    lo = np.array(SHENZHEN_BBOX[:2])
    hi = np.array(SHENZHEN_BBOX[2:])
    centres = lo + (hi - lo) * rng.random((n_blocks, 2))
    coords = centres[labels] + spread_deg * rng.standard_normal((n, 2))
    coords = np.clip(coords, lo, hi)
    effects = block_sd * rng.standard_normal((n_blocks, k - 1))
    cov = effects[labels] + noise_sd * rng.standard_normal((n, k - 1))
    X = np.column_stack([np.ones(n), cov])
    return coords, labels, X


def synthetic_cell(n_blocks, block_size, rho, beta, seed=None, **design):
    """Draw a design and an outcome from the spatial lag probit.

    The returned cell carries the exact W used for the draw.
    """
    beta = np.asarray(beta, dtype=float)
    rng = np.random.default_rng(seed)
    coords, labels, X = synthetic_design(n_blocks, block_size, len(beta), rng,
                                         **design)
    W = build_weights(None, "group", coords=coords, labels=labels)
    sample = simulate_latent(W, rho, beta, X, seed=rng)
    return SyntheticCell(X, sample.y, W, coords, labels, float(rho), beta,
                         seed, sample.y_star)


@dataclass(frozen=True)
class RecoverySummary:
    """Monte Carlo means with their standard errors, ordered (rho, beta...)."""
    estimates: np.ndarray
    truth: np.ndarray
    failures: int

    @property
    def mean(self):
        return self.estimates.mean(axis=0)

    @property
    def mc_se(self):
        return self.estimates.std(axis=0, ddof=1) / np.sqrt(len(self.estimates))

    @property
    def bias(self):
        return self.mean - self.truth


def recovery_study(estimator, n_reps, n_blocks, block_size, rho, beta, seed=0,
                   workers=1, **design):
    """Fit ``estimator(X, y, W)`` on ``n_reps`` independent synthetic cells.

    Replication streams come from ``SeedSequence(seed).spawn``.  Fits that
    raise an estimation error are counted in ``failures`` and dropped.
    """
    from .errors import EstimationError

    children = np.random.SeedSequence(seed).spawn(n_reps)

    def one(ss):
        cell = synthetic_cell(n_blocks, block_size, rho, beta, seed=ss, **design)
        try:
            fit = estimator(cell.X, cell.y, cell.W)
        except EstimationError:
            return None
        return fit.params

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, children))
    else:
        results = [one(ss) for ss in children]
    ok = [r for r in results if r is not None]
    return RecoverySummary(np.array(ok), np.r_[rho, beta], len(results) - len(ok))


def synthetic_skeleton(n_groups=6, firms_per_group=40, seed=0,
                       first_year=2017, division="39"):
    """Enterprise records with plausible covariates and no exits.

    Each industry group holds two classes; firms of a group cluster around
    a common centre.  Registration region, legal form and the trade flags
    are drawn with shares close to the Shenzhen electronics panel.
    """
    rng = np.random.default_rng(seed)
    lo = np.array(SHENZHEN_BBOX[:2])
    hi = np.array(SHENZHEN_BBOX[2:])
    regions = [Region.HONG_KONG, Region.TAIWAN, Region.US, Region.OTHER]
    forms = [LegalForm.FOREIGN_OWNED, LegalForm.JOINT_VENTURE, LegalForm.OTHER]
    records = []
    for g in range(n_groups):
        group = f"{division}{g + 1}"
        centre = lo + (hi - lo) * rng.random(2)
        for i in range(firms_per_group):
            lon, lat = np.clip(centre + 0.02 * rng.standard_normal(2), lo, hi)
            form = forms[rng.choice(3, p=[0.81, 0.14, 0.05])]
            fpct = (1.0 if form is LegalForm.FOREIGN_OWNED
                    else round(float(rng.uniform(0.1, 0.9)), 4))
            records.append(EnterpriseRecord(
                id=f"F{g + 1:02d}{i + 1:04d}",
                lon=round(float(lon), 6), lat=round(float(lat), 6),
                industry=IndustryCode("C", division, group,
                                      f"{group}{1 + i % 2}"),
                established_year=int(rng.integers(first_year - 20, first_year + 1)),
                exit_year=None,
                registered_capital=round(float(rng.lognormal(6.3, 1.6)), 2),
                foreign_contribution_pct=fpct,
                registration_region=regions[rng.choice(4, p=[0.65, 0.1, 0.05, 0.2])],
                legal_form=form,
                is_tariffed=bool(rng.random() < 0.9),
                importer_exporter=bool(rng.random() < 0.5),
            ))
    return records


def simulate_exits(records, year, block_level, rho, beta, seed=None,
                   d_min_km=D_MIN_KM):
    """Plant exits for ``year + 1`` among firms established by ``year``.

    Existing exit years are discarded.  Returns
    ``(records, sample, design, weights)`` with the records in input order.
    """
    clean = [replace(r, exit_year=None) for r in records]
    start = min(r.established_year for r in clean)
    panel = PanelDataset(clean, min(start, year), year + 1)
    design, active = build_design(panel, year, block_level)
    W = build_weights(active, block_level, d_min_km)
    sample = simulate_latent(W, rho, beta, design.X, seed=seed)
    exits = {r.id for r, yi in zip(active, sample.y) if yi == 1}
    out = [replace(r, exit_year=year + 1) if r.id in exits else r
           for r in clean]
    return out, sample, design, W
