import os

import numpy as np
import pytest

from spatial_exit.data import (EnterpriseRecord, IndustryCode, LegalForm,
                               Region)
from spatial_exit.weights import weights_from_dense

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def make_record(id_="F0001", lon=114.0, lat=22.6, cls="3911", established=2010,
                exit_year=None, capital=100.0, fpct=1.0,
                region=Region.HONG_KONG, legal=LegalForm.FOREIGN_OWNED,
                tariffed=True, imp_exp=False, section="C"):
    return EnterpriseRecord(
        id=id_, lon=lon, lat=lat,
        industry=IndustryCode(section, cls[:2], cls[:3], cls),
        established_year=established, exit_year=exit_year,
        registered_capital=capital, foreign_contribution_pct=fpct,
        registration_region=region, legal_form=legal,
        is_tariffed=tariffed, importer_exporter=imp_exp)


def random_block_weights(rng, n_blocks=3, max_size=6, density=0.7):
    """Row-normalized block-diagonal W from random positive entries."""
    sizes = rng.integers(1, max_size + 1, n_blocks)
    n = int(sizes.sum())
    W = np.zeros((n, n))
    start = 0
    for s in sizes:
        blk = rng.random((s, s)) * (rng.random((s, s)) < density)
        np.fill_diagonal(blk, 0.0)
        W[start:start + s, start:start + s] = blk
        start += s
    return weights_from_dense(W, normalize=True)


@pytest.fixture
def panel50_path():
    return os.path.join(FIXTURES, "panel50.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
