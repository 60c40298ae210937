import numpy as np
import pytest

from irs_isac import Scenario


@pytest.fixture
def defaults() -> Scenario:
    return Scenario()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def random_scenario(rng: np.random.Generator) -> Scenario:
    """A valid scenario with every dimension and distance perturbed."""
    m = int(rng.integers(4, 40))
    return Scenario(
        n_bs=int(rng.integers(1, 80)),
        m_re=m,
        m_se=int(rng.integers(2, 24)),
        codebook_size=m,
        coherence_symbols=1000,
        tx_power_w=float(10 ** rng.uniform(-3, 1)),
        d_bi=float(rng.uniform(5, 80)),
        d_iu=float(rng.uniform(2, 40)),
        d_it=float(rng.uniform(2, 20)),
        zeta_bi=float(rng.uniform(-80, 80)),
        zeta_iu=float(rng.uniform(-80, 80)),
        zeta_it=float(rng.uniform(-80, 80)),
        rcs_sqm=float(10 ** rng.uniform(-1, 1.5)),
    )
