import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nbldpc.galois_field import get_field
from nbldpc.tanner_code import DegreeDist, LabelPdf, sample_code

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def gf4():
    return get_field(2)


@pytest.fixture
def gf8():
    return get_field(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_code(p=2, kind="field", n=30, lam="1@2", rho="1@3", seed=0, f="uniform"):
    gf = get_field(p)
    return sample_code(n, DegreeDist.parse(lam, rho), LabelPdf.parse(gf, kind, f), seed=seed)
