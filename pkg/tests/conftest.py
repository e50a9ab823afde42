import numpy as np
import pytest

from wbiv import build_dataset, partial_out_exogenous
from wbiv.rng import substream

T1_Y = np.array([1.0, 2.0, 1.5, 0.5, 1.8, 1.2])
T1_X = np.array([0.5, 1.0, 0.8, 0.2, 1.1, 0.7])
T1_Z = np.array([1.0, 2.0, 1.5, 0.5, 1.9, 1.1])
T1_CLUSTER = np.array([1, 1, 1, 2, 2, 2])

# Third cluster appended for the statistics that need q > d_z at d_z = 2.
T1X_Y = np.r_[T1_Y, [0.9, 1.6, 1.1]]
T1X_X = np.r_[T1_X, [0.4, 0.9, 0.6]]
T1X_Z = np.r_[T1_Z, [0.8, 1.7, 1.0]]
T1X_CLUSTER = np.r_[T1_CLUSTER, [3, 3, 3]]


@pytest.fixture
def t1():
    return build_dataset(T1_Y, T1_X, T1_Z, np.ones(6), T1_CLUSTER)


@pytest.fixture
def t1_design(t1):
    return partial_out_exogenous(t1)


@pytest.fixture
def t1_dz2():
    z = np.column_stack([T1_Z, T1_Z**2])
    return build_dataset(T1_Y, T1_X, z, np.ones(6), T1_CLUSTER)


@pytest.fixture
def t1x_dz2():
    z = np.column_stack([T1X_Z, T1X_Z**2])
    return build_dataset(T1X_Y, T1X_X, z, np.ones(9), T1X_CLUSTER)


def random_dataset(
    seed,
    q=5,
    n_per=30,
    d_x=1,
    d_z=1,
    d_w=2,
    rho=0.4,
    pi_scale=1.0,
    intercept=True,
):
    """Strong-identification clustered IV data for property tests.

    Instruments are informative in every cluster (scaled by pi_scale), errors
    are correlated with the first-stage noise, and W holds an intercept plus
    standard-normal covariates.
    """
    rng = substream(seed, "testdata", q, n_per, d_x, d_z, d_w)
    n = q * n_per
    z = rng.standard_normal((n, d_z))
    w_extra = rng.standard_normal((n, d_w - 1)) if d_w > 1 else np.empty((n, 0))
    if intercept:
        w = np.column_stack([np.ones(n), w_extra])
    else:
        w = np.column_stack([rng.standard_normal(n) + 2.0, w_extra])
    pi = pi_scale * (1.0 + rng.standard_normal((d_z, d_x)) * 0.3)
    eps = rng.standard_normal(n)
    v = rho * eps[:, None] + np.sqrt(1 - rho**2) * rng.standard_normal((n, d_x))
    x = z @ pi + w @ rng.standard_normal((w.shape[1], d_x)) * 0.5 + v
    beta = rng.standard_normal(d_x)
    gamma = rng.standard_normal(w.shape[1])
    y = x @ beta + w @ gamma + eps
    cluster = np.repeat(np.arange(q), n_per)
    return build_dataset(y, x, z, w, cluster)
