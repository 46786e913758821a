import numpy as np
import pytest

from sslgam import SmoothSpec, SurvivalResponse, construct_smooth_data, make_group, sim_bai


@pytest.fixture(scope="session")
def small_binomial():
    """Simulated binomial training set with its design and groups (n=300, k=5)."""
    sim = sim_bai(300, 6, "binomial", seed=11)
    specs = [SmoothSpec(f"x{j + 1}", "cr", 5) for j in range(6)]
    design = construct_smooth_data(specs, sim.data)
    groups = make_group(design.column_names)
    return sim, design, groups


def make_survival(n=80, seed=3, censor_frac=0.3):
    """Exponential survival times driven by one strong covariate."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3))
    eta = 0.9 * x[:, 0]
    time = rng.exponential(np.exp(-eta))
    status = (rng.random(n) > censor_frac).astype(float)
    if status.sum() == 0:
        status[0] = 1.0
    return x, SurvivalResponse(time, status)
