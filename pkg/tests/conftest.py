import os
import sys

import pytest

# Add repo root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from analysis.special import VarianceModel  # noqa: E402
from process.discount import DiscountSpec  # noqa: E402
from process.kernels import CovKernel  # noqa: E402

# fBm H=1/2 (= BM), δ(t)=t, S=1 reference values
SIGMA2_AT_1 = 0.1025793257
DISPLAY_AT_1 = 0.2051586515
DSIGMA2_AT_1 = 0.1944177494
RATE_AT_1 = 9.23817608
SIGMA_AT_1 = 0.3202800739


@pytest.fixture
def example_model():
    return VarianceModel(CovKernel.fbm(0.5), DiscountSpec.linear(1.0))


@pytest.fixture
def example_config_dict(tmp_path):
    """Small version of the fBm H=1/2, δ(t)=t, c=1, S=1 experiment."""
    return {
        "kernel": {"family": "fbm", "hurst": 0.5},
        "discount": {"kind": "linear", "rate": 1.0},
        "c": 1.0,
        "s_horizon": 1.0,
        "window": {"mode": "c_over_u", "t_const": 1.0},
        "u_values": [0.5, 1.0],
        "grid_n": 128,
        "reps": 2000,
        "estimator": "importance",
        "seed": 12345,
        "output": str(tmp_path / "out.csv"),
        "chunk_reps": 256,
    }
