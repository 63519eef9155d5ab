import numpy as np
import pytest

from jumpdiff import build_example_model, builtin_drift_f, builtin_ja_f, builtin_sigma_f


@pytest.fixture(scope="session")
def example_model():
    return build_example_model()


@pytest.fixture(scope="session")
def ja_f():
    return builtin_ja_f()


@pytest.fixture(scope="session")
def drift_f():
    return builtin_drift_f()


@pytest.fixture(scope="session")
def sigma_f():
    return builtin_sigma_f()


def make_levy_path(seed, n=100_000, h=1e-4, alpha=1.8, r=1.0, stream=777):
    """Path of exact i.i.d. symmetric-stable increments (no Euler error)."""
    from jumpdiff.sampling import RngStream, sample_sas, stable_constant
    from jumpdiff.simulate import PathSample, SimulationPlan

    gen = RngStream(stream, seed).generator()
    scale = (h * r * stable_constant(alpha)) ** (1.0 / alpha)
    inc = sample_sas(alpha, scale, gen, size=n)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    plan = SimulationPlan(horizon=n * h, mesh=h, burn_in=0.0)
    return PathSample(times=np.arange(n + 1) * h, values=values, plan=plan)


def make_gaussian_path(seed, n=1_000_000, h=1e-5, sigma=1.0, stream=555):
    from jumpdiff.sampling import RngStream
    from jumpdiff.simulate import PathSample, SimulationPlan

    gen = RngStream(stream, seed).generator()
    inc = sigma * np.sqrt(h) * gen.standard_normal(n)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    plan = SimulationPlan(horizon=n * h, mesh=h, burn_in=0.0)
    return PathSample(times=np.arange(n + 1) * h, values=values, plan=plan)
