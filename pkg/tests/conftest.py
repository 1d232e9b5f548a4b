import numpy as np
import pytest

from splat_relight.ibl import build_environment, precompute_brdf_lut
from splat_relight.scene import GradientEnvironment, generate_capsule_person
from splat_relight.core.cubemap import Cubemap


@pytest.fixture(scope="session")
def small_avatar():
    """~300-splat capsule person with its skeleton and analytic teacher."""
    counts = [80, 30, 25, 30, 25, 30, 25, 30, 25]
    return generate_capsule_person(counts_per_part=counts, seed=1)


@pytest.fixture(scope="session")
def lut32():
    return precompute_brdf_lut(512, (32, 32))


@pytest.fixture(scope="session")
def gradient_base():
    return Cubemap.from_function(GradientEnvironment(), 64)


@pytest.fixture(scope="session")
def gradient_env(gradient_base):
    return build_environment(gradient_base, prefilter_samples=128)


@pytest.fixture(scope="session")
def constant_base():
    return Cubemap.constant(np.array([2.0, 1.5, 1.0], dtype=np.float32), 32)


@pytest.fixture(scope="session")
def constant_env(constant_base):
    return build_environment(constant_base, prefilter_samples=64)
