import numpy as np
import pytest

from udcsim.degrade import DegradationModel, NoiseParams, IntensityScale
from udcsim.optics import OpticalConfig, delta_psf_set, psf_set
from udcsim.patterns import perforated_pattern, stripe_pattern
from udcsim.raw import BayerRaw


# Small-geometry optics for tests: a 128-sample pattern spans the aperture
# exactly (pitch chosen so 128 * pitch == aperture diameter, binary-exact).
TEST_PATTERN_SIZE = 128
TEST_PITCH_UM = 3333.0 / TEST_PATTERN_SIZE

TABLE_R_OVERRIDE = {"R": 2.41, "G": 2.98, "B": 3.44}


def make_config(**kwargs) -> OpticalConfig:
    kwargs.setdefault("r_override", dict(TABLE_R_OVERRIDE))
    return OpticalConfig(**kwargs)


def random_raw(rng: np.random.Generator, height: int = 8, width: int = 8,
               white_level: int = 65535) -> BayerRaw:
    samples = rng.integers(0, white_level + 1, size=(height, width), dtype=np.uint16)
    return BayerRaw(samples, white_level=white_level)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Stripe period chosen so the diffraction orders land closer than one
# sensor pixel after resampling: the kernel is a contiguous horizontal
# smear and the horizontal transfer decays smoothly over the mid-band.
STRIPE_PERIOD = 64
STRIPE_OPEN_FRACTION = 0.21


@pytest.fixture(scope="session")
def stripe_psfs():
    pattern = stripe_pattern(
        TEST_PATTERN_SIZE, TEST_PITCH_UM, period=STRIPE_PERIOD, open_fraction=STRIPE_OPEN_FRACTION
    )
    return psf_set(pattern, make_config())


@pytest.fixture(scope="session")
def perforated_psfs():
    pattern = perforated_pattern(TEST_PATTERN_SIZE, TEST_PITCH_UM, period=8, open_fraction=0.23)
    return psf_set(pattern, make_config())


@pytest.fixture(scope="session")
def toled_model(stripe_psfs):
    return DegradationModel(
        scale=IntensityScale.from_rgb(0.97, 0.97, 0.97),
        psfs=stripe_psfs,
        noise=NoiseParams.from_scalars(3e-5, 3e-4),
        seed=7,
    )


@pytest.fixture(scope="session")
def poled_model(perforated_psfs):
    return DegradationModel(
        scale=IntensityScale.from_rgb(0.34, 0.34, 0.20),
        psfs=perforated_psfs,
        noise=NoiseParams.from_scalars(3e-5, 3e-4),
        seed=11,
    )


@pytest.fixture
def identity_model():
    return DegradationModel(
        scale=IntensityScale.uniform(1.0),
        psfs=delta_psf_set(),
        noise=NoiseParams.zero(),
        seed=0,
    )
