import numpy as np
import pytest

from driftdecomp import create_app
from driftdecomp.config import Config
from driftdecomp.models import DenseTensor4, FlexConfig, Mode, SliceSet, SynthConfig
from driftdecomp.services.flex import init_state
from driftdecomp.services.tensor import index_map_for, unfold


class CliTestConfig(Config):
    TESTING = True
    THREADS = 1
    LOG_LEVEL = 'WARNING'

    # Small synthetic region so CLI round trips stay fast
    SYNTH_I = 36
    SYNTH_J = 12
    SYNTH_K = 10
    SYNTH_L = 3
    SYNTH_DRIFT1_MAX = 1.0
    SYNTH_DRIFT2_MAX = 4.0
    SYNTH_SIGMA1 = 1.2
    SYNTH_SIGMA2 = 4.0
    SYNTH_N_MS_PEAKS = 8
    SYNTH_SCALE = 1.0
    SYNTH_SNR = 200.0

    FIT_N_STARTS = 2
    FIT_BURN_ITERS = 5
    FIT_MAX_ITERS = 60


def small_synth_config(**overrides):
    settings = dict(I=36, J=12, K=10, L=3, R=2, drift1_max=1.0, drift2_max=4.0, sigma1=1.2,
                    sigma2=4.0, n_ms_peaks=8, scale=1.0, snr=200.0, seed=3)
    settings.update(overrides)
    return SynthConfig(**settings)


@pytest.fixture
def app():
    return create_app(CliTestConfig)


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_slices(rng):
    """KL slice set of a random (6, 5, 4, 2) tensor: 8 slices of 6 x 5."""
    return unfold(DenseTensor4(rng.random((6, 5, 4, 2))), Mode.KL)


@pytest.fixture
def random_state(rng, random_slices):
    """Initialized state with non-trivial D and mu."""
    state = init_state(random_slices, FlexConfig(R=2, seed=7))
    state.D = rng.uniform(0.5, 2.0, size=state.D.shape)
    state.mu = rng.uniform(0.1, 1.0, size=state.mu.shape)
    return state


def slice_set(slices, dims, mode=Mode.KL):
    return SliceSet(mode=mode, slices=slices, index_map=index_map_for(mode, dims), dims=dims)
