"""Full-size recovery runs on the default synthetic protocol. Run with: pytest -m slow"""

from itertools import count

import numpy as np
import pytest

from driftdecomp.models import CoupledConfig, FlexConfig, SynthConfig
from driftdecomp.services.coupled import fit
from driftdecomp.services.metrics import match_components
from driftdecomp.services.synth import generate

pytestmark = pytest.mark.slow

SEEDS = range(5)
TRACE_SLACK = 1e-9


def default_fit(X, R, seed, **flex_overrides):
    cfg = CoupledConfig(flex=FlexConfig(R=R, **flex_overrides), n_starts=10, burn_iters=80,
                        omega=3.0, seed=seed, threads=4)
    return fit(X, R, cfg)


def check_trace(model, cfg_flex, burn_iters):
    trace = model.report.objective_trace
    for t in range(cfg_flex.growth_iters, len(trace) - 1):
        assert trace[t + 1] <= trace[t] * (1 + TRACE_SLACK), f'objective rose at iteration {t + 1}'
    assert model.iter - burn_iters <= 100


def overlapping_samples(truth):
    """Samples holding two components whose apexes lie within one peak width in both dimensions."""
    cfg = truth.config
    samples = []
    for l, apexes in enumerate(truth.apexes):
        gaps = np.abs(apexes[:, np.newaxis, :] - apexes[np.newaxis, :, :])
        close = (gaps[..., 0] < cfg.sigma1) & (gaps[..., 1] < cfg.sigma2)
        if np.triu(close, k=1).any():
            samples.append(l)
    return samples


def overlapped_region(seed):
    """First three-component region at or after 100 * seed with an overlapped pair in some sample."""
    for candidate in count(100 * seed):
        X, truth = generate(SynthConfig(R=3, apex_spacing=0.5, seed=candidate))
        if overlapping_samples(truth):
            return X, truth


class TestTwoComponents:

    @pytest.mark.parametrize('seed', SEEDS)
    def test_recovery(self, seed):
        X, truth = generate(SynthConfig(R=2, seed=seed))
        model = default_fit(X, 2, seed)
        assert model.report.converged
        assert model.report.percent_var >= 99.9
        assert (match_components(truth.spectra, model.A_final).per_component_cosines >= 0.99).all()
        assert model.iter - 80 <= 100

    def test_trace_without_nonnegativity(self):
        X, _ = generate(SynthConfig(R=2, seed=0))
        flex = FlexConfig(R=2, nonneg_D=False)
        model = fit(X, 2, CoupledConfig(flex=flex, seed=0, threads=4))
        check_trace(model, flex, 80)


class TestThreeComponents:

    @pytest.mark.parametrize('seed', SEEDS)
    def test_recovery(self, seed):
        X, truth = overlapped_region(seed)
        assert overlapping_samples(truth)
        model = default_fit(X, 3, truth.config.seed)
        assert model.report.percent_var >= 99.5
        assert (match_components(truth.spectra, model.A_final).per_component_cosines >= 0.98).all()

    def test_trace_without_nonnegativity(self):
        X, truth = overlapped_region(1)
        flex = FlexConfig(R=3, nonneg_D=False)
        model = fit(X, 3, CoupledConfig(flex=flex, seed=truth.config.seed, threads=4))
        check_trace(model, flex, 80)


class TestDilutionSeries:

    def test_fitted_abundances_are_linear(self):
        amounts = tuple((float(n), float(n)) for n in range(1, 9))
        X, truth = generate(SynthConfig(L=8, amounts=amounts, seed=7))
        model = default_fit(X, 2, 7)
        match = match_components(truth.spectra, model.A_final)
        fitted = model.D_samples[:, list(match.permutation)]
        for r in range(2):
            r2 = np.corrcoef(truth.abundances[:, r], fitted[:, r])[0, 1] ** 2
            assert r2 >= 0.99
