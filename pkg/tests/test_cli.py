import hashlib
import json
import os

import numpy as np
import pytest

from driftdecomp.models import GroundTruth
from driftdecomp.services.storage import (read_model, read_tensor, read_truth, write_matrix_csv,
                                          write_model, write_truth)


def checksum(path):
    with open(path, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()


def simulate(runner, out, *extra):
    return runner.invoke(args=['simulate', '--output', str(out), *extra])


def evaluate(runner, model_dir, out, *extra):
    result = runner.invoke(args=['evaluate', '--model', str(model_dir), '--output', str(out),
                                 *extra])
    assert result.exit_code == 0, result.output
    with open(out / 'evaluation.json') as f:
        return json.load(f)


def fit(runner, data_dir, out, *extra):
    return runner.invoke(args=['fit', '--input', str(data_dir / 'tensor.dtf'),
                               '--output', str(out), '--rank', '2', *extra])


@pytest.fixture
def simulated(runner, tmp_path):
    result = simulate(runner, tmp_path / 'data')
    assert result.exit_code == 0, result.output
    return tmp_path / 'data'


class TestSimulate:

    def test_writes_tensor_and_truth(self, simulated):
        X = read_tensor(simulated / 'tensor.dtf')
        assert X.dims == (36, 12, 10, 3)
        assert (X.data > 0).all()
        with open(simulated / 'truth.json') as f:
            truth = json.load(f)
        assert truth['tensor'] == 'tensor.dtf'
        assert (simulated / 'truth_scores.dtf').exists()

    def test_same_seed_same_bytes(self, runner, tmp_path):
        for name in ('a', 'b'):
            assert simulate(runner, tmp_path / name, '--seed', '5').exit_code == 0
        for name in ('tensor.dtf', 'truth.json', 'truth_scores.dtf'):
            assert checksum(tmp_path / 'a' / name) == checksum(tmp_path / 'b' / name)

    def test_different_seed_different_tensor(self, runner, tmp_path):
        simulate(runner, tmp_path / 'a', '--seed', '1')
        simulate(runner, tmp_path / 'b', '--seed', '2')
        assert checksum(tmp_path / 'a' / 'tensor.dtf') != checksum(tmp_path / 'b' / 'tensor.dtf')

    def test_config_file(self, runner, tmp_path):
        config = tmp_path / 'settings.json'
        config.write_text(json.dumps({'CONFIG_SCHEMA_VERSION': 1, 'SYNTH_L': 2, 'SYNTH_R': 1}))
        result = simulate(runner, tmp_path / 'data', '--config', str(config))
        assert result.exit_code == 0, result.output
        assert read_tensor(tmp_path / 'data' / 'tensor.dtf').dims == (36, 12, 10, 2)

    def test_small_region_warns(self, runner, tmp_path):
        config = tmp_path / 'settings.json'
        config.write_text(json.dumps({'CONFIG_SCHEMA_VERSION': 1, 'SYNTH_I': 20}))
        result = simulate(runner, tmp_path / 'data', '--config', str(config))
        assert result.exit_code == 0
        assert 'Warning: I=20' in result.output

    def test_unknown_config_key(self, runner, tmp_path):
        config = tmp_path / 'settings.json'
        config.write_text(json.dumps({'CONFIG_SCHEMA_VERSION': 1, 'SYNTH_COLOUR': 'red'}))
        result = simulate(runner, tmp_path / 'data', '--config', str(config))
        assert result.exit_code == 5
        assert not (tmp_path / 'data').exists()

    def test_wrong_schema_version(self, runner, tmp_path):
        config = tmp_path / 'settings.json'
        config.write_text(json.dumps({'CONFIG_SCHEMA_VERSION': 2}))
        assert simulate(runner, tmp_path / 'data', '--config', str(config)).exit_code == 5

    def test_missing_config_file(self, runner, tmp_path):
        result = simulate(runner, tmp_path / 'data', '--config', str(tmp_path / 'nope.json'))
        assert result.exit_code == 4


class TestFit:

    def test_max_iters_reached(self, runner, simulated, tmp_path):
        result = fit(runner, simulated, tmp_path / 'model', '--max-iters', '1')
        assert result.exit_code == 2
        model = read_model(tmp_path / 'model')
        assert model.report.iterations == 1
        assert model.report.status.value == 'max_iters'

    def test_bundle_files(self, runner, simulated, tmp_path):
        fit(runner, simulated, tmp_path / 'model', '--max-iters', '3')
        for name in ('F.dtf', 'A.dtf', 'D.dtf', 'model.json', 'report.json', 'summary.txt'):
            assert (tmp_path / 'model' / name).exists()
        model = read_model(tmp_path / 'model')
        assert model.F.shape == (36, 2, 10, 3)
        assert model.A_final.shape == (12, 2)

    def test_same_seed_same_model(self, runner, simulated, tmp_path):
        for name in ('a', 'b'):
            fit(runner, simulated, tmp_path / name, '--max-iters', '8', '--seed', '3',
                '--threads', '2')
        for name in ('F.dtf', 'A.dtf', 'D.dtf'):
            assert checksum(tmp_path / 'a' / name) == checksum(tmp_path / 'b' / name)

    def test_mode_l_method(self, runner, simulated, tmp_path):
        result = fit(runner, simulated, tmp_path / 'model', '--method', 'flex-l',
                     '--max-iters', '4')
        assert result.exit_code in (0, 2)
        assert read_model(tmp_path / 'model').method.value == 'flex-l'

    def test_missing_input(self, runner, tmp_path):
        result = runner.invoke(args=['fit', '--input', str(tmp_path / 'missing.dtf'),
                                     '--output', str(tmp_path / 'model')])
        assert result.exit_code == 4
        assert not (tmp_path / 'model').exists()

    def test_corrupt_input(self, runner, tmp_path):
        (tmp_path / 'bad.dtf').write_bytes(b'not a tensor')
        result = runner.invoke(args=['fit', '--input', str(tmp_path / 'bad.dtf'),
                                     '--output', str(tmp_path / 'model')])
        assert result.exit_code == 4

    def test_invalid_rank(self, runner, simulated, tmp_path):
        result = runner.invoke(args=['fit', '--input', str(simulated / 'tensor.dtf'),
                                     '--output', str(tmp_path / 'model'), '--rank', '0'])
        assert result.exit_code == 5

    def test_output_is_a_file(self, runner, simulated, tmp_path):
        (tmp_path / 'taken').write_text('')
        result = fit(runner, simulated, tmp_path / 'taken')
        assert result.exit_code == 5


class TestEvaluate:

    @pytest.fixture
    def fitted(self, runner, simulated, tmp_path):
        fit(runner, simulated, tmp_path / 'model', '--max-iters', '5')
        return tmp_path / 'model'

    def test_against_truth(self, runner, simulated, fitted, tmp_path):
        evaluation = evaluate(runner, fitted, tmp_path / 'eval',
                              '--truth', str(simulated / 'truth.json'))
        assert 0 <= evaluation['spectra']['mean_cosine'] <= 1
        assert evaluation['percent_var'] is not None
        assert len(evaluation['abundance_regression']) == 2

    def test_self_evaluation(self, runner, fitted, tmp_path):
        model = read_model(fitted)
        surfaces = model.F * model.D_samples.T[None, :, None, :]
        truth = GroundTruth(spectra=model.A_final, score_maps=surfaces.transpose(0, 2, 1, 3),
                            abundances=model.D_samples, drifts=np.zeros((3, 2, 2)),
                            apexes=np.zeros((3, 2, 2)))
        path = write_truth(truth, tmp_path / 'self', tensor_file=None)
        evaluation = evaluate(runner, fitted, tmp_path / 'eval', '--truth', path)
        assert evaluation['spectra']['mean_cosine'] == pytest.approx(1.0)
        assert evaluation['score_maps']['mean_cosine'] == pytest.approx(1.0)
        assert evaluation['percent_var'] is None

    def test_permuted_bundle_scores_the_same(self, runner, simulated, fitted, tmp_path):
        model = read_model(fitted)
        model.F = model.F[:, ::-1].copy()
        model.A_final = model.A_final[:, ::-1].copy()
        model.D_samples = model.D_samples[:, ::-1].copy()
        write_model(model, tmp_path / 'permuted')
        truth = str(simulated / 'truth.json')
        a = evaluate(runner, fitted, tmp_path / 'eval_a', '--truth', truth)
        b = evaluate(runner, tmp_path / 'permuted', tmp_path / 'eval_b', '--truth', truth)
        for key in ('spectra', 'score_maps'):
            assert a[key]['mean_cosine'] == pytest.approx(b[key]['mean_cosine'])
        assert a['percent_var'] == pytest.approx(b['percent_var'])

    def test_amounts(self, runner, fitted, tmp_path):
        amounts = tmp_path / 'amounts.csv'
        amounts.write_text('c1,c2\n1,2\n2,4\n3,6\n')
        result = runner.invoke(args=['evaluate', '--model', str(fitted), '--amounts', str(amounts),
                                     '--summary'])
        assert result.exit_code == 0, result.output
        assert 'Evaluation of' in result.output

    def test_reference_spectra_csv(self, runner, simulated, fitted, tmp_path):
        truth, _ = read_truth(simulated / 'truth.json')
        path = tmp_path / 'spectra.csv'
        write_matrix_csv(path, truth.spectra, ['c1', 'c2'])
        from_csv = evaluate(runner, fitted, tmp_path / 'eval_csv', '--spectra', str(path))
        from_truth = evaluate(runner, fitted, tmp_path / 'eval_truth',
                              '--truth', str(simulated / 'truth.json'))
        assert from_csv['spectra']['permutation'] == from_truth['spectra']['permutation']
        assert from_csv['spectra']['mean_cosine'] == pytest.approx(
            from_truth['spectra']['mean_cosine'], rel=1e-8)
        assert from_csv['score_maps'] is None

    def test_reference_spectra_summary(self, runner, fitted, tmp_path):
        path = tmp_path / 'spectra.csv'
        write_matrix_csv(path, read_model(fitted).A_final, ['c1', 'c2'])
        result = runner.invoke(args=['evaluate', '--model', str(fitted), '--spectra', str(path),
                                     '--summary'])
        assert result.exit_code == 0, result.output
        assert 'Mean spectral cosine: 1.000000' in result.output
        assert 'score-map' not in result.output

    def test_truth_and_spectra_conflict(self, runner, simulated, fitted, tmp_path):
        path = tmp_path / 'spectra.csv'
        write_matrix_csv(path, np.ones((12, 2)), ['c1', 'c2'])
        result = runner.invoke(args=['evaluate', '--model', str(fitted), '--spectra', str(path),
                                     '--truth', str(simulated / 'truth.json')])
        assert result.exit_code == 5

    def test_missing_spectra_file(self, runner, fitted, tmp_path):
        result = runner.invoke(args=['evaluate', '--model', str(fitted),
                                     '--spectra', str(tmp_path / 'nope.csv')])
        assert result.exit_code == 4

    def test_needs_truth_or_amounts(self, runner, fitted):
        assert runner.invoke(args=['evaluate', '--model', str(fitted)]).exit_code == 5

    def test_missing_model(self, runner, simulated, tmp_path):
        result = runner.invoke(args=['evaluate', '--model', str(tmp_path / 'nothing'),
                                     '--truth', str(simulated / 'truth.json')])
        assert result.exit_code == 4


class TestExportPlots:

    def test_writes_files(self, runner, simulated, tmp_path):
        fit(runner, simulated, tmp_path / 'model', '--max-iters', '3')
        result = runner.invoke(args=['export-plots', '--model', str(tmp_path / 'model'),
                                     '--output', str(tmp_path / 'plots')])
        assert result.exit_code == 0, result.output
        csvs = [n for n in os.listdir(tmp_path / 'plots') if n.endswith('.csv')]
        assert len([n for n in csvs if n.startswith('surface_')]) == 2 * 3
        assert len([n for n in csvs if n.startswith('spectrum_')]) == 2

    def test_empty_model_dir(self, runner, tmp_path):
        (tmp_path / 'empty').mkdir()
        result = runner.invoke(args=['export-plots', '--model', str(tmp_path / 'empty'),
                                     '--output', str(tmp_path / 'plots')])
        assert result.exit_code == 4
        assert 'model.json' in result.output
