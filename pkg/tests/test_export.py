import os

import numpy as np
import pytest

from driftdecomp.models import CoupledModel
from driftdecomp.services.export import bars, color, export_plots, surface_cells
from driftdecomp.services.storage import read_matrix_csv


@pytest.fixture
def model(rng):
    return CoupledModel(F=rng.random((6, 2, 4, 3)), A_final=rng.random((5, 2)),
                        D_samples=rng.uniform(1.0, 2.0, size=(3, 2)))


class TestHelpers:

    def test_color_scale_ends(self):
        assert color(0.0) == '#ffffff'
        assert color(1.0) == '#08306b'
        assert color(5.0) == color(1.0)

    def test_surface_cells(self):
        cells = surface_cells(np.array([[0.0, 2.0], [1.0, 0.0]]))
        assert len(cells) == 4
        assert cells[1] == {'x': 4, 'y': 0, 'fill': '#08306b'}

    def test_zero_surface(self):
        assert all(cell['fill'] == '#ffffff' for cell in surface_cells(np.zeros((2, 2))))

    def test_bars(self):
        result = bars([1.0, 2.0])
        assert result[1]['height'] == '160.000'
        assert result[0]['y'] == '80.000'


class TestExportPlots:

    def test_file_set(self, app, tmp_path, model):
        with app.app_context():
            written = export_plots(model, tmp_path)
        names = sorted(os.path.basename(p) for p in written)
        assert len(names) == 2 * (2 * 3) + 2 * 2 + 2
        assert 'surface_c2_s3.csv' in names
        assert 'spectrum_c1.svg' in names
        assert 'abundances.csv' in names
        assert sorted(os.listdir(tmp_path)) == names

    def test_surface_csv_holds_scaled_profile(self, app, tmp_path, model):
        with app.app_context():
            export_plots(model, tmp_path)
        names, surface = read_matrix_csv(tmp_path / 'surface_c1_s2.csv')
        assert names == [f'modulation_{k}' for k in range(1, 5)]
        np.testing.assert_allclose(surface, model.F[:, 0, :, 1] * model.D_samples[1, 0], rtol=1e-9)

    def test_abundances_csv(self, app, tmp_path, model):
        with app.app_context():
            export_plots(model, tmp_path)
        names, D = read_matrix_csv(tmp_path / 'abundances.csv')
        assert names == ['component_1', 'component_2']
        np.testing.assert_allclose(D, model.D_samples, rtol=1e-9)

    def test_svg_is_rendered(self, app, tmp_path, model):
        with app.app_context():
            export_plots(model, tmp_path)
        text = (tmp_path / 'surface_c1_s1.svg').read_text()
        assert text.lstrip().startswith('<svg')
        assert text.count('<rect') >= 6 * 4

    def test_rerun_is_identical(self, app, tmp_path, model):
        with app.app_context():
            export_plots(model, tmp_path / 'a')
            export_plots(model, tmp_path / 'b')
        for name in os.listdir(tmp_path / 'a'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
