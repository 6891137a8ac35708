import numpy as np

from adiabatlab.core.invliou import build_weight, weight_tables
from adiabatlab.services import plots


def test_svg_is_reproducible(tmp_path):
    series = {"n=1": ([0.01, 0.02, 0.04], [1e-4, 4e-4, 1.6e-3])}
    a = plots.loglog_plot(tmp_path / "a.svg", series, "ε", "error")
    b = plots.loglog_plot(tmp_path / "b.svg", series, "ε", "error")
    assert a.read_bytes() == b.read_bytes()
    assert b"<svg" in a.read_bytes()


def test_light_cone_and_weight(tmp_path):
    grid = np.array([[1e-3, 1e-8], [1e-1, 1e-5]])
    path = plots.light_cone_plot(tmp_path / "lr.svg", [0.5, 1.0], [1, 4], grid, velocity=2.0)
    assert path.exists()
    time_rows, freq_rows = weight_tables(build_weight(0.5, 0.3), 10.0, 21, 21)
    assert plots.weight_plot(tmp_path / "w.svg", time_rows, freq_rows).exists()
