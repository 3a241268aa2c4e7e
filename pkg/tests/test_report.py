"""Figure rendering from records and sweep results."""

import numpy as np
import pytest

from heatstep.plant import ConfigurationError
from heatstep.report import render_figures, render_sweep_figure
from heatstep.simulator import RECORD_COLUMNS, SimRecord
from heatstep.verify import SweepResult

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def small_record() -> SimRecord:
    t = np.linspace(0.0, 1.0, 40)
    cols = {name: np.exp(-t) for name in RECORD_COLUMNS}
    cols["t"] = t
    cols["ctrl"] = np.sin(t)
    return SimRecord(**cols)


def test_render_figures_writes_three_pngs(tmp_path):
    paths = render_figures(small_record(), str(tmp_path), stem="case")
    assert len(paths) == 3
    names = {p.rsplit("/", 1)[-1] for p in paths}
    assert names == {"case_norms.png", "case_lyapunov.png", "case_boundary.png"}
    for p in paths:
        blob = open(p, "rb").read()
        assert blob[:8] == PNG_MAGIC
        assert len(blob) > 1000


def test_render_figures_tolerates_nonpositive_values(tmp_path):
    record = small_record()
    record.V[:] = 0.0          # log panels must survive an identically zero column
    record.normX[:5] = -1.0
    paths = render_figures(record, str(tmp_path))
    assert len(paths) == 3


def test_render_figures_rejects_empty_record(tmp_path):
    empty = SimRecord(**{name: np.array([]) for name in RECORD_COLUMNS})
    with pytest.raises(ConfigurationError):
        render_figures(empty, str(tmp_path))


def test_render_figures_creates_the_directory(tmp_path):
    target = tmp_path / "nested" / "figs"
    paths = render_figures(small_record(), str(target))
    assert all(p.startswith(str(target)) for p in paths)


def test_render_sweep_figure(tmp_path):
    result = SweepResult(
        amplitudes=np.array([0.0, 0.1, 0.2, 0.4]),
        steady_state_norms=np.array([0.0, 1.0, 2.0, 4.0]),
        sup_Ds=np.zeros(4),
    )
    path = render_sweep_figure(result, str(tmp_path), stem="gain")
    assert path.endswith("gain_gain_map.png")
    assert open(path, "rb").read()[:8] == PNG_MAGIC
