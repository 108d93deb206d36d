import numpy as np

from synchronizer.utils.plotting import plot_sro_trace, plot_sto_sweep, plot_trajectory


def test_sro_trace_svg(tmp_path):
    t = np.arange(50) * 0.128
    path = plot_sro_trace(tmp_path / 'plots' / 'trace.svg', t, np.full(50, 12.0), np.arange(50) >= 40,
                          np.full(50, 12.5), title='scenario-1_seed0')
    text = path.read_text(encoding='utf-8')
    assert text.lstrip().startswith('<?xml')
    assert 'scenario-1_seed0' in text


def test_svg_is_reproducible(tmp_path):
    t = np.linspace(0.0, 10.0, 100)
    a = plot_trajectory(tmp_path / 'a.svg', t, np.sin(t)).read_bytes()
    b = plot_trajectory(tmp_path / 'b.svg', t, np.sin(t)).read_bytes()
    assert a == b


def test_sweep_with_empty_length(tmp_path):
    path = plot_sto_sweep(tmp_path / 'sweep.svg', {60.0: [1.0, -3.0, 12.0], 120.0: []})
    assert path.exists()
