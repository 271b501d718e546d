import math

import numpy as np
import pytest

from qpmathieu.sweep import (CSV_HEADER, FAILURE_GRAY, SKIPPED_GRAY, StabilityChart,
                             SweepSpec, chart_from_csv, export_csv, read_pgm, render_chart,
                             run_sweep, write_pgm)


def _chart(norms, cutoff=1.025, failures=()):
    norms = np.asarray(norms, dtype=float)
    return StabilityChart(SweepSpec(n=norms.shape[0], cutoff=cutoff), norms, list(failures))


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(n=1)
    with pytest.raises(ValueError):
        SweepSpec(n=10, epsilon=-0.1)
    with pytest.raises(ValueError):
        SweepSpec(n=10, region=(0, 3, 1, 3))
    with pytest.raises(ValueError):
        SweepSpec(n=10, region=(1, 11, 1, 3))


def test_cells_are_row_major_with_i_fastest():
    assert SweepSpec(n=4, region=(2, 3, 1, 2)).cells() == [(2, 1), (3, 1), (2, 2), (3, 2)]


def test_unforced_sweep_is_all_stable():
    chart = run_sweep(SweepSpec(n=10, epsilon=0.0), workers=1)
    assert not chart.failures
    assert np.all(np.abs(chart.max_norms - 1) < 1e-6)
    img = read_pgm(render_chart(chart))
    assert img.shape == (10, 10) and not img.any()


def test_island_cells():
    chart = run_sweep(SweepSpec(n=800, epsilon=0.1, region=(435, 436, 425, 425)), workers=1)
    assert chart.stable(435, 425) is True
    assert chart.stable(436, 425) is False
    row = [ln for ln in export_csv(chart).splitlines() if ln.startswith("435,425,")]
    assert row[0].endswith(",1")


def test_determinism_and_parallel_equivalence():
    spec = SweepSpec(n=12, epsilon=0.2)
    serial = export_csv(run_sweep(spec, workers=1))
    again = export_csv(run_sweep(spec, workers=1))
    parallel = export_csv(run_sweep(spec, workers=3, batch_size=5))
    assert serial == again == parallel


def test_zoom_property():
    # lower-left quadrant at (n, eps) against the full chart at (n/2, 4 eps)
    n = 40
    quadrant = run_sweep(SweepSpec(n=n, epsilon=0.1, region=(1, n // 2, 1, n // 2)),
                         workers=1)
    full = run_sweep(SweepSpec(n=n // 2, epsilon=0.4), workers=1)
    a = quadrant.unstable_mask()[: n // 2, : n // 2]
    b = full.unstable_mask()
    assert (a == b).mean() >= 0.99


def test_binary_render_single_unstable_cell():
    norms = np.ones((5, 5))
    norms[1, 3] = 2.0  # cell (i=4, j=2)
    img = read_pgm(render_chart(_chart(norms)))
    assert img.sum() == 255
    # beta grows upward, so j=2 sits at row n - j
    assert img[5 - 2, 4 - 1] == 255


def test_grayscale_render():
    norms = np.array([[1.0, 10.0], [100.0, math.sqrt(10)]])
    img = read_pgm(render_chart(_chart(norms), "grayscale"))
    assert img[1, 0] == 0 and img[1, 1] == 255 and img[0, 0] == 255
    assert img[0, 1] == 128


def test_failures_and_skipped_cells_render_gray():
    norms = np.full((3, 3), np.nan)
    norms[0, 0] = 1.0
    spec = SweepSpec(n=3, region=(1, 2, 1, 1))
    chart = StabilityChart(spec, norms, [(2, 1, "EigenFailure")])
    img = read_pgm(render_chart(chart))
    assert img[2, 0] == 0
    assert img[2, 1] == FAILURE_GRAY
    assert img[0, 0] == SKIPPED_GRAY
    csv = export_csv(chart).splitlines()
    assert csv[2] == "2,1,0.666666667,0.333333333,nan,-1"


def test_unknown_mode():
    with pytest.raises(ValueError):
        render_chart(_chart(np.ones((2, 2))), "sepia")


def test_csv_layout():
    text = export_csv(_chart([[1.0, 1.5], [1.01, 1.0]]))
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 5
    assert lines[1:] == ["1,1,0.5,0.5,1,1", "2,1,1,0.5,1.5,0", "1,2,0.5,1,1.01,1",
                         "2,2,1,1,1,1"]


def test_csv_roundtrip():
    chart = _chart([[1.0, 1.5], [np.nan, 1.0]], failures=[(1, 2, "x")])
    back = chart_from_csv(export_csv(chart), chart.spec)
    assert export_csv(back) == export_csv(chart)
    with pytest.raises(ValueError):
        chart_from_csv("a,b\n", chart.spec)


def test_pgm_header_and_parse():
    px = np.arange(12, dtype=np.uint8).reshape(3, 4)
    data = write_pgm(px)
    assert data.startswith(b"P5\n4 3\n255\n")
    assert np.array_equal(read_pgm(data), px)
    with pytest.raises(ValueError):
        read_pgm(b"P2\n1 1\n255\n0")
    with pytest.raises(ValueError):
        read_pgm(b"P5\n2 2\n255\n\x00")
