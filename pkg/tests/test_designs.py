"""Sampling designs: SRS, systematic lattices, and circular-plot layouts."""

import numpy as np
import pytest

from samplab.errors import LayoutError, PackingError
from samplab.frame import GridFrame, Rect
from samplab.designs import (
    SampleDraw,
    draws_to_csv,
    enumerate_systematic,
    plot_srs_draw,
    plot_systematic_draw,
    square_layout,
    srs_draw,
    systematic_draw,
    systematic_layout,
    systematic_random_draw,
)
from samplab.streams import stream

RADIUS = 5.641895835477563


def test_sample_draw_validation():
    with pytest.raises(ValueError):
        SampleDraw(design_tag="SRS", n=2, indices=np.array([3, 3]))
    with pytest.raises(ValueError):
        SampleDraw(design_tag="SRS", n=3, indices=np.array([0, 1]))
    with pytest.raises(ValueError):
        SampleDraw(design_tag="SRS", n=2)
    with pytest.raises(ValueError):
        SampleDraw(design_tag="SRS", n=0, indices=np.array([], dtype=int))


def test_srs_draw_is_sorted_distinct_in_range():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    rng = stream(5, 1, 0, 0)
    for _ in range(50):
        d = srs_draw(fr, 5, rng)
        idx = d.indices
        assert len(idx) == 5
        assert np.all(np.diff(idx) > 0)
        assert idx.min() >= 0 and idx.max() < 36


def test_srs_draw_size_bounds():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    rng = stream(5, 1, 0, 0)
    with pytest.raises(LayoutError):
        srs_draw(fr, 1, rng)
    with pytest.raises(LayoutError):
        srs_draw(fr, 37, rng)
    assert srs_draw(fr, 36, rng).n == 36


def test_srs_inclusion_frequencies_are_uniform():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    rng = stream(5, 1, 0, 0)
    counts = np.zeros(36)
    reps = 2000
    for _ in range(reps):
        counts[srs_draw(fr, 5, rng).indices] += 1
    p = 5.0 / 36.0
    se = np.sqrt(p * (1 - p) / reps)
    assert np.abs(counts / reps - p).max() < 4 * se


def test_systematic_layout_geometry():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    lay = systematic_layout(fr, 2, 2)
    assert lay.spacing_x == 3 and lay.spacing_y == 3
    assert lay.num_starts == 9
    assert lay.n == 4


def test_systematic_layout_rejects_nondividing_spacings():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    with pytest.raises(LayoutError) as err:
        systematic_layout(fr, 4, 5)
    msg = str(err.value)
    assert "4" in msg and "5" in msg  # both problems reported together


def test_square_layout_from_sample_size():
    fr = GridFrame(n_cols=10, n_rows=10, cell_side=1.0)
    lay = square_layout(fr, 25)
    assert (lay.k_cols, lay.k_rows) == (5, 5)
    with pytest.raises(LayoutError):
        square_layout(fr, 10)


def test_systematic_starts_partition_the_frame():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    lay = systematic_layout(fr, 2, 2)
    seen = np.concatenate([systematic_draw(lay, s).indices
                           for s in range(lay.num_starts)])
    assert len(seen) == 36
    assert np.array_equal(np.sort(seen), np.arange(36))


def test_enumerate_systematic_covers_all_starts():
    fr = GridFrame(n_cols=2, n_rows=2, cell_side=1.0)
    lay = systematic_layout(fr, 1, 1)
    draws = list(enumerate_systematic(lay))
    assert len(draws) == 4
    assert all(d.n == 1 for d in draws)
    assert sorted(int(d.indices[0]) for d in draws) == [0, 1, 2, 3]
    assert [d.start_id for d in draws] == [0, 1, 2, 3]


def test_systematic_draw_start_out_of_range():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    lay = systematic_layout(fr, 2, 2)
    with pytest.raises(IndexError):
        systematic_draw(lay, 9)


def test_systematic_random_draw_replays_by_stream():
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    lay = systematic_layout(fr, 3, 3)
    d1 = systematic_random_draw(lay, stream(8, 1, 0, 0))
    d2 = systematic_random_draw(lay, stream(8, 1, 0, 0))
    assert d1.start_id == d2.start_id
    assert np.array_equal(d1.indices, d2.indices)
    assert 0 <= d1.start_id < lay.num_starts


def test_plot_srs_draw_respects_spacing_and_inset():
    region = Rect(0.0, 0.0, 200.0, 200.0)
    rng = stream(9, 4)
    for _ in range(100):
        d = plot_srs_draw(region, RADIUS, 8, rng)
        c = d.centers
        assert c.shape == (8, 2)
        assert np.all(c[:, 0] >= RADIUS) and np.all(c[:, 0] <= 200.0 - RADIUS)
        assert np.all(c[:, 1] >= RADIUS) and np.all(c[:, 1] <= 200.0 - RADIUS)
        diff = c[:, None, :] - c[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        assert dist.min() >= 2.0 * RADIUS


def test_plot_srs_draw_packing_failure_reports_count():
    region = Rect(0.0, 0.0, 100.0, 100.0)
    with pytest.raises(PackingError) as err:
        plot_srs_draw(region, 40.0, 3, stream(9, 4))
    assert "3" in str(err.value)


def test_plot_srs_draw_radius_too_big_for_region():
    with pytest.raises(PackingError):
        plot_srs_draw(Rect(0.0, 0.0, 10.0, 10.0), 6.0, 1, stream(9, 4))


def test_plot_systematic_draw_lattice_geometry():
    region = Rect(0.0, 0.0, 500.0, 700.0)
    d = plot_systematic_draw(region, RADIUS, 5, 7, stream(9, 4))
    c = d.centers
    assert c.shape == (35, 2)
    xs = np.unique(c[:, 0])
    ys = np.unique(c[:, 1])
    assert len(xs) == 5 and len(ys) == 7
    assert np.allclose(np.diff(xs), 100.0, rtol=0, atol=1e-9)
    assert np.allclose(np.diff(ys), 100.0, rtol=0, atol=1e-9)
    assert RADIUS <= xs[0] <= 100.0 - RADIUS
    assert RADIUS <= ys[0] <= 100.0 - RADIUS
    assert np.all(c[:, 0] <= 500.0 - RADIUS) and np.all(c[:, 1] <= 700.0 - RADIUS)


def test_plot_systematic_draw_replays_by_stream():
    region = Rect(0.0, 0.0, 500.0, 700.0)
    d1 = plot_systematic_draw(region, RADIUS, 5, 7, stream(3, 4))
    d2 = plot_systematic_draw(region, RADIUS, 5, 7, stream(3, 4))
    assert np.array_equal(d1.centers, d2.centers)


def test_plot_systematic_draw_spacing_too_tight():
    region = Rect(0.0, 0.0, 500.0, 700.0)
    with pytest.raises(PackingError):
        plot_systematic_draw(region, RADIUS, 50, 70, stream(9, 4))


def test_draws_to_csv_round_trip(tmp_path):
    fr = GridFrame(n_cols=6, n_rows=6, cell_side=1.0)
    rng = stream(5, 1, 0, 0)
    draws = [srs_draw(fr, 4, rng) for _ in range(3)]
    path = tmp_path / "draws.csv"
    draws_to_csv(draws, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1 + sum(d.n for d in draws)
    assert "design" in lines[0]
