"""Trajectory files shared by the I/O tests and the acceptance suite.

``round_trip_cases`` builds 20 diverse trajectories.  ``MUTATIONS`` lists 30
single edits of ``BASE_TEXT``; each must be rejected with the stated line
number and a message containing the stated fragment.
"""
import numpy as np

from sgproc.experiments import row_params
from sgproc.sgmodel import (FixedInit, ModelParams, SamplingGrid, StationaryInit,
                            Trajectory, WindowSpec, simulate)

BASE_TEXT = """\
#meta format_version=1
#meta window_width=2.0
#meta window_height=1.0
#meta n=4
#meta delta=1.0
#meta init_mode=fixed:0.1
#meta horizon=5.0
#meta seed=3
#latent id=1 birth=0.5 death=5.0
#latent id=2 birth=1.5 death=3.5
#latent id=4 birth=2.2 death=5.0
time_index,time,individual_id,x,y,radius
1,1.0,1,0.25,0.5,0.3
2,2.0,1,0.25,0.5,0.6
2,2.0,2,1.5,0.75,0.2
3,3.0,1,0.25,0.5,0.9
3,3.0,2,1.5,0.75,0.4
3,3.0,4,1.9,0.1,0.35
4,4.0,1,0.25,0.5,1.1
4,4.0,4,1.9,0.1,0.5
"""


def _lines():
    return BASE_TEXT.splitlines()


def _join(lines):
    return "\n".join(lines) + "\n"


def replace_line(lineno, text):
    def edit():
        lines = _lines()
        lines[lineno - 1] = text
        return _join(lines)
    return edit


def delete_line(lineno):
    def edit():
        lines = _lines()
        del lines[lineno - 1]
        return _join(lines)
    return edit


def insert_after(lineno, text):
    def edit():
        lines = _lines()
        lines.insert(lineno, text)
        return _join(lines)
    return edit


def swap_lines(a, b):
    def edit():
        lines = _lines()
        lines[a - 1], lines[b - 1] = lines[b - 1], lines[a - 1]
        return _join(lines)
    return edit


# (name, edit, expected 1-based line, message fragment)
MUTATIONS = [
    ("missing_version", delete_line(1), 11, "format_version"),
    ("future_version", replace_line(1, "#meta format_version=2"), 1, "unsupported"),
    ("negative_width", replace_line(2, "#meta window_width=-1.0"), 2, "width"),
    ("bad_height", replace_line(3, "#meta window_height=abc"), 3, "not a number"),
    ("zero_steps", replace_line(4, "#meta n=0"), 4, "at least 1"),
    ("fractional_steps", replace_line(4, "#meta n=2.5"), 4, "not an integer"),
    ("zero_delta", replace_line(5, "#meta delta=0.0"), 5, "positive"),
    ("nan_delta", replace_line(5, "#meta delta=nan"), 5, "finite"),
    ("delta_and_times", insert_after(5, "#meta times=1.0,2.0,3.0,4.0"), 13, "exactly one"),
    ("no_grid", delete_line(5), 11, "exactly one"),
    ("bad_init_mode", replace_line(6, "#meta init_mode=warm"), 6, "init"),
    ("short_horizon", replace_line(7, "#meta horizon=3.0"), 7, "horizon precedes"),
    ("duplicate_meta", insert_after(8, "#meta seed=4"), 9, "duplicate"),
    ("meta_without_value", replace_line(8, "#meta seed"), 8, "key=value"),
    ("stray_header_text", replace_line(8, "meta seed=3"), 8, "unexpected header"),
    ("missing_data_header", delete_line(12), 12, "unexpected header"),
    ("short_row", replace_line(13, "1,1.0,1,0.25,0.5"), 13, "expected 6 fields"),
    ("index_out_of_range", replace_line(20, "5,4.0,4,1.9,0.1,0.5"), 20, "outside 1..4"),
    ("time_mismatch", replace_line(14, "2,2.5,1,0.25,0.5,0.6"), 14, "does not match"),
    ("unsorted_rows", swap_lines(14, 15), 15, "sorted"),
    ("duplicate_row", insert_after(13, "1,1.0,1,0.25,0.5,0.3"), 14, "sorted"),
    ("zero_radius", replace_line(16, "3,3.0,1,0.25,0.5,0.0"), 16, "radius must be positive"),
    ("negative_radius", replace_line(17, "3,3.0,2,1.5,0.75,-0.4"), 17,
     "radius must be positive"),
    ("infinite_radius", replace_line(19, "4,4.0,1,0.25,0.5,inf"), 19, "finite"),
    ("outside_window", replace_line(18, "3,3.0,4,2.5,0.1,0.35"), 18, "outside the window"),
    ("location_drift", replace_line(19, "4,4.0,1,0.26,0.5,1.1"), 19, "location"),
    ("gap_in_life", delete_line(16), 18, "contiguity violated"),
    ("missing_latent", delete_line(11), 17, "no latent line for id 4"),
    ("latent_lifetime_mismatch", replace_line(10, "#latent id=2 birth=1.5 death=5.0"), 10,
     "disagree with its lifetime"),
    ("latent_death_before_birth", replace_line(9, "#latent id=1 birth=6.0 death=5.0"), 9,
     "birth < death"),
]


def round_trip_cases():
    """20 trajectories covering both init modes, both schemes, ragged grids,
    rectangular windows and empty data."""
    cases = []
    for row in (1, 2, 3, 4):
        params, m0 = row_params(row)
        for seed, scheme in ((row, "exact"), (10 + row, "euler:0.05")):
            grid = SamplingGrid.equidistant(1.0, 20)
            cases.append(simulate(params, WindowSpec(), 25.0, grid, FixedInit(m0), scheme,
                                  np.random.default_rng(seed)))
    params, _ = row_params(1)
    dense = ModelParams(params.cir, 3.0, 0.2)
    for seed in range(4):
        grid = SamplingGrid.equidistant(0.5 + seed, 12)
        cases.append(simulate(dense, WindowSpec(1.5, 0.75), grid.times[-1], grid,
                              StationaryInit(), "exact", np.random.default_rng(100 + seed)))
    ragged = SamplingGrid([0.3, 0.7, 1.9, 2.0, 5.25, 8.0, 13.125])
    for seed in range(4):
        cases.append(simulate(dense, WindowSpec(3.0, 2.0), 20.0, ragged, FixedInit(0.05),
                              "exact", np.random.default_rng(200 + seed)))
    empty = Trajectory(window=WindowSpec(), grid=SamplingGrid.equidistant(1.0, 5), ids=[],
                       locations=np.zeros((0, 2)), sizes=np.zeros((0, 5)))
    cases.append(empty)
    tiny = Trajectory(window=WindowSpec(2.0, 1.0), grid=SamplingGrid([1.0, 2.0, 3.0]),
                      ids=[7, 40], locations=[[0.0, 1.0], [2.0, 0.0]],
                      sizes=[[1e-300, 2.5, 0.0], [0.0, 0.0, 1 / 3]])
    cases.append(tiny)
    cases.append(simulate(dense, WindowSpec(), 60.0, SamplingGrid.equidistant(1.0, 60),
                          StationaryInit(), "euler:0.1", np.random.default_rng(300)))
    cases.append(simulate(dense, WindowSpec(), 10.0, SamplingGrid.equidistant(1.0, 1),
                          FixedInit(0.1), "exact", np.random.default_rng(301)))
    assert len(cases) == 20
    return cases


def same_trajectory(a, b):
    """Exact equality of every stored field."""
    def same_opt(x, y):
        if x is None or y is None:
            return x is None and y is None
        return np.array_equal(x, y)

    return (a.window == b.window
            and np.array_equal(a.grid.times, b.grid.times)
            and np.array_equal(a.ids, b.ids)
            and np.array_equal(a.locations, b.locations)
            and np.array_equal(a.sizes, b.sizes)
            and a.init_mode == b.init_mode
            and same_opt(a.births, b.births)
            and same_opt(a.deaths, b.deaths)
            and a.horizon == b.horizon
            and a.meta == b.meta)
