import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmdark.analysis import classify
from dmdark.cavity import CavityConfig, net_dispersion, run_to_steady_state
from dmdark.export import region_row
from dmdark.fiber import StepControl
from dmdark.sweep import (
    DEFAULT_GAINS,
    DEFAULT_SMF_LENGTHS,
    BracketError,
    CellResult,
    RegionMap,
    SweepSpec,
    bisect_gain,
    formation_threshold,
    run_cell,
    run_sweep,
    single_dark_upper_boundary,
)


def tiny_base(**kw):
    base = dict(n_samples=128, window=40.0, step=StepControl(2e-3, kerr="exact"), max_round_trips=15)
    base.update(kw)
    return CavityConfig(**base)


def cell(smf, gain, label, count=0):
    return CellResult(smf, gain, 0, 0.0, label, count)


class TestSweepSpec:
    def test_default_axes(self):
        assert DEFAULT_SMF_LENGTHS == (0.0, 2.0, 4.0, 6.0, 7.6, 8.0, 9.0, 10.0)
        assert len(DEFAULT_GAINS) == 8
        assert DEFAULT_GAINS[0] == 400.0 and DEFAULT_GAINS[-1] == pytest.approx(650.0)
        assert SweepSpec().base.max_round_trips == 2000

    @pytest.mark.parametrize(
        "kw", [dict(smf_lengths=()), dict(gains=()), dict(smf_lengths=(-1.0,)), dict(gains=(0.0,)), dict(workers=0)]
    )
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            SweepSpec(**kw)

    def test_cells(self):
        spec = SweepSpec((0.0, 8.0), (400.0, 500.0, 600.0), seeds=(1, 2))
        assert len(spec.cells()) == 12


class TestRunSweep:
    def test_single_cell_equals_single_run(self):
        base = tiny_base()
        region = run_sweep(SweepSpec((8.0,), (485.0,), base))
        (c,) = region.cells
        cfg = base.with_smf_length(8.0).with_gain(485.0)
        f, trace = run_to_steady_state(cfg.initial.build(cfg.grid, 0), cfg, seed=0)
        ref = classify(trace, f, cfg.lambda0, cfg.depth_threshold, cfg.stable_trips)
        assert c.label == ref.label
        assert c.pulse_count == ref.pulse_count
        assert c.cw_level == ref.cw_level
        assert c.trips == len(trace)
        assert c.net_dispersion_ps2 == pytest.approx(net_dispersion(cfg))

    def test_worker_count_does_not_matter(self):
        spec = SweepSpec((0.0, 8.0), (400.0, 550.0), tiny_base())
        one = run_sweep(spec)
        two = run_sweep(SweepSpec(spec.smf_lengths, spec.gains, spec.base, workers=2))
        assert [region_row(c) for c in one.cells] == [region_row(c) for c in two.cells]
        assert [c.pulses for c in one.cells] == [c.pulses for c in two.cells]

    def test_skip_and_callback(self):
        spec = SweepSpec((0.0, 8.0), (400.0,), tiny_base())
        seen = []
        region = run_sweep(spec, skip=[(0.0, 400.0, 0)], on_result=seen.append)
        assert [c.key for c in region.cells] == [(8.0, 400.0, 0)]
        assert seen == list(region.cells)

    def test_failure_is_recorded(self):
        r = run_cell(tiny_base(n_samples=64), 8.0, 3e5, 0)  # exp(g L / 2) overflows
        assert r.label == "error"
        assert r.error.startswith("PropagationError")


class TestRegionMap:
    def test_sorted_and_lookup(self):
        region = RegionMap((cell(8.0, 500.0, "cw"), cell(0.0, 400.0, "single_dark")))
        assert [c.smf_length_m for c in region.cells] == [0.0, 8.0]
        assert region.cell(8.0, 500.0).label == "cw"
        with pytest.raises(KeyError):
            region.cell(1.0, 1.0)

    def test_formation_threshold(self):
        region = RegionMap(
            (cell(4.0, 400.0, "cw"), cell(4.0, 500.0, "single_dark", 1), cell(4.0, 600.0, "multiple_dark", 2))
        )
        assert formation_threshold(region, 4.0) == 500.0
        assert formation_threshold(RegionMap((cell(1.0, 400.0, "cw"),)), 1.0) == math.inf

    def test_upper_boundary(self):
        col = (cell(7.6, 500.0, "cw"), cell(7.6, 550.0, "single_dark", 1), cell(7.6, 600.0, "multiple_dark", 2))
        assert single_dark_upper_boundary(RegionMap(col), 7.6) == 575.0
        top = (cell(7.6, 500.0, "cw"), cell(7.6, 600.0, "single_dark", 1))
        assert single_dark_upper_boundary(RegionMap(top), 7.6) is None


class TestBisection:
    def test_monotone_oracle(self):
        lo, hi = bisect_gain(lambda g: g <= 500.0, 400.0, 650.0, 1.0)
        assert lo <= 500.0 < hi
        assert hi - lo <= 1.0

    @given(st.floats(401.0, 649.0), st.floats(0.01, 50.0))
    def test_brackets_the_boundary(self, threshold, tol):
        lo, hi = bisect_gain(lambda g: g < threshold, 400.0, 650.0, tol)
        assert lo < threshold <= hi and hi - lo <= tol

    def test_halving_tol_halves_width(self):
        w = [(lambda b: b[1] - b[0])(bisect_gain(lambda g: g < 580.0, 485.0, 600.0, t)) for t in (10.0, 5.0)]
        assert w[1] == pytest.approx(w[0] / 2)

    def test_bracket_failure(self):
        with pytest.raises(BracketError):
            bisect_gain(lambda g: False, 400.0, 650.0, 1.0)
        with pytest.raises(BracketError):
            bisect_gain(lambda g: True, 400.0, 650.0, 1.0)

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            bisect_gain(lambda g: g < 500, 400.0, 650.0, 0.0)
