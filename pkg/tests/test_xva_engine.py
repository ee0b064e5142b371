from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratingxva.ctmc_sim import Closeout, TriggerLevels
from ratingxva.errors import InconsistentPathSet, InsufficientPaths, MissingBaseline, NumericError
from ratingxva.scenario import RecoverySpec, load_scenario_file, shipped_config
from ratingxva.xva_engine import (
    ALL_TERMS,
    CloseoutState,
    RunningStat,
    add_derived,
    build_market,
    check_pathwise,
    estimate_adjustments,
    estimate_grid,
    mitigation_table,
    pathwise_cva_terms,
    run_chunk,
)

BB, DD = TriggerLevels(2, 2), TriggerLevels(4, 4)


@pytest.fixture(scope="module")
def irs():
    return load_scenario_file(shipped_config("irs_reference.cfg"))


def _state(idx, cls, s, c, disc=1.0, ids=None):
    n = len(idx)
    return CloseoutState(
        event_idx=np.asarray(idx),
        classification=np.asarray(cls),
        s_delta=np.asarray(s, dtype=float),
        collateral=np.asarray(c, dtype=float),
        discount=np.full(n, disc),
        path_index=np.arange(n) if ids is None else np.asarray(ids),
    )


class TestPathwise:
    def test_counterparty_default_leg(self):
        st_ = _state([0], [Closeout.CPTY_DEFAULT], [10e-3], [4e-3])
        t = pathwise_cva_terms(st_, st_, RecoverySpec())
        assert t["UCVA_R"][0] == pytest.approx(3.6e-3)
        assert t["DVA_R"][0] == 0.0
        assert t["URVA"][0] == 0.0

    def test_quiet_path(self):
        st_ = _state([-1], [Closeout.NONE], [0.2], [0.0])
        t = add_derived(pathwise_cva_terms(st_, st_, RecoverySpec()))
        assert all(v[0] == 0.0 for v in t.values())

    def test_trigger_before_default(self):
        dflt = _state([5], [Closeout.CPTY_DEFAULT], [0.02], [0.0])
        trig = _state([2], [Closeout.TRIGGER], [0.01], [0.0])
        t = pathwise_cva_terms(dflt, trig, RecoverySpec())
        assert t["UCVA"][0] == pytest.approx(0.012)
        assert t["UCVA_R"][0] == 0.0
        assert t["URVA"][0] == pytest.approx(0.012)

    def test_rehypothecation_leg(self):
        st_ = _state([0], [Closeout.CPTY_DEFAULT], [0.01], [0.02])
        t = pathwise_cva_terms(st_, st_, RecoverySpec(R1=0.4, Rh1=0.5))
        # posted collateral 0.02 returns only half: loss on 0.01 - 0.01 = 0 vs 0.01 - 0.02 < 0
        assert t["UCVA_R"][0] == 0.0
        assert t["UCVA_Rh"][0] == 0.0
        st_ = _state([0], [Closeout.INV_DEFAULT], [-0.01], [-0.02])
        t = pathwise_cva_terms(st_, st_, RecoverySpec(R2=0.4, Rh2=0.5))
        assert t["DVA_R"][0] == 0.0
        assert t["DVA_Rh"][0] == pytest.approx(0.0)

    def test_mismatched_paths(self):
        a = _state([0, 1], [1, 1], [0.1, 0.1], [0, 0])
        b = _state([0, 1], [1, 1], [0.1, 0.1], [0, 0], ids=[5, 6])
        with pytest.raises(InconsistentPathSet):
            pathwise_cva_terms(a, b, RecoverySpec())

    def test_trigger_after_default(self):
        a = _state([1], [1], [0.1], [0])
        b = _state([3], [4], [0.1], [0])
        with pytest.raises(InconsistentPathSet):
            pathwise_cva_terms(a, b, RecoverySpec())

    def test_check_pathwise_catches(self):
        st_ = _state([0], [1], [0.1], [0])
        t = pathwise_cva_terms(st_, st_, RecoverySpec())
        t["URVA"] = t["URVA"] + 1e-3
        with pytest.raises(NumericError):
            check_pathwise(t, BB, 4, RecoverySpec())


class TestRunningStat:
    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60), st.integers(1, 59))
    @settings(max_examples=100, deadline=None)
    def test_merge_matches_direct(self, xs, cut):
        x = np.array(xs)
        cut = min(cut, len(xs) - 1)
        m = RunningStat.of(x[:cut]).merge(RunningStat.of(x[cut:]))
        assert m.n == len(xs)
        assert m.mean == pytest.approx(x.mean(), abs=1e-9)
        assert m.se == pytest.approx(x.std(ddof=1) / np.sqrt(x.size), rel=1e-6, abs=1e-9)

    def test_empty(self):
        assert RunningStat.of(np.array([])).n == 0
        assert np.isnan(RunningStat(1, 0.0, 0.0).se)


class TestEstimates:
    def test_default_triggers_match_cva(self, irs):
        rep = estimate_adjustments(replace(irs, triggers=(DD,), schemes=("none",)), n_paths=4000)
        assert rep.RVA == 0.0 and rep.URVA == 0.0 and rep.DRVA == 0.0
        assert rep.CVA_R == rep.CVA

    def test_triggers_mitigate(self, irs):
        grid = estimate_grid(irs, 0.0, ("none",), (BB, DD), n_paths=8000)
        assert abs(grid[("none", BB)].CVA_R) < abs(grid[("none", DD)].CVA_R)

    def test_identities_on_full_grid(self, irs):
        grid = estimate_grid(irs, 1.0, n_paths=3000)
        assert len(grid) == 27
        for rep in grid.values():
            rep.check_identities()
            e = rep.estimates
            assert e["CVA_R"] == e["UCVA_R"] - e["DVA_R"]
            assert e["RVA"] == e["CVA"] - e["CVA_R"]
            assert e["CVA_Rh"] == e["CVA_R"]  # unit collateral recovery

    def test_pathwise_default_level_equality(self, irs):
        m = build_market(irs, 0.0)
        _, kept, _, _ = run_chunk(m, irs.schemes, (DD,), irs.base_seed, 0, 3000, keep_terms=True)
        for scheme in irs.schemes:
            t = kept[(scheme, DD)]
            assert np.array_equal(t["UCVA_R"], t["UCVA"])
            assert np.array_equal(t["DVA_R"], t["DVA"])

    def test_rehypothecation_changes_value(self, irs):
        # with triggers at B no collateral is ever posted by two A-rated parties
        sc = replace(irs, recovery=RecoverySpec(0.4, 0.4, 0.6, 0.6), schemes=("linear",), triggers=(DD,))
        rep = estimate_adjustments(sc, n_paths=4000)
        assert rep.CVA_Rh != rep.CVA_R
        assert rep.RVA_h == pytest.approx(rep.RVA + rep.URVA_h + rep.DRVA_h, abs=1e-15)

    def test_insufficient_paths(self, irs):
        with pytest.raises(InsufficientPaths):
            estimate_adjustments(irs, n_paths=0)

    def test_workers_do_not_matter(self, irs):
        sc = replace(irs, triggers=(BB, DD), schemes=("none", "exponential"))
        a = estimate_grid(sc, 0.0, n_paths=9000, workers=1)
        b = estimate_grid(sc, 0.0, n_paths=9000, workers=3)
        for k in a:
            assert a[k].estimates == b[k].estimates
            assert a[k].std_errors == b[k].std_errors

    def test_se_scaling(self, irs):
        sc = replace(irs, triggers=(DD,), schemes=("none",))
        small = estimate_adjustments(sc, n_paths=5000).std_errors["DVA"]
        big = estimate_adjustments(sc, n_paths=20000).std_errors["DVA"]
        assert small / big == pytest.approx(2.0, rel=0.2)

    def test_report_fields(self, irs):
        rep = estimate_adjustments(replace(irs, triggers=(BB,)), n_paths=2000)
        assert rep.pair_label == "BB"
        assert rep.n_paths == 2000 and rep.seed == irs.base_seed
        assert set(ALL_TERMS) <= set(rep.estimates)
        assert np.isfinite(rep.mitigation_pct)
        with pytest.raises(AttributeError):
            rep.NOPE


class TestMitigation:
    def test_table(self, irs):
        grid = estimate_grid(irs, 0.0, ("none",), (BB, DD), n_paths=4000)
        reps = {tr: grid[("none", tr)] for tr in (BB, DD)}
        mit = mitigation_table(reps)
        assert mit[DD] == 0.0
        assert mit[BB] > 0
        with pytest.raises(MissingBaseline):
            mitigation_table({BB: reps[BB]})


def test_unilateral_rva_nonnegative(irs):
    sc = replace(irs, investor_default_free=True)
    grid = estimate_grid(sc, 0.0, n_paths=4000)
    for rep in grid.values():
        assert rep.DVA == 0.0
        assert rep.RVA >= 0.0
