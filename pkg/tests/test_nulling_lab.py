import os
import runpy

import pandas as pd
import pytest
from pydantic import ValidationError

from backend.litehetnet.constants import FIG2_THRESHOLDS, FIG2B_BETA_DB
from backend.litehetnet.hetnet_enums import EngineKind, FigureKind, SweepAxis
from backend.litehetnet.netconfig import InParams, load_config
from backend.litehetnet.nulling_lab import NullingLab, SweepSpec, write_csv


@pytest.fixture(scope="module")
def lab():
    bundle = load_config(None, {"trials": 20, "workers": 1, "window_constant": 10.0, "seed": 5})
    return NullingLab(bundle, verbose=False)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"axis": SweepAxis.T1, "values": ()},
        {"axis": SweepAxis.T1, "values": (2.0, 2.0)},
        {"axis": SweepAxis.T1, "values": (5.0, 2.0)},
        {"axis": SweepAxis.U, "values": (0.0, 1.5)},
        {"axis": SweepAxis.T1, "values": (2.0,), "engines": (EngineKind.Analytical, EngineKind.Analytical)},
        {"axis": SweepAxis.T1, "values": (2.0,), "engines": ()},
    ],
)
def test_sweep_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        SweepSpec(**kwargs)


def test_sweep_spec_default_engine():
    spec = SweepSpec(axis=SweepAxis.BetaDb, values=(0.0, 10.0))
    assert spec.engines == (EngineKind.Analytical,)


def test_lab_defaults_to_fig2():
    lab = NullingLab(verbose=False)
    assert lab.network.n1 == 10
    assert lab.in_params == InParams(u_max=9, t1=10.0, t2=10.0)


def test_log_callback(lab):
    messages = []
    chatty = NullingLab(lab.bundle, verbose=True, verbose_callback=messages.append)
    chatty.log("hello")
    assert messages == ["hello"]
    lab.log("silent")


def test_coverage_table_keeps_order(lab):
    frame = lab.coverage_table([0.0, 5.0, 10.0])
    assert frame["beta_db"].tolist() == [0.0, 5.0, 10.0]
    assert frame["s"].is_monotonic_decreasing
    assert set(frame["mode"]) == {"IN"}


def test_coverage_rejects_too_many_dof(lab):
    with pytest.raises(ValueError):
        lab.coverage([10.0], params=InParams(u_max=10, t1=10.0, t2=10.0))


def test_simulate_columns_and_reuse(lab):
    frame = lab.simulate([0.0, 10.0])
    assert list(frame.columns) == ["beta_db", "s_mc", "ci95", "trials", "seed", "mode"]
    assert frame["trials"].tolist() == [20, 20]
    assert frame["seed"].tolist() == [5, 5]
    assert len(lab.last_trials) == 20
    again = lab.simulate([0.0, 10.0])
    pd.testing.assert_frame_equal(frame, again)


def test_compare_columns_and_gap(lab):
    frame = lab.compare([0.0, 10.0])
    assert list(frame.columns) == ["beta_db", "s_analytical", "s1", "s2", "s_mc", "ci95", "rel_gap"]
    expected = (frame["s_analytical"] - frame["s_mc"]).abs() / frame["s_analytical"]
    pd.testing.assert_series_equal(frame["rel_gap"], expected, check_names=False)


def test_sweep_over_u_with_asymptotics(lab):
    spec = SweepSpec(axis=SweepAxis.U, values=(0, 2, 4), engines=(EngineKind.Analytical, EngineKind.Asymptotic))
    frame = lab.sweep(spec)
    assert frame["u"].tolist() == [0, 2, 4]
    assert frame["order"].tolist() == [8, 8, 6]
    assert (frame["outage_asymptotic"] > 0).all()


def test_sweep_threshold_with_simulation(lab):
    spec = SweepSpec(axis=SweepAxis.TJoint, values=(2.0, 10.0), engines=(EngineKind.Analytical, EngineKind.MonteCarlo))
    frame = lab.sweep(spec)
    assert list(frame.columns) == ["t_joint", "s_analytical", "s_mc", "ci95", "rel_gap"]


def test_asymptotic_table(lab):
    frame = lab.asymptotic_table([0, 1, 2, 3])
    assert frame["d"].tolist() == [8, 8, 8, 7]
    assert set(frame["u_star_d"]) == {"{0,1,2}"}
    assert str(frame["u_star"].dtype) == "Int64"
    assert set(frame["u_star"].tolist()) <= {1, 2}


def test_asymptotic_table_without_thresholds(lab):
    frame = lab.asymptotic_table([0, 1], t1=1.0, t2=1.0)
    assert frame["u_star"].isna().all()
    assert frame["d1"].tolist() == [10, 10]


def test_threshold_grid(lab):
    frame, best = lab.threshold_grid([1.0, 10.0], [1.0, 10.0])
    assert len(frame) == 4
    assert best["s"] == pytest.approx(frame["s"].max())
    assert (best["t1"], best["t2"]) in set(zip(frame["t1"], frame["t2"]))


def test_optimal_u_report(lab):
    report = lab.optimal_u_report([-40.0, -35.0])
    assert report["u_star_d"] == [0, 1, 2]
    assert report["u_star"] in (1, 2)
    assert len(report["crossover"]) == 2


def test_write_csv_creates_directories(tmp_path):
    path = write_csv(pd.DataFrame({"a": [0.1234567891234]}), str(tmp_path / "nested" / "x.csv"))
    assert open(path, encoding="utf-8").read() == "a\n0.123456789\n"


def test_fig2a_figure_data(lab, tmp_path):
    csv_path, script_path = lab.figure_data(FigureKind.Fig2a, str(tmp_path), trials=20, seed=3)
    frame = pd.read_csv(csv_path)
    assert frame["threshold"].tolist() == list(FIG2_THRESHOLDS)
    assert {"s_analytical", "s_mc", "ci95", "s_non_in", "gain"} <= set(frame.columns)
    assert frame.loc[0, "gain"] == pytest.approx(0.0, abs=1e-9)

    source = open(script_path, encoding="utf-8").read()
    compile(source, script_path, "exec")
    pytest.importorskip("matplotlib")
    runpy.run_path(script_path)
    assert os.path.exists(tmp_path / "fig2a.pdf")


@pytest.mark.slow
def test_fig2b_figure_data(lab, tmp_path):
    csv_path, script_path = lab.figure_data(FigureKind.Fig2b, str(tmp_path))
    frame = pd.read_csv(csv_path)
    assert len(frame) == 5 * len(FIG2B_BETA_DB)
    assert (frame["outage_analytical"] > 0).all()
    pytest.importorskip("matplotlib")
    runpy.run_path(script_path)
    assert os.path.exists(tmp_path / "fig2b.pdf")
