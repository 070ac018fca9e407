import dataclasses
import math
import sys

import numpy as np
import pandas as pd
import pytest

from pyebh.simulate.harness import (
    NoData,
    ReplicationOutcome,
    SimSetting,
    aggregate,
    count_outcome,
    extended_settings,
    run_grid,
    run_replication,
    run_simulation,
    simulate_data,
    sparse_settings,
)
from pyebh.simulate.plotting import plot_grid

SMALL = SimSetting(n=50, m=10, k=3, gamma=6.0, alpha=0.1, reps=4, grid_size=20)


class TestSimSetting:
    @staticmethod
    @pytest.mark.parametrize(
        "changes",
        [
            {"n": 20},
            {"k": 11},
            {"rho": 1.0},
            {"sigma": 0.0},
            {"alpha": 1.0},
            {"lam": 0.0},
            {"reps": 0},
            {"methods": ("M9",)},
            {"calibrator": "nonsense"},
            {"knockoff_d": (1.0, 1.0)},
        ],
    )
    def test_invalid(changes: dict) -> None:
        with pytest.raises(ValueError):
            dataclasses.replace(SMALL, **changes)

    @staticmethod
    def test_presets() -> None:
        settings = sparse_settings(alpha=0.1, reps=3)
        assert [(s.n, s.m, s.k) for s in settings] == [(200, 40, 8), (500, 50, 10), (1000, 100, 20)]
        assert all(s.alpha == 0.1 and s.reps == 3 and s.rho == 0.5 for s in settings)
        extended = extended_settings()
        assert len(extended) == 12
        assert {s.rho for s in extended} == {0.1, 0.9}
        assert (200, 40, 20) in {(s.n, s.m, s.k) for s in extended}


class TestSimulateData:
    @staticmethod
    def test_common_random_numbers_across_gamma() -> None:
        X1, beta1, support1, noise1 = simulate_data(SMALL, 2)
        X2, beta2, support2, noise2 = simulate_data(dataclasses.replace(SMALL, gamma=2.0), 2)
        assert np.array_equal(X1, X2)
        assert np.array_equal(noise1, noise2)
        assert np.array_equal(support1, support2)
        assert np.array_equal(beta1, 3 * beta2)

    @staticmethod
    def test_replications_differ() -> None:
        X1, *_ = simulate_data(SMALL, 0)
        X2, *_ = simulate_data(SMALL, 1)
        X3, *_ = simulate_data(dataclasses.replace(SMALL, master_seed=1), 0)
        assert not np.array_equal(X1, X2)
        assert not np.array_equal(X1, X3)

    @staticmethod
    def test_random_signs() -> None:
        _, beta, support, _ = simulate_data(dataclasses.replace(SMALL, k=10, random_signs=True), 0)
        assert np.all(np.abs(beta) == 6.0)
        assert support.tolist() == list(range(10))


class TestCounting:
    @staticmethod
    def test_count_outcome() -> None:
        assert count_outcome([1, 2, 5], [2, 5, 7]) == (1, 3, 2)
        assert count_outcome([], [2, 5, 7]) == (0, 0, 0)

    @staticmethod
    def test_aggregate() -> None:
        setting = dataclasses.replace(SMALL, k=4, methods=("M1",))
        outcomes = [
            ReplicationOutcome(0, {"M1": (1, 4, 3)}),
            ReplicationOutcome(1, {"M1": (0, 0, 0)}),
            ReplicationOutcome(2, error="DegenerateFit: sigma_hat = 0"),
        ]
        result = aggregate(outcomes, setting)
        summary = result.summaries["M1"]
        assert summary.fdr_hat == pytest.approx(0.125)
        assert summary.power_hat == pytest.approx(0.375)
        assert summary.reps_completed == 2
        assert result.reps_failed == 1
        assert summary.se_fdr == pytest.approx(math.sqrt(0.125 * 0.875 / 2))

    @staticmethod
    def test_aggregate_without_signals() -> None:
        setting = dataclasses.replace(SMALL, k=0, methods=("M1",))
        result = aggregate([ReplicationOutcome(0, {"M1": (2, 2, 0)})], setting)
        assert result.summaries["M1"].fdr_hat == 1.0
        assert math.isnan(result.summaries["M1"].power_hat)

    @staticmethod
    def test_no_data() -> None:
        with pytest.raises(NoData):
            aggregate([ReplicationOutcome(0, error="x")], SMALL)


class TestRunSimulation:
    @staticmethod
    def test_replication() -> None:
        outcome = run_replication(SMALL, 0)
        assert outcome.completed
        assert set(outcome.counts) == set(SMALL.methods)
        for false, rejected, true in outcome.counts.values():
            assert false + true == rejected
            assert 0 <= true <= SMALL.k

    @staticmethod
    def test_failed_replications_are_excluded() -> None:
        setting = dataclasses.replace(SMALL, knockoff_d=(2.5,) * 10)
        outcome = run_replication(setting, 0)
        assert not outcome.completed
        assert outcome.error.startswith("InfeasibleD")
        with pytest.raises(NoData):
            run_simulation(setting)

    @staticmethod
    def test_thread_count_does_not_change_results() -> None:
        serial = run_simulation(SMALL, threads=1).to_frame()
        parallel = run_simulation(SMALL, threads=2).to_frame()
        pd.testing.assert_frame_equal(serial, parallel)

    @staticmethod
    def test_known_sigma() -> None:
        result = run_simulation(dataclasses.replace(SMALL, sigma_known=True, methods=("M3", "M5")))
        assert set(result.summaries) == {"M3", "M5"}

    @staticmethod
    def test_null_signal() -> None:
        result = run_simulation(dataclasses.replace(SMALL, gamma=0.0, methods=("M1", "M3")))
        for summary in result.summaries.values():
            assert summary.power_hat == 0.0
            assert 0.0 <= summary.fdr_hat <= 1.0

    @staticmethod
    def test_grid_and_plot(tmp_path) -> None:  # type: ignore
        table = run_grid(dataclasses.replace(SMALL, methods=("M0", "M1")), gammas=(2.0, 8.0))
        assert len(table) == 4
        assert set(table["method"]) == {"M0", "M1"}
        assert set(table["procedure"]) == {"knockoff", "bon_bh"}
        assert table["gamma"].tolist() == [2.0, 2.0, 8.0, 8.0]
        path = tmp_path / "grid.svg"
        plot_grid(table, str(path))
        assert "<svg" in path.read_text()

    @staticmethod
    @pytest.mark.slow
    def test_fdr_control() -> None:
        setting = SimSetting(n=200, m=40, k=8, rho=0.5, gamma=6.0, alpha=0.1, reps=500, methods=("M3", "M4", "M5"))
        result = run_simulation(setting, threads=2)
        assert result.summaries["M3"].fdr_hat <= 0.08 + 3 * np.sqrt(0.08 * 0.92 / setting.reps)
        for code in ("M4", "M5"):
            assert result.summaries[code].fdr_hat <= 0.1 + 3 * np.sqrt(0.1 * 0.9 / setting.reps), code

    @staticmethod
    @pytest.mark.slow
    def test_power_ordering() -> None:
        setting = SimSetting(n=200, m=40, k=8, rho=0.5, alpha=0.1, reps=500, methods=("M0", "M1", "M3", "M4"))
        table = run_grid(setting, gammas=(2.0, 4.0), threads=2).set_index(["gamma", "method"])
        for gamma in (2.0, 4.0):
            base = table.loc[(gamma, "M1")]
            for code in ("M3", "M4"):
                row = table.loc[(gamma, code)]
                slack = 2 * np.hypot(base["se_power"], row["se_power"])
                assert row["power_hat"] >= base["power_hat"] - slack, (gamma, code)
        low, m3 = table.loc[(2.0, "M0")], table.loc[(2.0, "M3")]
        assert low["power_hat"] <= m3["power_hat"] + 2 * np.hypot(low["se_power"], m3["se_power"])

    @staticmethod
    @pytest.mark.slow
    def test_power_grows_with_signal() -> None:
        setting = SimSetting(n=200, m=40, k=8, rho=0.5, alpha=0.1, reps=200, methods=("M1", "M3", "M4", "M5"))
        table = run_grid(setting, gammas=(2.0, 4.0, 6.0, 8.0, 10.0), threads=2)
        for code, rows in table.groupby("method"):
            power, se = rows["power_hat"].to_numpy(), rows["se_power"].to_numpy()
            for i in range(len(power) - 1):
                assert power[i + 1] >= power[i] - 2 * np.hypot(se[i], se[i + 1]), (code, i)


if __name__ == "__main__":
    pytest.main(sys.argv)
