import math

import numpy as np
import pandas as pd
import pytest

from modules.analysis.analyzer import get_rank_statistics, improvement_percentage, is_nonincreasing
from modules.analysis.rank import effective_rank
from modules.analysis.sweeps import SweepReport, alpha_rmse_sweep, rank_sweep, regime_improvements
from modules.analysis.theory import (
    bound_setting,
    bound_single_winner,
    bound_table,
    bound_two_group_shared,
    c_alpha,
    construct_bound_setting,
    large_c_approximation,
    measured_score_gap,
)
from modules.graphs.association import spearman_graph
from modules.model.training import TrainingConfig
from modules.spectral.encoding import make_pe
from modules.synthetic.generator import SyntheticSpec, generate, to_prepared


def _entropy_rank(M):
    sigma = np.linalg.svd(M, compute_uv=False)
    sigma = sigma[sigma > 0]
    p = sigma / sigma.sum()
    return math.exp(-sum(x * math.log(x) for x in p))


class TestEffectiveRank:
    def test_matches_singular_value_entropy(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            shape = (int(rng.integers(1, 65)), int(rng.integers(1, 193)))
            M = rng.standard_normal(shape)
            assert effective_rank(M) == pytest.approx(_entropy_rank(M), abs=1e-9)

    def test_known_values(self):
        assert effective_rank(np.eye(7)) == pytest.approx(7.0)
        assert effective_rank(np.outer([1.0, 2.0, 3.0], [4.0, 5.0])) == pytest.approx(1.0)
        assert effective_rank(np.diag([3.0, 1.0])) == pytest.approx(1.7548, abs=1e-4)

    def test_zero_matrix(self):
        with pytest.raises(ValueError, match="zero matrix has no effective rank"):
            effective_rank(np.zeros((3, 4)))


class TestBounds:
    def test_c_alpha(self):
        assert c_alpha(1.0, 2.0, 1.0, 1.0, 1.0, 16) == pytest.approx(1.0)
        assert c_alpha(3.0, 2.0, 1.0, 1.0, 1.0, 16) == pytest.approx(math.exp(1.0))

    def test_large_c_limits(self):
        C = 1e6
        assert bound_single_winner(C, 8) == pytest.approx(large_c_approximation("single_winner", C, 8), rel=1e-3)
        assert bound_two_group_shared(C) == pytest.approx(large_c_approximation("two_group_shared", C, 1), rel=1e-3)

    def test_rejects_nonpositive_c(self):
        with pytest.raises(ValueError, match="C must be positive"):
            bound_single_winner(0.0, 8)


class TestConstructedSettings:
    def test_score_gap_equals_tau(self):
        built = construct_bound_setting(bound_setting("single_winner", alpha=2.0), seed=3)
        assert built.winner == 0
        assert measured_score_gap(built.pe_scores) == pytest.approx(2.0)

    def test_single_winner_bound_holds(self):
        table = bound_table(bound_setting("single_winner"), range(11), n_samples=500, seed=1)
        assert list(table.columns) == ["alpha", "c_alpha", "bound", "approximation", "measured", "holds"]
        assert table["holds"].all()

    def test_single_winner_large_c(self):
        setting = bound_setting("single_winner", alpha=25.0)
        assert setting.C >= 1e4
        measured = construct_bound_setting(setting, seed=1).measured_rank(500, seed=1)
        approximation = large_c_approximation("single_winner", setting.C, setting.d)
        assert abs(measured - approximation) <= 0.05 * approximation

    @pytest.mark.parametrize("alpha", [12.0, 14.0, 16.0])
    def test_shared_group_pe_large_c(self, alpha):
        setting = bound_setting("two_group_shared", alpha=alpha)
        assert setting.C >= 100
        measured = construct_bound_setting(setting, seed=1).measured_rank(500, seed=1)
        approximation = large_c_approximation("two_group_shared", setting.C, setting.d)
        assert abs(measured - approximation) <= 0.1 * approximation

    @pytest.mark.parametrize("alpha", [1.0, 2.0, 5.0])
    def test_shared_pe_rank_below_distinct(self, alpha):
        shared = construct_bound_setting(bound_setting("two_group_shared", alpha=alpha), seed=1)
        distinct = construct_bound_setting(bound_setting("two_group_distinct", alpha=alpha), seed=1)
        assert shared.measured_rank(500, seed=1) <= distinct.measured_rank(500, seed=1) + 1e-9


class TestAnalyzer:
    def test_improvement_percentage(self):
        assert improvement_percentage(2.0, 1.5) == pytest.approx(25.0)
        assert improvement_percentage(0.8, 0.84, higher_is_better=True) == pytest.approx(5.0)
        with pytest.raises(ValueError, match="baseline must be nonzero"):
            improvement_percentage(0.0, 1.0)

    def test_is_nonincreasing(self):
        assert is_nonincreasing([5.0, 4.0, 4.0, 1.0])
        assert not is_nonincreasing([5.0, 4.0, 4.1])
        assert is_nonincreasing([5.0, 4.0, 4.05, 3.0], tolerance=0.1)
        assert not is_nonincreasing([5.0, 4.0, 4.05, 3.0, 3.05], tolerance=0.1)


class TestSweeps:
    def test_forward_only_rank_sweep(self, synthetic_data):
        X_train, _ = synthetic_data.split("train")
        pe, _, _ = make_pe(spearman_graph(X_train), synthetic_data.table.groups, k=1, alpha=1.0)
        report = rank_sweep(synthetic_data, pe, alpha_grid=[0.0, 1.0], seeds=[1], forward_only=True,
                            max_workers=1, total_token_dim=8, n_heads=1)
        rows = report.rows
        assert len(rows) == 6
        assert set(rows["mode"]) == {"none", "fixed", "random"}
        assert (rows["metric"] == "effective_rank").all()
        none = rows[rows["mode"] == "none"]["value"].to_numpy()
        assert none[0] == none[1]
        assert np.all(rows["value"] >= 1.0)

        stats, means = get_rank_statistics(report)
        assert stats["total_runs"] == 6
        assert list(means.index) == [0.0, 1.0]

    def test_alpha_sweep_on_two_regimes(self):
        config = TrainingConfig(max_epochs=2, min_epochs=1, patience=1)
        report = alpha_rmse_sweep(partitions=[1, 3], alpha_grid=[0.0, 1.0], seeds=[1], d=6, n=100,
                                  config=config, max_workers=1, total_token_dim=8)
        assert len(report.rows) == 4
        assert set(report.rows["regime"]) == {"high", "moderate"}
        improvements = regime_improvements(report)
        assert list(improvements.columns) == ["regime", "k", "baseline", "best_alpha", "best", "improvement_pct"]
        assert set(improvements["best_alpha"]) == {1.0}

    def test_regime_improvements(self):
        rows = pd.DataFrame([
            {"regime": "high", "k": 4, "mode": "fixed", "alpha": 0.0, "seed": 1, "metric": "rmse", "value": 1.0},
            {"regime": "high", "k": 4, "mode": "fixed", "alpha": 1.0, "seed": 1, "metric": "rmse", "value": 0.9},
            {"regime": "high", "k": 4, "mode": "fixed", "alpha": 3.0, "seed": 1, "metric": "rmse", "value": 0.9},
            {"regime": "low", "k": 25, "mode": "fixed", "alpha": 0.0, "seed": 1, "metric": "rmse", "value": 2.0},
            {"regime": "low", "k": 25, "mode": "fixed", "alpha": 1.0, "seed": 1, "metric": "rmse", "value": 2.1},
            {"regime": "low", "k": 25, "mode": "fixed", "alpha": 3.0, "seed": 1, "metric": "rmse", "value": 2.2},
        ])
        table = regime_improvements(SweepReport(rows)).set_index("regime")
        assert table.loc["high", "best_alpha"] == 1.0
        assert table.loc["high", "improvement_pct"] == pytest.approx(10.0)
        assert table.loc["low", "improvement_pct"] == pytest.approx(-5.0)


@pytest.mark.slow
class TestDeskReplication:
    """Synthetic-scale checks of the alpha trends; minutes of runtime"""

    def test_rank_falls_with_alpha(self):
        alphas = [0.0, 1.0, 2.0, 5.0, 10.0, 30.0]
        data = to_prepared(generate(SyntheticSpec(d=30, k=4, n=2000, seed=1)), seed=1)
        X_train, _ = data.split("train")
        pe, _, _ = make_pe(spearman_graph(X_train), data.table.groups, alpha=1.0)
        report = rank_sweep(data, pe, alpha_grid=alphas, seeds=[1, 2, 3, 4, 5], modes=("fixed", "random"))
        means = report.means("effective_rank")
        for mode in ("fixed", "random"):
            curve = [means[(mode, a)] for a in alphas]
            assert is_nonincreasing(curve, tolerance=0.02 * (max(curve) - min(curve)))
        for alpha in (5.0, 10.0):
            assert means[("fixed", alpha)] < means[("random", alpha)]

    def test_high_structure_benefits_most(self):
        report = alpha_rmse_sweep(partitions=[4, 15, 25], alpha_grid=[0.0, 0.5, 1.0, 3.0, 10.0],
                                  seeds=[1, 2, 3, 4, 5], d=30, n=2000)
        improvements = regime_improvements(report).set_index("regime")
        assert improvements.loc["high", "improvement_pct"] >= 3.0
        assert improvements.loc["high", "improvement_pct"] > improvements.loc["low", "improvement_pct"]
        means = report.means("rmse", keys=("regime", "alpha"))
        assert means[("high", 10.0)] > improvements.loc["high", "best"]
