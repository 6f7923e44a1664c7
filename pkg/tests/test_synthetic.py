import json

import numpy as np
import pandas as pd
import pytest

from modules.synthetic.generator import (
    SyntheticSpec,
    balanced_partition,
    generate,
    population_correlation,
    save_synthetic,
    structure_regime,
    to_prepared,
)


class TestPartition:
    def test_balanced_sizes(self):
        groups = balanced_partition(30, 4)
        assert [len(g) for g in groups] == [8, 8, 7, 7]
        assert sum(groups, []) == list(range(30))

    @pytest.mark.parametrize("k,regime", [(1, "high"), (4, "high"), (8, "high"), (9, "moderate"),
                                          (15, "moderate"), (22, "moderate"), (23, "low"), (30, "low")])
    def test_regimes_at_thirty_features(self, k, regime):
        assert structure_regime(30, k) == regime


class TestGenerate:
    def test_shapes_and_determinism(self):
        spec = SyntheticSpec(d=10, k=3, n=50, seed=4)
        first, second = generate(spec), generate(spec)
        assert first.X.shape == (50, 10)
        assert first.y.shape == (50,)
        np.testing.assert_array_equal(first.X, second.X)
        np.testing.assert_array_equal(first.y, second.y)

    def test_target_is_noise_free(self):
        data = generate(SyntheticSpec(d=6, k=2, n=100, seed=1))
        expected = data.target_weight * data.theta[:, data.target_group] + data.target_bias
        np.testing.assert_allclose(data.y, expected)

    def test_features_follow_their_group(self):
        data = generate(SyntheticSpec(d=6, k=2, n=200, seed=2, noise_std=0.1))
        membership = data.group_of()
        residual = data.X - data.theta[:, membership] * data.feature_weights
        assert abs(residual.std() - 0.1) < 0.01

    def test_within_group_correlation_matches_population(self):
        data = generate(SyntheticSpec(d=4, k=1, n=20000, seed=3))
        w = data.feature_weights
        sample = np.corrcoef(data.X[:, 0], data.X[:, 1])[0, 1]
        assert sample == pytest.approx(population_correlation(w[0], w[1]), abs=0.02)

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError, match="k must lie in"):
            generate(SyntheticSpec(d=5, k=6))


class TestPrepared:
    def test_split_and_standardization(self):
        dataset = generate(SyntheticSpec(d=5, k=2, n=100, seed=5))
        data = to_prepared(dataset, seed=5)
        assert data.task == "regression"
        assert data.stats["regime"] == structure_regime(5, 2)
        X_train, _ = data.split("train")
        np.testing.assert_allclose(X_train.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(X_train.std(axis=0), 1.0, atol=1e-10)
        assert len(data.splits["train"]) == 60

    def test_save_writes_ground_truth(self, tmp_path):
        dataset = generate(SyntheticSpec(d=4, k=2, n=20, seed=6))
        path, sidecar = save_synthetic(dataset, tmp_path / "synthetic.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["x1", "x2", "x3", "x4", "y"]
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        assert meta["groups"] == [[0, 1], [2, 3]]
        assert meta["spec"]["k"] == 2
