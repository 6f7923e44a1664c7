import numpy as np
import pandas as pd
import pytest

from modules.model.training import TrainingConfig
from modules.pipeline.config import parse_config
from modules.preprocess.table import CATEGORICAL, CONTINUOUS, RawTable
from modules.synthetic.generator import SyntheticSpec, generate, to_prepared


TINY_MODEL = {
    "total_token_dim": 8,
    "n_layers": 1,
    "n_heads": 1,
    "attention_dropout": 0.0,
    "ffn_dropout": 0.0,
    "residual_dropout": 0.0,
}


@pytest.fixture
def mixed_raw():
    """Small mixed-type table with a categorical column and a few gaps"""
    rng = np.random.default_rng(0)
    n = 60
    frame = pd.DataFrame({
        "age": rng.normal(40, 10, n),
        "income": rng.normal(50, 5, n),
        "city": rng.choice(["paris", "rome", "oslo"], n).astype(object),
        "label": rng.choice(["no", "yes"], n).astype(object),
    })
    frame.loc[[3, 7], "age"] = np.nan
    frame.loc[[5], "city"] = None
    kinds = {"age": CONTINUOUS, "income": CONTINUOUS, "city": CATEGORICAL, "label": CATEGORICAL}
    return RawTable(frame, kinds)


@pytest.fixture
def synthetic_data():
    return to_prepared(generate(SyntheticSpec(d=6, k=2, n=120, seed=3)), seed=3)


@pytest.fixture
def fast_config():
    return TrainingConfig(learning_rate=1e-3, batch_size=32, max_epochs=2, patience=1, min_epochs=1)


@pytest.fixture
def tiny_run_config(tmp_path):
    def make(mode="fixed", extra=""):
        text = "\n".join([
            "run.name = tiny",
            "run.seeds = 1",
            "run.max_workers = 1",
            "data.synthetic_d = 6",
            "data.synthetic_k = 2",
            "data.synthetic_n = 120",
            "model.total_token_dim = 8",
            "model.n_layers = 1",
            "model.n_heads = 1",
            "training.max_epochs = 2",
            "training.min_epochs = 1",
            "training.patience = 1",
            f"pe.mode = {mode}",
            extra,
        ])
        return parse_config(text)

    return make
