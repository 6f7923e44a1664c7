import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.settings import ALPHA_GRID, DEFAULT_SWEEP_SETTINGS, DEFAULT_TRAINING_SETTINGS
from modules.model.losses import balanced_accuracy, balanced_ce_grad, mse_grad, rmse
from modules.model.transformer import FTTransformer, ModelSpec
from utils.helpers import create_batches, run_grid

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite"""

    def __init__(self, epoch, batch, loss):
        self.epoch, self.batch, self.loss = epoch, batch, loss
        super().__init__(f"Training diverged at epoch {epoch}, batch {batch}: loss = {loss}")


@dataclass
class TrainingConfig:
    learning_rate: float = DEFAULT_TRAINING_SETTINGS["LEARNING_RATE"]
    weight_decay: float = DEFAULT_TRAINING_SETTINGS["WEIGHT_DECAY"]
    batch_size: int = DEFAULT_TRAINING_SETTINGS["BATCH_SIZE"]
    max_epochs: int = DEFAULT_TRAINING_SETTINGS["MAX_EPOCHS"]
    patience: int = DEFAULT_TRAINING_SETTINGS["PATIENCE"]
    min_epochs: int = DEFAULT_TRAINING_SETTINGS["MIN_EPOCHS"]
    min_delta: float = DEFAULT_TRAINING_SETTINGS["MIN_DELTA"]
    progress: bool = False


@dataclass
class TrainingResult:
    model: FTTransformer
    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0
    best_val: float = float("nan")
    stopped_early: bool = False
    metric: str = "rmse"

    def history_frame(self):
        return pd.DataFrame(self.history)


class AdamW:
    """Adam with decoupled weight decay"""

    def __init__(self, params, lr=1e-4, weight_decay=1e-5, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.weight_decay, self.betas, self.eps = lr, weight_decay, betas, eps
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1 ** self.t
        correction2 = 1.0 - beta2 ** self.t
        for name in sorted(params):
            g = grads[name]
            self.m[name] = beta1 * self.m[name] + (1.0 - beta1) * g
            self.v[name] = beta2 * self.v[name] + (1.0 - beta2) * g * g
            update = (self.m[name] / correction1) / (np.sqrt(self.v[name] / correction2) + self.eps)
            params[name] -= self.lr * (update + self.weight_decay * params[name])


def loss_and_grads(model, X, y, class_counts=None, training=False, rng=None):
    """
    Task loss of a batch and its parameter gradients.

    Regression targets are expected on the standardized training scale.
    """
    outputs, cache = model.forward(X, training=training, rng=rng)
    if model.spec.task == "regression":
        loss, d_outputs = mse_grad(outputs, y)
    else:
        loss, d_outputs = balanced_ce_grad(outputs, y, class_counts)
    return loss, model.backward(cache, d_outputs)


def evaluate(model, X, y, class_counts=None):
    """
    Test metrics of a model.

    Returns:
        dict: {'rmse'} on the original target scale for regression;
            {'balanced_accuracy', 'accuracy', 'balanced_ce'} for classification
    """
    outputs = model.predict(X)
    if model.spec.task == "regression":
        return {"rmse": rmse(model.to_target_scale(outputs), y)}

    y = np.asarray(y, dtype=int)
    preds = outputs.argmax(axis=1)
    metrics = {
        "balanced_accuracy": balanced_accuracy(preds, y),
        "accuracy": float(np.mean(preds == y)),
    }
    counts = class_counts if class_counts is not None else np.bincount(y, minlength=model.spec.n_classes)
    if np.all(np.asarray(counts)[np.unique(y)] > 0):
        loss, _ = balanced_ce_grad(outputs, y, counts)
        metrics["balanced_ce"] = loss
    return metrics


def _validation_score(model, X, y):
    metrics = evaluate(model, X, y)
    return metrics["rmse"] if model.spec.task == "regression" else metrics["balanced_accuracy"]


def train(model, data, config=None):
    """
    Fit a model with AdamW and early stopping on the validation metric.

    Args:
        model (FTTransformer): Freshly initialized model (trained in place)
        data (PreparedData): Table, target and train/val/test splits
        config (TrainingConfig): Optimizer and stopping settings

    Returns:
        TrainingResult: Model holding the best-validation weights, plus history
    """
    config = config or TrainingConfig()
    spec = model.spec
    for first, second in (("train", "val"), ("train", "test"), ("val", "test")):
        if np.intersect1d(data.splits[first], data.splits[second]).size:
            raise ValueError("splits must be disjoint")

    X_train, y_train = data.split("train")
    X_val, y_val = data.split("val")
    if len(X_val) == 0:
        logger.warning("Empty validation split; early stopping uses the training rows")
        X_val, y_val = X_train, y_train

    class_counts = None
    if spec.task == "regression":
        model.target_mean = float(np.mean(y_train))
        std = float(np.std(y_train))
        model.target_std = std if std > 1e-12 else 1.0
        targets = (y_train - model.target_mean) / model.target_std
        higher_is_better, metric = False, "rmse"
    else:
        targets = np.asarray(y_train, dtype=int)
        class_counts = np.bincount(targets, minlength=spec.n_classes)
        higher_is_better, metric = True, "balanced_accuracy"

    rng = np.random.default_rng([spec.seed, 2])
    optimizer = AdamW(model.params, lr=config.learning_rate, weight_decay=config.weight_decay)
    best_score = -np.inf if higher_is_better else np.inf
    best_params, best_epoch, since_best = copy.deepcopy(model.params), 0, 0
    history, stopped_early = [], False

    for epoch in tqdm(range(1, config.max_epochs + 1), desc="Training", disable=not config.progress):
        order = rng.permutation(len(X_train))
        batch_losses = []
        for batch, (start, end) in enumerate(create_batches(len(order), config.batch_size)):
            rows = order[start:end]
            loss, grads = loss_and_grads(model, X_train[rows], targets[rows], class_counts,
                                         training=True, rng=rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, batch, loss)
            optimizer.step(model.params, grads)
            batch_losses.append(loss)

        score = _validation_score(model, X_val, y_val)
        train_loss = float(np.mean(batch_losses))
        history.append({"epoch": epoch, "train_loss": train_loss, "val_" + metric: score})
        logger.debug("Epoch %d: train loss %.6f, val %s %.6f", epoch, train_loss, metric, score)

        improved = score > best_score + config.min_delta if higher_is_better else score < best_score - config.min_delta
        if improved:
            best_score, best_epoch, since_best = score, epoch, 0
            best_params = copy.deepcopy(model.params)
        else:
            since_best += 1
        if epoch >= config.min_epochs and since_best >= config.patience:
            stopped_early = True
            logger.info("Early stopping at epoch %d (best epoch %d)", epoch, best_epoch)
            break

    model.params = best_params
    return TrainingResult(model=model, history=history, best_epoch=best_epoch, best_val=float(best_score),
                          stopped_early=stopped_early, metric=metric)


def build_model(n_features, pe_mode="none", pe=None, pe_dim=None, alpha=1.0, task="regression",
                n_classes=1, seed=1, **overrides):
    """
    Model with PE width taken from the PE matrix when one is given.

    Returns:
        FTTransformer: Freshly initialized model
    """
    if pe_dim is None:
        pe_dim = int(pe.width if hasattr(pe, "width") else np.shape(pe)[1]) if pe is not None else 0
    spec = ModelSpec(n_features=n_features, pe_dim=pe_dim, pe_mode=pe_mode, alpha=alpha,
                     task=task, n_classes=n_classes, seed=seed, **overrides)
    return FTTransformer(spec, pe=pe if pe_mode in ("fixed", "random") else None)


def table_groups(table):
    """Column groups for the tokenizer, or None when every feature is one column"""
    if table.n_nodes == table.n_features:
        return None
    return [list(group) for group in table.groups]


def select_best_alpha(scores, higher_is_better=False):
    """Alpha with the best validation score; ties go to the smaller alpha"""
    if not scores:
        raise ValueError("alpha grid is empty")
    best_alpha, best_score = None, None
    for alpha in sorted(scores):
        score = scores[alpha]
        better = best_score is None or (score > best_score if higher_is_better else score < best_score)
        if better:
            best_alpha, best_score = alpha, score
    return best_alpha


def alpha_select(make_model, data, alpha_grid=None, config=None, max_workers=1):
    """
    Train one model per alpha and keep the best on the validation split.

    Args:
        make_model (callable): alpha -> fresh FTTransformer
        data (PreparedData): Splits to train and validate on
        alpha_grid (list): Candidate alphas (default: the 9-point grid)

    Returns:
        float: Selected alpha
        dict: alpha -> TrainingResult
    """
    grid = list(alpha_grid if alpha_grid is not None else ALPHA_GRID)
    if not grid:
        raise ValueError("alpha grid is empty")

    results = run_grid({alpha: alpha for alpha in grid},
                       lambda alpha: train(make_model(alpha), data, config),
                       max_workers=max_workers, desc="Alpha selection", progress=False)
    higher_is_better = next(iter(results.values())).metric != "rmse"
    best = select_best_alpha({alpha: result.best_val for alpha, result in results.items()}, higher_is_better)
    logger.info("Selected alpha=%g from %d candidates", best, len(grid))
    return best, results


def compare_learnable(data, pe, alpha=1.0, seeds=(1,), config=None, modes=("none", "fixed", "learnable"),
                      max_workers=None, **spec_overrides):
    """
    Train the same architecture per PE mode and seed; only the PE source differs.

    Returns:
        pandas.DataFrame: Long-format rows (mode, seed, metric, value, n_parameters)
    """
    table = data.table
    task = data.task
    n_classes = int(np.max(data.target)) + 1 if task == "classification" else 1
    pe_dim = int(pe.width if hasattr(pe, "width") else np.shape(pe)[1])
    max_workers = max_workers or DEFAULT_SWEEP_SETTINGS["MAX_WORKERS"]
    spec_overrides.setdefault("groups", table_groups(table))

    def run(job):
        mode, seed = job
        # Random mode draws its own encodings from the seed
        source = pe if mode == "fixed" else None
        model = build_model(table.n_features, pe_mode=mode, pe=source, pe_dim=pe_dim, alpha=alpha,
                            task=task, n_classes=n_classes, seed=seed, **spec_overrides)
        result = train(model, data, config)
        X_test, y_test = data.split("test")
        return model.count_parameters(), evaluate(result.model, X_test, y_test)

    jobs = {(mode, seed): (mode, seed) for mode in modes for seed in seeds}
    results = run_grid(jobs, run, max_workers=max_workers, desc="PE comparison", progress=False)

    rows = []
    for (mode, seed), (n_parameters, metrics) in results.items():
        for metric, value in metrics.items():
            rows.append({"mode": mode, "seed": seed, "metric": metric, "value": value,
                         "n_parameters": n_parameters})
    return pd.DataFrame(rows)
