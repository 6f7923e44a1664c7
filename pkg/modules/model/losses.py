import numpy as np


def class_weights(class_counts, n_classes=None):
    """
    Inverse-frequency class weights w_c = N / (C * n_c).

    Args:
        class_counts (array-like): Training count of every class
        n_classes (int): C when it differs from len(class_counts)

    Returns:
        numpy.ndarray: One weight per class
    """
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise ValueError("every class needs a positive count")
    return counts.sum() / ((n_classes or len(counts)) * counts)


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_labels(labels, class_counts):
    labels = np.asarray(labels, dtype=int)
    counts = np.asarray(class_counts)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= len(counts):
        raise ValueError("label outside the counted classes")
    if np.any(counts[labels] <= 0):
        raise ValueError("label with zero class count")
    return labels


def balanced_ce_loss(logits, labels, class_counts):
    """Class-weighted cross-entropy -(1/B) sum_i w_{y_i} log p(y_i | x_i)"""
    loss, _ = balanced_ce_grad(logits, labels, class_counts)
    return loss


def balanced_ce_grad(logits, labels, class_counts):
    """
    Returns:
        float: Balanced cross-entropy
        numpy.ndarray: Gradient w.r.t. the logits
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(labels, class_counts)
    counts = np.asarray(class_counts, dtype=np.float64)
    # Classes absent from training get no weight; their labels were rejected above
    weights = np.zeros(len(counts))
    present = counts > 0
    weights[present] = class_weights(counts[present], n_classes=len(counts))

    batch = len(labels)
    log_p = log_softmax(logits)
    sample_weights = weights[labels]
    loss = float(-(sample_weights * log_p[np.arange(batch), labels]).sum() / batch)

    d_logits = np.exp(log_p)
    d_logits[np.arange(batch), labels] -= 1.0
    d_logits *= sample_weights[:, None] / batch
    return loss, d_logits


def mse_grad(outputs, targets):
    outputs = np.asarray(outputs, dtype=np.float64).reshape(-1)
    residual = outputs - np.asarray(targets, dtype=np.float64).reshape(-1)
    loss = float(np.mean(residual ** 2))
    return loss, (2.0 * residual / len(residual))[:, None]


def rmse(predictions, targets):
    residual = np.asarray(predictions, dtype=np.float64).reshape(-1) - np.asarray(targets, dtype=np.float64).reshape(-1)
    return float(np.sqrt(np.mean(residual ** 2)))


def balanced_accuracy(preds, labels):
    """
    Balanced accuracy in weighted-sum form: sum_i [pred_i = y_i] / (n_{y_i} * C).

    Equals the macro-average of per-class recalls.
    """
    preds, labels = np.asarray(preds), np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("no labels to score")
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    weights = 1.0 / (counts[inverse] * len(classes))
    return float(np.sum(weights * (preds == labels)))
