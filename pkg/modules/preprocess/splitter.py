import numpy as np


def _largest_remainder(total, ratios):
    """Integer quotas summing to total, proportional to ratios"""
    raw = np.asarray(ratios, dtype=np.float64) * total
    quotas = np.floor(raw).astype(int)
    remainder = total - quotas.sum()
    # Larger fractional part first; ties go to the earlier split
    order = sorted(range(len(ratios)), key=lambda j: (-(raw[j] - quotas[j]), j))
    for j in order[:remainder]:
        quotas[j] += 1
    return quotas


def split_stratified(n_rows, labels=None, ratios=(0.6, 0.2, 0.2), seed=1):
    """
    Split row indices into train/validation/test sets.

    With labels, every class is split on its own with largest-remainder
    quotas so each split keeps the global class distribution.

    Args:
        n_rows (int): Number of rows (or a table exposing n_rows)
        labels (array-like): Optional class labels, one per row
        ratios (tuple): (train, val, test) ratios, positive and summing to 1
        seed (int): Shuffle seed

    Returns:
        tuple: Three sorted index arrays (train, val, test)
    """
    n_rows = getattr(n_rows, "n_rows", n_rows)
    ratios = tuple(float(r) for r in ratios)
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be positive and sum to 1")

    rng = np.random.default_rng(seed)
    parts = [[] for _ in ratios]

    if labels is None:
        strata = [np.arange(n_rows)]
    else:
        labels = np.asarray(labels)
        if len(labels) != n_rows:
            raise ValueError("labels must have one entry per row")
        strata = []
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            if len(members) < len(ratios):
                raise ValueError("class too small to stratify")
            strata.append(members)

    for members in strata:
        shuffled = rng.permutation(members)
        quotas = _largest_remainder(len(members), ratios)
        start = 0
        for j, quota in enumerate(quotas):
            parts[j].extend(shuffled[start:start + quota].tolist())
            start += quota

    return tuple(np.sort(np.asarray(part, dtype=int)) for part in parts)
