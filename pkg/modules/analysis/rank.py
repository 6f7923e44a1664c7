import numpy as np

# Singular values below this fraction of the largest one count as zero
RELATIVE_SV_TOL = 1e-12


def effective_rank(M):
    """
    Effective rank: exp of the Shannon entropy of the normalized singular values.

    Args:
        M (numpy.ndarray): n x d matrix (e.g. CLS embeddings)

    Returns:
        float: exp(-sum p_i ln p_i) with p_i = sigma_i / sum_j sigma_j
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("effective rank needs a 2-D matrix")
    if M.size == 0:
        raise ValueError("zero matrix has no effective rank")
    sigma = np.linalg.svd(M, compute_uv=False)
    if sigma.max() <= 0:
        raise ValueError("zero matrix has no effective rank")
    sigma = sigma[sigma >= RELATIVE_SV_TOL * sigma.max()]
    p = sigma / sigma.sum()
    return float(np.exp(-np.sum(p * np.log(p))))
