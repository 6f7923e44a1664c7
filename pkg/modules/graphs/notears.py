import logging

import networkx as nx
import numpy as np
import scipy.linalg as slin
import scipy.optimize as sopt

from config.settings import DEFAULT_NOTEARS_SETTINGS
from modules.graphs.association import _as_matrix
from modules.graphs.graph import FeatureGraph

logger = logging.getLogger(__name__)


def _notears_linear(X, lambda1, max_iter, h_tol, rho_max):
    """
    Solve min_W (1/2m)||X - XW||_F^2 + lambda1 ||W||_1 s.t. h(W) = 0 by augmented Lagrangian.

    W is split into (w_pos, w_neg) >= 0 so L-BFGS-B handles the L1 term
    with box constraints; rho grows tenfold while h fails to shrink by 4x.

    Returns:
        numpy.ndarray: Unthresholded signed W (best iterate)
        float: h(W) of that iterate
        bool: True if h <= h_tol was reached
    """
    m, d = X.shape
    X = X - X.mean(axis=0, keepdims=True)

    def _loss(W):
        R = X - X @ W
        loss = 0.5 / m * (R ** 2).sum()
        G_loss = -1.0 / m * X.T @ R
        return loss, G_loss

    def _h(W):
        E = slin.expm(W * W)
        return np.trace(E) - d, E.T * W * 2

    def _adj(w):
        return (w[:d * d] - w[d * d:]).reshape([d, d])

    def _func(w):
        W = _adj(w)
        loss, G_loss = _loss(W)
        h, G_h = _h(W)
        obj = loss + 0.5 * rho * h * h + alpha * h + lambda1 * w.sum()
        G_smooth = G_loss + (rho * h + alpha) * G_h
        g_obj = np.concatenate((G_smooth + lambda1, -G_smooth + lambda1), axis=None)
        return obj, g_obj

    w_est, rho, alpha, h = np.zeros(2 * d * d), 1.0, 0.0, np.inf
    bounds = [(0, 0) if i == j else (0, None) for _ in range(2) for i in range(d) for j in range(d)]
    best_w, best_h = w_est, np.inf

    for _ in range(max_iter):
        w_new, h_new = None, None
        while rho < rho_max:
            sol = sopt.minimize(_func, w_est, method="L-BFGS-B", jac=True, bounds=bounds)
            w_new = sol.x
            h_new, _ = _h(_adj(w_new))
            if h_new > 0.25 * h:
                rho *= 10
            else:
                break
        if w_new is None:
            break
        w_est, h = w_new, h_new
        if h <= best_h:
            best_w, best_h = w_est, h
        alpha += rho * h
        if h <= h_tol or rho >= rho_max:
            break

    return _adj(best_w), float(best_h), bool(best_h <= h_tol)


def break_cycles(weights):
    """
    Remove the smallest-weight edge of each remaining directed cycle.

    Args:
        weights (numpy.ndarray): Nonnegative d x d matrix, weights[i, j] is edge i -> j

    Returns:
        numpy.ndarray: Acyclic copy of weights
        list: Removed (i, j) edges
    """
    weights = weights.copy()
    removed = []
    G = nx.DiGraph()
    G.add_nodes_from(range(weights.shape[0]))
    G.add_edges_from((int(i), int(j)) for i, j in zip(*np.nonzero(weights)))

    while not nx.is_directed_acyclic_graph(G):
        cycle = nx.find_cycle(G)
        i, j = min(((u, v) for u, v in cycle), key=lambda e: (weights[e[0], e[1]], e))
        weights[i, j] = 0.0
        G.remove_edge(i, j)
        removed.append((i, j))

    if removed:
        logger.warning("Removed %d edges to break residual cycles", len(removed))
    return weights, removed


def notears(X, lambda1=None, max_iter=None, h_tol=None, rho_max=None, w_threshold=None, node_names=None):
    """
    Linear NOTEARS structure learning.

    Args:
        X (numpy.ndarray): m x d data matrix (m > d recommended, standardized)
        lambda1 (float): L1 penalty
        max_iter (int): Maximum dual ascent steps
        h_tol (float): Stop once h(W) <= h_tol
        rho_max (float): Stop once the penalty reaches rho_max
        w_threshold (float): Drop edges with |w| < w_threshold

    Returns:
        FeatureGraph: Directed acyclic graph with weights |w| of surviving edges
    """
    settings = DEFAULT_NOTEARS_SETTINGS
    lambda1 = settings["LAMBDA1"] if lambda1 is None else lambda1
    max_iter = settings["MAX_ITER"] if max_iter is None else max_iter
    h_tol = settings["H_TOL"] if h_tol is None else h_tol
    rho_max = settings["RHO_MAX"] if rho_max is None else rho_max
    w_threshold = settings["W_THRESHOLD"] if w_threshold is None else w_threshold

    X = _as_matrix(X)
    W, h, converged = _notears_linear(X, lambda1, max_iter, h_tol, rho_max)
    if not converged:
        logger.warning("NOTEARS stopped without reaching h <= %g (h = %.3e)", h_tol, h)

    W[np.abs(W) < w_threshold] = 0.0
    weights = np.abs(W)
    np.fill_diagonal(weights, 0.0)
    weights, removed = break_cycles(weights)

    return FeatureGraph(
        weights,
        "notears",
        directed=True,
        params={
            "lambda1": lambda1,
            "max_iter": max_iter,
            "h_tol": h_tol,
            "rho_max": rho_max,
            "w_threshold": w_threshold,
            "h": h,
            "converged": converged,
            "removed_cycle_edges": [list(e) for e in removed],
        },
        node_names=node_names,
    )


def notears_lambda_search(X, lambda_grid=None, holdout_fraction=None, seed=1, **kwargs):
    """
    Pick lambda1 from a grid by held-out reconstruction error.

    Each candidate is fitted on a training part of the rows; its thresholded
    signed W is scored by (1/2m)||X_h - X_h W||^2 on the held-out rows.
    Ties go to the larger lambda1.

    Returns:
        FeatureGraph: Graph refitted on all rows with the winning lambda1
        dict: lambda1 -> held-out score
    """
    grid = lambda_grid or DEFAULT_NOTEARS_SETTINGS["LAMBDA_GRID"]
    fraction = DEFAULT_NOTEARS_SETTINGS["HOLDOUT_FRACTION"] if holdout_fraction is None else holdout_fraction
    settings = DEFAULT_NOTEARS_SETTINGS
    max_iter = kwargs.get("max_iter", settings["MAX_ITER"])
    h_tol = kwargs.get("h_tol", settings["H_TOL"])
    rho_max = kwargs.get("rho_max", settings["RHO_MAX"])
    w_threshold = kwargs.get("w_threshold", settings["W_THRESHOLD"])

    X = _as_matrix(X)
    rng = np.random.default_rng(seed)
    order = rng.permutation(X.shape[0])
    n_hold = max(1, int(round(fraction * X.shape[0])))
    hold, fit = X[order[:n_hold]], X[order[n_hold:]]
    hold = hold - fit.mean(axis=0)

    scores = {}
    for lam in grid:
        W, _, _ = _notears_linear(fit, lam, max_iter, h_tol, rho_max)
        W[np.abs(W) < w_threshold] = 0.0
        R = hold - hold @ W
        scores[lam] = float(0.5 / hold.shape[0] * (R ** 2).sum())
        logger.info("NOTEARS lambda1=%g held-out loss %.6f", lam, scores[lam])

    best = min(grid, key=lambda lam: (scores[lam], -lam))
    graph = notears(X, lambda1=best, max_iter=max_iter, h_tol=h_tol, rho_max=rho_max,
                    w_threshold=w_threshold, node_names=kwargs.get("node_names"))
    graph.params["lambda_scores"] = {str(k): v for k, v in scores.items()}
    return graph, scores
