import logging
import time

from modules.graphs.association import mi_graph, pearson_graph, spearman_graph
from modules.graphs.chow_liu import chow_liu_tree
from modules.graphs.notears import notears, notears_lambda_search

logger = logging.getLogger(__name__)


def estimate_graph(X, method, node_names=None, **params):
    """
    Estimate a feature graph with the named method and time it.

    Args:
        X (numpy.ndarray or FeatureTable): Standardized data
        method (str): pearson, spearman, mutual_information, chow_liu or notears
        node_names (list): Optional node labels
        **params: Method parameters (NOTEARS: lambda1, max_iter, h_tol,
            rho_max, w_threshold; lambda_search=True runs the lambda1 grid)

    Returns:
        FeatureGraph: Estimated graph; params['elapsed_seconds'] holds the wall-clock time
    """
    method = method.replace("-", "_")
    start = time.perf_counter()

    if method == "pearson":
        graph = pearson_graph(X, node_names=node_names)
    elif method == "spearman":
        graph = spearman_graph(X, node_names=node_names)
    elif method == "mutual_information":
        graph = mi_graph(X, bins=params.get("bins"), node_names=node_names)
    elif method == "chow_liu":
        graph = chow_liu_tree(X, bins=params.get("bins"), node_names=node_names)
    elif method == "notears":
        if params.pop("lambda_search", False):
            graph, _ = notears_lambda_search(X, lambda_grid=params.pop("lambda_grid", None),
                                             node_names=node_names, **params)
        else:
            params.pop("lambda_grid", None)
            graph = notears(X, node_names=node_names, **params)
    else:
        raise ValueError(f"Unknown graph method '{method}'")

    elapsed = time.perf_counter() - start
    graph.params["elapsed_seconds"] = elapsed
    logger.info("Estimated %s graph on %d nodes with %d edges in %.2fs",
                graph.method, graph.n_nodes, graph.n_edges, elapsed)
    return graph
