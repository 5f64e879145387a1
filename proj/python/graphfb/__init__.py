"""Graph filterbank networks: operators, smoothness measures and training."""

from ._graphfb import (
    Graph,
    GraphfbError,
    apply_operator,
    dirichlet_energy,
    eigengap_check,
    eigengap_sweep,
    eigenvalues,
    grad_check,
    load_dataset,
    make_splits,
    operator_kinds,
    operator_matrix,
    planted_partition,
    predict,
    random_graph,
    s_value,
    save_canonical,
    smoothness_report,
    train,
)

__all__ = [
    "Graph",
    "GraphfbError",
    "apply_operator",
    "dirichlet_energy",
    "eigengap_check",
    "eigengap_sweep",
    "eigenvalues",
    "grad_check",
    "load_dataset",
    "make_splits",
    "operator_kinds",
    "operator_matrix",
    "planted_partition",
    "predict",
    "random_graph",
    "s_value",
    "save_canonical",
    "smoothness_report",
    "train",
]
