"""Decentralized stochastic optimization laboratory.

A numpy/scipy library for decentralized variance-reduced finite-sum
optimization: a randomized dual-free method with gossip communication,
polynomial (Chebyshev) gossip acceleration, an inexact proximal-point outer
loop, comparator algorithms (EXTRA, catalyst-EXTRA, GT-SAGA), an explicit
small-instance dual verification engine, and a reproducible experiment
harness with a simulated-time cost model.
"""

from . import baselines, catalyst, dual_oracle, dvr, harness, problem, topology
from .baselines import run_extra, run_extra_catalyst, run_gt_saga
from .catalyst import run_accelerated
from .dvr import compute_params, run
from .exceptions import (ConstructionError, DivergenceError, DvrLabError,
                         InfeasibleDualError, UnsupportedLossError,
                         ValidationError)
from .harness import (ExperimentConfig, reference_solution, ridge_solution,
                      run_experiment)
from .problem import (Dataset, Problem, build_problem, load_libsvm,
                      loss_family, shifted_problem, synth_dataset)
from .recording import Budget, CostModel, Trace
from .topology import (Graph, GossipMatrix, build_graph, chebyshev, laplacian,
                       load_edgelist, save_edgelist)

__version__ = "0.1.0"

__all__ = [
    "Budget", "CostModel", "ConstructionError", "Dataset", "DivergenceError",
    "DvrLabError", "ExperimentConfig", "Graph", "GossipMatrix",
    "InfeasibleDualError", "Problem", "Trace", "UnsupportedLossError",
    "ValidationError", "baselines", "build_graph", "build_problem", "catalyst",
    "chebyshev", "compute_params", "dual_oracle", "dvr", "harness",
    "laplacian", "load_edgelist", "load_libsvm", "loss_family", "problem",
    "reference_solution", "ridge_solution", "run", "run_accelerated",
    "run_experiment", "run_extra", "run_extra_catalyst", "run_gt_saga",
    "save_edgelist", "shifted_problem", "synth_dataset", "topology",
]
