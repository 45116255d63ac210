"""Bilinear transduction for out-of-support extrapolation.

Predicts a query by reparameterizing it as (difference to an anchor,
anchor) and modeling that pair with a low-rank bilinear network, plus the
supporting numerics: small-matrix SVD, block completion checks,
function generators, a toy imitation environment, and an experiment
harness.
"""

from .anchors import DeltaBank, EmptyAnchorSetError, RhoPolicy, select_anchors
from .bilinear import BilinearPairModel, WeightingFunction, train_weighting
from .config import ConfigError, ExperimentConfig, config_hash, split_seed
from .estimators import (BilinearTransduction, ConcatTransduction,
                         DeepSetsBaseline, LinearBaseline, MLPBaseline,
                         WeightedTransduction)
from .experiments import (ResultRecord, aggregate, emit_results,
                          read_results, run_experiment, sweep)
from .functions import (Dataset, FunctionId, RangeSpec, Tiled2D,
                        sample_dataset)
from .linalg import SvdConvergenceError, pinv, svd_small
from .matcomp import (BlockMatrix, BoundReport, CoverageReport, FiniteDist,
                      PlantedBilinearProblem, combinatorial_coverage,
                      complete_block, density_ratio, empirical_sigma_p,
                      risk_ratio_check, verify_perturbation_bound)
from .nets import (AdamState, ContractViolation, DenseNet, adam_step,
                   load_net, make_net, mse_loss, net_backward, net_forward,
                   numeric_gradients, save_net)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BilinearPairModel", "BilinearTransduction", "BlockMatrix",
    "BoundReport", "ConcatTransduction", "ConfigError", "ContractViolation",
    "CoverageReport", "Dataset", "DeepSetsBaseline", "DeltaBank",
    "EmptyAnchorSetError", "ExperimentConfig", "FiniteDist", "FunctionId",
    "LinearBaseline", "MLPBaseline", "PlantedBilinearProblem", "RangeSpec",
    "ResultRecord", "RhoPolicy", "SvdConvergenceError", "Tiled2D",
    "WeightedTransduction", "WeightingFunction", "adam_step", "aggregate",
    "combinatorial_coverage", "complete_block", "config_hash",
    "density_ratio", "emit_results", "empirical_sigma_p", "load_net",
    "make_net", "mse_loss", "net_backward", "net_forward",
    "numeric_gradients", "pinv", "read_results", "risk_ratio_check",
    "run_experiment", "sample_dataset", "save_net", "select_anchors",
    "split_seed", "svd_small", "sweep", "train_weighting",
    "verify_perturbation_bound",
]
