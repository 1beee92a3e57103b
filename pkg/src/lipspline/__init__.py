"""Neural networks with learnable linear-spline activations and certified
Lipschitz bounds."""
from .activations import LeakyReLU, PReLU, ReLU, Sigmoid, SplineActivation
from .data import Dataset, circle_label, error_rate, gen_circle
from .estimator import DeepSplineClassifier
from .lipschitz import (
    BoundReport, bound_euclidean, bound_general, empirical_lipschitz, balance_ratios,
)
from .network import DenseLayer, Network, backward, forward, param_count, sparsify
from .optim import TrainConfig, auto_lambda, build_network, train, xavier_init
from .splines import DeepSpline, bv2_norm, init_abs, init_soft, tv2, uniform_knots

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "Dataset", "DeepSpline", "DeepSplineClassifier", "DenseLayer",
    "LeakyReLU", "Network", "PReLU", "ReLU", "Sigmoid", "SplineActivation", "TrainConfig",
    "auto_lambda", "backward", "bound_euclidean", "bound_general", "build_network",
    "bv2_norm", "circle_label", "empirical_lipschitz", "error_rate", "forward",
    "gen_circle", "init_abs", "init_soft", "param_count", "sparsify", "balance_ratios",
    "train", "tv2", "uniform_knots", "xavier_init",
]
