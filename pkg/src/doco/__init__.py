"""Decentralized online tracking of time-varying least-squares optimizers."""

from . import algo, dynamics, metrics, net, objective, scenarios, theory
from .algo import TrajectoryRecord, run
from .kernels import BACKEND
from .net import NetworkTopology, build_topology
from .objective import ConvexityError, QuadraticSensing
from .theory import StepsizeError, TheoryParams, lemma_a1_constants, stepsize_upper_bound

__version__ = "0.1.0"

__all__ = [
    "algo", "dynamics", "metrics", "net", "objective", "scenarios", "theory",
    "TrajectoryRecord", "run", "BACKEND", "NetworkTopology", "build_topology",
    "ConvexityError", "QuadraticSensing", "StepsizeError", "TheoryParams",
    "lemma_a1_constants", "stepsize_upper_bound",
]
