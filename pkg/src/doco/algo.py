"""Gradient-tracking online optimizer with prediction, the ODG baseline, and the run loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels, metrics
from .dynamics import spectral_norm
from .objective import QuadraticSensing

log = logging.getLogger(__name__)

ALGORITHMS = ("doco", "odg")
DIVERGENCE_THRESHOLD = 1e9


@dataclass(frozen=True)
class SwarmState:
    """Agent decisions ``x`` and gradient trackers ``y``, both shaped ``(n, d)``.

    ``grad`` caches ``g_t(x)`` so a step evaluates each objective once.
    """

    x: np.ndarray
    y: np.ndarray
    grad: np.ndarray
    t: int = 0

    @property
    def stacked_x(self) -> np.ndarray:
        return self.x.ravel()

    @property
    def stacked_y(self) -> np.ndarray:
        return self.y.ravel()


def _as_agents(x, n: int, d: int) -> np.ndarray:
    x = np.array(x, dtype=float)
    if x.size != n * d:
        raise ValueError(f"expected {n * d} stacked entries, got {x.size}")
    return x.reshape(n, d)


def init_state(objective: QuadraticSensing, x0, alpha: float) -> SwarmState:
    """``y_{i,0} = alpha * grad f_{i,0}(x_{i,0})``."""
    x = _as_agents(x0, objective.n, objective.d)
    g = objective.stacked_gradient(0, x)
    return SwarmState(x=x, y=alpha * g, grad=g, t=0)


def doco_step(state: SwarmState, objective: QuadraticSensing, W, A, alpha: float) -> SwarmState:
    """One round: mix ``x - y``, predict with ``A``, then correct the tracker."""
    W = np.asarray(W, dtype=float)
    A = np.asarray(A, dtype=float)
    x_hat = W @ (state.x - state.y)
    x_next = x_hat @ A.T
    g_next = objective.stacked_gradient(state.t + 1, x_next)
    y_next = W @ state.y + alpha * (g_next - state.grad)
    return SwarmState(x=x_next, y=y_next, grad=g_next, t=state.t + 1)


def odg_step(state: SwarmState, objective: QuadraticSensing, W, A, alpha: float) -> SwarmState:
    """``x_{i,t+1} = A (sum_j W_ij x_{j,t} - alpha grad f_{i,t}(x_{i,t}))``."""
    W = np.asarray(W, dtype=float)
    A = np.asarray(A, dtype=float)
    x_next = (W @ state.x - alpha * state.grad) @ A.T
    g_next = objective.stacked_gradient(state.t + 1, x_next)
    return SwarmState(x=x_next, y=np.zeros_like(x_next), grad=g_next, t=state.t + 1)


@dataclass
class TrajectoryRecord:
    """Everything recorded over one run; arrays are indexed by ``t = 0 .. steps``."""

    algorithm: str
    alpha: float
    x: np.ndarray               # (S+1, n, d)
    y: np.ndarray               # (S+1, n, d)
    x_star: np.ndarray          # (S+2, d); the extra row is x*_{S+1}
    losses: np.ndarray          # (S+1, n) global loss at each agent's iterate
    opt_losses: np.ndarray      # (S+1,)
    z: np.ndarray               # (S+1, 3)
    d: np.ndarray               # (S+1, 3)
    regret: np.ndarray          # cumulative dynamic regret
    path_length: np.ndarray     # cumulative P_T^A
    grad_variation: np.ndarray  # cumulative V_T^A
    conservation: np.ndarray    # relative conservation residual
    G: float
    C_w: float
    C_g: float
    steps: int
    diverged: bool
    meta: dict = field(default_factory=dict)

    @property
    def x_bar(self) -> np.ndarray:
        return self.x.mean(axis=1)

    @property
    def C1(self) -> float:
        return float(self.z[0, 0])

    @property
    def C2(self) -> float:
        return float(self.z[0, 1])

    @property
    def C3(self) -> float:
        return float(self.z[0, 2])


def initial_point(n: int, d: int, init: str = "zeros", seed=None) -> np.ndarray:
    """``zeros`` puts every agent at the origin; ``random`` draws N(0, I) per agent."""
    if init == "zeros":
        return np.zeros((n, d))
    if init == "random":
        return np.random.default_rng(seed).standard_normal((n, d))
    raise ValueError(f"unknown initialisation {init!r}")


def simulate(objective: QuadraticSensing, W, A, x0, alpha: float, T: int,
             algorithm: str = "doco", backend=None):
    """Raw iterate histories ``(xs, ys, steps, diverged)`` from the selected kernel."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    if T < 1:
        raise ValueError("T must be at least 1")
    if objective.horizon < T + 1:
        raise ValueError(f"objective defines {objective.horizon} steps, run needs {T + 1}")
    fn = {None: kernels.simulate, "python": kernels.python_simulate,
          "compiled": kernels.compiled_simulate}[backend]
    if fn is None:
        raise RuntimeError("compiled kernel is not available")
    x0 = _as_agents(x0, objective.n, objective.d)
    return fn(objective.rows, objective.measurements,
              np.ascontiguousarray(W, dtype=float), np.ascontiguousarray(A, dtype=float),
              np.ascontiguousarray(x0), float(alpha), algorithm == "odg", int(T),
              DIVERGENCE_THRESHOLD)


def run(scenario, algorithm: str, alpha: float, T: int, init: str = "zeros", seed=None,
        backend=None) -> TrajectoryRecord:
    """Simulate `T` rounds on `scenario` and collect every per-step metric.

    Divergence (non-finite iterate or norm above 1e9) ends the run early
    with ``diverged=True``; the record then stops at the offending step.
    """
    obj = scenario.objective
    if obj.horizon < T + 2:
        raise ValueError(f"scenario horizon {obj.horizon} is too short for T={T}")
    x0 = initial_point(obj.n, obj.d, init, seed)
    xs, ys, steps, diverged = simulate(obj, scenario.topology.W, scenario.A, x0, alpha, T,
                                       algorithm, backend)
    x_star = obj.optimizers()[: steps + 2]
    A = scenario.A
    with np.errstate(over="ignore", invalid="ignore"):
        losses = metrics.agent_losses(obj, xs)
        opt = metrics.optimal_losses(obj, x_star[: steps + 1])
        grads = metrics.stacked_gradients(obj, xs)
        z = metrics.error_vectors(xs, ys, x_star)
        cons = (metrics.conservation_residuals(ys, grads, alpha) if algorithm == "doco"
                else np.zeros(steps + 1))
        G = metrics.cross_gradient_bound(obj, xs)
    gv = metrics.gradient_variations(x_star, obj, A)
    d = np.zeros((steps + 1, 3))
    d[:, 0] = metrics.prediction_residuals(x_star, A)
    d[:, 2] = alpha * gv
    if diverged:
        log.info("%s diverged at step %d (alpha=%.4g)", algorithm, steps, alpha)
    meta = dict(scenario.meta)
    meta.update(algorithm=algorithm, alpha=alpha, init=init, init_seed=seed,
                backend=backend or kernels.BACKEND, norm_A=spectral_norm(A))
    return TrajectoryRecord(
        algorithm=algorithm, alpha=float(alpha), x=xs, y=ys, x_star=x_star,
        losses=losses, opt_losses=opt, z=z, d=d,
        regret=metrics.dynamic_regret(losses, opt),
        path_length=np.cumsum(d[:, 0]), grad_variation=np.cumsum(gv),
        conservation=cons, G=G, C_w=float(d[:, 0].max()), C_g=float(gv.max()),
        steps=int(steps), diverged=bool(diverged), meta=meta,
    )
