"""Builders for the two tracking experiments.

* ``sinusoidal``: sensors with random 1 x d measurement rows track
  ``n_targets`` noisy harmonic oscillators, state ``[p_j, p_j']`` per target.
* ``rods``: four sensors on a cycle estimate two rod lengths from single
  projected coordinates; the measurement noise is chosen in the kernel of
  ``C_t^T`` so the optimizer never moves while the local gradients do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dynamics import DynamicsModel, block_diag_dynamics, discretize_oscillator, spectral_norm
from .net import NetworkTopology, build_topology, cycle_graph, random_connected_graph
from .objective import ConvexityError, QuadraticSensing

# independent child streams of the run seed
_GRAPH, _WEIGHTS, _ROWS, _SIGNAL, _NOISE = range(5)


@dataclass(frozen=True)
class SinusoidalConfig:
    n_sensors: int = 6
    n_targets: int = 3
    sample_rate: float = 100.0
    period_s: float = 10.0
    amplitude_range: tuple = (0.0, 2.0)
    phase_range: tuple = (0.0, math.pi)
    noise_scale: float = 0.0
    prediction: bool = True
    row_distribution: str = "uniform"
    edge_prob: float = 0.4
    weights: str = "random"
    seed: int = 0

    @property
    def d(self) -> int:
        return 2 * self.n_targets


@dataclass(frozen=True)
class RodsConfig:
    R1: float = 1.0
    R2: float = 2.0
    rate1: float = 0.01
    rate2: float = 0.017
    theta1_0: float = 0.0
    theta2_0: float = 1.0
    weights: str = "metropolis"
    seed: int = 0


@dataclass
class Scenario:
    """An objective family with its network, prediction matrix and optimizer stream."""

    name: str
    objective: QuadraticSensing
    topology: NetworkTopology
    A: np.ndarray
    truth: np.ndarray
    report_index: tuple
    report_names: tuple
    meta: dict = field(default_factory=dict)

    @property
    def x_star(self) -> np.ndarray:
        return self.objective.optimizers()

    @property
    def horizon(self) -> int:
        return self.objective.horizon


def _streams(seed):
    return np.random.SeedSequence(seed).spawn(5)


def sinusoid_states(amplitudes, omegas, phases, times) -> np.ndarray:
    """Closed-form ``[A sin(w t + phi), w A cos(w t + phi)]`` per target, interleaved."""
    times = np.asarray(times, dtype=float)[:, None]
    arg = omegas * times + phases
    out = np.empty((times.shape[0], 2 * len(omegas)))
    out[:, 0::2] = amplitudes * np.sin(arg)
    out[:, 1::2] = omegas * amplitudes * np.cos(arg)
    return out


ROW_DISTRIBUTIONS = ("uniform", "normal")


def random_sensing_rows(n: int, d: int, rng, distribution: str = "uniform",
                        max_draws: int = 100) -> np.ndarray:
    """Random 1 x d rows, redrawn until the stacked C^T C is positive definite.

    ``uniform`` draws entries from U(0, 1), ``normal`` from N(0, 1).
    """
    if distribution not in ROW_DISTRIBUTIONS:
        raise ValueError(f"row_distribution must be one of {ROW_DISTRIBUTIONS}, got {distribution!r}")
    for _ in range(max_draws):
        if distribution == "uniform":
            C = rng.uniform(0.0, 1.0, size=(n, d))
        else:
            C = rng.standard_normal((n, d))
        lam = np.linalg.eigvalsh(C.T @ C)
        if lam[0] > 1e-8 * max(lam[-1], 1.0):
            return C
    raise ConvexityError(f"no positive definite C^T C after {max_draws} draws")


def build_sinusoidal(config: SinusoidalConfig, steps: int) -> Scenario:
    """Objectives for ``t = 0 .. steps + 1``."""
    if config.n_sensors < 1 or config.n_targets < 1:
        raise ValueError("need at least one sensor and one target")
    if config.period_s <= 0 or config.sample_rate <= 0:
        raise ValueError("period_s and sample_rate must be positive")
    H = steps + 2
    n, d = config.n_sensors, config.d
    ss = _streams(config.seed)
    adj = random_connected_graph(n, config.edge_prob, ss[_GRAPH])
    topo = build_topology(adj, config.weights, ss[_WEIGHTS])

    rows = random_sensing_rows(n, d, np.random.default_rng(ss[_ROWS]), config.row_distribution)
    sig = np.random.default_rng(ss[_SIGNAL])
    amps = sig.uniform(*config.amplitude_range, size=config.n_targets)
    phases = sig.uniform(*config.phase_range, size=config.n_targets)
    omega = 2.0 * math.pi / config.period_s
    omegas = np.full(config.n_targets, omega)
    dt = 1.0 / config.sample_rate

    A_true = block_diag_dynamics([discretize_oscillator(w, dt) for w in omegas])
    model = DynamicsModel(A_true, config.noise_scale, seed=ss[_NOISE])
    truth = model.trajectory(sinusoid_states(amps, omegas, phases, [0.0])[0], H - 1)
    meas = np.einsum("id,td->ti", rows, truth)[:, :, None]
    objective = QuadraticSensing(rows[:, None, :], meas)
    A = A_true if config.prediction else np.eye(d)
    meta = dict(
        scenario="sinusoidal", seed=config.seed, n=n, d=d, sigma_W=topo.sigma_W,
        omega=omega, dt=dt, samples_per_period=config.period_s * config.sample_rate,
        prediction=config.prediction, row_distribution=config.row_distribution,
        norm_A=spectral_norm(A), A_stable=spectral_norm(A) <= 1 + 1e-12,
        C_w_model=model.C_w, amplitudes=amps.tolist(), phases=phases.tolist(),
    )
    return Scenario("sinusoidal", objective, topo, A, truth,
                    tuple(range(0, d, 2)), tuple(f"p{j + 1}" for j in range(config.n_targets)),
                    meta)


def rods_rows(theta1, theta2) -> np.ndarray:
    """Stacked ``C_t`` (shape ``(..., 4, 2)``) for the projected-coordinate sensors."""
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    C = np.zeros(theta1.shape + (4, 2))
    C[..., 0, 0] = np.cos(theta1)
    C[..., 1, 0] = np.cos(theta2)
    C[..., 2, 1] = np.sin(theta1)
    C[..., 3, 1] = np.sin(theta2)
    return C


def kernel_unit_vector(C, tol: float = 1e-10) -> np.ndarray:
    """Deterministic unit vector ``v`` with ``C^T v = 0``.

    An orthonormal basis ``K`` of the kernel comes from a column-pivoted QR
    of ``C``. The returned vector is the normalised projection ``K K^T e_j``
    for the first coordinate ``j`` with a nonzero projection, so it does not
    depend on which basis the factorization happened to return; its first
    nonzero component is positive.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m, k = C.shape
    Q, R, _ = scipy.linalg.qr(C, mode="full", pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    rank = int(np.count_nonzero(diag > tol * max(diag.max(initial=0.0), 1.0)))
    if rank >= m:
        raise ValueError("C^T has a trivial kernel")
    K = Q[:, rank:]
    for j in range(m):
        v = K @ K[j]
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v = v / nv
            lead = np.flatnonzero(np.abs(v) > 1e-12)[0]
            return v if v[lead] > 0 else -v
    raise AssertionError("unreachable: a nontrivial kernel projects some e_j")


def rod_angles(config: RodsConfig, H: int, max_nudges: int = 1000):
    """Angles for ``t < H``; theta2 is nudged by 1e-6 while C_t^T C_t is near singular."""
    t = np.arange(H, dtype=float)
    th1 = config.theta1_0 + config.rate1 * t
    th2 = config.theta2_0 + config.rate2 * t
    for step in range(H):
        for _ in range(max_nudges):
            c1, c2 = math.cos(th1[step]), math.cos(th2[step])
            s1, s2 = math.sin(th1[step]), math.sin(th2[step])
            if min(c1 * c1 + c2 * c2, s1 * s1 + s2 * s2) >= 1e-8:
                break
            th2[step] += 1e-6
        else:
            raise ConvexityError(f"degenerate rod angles at t={step}")
    return th1, th2


def build_rods(config: RodsConfig, steps: int) -> Scenario:
    if config.R1 <= 0 or config.R2 <= 0:
        raise ValueError("rod lengths must be positive")
    H = steps + 2
    ss = _streams(config.seed)
    adj = cycle_graph(4)
    topo = build_topology(adj, config.weights, ss[_WEIGHTS])
    th1, th2 = rod_angles(config, H)
    C = rods_rows(th1, th2)
    R = np.array([config.R1, config.R2])
    V = np.array([kernel_unit_vector(C[t]) for t in range(H)])
    meas = (C @ R + V)[:, :, None]
    objective = QuadraticSensing(C[:, :, None, :], meas)
    truth = np.broadcast_to(R, (H, 2)).copy()
    meta = dict(scenario="rods", seed=config.seed, n=4, d=2, sigma_W=topo.sigma_W,
                R1=config.R1, R2=config.R2, prediction=False, norm_A=1.0, A_stable=True)
    return Scenario("rods", objective, topo, np.eye(2), truth, (0, 1), ("R1", "R2"), meta)
