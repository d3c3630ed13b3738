"""Regret accounting, regularity measures and per-step inequality checks.

Conventions: iterates ``xs`` have shape ``(S+1, n, d)``, optimizer streams
``(S+2, d)`` when the measure needs ``x*_{t+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .objective import QuadraticSensing
from .theory import TheoryParams, phi_matrix

SLACK_RTOL = 1e-8


class ErrorVector(NamedTuple):
    tracking: float
    consensus_x: float
    consensus_y: float


def _rows_over(obj: QuadraticSensing, t0: int, t1: int) -> np.ndarray:
    """Rows for ``t0 <= t < t1`` broadcast to a leading time axis."""
    if obj.time_varying:
        return obj.rows[t0:t1]
    return np.broadcast_to(obj.rows, (t1 - t0,) + obj.rows.shape[1:])


def stacked_gradients(obj: QuadraticSensing, X, t0: int = 0) -> np.ndarray:
    """``g_t(X[t - t0])`` for every step; `X` has shape ``(S, n, d)``."""
    X = np.asarray(X, dtype=float)
    S = X.shape[0]
    C = _rows_over(obj, t0, t0 + S)
    r = np.einsum("timd,tid->tim", C, X) - obj.measurements[t0:t0 + S]
    return np.einsum("timd,tim->tid", C, r)


def agent_losses(obj: QuadraticSensing, xs) -> np.ndarray:
    """Global loss at every agent's iterate, ``f_t(x_{i,t})``, shape ``(S+1, n)``."""
    xs = np.asarray(xs, dtype=float)
    C = _rows_over(obj, 0, xs.shape[0])
    r = np.einsum("tjmd,tid->tijm", C, xs) - obj.measurements[: xs.shape[0], None]
    return 0.5 * np.einsum("tijm,tijm->ti", r, r)


def optimal_losses(obj: QuadraticSensing, x_star) -> np.ndarray:
    x_star = np.asarray(x_star, dtype=float)
    C = _rows_over(obj, 0, x_star.shape[0])
    r = np.einsum("tjmd,td->tjm", C, x_star) - obj.measurements[: x_star.shape[0]]
    return 0.5 * np.einsum("tjm,tjm->t", r, r)


def cross_gradient_bound(obj: QuadraticSensing, xs) -> float:
    """``max_{t,i,j} ||grad f_{j,t}(x_{i,t})||``: gradient bound over the visited region."""
    xs = np.asarray(xs, dtype=float)
    C = _rows_over(obj, 0, xs.shape[0])
    r = np.einsum("tjmd,tid->tijm", C, xs) - obj.measurements[: xs.shape[0], None]
    g = np.einsum("tjmd,tijm->tijd", C, r)
    return float(np.sqrt(np.einsum("tijd,tijd->tij", g, g)).max())


def dynamic_regret(losses, opt_losses) -> np.ndarray:
    """Cumulative ``(1/n) sum_i sum_t f_t(x_{i,t}) - sum_t f_t(x*_t)`` for every prefix."""
    losses = np.asarray(losses, dtype=float)
    return np.cumsum(losses.mean(axis=1) - np.asarray(opt_losses, dtype=float))


def static_regret(obj: QuadraticSensing, xs) -> float:
    """Regret against the single best point in hindsight for ``t = 0 .. S``."""
    xs = np.asarray(xs, dtype=float)
    T1 = xs.shape[0]
    C = _rows_over(obj, 0, T1)
    H = np.einsum("timd,time->de", C, C)
    b = np.einsum("timd,tim->d", C, obj.measurements[:T1])
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise ValueError("summed normal matrix is singular") from exc
    x_hat = np.linalg.solve(H, b)
    best = optimal_losses(obj, np.broadcast_to(x_hat, (T1, obj.d))).sum()
    return float(agent_losses(obj, xs).mean(axis=1).sum() - best)


def prediction_residuals(x_star, A) -> np.ndarray:
    """``||x*_{t+1} - A x*_t||`` for ``t = 0 .. len - 2``."""
    x_star = np.asarray(x_star, dtype=float)
    diff = x_star[1:] - x_star[:-1] @ np.asarray(A, dtype=float).T
    return np.sqrt(np.einsum("td,td->t", diff, diff))


def path_length(x_star, A) -> np.ndarray:
    """Cumulative path length with prediction, one entry per ``T``."""
    return np.cumsum(prediction_residuals(x_star, A))


def gradient_variations(x_star, obj: QuadraticSensing, A) -> np.ndarray:
    """``||g_{t+1}(1 (x) A x*_t) - g_t(1 (x) x*_t)||`` (stacked norm) per step."""
    x_star = np.asarray(x_star, dtype=float)
    S = x_star.shape[0] - 1
    pred = x_star[:-1] @ np.asarray(A, dtype=float).T
    n = obj.n
    g_next = stacked_gradients(obj, np.repeat(pred[:, None], n, axis=1), t0=1)
    g_now = stacked_gradients(obj, np.repeat(x_star[:-1, None], n, axis=1), t0=0)
    diff = (g_next - g_now).reshape(S, -1)
    return np.sqrt(np.einsum("tk,tk->t", diff, diff))


def gradient_variation(x_star, obj: QuadraticSensing, A) -> np.ndarray:
    """Cumulative gradient variation, one entry per ``T``."""
    return np.cumsum(gradient_variations(x_star, obj, A))


def error_vector(x, y, x_star) -> ErrorVector:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xbar, ybar = x.mean(axis=0), y.mean(axis=0)
    return ErrorVector(
        float(np.linalg.norm(xbar - np.asarray(x_star, dtype=float))),
        float(np.linalg.norm(x - xbar)),
        float(np.linalg.norm(y - ybar)),
    )


def error_vectors(xs, ys, x_star) -> np.ndarray:
    """Vectorised :func:`error_vector` over a trajectory, shape ``(S+1, 3)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xbar = xs.mean(axis=1)
    ybar = ys.mean(axis=1)
    S1 = xs.shape[0]
    z = np.empty((S1, 3))
    z[:, 0] = np.linalg.norm(xbar - np.asarray(x_star, dtype=float)[:S1], axis=1)
    z[:, 1] = np.linalg.norm((xs - xbar[:, None]).reshape(S1, -1), axis=1)
    z[:, 2] = np.linalg.norm((ys - ybar[:, None]).reshape(S1, -1), axis=1)
    return z


def perturbation_vectors(x_star, obj: QuadraticSensing, A, alpha: float) -> np.ndarray:
    """Rows ``d_t = (||A x*_t - x*_{t+1}||, 0, alpha * gradient variation)``."""
    res = prediction_residuals(x_star, A)
    d = np.zeros((res.size, 3))
    d[:, 0] = res
    d[:, 2] = alpha * gradient_variations(x_star, obj, A)
    return d


def conservation_residuals(ys, grads, alpha: float) -> np.ndarray:
    """Relative residual of ``sum_i y_i = alpha sum_i grad_i`` at every step.

    Scaled by ``1 + alpha * ||g_t||`` with ``g_t`` the stacked gradient.
    """
    ys = np.asarray(ys, dtype=float)
    grads = np.asarray(grads, dtype=float)
    res = np.linalg.norm(ys.sum(axis=1) - alpha * grads.sum(axis=1), axis=1)
    scale = 1.0 + alpha * np.linalg.norm(grads.reshape(grads.shape[0], -1), axis=1)
    return res / scale


# ---------------------------------------------------------------------------
# per-step inequality checks

@dataclass
class CheckResult:
    status: str  # "ok", "violated", "precondition unmet", "not applicable"
    checked: int = 0
    violations: int = 0
    worst_excess: float = -math.inf
    reason: str = ""


@dataclass
class InequalityReport:
    tracking: CheckResult
    consensus_x: CheckResult
    consensus_y: CheckResult
    recursion: CheckResult
    extra: dict = field(default_factory=dict)

    def items(self):
        return [("lemma_tracking", self.tracking), ("lemma_consensus_x", self.consensus_x),
                ("lemma_consensus_y", self.consensus_y), ("z_recursion", self.recursion)]

    @property
    def total_violations(self) -> int:
        return sum(r.violations for _, r in self.items())


def _check(lhs, rhs) -> CheckResult:
    excess = (lhs - rhs) / (1.0 + np.abs(rhs))
    bad = int(np.count_nonzero(excess > SLACK_RTOL))
    worst = float(excess.max()) if excess.size else -math.inf
    return CheckResult("violated" if bad else "ok", int(excess.size), bad, worst)


def verify_step_inequalities(z, d, params: TheoryParams, norm_A: float = 1.0) -> InequalityReport:
    """Check the one-step contraction inequalities along a trajectory.

    Parameters
    ----------
    z : ndarray, shape (S+1, 3)
        Error vectors of the run.
    d : ndarray, shape (>=S, 3)
        Perturbation vectors; row ``t`` pairs with the step ``t -> t+1``.
    params : TheoryParams
    norm_A : float
        Spectral norm of the prediction matrix; every inequality assumes
        ``||A|| <= 1``.

    Returns
    -------
    InequalityReport
        Violation counts use the relative slack ``1e-8 * (1 + rhs)``.
    """
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float)
    S = z.shape[0] - 1
    a, n, s, L, mu = params.alpha, params.n, params.sigma_W, params.L_g, params.mu
    rn = math.sqrt(n)
    z0, z1, d = z[:-1], z[1:], d[:S]

    unmet = CheckResult("precondition unmet", reason="||A|| > 1")
    if norm_A > 1.0 + 1e-12:
        return InequalityReport(unmet, unmet, unmet, unmet)

    if a <= 1.0 / L:
        rhs = (1 - a * mu / n) * z0[:, 0] + L / rn * a * z0[:, 1] + d[:, 0]
        tracking = _check(z1[:, 0], rhs)
    else:
        tracking = CheckResult("precondition unmet", reason="alpha > 1/L_g")

    consensus_x = _check(z1[:, 1], s * z0[:, 1] + s * z0[:, 2])
    rhs_y = (s * (1 + L * a) * z0[:, 2] + L * (1 + s + L * a) * a * z0[:, 1]
             + rn * L * (2 + L * a) * a * z0[:, 0] + d[:, 2])
    consensus_y = _check(z1[:, 2], rhs_y)

    limit = 1.0 / L if s == 0 else min(1.0 / L, (1 - math.sqrt(s)) / math.sqrt(s) / L)
    if a <= limit:
        rhs_z = z0 @ phi_matrix(params).T + d
        recursion = _check(z1.ravel(), rhs_z.ravel())
    else:
        recursion = CheckResult("precondition unmet", reason="alpha above recursion limit")
    return InequalityReport(tracking, consensus_x, consensus_y, recursion)
