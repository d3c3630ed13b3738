"""Closed-form stability constants and regret / tracking bounds.

The coupled error vector ``z_t = (tracking, consensus_x, consensus_y)``
obeys ``z_{t+1} <= Phi(alpha) z_t + d_t`` elementwise; everything here is a
function of the 3x3 matrix ``Phi(alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class StepsizeError(ValueError):
    """The step size lies outside the region where ``det(I - Phi) > 0``."""


@dataclass(frozen=True)
class TheoryParams:
    L_g: float
    mu: float
    n: int
    sigma_W: float
    alpha: float
    C_w: float = 0.0
    C_g: float = 0.0
    G: float = 0.0

    def __post_init__(self):
        # mu may exceed L_g: it is the curvature of the *sum* of n local terms
        if not (self.mu > 0 and self.L_g > 0 and self.mu <= self.n * self.L_g * (1 + 1e-12)):
            raise ValueError(f"need 0 < mu <= n*L_g, got mu={self.mu}, L_g={self.L_g}")
        if not 0.0 <= self.sigma_W < 1.0:
            raise ValueError(f"sigma_W must lie in [0, 1), got {self.sigma_W}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if min(self.C_w, self.C_g, self.G) < 0:
            raise ValueError("C_w, C_g and G must be nonnegative")


@dataclass(frozen=True)
class LemmaA1Constants:
    """Adjugate ``c`` of ``I - Phi(alpha)``, its determinant and the regret constant."""

    c: np.ndarray
    det: float
    max_c: float
    K: float

    @property
    def C_inv(self) -> float:
        return self.det

    @property
    def inverse(self) -> np.ndarray:
        return self.c / self.det


def phi_matrix(params: TheoryParams) -> np.ndarray:
    a, n, s = params.alpha, params.n, params.sigma_W
    L, mu = params.L_g, params.mu
    rn = math.sqrt(n)
    return np.array([
        [1.0 - mu / n * a, L / rn * a, 0.0],
        [0.0, s, s],
        [3.0 * rn * L * a, L * (2.0 + s) * a, math.sqrt(s)],
    ])


def identity_minus_phi(params: TheoryParams) -> np.ndarray:
    """``I - Phi(alpha)`` built entrywise, without subtracting from 1.

    ``1 - mu alpha / n`` rounds away most digits of ``mu alpha / n`` when the
    step is small; here that entry is kept as is.
    """
    a, n, s = params.alpha, params.n, params.sigma_W
    L, mu = params.L_g, params.mu
    rn = math.sqrt(n)
    return np.array([
        [mu / n * a, -L / rn * a, 0.0],
        [0.0, 1.0 - s, -s],
        [-3.0 * rn * L * a, -L * (2.0 + s) * a, 1.0 - math.sqrt(s)],
    ])


def stability_margin(params: TheoryParams) -> float:
    """``1 - rho(Phi(alpha))``, accurate even when ``rho`` rounds to 1.

    ``Phi`` is entrywise nonnegative for ``alpha <= n / mu``, so its Perron root
    is real and ``1 - rho`` is the smallest real eigenvalue of ``B = I - Phi``.
    That root is located with a dense eigensolver and then polished by Newton
    steps on ``det(B - e I)``, whose coefficients come straight from ``B``.
    """
    B = identity_minus_phi(params)
    ev = np.linalg.eigvals(B)
    if params.alpha > params.n / params.mu:
        # Phi has a negative entry; fall back to the plain spectral radius
        return 1.0 - float(np.abs(1.0 - ev).max())
    e = float(min(ev.real))
    c2 = float(np.trace(B))
    c1 = float(B[0, 0] * B[1, 1] + B[0, 0] * B[2, 2] - B[0, 2] * B[2, 0]
               + B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1])
    c0 = float(B[0, 0] * (B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1]) + B[0, 1] * B[1, 2] * B[2, 0])
    for _ in range(8):
        q = ((-e + c2) * e - c1) * e + c0
        dq = (-3.0 * e + 2.0 * c2) * e - c1
        if dq == 0.0:
            break
        step = q / dq
        e -= step
        if abs(step) <= 1e-17 * max(abs(e), 1e-300):
            break
    return e


def stepsize_terms(L_g: float, mu: float, n: int, sigma_W: float) -> tuple[float, float, float, float]:
    """The four candidates whose minimum bounds the step size.

    Terms with ``sigma_W`` in a denominator are ``inf`` when ``sigma_W == 0``.
    """
    if not 0.0 <= sigma_W < 1.0:
        raise ValueError(f"sigma_W must lie in [0, 1), got {sigma_W}")
    s, rs = sigma_W, math.sqrt(sigma_W)
    t1 = n / mu
    if s == 0.0:
        t2 = t4 = math.inf
    else:
        t2 = (1 - s) * (1 - rs) / (s * (2 + s) + 3 * s * (n / mu) * L_g) / L_g
        t4 = (1 - rs) / rs / L_g
    t3 = 1.0 / L_g
    return t1, t2, t3, t4


def stepsize_upper_bound(L_g: float, mu: float, n: int, sigma_W: float) -> float:
    return min(stepsize_terms(L_g, mu, n, sigma_W))


def lemma_a1_stepsize(L_g: float, mu: float, n: int, sigma_W: float) -> float:
    """Largest step size for which ``Phi(alpha)`` has positive entries and ``det(I - Phi) >= 0``."""
    t1, t2, _, _ = stepsize_terms(L_g, mu, n, sigma_W)
    return min(t1, t2)


def spectral_radius_3x3(M) -> float:
    """Largest root modulus of the characteristic cubic, in closed form."""
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got {M.shape}")
    # lambda^3 + a lambda^2 + b lambda + c
    a = -float(np.trace(M))
    b = float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
              + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
              + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
    c = -float(np.linalg.det(M))
    return max(abs(r) for r in cubic_roots(a, b, c))


def cubic_roots(a: float, b: float, c: float) -> list[complex]:
    """Roots of ``x^3 + a x^2 + b x + c`` via the trigonometric / Cardano forms."""
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    scale = max(1.0, abs(p), abs(q)) ** 2
    if abs(disc) <= 1e-15 * scale and abs(p) <= 1e-12 * max(1.0, abs(a)):
        # triple root
        return [complex(-shift)] * 3
    if disc <= 0.0:
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        phi = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        return [complex(r * math.cos(phi - 2.0 * math.pi * k / 3.0) - shift) for k in range(3)]
    sq = math.sqrt(disc)
    u = math.copysign(abs(-q / 2.0 + sq) ** (1.0 / 3.0), -q / 2.0 + sq)
    v = math.copysign(abs(-q / 2.0 - sq) ** (1.0 / 3.0), -q / 2.0 - sq)
    real = u + v
    pair = complex(-real / 2.0, math.sqrt(3.0) / 2.0 * (u - v))
    return [complex(real - shift), pair - shift, pair.conjugate() - shift]


def lemma_a1_constants(params: TheoryParams) -> LemmaA1Constants:
    """Entries of adj(I - Phi(alpha)), det(I - Phi(alpha)) and ``K = 2 n G max(c) / det``.

    Raises
    ------
    StepsizeError
        If ``det(I - Phi(alpha)) <= 0``.
    """
    a, n, s = params.alpha, params.n, params.sigma_W
    L, mu = params.L_g, params.mu
    rn, rs = math.sqrt(n), math.sqrt(s)
    m = mu / n
    det = m * (1 - s) * (1 - rs) * a - m * s * (2 + s) * L * a * a - 3 * s * L * L * a * a
    if not det > 0.0:
        raise StepsizeError(f"det(I - Phi(alpha)) = {det:.3e} <= 0 for alpha={a:.3e}")
    c = np.array([
        [(1 - rs) * (1 - s) - s * (2 + s) * L * a, (1 - rs) * L * a / rn, s * L * a / rn],
        [3 * rn * s * L * a, m * (1 - rs) * a, m * s * a],
        [3 * rn * (1 - s) * L * a, 3 * L * L * a * a + m * (2 + s) * L * a * a, m * (1 - s) * a],
    ])
    max_c = float(c.max())
    K = 2.0 * n * params.G / det * max_c
    return LemmaA1Constants(c=c, det=float(det), max_c=max_c, K=float(K))


def regret_bound(constants: LemmaA1Constants, C1, C2, C3, P, V):
    """``K (C1 + C2 + C3 + P + V)``; `P` and `V` may be arrays of prefixes."""
    return constants.K * (C1 + C2 + C3 + np.asarray(P) + np.asarray(V))


def asymptotic_tracking_bound(constants: LemmaA1Constants, C_w: float, C_g: float) -> float:
    return 2.0 / constants.C_inv * constants.max_c * (C_w + C_g)
