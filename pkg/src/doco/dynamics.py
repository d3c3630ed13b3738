"""Linear optimizer dynamics ``x*_{t+1} = A x*_t + w_t`` with bounded noise."""

from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag


def discretize_oscillator(omega: float, dt: float) -> np.ndarray:
    """Exact flow over `dt` of ``p'' = -omega^2 p`` in state ``[p, p']``."""
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    c, s = np.cos(omega * dt), np.sin(omega * dt)
    return np.array([[c, s / omega], [-omega * s, c]])


def block_diag_dynamics(blocks) -> np.ndarray:
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        raise ValueError("need at least one block")
    for b in blocks:
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"blocks must be square, got {b.shape}")
    return block_diag(*blocks)


def spectral_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=float), 2))


class DynamicsModel:
    """Dynamics matrix plus a truncated Gaussian noise stream.

    Noise draws are ``noise_scale * N(0, I)`` rejected until
    ``||w|| <= C_w = 3 * noise_scale * sqrt(d)``.
    """

    def __init__(self, A, noise_scale: float = 0.0, seed=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        self.A = A
        self.noise_scale = float(noise_scale)
        self.C_w = 3.0 * self.noise_scale * np.sqrt(A.shape[0])
        self.norm_A = spectral_norm(A)
        # ||A|| <= 1 is assumed by the stability analysis; it is only reported
        self.stable = self.norm_A <= 1.0 + 1e-12
        self._rng = np.random.default_rng(seed)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def sample_noise(self) -> np.ndarray:
        if self.noise_scale == 0.0:
            return np.zeros(self.d)
        while True:
            w = self.noise_scale * self._rng.standard_normal(self.d)
            if np.linalg.norm(w) <= self.C_w:
                return w

    def propagate_truth(self, x_star) -> np.ndarray:
        return self.A @ np.asarray(x_star, dtype=float) + self.sample_noise()

    def trajectory(self, x0, steps: int) -> np.ndarray:
        """States ``x_0 .. x_steps`` (shape ``(steps + 1, d)``)."""
        out = np.empty((steps + 1, self.d))
        out[0] = x0
        for t in range(steps):
            out[t + 1] = self.propagate_truth(out[t])
        return out
