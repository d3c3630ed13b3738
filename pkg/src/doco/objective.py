"""Time-varying least-squares sensing objectives.

Agent ``i`` at time ``t`` holds ``f_{i,t}(x) = 0.5 * ||C_{i,t} x - y_{i,t}||^2``
and the network minimises ``f_t = sum_i f_{i,t}``.
"""

from __future__ import annotations

import numpy as np


class ConvexityError(ValueError):
    """The stacked sensing matrix is rank deficient at some time step."""


class QuadraticSensing:
    """Per-agent measurement rows and a measurement stream.

    Parameters
    ----------
    rows : array_like, shape (n, m, d) or (H, n, m, d)
        Measurement matrices ``C_i``. A 3-d array is shared by every time
        step; a 4-d array gives one set per step.
    measurements : array_like, shape (H, n, m)
        ``y_{i,t}`` for ``t = 0 .. H-1``.
    """

    def __init__(self, rows, measurements):
        rows = np.ascontiguousarray(rows, dtype=float)
        meas = np.ascontiguousarray(measurements, dtype=float)
        if rows.ndim == 3:
            rows = rows[None]
        if rows.ndim != 4:
            raise ValueError(f"rows must be 3-d or 4-d, got shape {rows.shape}")
        if meas.ndim != 3 or meas.shape[1:] != rows.shape[1:3]:
            raise ValueError(
                f"measurements shape {meas.shape} does not match rows {rows.shape}")
        if rows.shape[0] not in (1, meas.shape[0]):
            raise ValueError("time-varying rows must cover every measurement step")
        self.rows = rows
        self.measurements = meas
        self._hessians = None
        self._optimizers = None

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    @property
    def d(self) -> int:
        return self.rows.shape[3]

    @property
    def horizon(self) -> int:
        """Number of time steps with a defined objective."""
        return self.measurements.shape[0]

    @property
    def time_varying(self) -> bool:
        return self.rows.shape[0] > 1

    def rows_at(self, t: int) -> np.ndarray:
        return self.rows[t if self.time_varying else 0]

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        return x

    def local_gradient(self, agent: int, t: int, x) -> np.ndarray:
        C = self.rows_at(t)[agent]
        x = self._check_x(x)
        return C.T @ (C @ x - self.measurements[t, agent])

    def local_loss(self, agent: int, t: int, x) -> float:
        r = self.rows_at(t)[agent] @ self._check_x(x) - self.measurements[t, agent]
        return 0.5 * float(r @ r)

    def loss(self, t: int, x) -> float:
        """Global loss f_t(x)."""
        x = self._check_x(x)
        r = np.einsum("imd,d->im", self.rows_at(t), x) - self.measurements[t]
        return 0.5 * float(np.sum(r * r))

    def gradient(self, t: int, x) -> np.ndarray:
        """Global gradient C_t^T (C_t x - y_t)."""
        x = self._check_x(x)
        C = self.rows_at(t)
        r = np.einsum("imd,d->im", C, x) - self.measurements[t]
        return np.einsum("imd,im->d", C, r)

    def stacked_gradient(self, t: int, X) -> np.ndarray:
        """g_t(X): row i is the local gradient of agent i at X[i]."""
        X = np.asarray(X, dtype=float).reshape(self.n, self.d)
        C = self.rows_at(t)
        r = np.einsum("imd,id->im", C, X) - self.measurements[t]
        return np.einsum("imd,im->id", C, r)

    def hessian(self, t: int) -> np.ndarray:
        C = self.rows_at(t)
        return np.einsum("imd,ime->de", C, C)

    def exact_optimizer(self, t: int) -> np.ndarray:
        """Solve C_t^T C_t x = C_t^T y_t by Cholesky."""
        H = self.hessian(t)
        C = self.rows_at(t)
        b = np.einsum("imd,im->d", C, self.measurements[t])
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError as exc:
            raise ConvexityError(f"C^T C is not positive definite at t={t}") from exc
        return np.linalg.solve(L.T, np.linalg.solve(L, b))

    def optimizers(self) -> np.ndarray:
        """Exact optimizers for every step, shape (H, d)."""
        if self._optimizers is None:
            C = self.rows
            H = np.einsum("timd,time->tde", C, C)
            lam = np.linalg.eigvalsh(H)[:, 0]
            bad = np.flatnonzero(lam <= 1e-12 * np.maximum(lam.max(), 1.0))
            if bad.size:
                raise ConvexityError(f"C^T C is not positive definite at t={bad[0]}")
            if self.time_varying:
                b = np.einsum("timd,tim->td", C, self.measurements)
                self._optimizers = np.linalg.solve(H, b[..., None])[..., 0]
            else:
                b = np.einsum("imd,tim->dt", C[0], self.measurements)
                self._optimizers = np.linalg.solve(H[0], b).T.copy()
            self._optimizers.setflags(write=False)
        return self._optimizers

    def convexity_constants(self) -> tuple[float, float]:
        """(L_g, mu) over the whole horizon.

        ``L_g`` is the largest local curvature ``max_{i,t} lambda_max(C_i^T C_i)``
        and ``mu`` the smallest global curvature ``min_t lambda_min(C_t^T C_t)``.
        """
        C = self.rows
        local = np.einsum("timd,time->tide", C, C)
        L_g = float(np.linalg.eigvalsh(local).max())
        mu = float(np.linalg.eigvalsh(local.sum(axis=1)).min())
        if mu <= 1e-12 * max(L_g, 1.0):
            raise ConvexityError(f"global objective is not strongly convex (mu={mu:.3e})")
        return L_g, mu
