"""Reference NumPy implementation of the simulation loop."""

import numpy as np


def _stacked_grad(C, y, X):
    r = np.einsum("imd,id->im", C, X) - y
    return np.einsum("imd,im->id", C, r)


def simulate(rows, meas, W, A, x0, alpha, odg, T, threshold):
    """Run `T` steps of the tracker (``odg=False``) or the ODG baseline.

    Returns ``(xs, ys, steps, diverged)`` where ``xs``/``ys`` have shape
    ``(steps + 1, n, d)``. The loop stops early after storing the first
    iterate that is non-finite or has norm above `threshold`.
    """
    n, d = x0.shape
    varying = rows.shape[0] > 1
    xs = np.zeros((T + 1, n, d))
    ys = np.zeros((T + 1, n, d))
    X = np.array(x0, dtype=float)
    G = _stacked_grad(rows[0], meas[0], X)
    Y = np.zeros_like(X) if odg else alpha * G
    xs[0], ys[0] = X, Y
    At = A.T
    for t in range(T):
        if odg:
            Xn = (W @ X - alpha * G) @ At
        else:
            Xn = (W @ (X - Y)) @ At
        Gn = _stacked_grad(rows[t + 1 if varying else 0], meas[t + 1], Xn)
        if not odg:
            Y = W @ Y + alpha * (Gn - G)
        X, G = Xn, Gn
        xs[t + 1], ys[t + 1] = X, Y
        norm = np.sqrt(np.sum(X * X))
        if not norm <= threshold:
            return xs[: t + 2], ys[: t + 2], t + 1, True
    return xs, ys, T, False
