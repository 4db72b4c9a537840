"""Linear value-function approximation fitted by gradient descent on the MSE.

With ``V_hat(s) = <omega, phi(s)>`` the loss
``MSE(omega) = mean((V(s) - V_hat(s))**2)`` is a convex quadratic and the
iteration ``omega <- omega - alpha/2 * grad MSE`` contracts towards the
least-squares solution whenever ``alpha <= 2 / lambda_max(Phi^T Phi / m)``.
Below that threshold the distance to the optimum never increases.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..numerics import make_rng


class StepSizeError(ArithmeticError):
    """The iterates left the admissible ball, i.e. the step size is too large."""


def mse(omega, features, values):
    return float(np.mean((values - features @ omega) ** 2))


def mse_gradient(omega, features, values):
    m = features.shape[0]
    return (-2.0 / m) * features.T @ (values - features @ omega)


def stability_threshold(features):
    """Largest step size for which the iteration is a (non-strict) contraction."""
    features = np.asarray(features, dtype=float)
    lam = np.linalg.eigvalsh(features.T @ features / features.shape[0])[-1]
    return 2.0 / lam


def sgd_vfa(features, values, alpha, iters, omega0=None, batch_size=None, rng=None,
            bound=1e8, tol=0.0):
    """Iterate ``omega_{k+1} = omega_k - alpha/2 * grad MSE(omega_k)``.

    With ``batch_size`` set, each gradient is estimated on a random subset of
    rows (stochastic variant). Iteration stops early once the update norm
    drops below ``tol``. Returns the trajectory, shape ``(n_steps + 1, d)``.
    """
    features = np.asarray(features, dtype=float)
    values = np.asarray(values, dtype=float)
    m, d = features.shape
    omega = np.zeros(d) if omega0 is None else np.array(omega0, dtype=float)
    rng = make_rng(rng) if batch_size else None
    traj = [omega.copy()]
    for _ in range(iters):
        if batch_size:
            rows = rng.choice(m, size=batch_size, replace=False)
            grad = mse_gradient(omega, features[rows], values[rows])
        else:
            grad = mse_gradient(omega, features, values)
        step = 0.5 * alpha * grad
        omega = omega - step
        if not np.all(np.isfinite(omega)) or np.linalg.norm(omega) > bound:
            raise StepSizeError(f"iterates diverged with alpha={alpha}")
        traj.append(omega.copy())
        if tol and np.linalg.norm(step) < tol:
            break
    return np.asarray(traj)


def least_squares_optimum(features, values):
    return np.linalg.lstsq(np.asarray(features, float), np.asarray(values, float), rcond=None)[0]


class LinearValueSGD(RegressorMixin, BaseEstimator):
    """Estimator wrapper: ``fit(phi, V)`` runs :func:`sgd_vfa` and keeps the trajectory.

    ``alpha=None`` picks half the stability threshold.
    """

    def __init__(self, alpha=None, max_iter=10000, tol=1e-12, batch_size=None, random_state=None):
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        alpha = 0.5 * stability_threshold(X) if self.alpha is None else self.alpha
        self.alpha_ = alpha
        self.trajectory_ = sgd_vfa(X, y, alpha, self.max_iter, batch_size=self.batch_size,
                                   rng=self.random_state, tol=self.tol)
        self.coef_ = self.trajectory_[-1]
        self.n_iter_ = len(self.trajectory_) - 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return check_array(X, dtype=float) @ self.coef_
