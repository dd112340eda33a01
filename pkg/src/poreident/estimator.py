"""scikit-learn style wrapper around the admissible-set identification."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .identification import (
    DEFAULT_GAMMA,
    FeasibleBox,
    Measurement,
    grid_sweep,
    admissible_threshold,
    random_search,
)


class AdsorptionRateIdentifier(RegressorMixin, BaseEstimator):
    """Estimate (Da_a, Da_d) from a breakthrough curve.

    ``X`` holds the sampling times as a single column, ``y`` the measured outlet
    concentration. Fitting evaluates the residual over the feasible box and
    keeps the admissible set; ``predict`` returns the forward curve of the
    minimizer at the requested times.

    Parameters
    ----------
    simulator : BreakthroughSimulator
        Forward model with the mesh, flow and fixed transport parameters.
    box : FeasibleBox, optional
        Search box, default ``[0, 0.01] x [0, 0.1]``.
    strategy : {"sobol", "grid"}
    n_samples : int
        Number of Sobol points.
    grid_shape : tuple of int
        Lattice size for the grid strategy.
    gamma, delta : float
        Threshold factor and noise amplitude of the data.
    T_cut : float, optional
        Only use data up to this time.
    workers : int
        Concurrent forward solves.
    """

    def __init__(
        self,
        simulator=None,
        box=None,
        strategy="sobol",
        n_samples=150,
        grid_shape=(51, 51),
        gamma=DEFAULT_GAMMA,
        delta=0.01,
        T_cut=None,
        workers=1,
    ):
        self.simulator = simulator
        self.box = box
        self.strategy = strategy
        self.n_samples = n_samples
        self.grid_shape = grid_shape
        self.gamma = gamma
        self.delta = delta
        self.T_cut = T_cut
        self.workers = workers

    def _check_times(self, X):
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != 1:
            raise ValueError(f"X must have a single column of times, got {X.shape[1]}")
        return X[:, 0]

    def fit(self, X, y):
        if self.simulator is None:
            raise ValueError("a simulator is required")
        if self.strategy not in ("sobol", "grid"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        X, y = check_X_y(X, y, y_numeric=True)
        times = self._check_times(X)
        order = np.argsort(times)
        meas = Measurement(times[order], y[order], delta=float(self.delta))
        if not np.isclose(meas.tau, self.simulator.params.tau, rtol=1e-9):
            raise ValueError("measurement step differs from the simulator step")
        box = self.box if self.box is not None else FeasibleBox()
        if self.strategy == "sobol":
            adm = random_search(box, self.n_samples, meas, self.simulator, self.gamma, self.T_cut, self.workers)
        else:
            surf = grid_sweep(box, tuple(self.grid_shape), meas, self.simulator, self.T_cut, self.workers)
            T_eff = meas.times[-1] if self.T_cut is None else self.T_cut
            adm = surf.to_admissible(admissible_threshold(self.gamma, meas.delta, T_eff), self.gamma, box, T_eff)
        best = adm.minimizer
        self.admissible_set_ = adm
        self.da_a_, self.da_d_, self.J_min_ = best.da_a, best.da_d, best.J
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, ["da_a_", "da_d_"])
        t = self._check_times(X)
        curve = self.simulator.breakthrough(self.da_a_, self.da_d_)
        tt = np.concatenate([[0.0], curve.times])
        vv = np.concatenate([[0.0], curve.values])
        return np.interp(t, tt, vv)
