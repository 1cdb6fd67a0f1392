"""Estimator-style wrappers over the solve and calibration pipelines.

``Homogenizer`` turns a voxel model into its effective tensor through
the usual fit/attributes protocol, optionally warm-started from
externally supplied displacement fields. ``ScalingCalibrator`` fits
the per-entry multiplicative correction on (predicted, reference)
tensor pairs and applies it as a transform.
"""

from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .fem import PeriodicSystem, fields_to_grid, grid_to_fields
from .geometry import VoxelModel
from .homogenization import (
    HomogenizedTensor,
    apply_scaling,
    calibrate_scaling,
    homogenized_tensor,
)
from .solvers import (
    Method,
    Preconditioner,
    SolveReport,
    SolverConfig,
    relative_residual,
    solve,
)

__all__ = ["Homogenizer", "ScalingCalibrator"]


class Homogenizer(BaseEstimator):
    """Voxel-FEM homogenization as a fit-once estimator.

    Parameters mirror :class:`~prefine.solvers.SolverConfig`. After
    ``fit`` the instance exposes ``tensor_`` (the effective 6x6
    stiffness), ``fields_`` (solved fluctuation fields as a
    [6, 3, n, n, n] grid), ``reports_`` (six solve reports), and
    ``system_`` (the assembled periodic operator).

    Parameters
    ----------
    method : str or Method, default "pcg"
    preconditioner : str or Preconditioner, default "jacobi_diag"
    tol : float, default 1e-8
        Relative-residual stopping threshold.
    max_iters : int, default 10000
    tol_fine : float or None, default None
        When set, load cases whose warm start already sits below this
        relative residual skip the iterative solve entirely.
    """

    def __init__(
        self,
        method: str | Method = "pcg",
        preconditioner: str | Preconditioner = "jacobi_diag",
        tol: float = 1e-8,
        max_iters: int = 10_000,
        tol_fine: float | None = None,
    ):
        self.method = method
        self.preconditioner = preconditioner
        self.tol = tol
        self.max_iters = max_iters
        self.tol_fine = tol_fine

    def _config(self) -> SolverConfig:
        return SolverConfig(
            method=self.method,
            preconditioner=self.preconditioner,
            tol=self.tol,
            max_iters=self.max_iters,
            tol_fine=self.tol_fine,
        )

    def fit(self, model: VoxelModel, init: np.ndarray | None = None):
        """Solve the six load cases and assemble the effective tensor.

        Parameters
        ----------
        model : VoxelModel
        init : array of shape (6, 3, n, n, n) or (6, 3 n^3), optional
            Warm-start fields, one per load case.
        """
        if not isinstance(model, VoxelModel):
            raise TypeError(f"model must be a VoxelModel, got {type(model).__name__}")
        config = self._config()
        system = PeriodicSystem(model)
        inits = _check_init(init, model.resolution)

        fields = np.zeros((6, system.ndof))
        reports: list[SolveReport] = []
        for case in range(6):
            f = system.load[case]
            x0 = None if inits is None else inits[case]
            if x0 is not None and config.tol_fine is not None:
                t0 = time.perf_counter()
                residual = relative_residual(system, x0, f)
                if residual < config.tol_fine:
                    # warm start already good enough; keep it as-is
                    fields[case] = x0
                    reports.append(
                        SolveReport(
                            method=config.method,
                            tol=config.tol,
                            iterations=0,
                            residual_history=(residual,),
                            converged=residual < config.tol,
                            wall_time=time.perf_counter() - t0,
                            initial_residual=residual,
                        )
                    )
                    continue
            x, report = solve(system, f, config, x0)
            fields[case] = x
            reports.append(report)

        self.system_ = system
        self.reports_ = reports
        self.fields_ = fields_to_grid(fields, model.resolution)
        self.tensor_ = homogenized_tensor(
            model, fields, solver_tol=config.tol, system=system
        )
        return self

    @property
    def total_iterations_(self) -> int:
        return sum(r.iterations for r in self.reports_)


def _check_init(init, n: int) -> np.ndarray | None:
    if init is None:
        return None
    init = np.asarray(init, dtype=np.float64)
    if init.ndim == 5:
        if init.shape != (6, 3, n, n, n):
            raise ValueError(
                f"init grid must have shape (6, 3, {n}, {n}, {n}), "
                f"got {init.shape}"
            )
        return grid_to_fields(init)
    if init.shape != (6, 3 * n**3):
        raise ValueError(
            f"init must have shape (6, {3 * n**3}) or (6, 3, {n}, {n}, {n}), "
            f"got {init.shape}"
        )
    return init


class ScalingCalibrator(BaseEstimator, TransformerMixin):
    """Entrywise multiplicative calibration of predicted tensors.

    ``fit`` learns the mean truth/pred ratio per tensor entry;
    ``transform`` applies it to new predictions. Entries with
    near-zero reference or prediction are masked and pass through
    unchanged.
    """

    def __init__(self, mask_threshold: float = 1e-3):
        self.mask_threshold = mask_threshold

    def fit(self, X, y):
        """Fit on predicted tensors X against reference tensors y."""
        preds = list(X)
        truths = list(y)
        if len(preds) != len(truths):
            raise ValueError(
                f"got {len(preds)} predictions but {len(truths)} references"
            )
        self.factor_ = calibrate_scaling(
            list(zip(preds, truths)), self.mask_threshold
        )
        return self

    def transform(self, X) -> list[HomogenizedTensor]:
        if not hasattr(self, "factor_"):
            raise RuntimeError("ScalingCalibrator must be fit before transform")
        return [apply_scaling(pred, self.factor_) for pred in X]
