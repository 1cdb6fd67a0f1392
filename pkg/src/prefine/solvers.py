"""Iterative linear solvers with warm starts and honest accounting.

All methods share one report shape: ``residual_history[0]`` is the
relative residual of the initial guess and each later entry follows
one operator application of the main loop, so ``iterations`` always
equals ``len(residual_history) - 1``. Relative residual means
||K X - f|| / ||f||, falling back to the absolute norm when f = 0.

Stationary methods (Jacobi, damped Jacobi, Gauss-Seidel, SOR) are all
the same update x <- x + M_approx^{-1} r for different triangular or
diagonal approximations of the operator; they need the explicitly
assembled sparse matrix and exist for fidelity tests, not production.
CG and PCG run matrix-free; PCG takes a diagonal or zero-fill
incomplete-Cholesky preconditioner, the latter falling back to the
diagonal (with a report flag) when assembly is unavailable or the
factorization breaks down.
"""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import PeriodicSystem

__all__ = [
    "Method",
    "Preconditioner",
    "SolverConfig",
    "SolveReport",
    "DivergenceError",
    "relative_residual",
    "solve",
    "decide_finetune",
    "empirical_convergence_rate",
    "ASSEMBLY_RESOLUTION_LIMIT",
]

# Largest voxel resolution whose operator we assemble explicitly.
ASSEMBLY_RESOLUTION_LIMIT = 32

_DIVERGENCE_FACTOR = 1e6


class Method(enum.Enum):
    JACOBI = "jacobi"
    DAMPED_JACOBI = "damped_jacobi"
    GAUSS_SEIDEL = "gauss_seidel"
    SOR = "sor"
    CG = "cg"
    PCG = "pcg"


class Preconditioner(enum.Enum):
    NONE = "none"
    JACOBI_DIAG = "jacobi_diag"
    INCOMPLETE_CHOLESKY0 = "ic0"


_STATIONARY = (Method.JACOBI, Method.DAMPED_JACOBI, Method.GAUSS_SEIDEL, Method.SOR)


@dataclass(frozen=True)
class SolverConfig:
    """Method pick plus stopping, damping, and warm-start gate knobs."""

    method: Method = Method.PCG
    tol: float = 1e-8
    max_iters: int = 10_000
    damping: float = 1.0
    relaxation: float = 1.0
    preconditioner: Preconditioner = Preconditioner.JACOBI_DIAG
    tol_fine: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(
            self, "preconditioner", Preconditioner(self.preconditioner)
        )
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        object.__setattr__(self, "max_iters", int(self.max_iters))
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not 0.0 < self.relaxation < 2.0:
            raise ValueError(
                f"relaxation must lie in (0, 2), got {self.relaxation}"
            )
        if self.tol_fine is not None and not self.tol_fine > 0.0:
            raise ValueError(f"tol_fine must be positive, got {self.tol_fine}")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one linear solve."""

    method: Method
    tol: float
    iterations: int
    residual_history: tuple[float, ...]
    converged: bool
    wall_time: float
    initial_residual: float
    preconditioner: Preconditioner | None = None
    preconditioner_fallback: bool = False

    def to_json_dict(self) -> dict:
        return {
            "method": self.method.value,
            "tol": self.tol,
            "iterations": self.iterations,
            "converged": self.converged,
            "initial_residual": self.initial_residual,
            "residual_history": list(self.residual_history),
            "wall_time_s": self.wall_time,
            "preconditioner": (
                None if self.preconditioner is None else self.preconditioner.value
            ),
            "preconditioner_fallback": self.preconditioner_fallback,
        }


class DivergenceError(RuntimeError):
    """Raised when residuals blow past the divergence guard."""

    def __init__(self, message: str, report: SolveReport | None = None):
        super().__init__(message)
        self.report = report


class _Operator:
    """Uniform view over voxel systems, sparse matrices, dense arrays."""

    def __init__(self, handle):
        self._csr: sp.csr_matrix | None = None
        if isinstance(handle, PeriodicSystem):
            self.size = handle.ndof
            self.apply = handle.apply
            self.diagonal = handle.diagonal
            self._assemble = (
                handle.assemble_sparse
                if handle.mesh.resolution <= ASSEMBLY_RESOLUTION_LIMIT
                else None
            )
        elif sp.issparse(handle):
            csr = handle.tocsr().astype(np.float64)
            if csr.shape[0] != csr.shape[1]:
                raise ValueError(f"operator must be square, got {csr.shape}")
            self._csr = csr
            self.size = csr.shape[0]
            self.apply = lambda x: csr @ x
            self.diagonal = lambda: csr.diagonal()
            self._assemble = lambda: csr
        else:
            a = np.asarray(handle, dtype=np.float64)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise TypeError(
                    "operator must be a PeriodicSystem, a square sparse "
                    f"matrix, or a square array; got shape {getattr(a, 'shape', None)}"
                )
            self.size = a.shape[0]
            self.apply = lambda x: a @ x
            self.diagonal = lambda: np.diag(a).copy()
            self._assemble = lambda: sp.csr_matrix(a)

    @property
    def can_assemble(self) -> bool:
        return self._assemble is not None

    def sparse(self) -> sp.csr_matrix:
        if self._csr is None:
            if self._assemble is None:
                raise ValueError(
                    "operator too large for explicit assembly "
                    f"(resolution limit {ASSEMBLY_RESOLUTION_LIMIT})"
                )
            self._csr = self._assemble().tocsr()
        return self._csr


def _check_vector(x, size: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape != (size,):
        raise ValueError(f"{name} must have {size} entries, got shape {x.shape}")
    return x


def relative_residual(handle, X: np.ndarray, f: np.ndarray) -> float:
    """||K X - f|| / ||f||; the absolute norm when ||f|| = 0."""
    op = handle if isinstance(handle, _Operator) else _Operator(handle)
    X = _check_vector(X, op.size, "X")
    f = _check_vector(f, op.size, "f")
    norm_f = float(np.linalg.norm(f))
    res = float(np.linalg.norm(op.apply(X) - f))
    return res / norm_f if norm_f > 0.0 else res


def decide_finetune(handle, X_init: np.ndarray, f: np.ndarray, tol_fine: float) -> bool:
    """True iff the initial guess still needs iterative fine-tuning."""
    return relative_residual(handle, X_init, f) >= tol_fine


def empirical_convergence_rate(report: SolveReport) -> float:
    """Tail-half slope of -ln(residual) per iteration (asymptotic rate)."""
    hist = np.asarray(report.residual_history, dtype=np.float64)
    if hist.size < 10:
        raise ValueError(
            f"need at least 10 residual entries, got {hist.size}"
        )
    y = -np.log(np.clip(hist, 1e-300, None))
    start = hist.size // 2
    x = np.arange(hist.size, dtype=np.float64)
    slope = np.polyfit(x[start:], y[start:], 1)[0]
    return float(slope)


def _jacobi_inverse(op: _Operator) -> Callable[[np.ndarray], np.ndarray]:
    d = op.diagonal()
    if np.any(d <= 0.0):
        raise ValueError("diagonal preconditioning needs a positive diagonal")
    inv = 1.0 / d
    return lambda r: inv * r


def _ic0_inverse(op: _Operator) -> Callable[[np.ndarray], np.ndarray] | None:
    """Build the IC0 preconditioner solve, or None on breakdown."""
    from . import _ic0

    lower = sp.tril(op.sparse(), 0).tocsr()
    lower.sort_indices()
    data = lower.data.astype(np.float64).copy()
    status = _ic0.ic0_factor(lower.indptr, lower.indices, data)
    if status != 0:
        return None

    indptr, indices = lower.indptr, lower.indices

    def apply_inverse(r: np.ndarray) -> np.ndarray:
        y = _ic0.lower_solve(indptr, indices, data, r)
        return _ic0.upper_solve_transposed(indptr, indices, data, y)

    return apply_inverse


def _make_preconditioner(
    op: _Operator, config: SolverConfig
) -> tuple[Callable[[np.ndarray], np.ndarray] | None, Preconditioner, bool]:
    """Resolve the configured preconditioner; returns (solve, kind, fallback)."""
    kind = config.preconditioner
    if config.method is Method.CG or kind is Preconditioner.NONE:
        return None, Preconditioner.NONE, False
    if kind is Preconditioner.JACOBI_DIAG:
        return _jacobi_inverse(op), kind, False
    if not op.can_assemble:
        warnings.warn(
            "incomplete Cholesky needs explicit assembly; falling back to "
            "the diagonal preconditioner",
            stacklevel=3,
        )
        return _jacobi_inverse(op), Preconditioner.JACOBI_DIAG, True
    solve_ic = _ic0_inverse(op)
    if solve_ic is None:
        warnings.warn(
            "incomplete Cholesky broke down (non-positive pivot); falling "
            "back to the diagonal preconditioner",
            stacklevel=3,
        )
        return _jacobi_inverse(op), Preconditioner.JACOBI_DIAG, True
    return solve_ic, kind, False


def _stationary_inverse(
    op: _Operator, config: SolverConfig
) -> Callable[[np.ndarray], np.ndarray]:
    """Approximate-inverse application for the stationary update."""
    a = op.sparse()
    d = a.diagonal()
    if np.any(d == 0.0):
        raise ValueError("stationary methods require a nonzero diagonal")
    method = config.method
    if method in (Method.JACOBI, Method.DAMPED_JACOBI):
        alpha = config.damping if method is Method.DAMPED_JACOBI else 1.0
        inv = alpha / d
        return lambda r: inv * r
    if method is Method.GAUSS_SEIDEL:
        tri = sp.tril(a, 0).tocsr()
    else:  # SOR: diagonal stretched by 1/relaxation
        tri = (sp.tril(a, -1) + sp.diags(d / config.relaxation)).tocsr()
    tri.sort_indices()
    return lambda r: spla.spsolve_triangular(tri, r, lower=True)


def solve(
    handle,
    f: np.ndarray,
    config: SolverConfig,
    X0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve K X = f iteratively from an optional warm start.

    Returns the iterate and a report whose residual history starts at
    the initial guess. Convergence of CG and PCG is confirmed against
    the true (not recursively updated) residual before the report says
    so. Residuals exceeding 1e6 times the initial one abort with
    :class:`DivergenceError`.
    """
    op = _Operator(handle)
    f = _check_vector(f, op.size, "f")
    start = time.perf_counter()

    if X0 is None:
        x = np.zeros(op.size)
        r = f.copy()
    else:
        x = _check_vector(X0, op.size, "X0").copy()
        r = f - op.apply(x)

    norm_f = float(np.linalg.norm(f))
    denom = norm_f if norm_f > 0.0 else 1.0
    history = [float(np.linalg.norm(r)) / denom]

    if config.method in _STATIONARY:
        apply_inverse = _stationary_inverse(op, config)
        precond, fallback = None, False
    else:
        apply_inverse, precond, fallback = _make_preconditioner(op, config)

    def report(converged: bool) -> SolveReport:
        return SolveReport(
            method=config.method,
            tol=config.tol,
            iterations=len(history) - 1,
            residual_history=tuple(history),
            converged=converged,
            wall_time=time.perf_counter() - start,
            initial_residual=history[0],
            preconditioner=precond,
            preconditioner_fallback=fallback,
        )

    if history[0] < config.tol:
        return x, report(True)

    if config.method in _STATIONARY:
        x = _run_stationary(op, f, x, r, config, denom, history, apply_inverse, report)
    else:
        x = _run_cg(op, f, x, r, config, denom, history, apply_inverse, report)
    converged = history[-1] < config.tol
    return x, report(converged)


def _guard_divergence(history: Sequence[float], report_fn) -> None:
    if history[-1] > _DIVERGENCE_FACTOR * max(history[0], np.finfo(float).tiny):
        raise DivergenceError(
            f"residual grew to {history[-1]:.3e} from initial {history[0]:.3e} "
            f"after {len(history) - 1} iterations; the iteration is diverging",
            report_fn(False),
        )


def _run_stationary(
    op, f, x, r, config, denom, history, apply_inverse, report_fn
) -> np.ndarray:
    for _ in range(config.max_iters):
        x = x + apply_inverse(r)
        r = f - op.apply(x)
        history.append(float(np.linalg.norm(r)) / denom)
        if history[-1] < config.tol:
            break
        _guard_divergence(history, report_fn)
    return x


def _run_cg(op, f, x, r, config, denom, history, apply_inverse, report_fn) -> np.ndarray:
    if apply_inverse is None:
        apply_inverse = lambda v: v
    z = apply_inverse(r)
    p = z.copy()
    rz = float(r @ z)
    for _ in range(config.max_iters):
        ap = op.apply(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            raise DivergenceError(
                "search direction has non-positive curvature; the operator "
                "is not positive definite on the free space",
                report_fn(False),
            )
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        rel = float(np.linalg.norm(r)) / denom
        restarted = False
        if rel < config.tol:
            # confirm against the true residual before declaring victory
            r = f - op.apply(x)
            rel = float(np.linalg.norm(r)) / denom
            restarted = True
        history.append(rel)
        if rel < config.tol:
            break
        _guard_divergence(history, report_fn)
        z = apply_inverse(r)
        rz_new = float(r @ z)
        if restarted:
            p = z.copy()
        else:
            p = z + (rz_new / rz) * p
        rz = rz_new
    return x
