"""Greedy sparse recovery: CoSaMP and OMP over row-sampled operators.

The solvers work on a MeasurementOperator that either wraps an explicit
dense matrix (tests, small problems) or a set of rows of the tone-by-space
Kronecker DFT transform addressed purely by row index. The restricted
least-squares step goes through the Gram matrix and a Cholesky
factorization with two triangular solves, and every solver run carries an
instrumented complex multiply-accumulate tally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .numerics import NotPositiveDefinite


class InsufficientMeasurements(ValueError):
    """Fewer measurement rows than the solver needs (requires 2*kappa)."""


class DegenerateSupport(RuntimeError):
    """Restricted least squares stayed rank deficient after the retry."""


@dataclass(frozen=True)
class RecoveryConfig:
    """Solver knobs: sparsity target, relative residual stop, iteration cap.

    resolve_after_prune re-fits the least squares on the pruned support
    before the residual update (off by default: the plain update keeps the
    coefficients from the merged-support solve).
    """

    kappa: int
    tau: float = 1e-6
    i_max: int = 50
    resolve_after_prune: bool = False

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.i_max < 1:
            raise ValueError(f"i_max must be >= 1, got {self.i_max}")


@dataclass
class SparseRecoveryResult:
    x_hat: np.ndarray
    support: np.ndarray
    residual_history: list[float]
    iterations: int
    mac_count: int
    converged: bool


class _MacTally:
    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)


class MeasurementOperator:
    """Row-sampled sensing operator.

    Either an explicit dense matrix, or `row_indices` into the implicit
    kron(F_n_dft, F_n_s) system; implicit rows are materialized through
    numerics.kron_row so each row is bit-reproducible from its index.
    """

    def __init__(self, matrix: np.ndarray, kron_dims=None, row_indices=None):
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2:
            raise ValueError("operator matrix must be 2-D")
        if matrix.shape[0] > matrix.shape[1]:
            raise ValueError(
                f"operator has more rows than columns: {matrix.shape}"
            )
        self._matrix = matrix
        self.kron_dims = kron_dims
        self.row_indices = None if row_indices is None else np.asarray(row_indices, dtype=np.intp)

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "MeasurementOperator":
        return cls(matrix)

    @classmethod
    def from_kron_rows(cls, n_dft: int, n_s: int, row_indices) -> "MeasurementOperator":
        rows = np.asarray(row_indices, dtype=np.intp)
        if len(np.unique(rows)) != rows.size:
            raise ValueError("kron row indices must be unique")
        matrix = np.vstack([numerics.kron_row((n_dft, n_s), int(i)) for i in rows])
        return cls(matrix, kron_dims=(n_dft, n_s), row_indices=rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self._matrix.shape

    @property
    def n_rows(self) -> int:
        return self._matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self._matrix.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self._matrix[i]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._matrix @ x

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        """Adjoint application: Phi^H r."""
        return self._matrix.conj().T @ r

    def columns(self, idx) -> np.ndarray:
        return self._matrix[:, np.asarray(idx, dtype=np.intp)]


def support_select(u: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` largest-magnitude entries, sorted ascending.

    Ties break toward the lowest index so results are reproducible.
    """
    u = np.asarray(u)
    if count > u.shape[0]:
        raise ValueError(f"count {count} exceeds vector length {u.shape[0]}")
    order = np.argsort(-np.abs(u), kind="stable")
    return np.sort(order[:count])


def mac_model(n: int, n_kappa: int, kappa: int) -> int:
    """Closed-form complex-MAC estimate for one CoSaMP iteration.

    Proxy correlation N*N_kappa, residual update N_kappa*(2k), Gram matrix
    N_kappa*(2k)^2, Cholesky (2k)^3.
    """
    if min(n, n_kappa, kappa) < 1:
        raise ValueError("n, n_kappa and kappa must all be positive")
    two_k = 2 * kappa
    return n * n_kappa + n_kappa * two_k + n_kappa * two_k**2 + two_k**3


def _restricted_lstsq(phi: MeasurementOperator, t_set: np.ndarray,
                      y: np.ndarray, macs: _MacTally) -> np.ndarray:
    """Least squares of y on the columns in t_set, with MAC accounting."""
    m = t_set.size
    n_kappa = phi.n_rows
    cols = phi.columns(t_set)
    macs.add(n_kappa * m * m)        # Gram matrix
    macs.add(n_kappa * m)            # right-hand side
    macs.add(math.ceil(m**3 / 3))    # Cholesky
    macs.add(m * m)                  # two triangular solves
    return numerics.solve_normal_equations(cols, y)


def _solve_merged(phi, support, proxy, y, kappa, macs):
    """Merged-support least squares with the halved-candidate retry."""
    omega = support_select(proxy, min(2 * kappa, proxy.shape[0]))
    t_set = np.union1d(support, omega).astype(np.intp)
    try:
        return t_set, _restricted_lstsq(phi, t_set, y, macs)
    except NotPositiveDefinite:
        pass
    omega = support_select(proxy, min(kappa, proxy.shape[0]))
    t_set = np.union1d(support, omega).astype(np.intp)
    try:
        return t_set, _restricted_lstsq(phi, t_set, y, macs)
    except NotPositiveDefinite as exc:
        raise DegenerateSupport(
            f"rank-deficient support of size {t_set.size} after retry"
        ) from exc


def _empty_result(n: int) -> SparseRecoveryResult:
    return SparseRecoveryResult(
        x_hat=np.zeros(n, dtype=np.complex128),
        support=np.array([], dtype=np.intp),
        residual_history=[0.0],
        iterations=0,
        mac_count=0,
        converged=True,
    )


def cosamp(phi: MeasurementOperator, y: np.ndarray,
           cfg: RecoveryConfig) -> SparseRecoveryResult:
    """Compressive sampling matching pursuit.

    Per iteration: correlate the residual against the operator, merge the
    2*kappa strongest candidates into the running support, least-squares
    fit on the merged set, prune back to the kappa largest coefficients,
    and update the residual. Stops when the relative residual drops to
    cfg.tau or after cfg.i_max iterations.
    """
    n_kappa, n = phi.shape
    if 2 * cfg.kappa > n_kappa:
        raise InsufficientMeasurements(
            f"need at least 2*kappa={2 * cfg.kappa} rows, operator has {n_kappa}"
        )
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[0] != n_kappa:
        raise ValueError(f"y has length {y.shape[0]}, operator has {n_kappa} rows")
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return _empty_result(n)

    macs = _MacTally()
    support = np.array([], dtype=np.intp)
    x_hat = np.zeros(n, dtype=np.complex128)
    r = y.copy()
    rel = 1.0
    history: list[float] = []
    iterations = 0

    while iterations < cfg.i_max and rel > cfg.tau:
        proxy = phi.rmatvec(r)
        macs.add(n * n_kappa)
        t_set, b = _solve_merged(phi, support, proxy, y, cfg.kappa, macs)
        keep = support_select(b, min(cfg.kappa, t_set.size))
        support = t_set[keep]
        b_kept = b[keep]
        if cfg.resolve_after_prune:
            b_kept = _restricted_lstsq(phi, support, y, macs)
        x_hat = np.zeros(n, dtype=np.complex128)
        x_hat[support] = b_kept
        r = y - phi.columns(support) @ b_kept
        macs.add(n_kappa * support.size)
        rel = float(np.linalg.norm(r)) / y_norm
        history.append(rel)
        iterations += 1

    return SparseRecoveryResult(
        x_hat=x_hat,
        support=support,
        residual_history=history,
        iterations=iterations,
        mac_count=macs.count,
        converged=rel <= cfg.tau,
    )


def omp(phi: MeasurementOperator, y: np.ndarray,
        cfg: RecoveryConfig) -> SparseRecoveryResult:
    """Orthogonal matching pursuit.

    One support index per iteration (the strongest correlation not yet
    selected), no pruning, least squares over the accumulated support,
    same stopping rule as cosamp. Stops early once the support holds
    cfg.kappa atoms, since the estimate cannot grow further.
    """
    n_kappa, n = phi.shape
    if 2 * cfg.kappa > n_kappa:
        raise InsufficientMeasurements(
            f"need at least 2*kappa={2 * cfg.kappa} rows, operator has {n_kappa}"
        )
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[0] != n_kappa:
        raise ValueError(f"y has length {y.shape[0]}, operator has {n_kappa} rows")
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return _empty_result(n)

    macs = _MacTally()
    support = np.array([], dtype=np.intp)
    x_hat = np.zeros(n, dtype=np.complex128)
    r = y.copy()
    rel = 1.0
    history: list[float] = []
    iterations = 0

    while iterations < cfg.i_max and rel > cfg.tau:
        proxy = phi.rmatvec(r)
        macs.add(n * n_kappa)
        mags = np.abs(proxy)
        if support.size:
            mags[support] = -1.0
        pick = int(np.argmax(mags))
        if mags[pick] > 0.0:
            trial = np.union1d(support, [pick]).astype(np.intp)
            try:
                b = _restricted_lstsq(phi, trial, y, macs)
            except NotPositiveDefinite:
                # retry once with the next-strongest unused atom
                mags[pick] = -1.0
                pick = int(np.argmax(mags))
                if mags[pick] <= 0.0:
                    raise DegenerateSupport("no usable atom left after retry")
                trial = np.union1d(support, [pick]).astype(np.intp)
                try:
                    b = _restricted_lstsq(phi, trial, y, macs)
                except NotPositiveDefinite as exc:
                    raise DegenerateSupport(
                        f"rank-deficient support of size {trial.size} after retry"
                    ) from exc
            support = trial
            x_hat = np.zeros(n, dtype=np.complex128)
            x_hat[support] = b
            r = y - phi.columns(support) @ b
            macs.add(n_kappa * support.size)
            rel = float(np.linalg.norm(r)) / y_norm
        history.append(rel)
        iterations += 1
        if support.size >= cfg.kappa and rel > cfg.tau:
            break  # sparsity budget exhausted, no further progress possible

    return SparseRecoveryResult(
        x_hat=x_hat,
        support=support,
        residual_history=history,
        iterations=iterations,
        mac_count=macs.count,
        converged=rel <= cfg.tau,
    )
