"""
Sparse Linear Algebra Module

Compressed sparse row storage, reusable direct factorizations (SuperLU through
scipy) and the small dense weighted least-squares kernel used by Anderson
acceleration.

Functions:
- csr_from_triplets: Assemble a canonical CSR matrix from (row, col, value).
- factorize: LU (general) or symmetric-mode LU (spd) factorization.
- solve: Solve with a factorization.
- weighted_least_squares: Minimize ||target - columns @ gamma|| in a weighted
  inner product through regularized Gram normal equations.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from loguru import logger
from scipy.sparse.linalg import splu

from ahflow.exceptions import ConfigurationError, DimensionError, FactorizationError

SparseMatrix = sp.csr_matrix

MAX_LSQ_COLUMNS = 100


class FactorizationKind(str, Enum):
    GENERAL = "general"
    SPD = "spd"


def as_csr(matrix) -> SparseMatrix:
    """Return `matrix` as CSR with sorted column indices and no duplicates."""
    csr = sp.csr_matrix(matrix)
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


def csr_from_triplets(rows: np.ndarray, cols: np.ndarray, values: np.ndarray,
                      shape) -> SparseMatrix:
    """
    Assemble a CSR matrix, summing repeated (row, col) pairs in input order.
    """
    coo = sp.coo_matrix((np.ravel(values), (np.ravel(rows), np.ravel(cols))),
                        shape=shape)
    return as_csr(coo.tocsr())


def _pattern_signature(matrix: SparseMatrix) -> int:
    return hash((matrix.shape, matrix.indptr.tobytes(), matrix.indices.tobytes()))


def _zero_pivot_candidate(matrix: SparseMatrix) -> Optional[int]:
    """First row or column without any nonzero value, if there is one."""
    magnitude = abs(matrix)
    empty_rows = np.flatnonzero(np.asarray(magnitude.sum(axis=1)).ravel() == 0)
    if len(empty_rows):
        return int(empty_rows[0])
    empty_cols = np.flatnonzero(np.asarray(magnitude.sum(axis=0)).ravel() == 0)
    if len(empty_cols):
        return int(empty_cols[0])
    return None


@dataclass(frozen=True)
class Factorization:
    """
    Handle on a SuperLU factorization.

    `column_order` is the fill-reducing column permutation found by the first
    factorization. `refactorize` reuses it for matrices with the same sparsity
    pattern, so only the numeric factorization is redone.
    """
    kind: FactorizationKind
    shape: tuple
    pattern: int
    _lu: object = field(repr=False)
    column_order: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    presorted: bool = False

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise DimensionError(
                f"Right-hand side has {b.shape[0]} rows, factorization has "
                f"{self.shape[0]}.")
        x = self._lu.solve(b)
        if not self.presorted:
            return x
        # columns were permuted before factorizing
        unsorted = np.empty_like(x)
        unsorted[self.column_order] = x
        return unsorted

    def refactorize(self, matrix) -> "Factorization":
        """
        Numeric refactorization of `matrix` in the stored column order. A
        changed sparsity pattern gets a new order first; `spd` handles are
        factorized from scratch.
        """
        csr = as_csr(matrix)
        if self.kind is FactorizationKind.SPD:
            return factorize(csr, self.kind)
        if self.column_order is None or _pattern_signature(csr) != self.pattern:
            logger.debug("Sparsity pattern changed, computing a new column order")
            return factorize(csr, self.kind).refactorize(csr)
        _check_factorizable(csr)
        lu = _splu(csr[:, self.column_order].tocsc(), permc_spec="NATURAL")
        return Factorization(self.kind, csr.shape, self.pattern, lu,
                             column_order=self.column_order, presorted=True)


def _check_factorizable(csr: SparseMatrix) -> None:
    if csr.shape[0] != csr.shape[1]:
        raise DimensionError(f"Cannot factorize non-square matrix {csr.shape}.")
    pivot = _zero_pivot_candidate(csr)
    if pivot is not None:
        raise FactorizationError("Matrix is structurally singular", pivot)


def _splu(csc, **options):
    try:
        return splu(csc, **options)
    except RuntimeError as error:
        raise FactorizationError(f"Factorization failed: {error}") from error


def factorize(matrix, kind: Union[FactorizationKind, str] = FactorizationKind.GENERAL
              ) -> Factorization:
    """
    Factorize a square sparse matrix.

    Args:
        matrix: Square sparse (or dense) matrix.
        kind: "general" for LU with COLAMD ordering and partial pivoting,
            "spd" for symmetric-mode LU with minimum degree ordering on A+A^T
            and no pivoting (Cholesky-like elimination order).

    Returns:
        Factorization: Reusable handle.

    Raises:
        FactorizationError: When a pivot is exactly zero.
    """
    kind = FactorizationKind(kind)
    csr = as_csr(matrix)
    _check_factorizable(csr)

    csc = csr.tocsc()
    if kind is FactorizationKind.SPD:
        lu = _splu(csc, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
        return Factorization(kind, csr.shape, _pattern_signature(csr), lu)
    lu = _splu(csc, permc_spec="COLAMD")
    return Factorization(kind, csr.shape, _pattern_signature(csr), lu,
                         column_order=np.argsort(lu.perm_c))


def solve(factorization: Factorization, b: np.ndarray) -> np.ndarray:
    return factorization.solve(b)


@dataclass
class DenseLSQ:
    """
    Dense least-squares problem min ||target - columns @ gamma||.

    Attributes:
        columns: (n, k) matrix with k <= 100 columns.
        target: (n,) vector.
        gram: Optional precomputed (k, k) weighted Gram matrix columns^T W columns.
        regularization: Relative diagonal shift applied to the Gram matrix,
            scaled by its mean diagonal entry.
    """
    columns: np.ndarray
    target: np.ndarray
    gram: Optional[np.ndarray] = None
    regularization: float = 1e-12

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        if self.columns.ndim == 1:
            self.columns = self.columns[:, None]
        self.target = np.asarray(self.target, dtype=float)
        if self.columns.shape[1] > MAX_LSQ_COLUMNS:
            raise ConfigurationError(
                f"At most {MAX_LSQ_COLUMNS} columns are supported, got "
                f"{self.columns.shape[1]}.")
        if self.columns.shape[0] != self.target.shape[0]:
            raise DimensionError("Columns and target have different lengths.")


def weighted_least_squares(problem: DenseLSQ, weight=None) -> np.ndarray:
    """
    Solve `problem` in the inner product (x, y)_W = x^T W y.

    Args:
        problem: Columns and target.
        weight: Symmetric positive semidefinite sparse matrix, or None for the
            euclidean inner product.

    Returns:
        np.ndarray: Coefficients gamma (length k).
    """
    columns, target = problem.columns, problem.target
    k = columns.shape[1]
    if k == 0 or not np.any(target):
        return np.zeros(k)

    weighted = columns if weight is None else np.asarray(weight @ columns)
    gram = problem.gram if problem.gram is not None else columns.T @ weighted
    rhs = weighted.T @ target
    scale = np.trace(gram) / k
    if scale <= 0.0:
        return np.zeros(k)
    system = gram + problem.regularization * scale * np.eye(k)
    try:
        return scipy.linalg.solve(system, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError):
        logger.debug("Singular Gram matrix, falling back to lstsq")
        return scipy.linalg.lstsq(system, rhs)[0]
