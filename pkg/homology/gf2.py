"""
Dense linear algebra over GF(2) on numpy uint8 arrays, with XOR row operations.
"""
from typing import List, Optional, Tuple

import numpy as np


def as_gf2(matrix) -> np.ndarray:
    return (np.asarray(matrix, dtype=np.int64) % 2).astype(np.uint8)


def row_echelon(matrix, pivot_columns: Optional[int] = None, reduced: bool = False) -> Tuple[np.ndarray, List[int]]:
    """
    Row-reduces a binary matrix over GF(2).
    :param matrix: binary matrix (m x n)
    :param pivot_columns: only the first `pivot_columns` columns are searched for pivots; row operations still apply
    to the full rows
    :param reduced: whether entries above the pivots are eliminated as well
    :return: the echelon form and the pivot columns
    """
    R = as_gf2(matrix).copy()
    if R.ndim != 2:
        raise ValueError("expected a matrix")
    m, n = R.shape
    pivot_columns = n if pivot_columns is None else pivot_columns
    pivots = []
    pivot_row = 0
    for col in range(pivot_columns):
        if pivot_row == m:
            break
        rows = np.nonzero(R[pivot_row:, col])[0]
        if rows.size == 0:
            continue
        found = pivot_row + int(rows[0])
        if found != pivot_row:
            R[[pivot_row, found]] = R[[found, pivot_row]]
        targets = np.nonzero(R[:, col])[0] if reduced else pivot_row + 1 + np.nonzero(R[pivot_row + 1:, col])[0]
        for row in targets:
            if row != pivot_row:
                R[row] ^= R[pivot_row]
        pivots.append(col)
        pivot_row += 1
    return R, pivots


def rank(matrix) -> int:
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0
    return len(row_echelon(matrix)[1])


def matmul(a, b) -> np.ndarray:
    """
    Matrix product mod 2; empty shapes are allowed.
    """
    return (as_gf2(a).astype(np.int64) @ as_gf2(b).astype(np.int64) % 2).astype(np.uint8)


def nullspace(matrix) -> np.ndarray:
    """
    Basis of the kernel of `matrix` as columns (n x k), one vector per free column.
    """
    matrix = as_gf2(matrix)
    m, n = matrix.shape
    if m == 0:
        return np.eye(n, dtype=np.uint8)
    R, pivots = row_echelon(matrix, reduced=True)
    free = [col for col in range(n) if col not in pivots]
    basis = np.zeros((n, len(free)), dtype=np.uint8)
    for k, col in enumerate(free):
        basis[col, k] = 1
        for row, pivot in enumerate(pivots):
            basis[pivot, k] = R[row, col]
    return basis


def solve(matrix, rhs) -> Optional[np.ndarray]:
    """
    A solution x of matrix @ x = rhs over GF(2), or None if there is none.
    """
    matrix = as_gf2(matrix)
    rhs = as_gf2(rhs).reshape(-1)
    m, n = matrix.shape
    if m == 0:
        return np.zeros(n, dtype=np.uint8)
    R, pivots = row_echelon(np.hstack([matrix, rhs[:, None]]), pivot_columns=n, reduced=True)
    if np.any(R[len(pivots):, n]):
        return None
    x = np.zeros(n, dtype=np.uint8)
    for row, pivot in enumerate(pivots):
        x[pivot] = R[row, n]
    return x


def in_span(columns, vector) -> bool:
    columns = as_gf2(columns)
    if columns.shape[1] == 0:
        return not np.any(as_gf2(vector))
    return solve(columns, vector) is not None
