"""Independent oracles shared by the test modules.

These deliberately avoid the library's own code paths: the Jacobi
eigensolver checks the power-iteration PCA, and the dense least-squares
solver checks the incremental sufficient-statistics fit.
"""

import numpy as np


def jacobi_eigenvalues(matrix: np.ndarray, sweeps: int = 100, tol: float = 1e-13) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending."""
    a = np.array(matrix, dtype=float)
    size = a.shape[0]
    for _ in range(sweeps):
        off_diagonal = np.sqrt((a**2).sum() - (np.diag(a) ** 2).sum())
        if off_diagonal < tol * max(1.0, np.abs(np.diag(a)).max()):
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                if abs(a[p, q]) < 1e-30:
                    continue
                angle = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(angle), np.sin(angle)
                rotation = np.eye(size)
                rotation[p, p] = c
                rotation[q, q] = c
                rotation[p, q] = s
                rotation[q, p] = -s
                a = rotation.T @ a @ rotation
    return np.sort(np.diag(a))[::-1]


def dense_ridge_solve(design: np.ndarray, targets: np.ndarray, ridge: float) -> np.ndarray:
    """Ridge least squares assembled from raw samples with explicit inversion."""
    gram = design.T @ design + ridge * np.eye(design.shape[1])
    return np.linalg.inv(gram) @ (design.T @ targets)
