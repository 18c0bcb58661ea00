"""Discrete Dirichlet eigenproblem of the nonlocal operator."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidParameter, SpectralFailure
from .nonlocal_op import OperatorMatrix, SpaceTimeField, bilinear_form

# relative gap below which neighbouring eigenvalues are treated as one eigenspace
CLUSTER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    op: OperatorMatrix
    eigenvalues: np.ndarray      # (k,) ascending
    vectors: np.ndarray          # (N, k), L2-orthonormal with mass h^n

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def mode(self, i: int) -> np.ndarray:
        return self.vectors[:, i]

    def mode_field(self, i: int) -> SpaceTimeField:
        return SpaceTimeField.static(self.op.grid, self.vectors[:, i])

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients <v, e_i>_{L2}; values may be (N,) or (M, N)."""
        return self.op.grid.cell * np.asarray(values) @ self.vectors

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs) @ self.vectors.T

    def truncation_error(self, values: np.ndarray) -> float:
        """L2 norm of the part of `values` outside the span of the basis."""
        v = np.asarray(values, dtype=float)
        rest = v - self.synthesize(self.project(v))
        return float(np.sqrt(self.op.grid.cell * np.sum(rest ** 2)))

    def to_csv(self, path) -> None:
        g = self.op.grid
        coords = ["x", "y"][: g.dim]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(coords + [repr(float(a)) for a in self.eigenvalues])
            for p, row in zip(g.interior_nodes, self.vectors):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v)) for v in row])


def read_basis_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(eigenvalues, node coordinates, vectors) from a basis CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    n = sum(1 for c in head if c in ("x", "y"))
    eig = np.array([float(c) for c in head[n:]])
    body = np.array([[float(c) for c in r] for r in rows[1:]])
    return eig, body[:, :n], body[:, n:]


def _orient(v: np.ndarray) -> np.ndarray:
    # deterministic sign: make the largest-magnitude entry positive
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


def solve_eigenproblem(op: OperatorMatrix, k: int | None = None, verify: bool = True) -> SpectralBasis:
    """Smallest k eigenpairs of A e = alpha e with L2 normalization sum h^n e^2 = 1."""
    N = op.grid.n_interior
    k = N if k is None else int(k)
    if not (1 <= k <= N):
        raise InvalidParameter(f"mode count must lie in [1, {N}], got {k}")
    try:
        w, V = linalg.eigh(op.A, subset_by_index=[0, k - 1], driver="evr")
    except (linalg.LinAlgError, ValueError) as exc:
        raise SpectralFailure(f"eigen-solver failed: {exc}") from exc
    order = np.argsort(w, kind="stable")
    w, V = w[order], V[:, order]
    if not np.all(np.isfinite(w)) or w[0] <= 0:
        raise SpectralFailure(f"first eigenvalue {w[0]} is not positive; assembly is broken")
    # re-orthogonalize inside clusters of (numerically) repeated eigenvalues
    start = 0
    while start < k:
        stop = start + 1
        while stop < k and w[stop] - w[stop - 1] <= CLUSTER_TOL * abs(w[stop]):
            stop += 1
        if stop - start > 1:
            q, _ = np.linalg.qr(V[:, start:stop])
            V[:, start:stop] = q
        start = stop
    V = np.column_stack([_orient(V[:, i]) for i in range(k)]) / np.sqrt(op.grid.cell)
    basis = SpectralBasis(op, w, V)
    if verify:
        verify_basis(basis)
    return basis


def verify_basis(basis: SpectralBasis, tol: float = 1e-8) -> None:
    op = basis.op
    w, V = basis.eigenvalues, basis.vectors
    if np.any(np.diff(w) < 0) or w[0] <= 0:
        raise SpectralFailure("eigenvalues are not positive and nondecreasing")
    gram = op.grid.cell * V.T @ V
    if np.max(np.abs(gram - np.eye(basis.count))) > tol:
        raise SpectralFailure("eigenvectors are not L2-orthonormal")
    energy = op.grid.cell * V.T @ op.A @ V
    off = energy - np.diag(np.diag(energy))
    if np.max(np.abs(off)) > tol * max(1.0, w[-1]):
        raise SpectralFailure("eigenvectors are not X0-orthogonal")
    for i in range(min(basis.count, 3)):
        e = basis.mode_field(i)
        if abs(bilinear_form(op, e, e) / w[i] - 1.0) > tol:
            raise SpectralFailure(f"bilinear form of mode {i + 1} differs from its eigenvalue")
