"""Discrete Leray projection and the solenoidal subspace machinery.

The projection P sends a face field f to f - grad(phi), where phi solves the
zero-mean pressure Poisson problem div grad phi = div f.  On the MAC grid
div and grad are exact negative adjoints, so P is an orthogonal projection
onto the discretely divergence-free fields: idempotent and L2 self-adjoint
to machine precision.

The divergence-free subspace is given an explicit orthonormal basis B.  Its
columns are QR-orthonormalized curls of the vertex streamfunction basis
(psi = 0 on the boundary), which span the kernel of the discrete divergence
on interior faces exactly; the dimension is

    n_dof = interior faces - (cells - 1) = (nx - 1)(ny - 1).

All spectral work downstream happens on dense matrices in these coordinates.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ProjectionError
from .grid import Field, PressureField, divergence, gradient, laplacian

_DIV_TOL = 1e-8  # relative divergence beyond which a field is not solenoidal


class LerayProjector:
    """Cell-pressure Poisson solver wrapped as the projection P.

    The pressure Laplacian (div o grad) is singular with a one-dimensional
    constant null space; the solve is grounded at cell 0 and the result
    normalized to zero mean, which is the unique compatible solution since
    every discrete divergence has zero sum.
    """

    def __init__(self, grid):
        from .grid import assemble_cell_laplacian

        self.grid = grid
        n = grid.n_cells
        Lp = assemble_cell_laplacian(grid)
        try:
            self._lu = splu(Lp[1:, 1:].tocsc())
        except RuntimeError as exc:  # pragma: no cover - would mean a broken grid
            raise ProjectionError(f"pressure Poisson factorization failed: {exc}")
        self._n = n

    def solve_pressure(self, rhs_cells):
        """Zero-mean phi with div grad phi = rhs (rhs must have zero sum)."""
        rhs = np.asarray(rhs_cells, float).ravel()
        phi = np.zeros(self._n)
        phi[1:] = self._lu.solve(rhs[1:])
        phi -= phi.mean()
        if not np.all(np.isfinite(phi)):
            raise ProjectionError("pressure Poisson solve produced non-finite values")
        return PressureField(self.grid, phi.reshape(self.grid.shape_p))

    def project(self, f):
        """Leray projection: f minus the lifted gradient of its pressure."""
        if f.u.dtype.kind == "c":
            re = self.project(f.real)
            im = self.project(f.imag)
            return re + 1j * im
        phi = self.solve_pressure(divergence(f).p)
        return f - gradient(phi)


def _curl_matrix(grid):
    """Sparse map from interior-vertex streamfunctions to packed face vectors."""
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    s = np.sqrt(grid.cell_area)
    n_psi = (nx - 1) * (ny - 1)

    def psi_idx(a, b):
        return (a - 1) * (ny - 1) + (b - 1)

    rows, cols, vals = [], [], []

    # u[i, j] = (psi[i, j+1] - psi[i, j]) / hy, interior x-faces i = 1..nx-1
    i, j = np.meshgrid(np.arange(1, nx), np.arange(ny), indexing="ij")
    face = (i - 1) * ny + j
    keep = j + 1 <= ny - 1
    rows.append(face[keep])
    cols.append(psi_idx(i, j + 1)[keep])
    vals.append(np.full(keep.sum(), s / hy))
    keep = j >= 1
    rows.append(face[keep])
    cols.append(psi_idx(i, j)[keep])
    vals.append(np.full(keep.sum(), -s / hy))

    # v[i, j] = -(psi[i+1, j] - psi[i, j]) / hx, interior y-faces j = 1..ny-1
    i, j = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
    face = grid.n_iu + i * (ny - 1) + (j - 1)
    keep = i + 1 <= nx - 1
    rows.append(face[keep])
    cols.append(psi_idx(i + 1, j)[keep])
    vals.append(np.full(keep.sum(), -s / hx))
    keep = i >= 1
    rows.append(face[keep])
    cols.append(psi_idx(i, j)[keep])
    vals.append(np.full(keep.sum(), s / hx))

    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_if, n_psi),
    ).tocsr()


class SolenoidalBasis:
    """Orthonormal basis of the discretely divergence-free subspace.

    B has shape (n_if, n_dof) over packed coordinates, so B^T B = I and the
    Euclidean norm of coordinates equals the L2 norm of the field.
    """

    def __init__(self, grid, B):
        self.grid = grid
        self.B = B
        self.n_dof = B.shape[1]

    @classmethod
    def build(cls, grid):
        C = _curl_matrix(grid).toarray()
        B, R = sla.qr(C, mode="economic")
        d = np.abs(np.diag(R))
        if d.min() <= 1e-10 * d.max():
            raise ProjectionError(
                "divergence kernel is rank deficient beyond the pressure constant"
            )
        B = B * np.sign(np.diag(R))  # canonical column signs
        expected = (grid.nx - 1) * (grid.ny - 1)
        if B.shape[1] != expected:
            raise ProjectionError(
                f"kernel dimension {B.shape[1]} != expected {expected}"
            )
        return cls(grid, np.ascontiguousarray(B))

    def to_coords(self, f):
        return self.B.T @ f.pack()

    def from_coords(self, c):
        return Field.unpack(self.grid, self.B @ np.asarray(c))

    def column_field(self, k):
        return Field.unpack(self.grid, self.B[:, k])

    def reduce_apply(self, fn):
        """Dense matrix B^T T B of a linear field operator T given by `fn`."""
        cols = np.empty((self.grid.n_if, self.n_dof))
        for k in range(self.n_dof):
            cols[:, k] = fn(self.column_field(k)).pack()
        return self.B.T @ cols

    def gram(self):
        return self.B.T @ self.B


def project(f, projector):
    return projector.project(f)


def stokes_matrix(grid, basis):
    """Reduced Stokes matrix A_r = B^T (-P lap) B = -B^T lap B (SPD).

    The projection collapses because B^T P = B^T on solenoidal columns.
    """
    from .grid import assemble_laplacian

    L = assemble_laplacian(grid)
    return -(basis.B.T @ (L @ basis.B))


def stokes_apply(f, projector, rel_tol=_DIV_TOL):
    """A f = -P lap f for solenoidal f."""
    from .grid import norm as fnorm

    d = divergence(f).p
    scale = fnorm(f)
    if scale > 0 and np.sqrt(np.sum(np.abs(d) ** 2) * f.grid.cell_area) > rel_tol * scale:
        raise ProjectionError("stokes_apply input is not solenoidal")
    return -projector.project(laplacian(f))


def save_basis(basis, path):
    """Binary artifact: int64 header (nx, ny, n_dof), float64 (lx, ly), row-major B."""
    with open(path, "wb") as fh:
        np.array([basis.grid.nx, basis.grid.ny, basis.n_dof], np.int64).tofile(fh)
        np.array([basis.grid.lx, basis.grid.ly], np.float64).tofile(fh)
        np.ascontiguousarray(basis.B, np.float64).tofile(fh)


def load_basis(path):
    from .grid import Grid

    with open(path, "rb") as fh:
        head = np.fromfile(fh, np.int64, 3)
        if head.size != 3:
            raise ProjectionError(f"truncated basis artifact {path}")
        nx, ny, n_dof = (int(x) for x in head)
        lx, ly = np.fromfile(fh, np.float64, 2)
        grid = Grid(nx, ny, lx, ly)
        B = np.fromfile(fh, np.float64, grid.n_if * n_dof)
    if B.size != grid.n_if * n_dof:
        raise ProjectionError(f"truncated basis artifact {path}")
    return SolenoidalBasis(grid, B.reshape(grid.n_if, n_dof))
