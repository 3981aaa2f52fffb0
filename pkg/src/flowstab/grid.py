"""Uniform MAC staggered grid, velocity/pressure fields, and raw difference operators.

Layout.  The rectangle [0, lx] x [0, ly] is split into nx x ny cells of size
hx x hy.  Samples are staggered:

    u : horizontal velocity on x-faces, shape (nx+1, ny), u[i, j] at
        (i*hx, (j+0.5)*hy)
    v : vertical velocity on y-faces, shape (nx, ny+1)
    p : cell centers, shape (nx, ny)

Wall-normal boundary faces (u at i = 0, nx; v at j = 0, ny) carry the no-slip
value 0 and are excluded from the packed degree-of-freedom vector.  The
no-slip condition on the *tangential* component enters stencils via ghost
values reflected across the wall (ghost = -interior, so the wall trace is 0).

Packed vectors are scaled by sqrt(hx*hy): the plain Euclidean dot of packed
vectors equals the discrete L2 inner product of the fields, so downstream
linear algebra never carries quadrature weights.
"""

import numpy as np

from .errors import GridError


class Grid:
    """Uniform staggered grid; immutable after construction."""

    def __init__(self, nx, ny, lx=1.0, ly=1.0):
        nx, ny = int(nx), int(ny)
        if nx < 8 or ny < 8:
            raise GridError(f"grid must be at least 8x8 cells, got {nx}x{ny}")
        if lx <= 0 or ly <= 0:
            raise GridError("domain lengths must be positive")
        self.nx, self.ny = nx, ny
        self.lx, self.ly = float(lx), float(ly)
        self.hx = self.lx / nx
        self.hy = self.ly / ny
        self.cell_area = self.hx * self.hy
        # interior (unconstrained) face counts
        self.n_iu = (nx - 1) * ny
        self.n_iv = nx * (ny - 1)
        self.n_if = self.n_iu + self.n_iv
        self.n_cells = nx * ny

    @property
    def shape_u(self):
        return (self.nx + 1, self.ny)

    @property
    def shape_v(self):
        return (self.nx, self.ny + 1)

    @property
    def shape_p(self):
        return (self.nx, self.ny)

    def u_mesh(self):
        """Coordinates of x-face sample points, arrays shaped like u."""
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def v_mesh(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def p_mesh(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and (self.nx, self.ny, self.lx, self.ly)
            == (other.nx, other.ny, other.lx, other.ly)
        )

    def __hash__(self):
        return hash((self.nx, self.ny, self.lx, self.ly))

    def __repr__(self):
        return f"Grid(nx={self.nx}, ny={self.ny}, lx={self.lx}, ly={self.ly})"


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise GridError("operands live on different grids")


class Field:
    """Velocity sample pair on the staggered grid.

    Wall-normal boundary entries are forced to the no-slip value 0 at
    construction; every operator in this module preserves that constraint.
    Arrays may be real or complex.
    """

    __slots__ = ("grid", "u", "v")

    def __init__(self, grid, u=None, v=None, constrained=True):
        self.grid = grid
        dtype = np.result_type(
            u.dtype if u is not None else np.float64,
            v.dtype if v is not None else np.float64,
        )
        self.u = np.zeros(grid.shape_u, dtype) if u is None else np.array(u, dtype)
        self.v = np.zeros(grid.shape_v, dtype) if v is None else np.array(v, dtype)
        if self.u.shape != grid.shape_u or self.v.shape != grid.shape_v:
            raise GridError("component arrays do not match the grid staggering")
        if constrained:
            # no-slip constraint on wall-normal faces
            self.u[0, :] = 0.0
            self.u[-1, :] = 0.0
            self.v[:, 0] = 0.0
            self.v[:, -1] = 0.0

    @classmethod
    def zeros(cls, grid, dtype=np.float64):
        return cls(grid, np.zeros(grid.shape_u, dtype), np.zeros(grid.shape_v, dtype))

    @classmethod
    def from_function(cls, grid, fu, fv):
        """Sample callables fu(x, y), fv(x, y) at the staggered locations."""
        xu, yu = grid.u_mesh()
        xv, yv = grid.v_mesh()
        return cls(grid, np.asarray(fu(xu, yu), float), np.asarray(fv(xv, yv), float))

    def copy(self):
        return Field(self.grid, self.u.copy(), self.v.copy(), constrained=False)

    def conj(self):
        return Field(self.grid, np.conj(self.u), np.conj(self.v), constrained=False)

    @property
    def real(self):
        return Field(self.grid, self.u.real.copy(), self.v.real.copy(), constrained=False)

    @property
    def imag(self):
        return Field(self.grid, self.u.imag.copy(), self.v.imag.copy(), constrained=False)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    def pack(self):
        """Flatten interior faces to a vector, sqrt(cell-area) scaled."""
        s = np.sqrt(self.grid.cell_area)
        return np.concatenate(
            [self.u[1:-1, :].ravel() * s, self.v[:, 1:-1].ravel() * s]
        )

    @classmethod
    def unpack(cls, grid, vec):
        vec = np.asarray(vec)
        if vec.shape != (grid.n_if,):
            raise GridError(f"expected a vector of length {grid.n_if}")
        s = 1.0 / np.sqrt(grid.cell_area)
        u = np.zeros(grid.shape_u, vec.dtype)
        v = np.zeros(grid.shape_v, vec.dtype)
        u[1:-1, :] = vec[: grid.n_iu].reshape(grid.nx - 1, grid.ny) * s
        v[:, 1:-1] = vec[grid.n_iu :].reshape(grid.nx, grid.ny - 1) * s
        return cls(grid, u, v, constrained=False)

    # light arithmetic so callers can combine fields without reaching into arrays
    def __add__(self, other):
        _require_same_grid(self, other)
        return Field(self.grid, self.u + other.u, self.v + other.v, constrained=False)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return Field(self.grid, self.u - other.u, self.v - other.v, constrained=False)

    def __mul__(self, a):
        return Field(self.grid, self.u * a, self.v * a, constrained=False)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)


class PressureField:
    """Cell-centered scalar samples (pressure-like quantities)."""

    __slots__ = ("grid", "p")

    def __init__(self, grid, p=None):
        self.grid = grid
        self.p = np.zeros(grid.shape_p) if p is None else np.array(p)
        if self.p.shape != grid.shape_p:
            raise GridError("pressure array does not match the grid")

    def zero_mean(self):
        """Normalized copy (additive constant removed)."""
        return PressureField(self.grid, self.p - self.p.mean())

    def copy(self):
        return PressureField(self.grid, self.p.copy())


class OmegaMask:
    """Per-cell indicator of the interior control window omega."""

    __slots__ = ("grid", "indicator", "smoothing")

    def __init__(self, grid, indicator, smoothing="none"):
        indicator = np.asarray(indicator, bool)
        if indicator.shape != grid.shape_p:
            raise GridError("mask shape does not match the grid")
        if not indicator.any():
            raise GridError("control window is empty")
        if (
            indicator[0, :].any()
            or indicator[-1, :].any()
            or indicator[:, 0].any()
            or indicator[:, -1].any()
        ):
            raise GridError("control window must be strictly interior")
        if smoothing != "none":
            raise GridError(f"unsupported mask smoothing {smoothing!r}")
        self.grid = grid
        self.indicator = indicator
        self.smoothing = smoothing

    @classmethod
    def rectangle(cls, grid, x0, x1, y0, y1):
        """Mask of all cells whose centers fall in [x0,x1] x [y0,y1]."""
        xp, yp = grid.p_mesh()
        ind = (xp >= x0) & (xp <= x1) & (yp >= y0) & (yp <= y1)
        return cls(grid, ind)

    @classmethod
    def full_interior(cls, grid):
        ind = np.zeros(grid.shape_p, bool)
        ind[1:-1, 1:-1] = True
        return cls(grid, ind)

    def cell_count(self):
        return int(self.indicator.sum())


def _check_finite(f, what):
    if not f.is_finite():
        raise GridError(f"non-finite entries in {what}")


def divergence(f):
    """MAC cell-centered divergence."""
    _check_finite(f, "divergence input")
    g = f.grid
    d = np.diff(f.u, axis=0) / g.hx + np.diff(f.v, axis=1) / g.hy
    out = PressureField.__new__(PressureField)
    out.grid, out.p = g, d
    return out


def gradient(p):
    """Pressure gradient lifted to interior faces (boundary faces stay 0)."""
    g = p.grid
    arr = p.p
    out = Field.zeros(g, dtype=arr.dtype)
    out.u[1:-1, :] = np.diff(arr, axis=0) / g.hx
    out.v[:, 1:-1] = np.diff(arr, axis=1) / g.hy
    return out


def _lap_component(a, h_n, h_t):
    """5-point Laplacian of one staggered component.

    axis 0 = wall-normal direction (endpoint samples are stored boundary
    values), axis 1 = tangential direction (no-slip ghosts by reflection).
    Returns an array of the same shape with zeroed endpoint rows.
    """
    core = a[1:-1, :]
    d2n = (a[2:, :] - 2.0 * core + a[:-2, :]) / h_n**2
    lo = np.concatenate([-core[:, :1], core[:, :-1]], axis=1)
    hi = np.concatenate([core[:, 1:], -core[:, -1:]], axis=1)
    d2t = (lo - 2.0 * core + hi) / h_t**2
    out = np.zeros_like(a)
    out[1:-1, :] = d2n + d2t
    return out


def laplacian(f):
    """Componentwise 5-point Laplacian with no-slip ghost reflection."""
    _check_finite(f, "laplacian input")
    g = f.grid
    lu = _lap_component(f.u, g.hx, g.hy)
    lv = _lap_component(f.v.T, g.hy, g.hx).T
    return Field(g, lu, lv)


def advection(a, f):
    """Convective term (a . grad) f interpolated to each face location.

    Centered differences throughout; tangential ghosts by no-slip
    reflection, so no artificial dissipation enters the Oseen operator.
    """
    _require_same_grid(a, f)
    _check_finite(a, "advection carrier")
    _check_finite(f, "advection input")
    g = a.grid
    hx, hy = g.hx, g.hy

    out = Field.zeros(g, dtype=np.result_type(a.u.dtype, f.u.dtype))

    # u component, interior x-faces i = 1..nx-1
    fu = f.u
    core = fu[1:-1, :]
    dudx = (fu[2:, :] - fu[:-2, :]) / (2.0 * hx)
    lo = np.concatenate([-core[:, :1], core[:, :-1]], axis=1)
    hi = np.concatenate([core[:, 1:], -core[:, -1:]], axis=1)
    dudy = (hi - lo) / (2.0 * hy)
    a1 = a.u[1:-1, :]
    av = a.v
    # v averaged to the x-face: the four faces of cells (i-1, j) and (i, j)
    a2 = 0.25 * (av[:-1, :-1] + av[1:, :-1] + av[:-1, 1:] + av[1:, 1:])
    out.u[1:-1, :] = a1 * dudx + a2 * dudy

    # v component, interior y-faces j = 1..ny-1
    fv = f.v
    corev = fv[:, 1:-1]
    dvdy = (fv[:, 2:] - fv[:, :-2]) / (2.0 * hy)
    lov = np.concatenate([-corev[:1, :], corev[:-1, :]], axis=0)
    hiv = np.concatenate([corev[1:, :], -corev[-1:, :]], axis=0)
    dvdx = (hiv - lov) / (2.0 * hx)
    b2 = a.v[:, 1:-1]
    au = a.u
    b1 = 0.25 * (au[:-1, :-1] + au[:-1, 1:] + au[1:, :-1] + au[1:, 1:])
    out.v[:, 1:-1] = b1 * dvdx + b2 * dvdy
    return out


def dot(f, g):
    """Discrete L2 inner product over faces, conjugate-linear in g."""
    _require_same_grid(f, g)
    s = np.vdot(g.u, f.u) + np.vdot(g.v, f.v)  # vdot conjugates its first arg
    return s * f.grid.cell_area


def norm(f):
    return float(np.sqrt(abs(dot(f, f))))


def to_centers(f):
    """Average both components to cell centers; returns (uc, vc)."""
    uc = 0.5 * (f.u[:-1, :] + f.u[1:, :])
    vc = 0.5 * (f.v[:, :-1] + f.v[:, 1:])
    return uc, vc


def from_centers(grid, uc, vc):
    """Adjoint of to_centers (spreads cell values back to faces)."""
    dtype = np.result_type(uc.dtype, vc.dtype)
    out = Field.zeros(grid, dtype=dtype)
    out.u[1:-1, :] = 0.5 * (uc[:-1, :] + uc[1:, :])
    out.v[:, 1:-1] = 0.5 * (vc[:, :-1] + vc[:, 1:])
    return out


def apply_mask(f, mask):
    """Pointwise cell-centered masking, spread back by the interpolation adjoint.

    This is the discrete realization of multiplication by the indicator m:
    <apply_mask(f), g> equals the windowed product (f, g)_omega exactly,
    which keeps the synthesized gains consistent with the injected control.
    """
    uc, vc = to_centers(f)
    m = mask.indicator
    return from_centers(f.grid, uc * m, vc * m)


def assemble_cell_laplacian(grid):
    """Sparse 5-point Laplacian on cell centers with zero-flux closure.

    This equals the composition divergence(gradient(.)) exactly: the lifted
    gradient vanishes on boundary faces, which is the Neumann closure.
    """
    import scipy.sparse as sp

    nx, ny = grid.nx, grid.ny
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(np.asarray(v, float), r.shape).ravel())

    deg = np.zeros((nx, ny))
    for axis, h2 in ((0, grid.hx**2), (1, grid.hy**2)):
        lo = idx.take(range(0, idx.shape[axis] - 1), axis=axis)
        hi = idx.take(range(1, idx.shape[axis]), axis=axis)
        add(lo, hi, 1.0 / h2)
        add(hi, lo, 1.0 / h2)
        bump = np.zeros((nx, ny))
        sl = [slice(None), slice(None)]
        sl[axis] = slice(0, -1)
        bump[tuple(sl)] += 1.0 / h2
        sl[axis] = slice(1, None)
        bump[tuple(sl)] += 1.0 / h2
        deg += bump
    add(idx, idx, -deg)
    n = nx * ny
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()


def assemble_laplacian(grid):
    """Sparse matrix of `laplacian` acting on packed interior-face vectors."""
    import scipy.sparse as sp

    nx, ny = grid.nx, grid.ny
    hx2, hy2 = grid.hx**2, grid.hy**2

    def component(n_n, n_t, h_n2, h_t2):
        # interior faces of one component on an (n_n+1) x n_t sample array
        idx = np.arange((n_n - 1) * n_t).reshape(n_n - 1, n_t)
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(np.broadcast_to(v, r.shape).ravel())

        # normal-direction couplings (Dirichlet 0 beyond the first/last face)
        add(idx, idx, -2.0 / h_n2 * np.ones_like(idx, float))
        add(idx[1:, :], idx[:-1, :], 1.0 / h_n2)
        add(idx[:-1, :], idx[1:, :], 1.0 / h_n2)
        # tangential couplings with ghost reflection at walls
        diag_t = np.full((n_n - 1, n_t), -2.0 / h_t2)
        diag_t[:, 0] -= 1.0 / h_t2
        diag_t[:, -1] -= 1.0 / h_t2
        add(idx, idx, diag_t)
        add(idx[:, 1:], idx[:, :-1], 1.0 / h_t2)
        add(idx[:, :-1], idx[:, 1:], 1.0 / h_t2)
        n = (n_n - 1) * n_t
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )

    lu = component(nx, ny, hx2, hy2)
    # v packs row-major over (nx, ny-1): normal = y, tangential = x, so build
    # on the transposed layout and permute into packing order
    lv_t = component(ny, nx, hy2, hx2)
    perm = np.arange(grid.n_iv).reshape(grid.nx, grid.ny - 1).T.ravel()
    P = sp.coo_matrix(
        (np.ones(grid.n_iv), (np.arange(grid.n_iv), perm)),
        shape=(grid.n_iv, grid.n_iv),
    )
    lv = (P.T @ lv_t @ P).tocoo()
    return sp.block_diag([lu, lv], format="csr")
