"""Measurement norms on cell-centered samples.

Velocity fields are averaged to cell centers before any norm is taken, so a
norm sees one vector sample per cell; scalar fields are used as stored.  All
norms here are discrete quadrature versions of their continuum namesakes:

* ``lq_norm``      -- (sum of |f|^q * cell_area)^(1/q),
* ``sobolev_norm`` -- adds difference-quotient derivative magnitudes,
* ``besov_proxy``  -- a K-functional interpolation quantity between the
                      plain Lq norm and the second-order Sobolev norm,
* ``omega_inner``  -- the L2 pairing restricted to a control window.

Derivatives are centered differences; at walls the stencil is closed with
odd reflection (ghost value = -nearest cell value), the discrete version of
extending by zero across the boundary.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, GridError
from .grid import (
    Field,
    PressureField,
    assemble_cell_laplacian,
    to_centers,
)

# dyadic ranges for the interpolation proxy: smoothing strengths tau and
# K-functional arguments t
_TAU_EXPONENTS = range(-12, 5)
_T_EXPONENTS = range(-8, 9)


class NormParams:
    """Integrability pair (q, p) for the measurement norms.

    The admissible window in two space dimensions is q > 2 together with
    1 < p < 4/3; the interpolation exponent theta = 1 - 1/p then sits in
    (0, 1/4) and the proxy norm measures smoothness of order 2 - 2/p.
    """

    __slots__ = ("q", "p")

    def __init__(self, q=3.0, p=1.2):
        q = float(q)
        p = float(p)
        if not q > 2.0:
            raise ConfigError(f"q must exceed 2 in two dimensions, got q={q}")
        if not 1.0 < p < 4.0 / 3.0:
            raise ConfigError(f"p must lie in (1, 4/3), got p={p}")
        self.q = q
        self.p = p

    @property
    def theta(self):
        return 1.0 - 1.0 / self.p

    @property
    def smoothness(self):
        return 2.0 - 2.0 / self.p

    def __repr__(self):
        return f"NormParams(q={self.q}, p={self.p})"


def _magnitude_and_grid(f):
    """Cell-centered pointwise magnitude of a field-like object."""
    if isinstance(f, Field):
        uc, vc = to_centers(f)
        return np.sqrt(np.abs(uc) ** 2 + np.abs(vc) ** 2), f.grid
    if isinstance(f, PressureField):
        return np.abs(f.p), f.grid
    raise GridError(f"cannot take a norm of {type(f).__name__}")


def _center_components(f):
    """List of cell-centered scalar arrays making up f."""
    if isinstance(f, Field):
        uc, vc = to_centers(f)
        return [uc, vc], f.grid
    if isinstance(f, PressureField):
        return [f.p], f.grid
    raise GridError(f"cannot take a norm of {type(f).__name__}")


def _pad_odd(a, axis):
    first = -np.take(a, [0], axis=axis)
    last = -np.take(a, [-1], axis=axis)
    return np.concatenate([first, a, last], axis=axis)


def _d1(a, h, axis):
    """Centered first difference with odd-reflection wall closure."""
    p = _pad_odd(a, axis)
    hi = np.take(p, range(2, p.shape[axis]), axis=axis)
    lo = np.take(p, range(0, p.shape[axis] - 2), axis=axis)
    return (hi - lo) / (2.0 * h)


def _d2(a, h, axis):
    """Compact second difference with odd-reflection wall closure."""
    p = _pad_odd(a, axis)
    hi = np.take(p, range(2, p.shape[axis]), axis=axis)
    mid = np.take(p, range(1, p.shape[axis] - 1), axis=axis)
    lo = np.take(p, range(0, p.shape[axis] - 2), axis=axis)
    return (hi - 2.0 * mid + lo) / h**2


def _lq_of_magnitude(mag, grid, q):
    if q <= 0:
        raise ConfigError(f"norm exponent must be positive, got q={q}")
    if np.isinf(q):
        return float(mag.max()) if mag.size else 0.0
    return float((np.sum(mag**q) * grid.cell_area) ** (1.0 / q))


def lq_norm(f, q=2.0):
    """Cell-quadrature Lq norm of the pointwise vector magnitude."""
    mag, grid = _magnitude_and_grid(f)
    return _lq_of_magnitude(mag, grid, q)


def _derivative_magnitudes(f, order):
    """Frobenius magnitudes of the first (and second) difference quotients."""
    comps, grid = _center_components(f)
    grad_sq = np.zeros(grid.shape_p)
    for a in comps:
        grad_sq = grad_sq + np.abs(_d1(a, grid.hx, 0)) ** 2
        grad_sq = grad_sq + np.abs(_d1(a, grid.hy, 1)) ** 2
    mags = [np.sqrt(grad_sq)]
    if order >= 2:
        hess_sq = np.zeros(grid.shape_p)
        for a in comps:
            hess_sq = hess_sq + np.abs(_d2(a, grid.hx, 0)) ** 2
            hess_sq = hess_sq + np.abs(_d2(a, grid.hy, 1)) ** 2
            mixed = _d1(_d1(a, grid.hx, 0), grid.hy, 1)
            hess_sq = hess_sq + 2.0 * np.abs(mixed) ** 2
        mags.append(np.sqrt(hess_sq))
    return mags, grid


def sobolev_norm(f, q=2.0, order=1):
    """Lq norm plus Lq norms of difference-quotient derivatives.

    order=1 adds the gradient magnitude, order=2 additionally the full
    second-derivative (Hessian) magnitude with both mixed terms counted.
    """
    if order not in (1, 2):
        raise ConfigError(f"derivative order must be 1 or 2, got {order}")
    mag, grid = _magnitude_and_grid(f)
    total = _lq_of_magnitude(mag, grid, q)
    der_mags, _ = _derivative_magnitudes(f, order)
    for m in der_mags:
        total += _lq_of_magnitude(m, grid, q)
    return float(total)


# one LU factorization of (I - tau * Laplacian) per (grid, tau), reused
# across every norm evaluation on that grid
_smoother_cache = {}


def _smoother(grid, tau):
    key = (grid, float(tau))
    if key not in _smoother_cache:
        lap = assemble_cell_laplacian(grid)
        n = grid.n_cells
        _smoother_cache[key] = spla.splu((sp.identity(n) - tau * lap).tocsc())
    return _smoother_cache[key]


def _solve_cells(lu, a):
    flat = a.ravel()
    if np.iscomplexobj(flat):
        out = lu.solve(flat.real) + 1j * lu.solve(flat.imag)
    else:
        out = lu.solve(flat)
    return out.reshape(a.shape)


def _smoothing_family(f):
    """The field itself plus elliptic mollifications at dyadic strengths."""
    comps, grid = _center_components(f)
    family = [comps]
    for k in _TAU_EXPONENTS:
        lu = _smoother(grid, 2.0**k)
        family.append([_solve_cells(lu, a) for a in comps])
    return family, grid


def _center_lq(comps, grid, q):
    mag = np.sqrt(sum(np.abs(a) ** 2 for a in comps))
    return _lq_of_magnitude(mag, grid, q)


def _center_w2q(comps, grid, q):
    total = _center_lq(comps, grid, q)
    grad_sq = np.zeros(grid.shape_p)
    hess_sq = np.zeros(grid.shape_p)
    for a in comps:
        grad_sq = grad_sq + np.abs(_d1(a, grid.hx, 0)) ** 2
        grad_sq = grad_sq + np.abs(_d1(a, grid.hy, 1)) ** 2
        hess_sq = hess_sq + np.abs(_d2(a, grid.hx, 0)) ** 2
        hess_sq = hess_sq + np.abs(_d2(a, grid.hy, 1)) ** 2
        mixed = _d1(_d1(a, grid.hx, 0), grid.hy, 1)
        hess_sq = hess_sq + 2.0 * np.abs(mixed) ** 2
    total += _lq_of_magnitude(np.sqrt(grad_sq), grid, q)
    total += _lq_of_magnitude(np.sqrt(hess_sq), grid, q)
    return total


def k_functional(f, t, params):
    """K(t) = min over the smoothing family of |f - g|_q + t |g|_W2q."""
    family, grid = _smoothing_family(f)
    comps = family[0]
    best = np.inf
    for g in family:
        diff = [a - b for a, b in zip(comps, g)]
        val = _center_lq(diff, grid, params.q) + t * _center_w2q(g, grid, params.q)
        best = min(best, val)
    return float(best)


def besov_proxy(f, params=None):
    """Interpolation-space norm proxy between Lq and W2q.

    Evaluates the K-functional on a dyadic grid of arguments t and forms
    ( sum_t (t^-theta K(t))^p * ln 2 )^(1/p), the quadrature version of the
    real-interpolation integral with theta = 1 - 1/p.
    """
    if params is None:
        params = NormParams()
    family, grid = _smoothing_family(f)
    comps = family[0]
    # precompute both ingredients once per family member
    w2q = [_center_w2q(g, grid, params.q) for g in family]
    dq = [
        _center_lq([a - b for a, b in zip(comps, g)], grid, params.q)
        for g in family
    ]
    acc = 0.0
    for k in _T_EXPONENTS:
        t = 2.0**k
        kt = min(d + t * w for d, w in zip(dq, w2q))
        acc += (t**-params.theta * kt) ** params.p
    return float((acc * np.log(2.0)) ** (1.0 / params.p))


def omega_inner(f, g, mask):
    """Windowed L2 pairing over the control cells, conjugating g.

    Pairs cell-averaged samples over the cells flagged by the mask and
    weights by the cell area.  By construction this equals the global
    pairing of the mask-localized field with g exactly.
    """
    if f.grid != g.grid or f.grid != mask.grid:
        raise GridError("field/mask grids do not match")
    ucf, vcf = to_centers(f)
    ucg, vcg = to_centers(g)
    m = mask.indicator
    s = np.sum(ucf[m] * np.conj(ucg[m])) + np.sum(vcf[m] * np.conj(vcg[m]))
    return complex(s * f.grid.cell_area)
