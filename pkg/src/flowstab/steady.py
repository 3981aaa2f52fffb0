"""Steady states of the driven flow and the forcing families that define them.

The stationary problem in reduced coordinates reads

    nu * A_r c + B^T adv(y(c), y(c)) = B^T f,

where A_r is the reduced Stokes matrix and the pressure gradient drops out
against the divergence-free basis columns.  Newton iteration on this system
is the default solver; a damped Picard fixed point is kept alongside as an
independent cross-check.  The pressure is recovered afterwards from the
momentum balance by one Poisson solve.
"""

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, SteadyStateError
from .grid import (
    Field,
    PressureField,
    advection,
    divergence,
    gradient,
    laplacian,
)
from .helmholtz import LerayProjector, _curl_matrix, stokes_matrix


def advection_jacobian(basis, y):
    """Dense reduced matrix of the linearization w -> (y.grad)w + (w.grad)y."""
    return basis.reduce_apply(lambda w: advection(y, w) + advection(w, y))


class SteadyState:
    """Converged equilibrium: velocity, reduced coordinates, pressure."""

    __slots__ = (
        "grid",
        "coords",
        "y",
        "pressure",
        "nu",
        "residuals",
        "momentum_residual",
        "method",
    )

    def __init__(self, grid, coords, y, pressure, nu, residuals, momentum_residual, method):
        self.grid = grid
        self.coords = coords
        self.y = y
        self.pressure = pressure
        self.nu = nu
        self.residuals = residuals
        self.momentum_residual = momentum_residual
        self.method = method


def _recover_pressure(grid, y, forcing, nu, projector):
    """Pressure from the momentum balance: grad pi = f + nu Lap y - adv(y, y)."""
    rhs = forcing + nu * laplacian(y) - advection(y, y)
    pi = projector.solve_pressure(divergence(rhs).p)
    leftover = rhs - gradient(pi)
    return pi, float(np.linalg.norm(leftover.pack()))


def solve_steady(
    grid,
    basis,
    forcing,
    nu,
    initial=None,
    tol=1e-12,
    max_iter=None,
    method="newton",
    stokes=None,
    projector=None,
):
    """Solve the stationary momentum balance in reduced coordinates.

    Returns a SteadyState.  Raises SteadyStateError when the iteration does
    not reach the tolerance, carrying the best iterate and the residual
    history for diagnosis.
    """
    if nu <= 0:
        raise ConfigError(f"viscosity must be positive, got nu={nu}")
    if method not in ("newton", "picard"):
        raise ConfigError(f"unknown steady solver {method!r}")
    if max_iter is None:
        max_iter = 40 if method == "newton" else 400
    a_r = stokes_matrix(grid, basis) if stokes is None else stokes
    f_red = basis.B.T @ forcing.pack()
    scale = max(1.0, float(np.linalg.norm(f_red)))

    def residual(c):
        y = basis.from_coords(c)
        return nu * (a_r @ c) + basis.B.T @ advection(y, y).pack() - f_red, y

    c = np.zeros(basis.n_dof) if initial is None else np.array(initial, float)
    res, y = residual(c)
    rnorm = float(np.linalg.norm(res))
    history = [rnorm]
    best_c, best_r = c.copy(), rnorm

    if method == "picard":
        lu = sla.lu_factor(nu * a_r)
    for _ in range(max_iter):
        if rnorm <= tol * scale:
            break
        if method == "newton":
            jac = nu * a_r + advection_jacobian(basis, y)
            try:
                step = sla.solve(jac, -res)
            except sla.LinAlgError as exc:
                raise SteadyStateError(
                    f"singular Newton system: {exc}", best_c, history, nu
                )
            # halve the step while it fails to reduce the residual
            alpha = 1.0
            for _ in range(30):
                res_new, y_new = residual(c + alpha * step)
                rnorm_new = float(np.linalg.norm(res_new))
                if rnorm_new < rnorm or not np.isfinite(rnorm_new):
                    break
                alpha *= 0.5
            if not np.isfinite(rnorm_new) or rnorm_new >= rnorm:
                raise SteadyStateError(
                    "Newton stalled: no residual decrease along the step",
                    best_c,
                    history,
                    nu,
                )
            c = c + alpha * step
        else:
            c_next = sla.lu_solve(lu, f_red - basis.B.T @ advection(y, y).pack())
            c = 0.5 * (c + c_next)  # relaxation keeps the fixed point stable
            res_new, y_new = residual(c)
            rnorm_new = float(np.linalg.norm(res_new))
            if not np.isfinite(rnorm_new):
                raise SteadyStateError(
                    "Picard iteration diverged", best_c, history, nu
                )
        res, y, rnorm = res_new, y_new, rnorm_new
        history.append(rnorm)
        if rnorm < best_r:
            best_c, best_r = c.copy(), rnorm
    else:
        if rnorm > tol * scale:
            raise SteadyStateError(
                f"steady solve did not converge in {max_iter} iterations "
                f"(residual {rnorm:.3e}, target {tol * scale:.3e})",
                best_c,
                history,
                nu,
            )

    projector = LerayProjector(grid) if projector is None else projector
    pressure, momentum_residual = _recover_pressure(grid, y, forcing, nu, projector)
    return SteadyState(
        grid, c, y, pressure, nu, history, momentum_residual, method
    )


def continuation_solve(grid, basis, forcing, nu, steps=4, **kwargs):
    """Ramp the forcing amplitude, warm-starting each solve from the last."""
    if steps < 1:
        raise ConfigError("continuation needs at least one step")
    stokes = kwargs.pop("stokes", None)
    if stokes is None:
        stokes = stokes_matrix(grid, basis)
    projector = kwargs.pop("projector", None)
    if projector is None:
        projector = LerayProjector(grid)
    state = None
    for k in range(1, steps + 1):
        frac = k / steps
        state = solve_steady(
            grid,
            basis,
            frac * forcing,
            nu,
            initial=None if state is None else state.coords,
            stokes=stokes,
            projector=projector,
            **kwargs,
        )
    return state


# ---------------------------------------------------------------------------
# forcing families


def gradient_forcing(grid, g):
    """Conservative forcing grad g; the equilibrium is rest with pressure g.

    g is a callable g(x, y) sampled at cell centers; the returned field is
    its lifted discrete gradient (zero on wall-normal boundary faces).
    """
    xp, yp = grid.p_mesh()
    samples = PressureField(grid, np.asarray(g(xp, yp), float))
    return gradient(samples), samples.zero_mean()


def vortex_equilibrium(grid, nu, amplitude=1.0):
    """Manufactured interior vortex and the forcing that sustains it.

    The equilibrium is the discrete curl of the streamfunction
    A sin^2(pi x) sin^2(pi y) evaluated at interior vertices, hence exactly
    divergence-free and no-slip.  The forcing is assembled from the same
    discrete operators, so the equilibrium satisfies the reduced equations
    to round-off and the consistent pressure is zero.
    """
    nx, ny = grid.nx, grid.ny
    xv = np.arange(1, nx) * grid.hx
    yv = np.arange(1, ny) * grid.hy
    X, Y = np.meshgrid(xv, yv, indexing="ij")
    psi = amplitude * np.sin(np.pi * X) ** 2 * np.sin(np.pi * Y) ** 2
    packed = _curl_matrix(grid) @ psi.ravel()
    y_e = Field.unpack(grid, packed)
    forcing = advection(y_e, y_e) - nu * laplacian(y_e)
    return forcing, y_e


def shear_forcing(grid, amplitude=1.0, k=1):
    """Horizontal volume force A sin(2 pi k y); drives a layered shear flow."""
    if k < 1:
        raise ConfigError("shear wavenumber must be a positive integer")
    return Field.from_function(
        grid,
        lambda x, y: amplitude * np.sin(2.0 * np.pi * k * y),
        lambda x, y: np.zeros_like(x),
    )


def make_forcing(grid, family, nu=None, amplitude=1.0, k=1):
    """Uniform constructor used by configuration files.

    Returns (forcing, known_velocity, known_pressure); the known fields are
    None when the family has no closed-form equilibrium.
    """
    if family == "gradient":
        f, g_samples = gradient_forcing(
            grid, lambda x, y: amplitude * np.cos(np.pi * x) * np.cos(2.0 * np.pi * y)
        )
        return f, Field.zeros(grid), g_samples
    if family == "vortex":
        if nu is None:
            raise ConfigError("vortex forcing needs the viscosity")
        f, y_e = vortex_equilibrium(grid, nu, amplitude)
        return f, y_e, PressureField(grid)
    if family == "shear":
        return shear_forcing(grid, amplitude, k), None, None
    raise ConfigError(f"unknown forcing family {family!r}")
