"""Time integration of the reduced dynamics, open loop or with feedback.

The state lives in the divergence-free coordinates of a SolenoidalBasis.
One first-order IMEX step treats the Stokes part implicitly (backward
Euler, factored once up front) and everything else explicitly:

    (I + dt nu A_r) z_next = z + dt (D z + feedback + nonlinearity)

where D = M + nu A_r collects the advection linearization and the
destabilizing shift.  The implicit half removes the stiff viscous scale,
so the step size is limited only by the explicit part; SimConfig rejects
dt with dt * ||D + F|| > 1/2 before any stepping happens.

Three dynamics are supported:

  linear     dz/dt = M z + feedback(z)
  nonlinear  dz/dt = M z - N(z, z) + feedback(z)
  original   dy/dt = nu Lap y - N(y, y) + f + sigma (y - y_e)
                      + feedback(y - y_e)

where N is the reduced convective term.  The original form evolves the
full velocity and must stay put at the equilibrium itself; the trace
always records the deviation from the base flow, so all three modes
produce comparable columns.

Traces record, per sample: the L^q norm, first and second Sobolev norms,
the interpolation-norm proxy, the norm of the masked control field, and
the norm of the recovered pressure.  The lp_time aggregates are plain
L^p-in-time averages of those recorded spatial norms; they stand in for
the continuous space-time norms of the underlying estimates and are only
as fine as the sampling.
"""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigError
from .grid import advection, apply_mask, divergence, laplacian
from .helmholtz import LerayProjector
from .norms import NormParams, besov_proxy, lq_norm, sobolev_norm

_MODES = ("linear", "nonlinear", "original")
_IC_KINDS = ("random", "unstable", "stable")
_BLOW_FACTOR = 1e6

_CSV_HEADER = "t,lq,w1q,w2q,besov,control,chi"


class SimConfig:
    """Validated time-stepping parameters.

    record_every thins the trace: a sample is stored every that many steps
    (the initial state and the final step are always kept).
    """

    def __init__(
        self,
        dt,
        t_final,
        mode="linear",
        record_every=1,
        ic="random",
        amplitude=1e-3,
        seed=0,
    ):
        self.dt = float(dt)
        self.t_final = float(t_final)
        self.mode = str(mode)
        self.record_every = int(record_every)
        self.ic = str(ic)
        self.amplitude = float(amplitude)
        self.seed = int(seed)

        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive and finite, got {dt}")
        if self.t_final < self.dt:
            raise ConfigError(
                f"t_final={t_final} is shorter than one step dt={dt}"
            )
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {mode!r}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {record_every}")
        if self.ic not in _IC_KINDS:
            raise ConfigError(f"ic must be one of {_IC_KINDS}, got {ic!r}")
        if not (self.amplitude >= 0 and np.isfinite(self.amplitude)):
            raise ConfigError(f"amplitude must be >= 0, got {amplitude}")

    @property
    def n_steps(self):
        return max(1, int(round(self.t_final / self.dt)))


class SimTrace:
    """Sampled history of one run.

    times and the six norm columns are aligned 1-D arrays; states holds the
    deviation coordinates at the same samples (rows).  blown_up marks a run
    whose state grew past 1e6 times its initial size; such traces keep the
    samples collected so far and carry fitted_rate = nan.
    """

    def __init__(self, mode, times, columns, states, blown_up, p_time):
        self.mode = mode
        self.times = np.asarray(times, float)
        self.lq = np.asarray(columns["lq"], float)
        self.w1q = np.asarray(columns["w1q"], float)
        self.w2q = np.asarray(columns["w2q"], float)
        self.besov = np.asarray(columns["besov"], float)
        self.control = np.asarray(columns["control"], float)
        self.chi = np.asarray(columns["chi"], float)
        self.states = np.asarray(states, float)
        self.blown_up = bool(blown_up)
        if self.blown_up:
            self.fitted_rate, self.fit_residual = float("nan"), float("inf")
        else:
            self.fitted_rate, self.fit_residual = fit_decay(self.times, self.lq)
        self.lp_time = {
            name: lp_time_norm(self.times, getattr(self, name), p_time)
            for name in ("lq", "w1q", "w2q", "besov", "control", "chi")
        }

    @property
    def n_samples(self):
        return self.times.size

    def column_rows(self):
        cols = (self.times, self.lq, self.w1q, self.w2q, self.besov,
                self.control, self.chi)
        return zip(*cols)

    def to_csv(self, path):
        """Write the sampled columns; %.17g round-trips float64 exactly."""
        lines = [_CSV_HEADER]
        for row in self.column_rows():
            lines.append(",".join("%.17g" % v for v in row))
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
        return path


def lp_time_norm(times, values, p):
    """Trapezoid L^p-in-time of sampled values; a stand-in, not a quadrature
    of the continuous trajectory."""
    t = np.asarray(times, float)
    v = np.abs(np.asarray(values, float))
    if t.size < 2:
        return 0.0 if t.size == 0 else float(v[0])
    return float(np.trapezoid(v**p, t) ** (1.0 / p))


def fit_decay(times, values=None):
    """Exponential rate of the trailing half of a norm history.

    Accepts (times, values) arrays or a SimTrace (whose lq column is used).
    Least squares on log values over the last half of the samples; returns
    (gamma_fit, residual) where residual is the rms misfit of the log-linear
    model.  Fewer than 10 usable samples, non-positive or non-finite values
    in the window, or a blown-up trace give (nan, inf): not a fit.
    """
    if values is None:
        trace = times
        if getattr(trace, "blown_up", False):
            return float("nan"), float("inf")
        times, values = trace.times, trace.lq
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    if t.shape != v.shape or t.ndim != 1:
        raise ConfigError("fit_decay needs matching 1-D times and values")
    half = t[t.size // 2:]
    win = v[v.size // 2:]
    if half.size < 10:
        return float("nan"), float("inf")
    if not (np.all(np.isfinite(win)) and np.all(win > 0)):
        return float("nan"), float("inf")
    logs = np.log(win)
    coef = np.polynomial.polynomial.polyfit(half, logs, 1)
    fitted = coef[0] + coef[1] * half
    residual = float(np.sqrt(np.mean((logs - fitted) ** 2)))
    return float(-coef[1]), residual


def initial_condition(cfg, basis, data=None, rng=None):
    """Deviation coordinates with Euclidean (= L^2) size cfg.amplitude.

    random: seeded white noise over all coordinates.
    unstable: the leading unstable direction; needs spectral data.
    stable: white noise with the unstable part projected out.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    z = rng.standard_normal(basis.n_dof)
    if cfg.ic == "unstable":
        if data is None or data.n_unstable == 0:
            raise ConfigError("ic='unstable' needs spectral data with modes")
        z = data.phi[:, 0].real
        if np.linalg.norm(z) < 1e-12:
            z = data.phi[:, 0].imag
    elif cfg.ic == "stable":
        if data is not None and data.n_unstable > 0:
            z = z - data.project_unstable(z)
    size = np.linalg.norm(z)
    if size == 0:
        raise ConfigError(f"degenerate initial direction for ic={cfg.ic!r}")
    return z * (cfg.amplitude / size)


def pressure_solve(rhs, projector):
    """Zero-mean pressure whose gradient is the potential part of rhs."""
    return projector.solve_pressure(divergence(rhs).p)


def explicit_norm_bound(drift, law=None):
    """Spectral norm of the explicit linear part, feedback included."""
    m = np.asarray(drift, float)
    if law is not None:
        m = m + law.feedback_matrix()
    return float(np.linalg.norm(m, 2))


def _feedback(z, law):
    """Literal measurement path: project the unstable part, pair it with
    each window field, inject the masked actuators."""
    if law is None or law.data.n_unstable == 0:
        return None, None
    mu = law.measure(z)
    return mu, law.inject(mu)


def step_linear(z, dt, lu, drift, law=None):
    """One IMEX step of the linearized dynamics."""
    expl = drift @ z
    mu, inj = _feedback(z, law)
    if inj is not None:
        expl = expl + inj
    return lu_solve(lu, z + dt * expl)


def step_nonlinear(z, dt, lu, drift, basis, law=None):
    """One IMEX step with the quadratic convective term included."""
    zf = basis.from_coords(z)
    expl = drift @ z - basis.B.T @ advection(zf, zf).pack()
    mu, inj = _feedback(z, law)
    if inj is not None:
        expl = expl + inj
    return lu_solve(lu, z + dt * expl)


def _step_original(c, dt, lu, ctx):
    """Backward-Euler-in-Stokes step of the full velocity coordinates."""
    yf = ctx["basis"].from_coords(c)
    expl = (
        -ctx["basis"].B.T @ advection(yf, yf).pack()
        + ctx["f_red"]
        + ctx["sigma"] * (c - ctx["c_e"])
    )
    mu, inj = _feedback(c - ctx["c_e"], ctx["law"])
    if inj is not None:
        expl = expl + inj
    return lu_solve(lu, c + dt * expl)


def _deviation_pressure(zf, mode, op, law, mu, projector):
    """Pressure of the deviation momentum balance at one sample.

    grad chi = nu Lap z - (y_e . grad) z - (z . grad) y_e [- (z . grad) z]
               + masked control; the shift term is solenoidal and drops out
    of the divergence.
    """
    y_e = op.base_flow
    rhs = op.nu * laplacian(zf) - advection(y_e, zf) - advection(zf, y_e)
    if mode != "linear":
        rhs = rhs - advection(zf, zf)
    if law is not None and mu is not None and mu.size:
        rhs = rhs + apply_mask(law.control_field(mu), law.actuators.mask)
    return pressure_solve(rhs, projector)


def simulate(
    op,
    cfg,
    law=None,
    data=None,
    params=None,
    steady=None,
    forcing=None,
    initial=None,
    projector=None,
):
    """March the chosen dynamics and record a SimTrace.

    op is the reduced linearization (drift, Stokes block, base flow);
    mode 'original' additionally needs the steady state it should sit on
    and the forcing that sustains it.  initial overrides the configured
    initial condition with explicit deviation coordinates.
    """
    if params is None:
        params = NormParams()
    basis = op.basis
    if cfg.mode == "original":
        if steady is None or forcing is None:
            raise ConfigError("mode 'original' needs steady= and forcing=")
        c_e = np.asarray(steady.coords, float)
        f_red = basis.B.T @ forcing.pack()
    if projector is None:
        projector = LerayProjector(op.grid)

    drift = op.matrix + op.nu * op.stokes
    bound = explicit_norm_bound(drift, law)
    if cfg.dt * bound > 0.5:
        raise ConfigError(
            "dt too large for the explicit part: dt*||D + F|| = "
            f"{cfg.dt * bound:.3g} > 0.5; use dt <= {0.5 / bound:.3e}"
        )

    n = basis.n_dof
    lu = lu_factor(np.eye(n) + cfg.dt * op.nu * op.stokes)

    z0 = (
        np.asarray(initial, float)
        if initial is not None
        else initial_condition(cfg, basis, data)
    )
    if z0.shape != (n,):
        raise ConfigError(f"initial state must have shape ({n},)")

    if cfg.mode == "original":
        state = c_e + z0
        deviation = lambda s: s - c_e
        ctx = {
            "basis": basis, "f_red": f_red, "c_e": c_e,
            "sigma": op.sigma, "law": law,
        }
        advance = lambda s: _step_original(s, cfg.dt, lu, ctx)
    elif cfg.mode == "nonlinear":
        state = z0
        deviation = lambda s: s
        advance = lambda s: step_nonlinear(s, cfg.dt, lu, drift, basis, law)
    else:
        state = z0
        deviation = lambda s: s
        advance = lambda s: step_linear(s, cfg.dt, lu, drift, law)

    size0 = max(float(np.linalg.norm(z0)), 1e-300)
    times, states, blown_up = [], [], False
    columns = {k: [] for k in ("lq", "w1q", "w2q", "besov", "control", "chi")}

    def record(t, z):
        zf = basis.from_coords(z)
        mu, _ = _feedback(z, law)
        columns["lq"].append(lq_norm(zf, params.q))
        columns["w1q"].append(sobolev_norm(zf, params.q, 1))
        columns["w2q"].append(sobolev_norm(zf, params.q, 2))
        columns["besov"].append(besov_proxy(zf, params))
        if law is not None and mu is not None and mu.size:
            uf = apply_mask(law.control_field(mu), law.actuators.mask)
            columns["control"].append(lq_norm(uf, params.q))
        else:
            columns["control"].append(0.0)
        chi = _deviation_pressure(zf, cfg.mode, op, law, mu, projector)
        columns["chi"].append(lq_norm_pressure(chi, params.q))
        times.append(t)
        states.append(z.copy())

    record(0.0, deviation(state))
    for k in range(1, cfg.n_steps + 1):
        state = advance(state)
        z = deviation(state)
        size = np.linalg.norm(z)
        if not np.isfinite(size) or size > _BLOW_FACTOR * size0:
            blown_up = True
            record(k * cfg.dt, np.where(np.isfinite(z), z, 0.0))
            break
        if k % cfg.record_every == 0 or k == cfg.n_steps:
            record(k * cfg.dt, z)

    return SimTrace(cfg.mode, times, columns, states, blown_up, params.p)


def lq_norm_pressure(chi, q):
    """Cell quadrature L^q norm of a pressure sample."""
    vals = np.abs(np.asarray(chi.p, float))
    area = chi.grid.cell_area
    if np.isinf(q):
        return float(vals.max()) if vals.size else 0.0
    return float((np.sum(vals**q) * area) ** (1.0 / q))
