"""Time integrator checks against closed-form and spectral oracles."""

import numpy as np
import pytest
from scipy.linalg import expm

from flowstab.control import choose_actuators, place_poles
from flowstab.errors import ConfigError
from flowstab.grid import Field, Grid, OmegaMask, gradient
from flowstab.helmholtz import LerayProjector, SolenoidalBasis, stokes_matrix
from flowstab.norms import NormParams
from flowstab.sim import (
    SimConfig,
    fit_decay,
    initial_condition,
    lp_time_norm,
    pressure_solve,
    simulate,
)
from flowstab.spectral import OseenOperator
from flowstab.steady import solve_steady, vortex_equilibrium


@pytest.fixture(scope="module")
def loop12():
    """12x12 vortex base flow shifted to one unstable mode, with a law."""
    g = Grid(12, 12)
    basis = SolenoidalBasis.build(g)
    a_r = stokes_matrix(g, basis)
    nu = 0.5
    forcing, y_e = vortex_equilibrium(g, nu, amplitude=1.0)
    steady = solve_steady(g, basis, forcing, nu, stokes=a_r)
    probe = OseenOperator(g, basis, y_e, nu, sigma=0.0, stokes=a_r)
    sigma = -np.linalg.eigvals(probe.matrix).real.max() + 2.5
    op = OseenOperator(g, basis, y_e, nu, sigma=sigma, stokes=a_r)
    data = op.spectrum()
    assert data.n_unstable == 1
    mask = OmegaMask.rectangle(g, 0.25, 0.75, 0.25, 0.75)
    actuators = choose_actuators(g, basis, data, mask, seed=3)
    law = place_poles(data, basis, actuators, gamma=1.5, seed=3)
    return {
        "grid": g, "basis": basis, "op": op, "data": data, "law": law,
        "steady": steady, "forcing": forcing, "nu": nu,
    }


def test_linear_step_matches_matrix_exponential():
    g = Grid(8, 8)
    basis = SolenoidalBasis.build(g)
    a_r = stokes_matrix(g, basis)
    nu = 0.1
    _, y_e = vortex_equilibrium(g, nu, amplitude=0.5)
    probe = OseenOperator(g, basis, y_e, nu, sigma=0.0, stokes=a_r)
    sigma = -np.linalg.eigvals(probe.matrix).real.max() + 0.8
    op = OseenOperator(g, basis, y_e, nu, sigma=sigma, stokes=a_r)

    cfg = SimConfig(dt=5e-4, t_final=1.0, mode="linear", record_every=200,
                    ic="random", amplitude=1e-3, seed=7)
    z0 = initial_condition(cfg, basis)
    trace = simulate(op, cfg, initial=z0)
    exact = expm(op.matrix) @ z0
    err = np.linalg.norm(trace.states[-1] - exact) / np.linalg.norm(exact)
    assert err < 0.02


def test_stable_subspace_rate_oracle(loop12):
    # Short horizon: at decay rate ~16 the signal hits the floor of
    # integrator error (which re-seeds the unstable mode) soon after t=0.4.
    op, data, basis = loop12["op"], loop12["data"], loop12["basis"]
    cfg = SimConfig(dt=2.5e-4, t_final=0.35, mode="linear", record_every=2,
                    ic="stable", amplitude=1e-3, seed=11)
    trace = simulate(op, cfg, data=data)
    expected = data.gamma0
    assert not trace.blown_up
    assert abs(trace.fitted_rate - expected) <= 0.1 * expected


def test_unstable_mode_growth_oracle(loop12):
    op, data = loop12["op"], loop12["data"]
    lam1 = data.eigenvalues[0].real
    cfg = SimConfig(dt=1e-3, t_final=2.0, mode="linear", record_every=10,
                    ic="unstable", amplitude=1e-4, seed=1)
    trace = simulate(op, cfg, data=data)
    assert not trace.blown_up
    assert abs(-trace.fitted_rate - lam1) <= 0.1 * lam1


def test_closed_loop_rate_reaches_target(loop12):
    op, data, law = loop12["op"], loop12["data"], loop12["law"]
    gamma = -law.targets[0].real
    cfg = SimConfig(dt=1e-3, t_final=6.0, mode="linear", record_every=20,
                    ic="random", amplitude=1e-3, seed=4)
    trace = simulate(op, cfg, law=law, data=data)
    assert not trace.blown_up
    assert trace.fitted_rate >= gamma - 0.1 * gamma
    assert trace.fit_residual < 1e-3


def test_nonlinear_matches_linear_to_quadratic_order(loop12):
    op, data, law, basis = (loop12["op"], loop12["data"], loop12["law"],
                            loop12["basis"])
    rng = np.random.default_rng(8)
    direction = rng.standard_normal(basis.n_dof)
    direction /= np.linalg.norm(direction)

    def gap(amplitude):
        diffs = {}
        for mode in ("linear", "nonlinear"):
            cfg = SimConfig(dt=1e-3, t_final=0.5, mode=mode, record_every=100)
            tr = simulate(op, cfg, law=law, data=data,
                          initial=amplitude * direction)
            diffs[mode] = tr.states[-1]
        return np.linalg.norm(diffs["nonlinear"] - diffs["linear"])

    a = 1e-3
    ratio = gap(a) / gap(a / 2)
    assert 3.0 < ratio < 5.0


def test_zero_state_stays_zero(loop12):
    op, data, law, basis = (loop12["op"], loop12["data"], loop12["law"],
                            loop12["basis"])
    cfg = SimConfig(dt=1e-3, t_final=0.2, mode="nonlinear", record_every=20)
    trace = simulate(op, cfg, law=law, data=data,
                     initial=np.zeros(basis.n_dof))
    assert trace.lq.max() == 0.0
    assert not trace.blown_up


def test_original_form_is_stationary_at_equilibrium(loop12):
    op, data, law, basis = (loop12["op"], loop12["data"], loop12["law"],
                            loop12["basis"])
    steady, forcing = loop12["steady"], loop12["forcing"]
    cfg = SimConfig(dt=1e-3, t_final=1.0, mode="original", record_every=50)
    trace = simulate(op, cfg, law=law, data=data, steady=steady,
                     forcing=forcing, initial=np.zeros(basis.n_dof))
    drift_bound = 10.0 * max(steady.residuals[-1], 1e-14) * cfg.t_final
    assert trace.lq.max() <= drift_bound


def test_original_form_decay_matches_linear(loop12):
    op, data, law = loop12["op"], loop12["data"], loop12["law"]
    steady, forcing = loop12["steady"], loop12["forcing"]
    rates = {}
    for mode in ("linear", "original"):
        cfg = SimConfig(dt=1e-3, t_final=5.0, mode=mode, record_every=25,
                        ic="random", amplitude=1e-4, seed=5)
        tr = simulate(op, cfg, law=law, data=data, steady=steady,
                      forcing=forcing)
        rates[mode] = tr.fitted_rate
    assert abs(rates["original"] - rates["linear"]) <= 0.05 * rates["linear"]


def test_blow_up_is_flagged_and_truncates(loop12):
    op, data = loop12["op"], loop12["data"]
    cfg = SimConfig(dt=1e-3, t_final=40.0, mode="linear", record_every=20,
                    ic="unstable", amplitude=1.0, seed=2)
    trace = simulate(op, cfg, data=data)
    assert trace.blown_up
    assert np.isnan(trace.fitted_rate)
    assert trace.times[-1] < cfg.t_final
    assert np.all(np.isfinite(trace.lq))


def test_fit_decay_pure_exponential():
    t = np.linspace(0.0, 5.0, 101)
    gamma, residual = fit_decay(t, np.exp(-2.0 * t))
    assert abs(gamma - 2.0) < 1e-6
    assert residual < 1e-9


def test_fit_decay_modulated_exponential():
    # Two full modulation periods so the trailing-half window covers one;
    # a partial period would bias the slope.
    t = np.linspace(0.0, 4 * np.pi, 201)
    gamma, residual = fit_decay(t, np.exp(-2.0 * t) * (1 + 0.1 * np.sin(t)))
    assert abs(gamma - 2.0) < 0.05
    assert residual > 0


def test_fit_decay_constant_is_zero_rate():
    t = np.linspace(0.0, 5.0, 101)
    gamma, residual = fit_decay(t, np.ones_like(t))
    assert abs(gamma) < 1e-12
    assert residual < 1e-12


def test_fit_decay_rejects_bad_windows():
    t = np.linspace(0.0, 1.0, 8)
    gamma, residual = fit_decay(t, np.exp(-t))
    assert np.isnan(gamma) and residual == np.inf
    t = np.linspace(0.0, 1.0, 50)
    v = np.exp(-t)
    v[-3] = 0.0
    gamma, residual = fit_decay(t, v)
    assert np.isnan(gamma) and residual == np.inf


def test_lp_time_norm_closed_forms():
    t = np.linspace(0.0, 2.0, 2001)
    p = 1.2
    const = lp_time_norm(t, np.ones_like(t), p)
    assert abs(const - 2.0 ** (1 / p)) < 1e-12
    decay = lp_time_norm(t, np.exp(-t), p)
    exact = ((1 - np.exp(-2.0 * p)) / p) ** (1 / p)
    assert abs(decay - exact) < 1e-4


def test_trace_csv_header_and_roundtrip(tmp_path, loop12):
    op, data, law = loop12["op"], loop12["data"], loop12["law"]
    cfg = SimConfig(dt=1e-3, t_final=0.1, mode="linear", record_every=10,
                    ic="random", amplitude=1e-3, seed=9)
    trace = simulate(op, cfg, law=law, data=data)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "t,lq,w1q,w2q,besov,control,chi"
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    assert back.shape == (trace.n_samples, 7)
    assert np.array_equal(back[:, 0], trace.times)
    assert np.array_equal(back[:, 1], trace.lq)
    assert np.array_equal(back[:, 6], trace.chi)


def test_pressure_solver_zero_rhs(loop12):
    g = loop12["grid"]
    chi = pressure_solve(Field.zeros(g), LerayProjector(g))
    assert np.max(np.abs(chi.p)) == 0.0


def test_pressure_solver_second_order():
    errors = []
    for n in (8, 16, 32):
        g = Grid(n, n)
        xu, yu = g.u_mesh()
        xv, yv = g.v_mesh()
        rhs = Field(
            g,
            -np.pi * np.sin(np.pi * xu) * np.cos(np.pi * yu),
            -np.pi * np.cos(np.pi * xv) * np.sin(np.pi * yv),
            constrained=False,
        )
        chi = pressure_solve(rhs, LerayProjector(g))
        xc, yc = g.p_mesh()
        exact = np.cos(np.pi * xc) * np.cos(np.pi * yc)
        exact -= exact.mean()
        errors.append(np.max(np.abs(chi.p - exact)))
    assert errors[0] / errors[1] > 3.5
    assert errors[1] / errors[2] > 3.5


def test_gradient_rhs_recovers_potential_exactly(loop12):
    g = loop12["grid"]
    xc, yc = g.p_mesh()
    pot = np.cos(2 * np.pi * xc) * yc**2
    from flowstab.grid import PressureField

    chi = pressure_solve(gradient(PressureField(g, pot)), LerayProjector(g))
    assert np.max(np.abs(chi.p - (pot - pot.mean()))) < 1e-10


def test_config_validation_errors(loop12):
    op, data, law = loop12["op"], loop12["data"], loop12["law"]
    with pytest.raises(ConfigError):
        SimConfig(dt=0.0, t_final=1.0)
    with pytest.raises(ConfigError):
        SimConfig(dt=1e-3, t_final=1e-4)
    with pytest.raises(ConfigError):
        SimConfig(dt=1e-3, t_final=1.0, mode="semi")
    with pytest.raises(ConfigError):
        SimConfig(dt=1e-3, t_final=1.0, record_every=0)
    with pytest.raises(ConfigError):
        SimConfig(dt=1e-3, t_final=1.0, ic="vortex")
    with pytest.raises(ConfigError):
        simulate(op, SimConfig(dt=1.0, t_final=2.0), law=law, data=data)
    with pytest.raises(ConfigError):
        simulate(op, SimConfig(dt=1e-3, t_final=1.0, mode="original"),
                 law=law, data=data)


def test_initial_condition_kinds(loop12):
    basis, data = loop12["basis"], loop12["data"]
    cfg = SimConfig(dt=1e-3, t_final=1.0, ic="stable", amplitude=2.0, seed=3)
    z = initial_condition(cfg, basis, data)
    assert abs(np.linalg.norm(z) - 2.0) < 1e-12
    assert np.linalg.norm(data.project_unstable(z)) < 1e-10
    cfg_u = SimConfig(dt=1e-3, t_final=1.0, ic="unstable", amplitude=1.0)
    zu = initial_condition(cfg_u, basis, data)
    residual = np.linalg.norm(zu - data.project_unstable(zu))
    assert residual < 1e-10
    with pytest.raises(ConfigError):
        initial_condition(cfg_u, basis, None)
