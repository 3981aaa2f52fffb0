import numpy as np
import pytest

import scipy.linalg as sla

from flowstab.errors import ProjectionError
from flowstab.grid import Field, PressureField, divergence, dot, gradient, norm
from flowstab.helmholtz import (
    LerayProjector,
    SolenoidalBasis,
    load_basis,
    save_basis,
    stokes_apply,
    stokes_matrix,
)

from conftest import random_field


@pytest.fixture(scope="module")
def g8_setup():
    from flowstab.grid import Grid

    g = Grid(8, 8)
    return g, LerayProjector(g), SolenoidalBasis.build(g)


def div_l2(f):
    d = divergence(f).p
    return float(np.sqrt(np.sum(np.abs(d) ** 2) * f.grid.cell_area))


# ---------------------------------------------------------------- projection


def test_projection_annihilates_lifted_gradients(g8_setup, rng):
    g, P, _ = g8_setup
    h = PressureField(g, rng.standard_normal(g.shape_p))
    f = gradient(h)
    assert norm(P.project(f)) <= 1e-10 * norm(f)


def test_projection_fixes_solenoidal_fields(g8_setup):
    g, P, basis = g8_setup
    f = basis.column_field(7)
    assert norm(P.project(f) - f) <= 1e-10


def test_projection_idempotent_selfadjoint_divfree(g8_setup, rng):
    g, P, _ = g8_setup
    f, w = random_field(g, rng), random_field(g, rng)
    pf = P.project(f)
    assert norm(P.project(pf) - pf) <= 1e-10 * norm(f)
    assert div_l2(pf) <= 1e-10 * norm(f)
    assert abs(dot(pf, w) - dot(f, P.project(w))) <= 1e-10 * norm(f) * norm(w)


def test_projection_output_orthogonal_to_gradients(g8_setup, rng):
    g, P, _ = g8_setup
    f = random_field(g, rng)
    h = PressureField(g, rng.standard_normal(g.shape_p))
    assert abs(dot(P.project(f), gradient(h))) <= 1e-10 * norm(f)


def test_decomposition_reconstructs(g8_setup, rng):
    g, P, _ = g8_setup
    f = random_field(g, rng)
    phi = P.solve_pressure(divergence(f).p)
    back = P.project(f) + gradient(phi)
    assert norm(back - f) <= 1e-10 * norm(f)


def test_projection_handles_complex_fields(g8_setup, rng):
    g, P, _ = g8_setup
    f = random_field(g, rng, complex_=True)
    pf = P.project(f)
    assert div_l2(pf) <= 1e-10 * norm(f)


# ---------------------------------------------------------------- basis


def test_basis_dimension_matches_svd_rank_oracle(g8_setup):
    g, _, basis = g8_setup
    D = np.zeros((g.n_cells, g.n_if))
    for k in range(g.n_if):
        e = np.zeros(g.n_if)
        e[k] = 1.0
        D[:, k] = divergence(Field.unpack(g, e)).p.ravel()
    rank = np.linalg.matrix_rank(D, tol=1e-10)
    assert rank == g.n_cells - 1  # only the pressure constant is missing
    assert basis.n_dof == g.n_if - rank
    assert basis.n_dof == (g.nx - 1) * (g.ny - 1)


def test_basis_columns_divergence_free_and_orthonormal(g8_setup):
    _, _, basis = g8_setup
    for k in range(0, basis.n_dof, 7):
        assert div_l2(basis.column_field(k)) <= 1e-10
    G = basis.gram()
    assert np.max(np.abs(G - np.eye(basis.n_dof))) <= 1e-10


def test_basis_reproduces_projection_range(g8_setup, rng):
    g, P, basis = g8_setup
    f = random_field(g, rng)
    pf = P.project(f).pack()
    assert np.linalg.norm(basis.B @ (basis.B.T @ pf) - pf) <= 1e-9 * np.linalg.norm(pf)


def test_basis_artifact_roundtrip(tmp_path, g8_setup):
    _, _, basis = g8_setup
    p = tmp_path / "basis.bin"
    save_basis(basis, p)
    other = load_basis(p)
    assert other.grid == basis.grid
    assert np.array_equal(other.B, basis.B)


# ---------------------------------------------------------------- Stokes


def test_reduced_stokes_symmetric_positive(g8_setup):
    g, _, basis = g8_setup
    A = stokes_matrix(g, basis)
    assert np.max(np.abs(A - A.T)) <= 1e-9
    evals = sla.eigvalsh(0.5 * (A + A.T))
    assert evals.min() > 0


def test_stokes_apply_matches_reduced_matrix(g8_setup, rng):
    g, P, basis = g8_setup
    A = stokes_matrix(g, basis)
    c = rng.standard_normal(basis.n_dof)
    f = basis.from_coords(c)
    got = basis.to_coords(stokes_apply(f, P))
    assert np.linalg.norm(got - A @ c) <= 1e-8 * np.linalg.norm(A @ c)


def test_stokes_apply_rejects_non_solenoidal(g8_setup, rng):
    g, P, _ = g8_setup
    f = random_field(g, rng)
    with pytest.raises(ProjectionError):
        stokes_apply(f, P)


def test_stokes_heat_flow_decays_monotonically(g8_setup, rng):
    g, _, basis = g8_setup
    A = stokes_matrix(g, basis)
    lam, V = sla.eigh(0.5 * (A + A.T))
    c0 = rng.standard_normal(basis.n_dof)
    times = np.linspace(0.0, 0.05, 12)
    norms = [np.linalg.norm(V @ (np.exp(-lam * t) * (V.T @ c0))) for t in times]
    assert all(b < a for a, b in zip(norms, norms[1:]))
