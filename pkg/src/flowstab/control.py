"""Finite-dimensional feedback acting through an interior window.

The control is a combination sum_k mu_k(t) u_k of finitely many real
actuator fields supported in the window omega.  Its modal influence on the
unstable subspace is the matrix

    U[a, k] = (u_k, psi_a)_omega,

computed here as psi^H B_inj so it agrees with the injected control to
round-off.  Controllability of the unstable part only requires the rows of
U belonging to true adjoint eigenvectors (the chain-end dual columns) to
have full row rank cluster by cluster, which is why the number of
actuators can be as small as the largest geometric multiplicity.

Pole placement assigns real target eigenvalues by eigenstructure
assignment; with real targets, real mixing coefficients and the
conjugate-canonical modal bases the resulting gain acts as a real operator
on real states, and the same feedback can be written as window
measurements (w, p_k)_omega of the unstable component against recovered
dual fields p_k.
"""

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, PlacementError, SynthesisError
from .grid import Field, apply_mask, from_centers
from .grid import norm as field_norm
from .norms import omega_inner

_MAX_MODES = 64


def injection_matrix(basis, actuators, mask):
    """Columns B^T pack(mask(u_k)): reduced images of the masked actuators."""
    if not actuators:
        return np.zeros((basis.n_dof, 0))
    cols = [basis.B.T @ apply_mask(u, mask).pack() for u in actuators]
    return np.column_stack(cols)


def influence_matrix(data, binj):
    """Modal influence U = psi^H B_inj of the actuators on the unstable part."""
    return data.psi.conj().T @ binj


def rank_test(data, U, tau_rank=1e-8):
    """Full-row-rank check of the chain-end influence rows per cluster.

    Returns (ok, margins); margins[i] is the smallest-to-largest singular
    value ratio of the cluster's chain-end block, 0 when the block cannot
    have full row rank at all.
    """
    margins = []
    ok = True
    K = U.shape[1]
    for c in data.clusters:
        rows = U[c.cycle_end_positions(), :]
        ell = rows.shape[0]
        if K < ell:
            margins.append(0.0)
            ok = False
            continue
        s = sla.svdvals(rows)
        if s[0] == 0.0:
            margins.append(0.0)
            ok = False
            continue
        m = float(s[ell - 1] / s[0])
        margins.append(m)
        ok = ok and m > tau_rank
    return ok, margins


def kalman_matrix(jordan, U):
    """Controllability matrix [U, JU, ..., J^(N-1)U]."""
    N = jordan.shape[0]
    if N > _MAX_MODES:
        raise ConfigError(
            f"{N} unstable modes exceed the supported maximum {_MAX_MODES}"
        )
    blocks = []
    W = U.copy()
    for _ in range(N):
        blocks.append(W)
        W = jordan @ W
    return np.hstack(blocks) if blocks else np.zeros((0, 0))


def kalman_rank(jordan, U, tau_rank=1e-8):
    km = kalman_matrix(jordan, U)
    if km.size == 0:
        return 0
    s = sla.svdvals(km)
    return int(np.sum(s > tau_rank * s[0]))


def hautus_margins(data, U):
    """sigma_min/sigma_max of [J - lambda I, U] for each cluster eigenvalue."""
    N = data.n_unstable
    out = []
    for c in data.clusters:
        pencil = np.hstack(
            [data.jordan - c.eigenvalue * np.eye(N, dtype=complex), U]
        )
        s = sla.svdvals(pencil)
        out.append(float(s[N - 1] / s[0]) if s[0] > 0 else 0.0)
    return out


def window_field(grid, mask, rng):
    """Unit-norm random field supported on the window cells."""
    uc = np.zeros(grid.shape_p)
    vc = np.zeros(grid.shape_p)
    m = mask.indicator
    uc[m] = rng.standard_normal(int(m.sum()))
    vc[m] = rng.standard_normal(int(m.sum()))
    f = from_centers(grid, uc, vc)
    n = field_norm(f)
    if n == 0.0:
        raise SynthesisError("degenerate actuator draw")
    return (1.0 / n) * f


class ActuatorSet:
    """Chosen actuator fields with their reduced injections and influence."""

    __slots__ = ("fields", "mask", "injections", "influence", "margins")

    def __init__(self, fields, mask, injections, influence, margins):
        self.fields = list(fields)
        self.mask = mask
        self.injections = injections
        self.influence = influence
        self.margins = margins

    @property
    def n_actuators(self):
        return len(self.fields)


def choose_actuators(
    grid,
    basis,
    data,
    mask,
    n_actuators=None,
    n_trials=40,
    seed=0,
    tau_rank=1e-8,
):
    """Randomized search for actuators with the best controllability margin.

    Draws n_trials candidate sets of window-supported fields and keeps the
    one maximizing the worst per-cluster rank margin.  The default set size
    is the largest geometric multiplicity, the smallest count for which the
    rank test can pass at all.
    """
    K = n_actuators if n_actuators is not None else max(
        1, data.max_geometric_multiplicity
    )
    if K < 1:
        raise ConfigError("need at least one actuator")
    rng = np.random.default_rng(seed)
    best = None
    best_score = -np.inf
    for _ in range(n_trials):
        fields = [window_field(grid, mask, rng) for _ in range(K)]
        binj = injection_matrix(basis, fields, mask)
        U = influence_matrix(data, binj)
        _, margins = rank_test(data, U, tau_rank)
        score = min(margins) if margins else np.inf
        if score > best_score:
            best_score = score
            best = ActuatorSet(fields, mask, binj, U, margins)
        if not data.clusters:
            break
    if data.clusters and best_score <= tau_rank:
        raise SynthesisError(
            f"no actuator draw reached the rank margin {tau_rank:.1e} "
            f"(best {best_score:.3e}); enlarge the window or the set",
            best_margin=best_score,
        )
    return best


class FeedbackLaw:
    """Placed feedback in both modal-gain and window-measurement form."""

    __slots__ = (
        "actuators",
        "gains_modal",
        "gains_real",
        "targets",
        "p_coeffs",
        "p_fields",
        "data",
        "basis",
        "_fmat",
    )

    def __init__(
        self, actuators, gains_modal, gains_real, targets, p_coeffs, p_fields,
        data, basis,
    ):
        self.actuators = actuators
        self.gains_modal = gains_modal
        self.gains_real = gains_real
        self.targets = np.asarray(targets, float)
        self.p_coeffs = p_coeffs
        self.p_fields = p_fields
        self.data = data
        self.basis = basis
        self._fmat = None

    @property
    def n_actuators(self):
        return self.actuators.n_actuators

    def measure(self, z):
        """Control amplitudes from window measurements of the unstable part.

        Literal path: project z, lift to a field, pair with each recovered
        dual field over the window.
        """
        if self.data.n_unstable == 0:
            return np.zeros(self.n_actuators)
        w = self.data.projector @ np.asarray(z, float)
        w_field = self.basis.from_coords(w)
        mu = np.array(
            [
                omega_inner(w_field, p, self.actuators.mask).real
                for p in self.p_fields
            ]
        )
        return mu

    def measure_fast(self, z):
        """Same amplitudes through the condensed real gain matrix."""
        return self.gains_real @ np.asarray(z, float)

    def inject(self, mu):
        """Reduced image of the masked control field sum_k mu_k u_k."""
        return self.actuators.injections @ np.asarray(mu)

    def control_field(self, mu):
        total = Field.zeros(self.actuators.mask.grid)
        for m, u in zip(mu, self.actuators.fields):
            total = total + float(m) * u
        return total

    def feedback_matrix(self):
        """Dense reduced operator B_inj gains_real added to the dynamics."""
        if self._fmat is None:
            self._fmat = self.actuators.injections @ self.gains_real
        return self._fmat

    def closed_loop(self, matrix):
        return matrix + self.feedback_matrix()


def assign_spectrum(jordan, U, targets, seed=0, max_tries=8):
    """Gain Q with eig(J + U Q) equal to the given distinct real targets.

    Eigenstructure assignment: for each target t_j pick a real mixing
    vector g_j, set x_j = -(J - t_j)^(-1) U g_j, and solve Q X = G.  Real
    targets with real G keep the resulting feedback real on real states.
    """
    J = np.asarray(jordan, complex)
    N = J.shape[0]
    K = U.shape[1]
    targets = np.asarray(targets, float)
    if targets.shape != (N,) or len(np.unique(targets)) != N:
        raise ConfigError("need exactly N distinct real targets")
    if np.any(targets >= 0):
        raise ConfigError("targets must lie strictly in the left half-plane")
    rng = np.random.default_rng(seed)
    eye = np.eye(N, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(targets))))
    last_cond = None
    for attempt in range(max_tries):
        if K == 1 and attempt == 0:
            G = np.ones((1, N))
        else:
            G = rng.standard_normal((K, N))
        X = np.empty((N, N), complex)
        try:
            for j, t in enumerate(targets):
                X[:, j] = -sla.solve(J - t * eye, U @ G[:, j])
        except sla.LinAlgError:
            continue
        last_cond = np.linalg.cond(X)
        if not np.isfinite(last_cond) or last_cond > 1e8:
            continue
        Q = G @ np.linalg.inv(X)
        closed = sla.eigvals(J + U @ Q)
        err = np.max(np.abs(np.sort(closed.real) - np.sort(targets)))
        if err <= 1e-8 * scale and np.max(np.abs(closed.imag)) <= 1e-8 * scale:
            return Q
    raise PlacementError(
        f"no well-conditioned assignment found in {max_tries} tries",
        condition=last_cond,
    )


def place_poles(
    data,
    basis,
    actuator_set,
    gamma,
    delta_sep=None,
    tau_rank=1e-8,
    seed=0,
    max_tries=8,
):
    """Assign the unstable spectrum to real targets left of -gamma.

    Targets are -gamma - j*delta_sep, j = 0..N-1; mixing vectors are real,
    so the closed-loop reduced operator is real and its spectrum is exactly
    the targets united with the untouched stable spectrum.
    """
    if gamma <= 0:
        raise ConfigError(f"decay rate must be positive, got gamma={gamma}")
    N = data.n_unstable
    K = actuator_set.n_actuators
    U = actuator_set.influence
    if N == 0:
        zeros_r = np.zeros((K, basis.n_dof))
        return FeedbackLaw(
            actuator_set,
            np.zeros((K, 0), complex),
            zeros_r,
            np.zeros(0),
            np.zeros((K, 0), complex),
            [],
            data,
            basis,
        )
    ok, margins = rank_test(data, U, tau_rank)
    if not ok:
        raise PlacementError(
            "unstable modes are not controllable through these actuators "
            f"(per-cluster margins {['%.2e' % m for m in margins]})"
        )
    if delta_sep is None:
        # Separation must track the open-loop spectral spread, not just
        # gamma: targets clustered far below widely spread eigenvalues give
        # a nearly defective closed loop whose spectrum cannot be verified.
        spread = max(abs(data.eigenvalues[k].real) for k in range(N))
        delta = max(0.1 * gamma, 0.1 * spread)
    else:
        delta = float(delta_sep)
    if delta <= 0:
        raise ConfigError("target separation must be positive")
    targets = -gamma - delta * np.arange(N)
    Q = assign_spectrum(data.jordan, U, targets, seed=seed, max_tries=max_tries)

    gains_real_c = Q @ data.psi.conj().T
    leak = np.linalg.norm(gains_real_c.imag)
    scale = max(1.0, np.linalg.norm(gains_real_c.real))
    if leak > 1e-8 * scale:
        raise PlacementError(
            f"gain operator has imaginary residue {leak:.3e}; "
            "modal bases are not conjugate-canonical"
        )
    gains_real = gains_real_c.real

    # measurement form: p_k = sum_b c_kb psi_b with G_w^T conj(c_k) = q_k
    phi_fields = [basis.from_coords(data.phi[:, a]) for a in range(N)]
    psi_fields = [basis.from_coords(data.psi[:, b]) for b in range(N)]
    mask = actuator_set.mask
    G_w = np.empty((N, N), complex)
    for b in range(N):
        for a in range(N):
            G_w[b, a] = omega_inner(phi_fields[a], psi_fields[b], mask)
    cond_gw = np.linalg.cond(G_w)
    if not np.isfinite(cond_gw) or cond_gw > 1e12:
        raise SynthesisError(
            f"window Gram of the modal pair is ill conditioned ({cond_gw:.3e}); "
            "the window does not observe every unstable mode"
        )
    p_coeffs = np.conj(sla.solve(G_w.T, Q.T)).T
    p_fields = []
    for k in range(K):
        p_fields.append(basis.from_coords(data.psi @ p_coeffs[k]))

    return FeedbackLaw(
        actuator_set, Q, gains_real, targets, p_coeffs, p_fields, data, basis
    )
