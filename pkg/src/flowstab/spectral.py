"""Modal analysis of the linearized flow operator.

The reduced linearization M = -nu A_r - A_lin + sigma I is a real dense
matrix.  This module splits its spectrum across the imaginary axis and
produces, for the unstable part,

* a basis Phi of generalized eigenvectors organized in ascending chains
  ((M - lambda) e_{k+1} = e_k, e_1 an eigenvector),
* the dual basis Psi with Psi^H Phi = I, whose chain-end columns are true
  eigenvectors of M^H,
* the spectral projector P_N = Re(Phi Psi^H) onto the unstable subspace
  along the stable one.

Eigenvalues closer than tau_eig are treated as one cluster; the chain
structure inside a cluster is decided by singular-value thresholds with an
explicit ambiguity band, so borderline rank decisions raise instead of
silently guessing.  Complex clusters are computed once for the upper
half-plane member and mirrored by conjugation, which keeps conj(Phi)
equal to Phi times a permutation; together with real chains for real
clusters this makes the projector exactly real up to round-off.
"""

import numpy as np
import scipy.linalg as sla

from .errors import BiorthogonalityError, ConfigError, SpectralAmbiguityError
from .helmholtz import stokes_matrix
from .steady import advection_jacobian

_AMBIGUITY_FACTOR = 3.0


class JordanCluster:
    """One eigenvalue cluster of the unstable spectrum."""

    __slots__ = ("eigenvalue", "size", "chain_lengths", "start", "conj_partner")

    def __init__(self, eigenvalue, size, chain_lengths, start, conj_partner=None):
        self.eigenvalue = complex(eigenvalue)
        self.size = int(size)
        self.chain_lengths = list(chain_lengths)
        self.start = int(start)
        self.conj_partner = conj_partner

    @property
    def geometric_multiplicity(self):
        return len(self.chain_lengths)

    def chain_slices(self):
        """Column ranges of the chains inside the global basis."""
        out = []
        pos = self.start
        for length in self.chain_lengths:
            out.append(slice(pos, pos + length))
            pos += length
        return out

    def cycle_end_positions(self):
        """Global column indices whose dual vectors are adjoint eigenvectors."""
        return [s.stop - 1 for s in self.chain_slices()]

    def __repr__(self):
        return (
            f"JordanCluster(eig={self.eigenvalue:.6g}, "
            f"chains={self.chain_lengths})"
        )


class SpectralData:
    """Unstable-part decomposition of a real matrix."""

    __slots__ = (
        "matrix",
        "eigenvalues",
        "n_unstable",
        "phi",
        "psi",
        "jordan",
        "clusters",
        "projector",
        "gamma0",
        "tau_eig",
        "defect_residual",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected fields {sorted(kw)}")

    @property
    def max_geometric_multiplicity(self):
        if not self.clusters:
            return 0
        return max(c.geometric_multiplicity for c in self.clusters)

    def jordan_structure(self):
        return [(c.eigenvalue, tuple(c.chain_lengths)) for c in self.clusters]

    def modal_coefficients(self, z):
        """Coordinates of z in the unstable basis: Psi^H z."""
        return self.psi.conj().T @ np.asarray(z)

    def project_unstable(self, z):
        """Real projection of a real reduced vector onto the unstable space."""
        return self.projector @ np.asarray(z)


def _cluster_eigenvalues(lams, tau):
    """Union-find grouping of eigenvalues at distance <= tau."""
    n = len(lams)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        for b in range(a + 1, n):
            if abs(lams[a] - lams[b]) <= tau:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra
    groups = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return list(groups.values())


def _kernel_flag(C, theta):
    """Orthonormal kernel bases of C^k at thresholds theta^k.

    Returns (kernels, dims); raises when a singular value falls inside the
    ambiguity band around any threshold.
    """
    n = C.shape[0]
    kernels = [np.zeros((n, 0), dtype=C.dtype)]
    dims = [0]
    power = np.eye(n, dtype=C.dtype)
    for k in range(1, n + 1):
        power = power @ C
        u, s, vh = sla.svd(power)
        thr = theta**k
        inside = (s > thr / _AMBIGUITY_FACTOR) & (s < thr * _AMBIGUITY_FACTOR)
        if inside.any():
            raise SpectralAmbiguityError(
                f"singular value {s[inside][0]:.3e} of the cluster nilpotent "
                f"power {k} sits inside the decision band around {thr:.3e}",
                suggested_tau=None,
            )
        rank = int(np.sum(s > thr))
        kernels.append(vh[rank:].conj().T)
        dims.append(n - rank)
        if rank == 0:
            return kernels, dims
    raise SpectralAmbiguityError(
        "cluster block is not nilpotent at the requested tolerance; "
        "the clustering likely merged distinct eigenvalues",
        suggested_tau=theta / 10.0,
    )


def _phase_canonical(chain):
    """Scale a chain so its eigenvector has unit norm and canonical phase."""
    e1 = chain[:, 0]
    nrm = np.linalg.norm(e1)
    chain = chain / nrm
    lead = np.argmax(np.abs(chain[:, 0]))
    z = chain[lead, 0]
    if abs(z) > 0:
        chain = chain * (np.abs(z) / z)
    return chain


def _nilpotent_chains(C, theta):
    """Jordan chains of an (approximately) nilpotent matrix.

    Chains are returned as matrices with ascending columns [e_1 ... e_h],
    C e_{k+1} = e_k exactly by construction, taller chains first.
    """
    n = C.shape[0]
    if n == 1:
        return [np.ones((1, 1), dtype=C.dtype)]
    kernels, dims = _kernel_flag(C, theta)
    m = len(dims) - 1  # nilpotency index at tolerance
    tops = []  # list of (height, vector)
    for k in range(m, 0, -1):
        w_k = dims[k] - dims[k - 1]
        w_next = dims[k + 1] - dims[k] if k + 1 < len(dims) else 0
        n_new = w_k - w_next
        if n_new < 0:
            raise SpectralAmbiguityError(
                "inconsistent kernel dimensions in the chain analysis"
            )
        if n_new == 0:
            continue
        # candidates: ker C^k; remove ker C^(k-1) and descendants of taller tops
        span = [kernels[k - 1]]
        for h, v in tops:
            w = v
            for _ in range(h - k):
                w = C @ w
            span.append(w[:, None] / np.linalg.norm(w))
        S = np.hstack(span)
        if S.shape[1]:
            q, _ = sla.qr(S, mode="economic")
            resid = kernels[k] - q @ (q.conj().T @ kernels[k])
        else:
            resid = kernels[k]
        u, s, _ = sla.svd(resid, full_matrices=False)
        if s[n_new - 1] < 0.1:
            raise SpectralAmbiguityError(
                "chain top selection is ill conditioned "
                f"(complement singular value {s[n_new - 1]:.3e})"
            )
        for j in range(n_new):
            tops.append((k, u[:, j]))
    total = sum(h for h, _ in tops)
    if total != n:
        raise SpectralAmbiguityError(
            f"chain lengths sum to {total}, expected {n}"
        )
    chains = []
    for h, v in tops:
        cols = [v]
        for _ in range(h - 1):
            cols.append(C @ cols[-1])
        chain = np.column_stack(cols[::-1])  # ascending: eigenvector first
        chains.append(_phase_canonical(chain))
    return chains


def _cluster_subspace(M, members, tau):
    """Leading Schur basis and block for one cluster (real or complex)."""
    members = np.asarray(members)
    center = members.mean()
    if abs(center.imag) <= tau:
        center = complex(center.real, 0.0)

        def pick_real(wr, wi):
            lam = wr + 1j * wi
            return np.min(np.abs(lam - members)) <= tau

        T, Z, sdim = sla.schur(M, output="real", sort=pick_real)
        T = T.astype(float)
        Z = Z.astype(float)
    else:

        def pick_cplx(w):
            return np.min(np.abs(w - members)) <= tau

        T, Z, sdim = sla.schur(M.astype(complex), output="complex", sort=pick_cplx)
    k = len(members)
    if sdim != k:
        raise SpectralAmbiguityError(
            f"invariant-subspace selection found {sdim} eigenvalues for a "
            f"cluster of {k}; clusters are not separated at tau={tau:.3e}",
            suggested_tau=tau / 10.0,
        )
    return center, Z[:, :k], T[:k, :k]


def unstable_decomposition(M, tau_eig=None):
    """Split a real matrix across the imaginary axis.

    Returns SpectralData with chains, dual basis and projector for the
    eigenvalues with positive real part.  tau_eig is the absolute clustering
    distance; the default is 1e-6 times the largest unstable magnitude
    (floor 1).  Decisions within a factor 3 of any threshold raise
    SpectralAmbiguityError rather than guessing.
    """
    M = np.asarray(M, float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ConfigError("expected a square matrix")
    lams = sla.eigvals(M)
    unstable = lams[lams.real > 0]
    if tau_eig is None:
        scale = max(1.0, float(np.abs(unstable).max()) if len(unstable) else 1.0)
        tau_eig = 1e-6 * scale
    # classification must be decisive: no eigenvalue near the axis, no
    # stable eigenvalue near an unstable one
    near_axis = np.abs(lams.real) <= tau_eig
    if near_axis.any():
        raise SpectralAmbiguityError(
            f"eigenvalue {lams[near_axis][0]:.6g} sits within tau_eig of the "
            "imaginary axis; stability split is ambiguous",
            suggested_tau=tau_eig / 10.0,
        )
    stable = lams[lams.real < 0]
    if len(unstable) and len(stable):
        gap = np.min(np.abs(unstable[:, None] - stable[None, :]))
        if gap <= _AMBIGUITY_FACTOR * tau_eig:
            raise SpectralAmbiguityError(
                "an unstable eigenvalue lies within the decision band of a "
                f"stable one (distance {gap:.3e})",
                suggested_tau=tau_eig / 10.0,
            )
    N = len(unstable)
    gamma0 = float(-stable.real.max()) if len(stable) else None
    order = np.lexsort((np.abs(unstable.imag), -unstable.real))
    unstable = unstable[order]

    if N == 0:
        return SpectralData(
            matrix=M,
            eigenvalues=lams,
            n_unstable=0,
            phi=np.zeros((n, 0), complex),
            psi=np.zeros((n, 0), complex),
            jordan=np.zeros((0, 0), complex),
            clusters=[],
            projector=np.zeros((n, n)),
            gamma0=gamma0,
            tau_eig=tau_eig,
            defect_residual=0.0,
        )

    groups = _cluster_eigenvalues(unstable, tau_eig)
    # cross-cluster separation must clear the ambiguity band
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            d = np.min(
                np.abs(unstable[groups[a]][:, None] - unstable[groups[b]][None, :])
            )
            if d <= _AMBIGUITY_FACTOR * tau_eig:
                raise SpectralAmbiguityError(
                    f"clusters separated by {d:.3e} at tau_eig={tau_eig:.3e}; "
                    "the grouping is ambiguous",
                    suggested_tau=d / 10.0,
                )

    # canonical cluster order: descending real part, then ascending |imag|;
    # lower half-plane members are dropped here and restored by conjugation
    reps = []
    for idx_list in groups:
        members = unstable[idx_list]
        center = members.mean()
        reps.append((center, members))
    reps.sort(key=lambda cm: (-cm[0].real, abs(cm[0].imag), cm[0].imag < 0))

    theta = _AMBIGUITY_FACTOR * tau_eig
    blocks = []  # (center, chains list) in final column order
    clusters = []
    start = 0
    pending = {}
    for center, members in reps:
        if center.imag < -tau_eig:
            # lower half-plane: mirror of an already computed cluster
            key = complex(center.conjugate())
            match = None
            for kc in list(pending):
                if abs(kc - key) <= tau_eig:
                    match = kc
                    break
            if match is None:
                raise SpectralAmbiguityError(
                    f"conjugate partner of cluster at {center:.6g} not found; "
                    "the spectrum of a real matrix must be symmetric"
                )
            src_idx, src_chains = pending.pop(match)
            chains = [c.conj() for c in src_chains]
            cl = JordanCluster(
                center,
                sum(c.shape[1] for c in chains),
                [c.shape[1] for c in chains],
                start,
                conj_partner=src_idx,
            )
            clusters[src_idx].conj_partner = len(clusters)
        else:
            _, Q, T = _cluster_subspace(M, members, tau_eig)
            C = T - center * np.eye(len(members), dtype=T.dtype)
            local = _nilpotent_chains(C, theta)
            chains = [Q @ c for c in local]
            cl = JordanCluster(
                center,
                sum(c.shape[1] for c in chains),
                [c.shape[1] for c in chains],
                start,
            )
            if center.imag > tau_eig:
                pending[complex(center)] = (len(clusters), chains)
        blocks.append((center, chains))
        clusters.append(cl)
        start += cl.size
    if pending:
        raise SpectralAmbiguityError(
            "upper half-plane cluster without a lower half-plane partner"
        )

    phi = np.hstack([np.hstack(chains) for _, chains in blocks]).astype(complex)
    jordan = np.zeros((N, N), complex)
    for cl in clusters:
        for s in cl.chain_slices():
            for col in range(s.start, s.stop):
                jordan[col, col] = cl.eigenvalue
                if col + 1 < s.stop:
                    jordan[col, col + 1] = 1.0

    # dual basis from the adjoint's unstable Schur subspace
    Tw, W, sdim = sla.schur(
        M.conj().T.astype(complex), output="complex", sort=lambda w: w.real > 0
    )
    if sdim != N:
        raise SpectralAmbiguityError(
            f"adjoint Schur selected {sdim} unstable eigenvalues, expected {N}"
        )
    W = W[:, :N]
    S = W.conj().T @ phi
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e10:
        raise BiorthogonalityError(
            f"dual-basis coupling is ill conditioned (cond={cond:.3e}); "
            "the unstable basis does not pair with the adjoint subspace"
        )
    psi = W @ np.linalg.inv(S.conj().T)

    proj = phi @ psi.conj().T
    imag_size = float(np.linalg.norm(proj.imag))
    real_size = max(1.0, float(np.linalg.norm(proj.real)))
    if imag_size > 1e-8 * real_size:
        raise BiorthogonalityError(
            f"spectral projector has imaginary residue {imag_size:.3e}; "
            "conjugate symmetry of the basis is broken"
        )
    defect = float(np.linalg.norm(M @ phi - phi @ jordan, "fro"))
    return SpectralData(
        matrix=M,
        eigenvalues=lams,
        n_unstable=N,
        phi=phi,
        psi=psi,
        jordan=jordan,
        clusters=clusters,
        projector=proj.real,
        gamma0=gamma0,
        tau_eig=tau_eig,
        defect_residual=defect,
    )


class OseenOperator:
    """Reduced linearization around a base flow, with a stability shift.

    The matrix is M = -nu A_r - A_lin(y_e) + sigma I on the divergence-free
    coordinates; sigma > 0 moves the whole spectrum right and is the handle
    used to manufacture configurations with a prescribed number of unstable
    modes.
    """

    def __init__(self, grid, basis, base_flow, nu, sigma=0.0, stokes=None):
        if nu <= 0:
            raise ConfigError(f"viscosity must be positive, got nu={nu}")
        self.grid = grid
        self.basis = basis
        self.nu = float(nu)
        self.sigma = float(sigma)
        a_r = stokes_matrix(grid, basis) if stokes is None else stokes
        self.stokes = a_r
        self.base_flow = base_flow
        self.matrix = (
            -self.nu * a_r
            - advection_jacobian(basis, base_flow)
            + self.sigma * np.eye(basis.n_dof)
        )

    def spectrum(self, tau_eig=None):
        return unstable_decomposition(self.matrix, tau_eig=tau_eig)
