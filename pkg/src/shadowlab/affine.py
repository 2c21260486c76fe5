"""Affine systems on R^d and hyperbolic torus automorphisms.

The invariant-subspace split of the matrix drives every construction: stable
and unstable offsets of a gluing orbit are propagated inside their own
subspaces, which keeps long windows numerically exact (iterating the full map
would amplify rounding error at the dominant eigenvalue rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import schur

from .core import (
    GluingCertificate,
    InternalConsistencyError,
    MapSystem,
    Orbit,
    RateFunction,
    UnsupportedMapError,
    UsageError,
    Window,
    certify,
    check_glue_windows,
)

_KERNEL_TOL = 1e-9
#: Cap on the transient horizon scanned when estimating power-norm envelopes.
_POWER_HORIZON = 200


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    """Invariant-subspace decomposition of a matrix by eigenvalue modulus.

    Eigenvalues at zero feed the kernel block, moduli below ``1 - tol`` the
    stable block, above ``1 + tol`` the unstable block, and the remaining ring
    around the unit circle the neutral block.  Each basis is orthonormal
    within its own subspace; the four subspaces are independent and span R^d.
    """

    kernel_basis: np.ndarray
    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    neutral_basis: np.ndarray
    lambda_stable: float      # largest stable modulus (0 when no stable part)
    lambda_unstable: float    # smallest unstable modulus (inf when none)
    transient_factor: float   # C >= 1 bounding restricted power norms
    tol: float

    @property
    def kernel_dim(self) -> int:
        return self.kernel_basis.shape[1]

    @property
    def stable_dim(self) -> int:
        return self.stable_basis.shape[1]

    @property
    def unstable_dim(self) -> int:
        return self.unstable_basis.shape[1]

    @property
    def neutral_dim(self) -> int:
        return self.neutral_basis.shape[1]

    @property
    def dim(self) -> int:
        return self.kernel_basis.shape[0]


def _invariant_basis(A: np.ndarray, select) -> np.ndarray:
    """Orthonormal basis of the invariant subspace for selected eigenvalues."""
    d = A.shape[0]
    try:
        _, Z, sdim = schur(A, output="real", sort=select)
    except Exception as exc:  # pragma: no cover - defensive
        raise InternalConsistencyError(f"Schur reordering failed: {exc}") from exc
    return np.ascontiguousarray(Z[:, :sdim]) if sdim else np.zeros((d, 0))


def _restricted(A: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Matrix of A on an invariant subspace in the given orthonormal basis."""
    if basis.shape[1] == 0:
        return np.zeros((0, 0))
    M = basis.T @ A @ basis
    residual = np.linalg.norm(A @ basis - basis @ M)
    scale = max(1.0, np.linalg.norm(A))
    if residual > 1e-8 * scale:
        raise InternalConsistencyError(
            f"subspace not invariant (residual {residual:.3e})")
    return M


def _power_envelope(M: np.ndarray, rate: float, inverse: bool = False) -> float:
    """sup_n ||M^n|| / rate^n (or ||M^-n|| * rate^n) over the transient horizon."""
    if M.shape[0] == 0:
        return 1.0
    if inverse:
        M = np.linalg.inv(M)
    best = 1.0
    P = np.eye(M.shape[0])
    for n in range(1, _POWER_HORIZON + 1):
        P = P @ M
        norm = np.linalg.norm(P, 2)
        ref = rate ** (-n) if inverse else rate ** n
        best = max(best, norm / ref)
    return best


def spectral_split(A: np.ndarray, tol: float = 1e-6) -> SpectralSplit:
    """Split R^d into kernel / stable / unstable / neutral invariant subspaces."""
    A = np.asarray(A, float)
    if not np.all(np.isfinite(A)):
        raise UsageError("matrix entries must be finite")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise UsageError("matrix must be square")
    if not (0.0 < tol < 0.5):
        raise UsageError("tol must lie in (0, 0.5)")

    ktol = _KERNEL_TOL * max(1.0, float(np.linalg.norm(A)))

    def modulus(x, y):
        return np.hypot(x, y)

    kernel = _invariant_basis(A, lambda x, y: modulus(x, y) <= ktol)
    stable = _invariant_basis(A, lambda x, y: (modulus(x, y) > ktol)
                              & (modulus(x, y) < 1.0 - tol))
    unstable = _invariant_basis(A, lambda x, y: modulus(x, y) > 1.0 + tol)
    neutral = _invariant_basis(A, lambda x, y: (modulus(x, y) >= 1.0 - tol)
                               & (modulus(x, y) <= 1.0 + tol))
    dims = kernel.shape[1] + stable.shape[1] + unstable.shape[1] + neutral.shape[1]
    if dims != A.shape[0]:
        raise InternalConsistencyError(
            f"subspace dimensions sum to {dims}, expected {A.shape[0]}")

    eigs = np.abs(np.linalg.eigvals(A))
    stable_mods = eigs[(eigs > ktol) & (eigs < 1.0 - tol)]
    unstable_mods = eigs[eigs > 1.0 + tol]
    lam_s = float(stable_mods.max()) if stable_mods.size else 0.0
    lam_u = float(unstable_mods.min()) if unstable_mods.size else math.inf

    C = 1.0
    if stable.shape[1]:
        C = max(C, _power_envelope(_restricted(A, stable), lam_s))
    if unstable.shape[1]:
        C = max(C, _power_envelope(_restricted(A, unstable), lam_u, inverse=True))
    return SpectralSplit(kernel, stable, unstable, neutral, lam_s, lam_u, C, tol)


def _oblique_projector_norms(split: SpectralSplit) -> tuple[float, float]:
    """Operator norms of the projections onto E^u and E^s along the rest."""
    blocks = [split.unstable_basis, split.stable_basis,
              split.kernel_basis, split.neutral_basis]
    B = np.hstack([b for b in blocks if b.shape[1]])
    Binv = np.linalg.inv(B)
    du, ds = split.unstable_dim, split.stable_dim
    kappa_u = float(np.linalg.norm(split.unstable_basis @ Binv[:du], 2)) if du else 0.0
    kappa_s = float(np.linalg.norm(split.stable_basis @ Binv[du:du + ds], 2)) if ds else 0.0
    return kappa_u, kappa_s


class AffineSystem(MapSystem):
    """T(x) = A x + offset on R^d with the euclidean metric."""

    def __init__(self, A, offset=None, tol: float = 1e-6):
        A = np.asarray(A, float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise UsageError("A must be a square matrix of dimension >= 1")
        if not np.all(np.isfinite(A)):
            raise UsageError("matrix entries must be finite")
        d = A.shape[0]
        offset = np.zeros(d) if offset is None else np.asarray(offset, float)
        if offset.shape != (d,) or not np.all(np.isfinite(offset)):
            raise UsageError(f"offset must be a finite vector of length {d}")
        self.A = A
        self.A.setflags(write=False)
        self.offset = offset
        self.offset.setflags(write=False)
        self.d = d
        self.map_id = f"affine{d}d"
        self.split = spectral_split(A, tol)
        self._kappa_u, self._kappa_s = _oblique_projector_norms(self.split)
        # contracting block = stable plus kernel, needed when following x forward
        contracting = _invariant_basis(A, lambda xr, xi: np.hypot(xr, xi) < 1.0 - tol)
        self._contracting_rate = self.split.lambda_stable if self.split.stable_dim else 0.5
        self._contracting_envelope = _power_envelope(
            _restricted(A, contracting), self._contracting_rate)
        # forward residuals of glued orbits scale with the matrix norm
        self.forward_tol = 1e-8 * max(1.0, float(np.linalg.norm(A, 2)))
        self._rate_cache: dict[int, RateFunction] = {}

    def forward(self, state):
        return self.A @ np.asarray(state, float) + self.offset

    def forward_many(self, states):
        return np.asarray(states, float) @ self.A.T + self.offset

    def metric(self, a, b) -> float:
        return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))

    def metric_many(self, a, b):
        return np.linalg.norm(np.asarray(a, float) - np.asarray(b, float), axis=-1)

    def backward_sample(self, state, rng=None):
        # exact inverse; only available when A is invertible
        if self.split.kernel_dim:
            raise UnsupportedMapError("matrix has a kernel; backward step undefined")
        return np.linalg.solve(self.A, np.asarray(state, float) - self.offset)

    def sample_ball(self, rng, radius: float):
        v = rng.normal(size=self.d)
        v /= max(np.linalg.norm(v), 1e-300)
        return radius * rng.uniform() ** (1.0 / self.d) * v

    def sample_sphere(self, rng, radius: float):
        v = rng.normal(size=self.d)
        v /= max(np.linalg.norm(v), 1e-300)
        return radius * v

    # -- gluing ------------------------------------------------------------

    def certificate_factor(self) -> float:
        """Deterministic constant making the split rate a valid error bound."""
        split = self.split
        C = max(split.transient_factor, self._contracting_envelope)
        lam_u = split.lambda_unstable
        lam_s = split.lambda_stable
        normA = float(np.linalg.norm(self.A, 2))
        factor = C
        if split.unstable_dim and split.stable_dim:
            factor = max(factor, C * self._kappa_u, C * self._kappa_s)
        if split.kernel_dim and split.unstable_dim:
            # constructions through the kernel target the first forward step
            factor = max(factor, C * C * self._kappa_u * normA / lam_u)
            if split.stable_dim:
                factor = max(factor, C * C * self._kappa_s * normA / lam_s)
            factor = max(factor, (factor + 1.0) / 2.0)
        return factor

    def rate(self, radius: int) -> RateFunction:
        split = self.split
        if split.neutral_dim:
            raise UnsupportedMapError(
                "neutral eigenvalue subspace is nonempty; no summable gluing rate exists")
        if radius not in self._rate_cache:
            C = self.certificate_factor()
            lam_u = split.lambda_unstable
            stable_like = split.stable_dim + split.kernel_dim
            base = self._contracting_rate

            def phi(k: int) -> float:
                v = 0.0
                if stable_like:
                    v += base ** abs(k)
                if split.unstable_dim:
                    v += lam_u ** (-abs(k))
                return C * v

            self._rate_cache[radius] = RateFunction.from_callable(phi, radius)
        return self._rate_cache[radius]

    def glue(self, x: Orbit, y: Orbit) -> GluingCertificate:
        return affine_glue(self.split, self, x, y)


def _solve_intersection(Bu: np.ndarray, Bs: np.ndarray, rhs: np.ndarray,
                        scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (alpha, beta) with Bu a - Bs b = rhs, minimum norm."""
    du, ds = Bu.shape[1], Bs.shape[1]
    M = np.hstack([Bu, -Bs]) if ds else Bu
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    residual = np.linalg.norm(M @ sol - rhs)
    if residual > 1e-8 * max(1.0, scale):
        raise InternalConsistencyError(
            f"stable/unstable intersection is empty (residual {residual:.3e})")
    return sol[:du], sol[du:du + ds]


def affine_glue(split: SpectralSplit, system: AffineSystem,
                x: Orbit, y: Orbit) -> GluingCertificate:
    """Glue a backward orbit x and a forward orbit y of an affine map at time 0.

    Hyperbolic case: z0 is the intersection of x0 + E^u with y0 + E^s (the
    minimum-norm coefficient solution when the intersection is not a single
    point).  Pure expansion degenerates to z0 = y0, pure contraction to the
    forward continuation of x.  A nonempty kernel shifts the construction one
    step forward so it targets y1, whose difference from T(x0) always lies in
    the invertible part.
    """
    check_glue_windows(x, y)
    if split.neutral_dim:
        raise UnsupportedMapError(
            "neutral eigenvalue subspace is nonempty; gluing is unsupported")
    n_back = -x.window.lo
    n_fwd = y.window.hi
    x0 = np.asarray(x.state(0), float)
    y0 = np.asarray(y.state(0), float)
    scale = system.metric(x0, y0)
    Bu, Bs = split.unstable_basis, split.stable_basis
    Mu = _restricted(system.A, Bu)
    Ms = _restricted(system.A, Bs)

    ks_back = np.arange(-n_back, 1)          # lo..0
    ks_fwd = np.arange(0, n_fwd + 1)          # 0..hi

    if split.unstable_dim == 0:
        # contraction (possibly with a kernel): follow x, iterate it forward
        fwd = [x0]
        for _ in range(n_fwd):
            fwd.append(system.forward(fwd[-1]))
        z_states = np.vstack([x.states[:-1], np.array(fwd)])
    elif split.kernel_dim == 0:
        # z0 = x0 + Bu alpha = y0 + Bs beta
        rhs = y0 - x0
        alpha, beta = _solve_intersection(Bu, Bs, rhs, max(scale, 1.0))
        back_off = _offset_track(Bu, Mu, alpha, ks_back, inverse=True)
        fwd_off = _offset_track(Bs, Ms, beta, ks_fwd, inverse=False) \
            if split.stable_dim else np.zeros((n_fwd + 1, system.d))
        z_back = x.states + back_off
        z_fwd = y.states + fwd_off
        z_states = np.vstack([z_back[:-1], z_fwd])
    else:
        # kernel present: target the first forward step
        x1 = system.forward(x0)
        y1 = np.asarray(y.state(1), float) if n_fwd >= 1 else system.forward(y0)
        rhs = y1 - x1
        alpha1, beta1 = _solve_intersection(Bu, Bs, rhs, max(scale, 1.0))
        alpha0 = np.linalg.solve(Mu, alpha1)
        back_off = _offset_track(Bu, Mu, alpha0, ks_back, inverse=True)
        z_back = x.states + back_off
        if n_fwd >= 1:
            fwd_off = _offset_track(Bs, Ms, beta1, np.arange(1, n_fwd + 1),
                                    inverse=False, start_power=0) \
                if split.stable_dim else np.zeros((n_fwd, system.d))
            z_fwd = y.states[1:] + fwd_off
            z_states = np.vstack([z_back, z_fwd])
        else:
            z_states = z_back

    window = Window(x.window.lo, y.window.hi)
    z = Orbit(window, z_states, map_id=system.map_id)
    backward_errors = system.metric_many(z_states[:n_back], x.states[:n_back])
    forward_errors = system.metric_many(z_states[n_back:], y.states)
    rate = system.rate(max(n_back, n_fwd))
    return certify(z, backward_errors, forward_errors, rate, scale, strong=True)


def _offset_track(B: np.ndarray, M: np.ndarray, coeff: np.ndarray,
                  ks: np.ndarray, inverse: bool, start_power: Optional[int] = None,
                  ) -> np.ndarray:
    """Offsets B M^k coeff for the given indices, iterated inside the subspace.

    ``inverse=True`` walks k = 0, -1, -2, ... (applied to the reversed index
    array); powers never leave the subspace, so backward stable growth cannot
    contaminate the result.
    """
    if B.shape[1] == 0 or coeff.size == 0:
        return np.zeros((len(ks), B.shape[0]))
    out = np.empty((len(ks), B.shape[0]))
    if inverse:
        Minv = np.linalg.inv(M)
        c = coeff.copy()
        # ks runs lo..0; fill from the right (k = 0) downward
        out[len(ks) - 1] = B @ c
        for j in range(len(ks) - 2, -1, -1):
            c = Minv @ c
            out[j] = B @ c
    else:
        first = ks[0] if start_power is None else start_power
        c = coeff.copy()
        for _ in range(int(first)):
            c = M @ c
        out[0] = B @ c
        for j in range(1, len(ks)):
            c = M @ c
            out[j] = B @ c
    return out


def neutral_counterexample(split: SpectralSplit, system: AffineSystem,
                           x: Orbit, magnitude: float,
                           direction: Optional[np.ndarray] = None) -> Orbit:
    """The orbit offset from x by a neutral vector of the given magnitude.

    Such a pair cannot be glued with any summable rate: the offset neither
    decays backward nor forward, which tests verify by grid search.
    """
    if split.neutral_dim == 0:
        raise UsageError("map has no neutral subspace")
    Bn = split.neutral_basis
    Mn = _restricted(system.A, Bn)
    if direction is None:
        coeff = np.zeros(split.neutral_dim)
        coeff[0] = 1.0
    else:
        direction = np.asarray(direction, float)
        coeff, *_ = np.linalg.lstsq(Bn, direction, rcond=None)
        norm = np.linalg.norm(Bn @ coeff)
        if norm < 1e-12:
            raise UsageError("direction has no neutral component")
        coeff /= norm
    coeff = magnitude * coeff
    w = x.window
    ks = np.arange(w.lo, w.hi + 1)
    # split the track at 0: backward powers via the inverse, forward direct
    n_back = -w.lo
    back = _offset_track(Bn, Mn, coeff, ks[:n_back + 1], inverse=True)
    fwd = _offset_track(Bn, Mn, coeff, ks[n_back:], inverse=False, start_power=0)
    offsets = np.vstack([back[:-1], fwd])
    return Orbit(w, x.states + offsets, map_id=system.map_id)


# ---------------------------------------------------------------------------
# torus automorphisms


_LIFT_SHIFTS = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], float)


class TorusSystem(MapSystem):
    """T(x) = A x mod 1 on the 2-torus for an integer matrix with |det| = 1.

    Distances are measured in the metric adapted to the map: euclidean length
    of the eigenbasis coordinates of the minimal lift, under which one step
    contracts/expands exactly by the eigenvalue moduli.
    """

    def __init__(self, A):
        A = np.asarray(A)
        if A.shape != (2, 2) or not np.all(A == np.round(A)):
            raise UsageError("need an integer 2x2 matrix")
        A = A.astype(float)
        det = round(float(np.linalg.det(A)))
        if abs(det) != 1:
            raise UsageError("matrix determinant must be +-1")
        eigvals, eigvecs = np.linalg.eig(A)
        if np.any(np.abs(np.imag(eigvals)) > 1e-12) or \
                np.any(np.abs(np.abs(np.real(eigvals)) - 1.0) < 1e-9):
            raise UnsupportedMapError(
                "matrix is not hyperbolic: eigenvalue moduli touch the unit circle")
        eigvals = np.real(eigvals)
        eigvecs = np.real(eigvecs)
        iu = int(np.argmax(np.abs(eigvals)))
        s = 1 - iu
        self.A = A
        self.A.setflags(write=False)
        self.det = det
        self.lambda_unstable_signed = float(eigvals[iu])
        self.lambda_stable_signed = float(eigvals[s])
        self.expansion = abs(self.lambda_unstable_signed)
        self.log_expansion = math.log(self.expansion)
        eu = eigvecs[:, iu] / np.linalg.norm(eigvecs[:, iu])
        es = eigvecs[:, s] / np.linalg.norm(eigvecs[:, s])
        self.basis = np.column_stack([eu, es])
        self.basis.setflags(write=False)
        self.coords = np.linalg.inv(self.basis)
        self.coords.setflags(write=False)
        Ainv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det
        self.A_inverse = np.round(Ainv)
        self.A_inverse.setflags(write=False)
        self.map_id = f"torus[[{int(A[0,0])},{int(A[0,1])}],[{int(A[1,0])},{int(A[1,1])}]]"
        self.d = 2
        self.forward_tol = 1e-9 * max(1.0, float(np.linalg.norm(A, 2)))
        self._rate_cache: dict[int, RateFunction] = {}
        # any non-central lift has euclidean length >= 1/2, hence adapted
        # length >= sigma_min / 2: central lifts below that are already minimal
        self._fast_metric_threshold = 0.5 * float(np.linalg.svd(self.coords,
                                                                compute_uv=False)[-1])

    def forward(self, state):
        return (self.A @ np.asarray(state, float)) % 1.0

    def forward_many(self, states):
        return (np.asarray(states, float) @ self.A.T) % 1.0

    def backward_sample(self, state, rng=None):
        return (self.A_inverse @ np.asarray(state, float)) % 1.0

    def minimal_lift(self, diff) -> np.ndarray:
        """Representative of a torus difference with minimal adapted length.

        Ties break toward the lexicographically smaller integer shift.
        """
        base = (np.asarray(diff, float) + 0.5) % 1.0 - 0.5
        cands = base + _LIFT_SHIFTS
        lengths = np.linalg.norm(cands @ self.coords.T, axis=1)
        return cands[int(np.argmin(lengths))]

    def metric(self, a, b) -> float:
        lift = self.minimal_lift(np.asarray(a, float) - np.asarray(b, float))
        return float(np.linalg.norm(self.coords @ lift))

    def metric_many(self, a, b):
        diff = (np.asarray(a, float) - np.asarray(b, float) + 0.5) % 1.0 - 0.5
        coords = diff @ self.coords.T
        out = np.sqrt(np.einsum("ij,ij->i", coords, coords))
        big = out > self._fast_metric_threshold
        if np.any(big):
            cands = diff[big, None, :] + _LIFT_SHIFTS[None, :, :]
            cc = cands @ self.coords.T
            lengths = np.sqrt(np.einsum("ijk,ijk->ij", cc, cc))
            out[big] = lengths.min(axis=1)
        return out

    def apply_noise(self, state, noise):
        return (np.asarray(state, float) + noise) % 1.0

    def in_domain(self, state) -> bool:
        s = np.asarray(state, float)
        return s.shape == (2,) and bool(np.all(np.isfinite(s)))

    def sample_ball(self, rng, radius: float):
        # uniform in the adapted-metric ball: a disk in eigen coordinates
        v = rng.normal(size=2)
        v /= max(np.linalg.norm(v), 1e-300)
        return self.basis @ (radius * math.sqrt(rng.uniform()) * v)

    def sample_sphere(self, rng, radius: float):
        v = rng.normal(size=2)
        v /= max(np.linalg.norm(v), 1e-300)
        return self.basis @ (radius * v)

    def rate(self, radius: int) -> RateFunction:
        if radius not in self._rate_cache:
            lam = self.log_expansion
            self._rate_cache[radius] = RateFunction.from_callable(
                lambda k: math.exp(-lam * abs(k)), radius)
        return self._rate_cache[radius]

    def glue(self, x: Orbit, y: Orbit) -> GluingCertificate:
        """Intersect the unstable line through x0 with the stable line through y0.

        The minimal lift of y0 - x0 splits into eigen components; the unstable
        share is attached to x backward, the stable share to y forward, each
        decaying exactly by the eigenvalue per step.
        """
        check_glue_windows(x, y)
        n_back = -x.window.lo
        n_fwd = y.window.hi
        x0 = np.asarray(x.state(0), float)
        y0 = np.asarray(y.state(0), float)
        lift = self.minimal_lift(y0 - x0)
        cu, cs = self.coords @ lift
        scale = float(np.hypot(cu, cs))

        eu = self.basis[:, 0]
        es = self.basis[:, 1]
        back_pow = self.lambda_unstable_signed ** np.arange(-n_back, 1).astype(float)
        z_back = (x.states + np.outer(back_pow * cu, eu)) % 1.0
        fwd_pow = self.lambda_stable_signed ** np.arange(0, n_fwd + 1).astype(float)
        z_fwd = (y.states - np.outer(fwd_pow * cs, es)) % 1.0
        z_states = np.vstack([z_back[:-1], z_fwd])

        z = Orbit(Window(x.window.lo, y.window.hi), z_states, map_id=self.map_id)
        backward_errors = self.metric_many(z_states[:n_back], x.states[:n_back])
        forward_errors = self.metric_many(z_states[n_back:], y.states)
        rate = self.rate(max(n_back, n_fwd))
        return certify(z, backward_errors, forward_errors, rate, scale, strong=True)


def cat_map() -> TorusSystem:
    """The standard hyperbolic torus automorphism [[2, 1], [1, 1]]."""
    return TorusSystem([[2, 1], [1, 1]])
