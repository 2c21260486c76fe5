"""Shared machinery for finite windows of trajectories and pseudo-trajectories.

Bi-infinite index sets are represented on finite windows that always contain
index 0.  Limit quantities (running averages, densities) are reported at the
largest radius a window supports together with a profile over a geometric
ladder of radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

#: Gaps measured from raw state data below this size are treated as zero so
#: that float noise never creates spurious perturbation moments.
GAP_NOISE_FLOOR = 1e-12


class DomainError(ValueError):
    """A state or parameter lies outside the map's phase space."""


class UsageError(ValueError):
    """An operation was invoked with incompatible arguments."""


class UnsupportedMapError(RuntimeError):
    """The map cannot support the requested construction."""


class NonGluableError(RuntimeError):
    """A gluing step failed; carries the offending junction and round."""

    def __init__(self, message: str, moment: Optional[int] = None,
                 round_index: Optional[int] = None):
        super().__init__(message)
        self.moment = moment
        self.round_index = round_index


class InternalConsistencyError(RuntimeError):
    """A construction that must succeed numerically did not."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class Window:
    """Inclusive index range [lo, hi] that always contains 0."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (self.lo <= 0 <= self.hi):
            raise UsageError(f"window [{self.lo}, {self.hi}] must contain 0")

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def indices(self) -> range:
        return range(self.lo, self.hi + 1)

    def contains(self, i: int) -> bool:
        return self.lo <= i <= self.hi

    def offset(self, i: int) -> int:
        """Array position of index i."""
        if not self.contains(i):
            raise UsageError(f"index {i} outside window [{self.lo}, {self.hi}]")
        return i - self.lo

    @property
    def inner_radius(self) -> int:
        """Largest r with [-r, r] fully inside the window."""
        return min(-self.lo, self.hi)

    @property
    def outer_radius(self) -> int:
        return max(-self.lo, self.hi)

    @property
    def one_sided(self) -> bool:
        return self.lo == 0

    @classmethod
    def centered(cls, radius: int) -> "Window":
        return cls(-radius, radius)

    @classmethod
    def forward(cls, steps: int) -> "Window":
        return cls(0, steps)


# ---------------------------------------------------------------------------
# map interface


class MapSystem:
    """Interface every concrete map family implements.

    A system owns its phase space, its forward map and its metric.  Optional
    capabilities used by generators and the gluing engine:

    * ``backward_sample(state, rng)`` -- one backward step (a choice of
      preimage for non-invertible maps).
    * ``glue(x, y)`` -- glue a backward orbit ``x`` and a forward orbit ``y``
      at time 0, returning a :class:`GluingCertificate`.
    * ``rate(radius)`` -- the certified gluing accuracy rate on
      ``[-radius, radius]``.
    * ``sample_ball(rng, radius)`` / ``sample_sphere(rng, radius)`` -- draw
      additive noise inside / on the boundary of a metric ball.

    All implementations are immutable after construction and safe to share
    between workers.
    """

    map_id: str = "map"
    forward_tol: float = 1e-8

    def forward(self, state):
        raise NotImplementedError

    def metric(self, a, b) -> float:
        raise NotImplementedError

    def metric_many(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        n = a.shape[0]
        return np.array([self.metric(a[i], b[i]) for i in range(n)])

    def forward_many(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, float)
        return np.array([self.forward(s) for s in states])

    def in_domain(self, state) -> bool:
        return bool(np.all(np.isfinite(state)))

    def apply_noise(self, state, noise):
        """Add noise respecting the phase space (overridden per family)."""
        return state + noise


# ---------------------------------------------------------------------------
# orbits and pseudo-trajectories


@dataclass(frozen=True, eq=False)
class Orbit:
    """A finite window of a true trajectory of some map."""

    window: Window
    states: np.ndarray
    map_id: str = ""

    def __post_init__(self):
        states = _freeze(np.asarray(self.states, float))
        if states.shape[0] != len(self.window):
            raise UsageError(
                f"{states.shape[0]} states for window of length {len(self.window)}")
        object.__setattr__(self, "states", states)

    def state(self, i: int):
        return self.states[self.window.offset(i)]


@dataclass(frozen=True, eq=False)
class PseudoTrajectory:
    """States plus the ledger of gaps between consecutive forward images.

    ``gaps[j]`` is the distance from the image of the state at index
    ``window.lo + j`` to the recorded next state.  ``moments`` is exactly the
    set of indices whose gap is positive.
    """

    window: Window
    states: np.ndarray
    gaps: np.ndarray
    moments: tuple[int, ...]
    map_id: str = ""

    def __post_init__(self):
        states = _freeze(np.asarray(self.states, float))
        gaps = _freeze(np.asarray(self.gaps, float))
        if states.shape[0] != len(self.window):
            raise UsageError("state count does not match window")
        if gaps.shape[0] != len(self.window) - 1:
            raise UsageError("gap ledger must have one entry per consecutive pair")
        if np.any(gaps < 0):
            raise UsageError("gaps must be nonnegative")
        expected = tuple(int(self.window.lo + j) for j in np.nonzero(gaps > 0)[0])
        if tuple(self.moments) != expected:
            raise UsageError("moments must be exactly the indices with positive gap")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "moments", expected)

    def state(self, i: int):
        return self.states[self.window.offset(i)]

    def gap_at(self, i: int) -> float:
        if not (self.window.lo <= i <= self.window.hi - 1):
            raise UsageError(f"no gap recorded at index {i}")
        return float(self.gaps[i - self.window.lo])

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max()) if self.gaps.size else 0.0

    def average_gap(self, radius: Optional[int] = None) -> float:
        """Zero-padded centered average of gaps at the given radius.

        One-sided windows use the one-sided normalization 1/(n+1).
        """
        n = self._full_radius() if radius is None else int(radius)
        lo, hi = self.window.lo, self.window.hi - 1
        if self.window.one_sided:
            a, b = 0, min(n, hi)
            norm = n + 1
        else:
            a, b = max(-n, lo), min(n, hi)
            norm = 2 * n + 1
        if b < a:
            return 0.0
        return float(self.gaps[a - lo:b - lo + 1].sum() / norm)

    def moment_density(self, radius: Optional[int] = None) -> float:
        n = self._full_radius() if radius is None else int(radius)
        if self.window.one_sided:
            count = sum(1 for m in self.moments if 0 <= m <= n)
            return count / (n + 1)
        count = sum(1 for m in self.moments if -n <= m <= n)
        return count / (2 * n + 1)

    def _full_radius(self) -> int:
        if self.window.one_sided:
            return max(self.window.hi - 1, 0)
        return max(-self.window.lo, self.window.hi - 1)


def compute_gaps(system: MapSystem, states: Sequence, window: Optional[Window] = None,
                 ) -> PseudoTrajectory:
    """Measure the gap ledger of raw state data under ``system``.

    Gaps below :data:`GAP_NOISE_FLOOR` are zeroed, so perturbation moments on
    measured data are never float dust.  Generators that know their injection
    points tag moments exactly instead of going through this path.
    """
    arr = np.asarray(states, float)
    if arr.shape[0] < 1:
        raise UsageError("need at least one state")
    if window is None:
        window = Window.forward(arr.shape[0] - 1)
    for i_abs, s in zip(window.indices(), arr):
        if not system.in_domain(s):
            raise DomainError(f"state at index {i_abs} outside phase space of {system.map_id}")
    if arr.shape[0] == 1:
        gaps = np.zeros(0)
    else:
        images = system.forward_many(arr[:-1])
        gaps = np.asarray(system.metric_many(images, arr[1:]), float)
        gaps = np.where(gaps < GAP_NOISE_FLOOR, 0.0, gaps)
    moments = tuple(int(window.lo + j) for j in np.nonzero(gaps > 0)[0])
    return PseudoTrajectory(window, arr, gaps, moments, map_id=system.map_id)


def forward_orbit(system: MapSystem, x0, steps: int) -> Orbit:
    """Iterate ``steps`` forward images of ``x0`` (window [0, steps])."""
    states = [np.asarray(x0, float)]
    for _ in range(steps):
        states.append(np.asarray(system.forward(states[-1]), float))
    return Orbit(Window.forward(steps), np.array(states), map_id=system.map_id)


def orbit_through(system: MapSystem, x0, window: Window, rng=None) -> Orbit:
    """A true orbit on ``window`` passing through ``x0`` at index 0.

    The backward part is produced by ``system.backward_sample`` (which picks
    a preimage branch for non-invertible maps; ``rng`` seeds the choices) and
    is kept as sampled: replaying it forward would amplify rounding noise at
    the expansion rate and detach the orbit from its anchor.
    """
    back = [np.asarray(x0, float)]
    if window.lo < 0:
        if not hasattr(system, "backward_sample"):
            raise UnsupportedMapError(
                f"{system.map_id} exposes no backward step; cannot build a two-sided orbit")
        for _ in range(-window.lo):
            back.append(np.asarray(system.backward_sample(back[-1], rng), float))
    states = back[::-1]
    for _ in range(window.hi):
        states.append(np.asarray(system.forward(states[-1]), float))
    return Orbit(window, np.array(states), map_id=system.map_id)


def orbit_residuals(system: MapSystem, window: Window, states: np.ndarray) -> np.ndarray:
    """Forward-evaluation residuals metric(T(s_i), s_{i+1}) along a state array."""
    if states.shape[0] < 2:
        return np.zeros(0)
    images = system.forward_many(states[:-1])
    return np.asarray(system.metric_many(images, states[1:]), float)


def verify_orbit(system: MapSystem, orbit: Orbit, tol: Optional[float] = None) -> float:
    """Largest forward residual; raises when above the map's tolerance."""
    res = orbit_residuals(system, orbit.window, orbit.states)
    worst = float(res.max()) if res.size else 0.0
    limit = system.forward_tol if tol is None else tol
    if worst > limit:
        raise InternalConsistencyError(
            f"orbit violates the forward relation: residual {worst:.3e} > {limit:.3e}")
    return worst


# ---------------------------------------------------------------------------
# rate functions


@dataclass(frozen=True, eq=False)
class RateFunction:
    """Gluing accuracy rate phi(k) >= 0 on a finite support window.

    Values outside the support are zero.  ``total`` is the sum of the stored
    values; a summable rate is the hypothesis every bound here consumes.
    """

    support: Window
    values: np.ndarray

    def __post_init__(self):
        vals = _freeze(np.asarray(self.values, float))
        if vals.shape[0] != len(self.support):
            raise UsageError("value count does not match support window")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise UsageError("rate values must be finite and nonnegative")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, fn: Callable[[int], float], radius: int) -> "RateFunction":
        ks = range(-radius, radius + 1)
        return cls(Window.centered(radius), np.array([fn(k) for k in ks], float))

    def phi(self, k: int) -> float:
        if not self.support.contains(int(k)):
            return 0.0
        return float(self.values[int(k) - self.support.lo])

    def phi_many(self, ks: Iterable[int]) -> np.ndarray:
        ks = np.asarray(tuple(ks) if not isinstance(ks, np.ndarray) else ks, int)
        out = np.zeros(ks.shape[0])
        mask = (ks >= self.support.lo) & (ks <= self.support.hi)
        out[mask] = self.values[ks[mask] - self.support.lo]
        return out

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def truncated(self, radius: int) -> "RateFunction":
        lo = max(self.support.lo, -radius)
        hi = min(self.support.hi, radius)
        w = Window(lo, hi)
        return RateFunction(w, self.values[lo - self.support.lo:hi - self.support.lo + 1])


def monotone_envelope(rate: RateFunction) -> RateFunction:
    """Smallest rate above ``rate`` that is monotone away from 0 on each side."""
    w = rate.support
    vals = rate.values
    out = np.empty_like(vals)
    zero = w.offset(0)
    # k < 0: sup over i <= k, accumulated left to right
    running = 0.0
    for j in range(zero):
        running = max(running, float(vals[j]))
        out[j] = running
    # k >= 0: sup over i >= k, accumulated right to left
    running = 0.0
    for j in range(len(vals) - 1, zero - 1, -1):
        running = max(running, float(vals[j]))
        out[j] = running
    return RateFunction(w, out)


def symmetrize(rate: RateFunction) -> RateFunction:
    """Even rate max(phi(-k), phi(k)); its sum never exceeds twice the input's."""
    m = rate.support.outer_radius
    ks = np.arange(-m, m + 1)
    vals = np.array([max(rate.phi(int(k)), rate.phi(-int(k))) for k in ks])
    return RateFunction(Window.centered(m), vals)


# ---------------------------------------------------------------------------
# pseudo-trajectory classification


@dataclass(frozen=True)
class TypeReport:
    """Which smallness classes a pseudo-trajectory realizes at accuracy epsilon.

    The classes form a chain: uniform implies strong-average implies
    weak-average.  Rare perturbations are reported independently; a rare but
    huge perturbation can break any fixed average on a finite window, so no
    implication between rare and weak-average is asserted here.
    """

    epsilon: float
    satisfies_uniform: bool
    satisfies_average: bool
    satisfies_weak_average: bool
    satisfies_rare: bool
    max_gap: float
    full_average: float
    density: float
    stabilization_radius: Optional[int]
    full_radius: int
    average_profile: tuple[tuple[int, float], ...]


def _radius_ladder(n_max: int) -> list[int]:
    ladder = []
    r = 1
    while r < n_max:
        ladder.append(r)
        r *= 2
    ladder.append(n_max)
    return sorted(set(ladder))


def classify(pseudo: PseudoTrajectory, epsilon: float,
             ladder: Optional[Sequence[int]] = None) -> TypeReport:
    """Decide the uniform / average / weak-average / rare classes at epsilon.

    Finite-window surrogates: the uniform class checks the max gap; the
    strong-average class asks for some N below the window radius past which
    every centered running average stays below epsilon (N is reported); the
    weak-average class checks the average at the full radius only; the rare
    class checks the moment density at the full radius.
    """
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")
    w = pseudo.window
    n_max = pseudo._full_radius()
    one_sided = w.one_sided

    gaps = pseudo.gaps
    lo = w.lo
    prefix = np.concatenate([[0.0], np.cumsum(gaps)])

    def window_sum(n: int) -> float:
        a = 0 if one_sided else max(-n, lo)
        b = min(n, w.hi - 1)
        if b < a:
            return 0.0
        return float(prefix[b - lo + 1] - prefix[a - lo])

    ns = np.arange(n_max + 1)
    norms = (ns + 1) if one_sided else (2 * ns + 1)
    avgs = np.array([window_sum(int(n)) for n in ns]) / norms

    ok = avgs <= epsilon
    if bool(ok[-1]):
        bad = np.nonzero(~ok)[0]
        stab = int(bad[-1]) + 1 if bad.size else 0
    else:
        stab = None

    if ladder is None:
        ladder = _radius_ladder(n_max)
    profile = tuple((int(n), float(avgs[int(n)])) for n in ladder if 0 <= n <= n_max)

    max_gap = pseudo.max_gap
    full_avg = float(avgs[-1])
    density = pseudo.moment_density(n_max)
    return TypeReport(
        epsilon=float(epsilon),
        satisfies_uniform=bool(max_gap <= epsilon),
        satisfies_average=stab is not None,
        satisfies_weak_average=bool(full_avg <= epsilon),
        satisfies_rare=bool(density <= epsilon),
        max_gap=max_gap,
        full_average=full_avg,
        density=float(density),
        stabilization_radius=stab,
        full_radius=int(n_max),
        average_profile=profile,
    )


# ---------------------------------------------------------------------------
# shadowing errors


def _check_same_window(x, y):
    if x.window != y.window:
        raise UsageError(
            f"windows differ: [{x.window.lo}, {x.window.hi}] vs [{y.window.lo}, {y.window.hi}]")


def shadow_error_uniform(system: MapSystem, x: Orbit, y) -> float:
    """sup over the common window of the pointwise distance."""
    _check_same_window(x, y)
    errs = system.metric_many(x.states, y.states)
    return float(np.max(errs))


def shadow_error_average(system: MapSystem, x: Orbit, y, radius: int) -> float:
    """Centered average distance at the given radius (one-sided when lo == 0)."""
    _check_same_window(x, y)
    w = x.window
    if w.one_sided:
        if radius > w.hi:
            raise UsageError(f"radius {radius} exceeds window end {w.hi}")
        a, b = 0, radius
        norm = radius + 1
    else:
        if radius > w.inner_radius:
            raise UsageError(f"radius {radius} exceeds window radius {w.inner_radius}")
        a, b = -radius, radius
        norm = 2 * radius + 1
    sl = slice(w.offset(a), w.offset(b) + 1)
    errs = system.metric_many(x.states[sl], y.states[sl])
    return float(np.sum(errs) / norm)


# ---------------------------------------------------------------------------
# gluing certificates


@dataclass(frozen=True, eq=False)
class GluingCertificate:
    """A candidate gluing orbit plus its measured errors against the rate.

    ``backward_errors[j]`` is the distance to the backward input at index
    ``z.window.lo + j`` (indices below 0); ``forward_errors[j]`` the distance
    to the forward input at index ``j`` (indices 0..hi).  A strong certificate
    bounds errors by ``phi(k) * scale`` with ``scale = rho(x0, y0)``; a weak
    one by ``phi(k)`` alone.
    """

    z: Orbit
    backward_errors: np.ndarray
    forward_errors: np.ndarray
    rate: RateFunction
    scale: float
    strong: bool
    satisfied: bool
    worst_slack: float
    gluable: bool = True
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "backward_errors", _freeze(np.asarray(self.backward_errors, float)))
        object.__setattr__(self, "forward_errors", _freeze(np.asarray(self.forward_errors, float)))

    def error_at(self, k: int) -> float:
        w = self.z.window
        if k < 0:
            return float(self.backward_errors[k - w.lo])
        return float(self.forward_errors[k])

    def bound_at(self, k: int) -> float:
        b = self.rate.phi(k)
        return b * self.scale if self.strong else b


def certify(z: Orbit, backward_errors: np.ndarray, forward_errors: np.ndarray,
            rate: RateFunction, scale: float, strong: bool,
            gluable: bool = True, notes: tuple[str, ...] = ()) -> GluingCertificate:
    """Assemble a certificate, measuring the worst slack against the bound."""
    w = z.window
    slack = math.inf
    ok = True
    if gluable:
        factor = scale if strong else 1.0
        back = np.asarray(backward_errors, float)
        fwd = np.asarray(forward_errors, float)
        if back.size:
            bounds = rate.phi_many(np.arange(w.lo, w.lo + back.size)) * factor
            slack = min(slack, float(np.min(bounds - back)))
        if fwd.size:
            bounds = rate.phi_many(np.arange(0, fwd.size)) * factor
            slack = min(slack, float(np.min(bounds - fwd)))
        if not math.isfinite(slack):
            slack = 0.0
        # tiny float dust allowance on an otherwise exact inequality
        ok = slack >= -1e-9 * max(1.0, scale)
    else:
        ok = False
        slack = -math.inf
    return GluingCertificate(z, backward_errors, forward_errors, rate, float(scale),
                             strong, ok, float(slack), gluable, tuple(notes))


def check_glue_windows(x: Orbit, y: Orbit) -> None:
    """Gluing inputs meet exactly at index 0: x covers [lo, 0], y covers [0, hi]."""
    if x.window.hi != 0:
        raise UsageError("backward input must end at index 0")
    if y.window.lo != 0:
        raise UsageError("forward input must start at index 0")
