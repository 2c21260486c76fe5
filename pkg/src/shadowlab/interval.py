"""Interval maps with neutrally expanding fixed points at 0 and 1.

The family T(x) = x(1 + a x^alpha) on [0, c] and
T(x) = 1 - (1-x)(1 + b (1-x)^beta) on (c, 1] interpolates between piecewise
linear expansion (alpha = beta = 0) and genuinely nonuniform behaviour: the
larger the exponents, the longer backward orbits linger near the endpoints
and the slower gluing errors decay.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (
    DomainError,
    GluingCertificate,
    MapSystem,
    Orbit,
    RateFunction,
    UsageError,
    Window,
    certify,
    check_glue_windows,
)
from .symbolic import SymbolSequence

_BOUNDARY_SLACK = 1e-12
_BRANCH_TIE = 1e-12
_INVERT_TOL = 1e-14


class SurjectivityReport(NamedTuple):
    """Residuals of the endpoint conditions making both branches onto.

    ``left_residual`` measures |c(1 + a c^alpha) - 1| and ``right_residual``
    the value of the right branch at its left end, i.e. how far T(c+) is from
    0.  ``flat_exponent_residual`` evaluates the same right-end condition
    with the nonlinearity applied to the full coefficient, (1-c)(1+b)^beta;
    it is reported for diagnosis but does not decide ``onto``.
    """

    onto: bool
    left_residual: float
    right_residual: float
    flat_exponent_residual: float


class IntervalSystem(MapSystem):
    """Piecewise monotone interval map with neutral endpoints."""

    def __init__(self, a: float, b: float, c: float, alpha: float, beta: float):
        if not (0.0 < c < 1.0):
            raise UsageError("breakpoint c must lie strictly inside (0, 1)")
        if alpha < 0 or beta < 0:
            raise UsageError("branch exponents must be nonnegative")
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.map_id = f"interval(a={a:g},b={b:g},c={c:g},alpha={alpha:g},beta={beta:g})"
        self.forward_tol = 1e-9
        self._check_monotone()
        self.onto = self.check_surjectivity().onto
        self._rate_cache: dict[int, np.ndarray] = {}
        self._rate_fn_cache: dict[int, RateFunction] = {}

    # -- branches ------------------------------------------------------------

    def left(self, x: float) -> float:
        return x * (1.0 + self.a * x ** self.alpha)

    def right(self, x: float) -> float:
        u = 1.0 - x
        return 1.0 - u * (1.0 + self.b * u ** self.beta)

    def _check_monotone(self):
        for name, fn, lo, hi in (("left", self.left, 0.0, self.c),
                                 ("right", self.right, self.c, 1.0)):
            xs = np.linspace(lo, hi, 513)
            vals = np.array([fn(float(x)) for x in xs])
            if np.any(np.diff(vals) < -1e-12):
                raise UsageError(f"{name} branch is not monotone increasing "
                                 f"for parameters of {self.map_id}")
        # derivative sign at interior sample points
        h = 1e-7
        for fn, lo, hi in ((self.left, 0.0, self.c), (self.right, self.c, 1.0)):
            for x in np.linspace(lo + 1e-4, hi - 1e-4, 17):
                if (fn(x + h) - fn(x - h)) / (2 * h) < -1e-6:
                    raise UsageError(f"negative branch derivative in {self.map_id}")

    def check_surjectivity(self) -> SurjectivityReport:
        """Do the branches map onto the full interval?

        True exactly when the left branch reaches 1 at c and the right branch
        starts at 0 just past c (both within 1e-10).
        """
        left_res = abs(self.left(self.c) - 1.0)
        right_res = abs(self.right(self.c))  # limit from the right at c
        flat = abs((1.0 - self.c) * (1.0 + self.b) ** self.beta - 1.0)
        ok = left_res < 1e-10 and right_res < 1e-10
        return SurjectivityReport(ok, left_res, right_res, flat)

    # -- map interface ---------------------------------------------------------

    def forward(self, state) -> float:
        x = float(state)
        if not (-_BOUNDARY_SLACK <= x <= 1.0 + _BOUNDARY_SLACK):
            raise DomainError(f"state {x!r} outside [0, 1]")
        x = min(max(x, 0.0), 1.0)
        v = self.left(x) if x <= self.c else self.right(x)
        if not (-_BOUNDARY_SLACK <= v <= 1.0 + _BOUNDARY_SLACK):
            raise DomainError(
                f"image {v!r} escapes [0, 1]: parameters of {self.map_id} are invalid")
        return min(max(v, 0.0), 1.0)

    def forward_many(self, states):
        return np.array([self.forward(float(s)) for s in np.asarray(states, float)])

    def metric(self, a, b) -> float:
        return abs(float(a) - float(b))

    def metric_many(self, a, b):
        return np.abs(np.asarray(a, float) - np.asarray(b, float))

    def in_domain(self, state) -> bool:
        x = float(state)
        return -_BOUNDARY_SLACK <= x <= 1.0 + _BOUNDARY_SLACK

    def apply_noise(self, state, noise):
        # reflect at the boundary to keep the noise scale near endpoints
        x = float(state) + float(noise)
        for _ in range(64):
            if x < 0.0:
                x = -x
            elif x > 1.0:
                x = 2.0 - x
            else:
                return x
        raise DomainError("noise too large to reflect into [0, 1]")

    def sample_ball(self, rng, radius: float) -> float:
        return float(rng.uniform(-radius, radius))

    def sample_sphere(self, rng, radius: float) -> float:
        return float(radius if rng.integers(2) else -radius)

    # -- inverse branches -----------------------------------------------------

    def branch_image(self, branch: str) -> tuple[float, float]:
        if branch == "left":
            return 0.0, self.left(self.c)
        if branch == "right":
            return self.right(self.c), 1.0
        raise UsageError(f"unknown branch {branch!r}")

    def invert_branch(self, v: float, branch: str) -> float:
        """Unique preimage of v on the chosen monotone branch."""
        lo_img, hi_img = self.branch_image(branch)
        v = float(v)
        if not (lo_img - _BOUNDARY_SLACK <= v <= hi_img + _BOUNDARY_SLACK):
            raise DomainError(
                f"value {v!r} outside the {branch} branch image [{lo_img}, {hi_img}]")
        v = min(max(v, lo_img), hi_img)
        if branch == "left":
            if self.alpha == 0.0:
                return v / (1.0 + self.a)
            fn = self.left
            lo, hi = 0.0, self.c
        else:
            if self.beta == 0.0:
                return 1.0 - (1.0 - v) / (1.0 + self.b)
            fn = self.right
            lo, hi = self.c, 1.0
        if v <= fn(lo):
            return lo
        if v >= fn(hi):
            return hi
        return float(brentq(lambda u: fn(u) - v, lo, hi, xtol=_INVERT_TOL, rtol=8.9e-16))

    def branch_of(self, x: float) -> str:
        return "left" if x <= self.c else "right"

    def backward_sample(self, state, rng=None) -> float:
        v = float(state)
        options = [br for br in ("left", "right")
                   if self.branch_image(br)[0] - _BOUNDARY_SLACK <= v
                   <= self.branch_image(br)[1] + _BOUNDARY_SLACK]
        if not options:
            raise DomainError(f"state {v!r} has no preimage on either branch")
        if rng is None:
            choice = options[0]
        else:
            choice = options[int(rng.integers(len(options)))]
        return self.invert_branch(v, choice)

    # -- gluing -----------------------------------------------------------------

    def backward_contraction(self, steps: int) -> np.ndarray:
        """Worst backward error envelope d_n for n = 0..steps.

        Two points pulled back through the same branch word stay inside one
        preimage cylinder.  Each inverse branch shortens an interval of
        length t to at most G(t), where G is the concave length map of that
        branch anchored at its neutral endpoint; iterating the pointwise max
        of the two length maps therefore dominates every branch word.
        """
        if steps not in self._rate_cache:
            d = np.empty(steps + 1)
            d[0] = 1.0
            u = 1.0
            for n in range(1, steps + 1):
                u = max(self.invert_branch(u, "left"),
                        1.0 - self.invert_branch(1.0 - u, "right"))
                d[n] = u
            d.setflags(write=False)
            self._rate_cache[steps] = d
        return self._rate_cache[steps]

    @property
    def strong_rate_base(self) -> Optional[float]:
        """Uniform inverse-branch contraction factor; only piecewise linear maps have one."""
        if self.alpha == 0.0 and self.beta == 0.0 and min(self.a, self.b) > 0:
            return 1.0 + min(self.a, self.b)
        return None

    @property
    def strong_gluing_impossible(self) -> bool:
        """Exponents above 1 on both sides rule out any summable strong rate."""
        return self.alpha > 1.0 and self.beta > 1.0 and self.a * self.b != 0.0

    def rate(self, radius: int) -> RateFunction:
        """Certified gluing rate: backward cylinder envelope, exact forward."""
        if radius not in self._rate_fn_cache:
            if self.strong_rate_base is not None:
                base = self.strong_rate_base
                vals = [base ** k if k < 0 else 0.0 for k in range(-radius, radius + 1)]
            else:
                d = self.backward_contraction(radius)
                vals = [d[-k] if k < 0 else 0.0 for k in range(-radius, radius + 1)]
            self._rate_fn_cache[radius] = RateFunction(Window.centered(radius),
                                                       np.array(vals))
        return self._rate_fn_cache[radius]

    def glue(self, x: Orbit, y: Orbit) -> GluingCertificate:
        return interval_glue(self, x, y)


def interval_glue(system: IntervalSystem, x: Orbit, y: Orbit) -> GluingCertificate:
    """Glue a backward orbit x and a forward orbit y at time 0.

    The output copies y forward (the map is expanding, so there is no other
    choice) and pulls y0 backward through the inverse branch that contains
    the corresponding state of x.  Without branch surjectivity the pullback
    can hit a value outside the branch image; the certificate is then flagged
    non-gluable.
    """
    check_glue_windows(x, y)
    n_back = -x.window.lo
    n_fwd = y.window.hi
    x0 = float(np.asarray(x.state(0)).reshape(()))
    y0 = float(np.asarray(y.state(0)).reshape(()))
    scale = system.metric(x0, y0)
    notes = []

    z_back = np.empty(n_back + 1)
    z_back[-1] = y0
    gluable = True
    for j in range(n_back):
        k_prev = -j - 1          # index of the state whose branch we follow
        x_prev = float(np.asarray(x.state(k_prev)).reshape(()))
        if abs(x_prev - system.c) <= _BRANCH_TIE:
            branch = "left"
            notes.append(f"branch tie at index {k_prev} resolved to the left")
        else:
            branch = system.branch_of(x_prev)
        target = z_back[n_back - j]
        lo_img, hi_img = system.branch_image(branch)
        if not (lo_img - 1e-9 <= target <= hi_img + 1e-9):
            gluable = False
            notes.append(
                f"pullback left the {branch} branch image at index {k_prev}: "
                "branch surjectivity fails")
            z_back[:n_back - j] = z_back[n_back - j]
            break
        z_back[n_back - j - 1] = system.invert_branch(target, branch)

    z_states = np.concatenate([z_back[:-1], np.asarray(y.states, float).reshape(-1)])
    window = Window(x.window.lo, y.window.hi)
    z = Orbit(window, z_states, map_id=system.map_id)
    x_flat = np.asarray(x.states, float).reshape(-1)
    backward_errors = np.abs(z_states[:n_back] - x_flat[:n_back])
    forward_errors = np.abs(z_states[n_back:] - np.asarray(y.states, float).reshape(-1))

    rate = system.rate(max(n_back, n_fwd, 1))
    strong = system.strong_rate_base is not None
    cert = certify(z, backward_errors, forward_errors, rate, scale, strong=strong,
                   gluable=gluable, notes=tuple(notes))
    if system.strong_gluing_impossible:
        cert = GluingCertificate(cert.z, cert.backward_errors, cert.forward_errors,
                                 cert.rate, cert.scale, cert.strong, cert.satisfied,
                                 cert.worst_slack, cert.gluable,
                                 cert.notes + ("no summable strong rate exists in this regime",))
    return cert


# ---------------------------------------------------------------------------
# neutral decay probes


@dataclass(frozen=True)
class DecayProbe:
    """Backward iterates of v -> v + R v^(1+alpha) and their fitted decay.

    ``gamma_hat`` is the least-squares slope of -log(value) against log(n)
    over the last decade of steps; ``reference`` is 1/alpha, the exponent the
    asymptotics predict (None when alpha = 0, where decay is exponential).
    """

    values: np.ndarray
    gamma_hat: Optional[float]
    fit_residual: Optional[float]
    reference: Optional[float]


def _invert_tau(coeff: float, alpha: float, target: float) -> float:
    if target == 0.0:
        return 0.0
    if alpha == 0.0:
        return target / (1.0 + coeff)
    return float(brentq(lambda u: u + coeff * u ** (1.0 + alpha) - target,
                        0.0, target, xtol=_INVERT_TOL, rtol=8.9e-16))


def fit_log_slope(ns: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log(values) vs log(ns) and its residual norm."""
    mask = values > 0
    logs_n = np.log(ns[mask])
    logs_v = np.log(values[mask])
    coeffs, res, *_ = np.polyfit(logs_n, logs_v, 1, full=True)
    residual = float(np.sqrt(res[0] / len(logs_n))) if len(res) else 0.0
    return float(coeffs[0]), residual


def neutral_rate_probe(coeff: float, alpha: float, v0: float, steps: int) -> DecayProbe:
    """Iterate the inverse of tau(v) = v + R v^(1+alpha) and fit its decay."""
    if coeff <= 0:
        raise UsageError("coefficient must be positive")
    if alpha < 0:
        raise UsageError("alpha must be nonnegative")
    if not (0.0 <= v0 <= 1.0):
        raise UsageError("v0 must lie in [0, 1]")
    if steps < 10:
        raise UsageError("need at least 10 steps to fit a decay exponent")
    values = np.empty(steps + 1)
    values[0] = v0
    for n in range(1, steps + 1):
        values[n] = _invert_tau(coeff, alpha, values[n - 1])
    values.setflags(write=False)
    if alpha == 0.0:
        return DecayProbe(values, None, None, None)
    lo = max(steps // 10, 1)
    ns = np.arange(lo, steps + 1)
    slope, residual = fit_log_slope(ns.astype(float), values[lo:])
    return DecayProbe(values, -slope, residual, 1.0 / alpha)


@dataclass(frozen=True)
class FailureProfile:
    """Growth of the gluing-error mass as the endpoint separation shrinks.

    For each separation s the probe glues the fixed orbit at 0 with the
    forward orbit of s and reports sup_k error(k)/s (pointwise ratio, capped
    at 1 by the 1-Lipschitz inverse branches) and the error mass
    sum_k error(k)/s, which is the rate sum a strong certificate would need.
    An unbounded mass as s -> 0 is exactly the failure of any summable
    strong rate.
    """

    separations: tuple[float, ...]
    sup_ratios: tuple[float, ...]
    mass_ratios: tuple[float, ...]
    tail_exponents: tuple[float, ...]


def strong_gluing_failure_probe(system: IntervalSystem,
                                separations: Sequence[float],
                                window: int = 50_000) -> FailureProfile:
    """Measure how the required strong-gluing rate blows up for steep exponents."""
    if not (system.alpha > 1.0 and system.beta > 1.0 and system.a * system.b != 0.0):
        raise UsageError("probe requires both exponents above 1 and nonzero coefficients")
    sups, masses, tails = [], [], []
    for s in separations:
        if not (0.0 < s < system.c):
            raise UsageError(f"separation {s!r} must lie in (0, c)")
        errs = np.empty(window + 1)
        errs[0] = s
        v = s
        for n in range(1, window + 1):
            v = system.invert_branch(v, "left")
            errs[n] = v
        sups.append(float(errs[1:].max() / s))
        masses.append(float(errs.sum() / s))
        lo = max(window // 10, 1)
        slope, _ = fit_log_slope(np.arange(lo, window + 1, dtype=float), errs[lo:])
        tails.append(-slope)
    return FailureProfile(tuple(float(s) for s in separations),
                          tuple(sups), tuple(masses), tuple(tails))


def code_orbit(system: IntervalSystem, orbit: Orbit) -> SymbolSequence:
    """Code an orbit by the branch partition: 0 left of the breakpoint, 1 right."""
    symbols = tuple(0 if float(s) <= system.c else 1
                    for s in np.asarray(orbit.states, float).reshape(-1))
    return SymbolSequence(orbit.window, symbols)


def doubling_system() -> IntervalSystem:
    """The piecewise linear doubling map as a member of the family."""
    return IntervalSystem(a=1.0, b=1.0, c=0.5, alpha=0.0, beta=0.0)
