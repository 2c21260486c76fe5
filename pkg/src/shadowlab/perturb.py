"""Seeded generators of pseudo-trajectories and audits of their type.

A generator first lays down a true backward orbit through the anchor point
(sampling inverse branches where the map is non-invertible), then replays the
window forward from its left edge injecting noise at every step.  Gaps are
stored as remeasured metric distances, so the ledger always agrees with an
independent measurement; perturbation moments are tagged at generation time.

Randomness comes from numpy's PCG64 streams; a run is reproducible bit for
bit from (map, anchor, model, window, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    DomainError,
    MapSystem,
    PseudoTrajectory,
    TypeReport,
    UsageError,
    Window,
    classify,
    orbit_through,
)

KINDS = ("uniform", "average_small", "rare", "gaussian")


@dataclass(frozen=True)
class PerturbationModel:
    """Noise model: kind, magnitude parameters, and the stream seed."""

    kind: str
    seed: int
    amplitude: float = 0.0      # uniform cap / rare jump size
    target_average: float = 0.0  # average_small mean gap
    density: float = 0.0        # rare moment probability
    sigma: float = 0.0          # gaussian per-coordinate deviation

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown perturbation kind {self.kind!r}")
        for name in ("amplitude", "target_average", "density", "sigma"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be nonnegative")
        if not (0.0 <= self.density <= 1.0):
            raise UsageError("density must lie in [0, 1]")

    @classmethod
    def uniform(cls, amplitude: float, seed: int) -> "PerturbationModel":
        return cls("uniform", seed, amplitude=amplitude)

    @classmethod
    def average_small(cls, target: float, seed: int) -> "PerturbationModel":
        return cls("average_small", seed, target_average=target)

    @classmethod
    def rare(cls, density: float, amplitude: float, seed: int) -> "PerturbationModel":
        return cls("rare", seed, density=density, amplitude=amplitude)

    @classmethod
    def gaussian(cls, sigma: float, seed: int) -> "PerturbationModel":
        return cls("gaussian", seed, sigma=sigma)

    @property
    def audit_epsilon(self) -> float:
        """The accuracy at which the generated data is classified.

        For gaussian noise the convention is 2 sigma: the mean absolute gap
        sits near sigma * sqrt(2/pi), safely below it.
        """
        if self.kind == "uniform":
            return self.amplitude
        if self.kind == "average_small":
            return self.target_average
        if self.kind == "rare":
            return self.density
        return 2.0 * self.sigma


def _state_dim(state) -> int:
    arr = np.asarray(state, float)
    return 1 if arr.ndim == 0 else arr.shape[0]


def _draw_noise(system: MapSystem, model: PerturbationModel, rng, dim: int):
    """One step of additive noise; always consumes the same stream layout."""
    kind = model.kind
    if kind == "uniform":
        if hasattr(system, "sample_ball"):
            return system.sample_ball(rng, model.amplitude)
        v = rng.normal(size=dim)
        v /= max(np.linalg.norm(v), 1e-300)
        return model.amplitude * rng.uniform() ** (1.0 / dim) * v
    if kind == "average_small":
        scale = rng.uniform(0.0, 2.0 * model.target_average)
        if hasattr(system, "sample_sphere"):
            return system.sample_sphere(rng, scale)
        v = rng.normal(size=dim)
        v /= max(np.linalg.norm(v), 1e-300)
        return scale * v
    if kind == "rare":
        hit = rng.uniform() < model.density
        if hasattr(system, "sample_sphere"):
            noise = system.sample_sphere(rng, model.amplitude)
        else:
            v = rng.normal(size=dim)
            v /= max(np.linalg.norm(v), 1e-300)
            noise = model.amplitude * v
        return noise if hit else noise * 0.0
    # gaussian: per-coordinate deviation in the ambient coordinates
    noise = rng.normal(0.0, model.sigma, size=dim)
    return noise


def make_pseudo(system: MapSystem, x0, model: PerturbationModel,
                window: Window) -> PseudoTrajectory:
    """Generate a pseudo-trajectory of the requested type on the window."""
    if not system.in_domain(np.asarray(x0, float) if _state_dim(x0) > 1 else float(np.asarray(x0))):
        raise DomainError(f"anchor point {x0!r} outside phase space")
    rng = np.random.default_rng(np.random.PCG64(model.seed))
    scalar = _state_dim(x0) == 1
    backbone = orbit_through(system, x0, window, rng)
    states = [np.asarray(backbone.state(window.lo), float)]
    gaps = []
    moments = []
    zero_noise = (model.kind == "uniform" and model.amplitude == 0.0) or \
                 (model.kind == "average_small" and model.target_average == 0.0) or \
                 (model.kind == "rare" and (model.density == 0.0 or model.amplitude == 0.0)) or \
                 (model.kind == "gaussian" and model.sigma == 0.0)
    for step, i in enumerate(range(window.lo, window.hi)):
        image = system.forward(states[-1] if not scalar else float(states[-1]))
        noise = _draw_noise(system, model, rng, _state_dim(image))
        if scalar:
            noise = float(np.asarray(noise).reshape(-1)[0])
        if zero_noise or not np.any(np.asarray(noise) != 0.0):
            nxt = np.asarray(image, float)
            gap = 0.0
        else:
            nxt = np.asarray(system.apply_noise(image, noise), float)
            gap = float(system.metric(image, nxt))
            if gap > 0.0:
                moments.append(i)
        states.append(nxt)
        gaps.append(gap)
    arr = np.array([s if not scalar else float(s) for s in states])
    return PseudoTrajectory(window, arr, np.array(gaps), tuple(moments),
                            map_id=system.map_id)


class AuditReport(NamedTuple):
    """Classification of generated data plus agreement with its model."""

    report: TypeReport
    consistent: bool
    detail: str


def empirical_type_audit(system: MapSystem, pseudo: PseudoTrajectory,
                         model: PerturbationModel) -> AuditReport:
    """Check that a generated pseudo-trajectory realizes its declared type.

    Uniform and average models assert their class directly (the average one
    within three standard errors of its target); rare models check the moment
    density by binomial concentration.  Gaussian data is classified at
    2 sigma and the realized classes are reported without assertion: the
    strong-average class holds for typical finite realizations yet is not
    guaranteed for any single one.
    """
    eps = model.audit_epsilon
    if eps <= 0:
        report = classify(pseudo, 1e-300) if pseudo.max_gap == 0 else None
        if report is None:
            return AuditReport(classify(pseudo, pseudo.max_gap), False,
                               "zero-noise model produced positive gaps")
        return AuditReport(report, True, "zero-noise model reproduced a true orbit")
    report = classify(pseudo, eps)
    n_steps = len(pseudo.gaps)
    if model.kind == "uniform":
        ok = report.satisfies_uniform
        detail = f"max gap {report.max_gap:.3e} vs cap {eps:.3e}"
    elif model.kind == "average_small":
        se = model.target_average / math.sqrt(3.0 * max(n_steps, 1))
        ok = abs(pseudo.average_gap() * _norm_factor(pseudo) - model.target_average) <= 3 * se
        detail = (f"realized mean gap {pseudo.average_gap() * _norm_factor(pseudo):.3e} "
                  f"target {model.target_average:.3e}")
    elif model.kind == "rare":
        realized = len(pseudo.moments) / max(n_steps, 1)
        se = math.sqrt(model.density * (1 - model.density) / max(n_steps, 1))
        ok = abs(realized - model.density) <= 3 * se + 1e-12
        detail = f"realized density {realized:.4f} vs {model.density:.4f}"
    else:
        ok = True
        detail = (f"gaussian realization at eps = 2 sigma: "
                  f"weak average {report.satisfies_weak_average}, "
                  f"strong average {report.satisfies_average}")
    return AuditReport(report, bool(ok), detail)


def _norm_factor(pseudo: PseudoTrajectory) -> float:
    """Convert the zero-padded window average into a per-step mean."""
    n = pseudo._full_radius()
    steps = len(pseudo.gaps)
    if steps == 0:
        return 1.0
    norm = (n + 1) if pseudo.window.one_sided else (2 * n + 1)
    return norm / steps
