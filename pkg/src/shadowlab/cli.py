"""Experiment runner: classification, shadowing runs, sweeps, probes.

Configs are ini-style text with [section] headers and key = value lines; the
parser rejects unknown keys outright so silent typos cannot alter a bound
check.  All numeric output is printed with 17 significant digits and runs are
reproducible byte for byte from the pinned generator seeds.

Exit codes: 0 pass, 1 bound-check failure, 2 config error, 3 unsupported
configuration.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .affine import AffineSystem, TorusSystem
from .core import (
    DomainError,
    MapSystem,
    NonGluableError,
    UnsupportedMapError,
    UsageError,
    Window,
    classify,
    forward_orbit,
    orbit_through,
)
from .interval import IntervalSystem, neutral_rate_probe
from .perturb import PerturbationModel, make_pseudo
from .shadowing import (
    final_check,
    gap_recursion_check,
    gap_sum_check,
    parallel_glue,
    sequential_glue,
)
from .symbolic import read_transition_matrix

EXIT_PASS = 0
EXIT_BOUND_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_UNSUPPORTED = 3

SCHEMA_LINE = "# schema=1"


class ConfigError(ValueError):
    pass


def fmt(value) -> str:
    """17 significant digits for floats; plain text otherwise."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [SCHEMA_LINE, ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# config schema


_SCHEMA = {
    "map": {"family", "matrix", "offset", "split_tol", "a", "b", "c", "alpha", "beta"},
    "perturbation": {"kind", "sigma", "amplitude", "density", "target", "anchor"},
    "run": {"radius", "one_sided", "seed", "seeds", "ladder", "out",
            "bound_checks", "engine"},
    "sweep": {"parameter", "values", "workers"},
    "decay": {"coefficient", "alpha", "v0", "steps"},
    "glue": {"x0", "y0", "radius", "seed"},
}


@dataclass(frozen=True)
class Config:
    raw: dict

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def need(self, section: str, key: str) -> str:
        try:
            return self.raw[section][key]
        except KeyError:
            raise ConfigError(f"missing required key {section}.{key}") from None

    def get(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.raw.get(section, {}).get(key, default)

    def with_value(self, section: str, key: str, value: str) -> "Config":
        raw = {s: dict(kv) for s, kv in self.raw.items()}
        raw.setdefault(section, {})[key] = value
        return Config(raw)


def load_config(path: Path) -> Config:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    raw: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            raw.setdefault(section, {})[key] = value
    return Config(raw)


def _floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.replace(";", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc


def _matrix(text: str) -> np.ndarray:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    data = [_floats(r) for r in rows]
    width = len(data[0])
    if any(len(r) != width for r in data):
        raise ConfigError(f"ragged matrix {text!r}")
    return np.array(data)


def build_system(cfg: Config) -> MapSystem:
    family = cfg.need("map", "family")
    try:
        if family == "torus":
            return TorusSystem(_matrix(cfg.need("map", "matrix")))
        if family == "affine":
            matrix = _matrix(cfg.need("map", "matrix"))
            offset_text = cfg.get("map", "offset")
            offset = np.array(_floats(offset_text)) if offset_text else None
            tol = float(cfg.get("map", "split_tol", "1e-6"))
            return AffineSystem(matrix, offset, tol)
        if family == "interval":
            return IntervalSystem(
                a=float(cfg.need("map", "a")),
                b=float(cfg.need("map", "b")),
                c=float(cfg.need("map", "c")),
                alpha=float(cfg.need("map", "alpha")),
                beta=float(cfg.need("map", "beta")),
            )
    except (UsageError, DomainError) as exc:
        raise ConfigError(f"invalid map parameters: {exc}") from exc
    raise ConfigError(f"unknown map family {family!r}")


def build_model(cfg: Config, seed: int) -> PerturbationModel:
    kind = cfg.need("perturbation", "kind")
    try:
        if kind == "gaussian":
            return PerturbationModel.gaussian(float(cfg.need("perturbation", "sigma")), seed)
        if kind == "uniform":
            return PerturbationModel.uniform(float(cfg.need("perturbation", "amplitude")), seed)
        if kind == "rare":
            return PerturbationModel.rare(float(cfg.need("perturbation", "density")),
                                          float(cfg.need("perturbation", "amplitude")), seed)
        if kind == "average_small":
            return PerturbationModel.average_small(float(cfg.need("perturbation", "target")), seed)
    except UsageError as exc:
        raise ConfigError(f"invalid perturbation parameters: {exc}") from exc
    raise ConfigError(f"unknown perturbation kind {kind!r}")


def build_anchor(cfg: Config, system: MapSystem):
    text = cfg.get("perturbation", "anchor")
    if text is None:
        return 0.3 if isinstance(system, IntervalSystem) else np.full(system.d, 0.3)
    values = _floats(text)
    if isinstance(system, IntervalSystem):
        if len(values) != 1:
            raise ConfigError("interval anchors are single numbers")
        return values[0]
    if len(values) != system.d:
        raise ConfigError(f"anchor must have {system.d} coordinates")
    return np.array(values)


def build_window(cfg: Config, radius_override: Optional[int]) -> Window:
    radius = radius_override if radius_override is not None else \
        int(cfg.get("run", "radius", "256"))
    if radius < 1:
        raise ConfigError("radius must be at least 1")
    one_sided = cfg.get("run", "one_sided", "false").lower() in ("1", "true", "yes")
    return Window.forward(2 * radius) if one_sided else Window.centered(radius)


def build_ladder(cfg: Config, window: Window) -> Optional[tuple[int, ...]]:
    text = cfg.get("run", "ladder")
    if text is None:
        return None
    ladder = tuple(int(v) for v in _floats(text))
    if not ladder or any(k < 1 for k in ladder):
        raise ConfigError("ladder radii must be positive integers")
    return ladder


def _seed_list(cfg: Config, seed_override: Optional[int]) -> list[int]:
    base = seed_override if seed_override is not None else int(cfg.get("run", "seed", "1"))
    count = int(cfg.get("run", "seeds", "1"))
    if count < 1:
        raise ConfigError("run.seeds must be at least 1")
    return list(range(base, base + count))


# ---------------------------------------------------------------------------
# subcommands


def run_classify(cfg: Config, out: Path, seed_override, radius_override, checks) -> int:
    system = build_system(cfg)
    window = build_window(cfg, radius_override)
    anchor = build_anchor(cfg, system)
    rows = []
    for seed in _seed_list(cfg, seed_override):
        model = build_model(cfg, seed)
        pseudo = make_pseudo(system, anchor, model, window)
        # zero-magnitude models reproduce true orbits; classify at any
        # positive accuracy
        report = classify(pseudo, max(model.audit_epsilon, 1e-15))
        rows.append([seed, report.max_gap, report.full_average, report.density,
                     report.satisfies_uniform, report.satisfies_average,
                     report.satisfies_weak_average, report.satisfies_rare])
    write_csv(out / "classify.csv",
              ["seed", "max_gap", "avg_gap", "density",
               "uniform", "avg_strong", "avg_weak", "rare"], rows)
    return EXIT_PASS


def _shadow_one(system, cfg: Config, seed: int, window: Window,
                ladder, checks: bool):
    model = build_model(cfg, seed)
    anchor = build_anchor(cfg, system)
    pseudo = make_pseudo(system, anchor, model, window)
    engine = cfg.get("run", "engine", "parallel")
    if engine == "parallel":
        result = parallel_glue(system, pseudo, ladder)
    elif engine == "sequential":
        result = sequential_glue(system, pseudo, ladder)
    else:
        raise ConfigError(f"unknown engine {engine!r}")
    verdict = final_check(system, result,
                          uniformly_bounded=(model.kind == "uniform"))
    recursion = gap_recursion_check(result) if checks else []
    gap_sums = gap_sum_check(result) if checks else []
    return model, pseudo, result, verdict, recursion, gap_sums


def _write_trajectory(path: Path, system, pseudo, orbit) -> None:
    errs = system.metric_many(orbit.states, pseudo.states)
    dim = 1 if pseudo.states.ndim == 1 else pseudo.states.shape[1]
    header = ["t"] + [f"y{i}" for i in range(dim)] + [f"z{i}" for i in range(dim)] \
        + ["error"]
    rows = []
    for j, t in enumerate(pseudo.window.indices()):
        y = pseudo.states[j] if dim > 1 else [pseudo.states[j]]
        z = orbit.states[j] if dim > 1 else [orbit.states[j]]
        rows.append([t, *[float(v) for v in y], *[float(v) for v in z], float(errs[j])])
    write_csv(path, header, rows)


def _write_rounds(path: Path, result, gap_sums) -> None:
    by_round = {}
    for v in gap_sums:
        by_round.setdefault(v.round_index, {})[v.radius] = v
    header = ["n", "junction_count", "max_gap", "min_segment", "max_segment",
              "sup_change"]
    for k in result.ladder:
        header += [f"R_{k}", f"bound_{k}", f"slack_{k}", f"pass_{k}", f"Q_{k}"]
    rows = []
    for st in result.rounds:
        row = [st.round_index, st.junction_count, st.max_gap,
               st.min_segment, st.max_segment, st.sup_change]
        for i, k in enumerate(result.ladder):
            v = by_round.get(st.round_index, {}).get(k)
            row += [st.gap_sums[i],
                    v.bound if v else st.gap_sum_bounds[i],
                    v.slack_allowance if v else 0.0,
                    v.ok if v else True,
                    st.avg_errors[i]]
        rows.append(row)
    write_csv(path, header, rows)


def run_shadow(cfg: Config, out: Path, seed_override, radius_override, checks) -> int:
    system = build_system(cfg)
    window = build_window(cfg, radius_override)
    ladder = build_ladder(cfg, window)
    summary_rows = []
    all_ok = True
    for seed in _seed_list(cfg, seed_override):
        model, pseudo, result, verdict, recursion, gap_sums = _shadow_one(
            system, cfg, seed, window, ladder, checks)
        _write_trajectory(out / f"trajectory_{seed}.csv", system, pseudo, result.orbit)
        _write_rounds(out / f"rounds_{seed}.csv", result, gap_sums)
        rec_ok = all(v.ok for v in recursion) if checks else True
        sums_ok = all(v.ok for v in gap_sums) if checks else True
        uni_ok = verdict.uniform_ok if verdict.uniform_ok is not None else True
        seed_ok = verdict.average_ok and uni_ok and rec_ok and sums_ok
        all_ok = all_ok and seed_ok
        summary_rows.append([
            seed, verdict.epsilon, verdict.rate_total, verdict.bound,
            verdict.average_error, verdict.uniform_error,
            verdict.average_ok,
            verdict.uniform_ok if verdict.uniform_ok is not None else "",
            rec_ok, sums_ok, len(result.rounds) - 1,
            result.rounds[0].junction_count,
        ])
    write_csv(out / "summary.csv",
              ["seed", "eps_hat", "phi", "bound", "avg_error", "uniform_error",
               "avg_ok", "uniform_ok", "recursion_ok", "gap_sums_ok",
               "rounds", "junctions"], summary_rows)
    if not checks:
        return EXIT_PASS
    return EXIT_PASS if all_ok else EXIT_BOUND_FAILURE


_SWEEPABLE = {
    "perturbation.sigma", "perturbation.amplitude", "perturbation.density",
    "perturbation.target", "run.radius", "map.a", "map.b", "map.c",
    "map.alpha", "map.beta",
}


def run_sweep(cfg: Config, out: Path, seed_override, radius_override, checks) -> int:
    parameter = cfg.need("sweep", "parameter")
    if parameter not in _SWEEPABLE:
        raise ConfigError(f"cannot sweep {parameter!r}; choose one of "
                          + ", ".join(sorted(_SWEEPABLE)))
    values = _floats(cfg.need("sweep", "values"))
    if not values:
        raise ConfigError("sweep.values is empty")
    workers = int(cfg.get("sweep", "workers", "1"))
    section, key = parameter.split(".")
    seeds = _seed_list(cfg, seed_override)

    points = []
    for value in values:
        text = fmt(int(value)) if parameter == "run.radius" else fmt(float(value))
        point_cfg = cfg.with_value(section, key, text)
        for seed in seeds:
            points.append((value, seed, point_cfg))

    def work(point):
        value, seed, point_cfg = point
        system = build_system(point_cfg)
        window = build_window(point_cfg, radius_override)
        ladder = build_ladder(point_cfg, window)
        _, pseudo, result, verdict, recursion, gap_sums = _shadow_one(
            system, point_cfg, seed, window, ladder, checks)
        rec_ok = all(v.ok for v in recursion) if checks else True
        sums_ok = all(v.ok for v in gap_sums) if checks else True
        return [value, seed, verdict.epsilon, verdict.rate_total, verdict.bound,
                verdict.average_error, verdict.uniform_error,
                verdict.average_ok, rec_ok, sums_ok]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, points))
    else:
        rows = [work(p) for p in points]
    write_csv(out / "sweep.csv",
              ["value", "seed", "eps_hat", "phi", "bound", "avg_error",
               "uniform_error", "avg_ok", "recursion_ok", "gap_sums_ok"], rows)
    ok = all(bool(r[7]) and bool(r[8]) and bool(r[9]) for r in rows)
    return EXIT_PASS if (ok or not checks) else EXIT_BOUND_FAILURE


def run_primitive(matrix_path: Path) -> int:
    try:
        text = matrix_path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file: {exc}") from exc
    system = read_transition_matrix(text)
    if system.exponent is None:
        print("none")
    else:
        print(f"M={system.exponent}")
    return EXIT_PASS


def run_decay_fit(cfg: Config, out: Path) -> int:
    coeff = float(cfg.get("decay", "coefficient", "1.0"))
    alpha = float(cfg.get("decay", "alpha", "1.0"))
    v0 = float(cfg.get("decay", "v0", "1.0"))
    steps = int(cfg.get("decay", "steps", "10000"))
    try:
        probe = neutral_rate_probe(coeff, alpha, v0, steps)
    except UsageError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [[n, float(v)] for n, v in enumerate(probe.values)]
    write_csv(out / "decay.csv", ["n", "value"], rows)
    gamma = probe.gamma_hat if probe.gamma_hat is not None else math.nan
    residual = probe.fit_residual if probe.fit_residual is not None else math.nan
    reference = probe.reference if probe.reference is not None else math.nan
    write_csv(out / "decay_fit.csv",
              ["gamma_hat", "fit_residual", "reference"],
              [[gamma, residual, reference]])
    print(f"gamma_hat={fmt(gamma)} residual={fmt(residual)} reference={fmt(reference)}")
    return EXIT_PASS


def run_glue(cfg: Config, out: Path, seed_override, radius_override) -> int:
    system = build_system(cfg)
    radius = radius_override if radius_override is not None else \
        int(cfg.get("glue", "radius", "32"))
    seed = seed_override if seed_override is not None else \
        int(cfg.get("glue", "seed", "1"))
    x0_text = cfg.need("glue", "x0")
    y0_text = cfg.need("glue", "y0")
    if isinstance(system, IntervalSystem):
        x0 = _floats(x0_text)[0]
        y0 = _floats(y0_text)[0]
    else:
        x0 = np.array(_floats(x0_text))
        y0 = np.array(_floats(y0_text))
    rng = np.random.default_rng(seed)
    x = orbit_through(system, x0, Window(-radius, 0), rng)
    y = forward_orbit(system, y0, radius)
    cert = system.glue(x, y)
    rows = []
    for k in cert.z.window.indices():
        rows.append([k, cert.error_at(k), cert.bound_at(k)])
    write_csv(out / "certificate.csv", ["k", "error", "bound"], rows)
    print(f"scale={fmt(cert.scale)} strong={fmt(cert.strong)} "
          f"satisfied={fmt(cert.satisfied)} worst_slack={fmt(cert.worst_slack)}")
    if not cert.gluable:
        return EXIT_UNSUPPORTED
    return EXIT_PASS if cert.satisfied else EXIT_BOUND_FAILURE


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadowlab",
        description="Shadowing experiments: trajectory gluing, bound checks, probes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, required=True)
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default: run.out or '.')")
        p.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
        p.add_argument("--radius", type=int, default=None,
                       help="override the window radius")
        p.add_argument("--no-bound-checks", action="store_true")

    for name in ("classify", "shadow", "sweep", "glue"):
        common(sub.add_parser(name))
    decay = sub.add_parser("decay-fit")
    decay.add_argument("--config", type=Path, required=True)
    decay.add_argument("--out", type=Path, default=None)
    prim = sub.add_parser("primitive")
    prim.add_argument("matrix", type=Path)
    return parser


def _resolve_out(cfg: Optional[Config], arg_out: Optional[Path]) -> Path:
    if arg_out is not None:
        out = arg_out
    elif cfg is not None and cfg.get("run", "out"):
        out = Path(cfg.get("run", "out"))
    else:
        out = Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "primitive":
            return run_primitive(args.matrix)
        cfg = load_config(args.config)
        out = _resolve_out(cfg, args.out)
        if args.command == "decay-fit":
            return run_decay_fit(cfg, out)
        checks = not args.no_bound_checks
        if args.command == "classify":
            return run_classify(cfg, out, args.seed, args.radius, checks)
        if args.command == "shadow":
            return run_shadow(cfg, out, args.seed, args.radius, checks)
        if args.command == "sweep":
            return run_sweep(cfg, out, args.seed, args.radius, checks)
        if args.command == "glue":
            return run_glue(cfg, out, args.seed, args.radius)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, UsageError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (UnsupportedMapError, NonGluableError) as exc:
        print(f"unsupported configuration: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
