"""Command line entry point: one subcommand per experiment kind.

Configuration files are flat ``key = value`` text.  List-valued keys
(``rate``, ``angle``, ``M``, ``N``, ``seed``) may repeat; ``N`` also accepts
``lo..hi`` ranges and ``M`` accepts ``e^x``.  Command line flags override
the file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .number_field import ConfigurationError, EnumerationCapError, parse_field

KINDS = ("height", "itinerary", "partitions", "cover", "entropy", "escape", "acceptance")
SCALAR_KEYS = {"kind", "field", "eta", "points", "trajectories", "labels", "out", "sample"}
TASK_SIZE = 25


class ConfigError(ValueError):
    """Invalid configuration, with the offending line or field in the message."""


@dataclass
class ExperimentConfig:
    kind: str
    field: str = "Q"
    rates: list = dc_field(default_factory=list)
    angles: list = dc_field(default_factory=list)
    M: list = dc_field(default_factory=list)
    N: list = dc_field(default_factory=list)
    eta: float = 0.25
    seeds: list = dc_field(default_factory=lambda: [20240611])
    points: int = 100
    trajectories: int = 100
    labels: int = 50
    sample: str = "window"
    out: str = "hilbert_escape_out"

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown experiment kind {self.kind!r}")
        try:
            parse_field(self.field)
        except ConfigurationError as exc:
            raise ConfigError(f"field: {exc}") from None
        for name in ("M", "N", "rates"):
            if any(not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v))
                   for v in getattr(self, name)):
                raise ConfigError(f"{name}: grid values must be positive and finite")
        if any(v <= 1 for v in self.M):
            raise ConfigError("M: heights must exceed 1")
        if not self.seeds:
            raise ConfigError("seed: at least one seed is required")
        if any(not 0 <= s < 2 ** 64 for s in self.seeds):
            raise ConfigError("seed: seeds must be unsigned 64-bit integers")
        if not 0 < self.eta <= 0.5:
            raise ConfigError("eta: must lie in (0, 0.5]")
        for name in ("points", "trajectories", "labels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be positive")
        if self.sample not in ("window", "point"):
            raise ConfigError("sample: one of window, point")
        return self


def _parse_M(text):
    text = text.strip()
    if text.startswith("e^"):
        return math.exp(float(text[2:]))
    return float(text)


def _parse_N(text):
    text = text.strip()
    if ".." in text:
        lo, hi = (int(x) for x in text.split(".."))
        return list(range(lo, hi + 1))
    return [int(text)]


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse flat ``key = value`` text; errors name the line."""
    values = {"rate": [], "angle": [], "M": [], "N": [], "seed": []}
    scalars = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        try:
            if key == "rate" or key == "angle":
                values[key].append(float(val))
            elif key == "M":
                values[key].append(_parse_M(val))
            elif key == "N":
                values[key].extend(_parse_N(val))
            elif key == "seed":
                values[key].append(int(val))
            elif key in SCALAR_KEYS:
                if key in scalars:
                    raise ConfigError(f"line {lineno}: {key} given twice")
                scalars[key] = val
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from None
    kind = scalars.pop("kind", kind)
    if kind is None:
        raise ConfigError("kind: missing")
    cfg = ExperimentConfig(kind=kind)
    cfg.rates, cfg.angles, cfg.M, cfg.N = values["rate"], values["angle"], values["M"], values["N"]
    if values["seed"]:
        cfg.seeds = values["seed"]
    try:
        for key, val in scalars.items():
            if key == "eta":
                cfg.eta = float(val)
            elif key in ("points", "trajectories", "labels"):
                setattr(cfg, key, int(val))
            else:
                setattr(cfg, key, val)
    except ValueError:
        raise ConfigError(f"{key}: bad value {val!r}") from None
    return cfg


# -- shared helpers --------------------------------------------------------------


def _flow(cfg, default_rate):
    from .flow import FlowElement

    field = parse_field(cfg.field)
    rates = cfg.rates or [default_rate]
    try:
        return field, FlowElement.for_field(field, rates, cfg.angles or None)
    except ConfigurationError as exc:
        raise ConfigError(f"rate/angle: {exc}") from None


def _default_M(a):
    return [math.exp(3 * a.h_max)]


def _g(x):
    return f"{x:.12g}"


def _pool_map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def _tasks(cfg, total):
    """``(seed, task_index, start, count)`` chunks covering ``total`` items per seed."""
    out = []
    for seed in cfg.seeds:
        for k, start in enumerate(range(0, total, TASK_SIZE)):
            out.append((seed, k, start, min(TASK_SIZE, total - start)))
    return out


def _random_start(field, rng):
    from .module_space import act_left, random_point, random_sl2o

    return act_left(random_point(field, rng, 1.5), random_sl2o(field, rng, size=3, steps=3))


# -- task bodies (module level so worker processes can import them) -------------------


def _height_task(args):
    from .module_space import height, serialize_point
    from .seeding import task_rng

    tag, (seed, k, start, count) = args
    field = parse_field(tag)
    rng = task_rng(seed, k)
    rows = []
    for i in range(count):
        p = _random_start(field, rng)
        cert = height(p)
        wit = "" if cert.witness is None else ";".join(f"{c.x} {c.y}" for c in cert.witness.coeffs)
        rows.append((seed, start + i, _g(cert.height), cert.unit_class_count_below_1, wit,
                     serialize_point(p)))
    return rows


def _itinerary_task(args):
    from .flow import FlowElement, itinerary
    from .seeding import task_rng

    tag, rates, angles, M, N, (seed, k, start, count) = args
    field = parse_field(tag)
    a = FlowElement.for_field(field, rates, angles)
    rng = task_rng(seed, k)
    return [(f"{seed}-{start + i}", itinerary(a, _random_start(field, rng), M, N))
            for i in range(count)]


def _escape_task(args):
    from .escape import window_heights
    from .flow import FlowElement
    from .measures import DiscreteMeasure, geodesic_point, unstable_box
    from .seeding import task_rng

    tag, rates, angles, n_max, atoms, seed = args
    field = parse_field(tag)
    a = FlowElement.for_field(field, rates, angles)
    rng = task_rng(seed, 0)
    nu = DiscreteMeasure.uniform(field, unstable_box(geodesic_point(field), 1.0, atoms, rng))
    return nu, window_heights(nu, a, n_max)


# -- experiment kinds ----------------------------------------------------------------


def run_height(cfg, out, jobs):
    rows = []
    for chunk in _pool_map(_height_task, [(cfg.field, t) for t in _tasks(cfg, cfg.points)], jobs):
        rows.extend(chunk)
    path = os.path.join(out, "heights.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "point_id", "height", "classes_below_1", "witness", "point"])
        w.writerows(rows)
    return [path], 0


def _itineraries(cfg, jobs):
    field, a = _flow(cfg, 0.4)
    M = (cfg.M or _default_M(a))[0]
    N = (cfg.N or [200])[0]
    args = [(cfg.field, a.rates, a.angles, M, N, t) for t in _tasks(cfg, cfg.trajectories)]
    runs = []
    for chunk in _pool_map(_itinerary_task, args, jobs):
        runs.extend(chunk)
    return a, M, N, runs


def run_itinerary(cfg, out, jobs):
    from .flow import write_itinerary_csv, write_profile_csv

    _, _, _, runs = _itineraries(cfg, jobs)
    ids = [tid for tid, _ in runs]
    its = [it for _, it in runs]
    p1 = os.path.join(out, "itinerary.csv")
    p2 = os.path.join(out, "profiles.csv")
    write_itinerary_csv(p1, its, ids)
    write_profile_csv(p2, its, ids)
    return [p1, p2], 0


def run_partitions(cfg, out, jobs):
    from .partitions import count_q_labels, fit_phi_constant, q_label, write_label_csv

    field, a = _flow(cfg, 1.0)
    Ms = cfg.M or _default_M(a)
    Ns = cfg.N or [20, 30, 40]
    path = os.path.join(out, "partitions.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["M", "N", "q_count", "bound", "phi_constant"])
        for M in Ms:
            C = fit_phi_constant(M, a, Ns) if M > math.e else 0.0
            for N in Ns:
                count, bound = count_q_labels(M, N, a)
                w.writerow([_g(M), N, count, _g(bound), _g(C)])
    cfg_it = ExperimentConfig(**{**asdict(cfg), "M": [Ms[0]], "N": [max(Ns)]})
    _, _, _, runs = _itineraries(cfg_it, jobs)
    p2 = os.path.join(out, "labels.csv")
    write_label_csv(p2, [q_label(it, it.a) for _, it in runs], [tid for tid, _ in runs])
    return [path, p2], 0


def run_cover(cfg, out, jobs):
    from .covering import (BowenSpec, greedy_cover, inductive_cover_count, random_plabel,
                           write_cover_csv)
    from .flow import min_return_time
    from .measures import geodesic_point, unstable_box
    from .partitions import PLabel, QLabel
    from .seeding import task_rng

    field, a = _flow(cfg, 0.4)
    M = (cfg.M or _default_M(a))[0]
    Ns = cfg.N or list(range(4, 13))
    grid = unstable_box(geodesic_point(field), 2 * cfg.eta, cfg.points)
    floor = min_return_time(M, a) - 1
    rows = []
    for N in Ns:
        g = greedy_cover(grid, BowenSpec(N, a, cfg.eta))
        labels = [PLabel(QLabel(M, N, (), floor), ())]
        for seed in cfg.seeds:
            rng = task_rng(seed, N)
            labels.extend(random_plabel(rng, M, N, a) for _ in range(cfg.labels))
        for lab in labels:
            rep = inductive_cover_count(lab, a, M, N, cfg.eta)
            rows.append({"N": N, "label_hash": lab.hash, "constructed_count": rep.count,
                         "paper_bound": rep.bound_value, "greedy_lower": g.lower,
                         "greedy_upper": g.count})
    path = os.path.join(out, "cover_sweep.csv")
    write_cover_csv(path, rows)
    return [path], 0


def run_entropy(cfg, out, jobs):
    from .covering import entropy_estimate, write_entropy_csv
    from .measures import geodesic_point, window_sample
    from .seeding import task_rng

    field, a = _flow(cfg, 0.4)
    Ns = cfg.N or list(range(6, 15))
    paths = []
    for seed in cfg.seeds:
        rng = task_rng(seed, 0)
        Y = window_sample(geodesic_point(field), cfg.points, rng)
        if cfg.sample == "point":
            Y = Y[:1]
        est = entropy_estimate(Y, a, cfg.eta, Ns)
        path = os.path.join(out, f"entropy_{seed}.csv")
        write_entropy_csv(path, est)
        paths.append(path)
    return paths, 0


def run_escape(cfg, out, jobs):
    from .escape import escape_curve, mass_floor, unstable_dimension_estimate, write_escape_csv

    field, a = _flow(cfg, 1.0)
    Ms = cfg.M or _default_M(a)
    Ns = cfg.N or list(range(20, 101, 10))
    n_max = max(Ns)
    args = [(cfg.field, a.rates, a.angles, n_max, cfg.points, s) for s in cfg.seeds]
    rows = []
    for nu, H in _pool_map(_escape_task, args, jobs):
        d_hat = unstable_dimension_estimate(nu, (0.01, 0.02, 0.04, 0.08)).d_hat
        floor = float(mass_floor(a.D, d_hat, a.a_star, a.h_max))
        for M in Ms:
            curve = escape_curve(nu, a, M, n_max, H)
            for N in Ns:
                e = float(curve[N - 1])
                rows.append({"M": M, "N": N, "escape_fraction": e, "d_hat": d_hat,
                             "floor": floor, "slack": 1 - e - floor})
    path = os.path.join(out, "escape.csv")
    write_escape_csv(path, rows)
    return [path], 0


def run_acceptance_kind(cfg, out, jobs):
    from .acceptance import run_acceptance

    lines = []

    def echo(line):
        print(line, flush=True)
        lines.append(line)

    results = run_acceptance(cfg.seeds[0], out, echo=echo)
    passed = sum(r.passed for r in results)
    echo(f"{passed}/{len(results)} criteria passed")
    return sorted(os.path.join(out, f) for f in os.listdir(out) if f.endswith(".csv")), \
        0 if passed == len(results) else 1


RUNNERS = {
    "height": run_height,
    "itinerary": run_itinerary,
    "partitions": run_partitions,
    "cover": run_cover,
    "entropy": run_entropy,
    "escape": run_escape,
    "acceptance": run_acceptance_kind,
}


def _version():
    try:
        return version("hilbert-escape")
    except PackageNotFoundError:
        return "unknown"


def run(cfg: ExperimentConfig, jobs: int = 1) -> int:
    """Validate, dispatch, write the manifest; returns the exit status."""
    cfg.validate()
    os.makedirs(cfg.out, exist_ok=True)
    t0 = time.perf_counter()
    outputs, status = RUNNERS[cfg.kind](cfg, cfg.out, jobs)
    for path in outputs:
        _check_finite(path)
    canon = json.dumps({k: v for k, v in asdict(cfg).items() if k != "out"}, sort_keys=True)
    manifest = {
        "kind": cfg.kind,
        "config": asdict(cfg),
        "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "library_version": _version(),
        "numpy_version": np.__version__,
        "workers": jobs,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "outputs": [os.path.basename(p) for p in outputs],
        "exit_status": status,
    }
    with open(os.path.join(cfg.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return status


def _check_finite(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            for cell in row:
                try:
                    v = float(cell)
                except ValueError:
                    continue
                if not math.isfinite(v):
                    raise RuntimeError(f"{path}:{lineno}: non-finite value emitted")


def build_parser():
    parser = argparse.ArgumentParser(prog="hilbert-escape", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--jobs", type=int, default=1, metavar="INT")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                cfg = parse_config(fh.read(), args.kind)
            if cfg.kind != args.kind:
                raise ConfigError(f"kind: config says {cfg.kind!r} but subcommand is {args.kind!r}")
        else:
            cfg = ExperimentConfig(kind=args.kind)
        if args.seed is not None:
            cfg.seeds = [args.seed]
        if args.out is not None:
            cfg.out = args.out
        if args.jobs < 1:
            raise ConfigError("--jobs: must be at least 1")
        return run(cfg, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EnumerationCapError as exc:
        print(f"resource cap exceeded: enumeration cap {exc.cap} (needed {exc.needed})", file=sys.stderr)
        return 3
    except OverflowError as exc:
        print(f"resource cap exceeded: flow range ({exc})", file=sys.stderr)
        return 3
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
