"""Command-line entry point: ``mixpose {map,estimate,calibrate,study}``.

Exit codes: 0 success, 2 usage or bad config file, 3 numeric failure,
4 I/O failure. All outputs are deterministic given ``--seed``.

Config files are plain text, one directive per line, ``#`` starts a comment::

    feature 0 -25 -43.3        # body feature center (x y z)
    object_sigma 5             # isotropic feature std, 0 for exact points
    camera 0                   # parallel camera angle (rad)
    lateration 0 -1000 0       # range source position
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import MixposeError
from .estimator import AnnealSchedule, estimate_pose
from .geometry import Lateration, ParallelCamera, Projector
from .kernels import BACKEND
from .simharness import (
    GRID_SPACING,
    MapSettings,
    RunSeeds,
    SystemSpec,
    calibration_case,
    make_scenario,
    make_system,
    map_system,
    run_calibration,
    run_map,
    run_study,
    sample_start_offset,
    sample_true_pose,
    study_samples,
    synthesize,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

COMMANDS = ("map", "estimate", "calibrate", "study")
DEFAULT_SYSTEM = {"map": 1, "estimate": 2, "calibrate": 2, "study": 2}


class ConfigError(ValueError):
    """Malformed object/geometry config file."""


@dataclass
class GeometryConfig:
    features: np.ndarray | None = None
    object_sigma: float | None = None
    projectors: tuple[Projector, ...] | None = None


@dataclass
class RunConfig:
    command: str
    system: int
    scenario: str = "I"
    M: int = 300
    R: int | None = 1000
    seed: int = 0
    sigma_eps: float | None = None
    object_sigma: float | None = None
    snr: float | None = None
    map_res: int = 201
    phi_range: tuple[float, float] = MapSettings().phi_range
    w_range: tuple[float, float] = MapSettings().w_range
    anneal: tuple[float, ...] | None = None
    perturb: float | None = None
    jobs: int = 1
    grid_spacing: float = GRID_SPACING
    config: Path | None = None
    out: Path = field(default_factory=lambda: Path("out"))


def load_config(path) -> GeometryConfig:
    """Parse an object/geometry file; raises :class:`ConfigError` on bad content."""
    features, projectors, sigma = [], [], None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, *args = line.split()
            try:
                nums = [float(a) for a in args]
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
            if not all(math.isfinite(v) for v in nums):
                raise ConfigError(f"{path}:{lineno}: non-finite value in {line!r}")
            expected = {"feature": 3, "lateration": 3, "camera": 1, "object_sigma": 1}.get(key)
            if expected is None:
                raise ConfigError(f"{path}:{lineno}: unknown directive {key!r}")
            if len(nums) != expected:
                raise ConfigError(f"{path}:{lineno}: {key} takes {expected} value(s), got {len(nums)}")
            if key == "feature":
                features.append(nums)
            elif key == "camera":
                projectors.append(ParallelCamera(nums[0]))
            elif key == "lateration":
                projectors.append(Lateration(tuple(nums)))
            else:
                if nums[0] < 0:
                    raise ConfigError(f"{path}:{lineno}: object_sigma must be nonnegative")
                sigma = nums[0]
    return GeometryConfig(np.array(features) if features else None, sigma,
                          tuple(projectors) if projectors else None)


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return v


def _int_at_least(lo: int):
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be at least {lo}, got {v}")
        return v
    parse.__name__ = f"int>={lo}"
    return parse


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(_positive_float(t) for t in text.split(",") if t.strip())
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"bad list {text!r}: {exc}") from None


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    if not b > a:
        raise argparse.ArgumentTypeError(f"range must be increasing, got {text}")
    return a, b


def _scenario(text: str) -> str:
    s = text.upper()
    if s not in ("I", "II", "III", "IV"):
        raise argparse.ArgumentTypeError(f"scenario must be one of I, II, III, IV, got {text!r}")
    return s


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="mixpose", formatter_class=fmt,
        description="Mixture-model pose estimation: objective maps, single estimates, "
                    "device calibration and randomized accuracy studies.",
        epilog="exit codes: 0 ok, 2 usage, 3 numeric failure, 4 I/O failure",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p, command):
        p.add_argument("--system", type=int, choices=(1, 2, 3), default=DEFAULT_SYSTEM[command],
                       help="1: two cameras, exact points; 2: two cameras, Gaussian features; "
                            "3: three lateration sources")
        p.add_argument("--scenario", type=_scenario, default="I",
                       help="I baseline, II wide kernel, III deformed body, IV noisy")
        p.add_argument("--seed", type=_int_at_least(0), default=0, help="master seed")
        p.add_argument("--sigma-eps", type=_positive_float, default=None,
                       help="sensing-kernel std; default from scenario (5, or 20 in II)")
        p.add_argument("--object-sigma", type=_nonneg_float, default=None,
                       help="feature std; default 5 in studies, 10 in maps, 0 for system 1")
        p.add_argument("--snr", type=_positive_float, default=None,
                       help="measurement SNR; default from scenario (0.5 in IV, none otherwise)")
        p.add_argument("--grid-spacing", type=_positive_float, default=GRID_SPACING,
                       help="measurement grid spacing")
        p.add_argument("--config", type=Path, default=None,
                       help="plain-text body/device file overriding the system defaults")
        p.add_argument("--out", type=Path, default=Path("out"), metavar="DIR", help="output directory")

    p = sub.add_parser("map", formatter_class=fmt, help="reduced (phi, w) objective map")
    common(p, "map")
    p.add_argument("--R", type=_int_at_least(1), default=None,
                   help="samples per feature; default 240 (system 2) or 120 (system 3)")
    p.add_argument("--map-res", type=_int_at_least(2), default=201, help="map points per axis")
    p.add_argument("--phi-range", type=_pair, default=MapSettings().phi_range, metavar="LO,HI")
    p.add_argument("--w-range", type=_pair, default=MapSettings().w_range, metavar="LO,HI")

    p = sub.add_parser("estimate", formatter_class=fmt, help="one randomized 6D pose estimate")
    common(p, "estimate")
    p.add_argument("--R", type=_int_at_least(1), default=1000, help="samples per feature")
    p.add_argument("--anneal", type=_float_list, default=None, metavar="S1,S2,...",
                   help="decreasing kernel widths ending at the physical sigma-eps")

    p = sub.add_parser("calibrate", formatter_class=fmt, help="device calibration round trip")
    common(p, "calibrate")
    p.add_argument("--R", type=_int_at_least(1), default=1000, help="samples per feature")
    p.add_argument("--perturb", type=_positive_float, default=None,
                   help="true misalignment: camera angle (default 0.05 rad) or "
                        "lateration start offset bound (default 3)")

    p = sub.add_parser("study", formatter_class=fmt, help="randomized M-run 6D accuracy study")
    common(p, "study")
    p.add_argument("--M", type=_int_at_least(1), default=300, help="number of runs")
    p.add_argument("--R", type=_int_at_least(1), default=1000, help="samples per feature")
    p.add_argument("--jobs", type=_int_at_least(1), default=1, help="worker processes")
    p.add_argument("--anneal", type=_float_list, default=None, metavar="S1,S2,...",
                   help="decreasing kernel widths ending at the physical sigma-eps")
    return parser


def parse_args(argv=None) -> RunConfig:
    """Parse and validate; exits with status 2 on usage errors or no arguments."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_help()
        raise SystemExit(EXIT_USAGE)
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_help()
        raise SystemExit(EXIT_USAGE)
    if ns.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    values = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__}
    cfg = RunConfig(**values)
    if cfg.anneal is not None:
        sigma = cfg.sigma_eps if cfg.sigma_eps is not None else make_scenario(cfg.scenario).sigma_eps
        try:
            AnnealSchedule(cfg.anneal)
        except ValueError as exc:
            parser.error(f"--anneal: {exc}")
        if abs(cfg.anneal[-1] - sigma) > 1e-9:
            parser.error(f"--anneal must end at the physical sigma-eps {sigma}")
    if cfg.command == "calibrate" and cfg.config is not None:
        parser.error("calibrate uses the built-in systems; --config is not supported")
    return cfg


def _scenario_for(cfg: RunConfig):
    return make_scenario(cfg.scenario, sigma_eps=cfg.sigma_eps, snr=cfg.snr)


def _system_for(cfg: RunConfig, for_map: bool = False) -> SystemSpec:
    geo = load_config(cfg.config) if cfg.config is not None else GeometryConfig()
    sigma = cfg.object_sigma if cfg.object_sigma is not None else geo.object_sigma
    build = map_system if for_map else make_system
    return build(cfg.system, sigma, features=geo.features, projectors=geo.projectors)


# Header fields per command; the output location and worker count do not
# affect results and are left out so reruns elsewhere stay byte-identical.
_SHARED = ("command", "system", "scenario", "seed", "sigma_eps", "object_sigma", "snr",
           "grid_spacing", "config")
META_FIELDS = {
    "map": _SHARED + ("R", "map_res", "phi_range", "w_range"),
    "estimate": _SHARED + ("R", "anneal"),
    "calibrate": _SHARED + ("R", "perturb"),
    "study": _SHARED + ("M", "R", "anneal"),
}


def _meta(cfg: RunConfig) -> dict[str, object]:
    d = asdict(cfg)
    meta = {"backend": BACKEND}
    for k in META_FIELDS[cfg.command]:
        v = d[k]
        if v is None:
            v = "default"
        elif isinstance(v, Path):
            v = v.as_posix()
        meta[k] = v
    return meta


def _cmd_map(cfg: RunConfig) -> str:
    system = _system_for(cfg, for_map=True)
    settings = MapSettings(cfg.phi_range, cfg.w_range, cfg.map_res)
    m = run_map(system, _scenario_for(cfg), cfg.seed, cfg.R, settings, cfg.grid_spacing)
    io.write_map(m, io.ensure_dir(cfg.out), _meta(cfg))
    pose = m.argmax_pose
    return (f"map system={cfg.system} scenario={cfg.scenario} argmax phi={pose.phi:.6f} "
            f"w={pose.w:.4f} value={m.values[m.argmax]:.6g} maxima>0.8={len(m.local_maxima(0.8))}")


def _cmd_estimate(cfg: RunConfig) -> str:
    system = _system_for(cfg)
    seeds = RunSeeds.derive(cfg.seed, 0)
    truth = sample_true_pose(seeds.pose)
    start = truth + sample_start_offset(seeds.start)
    problem = synthesize(system, _scenario_for(cfg), truth, seeds.noise, cfg.grid_spacing)
    samples = study_samples(problem, cfg.R, seeds.samples)
    schedule = AnnealSchedule(cfg.anneal) if cfg.anneal else None
    res = estimate_pose(problem, start, samples, schedule=schedule)
    row = io.estimate_row(0, seeds.run_seed, truth, start, res.pose, res.objective_value,
                          res.iterations, res.converged)
    io.write_estimates([row], io.ensure_dir(cfg.out) / "estimate.csv", _meta(cfg))
    err = res.pose.to_vector() - truth.to_vector()
    return (f"estimate system={cfg.system} scenario={cfg.scenario} "
            f"max|dphi|={np.max(np.abs(err[:3])):.3g} max|dw|={np.max(np.abs(err[3:])):.3g} "
            f"objective={res.objective_value:.6g} iterations={res.iterations} converged={int(res.converged)}")


def _cmd_calibrate(cfg: RunConfig) -> str:
    case = calibration_case(cfg.system, cfg.seed, cfg.perturb, _scenario_for(cfg), cfg.R,
                            cfg.object_sigma, cfg.grid_spacing)
    result = run_calibration(case)
    path = io.ensure_dir(cfg.out) / "calibration.csv"
    with io._open_w(path) as fh:
        fh.writelines(io.header_lines(_meta(cfg)))
        fh.write("device,kind,param,true,initial,estimate,free,abs_error\n")
        for l, (t, i, e, m) in enumerate(zip(case.truth, case.initial, result.estimate, case.free_mask)):
            kind = "camera" if isinstance(t, ParallelCamera) else "lateration"
            for k in range(len(t.params)):
                cells = [l + 1, kind, k + 1, t.params[k], i.params[k], e.params[k], m[k],
                         abs(e.params[k] - t.params[k])]
                fh.write(",".join(io.fmt(c) for c in cells) + "\n")
    return (f"calibrate system={cfg.system} free={len(result.errors)} "
            f"max_error={float(result.errors.max()):.4g}")


def _cmd_study(cfg: RunConfig) -> str:
    system = _system_for(cfg)
    schedule = AnnealSchedule(cfg.anneal) if cfg.anneal else None
    result = run_study(system, _scenario_for(cfg), cfg.M, cfg.R, cfg.seed, cfg.jobs,
                       schedule=schedule, spacing=cfg.grid_spacing)
    io.write_study([result], io.ensure_dir(cfg.out), _meta(cfg))
    if result.failures == result.M:
        raise MixposeError(f"all {result.M} runs failed; see study_runs.csv")
    rms = " ".join(f"{v:.4g}" for v in result.rms)
    return (f"study system={cfg.system} scenario={cfg.scenario} M={cfg.M} rms=[{rms}] "
            f"failures={result.failures} nonconverged={result.nonconverged}")


HANDLERS = {"map": _cmd_map, "estimate": _cmd_estimate, "calibrate": _cmd_calibrate, "study": _cmd_study}


def main(cfg: RunConfig) -> int:
    """Run one command; returns the process exit status."""
    try:
        summary = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"mixpose: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mixpose: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MixposeError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"mixpose: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(summary)
    return EXIT_OK


def run(argv=None) -> None:
    sys.exit(main(parse_args(argv)))


if __name__ == "__main__":  # pragma: no cover
    run()
