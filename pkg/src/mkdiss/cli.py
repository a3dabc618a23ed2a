"""Command line pipeline: generate -> evolve -> analyze -> verdict, plus harmonic tables.

Every command writes into ``--out`` and appends an entry to
``manifest.json`` listing the config used, tool versions and the sha256
of every file read or written.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import tempfile
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import fieldio
from .config import dump_config, load_config
from .errors import ConfigurationError, MKDissError, ParameterError
from .grid import GridSpec, MKConfig, RingConfig, mk_initial_configuration, set_threads
from .harmonic import harmonic_measure_numeric, harmonic_table, random_slit_set, solynin_h, solve_M
from .monitor import FrameworkConstants, criticality_verdict
from .oscillation import WeightSpec, bmo_phi_norm, direction_field
from .solver import InstabilityError, RunConfig, Timeline, evolve
from .sparseness import (MODE_1D, MODE_3D, fibonacci_directions, lattice_directions,
                         sparseness_scale, superlevel_mask, volume_decay_series)

log = logging.getLogger("mkdiss")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

INITIAL = "initial.slf"
TIMELINE = "timeline"
ANALYSIS = "analysis"
VERDICT = "verdict"
MANIFEST = "manifest.json"


# --- building library objects from config --------------------------------------

def _built(section, fn):
    try:
        return fn()
    except (ParameterError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"section {section!r}: {exc}") from exc


def grid_from(cfg) -> GridSpec:
    g = cfg["grid"]
    return _built("grid", lambda: GridSpec(g["n"], g["box_length"]))


def mk_from(cfg) -> MKConfig:
    r = cfg["rings"]
    return _built("rings", lambda: MKConfig(
        ring=RingConfig(r["radius"], r["core_radius"], r["circulation"]),
        inclination=r["inclination"], separation=r["separation"],
        viscosity=cfg["solver"]["nu"]))


def run_from(cfg, output_dir) -> RunConfig:
    s = cfg["solver"]
    g = cfg["grid"]
    return _built("solver", lambda: RunConfig(
        n=g["n"], box_length=g["box_length"], nu=s["nu"], t_final=s["t_final"],
        snapshot_interval=s["snapshot_interval"], cfl=s["cfl"], dealias=s["dealias"],
        store_fields=s["store_fields"], output_dir=str(output_dir), dt_max=s["dt_max"],
        viscous=s["viscous"]))


def weight_from(cfg) -> WeightSpec:
    o = cfg["oscillation"]

    def build():
        if o["weight"] == "power":
            if o["alpha"] is None:
                raise ConfigurationError("oscillation.alpha is required for power weights")
            return WeightSpec.power(o["alpha"], o["r_max"])
        if o["weight"] == "constant":
            return WeightSpec.constant(o["r_max"])
        if o["weight"] == "log_composite":
            return WeightSpec.log_composite(o["k"], o["offset"], o["r_max"])
        raise ConfigurationError(f"unknown weight {o['weight']!r}")

    return _built("oscillation", build)


def constants_from(cfg) -> FrameworkConstants:
    return _built("monitor", lambda: FrameworkConstants(**cfg["monitor"]["constants"]))


def directions_from(cfg):
    d = cfg["sparseness"]["directions"]
    return lattice_directions() if d is None else fibonacci_directions(d)


def bmo_scales(cfg, grid: GridSpec, weight: WeightSpec) -> list:
    explicit = cfg["oscillation"]["scales"]
    if explicit is not None:
        return [float(r) for r in explicit]
    scales = []
    r = weight.r_max
    while r >= 2 * grid.spacing - 1e-12:
        scales.append(r)
        r /= 2
    return scales


# --- manifest --------------------------------------------------------------------------

def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("mkdiss", "numpy", "scipy", "numba", "PyYAML"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Manifest:
    """Append-only record of what each command read and wrote."""

    def __init__(self, out: Path, command: str, cfg: dict, seed: int, threads: int):
        self.path = out / MANIFEST
        self.out = out
        self.entry = {"command": command, "started": _now(), "seed": seed,
                      "threads": threads, "config": cfg, "versions": _versions(),
                      "inputs": [], "outputs": []}

    def _record(self, kind, path):
        path = Path(path)
        rel = os.path.relpath(path, self.out)
        self.entry[kind].append({"path": rel, "sha256": fieldio.file_digest(path)})

    def input(self, path):
        self._record("inputs", path)

    def output(self, path):
        self._record("outputs", path)

    def commit(self, status="ok"):
        self.entry["finished"] = _now()
        self.entry["status"] = status
        entries = []
        if self.path.exists():
            entries = json.loads(self.path.read_text())["entries"]
        entries.append(self.entry)
        tmp = tempfile.NamedTemporaryFile("w", dir=self.out, delete=False, suffix=".tmp")
        with tmp:
            json.dump({"entries": entries}, tmp, indent=2, default=_json_default)
        os.replace(tmp.name, self.path)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o)}")


# --- commands ----------------------------------------------------------------------------

def cmd_generate(cfg, out: Path, man: Manifest) -> Path:
    grid = grid_from(cfg)
    omega = mk_initial_configuration(mk_from(cfg), grid)
    path = out / INITIAL
    fieldio.write_field(path, omega)
    man.output(path)
    return path


def cmd_evolve(cfg, out: Path, man: Manifest, resume: bool = False) -> Timeline:
    tdir = out / TIMELINE
    run = run_from(cfg, tdir)
    if resume:
        if not (tdir / "timeline.json").exists():
            raise FileNotFoundError(f"nothing to resume: {tdir / 'timeline.json'} is missing")
        previous = Timeline.load(tdir)
        last = previous[-1]
        omega = last.load()
        if omega is None:
            raise FileNotFoundError(f"last snapshot at t={last.time} has no stored field")
        man.input(last.path)
        tail = evolve(omega, run, t0=last.time, index0=len(previous) - 1)
        timeline = Timeline(previous.snapshots[:-1] + tail.snapshots, tail.config)
    else:
        init = out / INITIAL
        if not init.exists():
            cmd_generate(cfg, out, man)
        omega = fieldio.read_field(init)
        man.input(init)
        try:
            timeline = evolve(omega, run)
        except InstabilityError as exc:
            if exc.timeline is not None and len(exc.timeline):
                exc.timeline.save(tdir)
            raise
    timeline.config["viscous"] = run.viscous
    index = timeline.save(tdir)
    man.output(index)
    man.output(tdir / "diagnostics.csv")
    for s in timeline:
        if s.path is not None:
            man.output(s.path)
    return timeline


def analyze_timeline(timeline: Timeline, cfg) -> dict:
    """Sparseness, bmo and volume-decay rows for every stored snapshot."""
    sp = cfg["sparseness"]
    lam = sp["lam"] if sp["lam"] is not None else solve_M().lam
    delta = sp["delta"]
    weight = weight_from(cfg)
    osc = cfg["oscillation"]
    dirs = directions_from(cfg)
    sparse_rows, bmo_rows = [], []
    for snap in timeline:
        omega = snap.load()
        if omega is None:
            raise FileNotFoundError(f"snapshot at t={snap.time} has no stored field")
        linf = float(omega.max_norm().max())
        sls = superlevel_mask(omega, lam)
        row = {"t": snap.time, "omega_linf": linf, "threshold": sls.threshold,
               "volume": sls.union.volume, "r_s_3d": None, "r_s_1d": None,
               "nonmonotone_3d": None, "status": "ok"}
        if sls.union.empty:
            row["status"] = "empty"
        else:
            s3 = sparseness_scale(sls, delta, MODE_3D)
            row["r_s_3d"] = s3.scale
            row["nonmonotone_3d"] = s3.nonmonotone
            if s3.scale is None:
                row["status"] = "not_sparse"
            if sp["one_d"]:
                row["r_s_1d"] = sparseness_scale(sls, delta, MODE_1D, dirs).scale
        sparse_rows.append(row)
        dfield = direction_field(omega, osc["floor_fraction"])
        b = {"t": snap.time, "weight": weight.describe(), "l1_part": None, "sup_part": None,
             "total": None, "argmax_x": None, "argmax_y": None, "argmax_z": None,
             "argmax_r": None, "skipped_cubes": None}
        if not dfield.zero_field:
            rep = bmo_phi_norm(dfield, weight, bmo_scales(cfg, omega.grid, weight),
                               stride=osc["stride"], center_region=osc["center_region"])
            b.update(l1_part=rep.l1_part, sup_part=rep.sup_part, total=rep.total,
                     skipped_cubes=rep.skipped_cubes)
            if rep.argmax_cube is not None:
                b.update(zip(("argmax_x", "argmax_y", "argmax_z", "argmax_r"), rep.argmax_cube))
        bmo_rows.append(b)
    k = osc["k"] if osc["weight"] == "log_composite" else 1
    decay = [vars(r) for r in volume_decay_series(timeline, lam, k)]
    return {"lambda": lam, "delta": delta, "sparseness": sparse_rows, "bmo": bmo_rows,
            "volume_decay": decay}


def _write_rows(path: Path, rows: list, header: dict) -> None:
    with open(path, "w", newline="") as fh:
        for key, val in header.items():
            fh.write(f"# {key} = {json.dumps(val, default=_json_default)}\n")
        if not rows:
            return
        cols = list(rows[0])
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                        for c in cols])


def cmd_analyze(cfg, out: Path, man: Manifest, timeline_dir=None) -> dict:
    tdir = Path(timeline_dir) if timeline_dir is not None else out / TIMELINE
    timeline = Timeline.load(tdir)
    man.input(tdir / "timeline.json")
    for s in timeline:
        if s.path is not None and Path(s.path).exists():
            man.input(s.path)
    res = analyze_timeline(timeline, cfg)
    adir = out / ANALYSIS
    adir.mkdir(parents=True, exist_ok=True)
    header = {"lambda": res["lambda"], "delta": res["delta"]}
    for name in ("sparseness", "bmo", "volume_decay"):
        path = adir / f"{name}.csv"
        _write_rows(path, res[name], header)
        man.output(path)
    return res


def cmd_harmonic(cfg, out: Path, man: Manifest, seed: int) -> list:
    h = cfg["harmonic"]
    alphas = sorted(float(a) for a in h["alphas"])
    rows = _built("harmonic", lambda: harmonic_table(alphas, h["grid_n"], h["method"], h["boundary"]))
    path = out / "harmonic.csv"
    dict_rows = [dict(zip(("alpha", "closed_form", "numeric", "error"), r)) for r in rows]
    _write_rows(path, dict_rows, {"grid_n": h["grid_n"], "method": h["method"],
                                  "boundary": h["boundary"]})
    man.output(path)
    if h["random_sets"] > 0:
        rng = np.random.default_rng(seed)
        ext = []
        for a in alphas:
            if a >= 1.0:
                continue
            for i in range(h["random_sets"]):
                K = random_slit_set(a, rng, h["grid_n"])
                val = harmonic_measure_numeric(K, h["grid_n"], method=h["method"],
                                               boundary=h["boundary"]).value
                ext.append({"alpha": a, "index": i, "intervals": json.dumps(K.intervals),
                            "numeric": val, "closed_form": solynin_h(a),
                            "margin": val - solynin_h(a)})
        epath = out / "extremal.csv"
        _write_rows(epath, ext, {"seed": seed, "grid_n": h["grid_n"]})
        man.output(epath)
    return rows


def cmd_verdict(cfg, out: Path, man: Manifest, timeline_dir=None):
    tdir = Path(timeline_dir) if timeline_dir is not None else out / TIMELINE
    timeline = Timeline.load(tdir)
    man.input(tdir / "timeline.json")
    mon = cfg["monitor"]
    sp = cfg["sparseness"]
    window = tuple(mon["window"]) if mon["window"] is not None else None
    ct = criticality_verdict(
        timeline, cfg["rings"]["circulation"], cfg["solver"]["nu"], constants_from(cfg),
        k=mon["k"], delta=sp["delta"], lam=sp["lam"], window=window, mode=sp["mode"],
        measure_all=mon["measure_all"])
    paths = ct.write(out / VERDICT)
    for p in paths.values():
        man.output(p)
    return ct


# --- entry point -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML config file")
    common.add_argument("--out", type=Path, default=Path("mkdiss_out"), help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override run.seed")
    common.add_argument("--threads", type=int, default=None, help="override run.threads")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="mkdiss", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the two-ring initial field")
    ev = sub.add_parser("evolve", parents=[common], help="integrate and store snapshots")
    ev.add_argument("--resume", action="store_true", help="continue from the last stored snapshot")
    for name, text in (("analyze", "sparseness, bmo and volume-decay reports"),
                       ("verdict", "criticality timeline and verdict")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--timeline", type=Path, default=None,
                        help="timeline directory (default OUT/timeline)")
    sub.add_parser("harmonic", parents=[common], help="closed-form vs numeric harmonic measure table")
    sub.add_parser("all", parents=[common], help="generate, evolve, analyze, harmonic and verdict")
    sub.add_parser("show-config", parents=[common], help="print the resolved configuration")
    return p


def run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    if args.threads is not None:
        cfg["run"]["threads"] = args.threads
    if cfg["run"]["threads"] < 1:
        raise ConfigurationError("run.threads must be >= 1")
    if args.command == "show-config":
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    set_threads(cfg["run"]["threads"])
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(out, args.command, cfg, cfg["run"]["seed"], cfg["run"]["threads"])
    try:
        if args.command == "generate":
            cmd_generate(cfg, out, man)
        elif args.command == "evolve":
            cmd_evolve(cfg, out, man, resume=args.resume)
        elif args.command == "analyze":
            cmd_analyze(cfg, out, man, args.timeline)
        elif args.command == "harmonic":
            cmd_harmonic(cfg, out, man, cfg["run"]["seed"])
        elif args.command == "verdict":
            ct = cmd_verdict(cfg, out, man, args.timeline)
            print(f"verdict: {ct.verdict} ({ct.reason})")
        elif args.command == "all":
            cmd_generate(cfg, out, man)
            cmd_evolve(cfg, out, man)
            cmd_analyze(cfg, out, man)
            cmd_harmonic(cfg, out, man, cfg["run"]["seed"])
            ct = cmd_verdict(cfg, out, man)
            print(f"verdict: {ct.verdict} ({ct.reason})")
    except BaseException:
        man.commit(status="failed")
        raise
    man.commit()
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MKDissError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
