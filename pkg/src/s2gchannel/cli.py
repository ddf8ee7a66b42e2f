"""Batch command-line front end.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical failure.
Floats in written files carry 6 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geom import SatelliteGeometry
from .gridsim import (
    SimulationConfig,
    export_heatmap,
    fmt,
    load_simulation_config,
    read_results,
    simulate_area,
    write_results,
)
from .modelfit import evaluate, fit, load_model, save_model, select_points
from .scene import load_scene, partition, save_scene
from .synth import generate_manhattan

log = logging.getLogger("s2gchannel")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def write_manifest(out: Path, command: str, **fields) -> None:
    manifest = {
        "tool": "s2gchannel",
        "version": __version__,
        "command": command,
        "scene": fields.pop("scene", None),
        "config": fields.pop("config", None),
        "satellite": fields.pop("satellite", None),
        "out": str(out),
        "seed": fields.pop("seed", None),
        "args": fields,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> SimulationConfig:
    cfg = load_simulation_config(args.config) if args.config else SimulationConfig()
    overrides = {}
    if getattr(args, "mesh_n", None) is not None:
        overrides["mesh_n"] = args.mesh_n
    if getattr(args, "seg_size_deg", None) is not None:
        overrides["seg_size_deg"] = args.seg_size_deg
    if overrides:
        cfg = SimulationConfig(**{**cfg.__dict__, **overrides})
    return cfg


def cmd_scene_stats(args) -> int:
    scene = load_scene(args.scene)
    seg = args.seg_size_deg if args.seg_size_deg is not None else 0.005
    grid = partition(scene, seg)
    rows = [(s.row, s.col, fmt(s.mu), fmt(s.h_avg)) for line in grid for s in line]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["row", "col", "mu", "h_avg"])
    writer.writerows(rows)
    if args.out:
        out = _out_dir(args.out)
        with open(out / "scene_stats.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "col", "mu", "h_avg"])
            w.writerows(rows)
        write_manifest(out, "scene-stats", scene=args.scene, seg_size_deg=seg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    cfg = _config(args)
    grid = partition(scene, cfg.seg_size_deg)
    out = _out_dir(args.out)
    results = []
    for elev in args.elev_deg:
        sat = SatelliteGeometry(args.altitude_km, elev, args.azimuth_deg)
        res, raster = simulate_area(scene, grid, sat, cfg, workers=args.workers)
        results.extend(res)
        export_heatmap(raster, out / f"heatmap_el{fmt(elev)}.csv")
        log.info("elevation %s: %d segments", elev, len(res))
    write_results(results, out / "results.json")
    write_manifest(
        out,
        "simulate",
        scene=args.scene,
        config=args.config,
        satellite={"altitude_km": args.altitude_km, "elevation_deg": list(args.elev_deg), "azimuth_deg": args.azimuth_deg},
        simulation=cfg.to_dict(),
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    records = read_results(args.results)
    points = select_points(records, args.kind, args.filter or ())
    model = fit(points, args.kind)
    model = type(model)(**{**model.to_dict(), "filter": ";".join(args.filter) if args.filter else None})
    out = _out_dir(args.out)
    save_model(model, out / f"model_{args.kind}.json")
    write_manifest(out, "fit", results=args.results, kind=args.kind, filters=args.filter or [])
    print(json.dumps(json.loads((out / f"model_{args.kind}.json").read_text())))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    for x in args.x:
        print(f"{fmt(x)},{fmt(evaluate(model, x))}")
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    if args.kind != "manhattan":
        raise ValueError(f"unknown synthetic scene kind {args.kind!r}")
    scene = generate_manhattan(
        args.density,
        args.mean_height,
        height_spread=args.height_spread,
        street_width=args.street_width,
        block_pitch=args.block_pitch,
        rows=args.rows,
        cols=args.cols,
        seg_size_deg=args.seg_size_deg if args.seg_size_deg is not None else 0.005,
        seed=args.seed,
    )
    out = _out_dir(args.out)
    save_scene(scene, out / "scene.json")
    write_manifest(
        out,
        "gen-synthetic",
        seed=args.seed,
        kind=args.kind,
        density=args.density,
        mean_height=args.mean_height,
        height_spread=args.height_spread,
        street_width=args.street_width,
        block_pitch=args.block_pitch,
        rows=args.rows,
        cols=args.cols,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="s2gchannel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scene-stats", help="per-segment building density and mean height")
    s.add_argument("--scene", required=True)
    s.add_argument("--seg-size-deg", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_scene_stats)

    s = sub.add_parser("simulate", help="simulate path loss over the segment grid")
    s.add_argument("--scene", required=True)
    s.add_argument("--config")
    s.add_argument("--elev-deg", type=float, nargs="+", required=True)
    s.add_argument("--azimuth-deg", type=float, default=180.0)
    s.add_argument("--altitude-km", type=float, default=550.0)
    s.add_argument("--seg-size-deg", type=float)
    s.add_argument("--mesh-n", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="fit a logarithmic loss model to simulation results")
    s.add_argument("--results", required=True)
    s.add_argument("--kind", choices=["elevation", "density", "height"], required=True)
    s.add_argument("--filter", action="append", help="cohort bin, e.g. mu=0.3:±0.02 (repeatable)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("evaluate", help="evaluate a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--x", type=float, nargs="+", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("gen-synthetic", help="generate a seeded synthetic scene")
    s.add_argument("--kind", default="manhattan")
    s.add_argument("--density", type=float, required=True)
    s.add_argument("--mean-height", type=float, default=8.9)
    s.add_argument("--height-spread", type=float, default=0.0)
    s.add_argument("--street-width", type=float, default=12.0)
    s.add_argument("--block-pitch", type=float, default=60.0)
    s.add_argument("--rows", type=int, default=1)
    s.add_argument("--cols", type=int, default=1)
    s.add_argument("--seg-size-deg", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_synthetic)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
