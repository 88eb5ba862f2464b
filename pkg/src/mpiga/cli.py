"""Command line front end: ``mpiga bench ...`` and ``mpiga trace ...``.

Exit codes: 0 on success, 2 when a configuration is rejected (including the
requirement gate), 1 on a numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, multipatch, quadlayout

EXIT_OK, EXIT_NUMERICAL, EXIT_REJECTED = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpiga", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a benchmark study and write CSV reports")
    b.add_argument("study", nargs="?", choices=bench.STUDIES)
    b.add_argument("--config", help="key = value file; command line flags take precedence")
    b.add_argument("--domain", choices=bench.DOMAINS)
    b.add_argument("--mesh", help="mpatch file for --domain file, OBJ file for the trace study")
    b.add_argument("--coupling", help="single | c0 | penalty(alpha) | nitsche(alpha) | smooth-c1")
    b.add_argument("--alpha", type=float, help="coupling parameter (overrides the one in --coupling)")
    b.add_argument("-p", "--degree", type=int)
    b.add_argument("-r", "--regularity", type=int)
    b.add_argument("-L", "--levels", type=int)
    b.add_argument("-o", "--output", help="output directory")
    b.add_argument("--base-elements", type=int, help="elements per patch direction on the first level")
    b.add_argument("--boundary-alpha", type=float, help="Nitsche boundary parameter")
    b.add_argument("--samples", type=int, help="stress samples per patch direction")
    b.add_argument("--jump-points", type=int, help="interface points for the stress jump summary")
    b.add_argument("--dump-maps", help="write extraction and constraint matrices (Matrix Market)")

    t = sub.add_parser("trace", help="segment a quad mesh into bilinear patches")
    t.add_argument("mesh", help="OBJ file with quad faces")
    t.add_argument("-o", "--output", required=True, help="output .mpatch file")
    return ap


FLAG_KEYS = ("study", "domain", "mesh", "coupling", "alpha", "degree", "regularity", "levels",
             "output", "base_elements", "boundary_alpha", "samples", "jump_points", "dump_maps")


def config_from_args(args) -> bench.BenchConfig:
    values = {}
    if args.config:
        values.update(bench.read_config(Path(args.config).read_text()))
    for key in FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if "study" not in values:
        raise bench.ConfigError("no study given")
    return bench.BenchConfig(**values)


def _bench(args) -> int:
    cfg = config_from_args(args)
    rep = bench.run(cfg)
    paths = bench.write_outputs(cfg, rep)
    for note in rep.notes:
        print(note)
    for k, v in rep.rates.items():
        print(f"{k}={v:.6g}")
    print("wrote " + " ".join(str(p) for p in paths))
    return EXIT_OK


def _trace(args) -> int:
    mesh = quadlayout.load_quad_obj(Path(args.mesh).read_text())
    mp, summary = quadlayout.segment(mesh)
    Path(args.output).write_text(multipatch.dumps(mp))
    print(summary)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _bench(args) if args.command == "bench" else _trace(args)
    except bench.RequirementGateError as exc:
        print(f"rejected by requirement gate: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (bench.ConfigError, quadlayout.MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (np.linalg.LinAlgError, MemoryError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
