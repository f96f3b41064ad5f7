"""Command-line front end: ``latticemaps <command> [options]``.

Every mapping command reads a point cloud, writes one output row per input
point and, with ``--report``, a JSON run report with sorted keys. Errors
print a single ``latticemaps: <stage> error: ...`` line and exit with the
stage's code (3 input, 4 lattice, 5 cuts, 6 solver, 7 geometry; 2 usage).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import hyperbolic, rect, sphere, surfaces, torus
from .cuts import load_membranes
from .errors import CutError, InputError, LatticeMapsError
from .lattice import LatticeParams, build_lattice
from .pointcloud import load_point_cloud, normalize_cloud, save_point_cloud

log = logging.getLogger("latticemaps")


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None


def _params(args) -> LatticeParams:
    return LatticeParams(n=args.n, epsilon=args.epsilon)


def _load(args, default_format="xyz"):
    return load_point_cloud(args.input, args.format or default_format)


def _write_rows(path, rows):
    if path is None:
        return
    rows = np.asarray(rows, dtype=float)
    np.savetxt(path, rows, fmt="%.17g")


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_report(path, report):
    if path is None:
        return
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _torus_cuts(args):
    if args.cuts:
        return load_membranes(_read_json(args.cuts, "cuts"))
    if args.R is None:
        raise CutError("torus commands need --cuts, or --R for the torus-of-revolution preset")
    return torus.revolution_cuts(args.R)


def _hyp_cuts(args):
    if args.cuts:
        return hyperbolic.HypCutSystem.from_dict(_read_json(args.cuts, "cuts"))
    return hyperbolic.genus2_cuts()


def _group(args):
    if args.group:
        return hyperbolic.FuchsianGroupSpec.from_dict(_read_json(args.group, "group"))
    return hyperbolic.octagon_group()


def cmd_sphere(args):
    res = sphere.sphere_map_pipeline(_load(args), _params(args), dt=args.dt, tol=args.tol,
                                     max_iters=args.max_iters, rtol=args.rtol)
    _write_rows(args.out, res.points)
    return res.report()


def cmd_rect_harmonic(args):
    res = rect.harmonic_rectangle_pipeline(_load(args, "labeled-xyz"), _params(args), args.a,
                                           tol=args.tol)
    _write_rows(args.out, res.points)
    return res.report()


def cmd_rect_conformal(args):
    res = rect.conformal_rectangle(_load(args, "labeled-xyz"), _params(args), tol=args.tol)
    _write_rows(args.out, res.points)
    return res.report()


def _parse_tau(text):
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise InputError(f"cannot parse --tau {text!r}; use a form like 0.5+1.2j") from None


def cmd_torus_harmonic(args):
    res = torus.harmonic_torus_pipeline(_load(args), _params(args), _torus_cuts(args),
                                        _parse_tau(args.tau), tol=args.tol)
    _write_rows(args.out, res.points)
    return res.report()


def cmd_torus_conformal(args):
    res = torus.conformal_torus(_load(args), _params(args), _torus_cuts(args), tol=args.tol)
    _write_rows(args.out, res.points)
    return res.report()


def cmd_hyp_harmonic(args):
    res = hyperbolic.harmonic_hyperbolic_pipeline(
        _load(args), _params(args), _hyp_cuts(args), _group(args), tol=args.tol,
        max_iters=args.max_iters, omega=args.omega)
    _write_rows(args.out, res.disk_points)
    return res.report()


def cmd_hyp_conformal(args):
    base = _group(args)
    if args.family == "fixed":
        family, x0 = (lambda _: base), []
    elif args.family == "twist":
        family, x0 = hyperbolic.twist_family(base), [args.x0]
    else:
        family, x0 = hyperbolic.conjugation_family(base), [args.x0]
    res = hyperbolic.conformal_hyperbolic(
        _load(args), _params(args), _hyp_cuts(args), family, x0, tol=args.tol,
        max_iters=args.max_iters, omega=args.omega)
    _write_rows(args.out, res.disk_points)
    return res.report()


def cmd_lattice_info(args):
    normed, transform = normalize_cloud(_load(args))
    lat = build_lattice(normed, _params(args))
    if args.out:
        lat.dump(args.out)
    return {"lattice": lat.stats(), "transform": transform.to_dict()}


def cmd_gen_test_surface(args):
    shape = {}
    if args.R is not None:
        shape["R"] = args.R
    if args.r is not None:
        shape["r"] = args.r
    if args.width is not None:
        shape["width"] = args.width
    if args.height is not None:
        shape["height"] = args.height
    if args.radius is not None:
        shape["radius"] = args.radius
    if args.axes is not None:
        shape["axes"] = tuple(args.axes)
    cloud = surfaces.generate(args.kind, args.count, seed=args.seed, **shape)
    if args.out is None:
        raise InputError("gen-test-surface needs --out")
    save_point_cloud(args.out, cloud)
    return {"kind": args.kind, "count": len(cloud), "seed": args.seed, "shape": shape,
            "labeled": cloud.labels is not None}


COMMANDS = {
    "sphere": cmd_sphere,
    "rect-harmonic": cmd_rect_harmonic,
    "rect-conformal": cmd_rect_conformal,
    "torus-harmonic": cmd_torus_harmonic,
    "torus-conformal": cmd_torus_conformal,
    "hyp-harmonic": cmd_hyp_harmonic,
    "hyp-conformal": cmd_hyp_conformal,
    "lattice-info": cmd_lattice_info,
    "gen-test-surface": cmd_gen_test_surface,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latticemaps", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def mapping(name, help_, tol=1e-10, max_iters=None):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--input", required=True, help="point-cloud file")
        s.add_argument("--format", choices=["xyz", "labeled-xyz"], default=None)
        s.add_argument("--n", type=int, default=32, help="lattice resolution (default 32)")
        s.add_argument("--epsilon", type=float, default=None, help="neighborhood radius (default 2.5/n)")
        s.add_argument("--tol", type=float, default=tol)
        if max_iters is not None:
            s.add_argument("--max-iters", type=int, default=max_iters)
        s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; pipelines are deterministic")
        s.add_argument("--out", help="mapped coordinates, one row per input point")
        s.add_argument("--report", help="JSON report path")
        return s

    s = mapping("sphere", "harmonic map of a genus-0 cloud to the unit sphere", 1e-7, 200_000)
    s.add_argument("--dt", type=float, default=None, help="flow step (default 0.95 / max degree)")
    s.add_argument("--rtol", type=float, default=0.0,
                   help="also stop once the residual falls to rtol times its initial value")

    s = mapping("rect-harmonic", "harmonic map to the rectangle [0, 1/a] x [0, a]")
    s.add_argument("--a", type=float, required=True)
    mapping("rect-conformal", "conformal rectangle by energy minimization over a")

    for name, help_ in (("torus-harmonic", "harmonic map to the flat torus C/(Z + tau Z)"),
                        ("torus-conformal", "conformal flat torus by energy minimization over tau")):
        s = mapping(name, help_)
        s.add_argument("--cuts", help="JSON list of two cut membranes")
        s.add_argument("--R", type=float, default=None,
                       help="use the torus-of-revolution cuts for major radius R (axis z)")
        if name == "torus-harmonic":
            s.add_argument("--tau", required=True, help="modulus, e.g. 0.2+1.1j")

    for name, help_ in (("hyp-harmonic", "harmonic map to a hyperbolic surface H^2 / Gamma"),
                        ("hyp-conformal", "energy-minimizing group within a family")):
        s = mapping(name, help_, 1e-7, 5000)
        s.add_argument("--cuts", help="JSON cut system with generator-word tags "
                                      "(default: blended double-torus preset)")
        s.add_argument("--group", help="JSON group spec (default: regular octagon group)")
        s.add_argument("--omega", type=float, default=hyperbolic.DEFAULT_OMEGA,
                       help="over-relaxation factor in (0, 2)")
        if name == "hyp-conformal":
            s.add_argument("--family", choices=["fixed", "twist", "conjugation"], default="fixed")
            s.add_argument("--x0", type=float, default=0.0, help="starting family parameter")

    s = sub.add_parser("lattice-info", help="build the lattice and report its statistics")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=["xyz", "labeled-xyz"], default=None)
    s.add_argument("--n", type=int, default=32)
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--out", help="write vertex and edge lists here")
    s.add_argument("--report")

    s = sub.add_parser("gen-test-surface", help="sample an analytic test surface")
    s.add_argument("--kind", choices=surfaces.KINDS, required=True)
    s.add_argument("--count", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--R", type=float)
    s.add_argument("--r", type=float)
    s.add_argument("--width", type=float)
    s.add_argument("--height", type=float)
    s.add_argument("--radius", type=float)
    s.add_argument("--axes", type=float, nargs=3)
    s.add_argument("--out")
    s.add_argument("--report")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    start = time.perf_counter()
    try:
        result = COMMANDS[args.command](args)
    except LatticeMapsError as exc:
        print(f"latticemaps: {exc.stage} error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"latticemaps: output error: {exc}", file=sys.stderr)
        return InputError.exit_code
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    report = {"command": args.command, "parameters": params, "result": result,
              "timings": {"wall_seconds": time.perf_counter() - start}}
    _write_report(args.report, report)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
