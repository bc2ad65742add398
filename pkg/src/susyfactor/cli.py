"""Command line front end: ``susyfactor verify|gallery|morse2d|tensor``."""

import argparse
import sys
from pathlib import Path

from . import pipeline, report
from .specfile import GALLERY, SpecError, load_gallery, load_spec

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _h_list(text):
    try:
        hs = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad h list {text!r}") from None
    if not hs or any(not 0 < h <= 1 for h in hs):
        raise argparse.ArgumentTypeError("h values must lie in ]0, 1]")
    return hs


def _positive_int(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points")
    return v


def _load(ref):
    """A spec path, or a gallery name when no such file exists."""
    path = Path(ref)
    try:
        if path.exists():
            return load_spec(path)
        if ref in GALLERY:
            return load_gallery(ref)
    except SpecError as exc:
        raise InputError(f"{ref}: {exc}") from None
    except OSError as exc:
        raise InputError(f"{ref}: {exc}") from None
    raise InputError(f"{ref}: no such spec file or gallery entry")


def _emit(rep, out):
    text = report.dumps(rep)
    if out:
        Path(out).write_text(text)
        print(f"{rep.get('name', '')}: {rep['verdict']} (report written to {out})")
    else:
        sys.stdout.write(text)
    return EXIT_PASS if rep["verdict"] == "PASS" else EXIT_FAIL


def _verify(spec, args):
    try:
        b = pipeline.build(spec)
    except (SpecError, ValueError) as exc:
        raise InputError(f"{spec.name}: {exc}") from None
    return pipeline.verify_built(b, args.h, args.seed, args.grid)


def cmd_verify(args):
    return _emit(_verify(_load(args.spec), args), args.out)


def cmd_gallery(args):
    if args.name not in GALLERY:
        raise InputError(f"unknown gallery entry {args.name!r}; choose from {', '.join(GALLERY)}")
    rep = _verify(load_gallery(args.name), args)
    rep["command"] = "gallery"
    return _emit(rep, args.out)


def cmd_morse2d(args):
    spec = _load(args.spec)
    try:
        rep = pipeline.run_morse(spec, args.grid)
    except ValueError as exc:
        raise InputError(f"{spec.name}: {exc}") from None
    return _emit(rep, args.out)


def cmd_tensor(args):
    a, b = _load(args.spec_a), _load(args.spec_b)
    try:
        rep = pipeline.run_tensor(a, b, args.h, args.seed, args.grid)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return _emit(rep, args.out)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--h", type=_h_list, help="comma separated h values, overriding the spec")
    common.add_argument("--seed", type=int, help="seed for test functions and sampling")
    common.add_argument("--grid", type=_positive_int, help="grid points per axis")
    p = argparse.ArgumentParser(prog="susyfactor", description="Verify supersymmetric factorizations of operators.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="verify a spec file")
    v.add_argument("spec")
    v.set_defaults(fn=cmd_verify)
    g = sub.add_parser("gallery", parents=[common], help="verify a built-in example")
    g.add_argument("name", help=", ".join(GALLERY))
    g.set_defaults(fn=cmd_gallery)
    m = sub.add_parser("morse2d", parents=[common], help="stream potential analysis of a planar spec")
    m.add_argument("spec")
    m.set_defaults(fn=cmd_morse2d)
    t = sub.add_parser("tensor", parents=[common], help="verify the product of two specs")
    t.add_argument("spec_a")
    t.add_argument("spec_b")
    t.set_defaults(fn=cmd_tensor)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
