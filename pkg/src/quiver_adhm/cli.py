"""Command-line front end: ``python3 -m quiver_adhm <command> ...``.

Every command prints a JSON report on stdout.  Data files use the layout of
:mod:`quiver_adhm.io`.  Exit status is 0 on success, 1 on a numerical failure
and 2 on invalid input.  ``QUIVER_ADHM_LOG`` sets the log level (default
WARNING).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io
from .adhm import (
    SolverError,
    SolverOptions,
    apply_star,
    dualize_t,
    is_regular,
    residual,
    solve,
    stabilizer_dimension,
    tangent_dimension,
)
from .diagram import AffineDiagram, build_affine_diagram, diagram_involution, form_type_assignment
from .reflection import ReflectionError, dimension_transport, simple_reflection_functor, w0_functor
from .so_sp import InstantonClass, NotSelfDual, build_w_forms, is_fixed_point, solve_fixed
from .weyl import (
    Parameter,
    UnrealizableDimension,
    check_self_dual_parameter,
    longest_element,
    perturb_below_level,
    random_on_level,
    star_param,
    w0_star_v,
)

log = logging.getLogger("quiver_adhm")

EXIT_OK, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    diagram: AffineDiagram | None = None
    v: tuple[int, ...] | None = None
    w: tuple[int, ...] | None = None
    zeta: Parameter | None = None
    seed: int = 0
    tol: float = 1e-10
    max_iters: int = 500
    jobs: int = 1
    output: str | None = None
    extra: dict = field(default_factory=dict)

    def opts(self) -> SolverOptions:
        return SolverOptions(max_iters=self.max_iters, tol=self.tol, strategy=self.extra.get("strategy", "lm"))


def _int_vector(text: str, n: int, name: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in text.replace(" ", "").split(",") if x != "")
    except ValueError:
        raise ValidationError(f"--{name}: expected comma separated integers, got {text!r}") from None
    if len(vals) != n:
        raise ValidationError(f"--{name}: expected {n} entries, got {len(vals)}")
    if any(x < 0 for x in vals):
        raise ValidationError(f"--{name}: entries must be nonnegative")
    return vals


def _load_zeta(args, diagram: AffineDiagram, default_random: bool) -> Parameter:
    n = diagram.n_vertices
    if getattr(args, "zeta", None):
        zeta = io.param_from_json(io.read_json(args.zeta), n)
    elif getattr(args, "zero", False) or not default_random:
        zeta = Parameter.zero(n)
    else:
        zeta = random_on_level(diagram, np.random.default_rng(args.seed), real=getattr(args, "real", False))
    if not zeta.on_level(diagram):
        raise ValidationError(f"zeta is off the level-0 hyperplane: level {zeta.level(diagram)}")
    return zeta


def _emit(cfg: RunConfig, report: dict, data=None, zeta: Parameter | None = None) -> None:
    if data is not None:
        doc = io.adhm_to_json(data)
        if zeta is not None:
            report["zeta"] = io.param_to_json(zeta)
        if cfg.output:
            io.write_text(cfg.output, io.dumps(doc))
            report["output"] = cfg.output
        else:
            report["data"] = doc
    sys.stdout.write(io.dumps(report))


def _point_report(data, zeta: Parameter, forms=None) -> dict:
    res = residual(data, zeta)
    out = {"residual": res, "stabilizer_dim": stabilizer_dimension(data), "regular": bool(is_regular(data, zeta))}
    try:
        out["tangent_dim"] = tangent_dimension(data, zeta)
    except ValueError:
        out["tangent_dim"] = None
    if forms is not None:
        try:
            out["fixed"] = bool(is_fixed_point(data, zeta, forms))
        except NotSelfDual:
            out["fixed"] = False
    else:
        out["fixed"] = None
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_diagram(cfg: RunConfig) -> int:
    d = cfg.diagram
    inv = diagram_involution(d)
    report = d.to_json()
    report["cartan"] = d.cartan.tolist()
    report["involution"] = list(inv.star)
    report["form_types"] = {str(i): t.value for i, t in form_type_assignment(d, inv).items()}
    report["longest_element"] = list(longest_element(d))
    _emit(cfg, report)
    return EXIT_OK


def cmd_params(cfg: RunConfig) -> int:
    d = cfg.diagram
    zeta = cfg.zeta
    eta = cfg.extra.get("below")
    if eta is not None:
        zeta = Parameter(perturb_below_level(zeta.re, eta, d), zeta.c)
    lr, lc = zeta.level(d)
    report = {
        "level": {"re": lr.real, "c": [lc.real, lc.imag]},
        "self_dual": bool(check_self_dual_parameter(zeta, d)),
        "zeta": io.param_to_json(zeta),
    }
    if cfg.v is not None and cfg.w is not None:
        try:
            report["w0_star_v"] = w0_star_v(cfg.v, cfg.w, d).tolist()
        except UnrealizableDimension as exc:
            report["w0_star_v"] = None
            report["unrealizable"] = str(exc)
    if cfg.output:
        io.write_text(cfg.output, io.dumps(io.param_to_json(zeta)))
        report["output"] = cfg.output
    sys.stdout.write(io.dumps(report))
    return EXIT_OK


def _solve_one(args):
    diagram, v, w, zeta, seed, opts = args
    try:
        return seed, solve(diagram, v, w, zeta, seed, opts), None
    except SolverError as exc:
        return seed, None, exc.best_residual


def cmd_solve(cfg: RunConfig) -> int:
    attempts = cfg.extra.get("attempts", 1)
    tasks = [(cfg.diagram, cfg.v, cfg.w, cfg.zeta, cfg.seed + k, cfg.opts()) for k in range(attempts)]
    if cfg.jobs > 1 and attempts > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_solve_one, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_solve_one(t))
            if results[-1][1] is not None:
                break
    for seed, data, _ in results:
        if data is not None:
            report = _point_report(data, cfg.zeta)
            report["seed"] = seed
            _emit(cfg, report, data, cfg.zeta)
            return EXIT_OK
    best = min(r for _, _, r in results)
    sys.stdout.write(io.dumps({"error": "solver did not converge", "best_residual": best}))
    return EXIT_NUMERICAL


def cmd_dualize(cfg: RunConfig) -> int:
    data = cfg.extra["data"]
    out = dualize_t(data)
    report = {"v": list(out.v), "w": list(out.w)}
    zeta = -cfg.zeta if cfg.zeta is not None else None
    _emit(cfg, report, out, zeta)
    return EXIT_OK


def cmd_star(cfg: RunConfig) -> int:
    data = cfg.extra["data"]
    inv = diagram_involution(data.diagram)
    cls = cfg.extra.get("cls")
    phi = build_w_forms(data.w, data.diagram, inv, None, cls).phi if cls else None
    out = apply_star(data, inv, phi)
    report = {"v": list(out.v), "w": list(out.w), "involution": list(inv.star)}
    zeta = star_param(cfg.zeta, inv) if cfg.zeta is not None else None
    _emit(cfg, report, out, zeta)
    return EXIT_OK


def cmd_reflect(cfg: RunConfig) -> int:
    data = cfg.extra["data"]
    d = data.diagram
    if cfg.extra.get("w0"):
        word = longest_element(d)
        out, zeta = w0_functor(data, cfg.zeta, word)
        expected = w0_star_v(data.v, data.w, d, word)
    else:
        i = cfg.extra["vertex"]
        word = (i,)
        out, zeta = simple_reflection_functor(data, i, cfg.zeta)
        expected = dimension_transport(data.v, data.w, word, d)
    report = {
        "word": list(word),
        "dims": list(out.v),
        "expected_dims": expected.tolist(),
        "dims_match": bool(tuple(out.v) == tuple(expected)),
        "residual_c": residual(out, zeta, "C"),
    }
    if cfg.extra.get("w0"):
        report["residual"] = residual(out, zeta)
    _emit(cfg, report, out, zeta)
    return EXIT_OK if report["dims_match"] else EXIT_NUMERICAL


def cmd_fixed(cfg: RunConfig) -> int:
    cls = InstantonClass(cfg.extra["cls"])
    d = cfg.diagram
    forms = build_w_forms(cfg.w, d, None, None, cls)
    data = solve_fixed(cfg.v, cfg.w, cfg.zeta, d, cls, cfg.seed, cfg.opts())
    report = _point_report(data, cfg.zeta, forms)
    report["class"] = cls.value
    if cfg.extra.get("forms_output"):
        io.write_text(cfg.extra["forms_output"], io.dumps(forms.to_json()))
        report["forms_output"] = cfg.extra["forms_output"]
    else:
        report["forms"] = forms.to_json()
    _emit(cfg, report, data, cfg.zeta)
    return EXIT_OK if report["fixed"] else EXIT_NUMERICAL


def cmd_check(cfg: RunConfig) -> int:
    data = cfg.extra["data"]
    cls = cfg.extra.get("cls")
    forms = build_w_forms(data.w, data.diagram, None, None, cls) if cls else None
    report = _point_report(data, cfg.zeta, forms)
    report["tol"] = cfg.tol
    sys.stdout.write(io.dumps(report))
    ok = report["residual"] <= cfg.tol and report["fixed"] is not False
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = {
    "diagram": cmd_diagram,
    "params": cmd_params,
    "solve": cmd_solve,
    "dualize": cmd_dualize,
    "star": cmd_star,
    "reflect": cmd_reflect,
    "fixed": cmd_fixed,
    "check": cmd_check,
}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--max-iters", type=int, default=500)
    common.add_argument("--output", default=None, help="write the resulting data file here")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for multi-seed solves")

    p = argparse.ArgumentParser(prog="quiver_adhm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def diagram_args(sp):
        sp.add_argument("kind", choices=["A", "D", "E"])
        sp.add_argument("rank", type=int)

    def zeta_args(sp):
        sp.add_argument("--zeta", help="parameter JSON file")
        sp.add_argument("--zero", action="store_true", help="use zeta = 0")
        sp.add_argument("--real", action="store_true", help="random zeta with a nonzero real part")

    sp = sub.add_parser("diagram", parents=[common], help="diagram tables")
    diagram_args(sp)

    sp = sub.add_parser("params", parents=[common], help="parameter checks")
    diagram_args(sp)
    zeta_args(sp)
    sp.add_argument("--below", type=float, help="shift the real part to level -ETA")
    sp.add_argument("--v")
    sp.add_argument("--w")

    sp = sub.add_parser("solve", parents=[common], help="solve the moment map equations")
    diagram_args(sp)
    zeta_args(sp)
    sp.add_argument("--v", required=True)
    sp.add_argument("--w", required=True)
    sp.add_argument("--strategy", choices=["lm", "two_stage"], default="lm")
    sp.add_argument("--attempts", type=int, default=1, help="try seeds seed, seed+1, ...")

    for name, hlp in [("dualize", "apply the transpose duality t"), ("star", "apply the diagram involution")]:
        sp = sub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("input")
        sp.add_argument("--zeta")
        if name == "star":
            sp.add_argument("--class", dest="cls", choices=["so", "sp"], help="identify W through standard forms")

    sp = sub.add_parser("reflect", parents=[common], help="reflection functors")
    sp.add_argument("input")
    sp.add_argument("--zeta", required=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--vertex", type=int)
    g.add_argument("--w0", action="store_true")

    sp = sub.add_parser("fixed", parents=[common], help="search for an SO/Sp fixed point")
    diagram_args(sp)
    zeta_args(sp)
    sp.add_argument("--v", required=True)
    sp.add_argument("--w", required=True)
    sp.add_argument("--class", dest="cls", choices=["so", "sp"], required=True)
    sp.add_argument("--forms-output")

    sp = sub.add_parser("check", parents=[common], help="residual, stabilizer, tangent and fixedness report")
    sp.add_argument("input")
    sp.add_argument("--zeta")
    sp.add_argument("--class", dest="cls", choices=["so", "sp"])
    return p


_CLASS = {"so": "SO", "sp": "Sp"}


def make_config(args) -> RunConfig:
    if args.tol <= 0 or args.max_iters <= 0 or args.jobs <= 0:
        raise ValidationError("--tol, --max-iters and --jobs must be positive")
    cfg = RunConfig(args.command, seed=args.seed, tol=args.tol, max_iters=args.max_iters,
                    jobs=args.jobs, output=args.output)
    if hasattr(args, "kind"):
        cfg.diagram = build_affine_diagram(args.kind, args.rank)
    if getattr(args, "input", None):
        data = io.adhm_from_json(io.read_json(args.input))
        cfg.extra["data"] = data
        cfg.diagram = data.diagram
    n = cfg.diagram.n_vertices
    if getattr(args, "v", None):
        cfg.v = _int_vector(args.v, n, "v")
    if getattr(args, "w", None):
        cfg.w = _int_vector(args.w, n, "w")
    if args.command in ("params", "solve"):
        cfg.zeta = _load_zeta(args, cfg.diagram, default_random=True)
    elif args.command == "fixed":
        cfg.zeta = _load_zeta(args, cfg.diagram, default_random=False)
    elif args.command in ("reflect", "check") or getattr(args, "zeta", None):
        cfg.zeta = _load_zeta(args, cfg.diagram, default_random=False)
    if getattr(args, "cls", None):
        cfg.extra["cls"] = _CLASS[args.cls]
    for key in ("strategy", "attempts", "below", "vertex", "w0", "forms_output"):
        if getattr(args, key, None) is not None:
            cfg.extra[key] = getattr(args, key)
    if cfg.extra.get("attempts", 1) < 1:
        raise ValidationError("--attempts must be positive")
    return cfg


def _setup_logging() -> None:
    level = os.environ.get("QUIVER_ADHM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        cfg = make_config(args)
        log.info("running %s", cfg.command)
        return COMMANDS[cfg.command](cfg)
    except (SolverError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError, ReflectionError, NotSelfDual) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
