"""Command-line front end: ``wallenergy <command> [flags]``.

Every command prints a CSV to stdout, preceded by ``#`` lines carrying the
version and the resolved configuration.  With ``--out-dir`` the same text is
written to ``<out-dir>/<command>.csv``.  Exit codes: 0 success, 1 numerical
failure, 2 bad arguments or unknown command.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .constants import (BETA_CSV_HEADER, ConstantsConfig, beta_csv, beta_curve, compute_alpha,
                        compute_beta, compute_fm_constant, first_order_constant)
from .energy import EnergyBreakdown, SingularityError
from .experiments import ExperimentSpec, convergence_study, infer_step_limit, layer_width
from .experiments import minimize_F, minimize_G, normalization_verdict, study_csv
from .glue import glue_csv, random_specs
from .inequalities import cosine_sweep, ratios_csv
from .optimize import NumericalFailure, OptimizerConfig
from .profile import to_csv

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _header(args) -> list:
    lines = [f"wallenergy {__version__}", f"command = {args.command}"]
    for k in sorted(vars(args)):
        if k not in ("command", "handler"):
            lines.append(f"{k} = {getattr(args, k)}")
    return lines


def _opt(args) -> OptimizerConfig:
    return OptimizerConfig(rng_seed=args.seed)


def _dump(args, name: str, profile) -> None:
    if args.dump_profile and profile is not None:
        d = Path(args.out_dir or ".")
        d.mkdir(parents=True, exist_ok=True)
        to_csv(profile, d / f"{name}.csv")


# --- commands -------------------------------------------------------------------

def _cmd_alpha(args) -> str:
    cfg = ConstantsConfig(n_cells=args.cells or 512, optimizer=_opt(args))
    a = compute_alpha(cfg)
    _dump(args, "alpha_minimizer", a.minimizer)
    return _rows_csv(("n_cells", "alpha", "converged"),
                     [(cfg.n_cells, a.value, str(a.result.converged).lower())])


def _constants_cfg(args) -> ConstantsConfig:
    return ConstantsConfig(n_cells=args.cells or 512, cells_per_unit=args.cells_per_unit,
                           l_max=args.l_max, optimizer=_opt(args))


def _cmd_beta(args) -> str:
    cfg = _constants_cfg(args)
    pt = compute_beta(args.t, args.route, cfg)
    _dump(args, f"beta_phi_t{args.t:g}", pt.phi_profile)
    _dump(args, f"beta_psi_t{args.t:g}", pt.psi_profile)
    return beta_csv([pt])


def _cmd_beta_curve(args) -> str:
    cfg = _constants_cfg(args)
    pts = beta_curve(args.t_min, args.t_max, args.steps, cfg,
                     warm_start=not args.no_warm_start, workers=args.workers)
    return beta_csv(pts)


def _cmd_fm(args) -> str:
    per_unit = args.cells or 64
    cfg = ConstantsConfig(cells_per_unit=per_unit, l_max=args.l_max, optimizer=_opt(args))
    c = compute_fm_constant(cfg)
    _dump(args, "fm_minimizer", c.minimizer)
    return _rows_csv(("cells_per_unit", "L_max", "c_fm", "converged"),
                     [(per_unit, args.l_max, c.value, str(c.result.converged).lower())])


def _cmd_first_order(args) -> str:
    n = args.cells or 1000
    r = first_order_constant(ConstantsConfig(optimizer=_opt(args)), l_max=args.l_max, n_cells=n)
    _dump(args, "first_order_minimizer", r.minimizer)
    return _rows_csv(("n_cells", "L_max", "first_order", "converged"),
                     [(n, args.l_max, r.value, str(r.result.converged).lower())])


def _cmd_glue(args) -> str:
    specs = random_specs(args.n, args.seed)
    if args.cells:
        specs = [replace(s, samples=args.cells + 1) for s in specs]
    return glue_csv(specs)


def _cmd_ineq(args) -> str:
    return ratios_csv(cosine_sweep(args.n_profiles, args.cells or 256, seed0=args.seed))


def _cmd_minimize(args) -> str:
    opt = _opt(args)
    if (args.a_eps is None) != (args.b_eps is None):
        raise UsageError("--a-eps and --b-eps must be given together")
    if args.a_eps is None:
        res = minimize_F(args.eps, cfg=opt, n_cells=args.cells)
    else:
        spec = ExperimentSpec(epsilons=(args.eps,), a0=args.a_eps, b0=args.b_eps,
                              optimizer=opt)
        if args.cells:
            spec.cells_per_layer = max(1, round(args.cells * args.eps))
        res = minimize_G(args.eps, spec)
    _dump(args, f"minimizer_eps{args.eps:g}", res.profile)
    zeta = layer_width(args.eps, compute_alpha(ConstantsConfig(n_cells=256, optimizer=opt)).minimizer)
    u = infer_step_limit(res.profile, zeta / 2)
    b = EnergyBreakdown.of(res.profile, args.eps)
    return _rows_csv(EnergyBreakdown.CSV_HEADER + ("n_cells", "converged", "start_sign", "inferred_jumps"),
                     [b.csv_row() + [res.profile.grid.n_cells, str(res.converged).lower(),
                                     u.start_sign, ";".join(f"{x:.6g}" for x in u.jumps)]])


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"config line {n}: expected key = value")
        out[key.strip()] = value.strip()
    return out


_CONFIG_KEYS = {"epsilons", "a0", "b0", "a_eps", "b_eps", "cells_per_layer", "seed",
                "domain", "refine_exponent", "refine_from", "p"}


def spec_from_config(cfg: dict, seed: Optional[int] = None) -> ExperimentSpec:
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kw = {}
    try:
        if "epsilons" in cfg:
            kw["epsilons"] = tuple(float(s) for s in cfg["epsilons"].split(","))
        if "domain" in cfg:
            kw["domain"] = tuple(float(s) for s in cfg["domain"].split(","))
        for key, cast in (("a0", float), ("b0", float), ("cells_per_layer", int),
                          ("refine_exponent", float), ("refine_from", float)):
            if key in cfg:
                kw[key] = cast(cfg[key])
        if "p" in cfg:
            kw["p_norm"] = float(cfg["p"])
        if "a_eps" in cfg:
            kw["a_rule"] = cfg["a_eps"]
        if "b_eps" in cfg:
            kw["b_rule"] = cfg["b_eps"]
        s = seed if seed is not None else int(cfg.get("seed", 42))
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from exc
    kw["optimizer"] = OptimizerConfig(rng_seed=s)
    return ExperimentSpec(**kw)


def _cmd_study(args) -> str:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    spec = spec_from_config(parse_config(text), args.seed)
    args.seed = spec.optimizer.rng_seed
    if args.cells:
        spec.cells_per_layer = args.cells
    spec.workers = args.workers
    if args.dump_profile:
        spec.dump_dir = args.out_dir or "."
    records = convergence_study(spec)
    extra = [f"spec.{k} = {v}" for k, v in sorted(vars(spec).items())
             if k not in ("optimizer", "constants")]
    extra.append(f"normalization = {normalization_verdict(records)}")
    failures = [f"eps={r.eps:g}: {r.error}" for r in records if r.error]
    extra += [f"failure {f}" for f in failures]
    return study_csv(records, extra)


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
    common.add_argument("--cells", type=int, default=None,
                        help="resolution; meaning depends on the command (see README)")
    common.add_argument("--out-dir", default=None)
    common.add_argument("--dump-profile", action="store_true")
    common.add_argument("--workers", type=int, default=1)

    p = _Parser(prog="wallenergy", description="Second-order phase-transition energies in 1-D.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, handler, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.set_defaults(handler=handler)
        return sp

    add("compute-alpha", _cmd_alpha, help="interior wall constant")
    for name, handler in (("compute-beta", _cmd_beta), ("beta-curve", _cmd_beta_curve)):
        sp = add(name, handler)
        sp.add_argument("--l-max", type=float, default=12.0)
        sp.add_argument("--cells-per-unit", type=int, default=64)
        if name == "compute-beta":
            sp.add_argument("--t", type=float, required=True)
            sp.add_argument("--route", choices=("phi", "psi", "both"), default="both")
        else:
            sp.add_argument("--t-min", type=float, required=True)
            sp.add_argument("--t-max", type=float, required=True)
            sp.add_argument("--steps", type=int, required=True)
            sp.add_argument("--no-warm-start", action="store_true")
    add("fm-constant", _cmd_fm).add_argument("--l-max", type=float, default=12.0)
    add("first-order", _cmd_first_order).add_argument("--l-max", type=float, default=10.0)
    add("glue-test", _cmd_glue).add_argument("--n", type=int, default=50)
    add("check-inequalities", _cmd_ineq).add_argument("--n-profiles", type=int, default=200)
    sp = add("minimize", _cmd_minimize)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--a-eps", type=float, default=None)
    sp.add_argument("--b-eps", type=float, default=None)
    sp = add("convergence-study", _cmd_study)
    sp.add_argument("--config", required=True)
    return p


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    out = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
        if args.command is None:
            raise UsageError(parser.format_usage())
        if args.seed is None and args.command != "convergence-study":
            args.seed = 42
        if args.cells is not None and args.cells < 1:
            raise UsageError("--cells must be positive")
        body = args.handler(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (NumericalFailure, SingularityError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return 2
    text = "".join(f"# {line}\n" for line in _header(args)) + body
    out.write(text)
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{args.command}.csv").write_text(text)
    return 0


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


__all__ = ["run", "main", "build_parser", "parse_config", "spec_from_config", "BETA_CSV_HEADER"]
