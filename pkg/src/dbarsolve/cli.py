"""Command-line interface: ``solve``, ``verify``, ``norm-scan`` and ``kernel-dump``.

Exit codes: 0 success, 2 usage or configuration error, 3 unsupported variant,
4 numerical failure.  ``--workers`` (or ``DBAR_WORKERS``) sets the number of
worker processes used for target evaluation.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance, kernel_calculus, verify_norms
from .errors import (ClosednessError, ConfigError, DbarError, DomainError, UnsupportedError)
from .forms import PolyForm, load_form
from .domain_geometry import as_product, domain_from_config
from .planar_kernels import KernelContext
from .product_operator import DEFAULT_RESOLUTION, Resolution, solve_K, solve_T

EXIT_OK, EXIT_USAGE, EXIT_UNSUPPORTED, EXIT_NUMERICAL = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def grid_resolution(n_grid: int) -> Resolution:
    """Operator resolution from a single ``--grid`` size per factor."""
    g = int(n_grid)
    if g < 8:
        raise ConfigError("--grid must be at least 8")
    return Resolution(
        {1: g, 2: max(16, g // 2), 3: max(8, g // 4), 4: 8},
        {1: max(8, g // 2), 2: max(8, g // 4), 3: max(4, g // 8), 4: 4},
    )


def _load_domain(path):
    return as_product(domain_from_config(path))


def _read_targets(path, n):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"targets file not found: {p}")
    data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2 * n:
        raise ConfigError(f"{p}: expected {2 * n} coordinate columns")
    return data[:, 0:2 * n:2] + 1j * data[:, 1:2 * n:2]


def _solve(op_name, dom, f, targets, res):
    if op_name == "T":
        return solve_T(dom, f, targets, res)
    return solve_K(dom, f, targets, res)


def cmd_solve(args) -> int:
    dom = _load_domain(args.domain)
    f = load_form(args.form, dom.n)
    if f.n != dom.n:
        raise ConfigError(f"form has {f.n} components but the domain has {dom.n} factors")
    op_name = args.op.upper()
    if op_name == "T" and not isinstance(f, PolyForm):
        raise UnsupportedError("operator T needs a polynomial form; sampled forms go through --op K")
    res = grid_resolution(args.grid) if args.grid else DEFAULT_RESOLUTION
    rule = None
    if args.targets:
        targets = _read_targets(args.targets, dom.n)
    else:
        udeg = acceptance.factor_degree(f) if isinstance(f, PolyForm) else 4
        rule = verify_norms.orthogonality_rule(dom, udeg, args.max_degree)
        targets = rule.nodes
    u = _solve(op_name, dom, f, targets, res)
    text = u.to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    print(f"solved {len(u.values)} targets with operator {op_name}", file=sys.stderr)
    failed = False
    if not args.no_check:
        centers = np.array([[d.center for d in dom.factors]])
        stencil = verify_norms.stencil_targets(centers, args.step)
        resid = float(np.max(verify_norms.residual_dbar(dom, _solve(op_name, dom, f, stencil, res), f)))
        flag = "ok" if resid <= args.residual_tol else "EXCEEDS"
        failed |= resid > args.residual_tol
        print(f"residual (max |du/dwbar - f| at the center): {resid:.3e} [{flag} tol {args.residual_tol:g}]",
              file=sys.stderr)
        if rule is not None:
            orth = verify_norms.bergman_orthogonality(dom, u, args.max_degree, rule)
            flag = "ok" if orth <= args.orth_tol else "EXCEEDS"
            failed |= orth > args.orth_tol
            print(f"orthogonality (degree <= {args.max_degree}): {orth:.3e} [{flag} tol {args.orth_tol:g}]",
                  file=sys.stderr)
        else:
            print("orthogonality: skipped (custom targets are not a quadrature grid)", file=sys.stderr)
    return EXIT_NUMERICAL if failed and args.strict else EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in acceptance.SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; expected one of {', '.join(acceptance.SUITES)}")
    results = acceptance.run_suite(args.suite, echo=lambda line: print(line, file=sys.stderr))
    text = acceptance.results_csv(results)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def _parse_p(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        out.append(math.inf if tok in ("inf", "infinity") else float(tok))
    if not out or any(p < 1 for p in out):
        raise ConfigError("--p needs exponents >= 1 (or inf)")
    return out


def cmd_norm_scan(args) -> int:
    dom = _load_domain(args.domain)
    ps = _parse_p(args.p)
    resolutions = [int(x) for x in args.resolutions.split(",") if x.strip()]
    rep = verify_norms.norm_scan(dom, args.op, args.family, ps, resolutions)
    text = rep.to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    print(rep.summary(), file=sys.stderr)
    return EXIT_OK


def cmd_kernel_dump(args) -> int:
    try:
        indices = tuple(int(x) for x in args.idx.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --idx {args.idx!r}") from exc
    if any(i > args.n for i in indices):
        raise ConfigError(f"indices {indices} exceed n={args.n}")
    try:
        idx = kernel_calculus.IndexSet(indices, args.j)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    expr = kernel_calculus.e_kernel_derivative(idx) if args.deriv else kernel_calculus.simplify(kernel_calculus.e_kernel_expr(idx), indices)
    print(expr)
    if args.points:
        rng = np.random.default_rng(args.seed)
        ctxs = [KernelContext(d) for d in _load_domain({"factors": [{"kind": "disc"}] * args.n}).factors]
        for _ in range(args.points):
            w = list(0.6 * np.sqrt(rng.random(args.n)) * np.exp(2j * np.pi * rng.random(args.n)))
            z = list(0.6 * np.sqrt(rng.random(args.n)) * np.exp(2j * np.pi * rng.random(args.n)))
            val = complex(kernel_calculus.evaluate(expr, ctxs, indices, w, z))
            coords = " ".join(f"w{m}={w[m - 1]:.4f} z{m}={z[m - 1]:.4f}" for m in indices)
            print(f"{coords} -> {val.real:.17g} {val.imag:+.17g}j")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dbarsolve", description=__doc__.splitlines()[0])
    p.add_argument("--workers", type=int, help="worker processes for target evaluation (default: DBAR_WORKERS or 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve dbar u = f and write u as CSV")
    s.add_argument("--domain", required=True, help="domain config (JSON)")
    s.add_argument("--form", required=True, help="inline 'poly: ...' form or a form file (.csv = sampled)")
    s.add_argument("--op", default="K", type=str.upper, choices=["T", "K"])
    s.add_argument("--grid", type=int, help="quadrature size per factor (default: built-in resolution)")
    s.add_argument("--targets", help="CSV of targets (re_w1,im_w1,...); default: an orthogonality grid")
    s.add_argument("--out", help="output CSV (default: stdout)")
    s.add_argument("--max-degree", type=int, default=2, help="orthogonality test degree (default 2)")
    s.add_argument("--step", type=float, default=0.05, help="finite-difference step of the residual (default 0.05)")
    s.add_argument("--residual-tol", type=float, default=1e-4, help="default 1e-4")
    s.add_argument("--orth-tol", type=float, default=1e-5, help="default 1e-5")
    s.add_argument("--no-check", action="store_true", help="skip the residual and orthogonality summary")
    s.add_argument("--strict", action="store_true", help="exit 4 when a check exceeds its tolerance")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run an acceptance suite")
    v.add_argument("--suite", required=True, help=", ".join(acceptance.SUITES))
    v.add_argument("--out", help="pass/fail CSV (default: stdout)")
    v.set_defaults(func=cmd_verify)

    ns = sub.add_parser("norm-scan", help="empirical Lp operator norms")
    ns.add_argument("--domain", required=True)
    ns.add_argument("--family", required=True, help=", ".join(verify_norms.FAMILIES))
    ns.add_argument("--op", default="K", type=str.upper, choices=["T", "K"])
    ns.add_argument("--p", default="1,2,4,8,inf")
    ns.add_argument("--resolutions", default="32,64,128")
    ns.add_argument("--out", help="report CSV (default: stdout)")
    ns.set_defaults(func=cmd_norm_scan)

    kd = sub.add_parser("kernel-dump", help="print a partition kernel or its derivative")
    kd.add_argument("--n", type=int, required=True)
    kd.add_argument("--idx", required=True, help="comma-separated increasing indices, e.g. 1,2")
    kd.add_argument("--j", type=int, required=True, help="distinguished position in --idx (1-based)")
    kd.add_argument("--deriv", action="store_true", help="dump the derivative kernel")
    kd.add_argument("--points", type=int, default=0, help="spot evaluations on the polydisc")
    kd.add_argument("--seed", type=int, default=0)
    kd.set_defaults(func=cmd_kernel_dump)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.workers:
        os.environ["DBAR_WORKERS"] = str(args.workers)
    try:
        return args.func(args)
    except (ConfigError, ClosednessError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except DbarError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
