"""Batch experiment driver: every subsystem behind one deterministic CLI.

Outputs are CSV for tabular data and JSON for reports, with every float
printed at 17 significant digits so reruns diff exactly.  The default seed
comes from the CONDSUM_SEED environment variable (fallback 20250810).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import berry_esseen as be
from . import fourier, tails
from .distributions import RngStream
from .exact import ConditioningSpec, exact_conditional_law, exact_displacement_pmf
from .models import build_model
from .probing import HashSequence, block_decomposition, insert_trace
from .rejection import acceptance_audit, rejection_sample

__all__ = ["main", "run"]

DEFAULT_SEED = 20250810


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _render_json(obj, indent: int = 0) -> str:
    """Hand-rolled JSON writer: floats always at 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{inner}{json.dumps(str(k))}: {_render_json(v, indent + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        items = [f"{inner}{_render_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))
        return _fmt(x)
    return json.dumps(str(obj))


def _dump_json(obj) -> str:
    return _render_json(obj) + "\n"


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=[
        "hashing", "occupancy", "bose_einstein", "branching", "random_forest",
    ])
    p.add_argument("--config", help="JSON model config {kind, params{}, N, m}")
    p.add_argument("--mu", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--m", type=int)


def _model_from_args(args):
    if args.config:
        with open(args.config) as fh:
            return build_model(json.load(fh))
    if not args.model:
        raise SystemExit("either --model or --config is required")
    params = {}
    for key, val in (
        ("mu", getattr(args, "mu", None)),
        ("lambda", getattr(args, "lam", None)),
        ("p", getattr(args, "p", None)),
        ("K", getattr(args, "K", None)),
        ("n", getattr(args, "n", None)),
        ("N", getattr(args, "N", None)),
        ("m", getattr(args, "m", None)),
    ):
        if val is not None:
            params[key] = val
    return build_model({"kind": args.model, "params": params,
                        "N": params.get("N"), "m": params.get("m")})


def _cmd_simulate(args) -> int:
    addresses = [int(tok) for tok in args.seq.split(",") if tok.strip()]
    seq = HashSequence(m=args.m, addresses=tuple(addresses))
    trace = insert_trace(seq)
    payload = {
        "m": seq.m,
        "n": seq.n,
        "addresses": list(seq.addresses),
        "displacements": list(trace.displacements),
        "positions": list(trace.positions),
        "total": trace.total,
    }
    if seq.n < seq.m:
        blocks = block_decomposition(seq)
        payload["blocks"] = [
            {"length": b.length, "disp_sum": b.disp_sum} for b in blocks.blocks
        ]
    _write(_dump_json(payload), args.out)
    return 0


def _cmd_enumerate(args) -> int:
    law = exact_displacement_pmf(args.m, args.n)
    _write(law.to_csv_text(), args.out)
    return 0


def _cmd_conditional(args) -> int:
    model, cond = _model_from_args(args)
    if args.cond_m is not None or args.cond_N is not None:
        cond = ConditioningSpec(
            N=args.cond_N if args.cond_N is not None else cond.N,
            m=args.cond_m if args.cond_m is not None else cond.m,
        )
    if args.exact:
        law = exact_conditional_law(model, cond)
        _write(law.to_csv_text(), args.out)
        return 0
    stream = RngStream(args.seed)
    batch = rejection_sample(
        model, cond, args.target, stream,
        budget=args.budget, threads=args.threads,
    )
    audit = acceptance_audit(batch, model, cond)
    text = batch.to_csv_text()
    meta = dict(batch.meta())
    meta["audit"] = audit.to_json_dict()
    _write(text + _dump_json(meta), args.out)
    return 0


def _cmd_llt(args) -> int:
    model, cond = _model_from_args(args)
    report = fourier.llt_check(model, cond).to_json_dict()
    psi0 = fourier.psi_quadrature(model, cond, 0.0,
                                  allow_truncated=args.allow_truncated)
    report["psi0_real"] = psi0.real
    report["psi0_imag"] = psi0.imag
    report["psi0_vs_2pi_p"] = (
        abs(psi0) / (2.0 * math.pi * report["p_exact"])
        if report["p_exact"] > 0 else float("inf")
    )
    _write(_dump_json(report), args.out)
    return 0


def _cmd_be_audit(args) -> int:
    model, cond = _model_from_args(args)
    law = exact_conditional_law(model, cond)
    report = be.be_report(
        model, cond, law,
        eta0=args.eta0, allow_truncated=args.allow_truncated,
    )
    payload = report.to_json_dict()
    audit = be.hypothesis_audit(
        model, cond, eta0=args.eta0, allow_truncated=args.allow_truncated
    )
    payload["constants"] = be.constant_set(audit.bounds).to_json_dict()
    _write(_dump_json(payload), args.out)
    return 0


def _cmd_ld_tails(args) -> int:
    if args.exponents_only:
        _write(_dump_json(tails.exponents(args.mu).to_json_dict()), args.out)
        return 0
    if args.x_grid:
        grid = [int(tok) for tok in args.x_grid.split(",")]
        rep = tails.x_tail_check(args.mu, grid)
        lines = ["l,log_tail,exponent,kappa"]
        for l, lt, ex in rep.rows():
            lines.append(f"{l},{_fmt(lt)},{_fmt(ex)},{_fmt(rep.kappa)}")
        _write("\n".join(lines) + "\n", args.out)
        return 0
    if args.u_grid:
        grid = [float(tok) for tok in args.u_grid.split(",")]
        rep = tails.y_tail_bracket(args.mu, grid)
        lines = ["u,p_exact,p_upper,p_lower,exp_exact,exp_upper,exp_lower,kappa_sqrt2,p_exact_err"]
        for i, u in enumerate(rep.u_grid):
            pe = rep.p_exact[i]
            lines.append(",".join([
                _fmt(u),
                _fmt(pe) if pe is not None else "",
                _fmt(math.exp(rep.log_upper[i])),
                _fmt(math.exp(rep.log_lower[i])),
                _fmt(rep.exp_exact[i]) if rep.exp_exact[i] is not None else "",
                _fmt(rep.exp_upper[i]),
                _fmt(rep.exp_lower[i]),
                _fmt(rep.kappa_sqrt2),
                _fmt(rep.p_exact_err[i]) if rep.p_exact_err[i] is not None else "",
            ]))
        _write("\n".join(lines) + "\n", args.out)
        return 0
    if args.mc:
        model, cond = _model_from_args(args)
        rep = tails.tail_mc_decomposition(
            model, cond, args.y, RngStream(args.seed),
            attempts=args.attempts, threads=args.threads,
        )
        _write(_dump_json(rep.to_json_dict()), args.out)
        return 0
    raise SystemExit("pick one of --exponents-only, --x-grid, --u-grid, --mc")


def _cmd_constants(args) -> int:
    with open(args.bounds) as fh:
        bounds = json.load(fh)
    cs = be.constant_set(bounds)
    _write(_dump_json(cs.to_json_dict()), args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condsum",
        description="conditioned-sum experiments: probing, exact laws, "
        "limit checks, tail brackets",
    )
    parser.add_argument("--seed", type=int,
                        default=int(os.environ.get("CONDSUM_SEED", DEFAULT_SEED)))
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default=None, help="output path, default stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="insert one hash sequence")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seq", required=True, help="comma-separated addresses")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("enumerate", help="exact displacement law")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(fn=_cmd_enumerate)

    p = sub.add_parser("conditional", help="conditional law, exact or sampled")
    _add_model_args(p)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--cond-N", type=int, default=None)
    p.add_argument("--cond-m", type=int, default=None)
    p.add_argument("--target", type=int, default=10_000)
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(fn=_cmd_conditional)

    p = sub.add_parser("llt", help="local limit report at the conditioning point")
    _add_model_args(p)
    p.add_argument("--allow-truncated", action="store_true")
    p.set_defaults(fn=_cmd_llt)

    p = sub.add_parser("be-audit", help="normal-approximation report")
    _add_model_args(p)
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--allow-truncated", action="store_true")
    p.set_defaults(fn=_cmd_be_audit)

    p = sub.add_parser("ld-tails", help="tail exponents, brackets, MC decomposition")
    _add_model_args(p)
    p.add_argument("--exponents-only", action="store_true")
    p.add_argument("--x-grid", default=None)
    p.add_argument("--u-grid", default=None)
    p.add_argument("--mc", action="store_true")
    p.add_argument("--y", type=float, default=0.5)
    p.add_argument("--attempts", type=int, default=10**6)
    p.set_defaults(fn=_cmd_ld_tails)

    p = sub.add_parser("constants", help="explicit-constant pipeline from bounds")
    p.add_argument("--bounds", required=True, help="JSON file of audited bounds")
    p.set_defaults(fn=_cmd_constants)
    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
