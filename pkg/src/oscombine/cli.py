"""Command-line interface.

Exit codes: 0 on success, 1 for numerical or runtime failures, 2 for usage
and validation errors. Every command is deterministic; Monte Carlo commands
default to seed 12345.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import boundary_sim as bs
from . import error_model as em
from . import ensemble_io as eio
from . import order_stats as ost
from ._random import DEFAULT_SEED
from .core import parse_combiner
from .errors import InputError

log = logging.getLogger("oscombine")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_range(text: str) -> list[int]:
    """``"1..50"``, ``"3"`` or ``"1,2,5"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            values = list(range(int(a), int(b) + 1))
        else:
            values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        values = []
    if not values:
        raise argparse.ArgumentTypeError(f"expected N, A..B or a comma list, got {text!r}")
    return values


def _rank(text: str):
    if text in ("min", "max", "median", "med"):
        return "median" if text == "med" else text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rank must be min, max, median or an integer, got {text!r}") from None


def _ids(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def format_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def format_table(headers, rows) -> str:
    cells = [[str(h) for h in headers]] + [[_cell(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return "-"
    return str(v)


def _emit(text: str, out: str | None) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_os_table(args) -> int:
    rows = ost.alpha_table(
        args.n_max,
        args.dist,
        args.method,
        tol=args.tol,
        samples=args.samples,
        seed=args.seed,
        workers=args.workers,
        even_rule=args.even_median,
    )
    if args.format == "csv":
        buf = io.StringIO()
        ost.write_alpha_csv(rows, buf)
        text = buf.getvalue()
    elif args.format == "json":
        text = format_json(
            {
                "dist": ost.BaseDistribution.parse(args.dist).value,
                "method": args.method,
                "seed": args.seed,
                "even_median": args.even_median,
                "rows": [r.__dict__ for r in rows],
            }
        )
    else:
        text = format_table(
            ["N", "alpha_minmax", "alpha_median", "median_method"],
            [(r.n, round(r.alpha_minmax, 3), round(r.alpha_median, 3), r.median_method) for r in rows],
        )
    _emit(text, args.out)
    return 0


def _bias_from_args(args) -> em.BiasSpec | None:
    if args.beta_bar is None:
        return None
    return em.BiasSpec(args.beta_bar, args.z, args.sigma2_beta)


def cmd_predict(args) -> int:
    n = args.n
    scn = em.BoundaryScenario(
        args.s,
        args.sigma_eta,
        n,
        tuple(args.biases_i) if args.biases_i else None,
        tuple(args.biases_j) if args.biases_j else None,
        args.delta,
        args.bayes_error,
    )
    bias = _bias_from_args(args)
    if args.combiner == "single":
        pred = em.predict_single(scn)
    elif args.combiner == "ave":
        pred = em.predict_average(scn, bias)
    else:
        alpha = args.alpha
        if alpha is None:
            alpha = ost.rank_moments(args.rank, n, args.dist, "quadrature", seed=args.seed).alpha
        pred = em.predict_os(scn, alpha, bias)
    _emit(format_json(pred.to_dict()), args.out)
    return 0


def cmd_simulate(args) -> int:
    combiner = parse_combiner(args.combiner, rank=args.rank, weights=args.weights)
    if args.model == "linear":
        model = bs.LocalLinear(args.s)
    else:
        model = bs.logistic_pair(2.0 * args.s)
    noise = bs.NoiseSpec(
        args.sigma_eta,
        args.n,
        args.delta,
        args.dist,
        tuple(args.biases_i) if args.biases_i else None,
        tuple(args.biases_j) if args.biases_j else None,
    )
    samples = bs.simulate_offsets(model, noise, combiner, args.trials, args.seed, args.workers)
    report = bs.compare_to_theory(model, noise, combiner, args.trials, args.seed, samples=samples)
    if args.samples_out:
        buf = io.StringIO()
        samples.to_csv(buf)
        _emit(buf.getvalue(), args.samples_out)
    for w in report.warnings:
        log.warning(w)
    if args.format == "json":
        text = format_json(report.to_dict())
    else:
        emp = report.empirical
        pred = report.predicted
        rows = [
            ("e_add", emp["e_add"], pred.e_add if pred else None),
            ("reduction_factor", emp["reduction_factor"], pred.reduction_factor if pred else None),
            ("m1", emp["m1"], pred.moments.m1 if pred else None),
            ("m2", emp["m2"], pred.moments.m2 if pred else None),
        ]
        text = format_table(["quantity", "empirical", "predicted"], rows)
    _emit(text, args.out)
    return 0


def cmd_reduction_curve(args) -> int:
    rows = em.reduction_curve(args.n, args.deltas)
    if args.format == "csv":
        buf = io.StringIO()
        em.write_curve_csv(rows, buf)
        text = buf.getvalue()
    elif args.format == "json":
        text = format_json([{"N": n, "delta": d, "factor": f} for n, d, f in rows])
    else:
        text = format_table(["N", "delta", "factor"], rows)
    _emit(text, args.out)
    return 0


def _groups(text: str | None):
    if not text:
        return None
    return [_ids(g) for g in text.split(";") if g.strip()]


def cmd_combine(args) -> int:
    ds = eio.load_scores(args.scores)
    combiner = parse_combiner(args.combiner, rank=args.rank, weights=args.weights)
    subset = args.subset
    if args.mix:
        if ":" not in args.mix:
            raise InputError("--mix expects A_IDS:B_IDS")
        a, b = args.mix.split(":", 1)
        n = args.mix_n if args.mix_n is not None else len(_ids(a)) + len(_ids(b))
        subset = eio.mixed_subset(ds, _ids(a), _ids(b), n)
    report = eio.evaluate_ensemble(ds, combiner, subset=subset, groups=_groups(args.groups))
    if args.format == "json":
        text = format_json(report)
    else:
        rows = [(cid, err) for cid, err in report["individual_error"].items()]
        rows.append((f"combined ({report['combiner']})", report["combined_error"]))
        if "groups" in report:
            g = report["groups"]
            rows.append(("groups mean", g["mean"]))
            rows.append(("groups std", g["std"]))
        text = format_table(["classifier", "error_pct"], rows)
    _emit(text, args.out)
    return 0


def cmd_correlate(args) -> int:
    ds = eio.load_scores(args.scores)
    rep = eio.estimate_correlation(ds)
    if args.format == "json":
        text = format_json(rep.to_dict())
    else:
        rows = [(f"class {i}", float(p), float(d)) for i, (p, d) in enumerate(zip(rep.priors, rep.per_class_delta))]
        rows.append(("overall", 1.0, rep.overall_delta))
        text = format_table(["scope", "prior", "delta"], rows)
    _emit(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oscombine", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats, default):
        sp.add_argument("--format", choices=formats, default=default)
        sp.add_argument("--out", help="write primary output here instead of stdout")

    sp = sub.add_parser("os-table", help="order-statistic reduction factors")
    sp.add_argument("--n-max", type=int, default=15)
    sp.add_argument("--dist", default="gaussian", choices=["gaussian", "uniform"])
    sp.add_argument("--method", default="quadrature", choices=["quadrature", "mc"])
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--even-median", choices=list(ost.EVEN_RULES), default="average")
    common(sp, ["csv", "json", "table"], "csv")
    sp.set_defaults(func=cmd_os_table)

    sp = sub.add_parser("predict", help="closed-form added error")
    sp.add_argument("--combiner", choices=["single", "ave", "os"], default="ave")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--s", type=float, default=2.0)
    sp.add_argument("--sigma-eta", type=float, default=0.1)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--rank", type=_rank, default="median")
    sp.add_argument("--dist", default="gaussian", choices=["gaussian", "uniform"])
    sp.add_argument("--biases-i", type=_floats)
    sp.add_argument("--biases-j", type=_floats)
    sp.add_argument("--beta-bar", type=float)
    sp.add_argument("--z", type=float, default=1.0)
    sp.add_argument("--sigma2-beta", type=float, default=0.0)
    sp.add_argument("--bayes-error", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common(sp, ["json"], "json")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("simulate", help="Monte Carlo boundary simulation vs theory")
    sp.add_argument("--combiner", default="ave", choices=["ave", "wave", "min", "max", "med", "median", "rank"])
    sp.add_argument("--rank", type=int)
    sp.add_argument("--weights", type=_floats)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--s", type=float, default=2.0)
    sp.add_argument("--sigma-eta", type=float, default=0.1)
    sp.add_argument("--biases-i", type=_floats)
    sp.add_argument("--biases-j", type=_floats)
    sp.add_argument("--dist", default="gaussian", choices=["gaussian", "uniform"])
    sp.add_argument("--model", default="linear", choices=["linear", "logistic"])
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--samples-out", help="write boundary offsets as a one-column CSV")
    common(sp, ["json", "table"], "json")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reduction-curve", help="(1 + delta(N-1))/N over a grid")
    sp.add_argument("--n", type=_int_range, default=list(range(1, 51)))
    sp.add_argument("--deltas", type=_floats, default=[0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0])
    common(sp, ["csv", "json", "table"], "csv")
    sp.set_defaults(func=cmd_reduction_curve)

    for name, func, help_ in (
        ("combine", cmd_combine, "fuse a score file and report error rates"),
        ("correlate", cmd_correlate, "estimate inter-classifier error correlation"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--scores", required=True)
        if name == "combine":
            sp.add_argument("--combiner", default="ave", choices=["ave", "wave", "min", "max", "med", "median", "rank"])
            sp.add_argument("--rank", type=int)
            sp.add_argument("--weights", type=_floats)
            sp.add_argument("--subset", type=_ids)
            sp.add_argument("--groups", help="disjoint id groups, e.g. 'a1,a2;b1,b2'")
            sp.add_argument("--mix", help="two model types as 'A1,A2,...:B1,B2,...'")
            sp.add_argument("--mix-n", type=int)
        common(sp, ["json", "table"], "json")
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"oscombine {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ArithmeticError, RuntimeError) as exc:
        print(f"oscombine {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
