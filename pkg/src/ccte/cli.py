"""Command-line interface: ``ccte {table,ccte,fit,plotdata}``.

Exit codes: 0 success, 2 bad arguments or unreadable input, 3 parameter or
level out of range, 4 numerical failure, 5 degenerate joint tail.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from contextlib import contextmanager

from . import __version__
from .copulas import Family, make_copula
from .errors import DegenerateTailError, DomainError, IngestionError, NumericError
from .fitting import (
    ccte_matrix,
    fit_pairwise,
    least_risky_associates,
    load_panel,
    read_series_csv,
)
from .margins import EmpiricalMargin, ParetoMargin
from .risk import RiskQuery, ccte, ccte_archimedean, ccte_generic
from .tables import DEFAULT_LEVELS, TableSpec, build_table, default_workers, plot_rows

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4
EXIT_DEGENERATE = 5


class UsageError(Exception):
    """Bad flag value detected after argparse accepted the syntax."""


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _fmt(x) -> str:
    if x is None:
        return "-"
    x = float(x)
    return f"{x:.4f}" if math.isfinite(x) else ("-" if math.isnan(x) else "inf")


@contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _dump_json(obj, fh):
    json.dump(obj, fh, indent=2, allow_nan=False)
    fh.write("\n")


def _text_grid(title, row_labels, col_labels, rows, corner="") -> str:
    head = [corner] + [str(c) for c in col_labels]
    body = [[str(r)] + [_fmt(x) for x in row] for r, row in zip(row_labels, rows)]
    widths = [max(len(line[k]) for line in [head] + body) for k in range(len(head))]
    out = [title] if title else []
    for line in [head] + body:
        out.append("  ".join(cell.rjust(w) for cell, w in zip(line, widths)))
    return "\n".join(out)


# ---------------------------------------------------------------------------
# table
# ---------------------------------------------------------------------------


def _table_spec(args) -> TableSpec:
    try:
        return TableSpec(args.family, tuple(args.theta or ()), args.alpha, tuple(args.s_grid), tuple(args.t_grid))
    except DomainError as exc:
        flag = "--alpha" if "Pareto" in str(exc) else "--s-grid/--t-grid" if "grid" in str(exc) else "--theta"
        raise DomainError(f"{flag}: {exc}") from exc


def cmd_table(args, out) -> int:
    table = build_table(_table_spec(args), args.workers)
    sp = table.spec
    if args.format == "json":
        _dump_json(table.to_dict(), out)
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["family", "theta", "measure", "s", "t", "value"])
        for s, v, c in zip(sp.s_grid, table.var, table.cte):
            w.writerow([sp.family.value, "", "VaR", s, "", repr(float(v))])
            w.writerow([sp.family.value, "", "CTE", s, "", repr(float(c))])
        for th, block in table.blocks.items():
            for s, row in zip(sp.s_grid, block):
                for t, x in zip(sp.t_grid, row):
                    w.writerow([sp.family.value, th, "CCTE", s, t, repr(float(x))])
    else:
        levels = [f"{s:.4f}" for s in sp.s_grid]
        parts = [
            _text_grid(
                f"Pareto({sp.alpha:g}) margins, {sp.family.value} copula",
                ["VaR(s)", "CTE(s)"],
                levels,
                [table.var, table.cte],
                corner="s",
            )
        ]
        for th, block in table.blocks.items():
            parts.append(
                _text_grid(
                    f"CCTE(s; t), theta = {th:g} (rows s, columns t)",
                    levels,
                    [f"{t:.4f}" for t in sp.t_grid],
                    block,
                    corner="s \\ t",
                )
            )
        out.write("\n\n".join(parts) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ccte
# ---------------------------------------------------------------------------


def _single_margin(args):
    if (args.alpha is None) == (args.margin_file is None):
        raise UsageError("give exactly one of --alpha or --margin-file")
    if args.alpha is not None:
        return ParetoMargin(args.alpha)
    names, data = read_series_csv(args.margin_file)
    if args.column is not None:
        if args.column not in names:
            raise UsageError(f"column {args.column!r} not in {list(names)}")
        col = names.index(args.column)
    elif len(names) == 1:
        col = 0
    else:
        raise UsageError(f"--margin-file has columns {list(names)}; pick one with --column")
    return EmpiricalMargin(data[:, col])


def cmd_ccte(args, out) -> int:
    margin = _single_margin(args)
    family = Family(args.family)
    copula = make_copula(family, None if family is Family.PRODUCT else args.theta)
    query = RiskQuery(args.s, args.t)
    route = {"auto": ccte, "generic": ccte_generic, "archimedean": ccte_archimedean}[args.method]
    result = route(copula, margin, query)
    record = {
        "family": family.value,
        "theta": args.theta,
        "s": query.s,
        "t": query.t,
        "margin": f"pareto:{margin.alpha!r}" if isinstance(margin, ParetoMargin) else f"empirical(n={margin.n})",
        **result.to_dict(),
        "cte": float(margin.cte(query.s)),
    }
    if args.oracle is not None:
        from .montecarlo import agrees, ccte_empirical

        n, seed = args.oracle
        est = ccte_empirical(copula, margin, query, n, seed, workers=args.workers)
        record["oracle"] = {
            **est.to_dict(),
            "seed": seed,
            "agrees_3se": agrees(result.value, est),
        }

    if args.format == "json":
        _dump_json(record, out)
    elif args.format == "csv":
        flat = {k: v for k, v in record.items() if k != "oracle"}
        for k, v in (record.get("oracle") or {}).items():
            flat[f"oracle_{k}"] = v
        w = csv.writer(out, lineterminator="\n")
        w.writerow(flat.keys())
        w.writerow([repr(v) if isinstance(v, float) else v for v in flat.values()])
    else:
        lines = [
            f"CCTE         {_fmt(result.value)}",
            f"method       {result.method.value}",
            f"denominator  {result.denominator:.6g}",
            f"error est.   {result.integral_error:.3g}",
            f"CTE(s)       {_fmt(record['cte'])}",
        ]
        if "oracle" in record:
            o = record["oracle"]
            verdict = "agrees" if o["agrees_3se"] else "DISAGREES"
            lines.append(
                f"oracle       {_fmt(o['value'])} +/- {o['std_error']:.4f} "
                f"({o['n_accepted']} of {o['n_total']} kept, seed {o['seed']}): {verdict} within 3 SE"
            )
        out.write("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _panel_margins(spec: str, panel):
    if spec == "empirical":
        return None
    if not spec.startswith("pareto:"):
        raise UsageError(f"--margin must be 'empirical' or 'pareto:ALPHA[,ALPHA...]', got {spec!r}")
    alphas = _floats(spec[len("pareto:"):])
    if len(alphas) == 1:
        alphas = alphas * len(panel.names)
    if len(alphas) != len(panel.names):
        raise UsageError(f"--margin gives {len(alphas)} Pareto indices for {len(panel.names)} series")
    return [ParetoMargin(a) for a in alphas]


def cmd_fit(args, out) -> int:
    panel = load_panel(args.input, args.input_kind)
    query = RiskQuery(*args.levels)
    margins = _panel_margins(args.margin, panel)
    report = {
        "input_kind": args.input_kind,
        "n_returns": panel.n_obs,
        "levels": {"s": query.s, "t": query.t},
        "margin": args.margin,
        "tau_variant": args.tau_variant,
        "families": [],
    }
    taus = None
    for fam in args.family:
        taus, thetas = fit_pairwise(panel, fam, args.tau_variant)
        scores = ccte_matrix(panel, thetas, query, margins, workers=args.workers)
        report["families"].append(
            {
                "family": thetas.family.value,
                "theta": thetas.to_dict(),
                "ccte": scores.to_dict(),
                "least_risky": [list(p) for p in least_risky_associates(scores)],
            }
        )
    report["tau"] = taus.to_dict()

    if args.format == "json":
        _dump_json(report, out)
        return EXIT_OK
    names = list(panel.names)
    if args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["matrix", "family", "row", "column", "value"])

        def emit(kind, fam, m):
            for i, r in enumerate(names):
                for j, c in enumerate(names):
                    v = m["values"][i][j]
                    w.writerow([kind, fam, r, c, "" if v is None else repr(v)])

        emit("tau", "", report["tau"])
        for f in report["families"]:
            emit("theta", f["family"], f["theta"])
            emit("ccte", f["family"], f["ccte"])
        return EXIT_OK

    def grid(title, m):
        return _text_grid(title, names, names, [[x for x in row] for row in m["values"]])

    kind = "log returns of prices" if args.input_kind == "prices" else "returns as given"
    parts = [
        f"{panel.n_obs} observations ({kind}), levels s={query.s:g}, t={query.t:g}, margins {args.margin}",
        grid("Kendall tau", report["tau"]),
    ]
    for f in report["families"]:
        parts.append(grid(f"{f['family']} parameter", f["theta"]))
        parts.append(grid(f"{f['family']} CCTE (row = target, column = associate)", f["ccte"]))
        pairs = ", ".join(f"({a}, {b})" for a, b in f["least_risky"])
        parts.append(f"least risky associate per target ({f['family']}): {pairs}")
    out.write("\n\n".join(parts) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plotdata
# ---------------------------------------------------------------------------


def cmd_plotdata(args, out) -> int:
    rows = plot_rows(_table_spec(args), workers=args.workers)
    if args.format == "json":
        _dump_json(rows, out)
        return EXIT_OK
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["s", "t", "family", "theta", "measure", "value"])
    for r in rows:
        w.writerow([r["s"], r["t"], r["family"], "" if r["theta"] is None else r["theta"], r["measure"], repr(r["value"])])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _family_list(text: str) -> list[str]:
    fams = [f.strip() for f in text.split(",") if f.strip()]
    for f in fams:
        if f not in ("gumbel", "clayton", "fgm"):
            raise argparse.ArgumentTypeError(f"cannot fit family {f!r}")
    return fams


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccte", description="Copula conditional tail expectation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--workers", type=int, default=None, help="thread count (default $CCTE_THREADS or 1)")
    families = [f.value for f in Family if f is not Family.GENERATOR]
    sub = parser.add_subparsers(dest="command", required=True)

    def grid_flags(p, formats):
        p.add_argument("--family", required=True, choices=families)
        p.add_argument("--theta", type=_floats, default=None, help="comma-separated parameters")
        p.add_argument("--alpha", type=float, default=1.5, help="Pareto index (default 1.5)")
        p.add_argument("--s-grid", type=_floats, default=list(DEFAULT_LEVELS))
        p.add_argument("--t-grid", type=_floats, default=list(DEFAULT_LEVELS))
        p.add_argument("--format", choices=formats, default=formats[0])

    p = sub.add_parser("table", parents=[common], help="VaR, CTE and CCTE blocks over a level grid")
    grid_flags(p, ["text", "csv", "json"])
    p.set_defaults(handler=cmd_table)

    p = sub.add_parser("plotdata", parents=[common], help="long-format diagonal sweep s = t")
    grid_flags(p, ["csv", "json"])
    p.set_defaults(handler=cmd_plotdata)

    p = sub.add_parser("ccte", parents=[common], help="one CCTE query")
    p.add_argument("--family", required=True, choices=families)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None, help="Pareto index of the target margin")
    p.add_argument("--margin-file", help="CSV whose column is the target's loss sample")
    p.add_argument("--column", help="column of --margin-file to use")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--method", choices=["auto", "generic", "archimedean"], default="auto")
    p.add_argument("--oracle", nargs=2, type=int, metavar=("N", "SEED"), help="add a Monte Carlo estimate")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.set_defaults(handler=cmd_ccte)

    p = sub.add_parser("fit", parents=[common], help="tau, fitted parameter and CCTE matrices from a CSV")
    p.add_argument("input", help="CSV with a header row of series names")
    p.add_argument("--family", type=_family_list, default=["gumbel", "clayton"])
    p.add_argument("--levels", nargs=2, type=float, metavar=("S", "T"), required=True)
    p.add_argument("--margin", default="empirical", help="'empirical' or 'pareto:ALPHA[,ALPHA...]'")
    p.add_argument("--input-kind", choices=["prices", "returns"], default="prices")
    p.add_argument("--tau-variant", choices=["a", "b"], default="b", help="tie handling of Kendall tau (default b)")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.set_defaults(handler=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on syntax errors
    if args.workers is None:
        args.workers = default_workers()
    buf = io.StringIO()
    try:
        code = args.handler(args, buf)
    except (UsageError, IngestionError) as exc:
        print(f"ccte: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateTailError as exc:
        print(f"ccte: degenerate tail: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DomainError as exc:
        print(f"ccte: out of range: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"ccte: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    # write only complete output, so failures never leave a partial file
    with _sink(args.out) as fh:
        fh.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
