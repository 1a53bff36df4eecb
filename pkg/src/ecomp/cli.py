"""Command-line front end.

Every subcommand writes one JSON document (or a CSV table with ``--format csv``)
to stdout. Exit status is 0 on success, 1 on a domain error and 2 on a usage
error. ``ECOMP_TAIL_TOL`` overrides the default series tail tolerance.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import birthdeath, conditional, divisibility, inference, stein
from .core import (
    DEFAULT_TAIL_TOL,
    SampleConfig,
    TailExtrapolationWarning,
    build_table,
    validate_params,
)
from .errors import EcompError, EmptyData, ParseError

DEFAULT_SEED = 20150315
TAIL_TOL_ENV = "ECOMP_TAIL_TOL"


# -- count data ingestion -----------------------------------------------------


def _parse_int(text: str, line: int, what: str = "count") -> int:
    text = text.strip()
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not an integer", line) from None
    if value < 0:
        raise ParseError(f"{what} {value} is negative", line)
    return value


def ingest_counts(path, fmt: str | None = None) -> inference.CountData:
    """Read count data from CSV (one count, or ``value,frequency``, per line) or a JSON array."""
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "csv"
    text = path.read_text()
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno) from None
        if not isinstance(data, list):
            raise ParseError("expected a JSON array of integers", 1)
        counts = []
        for i, item in enumerate(data):
            if isinstance(item, bool) or not isinstance(item, int):
                raise ParseError(f"entry {i} ({item!r}) is not an integer")
            if item < 0:
                raise ParseError(f"entry {i} ({item}) is negative")
            counts.append(item)
        if not counts:
            raise EmptyData(f"{path} contains no counts")
        return inference.CountData.from_counts(counts)
    if fmt != "csv":
        raise ValueError(f"unknown count format {fmt!r}")

    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = next(csv.reader([line]))
        if len(fields) == 1:
            pairs.append((_parse_int(fields[0], lineno), 1))
        elif len(fields) == 2:
            value = _parse_int(fields[0], lineno)
            freq = _parse_int(fields[1], lineno, "frequency")
            if freq == 0:
                raise ParseError("frequency must be >= 1", lineno)
            pairs.append((value, freq))
        else:
            raise ParseError(f"expected 1 or 2 fields, got {len(fields)}", lineno)
    if not pairs:
        raise EmptyData(f"{path} contains no counts")
    return inference.CountData.from_pairs(pairs)


# -- serialization ---------------------------------------------------------------


def _clean(obj):
    """Convert numpy scalars/arrays to plain Python; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _emit(report: dict, rows: list | None, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(_clean(report), indent=2, allow_nan=False))
        out.write("\n")
        return
    if rows is None:
        rows = [{"key": key, "value": value} for key, value in _flatten(_clean(report))]
    else:
        rows = [_clean(row) for row in rows]
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for key, value in obj.items():
            yield from _flatten(value, f"{prefix}{key}.")
    elif isinstance(obj, list):
        for i, value in enumerate(obj):
            yield from _flatten(value, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), obj


def _prob_entry(p: float, logp: float) -> dict:
    return {"value": p, "log": logp}


# -- subcommand handlers ------------------------------------------------------------


def _params(args):
    return validate_params(args.nu, args.p, args.alpha, args.beta)


def _table(args, min_k: int = 0):
    return build_table(_params(args), args.tail_tol, min_k=min_k)


def _header(args, table=None) -> dict:
    head = {"params": _params(args).as_dict(), "tail_tol": args.tail_tol}
    if table is not None:
        head["K"] = table.K
        head["tail_bound"] = table.tail_bound
    return head


def cmd_pmf(args):
    table = _table(args)
    ks = args.k
    entries = []
    for k in ks:
        outside = k > table.K
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TailExtrapolationWarning)
            logp = table.log_pmf(k)
        entries.append({"k": k, "pmf": math.exp(logp), "log_pmf": logp, "tail_extrapolated": outside})
    report = _header(args, table)
    if len(entries) == 1:
        report.update({key: value for key, value in entries[0].items() if key != "k"})
        report["k"] = ks[0]
    else:
        report["values"] = entries
    return report, entries


def cmd_table(args):
    table = _table(args)
    probs = table.probabilities
    rows = [
        {"k": k, "pmf": probs[k], "log_pmf": table.log_weights[k] - table.log_Z, "cdf": table.cdf(k)}
        for k in range(table.K + 1)
    ]
    report = _header(args, table)
    report["log_Z"] = table.log_Z
    report["rows"] = rows
    return report, rows


def cmd_moments(args):
    table = _table(args)
    raw = {f"m{m}": table.moment(m) for m in (1, 2, 3, 4)}
    report = _header(args, table)
    report.update(
        mean=table.mean,
        variance=table.variance,
        raw_moments=raw,
        dispersion=table.dispersion(),
    )
    return report, None


def cmd_sample(args):
    table = _table(args)
    draws = table.sample(SampleConfig(args.seed, args.n))
    report = _header(args, table)
    report.update(seed=args.seed, n=args.n, samples=draws)
    return report, [{"i": i, "x": x} for i, x in enumerate(draws.tolist())]


def cmd_conditional(args):
    params_x = validate_params(args.nu1, args.p, args.alpha, args.beta)
    params_y = validate_params(args.nu2, args.p, args.alpha, args.beta)
    tx = build_table(params_x, args.tail_tol)
    ty = build_table(params_y, args.tail_tol)
    ep = conditional.EnhgParams(args.s, args.nu1, args.nu2, args.alpha, args.beta)
    enhg = conditional.enhg_pmf(ep)
    brute = conditional.conditional_bruteforce(tx, ty, args.s)
    diff = float(np.max(np.abs(enhg.probabilities - brute.probabilities)))
    p_sum = conditional.convolve_sum_pmf(tx, ty, args.s)
    report = {
        "enhg": {"s": args.s, "nu1": args.nu1, "nu2": args.nu2, "alpha": args.alpha, "beta": args.beta},
        "p": args.p,
        "tail_tol": args.tail_tol,
        "sum_pmf": _prob_entry(p_sum, math.log(p_sum) if p_sum > 0 else None),
        "enhg_pmf": enhg.probabilities,
        "bruteforce": brute.probabilities,
        "max_abs_diff": diff,
    }
    rows = [
        {"k": k, "enhg": enhg[k], "bruteforce": brute[k]} for k in range(args.s + 1)
    ]
    return report, rows


def cmd_reconstruct(args):
    if args.input:
        rows_in = json.loads(Path(args.input).read_text())
        c = [list(map(float, row)) for row in rows_in]
        h1 = args.h1 if args.h1 is not None else 1.0
        max_k = len(c) - 1 if args.max_k is None else args.max_k
        source = {"input": str(args.input)}
    else:
        for flag in ("nu1", "nu2", "alpha", "beta"):
            if getattr(args, flag) is None:
                raise _UsageError(f"--{flag} is required without --input")
        max_k = 20 if args.max_k is None else args.max_k
        c = [
            conditional.enhg_pmf(
                conditional.EnhgParams(s, args.nu1, args.nu2, args.alpha, args.beta)
            ).probabilities
            for s in range(max_k + 1)
        ]
        h1 = args.h1 if args.h1 is not None else args.nu1**args.beta
        source = {"nu1": args.nu1, "nu2": args.nu2, "alpha": args.alpha, "beta": args.beta}
    f, g = conditional.reconstruct_marginals(c, args.p, max_k, h1=h1)
    report = {"source": source, "p": args.p, "h1": h1, "max_k": max_k, "f": f, "g": g}
    rows = [{"k": k, "f": f[k], "g": g[k]} for k in range(max_k + 1)]
    return report, rows


def cmd_stein(args):
    table = _table(args)
    rep = stein.stein_suite(table, args.J)
    report = _header(args, table)
    report.update(rep.as_dict())
    return report, [{"g": name, "residual": value} for name, value in rep.residuals]


def cmd_concavity(args):
    params = _params(args)
    verdict = divisibility.classify_concavity(params, args.k_max)
    report = _header(args)
    report.update(
        verdict=verdict.verdict,
        witness_k=verdict.witness_k,
        exact_one=verdict.exact_one,
        k_max=verdict.k_max,
        ratio_of_ratios_k1=divisibility.ratio_of_ratios(params, 1),
    )
    return report, None


def cmd_id_verdict(args):
    params = _params(args)
    table = build_table(params, args.tail_tol, min_k=args.n_terms)
    verdict = divisibility.id_verdict(params, table, args.n_terms, args.tol)
    report = verdict.as_dict()
    report.update(_header(args, table))
    return report, None


def cmd_decompose(args):
    table = _table(args, min_k=args.n)
    extract = (
        divisibility.dcp_decompose_panjer
        if args.method == "panjer"
        else divisibility.dcp_decompose_logpgf
    )
    d = extract(table, args.n)
    report = {"lambda": d.lam, "alphas": d.alphas, "method": args.method, "N": d.N}
    report.update(_header(args, table))
    rows = [{"i": i + 1, "alpha": a} for i, a in enumerate(d.alphas.tolist())]
    return report, rows


def cmd_panjer(args):
    if args.lam is not None:
        if args.alphas is None:
            raise _UsageError("--alphas is required with --lambda")
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
        n = len(alphas) if args.n is None else args.n
        d = divisibility.DcpParams(args.lam, alphas, len(alphas))
        pmf = divisibility.dcp_reconstruct(d, n)
        report = {"lambda": args.lam, "alphas": alphas, "N": n, "pmf": pmf}
    else:
        for flag in ("nu", "p", "alpha", "beta"):
            if getattr(args, flag) is None:
                raise _UsageError(f"--{flag} is required without --lambda")
        n = 200 if args.n is None else args.n
        table = _table(args, min_k=n)
        d = divisibility.dcp_decompose_panjer(table, n)
        pmf = divisibility.dcp_reconstruct(d, n)
        source = table.probabilities[: n + 1]
        report = _header(args, table)
        report.update(
            {"lambda": d.lam, "N": n, "pmf": pmf, "max_abs_error": float(np.max(np.abs(pmf - source)))}
        )
    rows = [{"k": k, "pmf": v} for k, v in enumerate(pmf.tolist())]
    return report, rows


def cmd_stationary(args):
    rates = birthdeath.make_rates(_params(args), args.mu, args.K)
    pi = birthdeath.stationary(rates)
    report = _header(args)
    report.update(lambda_scale=rates.lambda_scale, mu_scale=rates.mu_scale, K=rates.K, stationary=pi)
    return report, [{"k": k, "pi": v} for k, v in enumerate(pi.tolist())]


def cmd_simulate(args):
    rates = birthdeath.make_rates(_params(args), args.mu, args.K)
    horizon = args.horizon if args.horizon is not None else 1e5 / args.mu
    occ = birthdeath.simulate(rates, horizon, args.seed, args.initial)
    pi = birthdeath.stationary(rates)
    report = _header(args)
    report.update(
        lambda_scale=rates.lambda_scale,
        mu_scale=rates.mu_scale,
        K=rates.K,
        horizon=horizon,
        seed=args.seed,
        occupancy=occ,
        total_variation=birthdeath.total_variation(occ, pi),
    )
    rows = [{"k": k, "occupancy": o, "stationary": s} for k, (o, s) in enumerate(zip(occ, pi))]
    return report, rows


_FIT_DEFAULTS = {
    "general": (1.0, 1.0, 1.5, 0.5),
    "equal": (1.0, 0.5, 1.0, 1.0),
    "beta0": (1.0, 1.0, 1.0, 0.0),
}


def cmd_fit(args):
    data = ingest_counts(args.input, args.input_format)
    fixed = {}
    for item in args.fix or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise _UsageError(f"--fix expects name=value, got {item!r}")
        try:
            fixed[name.strip()] = float(value)
        except ValueError:
            raise _UsageError(f"--fix value {value!r} is not a number") from None
    branch = args.branch or "general"
    defaults = _FIT_DEFAULTS[branch]
    init_values = [
        getattr(args, name) if getattr(args, name) is not None else default
        for name, default in zip(("nu", "p", "alpha", "beta"), defaults)
    ]
    for name, value in fixed.items():
        if name in ("nu", "p", "alpha", "beta"):
            init_values[("nu", "p", "alpha", "beta").index(name)] = value
    init = validate_params(*init_values)
    result = inference.fit_mle(
        data,
        init,
        branch=branch,
        fixed=fixed,
        n_starts=args.starts,
        seed=args.seed,
        tail_tol=args.tail_tol,
    )
    report = result.as_dict()
    report.update(
        n=data.n,
        init=init.as_dict(),
        fixed=fixed,
        init_loglik=inference.log_likelihood(init, data, args.tail_tol),
        tail_tol=args.tail_tol,
        seed=args.seed,
    )
    return report, None


# -- parser -----------------------------------------------------------------------


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(2)


def _default_tail_tol() -> float:
    raw = os.environ.get(TAIL_TOL_ENV)
    if raw is None:
        return DEFAULT_TAIL_TOL
    try:
        return float(raw)
    except ValueError:
        raise _UsageError(f"{TAIL_TOL_ENV}={raw!r} is not a number") from None


def _add_params(parser, required=True):
    for name in ("nu", "p", "alpha", "beta"):
        parser.add_argument(f"--{name}", type=float, required=required)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tail-tol", type=float, default=None, help="series tail tolerance")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")

    parser = _Parser(prog="ecomp", description="Extended COM-Poisson toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, handler, help_text, params=True):
        p = sub.add_parser(name, parents=[common], help=help_text)
        if params:
            _add_params(p)
        p.set_defaults(handler=handler)
        return p

    p = add("pmf", cmd_pmf, "probability mass at one or more k")
    p.add_argument("--k", type=int, nargs="+", required=True)
    add("table", cmd_table, "full truncated pmf/cdf table")
    add("moments", cmd_moments, "moments and dispersion class")
    p = add("sample", cmd_sample, "inversion sampling")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = add("conditional", cmd_conditional, "conditional law of X given X+Y=s", params=False)
    for name in ("nu1", "nu2", "p", "alpha", "beta"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--s", type=int, required=True)

    p = add("reconstruct", cmd_reconstruct, "marginal weights from conditional tables", params=False)
    for name in ("nu1", "nu2", "alpha", "beta", "h1"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--max-k", type=int)
    p.add_argument("--input", help="JSON list of rows c[s][x] = P(X=x | X+Y=s)")

    p = add("stein-check", cmd_stein, "Stein identity residuals")
    p.add_argument("--J", type=int, default=50)
    p = add("concavity", cmd_concavity, "log-concavity / log-convexity")
    p.add_argument("--k-max", type=int, default=10**4)
    p = add("id-verdict", cmd_id_verdict, "infinite divisibility verdict")
    p.add_argument("--n-terms", type=int, default=divisibility.DEFAULT_N)
    p.add_argument("--tol", type=float, default=divisibility.ALPHA_TOL)
    p = add("decompose", cmd_decompose, "compound Poisson parameters")
    p.add_argument("--n", type=int, default=divisibility.DEFAULT_N)
    p.add_argument("--method", choices=("panjer", "logpgf"), default="panjer")

    p = add("panjer", cmd_panjer, "forward Panjer recursion", params=False)
    _add_params(p, required=False)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alphas", help="comma-separated jump probabilities a_1,a_2,...")
    p.add_argument("--n", type=int)

    p = add("stationary", cmd_stationary, "birth-death stationary law")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--K", type=int)
    p = add("simulate", cmd_simulate, "birth-death trajectory occupancy")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--K", type=int)
    p.add_argument("--horizon", type=float, help="defaults to 1e5/mu")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--initial", type=int, default=0)

    p = add("fit", cmd_fit, "maximum-likelihood fit to count data", params=False)
    _add_params(p, required=False)
    p.add_argument("--input", required=True)
    p.add_argument("--input-format", choices=("csv", "json"))
    p.add_argument("--branch", choices=inference.BRANCHES)
    p.add_argument("--fix", action="append", metavar="NAME=VALUE")
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.tail_tol is None:
            args.tail_tol = _default_tail_tol()
        report, rows = args.handler(args)
        buf = io.StringIO()
        _emit(report, rows, args.format, buf)
    except _UsageError as exc:
        stderr.write(f"ecomp {args.command}: usage error: {exc}\n")
        return 2
    except (EcompError, ValueError, OverflowError, OSError) as exc:
        stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    if args.output:
        Path(args.output).write_text(buf.getvalue())
    else:
        stdout.write(buf.getvalue())
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
