"""Batch command-line surface: svhmc <command> [options].

Commands: describe (summary statistics of a return series), fit (posterior
estimation for one error family), compare (criteria table across families),
sensitivity (criteria across volatility-prior variants), simulate (the
bias/smse replication study), and plot (SVG emission).  Every report file
embeds a manifest with the toolkit version, full configuration, seed, and a
content hash of the input data, so a report can be reproduced from its
manifest alone.  Exit status is 0 on success, 2 on input or configuration
errors, and 3 when a fit breaches the 10% divergence budget (the report is
still written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, dist, hmc, modsel, plots, simstudy, svmodel

__all__ = [
    "ReturnSeries",
    "ingest",
    "describe",
    "demean",
    "parse_sigma_prior",
    "sigma_prior_label",
    "write_series_csv",
    "main",
]

DIVERGENCE_BUDGET = 0.10
MIN_FIT_LENGTH = 10
SENSITIVITY_PRIOR_PRESETS = ("gamma:0.1", "invgamma:2.5,0.025", "invchisq:10,0.05")


@dataclass(frozen=True)
class ReturnSeries:
    """Percent log-returns plus provenance."""

    values: np.ndarray
    demeaned: bool
    label: str


def parse_sigma_prior(text: str):
    """Parse 'gamma:B', 'invgamma:a,b', or 'invchisq:c,s' into a prior."""
    name, sep, argstr = text.partition(":")
    if not sep:
        raise ValueError(
            f"malformed sigma prior {text!r}; expected gamma:B, invgamma:a,b, "
            "or invchisq:c,s"
        )
    try:
        args = [float(a) for a in argstr.split(",")]
    except ValueError:
        raise ValueError(f"malformed sigma prior arguments in {text!r}") from None
    if name == "gamma":
        if len(args) != 1:
            raise ValueError("gamma prior takes one argument: gamma:B")
        return dist.GammaSigmaPrior(args[0])
    if name == "invgamma":
        if len(args) != 2:
            raise ValueError("invgamma prior takes two arguments: invgamma:a,b")
        return dist.InvGammaSigmaPrior(args[0], args[1])
    if name == "invchisq":
        if len(args) != 2:
            raise ValueError("invchisq prior takes two arguments: invchisq:c,s")
        return dist.ScaledInvChiSqPrior(args[0], args[1])
    raise ValueError(f"unknown sigma prior family {name!r}")


def sigma_prior_label(prior) -> str:
    if isinstance(prior, dist.GammaSigmaPrior):
        return f"gamma:{prior.b:g}"
    if isinstance(prior, dist.InvGammaSigmaPrior):
        return f"invgamma:{prior.shape:g},{prior.scale:g}"
    if isinstance(prior, dist.ScaledInvChiSqPrior):
        return f"invchisq:{prior.df:g},{prior.scale:g}"
    return type(prior).__name__


def ingest(path, column: str | None = None, kind: str = "returns") -> ReturnSeries:
    """Load one numeric column from a headed CSV as a return series.

    kind="prices" applies y_t = 100*(log P_t - log P_{t-1}), shortening the
    series by one; kind="returns" passes values through.  Lines starting
    with '#' are ignored so emitted files can be re-ingested.
    """
    if kind not in ("prices", "returns"):
        raise ValueError(f"kind must be 'prices' or 'returns', got {kind!r}")
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [
            (lineno, row)
            for lineno, row in enumerate(csv.reader(fh), start=1)
            if row and not row[0].lstrip().startswith("#")
        ]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0][1]
    data = rows[1:]
    if not data:
        raise ValueError(f"{path}: no data rows after the header")
    if column is None:
        for j, _ in enumerate(header):
            try:
                float(data[0][1][j])
            except (ValueError, IndexError):
                continue
            column = header[j]
            break
        else:
            raise ValueError(f"{path}: no numeric column found in {header}")
    if column not in header:
        raise ValueError(f"{path}: column {column!r} not among {header}")
    j = header.index(column)
    values = np.empty(len(data))
    for i, (lineno, row) in enumerate(data):
        try:
            values[i] = float(row[j])
        except (ValueError, IndexError):
            cell = row[j] if j < len(row) else "<missing>"
            raise ValueError(
                f"{path}: row {lineno}: cannot parse {cell!r} in column {column!r}"
            ) from None
    if not np.all(np.isfinite(values)):
        lineno = data[int(np.argwhere(~np.isfinite(values))[0][0])][0]
        raise ValueError(f"{path}: row {lineno}: non-finite value in column {column!r}")
    if kind == "prices":
        bad = np.nonzero(values <= 0.0)[0]
        if bad.size:
            lineno = data[int(bad[0])][0]
            raise ValueError(
                f"{path}: row {lineno}: non-positive price {values[bad[0]]:g}"
            )
        values = 100.0 * np.diff(np.log(values))
        if values.size == 0:
            raise ValueError(f"{path}: need at least 2 prices to form returns")
    return ReturnSeries(values=values, demeaned=False, label=path.name)


def demean(series: ReturnSeries) -> ReturnSeries:
    return ReturnSeries(
        values=series.values - series.values.mean(),
        demeaned=True,
        label=series.label,
    )


def describe(series: ReturnSeries) -> dict:
    """T, mean, sample sd, moment skewness, and raw (non-excess) kurtosis."""
    x = series.values
    n = x.size
    if n < 4:
        raise ValueError(f"describe needs at least 4 observations, got {n}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        raise ValueError("skewness and kurtosis are undefined for a constant series")
    d = x - mean
    m2 = float(np.mean(d * d))
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return {
        "T": n,
        "mean": mean,
        "sd": sd,
        "skewness": m3 / m2**1.5,
        "kurtosis": m4 / m2**2,
    }


def write_series_csv(series: ReturnSeries, path) -> None:
    lines = ["return"] + [repr(float(v)) for v in series.values]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# report emission


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _sanitize(obj):
    """Make report structures JSON-safe; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(float(v)) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(_json_text(_sanitize(obj)), encoding="utf-8")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, fieldnames, rows, manifest: dict) -> None:
    lines = ["# manifest: " + json.dumps(_sanitize(manifest), sort_keys=True)]
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(_cell(row[f]) for f in fieldnames))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _build_manifest(command: str, args, extra: dict | None = None) -> dict:
    m = {
        "schema": "svhmc-report-v1",
        "version": __version__,
        "command": command,
    }
    if getattr(args, "data", None) is not None:
        m["data"] = {
            "path": str(args.data),
            "sha256": _sha256(args.data),
            "column": args.column,
            "kind": args.kind,
            "demean": getattr(args, "demean", None),
        }
    for name in ("warmup", "draws", "chains", "seed", "target_accept"):
        if getattr(args, name, None) is not None:
            m.setdefault("sampler", {})[name] = getattr(args, name)
    if extra:
        m.update(extra)
    return m


def _sampler_config(args, warmup_default: int, draws_default: int) -> hmc.SamplerConfig:
    return hmc.SamplerConfig(
        warmup=args.warmup if args.warmup is not None else warmup_default,
        draws=args.draws if args.draws is not None else draws_default,
        chains=args.chains,
        seed=args.seed,
        target_accept=args.target_accept,
    )


def _load_series(args) -> ReturnSeries:
    series = ingest(args.data, column=args.column, kind=args.kind)
    if getattr(args, "demean", False):
        series = demean(series)
    return series


def _fit_payload(fit: "svmodel.FitResult") -> dict:
    mean, lo, hi = fit.volatility_band(0.9)
    return {
        "family": fit.spec.family,
        "n": int(fit.y.size),
        "params": fit.scalar_summaries(),
        "diagnostics": fit.diagnostics(),
        "volatility": {"mean": mean, "lo_5": lo, "hi_95": hi},
    }


def _print_params(payload: dict) -> None:
    print(f"family: {payload['family']}  (n = {payload['n']})")
    print(f"{'param':<10}{'mean':>12}{'sd':>12}{'2.5%':>12}{'97.5%':>12}")
    for name, s in payload["params"].items():
        print(
            f"{name:<10}{s['mean']:>12.4f}{s['sd']:>12.4f}"
            f"{s['ci_2.5']:>12.4f}{s['ci_97.5']:>12.4f}"
        )
    diag = payload["diagnostics"]
    worst_rhat = max(diag["rhat"].values())
    print(
        f"divergence rate {diag['divergence_rate']:.4f}, "
        f"max split-Rhat {worst_rhat:.4f}"
    )


# ---------------------------------------------------------------------------
# commands


def _cmd_describe(args) -> int:
    series = ingest(args.data, column=args.column, kind=args.kind)
    stats = describe(series)
    manifest = _build_manifest("describe", args)
    out = {"manifest": manifest, "series": series.label, "stats": stats}
    print(_json_text(_sanitize(out)), end="")
    if args.out is not None:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "describe.json", out)
    return 0


def _make_spec(family: str, sigma_prior_text: str) -> svmodel.ModelSpec:
    priors = dist.PriorConfig(sigma2_prior=parse_sigma_prior(sigma_prior_text))
    return svmodel.ModelSpec(family, priors=priors)


def _cmd_fit(args) -> int:
    series = _load_series(args)
    if series.values.size < MIN_FIT_LENGTH:
        raise ValueError(
            f"fitting needs at least {MIN_FIT_LENGTH} observations, "
            f"got {series.values.size}"
        )
    spec = _make_spec(args.family, args.sigma_prior)
    config = _sampler_config(args, 5000, 5000)
    fit = svmodel.fit(spec, series.values, config)
    payload = _fit_payload(fit)
    manifest = _build_manifest(
        "fit", args,
        {"family": args.family, "sigma_prior": args.sigma_prior},
    )
    report = {"manifest": manifest, **payload}

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / f"fit_{args.family}.json", report)
    param_rows = [
        {
            "param": name,
            "mean": s["mean"],
            "sd": s["sd"],
            "ci_2.5": s["ci_2.5"],
            "ci_97.5": s["ci_97.5"],
            "rhat": payload["diagnostics"]["rhat"][name],
            "ess_bulk": payload["diagnostics"]["ess_bulk"][name],
        }
        for name, s in payload["params"].items()
    ]
    _write_csv(
        outdir / f"fit_{args.family}_params.csv",
        ("param", "mean", "sd", "ci_2.5", "ci_97.5", "rhat", "ess_bulk"),
        param_rows,
        manifest,
    )
    vol = payload["volatility"]
    vol_rows = [
        {"t": t + 1, "mean": vol["mean"][t], "lo_5": vol["lo_5"][t], "hi_95": vol["hi_95"][t]}
        for t in range(series.values.size)
    ]
    _write_csv(
        outdir / f"fit_{args.family}_volatility.csv",
        ("t", "mean", "lo_5", "hi_95"),
        vol_rows,
        manifest,
    )
    _print_params(payload)

    if payload["diagnostics"]["divergence_rate"] > DIVERGENCE_BUDGET:
        print(
            f"error: divergence rate {payload['diagnostics']['divergence_rate']:.3f} "
            f"exceeds the budget {DIVERGENCE_BUDGET}; report written anyway",
            file=sys.stderr,
        )
        return 3
    return 0


def _fit_and_criteria(family: str, sigma_prior_text: str, y: np.ndarray,
                      config: hmc.SamplerConfig) -> tuple[modsel.CriteriaReport, dict]:
    spec = _make_spec(family, sigma_prior_text)
    fit = svmodel.fit(spec, y, config)
    state = fit.posterior_mean_state()
    lp_hat = float(svmodel.pointwise_loglik(spec, state, y).sum())
    report = modsel.criteria(fit.loglik_matrix(), lp_hat, label=family)
    diag = fit.diagnostics()
    return report, diag


_COMPARE_COLUMNS = ("Dist", "DIC", "WAIC", "SE_waic", "LOO", "SE_loo")


def _criteria_row(rep: modsel.CriteriaReport) -> dict:
    return {
        "Dist": rep.label,
        "DIC": rep.dic,
        "WAIC": rep.waic,
        "SE_waic": rep.se_waic,
        "LOO": rep.loo,
        "SE_loo": rep.se_loo,
    }


def _cmd_compare(args) -> int:
    families = args.family
    if len(families) < 2:
        raise ValueError("compare needs at least 2 --family values")
    series = _load_series(args)
    if series.values.size < MIN_FIT_LENGTH:
        raise ValueError(
            f"fitting needs at least {MIN_FIT_LENGTH} observations, "
            f"got {series.values.size}"
        )
    config = _sampler_config(args, 5000, 5000)
    reports, failures, breached = [], [], False
    for family in families:
        try:
            rep, diag = _fit_and_criteria(family, args.sigma_prior, series.values, config)
        except Exception as exc:
            failures.append({"family": family, "error": str(exc)})
            print(f"error: fit failed for family {family}: {exc}", file=sys.stderr)
            continue
        reports.append(rep)
        if diag["divergence_rate"] > DIVERGENCE_BUDGET:
            breached = True
            print(
                f"error: family {family} divergence rate "
                f"{diag['divergence_rate']:.3f} exceeds budget", file=sys.stderr,
            )
    if not reports:
        print("error: all fits failed", file=sys.stderr)
        return 2

    ranking = modsel.compare(reports)
    manifest = _build_manifest(
        "compare", args,
        {"families": list(families), "sigma_prior": args.sigma_prior},
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "compare.json", {
        "manifest": manifest,
        "reports": [r.to_dict() for r in reports],
        "ranking": ranking["ranking"],
        "failures": failures,
    })
    rows = [_criteria_row(r) for r in reports]
    _write_csv(outdir / "compare.csv", _COMPARE_COLUMNS, rows, manifest)
    print(f"{'Dist':<14}{'DIC':>12}{'WAIC':>12}{'SE_waic':>10}{'LOO':>12}{'SE_loo':>10}")
    for row in rows:
        print(
            f"{row['Dist']:<14}{row['DIC']:>12.2f}{row['WAIC']:>12.2f}"
            f"{row['SE_waic']:>10.2f}{row['LOO']:>12.2f}{row['SE_loo']:>10.2f}"
        )
    print("ranking by WAIC:", " < ".join(ranking["ranking"]["waic"]))
    return 3 if breached else 0


def _cmd_sensitivity(args) -> int:
    families = args.family
    if not families:
        raise ValueError("sensitivity needs at least one --family")
    prior_texts = args.sigma_prior or list(SENSITIVITY_PRIOR_PRESETS)
    if args.repeats < 1:
        raise ValueError("repeats must be >= 1")
    series = _load_series(args)
    if series.values.size < MIN_FIT_LENGTH:
        raise ValueError(
            f"fitting needs at least {MIN_FIT_LENGTH} observations, "
            f"got {series.values.size}"
        )
    base = _sampler_config(args, 2500, 2500)
    rows = []
    rankings = {}
    breached = False
    for pi, prior_text in enumerate(prior_texts):
        parse_sigma_prior(prior_text)  # fail fast on malformed grammar
        for rep_i in range(args.repeats):
            reports = []
            for fi, family in enumerate(families):
                seed = int(
                    np.random.SeedSequence(
                        [int(args.seed), pi, rep_i, fi]
                    ).generate_state(1, np.uint32)[0]
                )
                config = replace(base, seed=seed)
                creport, diag = _fit_and_criteria(
                    family, prior_text, series.values, config
                )
                reports.append(creport)
                if diag["divergence_rate"] > DIVERGENCE_BUDGET:
                    breached = True
                    print(
                        f"error: {family} under {prior_text} (repeat {rep_i + 1}) "
                        f"divergence rate {diag['divergence_rate']:.3f} exceeds budget",
                        file=sys.stderr,
                    )
                row = _criteria_row(creport)
                rows.append({"prior": prior_text, "repeat": rep_i + 1, **row})
            order = modsel.compare(reports)["ranking"]["waic"]
            rankings[f"{prior_text}#{rep_i + 1}"] = order
    distinct = {tuple(v) for v in rankings.values()}
    stable = len(distinct) == 1
    manifest = _build_manifest(
        "sensitivity", args,
        {"families": list(families), "sigma_priors": list(prior_texts),
         "repeats": args.repeats},
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "sensitivity.json", {
        "manifest": manifest,
        "rows": rows,
        "waic_rankings": rankings,
        "ranking_stable": stable,
    })
    _write_csv(
        outdir / "sensitivity.csv",
        ("prior", "repeat") + _COMPARE_COLUMNS,
        rows,
        manifest,
    )
    print(f"{'prior':<22}{'rep':>4}{'Dist':>14}{'DIC':>12}{'WAIC':>12}{'LOO':>12}")
    for row in rows:
        print(
            f"{row['prior']:<22}{row['repeat']:>4}{row['Dist']:>14}"
            f"{row['DIC']:>12.2f}{row['WAIC']:>12.2f}{row['LOO']:>12.2f}"
        )
    print("WAIC ranking stable across priors:", "yes" if stable else "no")
    return 3 if breached else 0


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"malformed numeric list {text!r}") from None


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"malformed integer list {text!r}") from None


def _cmd_simulate(args) -> int:
    if args.full:
        m = 100
        warmup_default = draws_default = 5000
    else:
        m = args.m
        warmup_default = draws_default = 2000
    sampler = _sampler_config(args, warmup_default, draws_default)
    grid = simstudy.SimGrid(
        mu=args.mu,
        phi_set=_parse_float_list(args.phi),
        sigma_set=_parse_float_list(args.sigma),
        n_set=_parse_int_list(args.n),
        m=m,
        sampler=sampler,
        seed=args.seed,
    )
    spec = svmodel.ModelSpec(args.family)
    report = simstudy.run_study(grid, spec, true_nu=args.true_nu, workers=args.workers)
    manifest = _build_manifest(
        "simulate", args,
        {"family": args.family, "grid": {
            "mu": grid.mu, "phi_set": list(grid.phi_set),
            "sigma_set": list(grid.sigma_set), "n_set": list(grid.n_set),
            "m": grid.m, "seed": grid.seed,
        }},
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "simstudy.json", {
        "manifest": manifest, "report": report.to_dict(),
    })
    rows = report.to_rows()
    _write_csv(
        outdir / "simstudy.csv",
        ("n", "phi", "sigma_eta", "parameter", "truth", "bias", "smse",
         "min_ess", "max_rhat", "divergence_rate", "flagged_reps"),
        rows,
        manifest,
    )
    print(f"{'n':>6}{'phi':>7}{'sigma':>7}{'param':>11}{'bias':>10}{'smse':>10}")
    for r in rows:
        print(
            f"{r['n']:>6}{r['phi']:>7.2f}{r['sigma_eta']:>7.2f}{r['parameter']:>11}"
            f"{r['bias']:>10.4f}{r['smse']:>10.4f}"
        )
    if report.flagged:
        print(f"flagged replications (divergence budget): {report.flagged}")
    return 0


def _cmd_plot(args) -> int:
    if args.data is None and args.fit_report is None:
        raise ValueError("plot needs --data and/or --fit-report")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if args.data is not None:
        series = ingest(args.data, column=args.column, kind=args.kind)
        manifest = _build_manifest("plot", args)
        comment = "manifest: " + json.dumps(_sanitize(manifest), sort_keys=True)
        svg = plots.series_svg(series.values, title=f"Returns: {series.label}",
                               comment=comment)
        path = outdir / "returns.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    if args.fit_report is not None:
        report = json.loads(Path(args.fit_report).read_text(encoding="utf-8"))
        try:
            vol = report["volatility"]
            mean = np.array(vol["mean"], dtype=float)
            lo = np.array(vol["lo_5"], dtype=float)
            hi = np.array(vol["hi_95"], dtype=float)
            family = report.get("family", "fit")
        except (KeyError, TypeError):
            raise ValueError(
                f"{args.fit_report}: not a fit report (missing volatility block)"
            ) from None
        comment = "manifest: " + json.dumps(
            _sanitize(report.get("manifest", {})), sort_keys=True
        )
        svg = plots.band_svg(
            mean, lo, hi, title=f"Posterior volatility ({family})", comment=comment
        )
        path = outdir / "volatility.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def _add_data_args(p, required: bool = True):
    p.add_argument("data", nargs=None if required else "?", default=None,
                   help="CSV file with a header row")
    p.add_argument("--column", default=None, help="column name (default: first numeric)")
    p.add_argument("--kind", choices=("prices", "returns"), default="returns",
                   help="prices are turned into percent log-returns")


def _add_sampler_args(p):
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-accept", type=float, default=0.8, dest="target_accept")


def _add_fit_common(p):
    _add_data_args(p)
    p.add_argument("--demean", action=argparse.BooleanOptionalAction, default=True,
                   help="subtract the sample mean before fitting (default on)")
    _add_sampler_args(p)
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svhmc",
        description="Bayesian stochastic-volatility estimation and model comparison",
    )
    parser.add_argument("--version", action="version", version=f"svhmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="summary statistics of a return series")
    _add_data_args(p)
    p.add_argument("--out", default=None, help="also write describe.json here")
    p.set_defaults(func=_cmd_describe)

    p = sub.add_parser("fit", help="fit one error family")
    _add_fit_common(p)
    p.add_argument("--family", choices=dist.FAMILIES, default="gaussian")
    p.add_argument("--sigma-prior", default="gamma:0.1", dest="sigma_prior",
                   help="gamma:B | invgamma:a,b | invchisq:c,s")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("compare", help="criteria table across families")
    _add_fit_common(p)
    p.add_argument("--family", choices=dist.FAMILIES, action="append", default=None,
                   help="repeat for each family (at least two)")
    p.add_argument("--sigma-prior", default="gamma:0.1", dest="sigma_prior")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sensitivity", help="criteria across volatility-prior variants")
    _add_fit_common(p)
    p.add_argument("--family", choices=dist.FAMILIES, action="append", default=None)
    p.add_argument("--sigma-prior", action="append", default=None, dest="sigma_prior",
                   help="repeatable; default: the three preset priors")
    p.add_argument("--repeats", type=int, default=2)
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("simulate", help="bias/smse replication study")
    p.add_argument("--mu", type=float, default=-9.0)
    p.add_argument("--phi", default="0.95,0.99", help="comma-separated values")
    p.add_argument("--sigma", default="0.05,0.15", help="comma-separated values")
    p.add_argument("--n", default="500,1000,1500", help="comma-separated lengths")
    p.add_argument("--m", type=int, default=20, help="replications per cell")
    p.add_argument("--family", choices=dist.FAMILIES, default="gaussian")
    p.add_argument("--true-nu", type=float, default=None, dest="true_nu")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--full", action="store_true",
                   help="the full protocol: m=100, 5000+5000 draws")
    _add_sampler_args(p)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("plot", help="emit SVG plots")
    _add_data_args(p, required=False)
    p.add_argument("--fit-report", default=None, dest="fit_report",
                   help="fit_<family>.json produced by the fit command")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "family", None) is None and args.command in ("compare", "sensitivity"):
        args.family = ["gaussian", "ged", "student-t", "skew-normal"]
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
