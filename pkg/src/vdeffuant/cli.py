"""``vdeffuant`` command line: simulate, cluster-prob, sweep, stats, weights, phase."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import experiments as ex
from .analytics import (FoldVariant, biased_poly, biased_positive_threshold, expected_weight_biased,
                        expected_weight_uniform, fold_is_valid, folded_bound, format_decimal,
                        format_fraction, phase_region, threshold_one_breakdown, weight_law)
from .opinions import pile_pmf_biased, pile_pmf_uniform

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

CONFIG_FIELDS = {f.name for f in dataclasses.fields(ex.ExperimentConfig)}


class UsageError(ValueError):
    pass


def int_range(text) -> list[int]:
    """``"5"``, ``"2:7"`` (inclusive), ``"2,4,6"`` or a list of ints."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ":" in part:
            a, b = part.split(":")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def rho_list(text) -> list:
    """Comma-separated fractions; ``uniform`` stands for the uniform measure."""
    items = text if isinstance(text, list) else str(text).split(",")
    out = []
    for item in items:
        item = str(item).strip()
        out.append(None if item.lower() == "uniform" else Fraction(item))
    return out


def float_list(text) -> list[float]:
    if isinstance(text, list):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _common(p: argparse.ArgumentParser, ranges: bool = False) -> None:
    num = str if ranges else int
    p.add_argument("--F", type=num, default=None, help="number of issues" + (" (N, A:B or list)" if ranges else ""))
    p.add_argument("--theta", type=num, default=None, help="confidence threshold" + (" (N, A:B or list)" if ranges else ""))
    p.add_argument("--rho", type=str, default=None, help="polar mass of the biased measure, e.g. 1/32")
    p.add_argument("--sites", type=int, default=None)
    p.add_argument("--boundary", choices=["ring", "interval"], default=None)
    p.add_argument("--init", choices=["uniform", "biased"], default=None)
    p.add_argument("--dynamics", choices=["deffuant", "axelrod"], default=None)
    p.add_argument("--t-max", dest="t_max", type=float, default=None)
    p.add_argument("--max-events", dest="max_events", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None, help="TOML file with the same keys as the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vdeffuant", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one replicate: time series, summary, final snapshot")
    _common(p)
    p.add_argument("--replicate", type=int, default=0, help="replicate index (selects the seed stream)")
    p.add_argument("--ledger", action="store_true", default=None, help="also write the contribution ledger")
    p.add_argument("--genealogy", action="store_true", default=None, help="also write origin ancestry probes")

    p = sub.add_parser("cluster-prob", help="P(two sites at distance d agree at time t)")
    _common(p)
    p.add_argument("--distances", default=None, help="comma-separated distances (default 1)")
    p.add_argument("--times", default=None, help="comma-separated times (default: geometric grid up to t-max)")

    p = sub.add_parser("sweep", help="phase region, expected weight and survival per (F, theta, rho) cell")
    _common(p, ranges=True)
    p.add_argument("--analytic-only", dest="analytic_only", action="store_true", default=None,
                   help="skip the Monte Carlo columns")

    p = sub.add_parser("stats", help="initial-measure diagnostics")
    _common(p)
    p.add_argument("--N", type=int, default=None, help="number of edges sampled (default 10^6)")
    p.add_argument("--pairs", default=None, help="profile pairs as hex, e.g. 0-7,7-0")

    p = sub.add_parser("weights", help="exact weight laws, expectations and folded bounds")
    _common(p)

    p = sub.add_parser("phase", help="phase region table")
    _common(p, ranges=True)
    return parser


def load_config_file(path) -> dict:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"cannot parse {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in data.items()}


def merged_options(args: argparse.Namespace) -> dict:
    """Config-file values overridden by any flag given on the command line."""
    opts = load_config_file(args.config) if args.config else {}
    for k, v in vars(args).items():
        if k in ("config", "command", "verbose"):
            continue
        if v is not None:
            opts[k] = v
    return opts


def experiment_config(opts: dict, extra_keys=()) -> ex.ExperimentConfig:
    unknown = set(opts) - CONFIG_FIELDS - set(extra_keys)
    if unknown:
        raise UsageError(f"unknown option(s): {', '.join(sorted(unknown))}")
    kw = {k: v for k, v in opts.items() if k in CONFIG_FIELDS}
    if "rho" in kw:
        kw["rho"] = Fraction(str(kw["rho"]))
        kw.setdefault("init", "biased")
    try:
        return ex.ExperimentConfig(**kw)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from exc


def _emit(rows, columns, out=None) -> None:
    out = out or sys.stdout
    out.write(",".join(columns) + "\n")
    for r in rows:
        out.write(",".join(ex._cell(v) for v in r) + "\n")


def _exact_row(name, j, value):
    return (name, "" if j is None else j, format_fraction(value), format_decimal(value))


def weights_rows(F: int, theta: int, rho=None) -> list[tuple]:
    rows = []
    law = weight_law(F, theta)
    for j in range(1, F + 1):
        for v, p in law[j]:
            rows.append(_exact_row(f"weight_law[{v}]", j, p))
    for j in range(F + 1):
        rows.append(_exact_row("pile_pmf_uniform", j, pile_pmf_uniform(F, j)))
    rows.append(_exact_row("expected_weight_uniform", None, expected_weight_uniform(F, theta)))
    for variant in FoldVariant:
        if theta >= 1:
            rows.append(_exact_row(f"folded_bound_{variant.value}", None, folded_bound(F, theta, variant)))
    rows.append(("fold_is_valid", "", str(fold_is_valid(F, theta)), ""))
    if rho is not None:
        for j in range(F + 1):
            rows.append(_exact_row("pile_pmf_biased", j, pile_pmf_biased(F, theta, rho, j)))
        rows.append(_exact_row("expected_weight_biased", None, expected_weight_biased(F, theta, rho)))
    if 2 * theta < F:
        c0, c1, c2 = biased_poly(F, theta)
        for name, c in (("biased_poly_c0", c0), ("biased_poly_c1", c1), ("biased_poly_c2", c2)):
            rows.append(_exact_row(name, None, Fraction(c)))
        rows.append(("biased_positive_threshold", "", "", repr(float(biased_positive_threshold(F, theta)))))
    if (F, theta) == (3, 1):
        b = threshold_one_breakdown()
        for k, v in dataclasses.asdict(b).items():
            for n, part in enumerate(v if isinstance(v, tuple) else (v,)):
                rows.append(_exact_row(f"threshold_one_{k}", n if isinstance(v, tuple) else None, Fraction(part)))
    rows.append(("phase_region", "", phase_region(F, theta).value, ""))
    return rows


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = merged_options(args)
    cmd = args.command
    if cmd == "simulate":
        replicate = int(opts.pop("replicate", 0))
        cfg = experiment_config(opts)
        res = ex.cmd_simulate(cfg, replicate)
        print(f"{res.summary['final_state']} at t={res.summary['clock']:.6g} "
              f"after {res.summary['events']} events; outputs in {cfg.out}")
    elif cmd == "cluster-prob":
        distances = int_range(opts.pop("distances", 1))
        times = opts.pop("times", None)
        cfg = experiment_config(opts)
        times = float_list(times) if times is not None else ex.geometric_grid(cfg.t_max)
        if any(d < 0 for d in distances):
            raise UsageError("distances must be nonnegative")
        ex.cmd_cluster_prob(cfg, distances, times)
        print(f"wrote {cfg.out}/cluster_prob.csv")
    elif cmd == "sweep":
        F_values = int_range(opts.pop("F", "2:7"))
        theta_values = int_range(opts.pop("theta", "1:7"))
        rhos = rho_list(opts.pop("rho")) if "rho" in opts else [None]
        simulate = not opts.pop("analytic_only", False)
        cfg = experiment_config(opts)
        try:
            grid = ex.SweepGrid.from_ranges(F_values, theta_values, rhos, cfg, simulate)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        rows = ex.cmd_sweep(grid)
        print(f"wrote {len(rows)} cell(s) to {cfg.out}/sweep.csv")
    elif cmd == "stats":
        N = int(opts.pop("N", 10**6))
        pairs = opts.pop("pairs", None)
        if N < 0:
            raise UsageError("N must be nonnegative")
        cfg = experiment_config(opts)
        if pairs is not None:
            pairs = [tuple(int(h, 16) for h in item.split("-")) for item in str(pairs).split(",")]
        rows = ex.cmd_stats(cfg, N, pairs)
        _emit(rows, ["quantity", "key", "observed", "expected", "stderr"])
    elif cmd == "weights":
        F = int(opts.get("F", 3))
        theta = int(opts.get("theta", 1))
        rho = Fraction(str(opts["rho"])) if "rho" in opts else None
        if not (1 <= F <= 64 and 0 <= theta <= F):
            raise UsageError(f"need 1 <= F <= 64 and 0 <= theta <= F, got F={F}, theta={theta}")
        if rho is not None and not 0 <= rho < Fraction(1, 2**F):
            raise UsageError(f"rho must lie in [0, 2^-F), got {rho}")
        _emit(weights_rows(F, theta, rho), ["quantity", "j", "exact", "decimal"])
    elif cmd == "phase":
        rows = []
        for F in int_range(opts.get("F", "2:7")):
            for theta in int_range(opts.get("theta", "1:7")):
                if 0 <= theta <= F and F >= 1:
                    rows.append((F, theta, phase_region(F, theta).value))
        _emit(rows, ["F", "theta", "phase_region"])
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
