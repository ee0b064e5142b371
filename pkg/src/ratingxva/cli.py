"""Command line entry point: ``ratingxva run <config>``.

For every copula weight and collateral scheme of the scenario the run writes

* ``adjustments_<scheme>_a<alpha>.csv`` and ``.txt``: one row per trigger pair,
* ``mitigation_<scheme>_a<alpha>.csv`` and ``.txt`` when the ``(D, D)`` cell
  is part of the grid,
* ``summary.csv``: every row of every table in one file.

Adjustments are in units of 1e-3 per unit notional. CSV files start with
``#``-prefixed metadata lines (seed, path count, config hash, fixed rate or
spread) and contain nothing run-dependent beyond that, so re-running a config
reproduces them byte for byte.

Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from ._core import BACKEND
from .ctmc_sim import TriggerLevels, dump_paths_csv, simulate_paths
from .errors import NumericError, ValidationError
from .scenario import Scenario, load_scenario_file
from .xva_engine import CHUNK_PATHS, UNITS, build_market, chunk_bounds, estimate_grid, mitigation_table

log = logging.getLogger(__name__)

TABLE_COLUMNS = ("URVA", "DRVA", "RVA", "UCVA_R", "DVA_R", "CVA_R")
EXTRA_COLUMNS = ("UCVA", "DVA", "CVA", "URVA_h", "DRVA_h", "CVA_Rh", "RVA_h")
HEADER_NAMES = {"UCVA_R": "UCVA^R", "DVA_R": "DVA^R", "CVA_R": "CVA^R"}


def _fmt(x: float) -> str:
    return repr(float(x))


def _alpha_tag(alpha: float) -> str:
    return f"{alpha:g}".replace(".", "p").replace("-", "m")


def metadata(scenario: Scenario, alpha: float, scheme: str, product_header: dict) -> list[tuple[str, str]]:
    meta = [
        ("ratingxva", __version__),
        ("instrument", scenario.instrument),
        ("scheme", scheme),
        ("alpha", _fmt(alpha)),
        ("seed", str(scenario.base_seed)),
        ("n_paths", str(scenario.n_paths)),
        ("config_hash", scenario.config_hash),
        ("units", "1e-3 per unit notional"),
    ]
    meta += [(k, _fmt(v)) for k, v in product_header.items()]
    return meta


def _rows(reports: dict, scheme: str, alpha: float, seed: int, mitigation: dict | None):
    for tr, rep in reports.items():
        row = {
            "K1": rep.labels[tr.K1 - 1],
            "K2": rep.labels[tr.K2 - 1],
            "scheme": scheme,
            "alpha": _fmt(alpha),
            "seed": str(seed),
            "n_paths": str(rep.n_paths),
        }
        for k in TABLE_COLUMNS + EXTRA_COLUMNS:
            row[k] = _fmt(rep.estimates[k] / UNITS)
        for k in TABLE_COLUMNS + EXTRA_COLUMNS:
            row["se_" + k] = _fmt(rep.std_errors[k] / UNITS)
        if mitigation is not None:
            row["mitigation_pct"] = _fmt(mitigation[tr])
        yield row


def csv_columns(with_mitigation: bool) -> list[str]:
    cols = ["K1", "K2", "scheme", "alpha", "seed", "n_paths"]
    cols += list(TABLE_COLUMNS + EXTRA_COLUMNS)
    cols += ["se_" + k for k in TABLE_COLUMNS + EXTRA_COLUMNS]
    if with_mitigation:
        cols.append("mitigation_pct")
    return cols


def write_csv(path: Path, meta, rows: list[dict], columns: list[str]) -> None:
    buf = io.StringIO()
    for k, v in meta:
        buf.write(f"# {k}: {v}\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    path.write_text(buf.getvalue())


def text_table(meta, rows: list[dict], columns: list[str], title: str) -> str:
    """Aligned plain-text table with 5 decimals."""
    heads = [HEADER_NAMES.get(c, c) for c in columns]
    body = []
    for r in rows:
        cells = []
        for c in columns:
            v = r[c]
            cells.append(v if c in ("K1", "K2") else f"{float(v):.5f}")
        body.append(cells)
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(heads)]
    line = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))  # noqa: E731
    out = [title]
    out += [f"# {k}: {v}" for k, v in meta]
    out.append(line(heads))
    out.append("-" * len(out[-1]))
    out += [line(b) for b in body]
    return "\n".join(out) + "\n"


def run_grid(scenario: Scenario, out_dir=None, workers: int = 1, dump_paths: bool = False) -> list[Path]:
    """Run the full (alpha x scheme x trigger) grid and write all tables.

    Returns the written file paths in creation order.
    """
    out = Path(out_dir if out_dir is not None else scenario.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    K = scenario.scale.K
    base = TriggerLevels(K, K)
    written: list[Path] = []
    summary: list[dict] = []
    for alpha in scenario.copula_alphas:
        market = build_market(scenario, alpha)
        grid = estimate_grid(scenario, alpha, workers=workers, market=market)
        for scheme in scenario.schemes:
            reports = {tr: grid[(scheme, tr)] for tr in scenario.triggers}
            mit = mitigation_table(reports, K) if base in reports else None
            meta = metadata(scenario, alpha, scheme, market.product.header())
            rows = list(_rows(reports, scheme, alpha, scenario.base_seed, mit))
            summary += rows
            tag = f"{scheme}_a{_alpha_tag(alpha)}"
            cols = csv_columns(mit is not None)
            p = out / f"adjustments_{tag}.csv"
            write_csv(p, meta, rows, cols)
            written.append(p)
            shown = ["K1", "K2", *TABLE_COLUMNS] + (["mitigation_pct"] if mit is not None else [])
            title = f"CVA and RVA components (1e-3), {scenario.instrument.upper()}, alpha={alpha:g}, collateral={scheme}"
            p = out / f"adjustments_{tag}.txt"
            p.write_text(text_table(meta, rows, shown, title))
            written.append(p)
            if mit is not None:
                mrows = [
                    {"pair": f"({r['K1']},{r['K2']})", "scheme": scheme, "alpha": _fmt(alpha), "seed": str(scenario.base_seed),
                     "K1": r["K1"], "K2": r["K2"], "mitigation_pct": r["mitigation_pct"]}
                    for r in rows
                    if (r["K1"], r["K2"]) != (scenario.scale.labels[-1],) * 2
                ]
                p = out / f"mitigation_{tag}.csv"
                write_csv(p, meta, mrows, ["K1", "K2", "scheme", "alpha", "seed", "mitigation_pct"])
                written.append(p)
                p = out / f"mitigation_{tag}.txt"
                p.write_text(
                    f"Mitigation in CVA^R (%), alpha={alpha:g}, collateral={scheme}\n"
                    + "  ".join(f"{m['pair']:>8}" for m in mrows)
                    + "\n"
                    + "  ".join(f"{float(m['mitigation_pct']):7.2f}%" for m in mrows)
                    + "\n"
                )
                written.append(p)
        if dump_paths:
            p = out / f"paths_a{_alpha_tag(alpha)}.csv"
            with p.open("w") as fh:
                for i, (lo, hi) in enumerate(chunk_bounds(scenario.n_paths, CHUNK_PATHS)):
                    batch = simulate_paths(market.joint, market.initial_state, scenario.maturity, scenario.base_seed, range(lo, hi), market.table)
                    tmp = io.StringIO()
                    dump_paths_csv(batch, tmp)
                    text = tmp.getvalue()
                    fh.write(text if i == 0 else text.split("\n", 1)[1])
            written.append(p)
    has_mit = any("mitigation_pct" in r for r in summary)
    p = out / "summary.csv"
    meta = [("ratingxva", __version__), ("instrument", scenario.instrument), ("seed", str(scenario.base_seed)),
            ("n_paths", str(scenario.n_paths)), ("config_hash", scenario.config_hash), ("units", "1e-3 per unit notional")]
    write_csv(p, meta, summary, csv_columns(has_mit))
    written.append(p)
    return written


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ratingxva", description="Rating-trigger CVA/DVA/RVA Monte Carlo.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment grid of a scenario file")
    run.add_argument("config", help="scenario file (TOML)")
    run.add_argument("--paths", type=int, help="override the number of Monte Carlo paths")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--out", help="output directory (default: the config's run.out)")
    run.add_argument("--dump-paths", action="store_true", help="also write the simulated rating paths")
    run.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")
    run.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario_file(args.config)
        changes = {}
        if args.paths is not None:
            changes["n_paths"] = args.paths
        if args.seed is not None:
            changes["base_seed"] = args.seed
        if changes:
            scenario = replace(scenario, **changes)
        log.info("kernel backend: %s; %d paths, seed %d", BACKEND, scenario.n_paths, scenario.base_seed)
        files = run_grid(scenario, args.out, workers=max(1, args.workers), dump_paths=args.dump_paths)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
