"""Command-line front end: alpha sweeps, theorem verification, barrier export.

Exit codes: 0 success, 1 check failure, 2 config error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .cache import POLICIES, CacheStore
from .config import RunConfig, load_config
from .core import (
    BarrierMatrix,
    System,
    aubry_data,
    critical_value,
    elementary_solutions,
)
from .errors import ConfigError, NumericError, WeakKamError
from .fixtures import get_pair
from .minplus import build_cost
from .torus import EXACT_PARTS, OneForm
from . import verify as V

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULT_THRESHOLDS = {
    "semigroup_commutation": 0.1,
    "sum_semigroup": 0.3,
    "shared_weak_kam": 0.1,
    "barrier_equality": 0.1,
    "alpha_quasilinearity": 0.02,
    "common_subsolution": 0.1,
    "quotient_isometry": 0.1,
}


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_alpha(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.spec is None:
        raise ConfigError("alpha sweep needs a 'hamiltonian' entry")
    if cfg.alpha_sweep is None:
        raise ConfigError("config has no 'alpha' block")
    sweep = cfg.alpha_sweep
    cs = np.linspace(sweep["c_min"], sweep["c_max"], sweep["count"])
    rows = []
    for cval in cs:
        c = np.array(cfg.form.c, dtype=float)
        c[sweep["axis"]] = cval
        form = OneForm(c, cfg.form.exact)
        cv = critical_value(build_cost(cfg.grid, cfg.spec, form), sweep["method"])
        rows.append([_fmt(x) for x in c] + [_fmt(cv.alpha), cv.method, _fmt(cv.residual)])
    header = [f"c_{i}" for i in range(cfg.grid.dim)] + ["alpha", "method", "residual"]
    path = out_dir / "alpha.csv"
    _write_csv(path, header, rows)
    print(f"wrote {len(rows)} alpha values to {path}")
    return EXIT_OK


def cmd_barrier(cfg: RunConfig, out_dir: Path, cache: CacheStore) -> int:
    if cfg.spec is None:
        raise ConfigError("barrier export needs a 'hamiltonian' entry")
    system = System(cfg.grid, cfg.spec, cfg.form)
    n_max, window = cfg.barrier["n_max"], cfg.barrier["window"]
    provenance = {
        "kind": "h",
        "grid": {
            "dim": cfg.grid.dim,
            "n_per_axis": cfg.grid.n_per_axis,
            "tau": cfg.grid.tau,
            "v_max": cfg.grid.v_max,
        },
        "spec": cfg.spec.describe(),
        "form": cfg.form.describe(),
        "alpha": system.alpha,
        "n_max": n_max,
        "window": window,
    }
    cached = cache.get(provenance)
    if cached is not None:
        bm = BarrierMatrix(
            h=cached,
            alpha=system.alpha,
            n_max=n_max,
            window=window,
            grid=cfg.grid,
            spec_desc=cfg.spec.describe(),
            form_desc=cfg.form.describe(),
        )
        system._barriers[(n_max, window)] = bm
    else:
        bm = system.barrier(n_max=n_max, window=window)
        try:
            cache.put(provenance, bm.h, cfg.grid.tau)
        except OSError as exc:
            warnings.warn(f"cache write failed: {exc}", RuntimeWarning)
    data = aubry_data(bm, tol_zero=cfg.barrier["tol_zero"])
    u_minus, _ = elementary_solutions(
        bm, int(data.aubry_indices[0]), tol_zero=data.tol_zero
    )
    coords = cfg.grid.coords()
    in_aubry = np.zeros(cfg.grid.n_states, dtype=int)
    in_aubry[data.aubry_indices] = 1
    in_mane = np.zeros(cfg.grid.n_states, dtype=int)
    in_mane[data.mane_indices] = 1
    header = [f"q_{i}" for i in range(cfg.grid.dim)] + [
        "B",
        "b",
        "aubry",
        "mane",
        "u_minus",
    ]
    rows = [
        [_fmt(x) for x in coords[i]]
        + [_fmt(data.B[i]), _fmt(data.b[i]), str(in_aubry[i]), str(in_mane[i]), _fmt(u_minus[i])]
        for i in range(cfg.grid.n_states)
    ]
    path = out_dir / "barrier.csv"
    _write_csv(path, header, rows)
    print(
        f"alpha = {system.alpha!r}; Aubry points: {len(data.aubry_indices)}, "
        f"Mane points: {len(data.mane_indices)}, classes: {len(data.classes)}"
    )
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def _run_check(name: str, pair, cfg: RunConfig, grids, cache: V.SystemCache):
    v = cfg.verify
    threshold = v.thresholds.get(name, DEFAULT_THRESHOLDS.get(name))
    common = dict(cache=cache, fixture=v.pair_name)
    if name == "semigroup_commutation":
        return V.verify_semigroup_commutation(
            pair, cfg.form, grids, s_time=v.s_time, r_time=v.r_time, seed=v.seed,
            u0_scale=v.u0_scale, fine_threshold=threshold, ratio_gate=v.ratio_gate,
            **common,
        )
    if name == "sum_semigroup":
        return V.verify_sum_semigroup(
            pair, cfg.form, grids, t_time=v.t_time, seed=v.seed, u0_scale=v.u0_scale,
            fine_threshold=threshold, ratio_gate=v.ratio_gate, **common,
        )
    if name == "shared_weak_kam":
        return V.verify_shared_weak_kam(
            pair, cfg.form, grids, t_time=v.t_time, n_max=v.n_max, window=v.window,
            fine_threshold=threshold, ratio_gate=v.ratio_gate, **common,
        )
    if name == "barrier_equality":
        return V.verify_barrier_equality(
            pair, cfg.form, grids, n_max=v.n_max, window=v.window,
            fine_threshold=threshold, ratio_gate=v.ratio_gate, **common,
        )
    if name == "set_equality":
        return V.verify_set_equality(
            pair, cfg.form, grids, n_max=v.n_max, window=v.window,
            ratio_gate=v.ratio_gate, **common,
        )
    if name == "alpha_quasilinearity":
        return V.verify_alpha_quasilinearity(
            pair, list(v.quasilinearity_forms), grids,
            fine_threshold=threshold, ratio_gate=v.ratio_gate, **common,
        )
    if name == "common_subsolution":
        return V.verify_common_subsolution(
            pair, cfg.form, grids, n_max=v.n_max, window=v.window,
            fine_threshold=threshold, ratio_gate=v.ratio_gate, **common,
        )
    if name == "quotient_isometry":
        return V.verify_quotient_isometry(
            pair, cfg.form, grids, n_max=v.n_max, window=v.window,
            fine_threshold=threshold, ratio_gate=v.ratio_gate, **common,
        )
    if name == "gauge_invariance":
        if cfg.spec is None:
            raise ConfigError("gauge_invariance needs a 'hamiltonian' entry")
        plain = OneForm(cfg.form.c)
        gauged = OneForm(cfg.form.c, EXACT_PARTS[v.gauge_exact])
        return V.verify_gauge_invariance(
            cfg.spec, plain, gauged, grids, n_max=v.n_max, window=v.window, **common,
        )
    raise ConfigError(f"unknown check {name!r}")


def cmd_verify(cfg: RunConfig, out_dir: Path, expect_fail: bool, resolutions) -> int:
    if cfg.verify is None:
        raise ConfigError("config has no 'verify' block")
    v = cfg.verify
    pair = get_pair(v.pair_name)
    grids = cfg.grids_for(resolutions or v.resolutions)
    cache = V.SystemCache()
    reports = []
    for name in v.checks:
        report = _run_check(name, pair, cfg, grids, cache)
        reports.append(report)
        fine = {k: vals[-1] for k, vals in report.metrics.items()}
        metric_str = " ".join(f"{k}={val:.4g}" for k, val in fine.items())
        print(
            f"{report.check:24s} {report.fixture:10s} "
            f"ratio={report.ratio:8.3f}  {'PASS' if report.passed else 'FAIL'}  "
            f"[{metric_str}]  ({report.runtime_ms:.0f} ms)"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "verify_report.json"
    payload = json.dumps(
        [r.to_dict() for r in sorted(reports, key=lambda r: r.check)],
        sort_keys=True,
        indent=2,
    )
    path.write_text(payload + "\n")
    print(f"wrote report to {path}")
    all_pass = all(r.passed for r in reports)
    if expect_fail:
        return EXIT_OK if not all_pass else EXIT_CHECK_FAILED
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakkam",
        description="discrete weak KAM objects and commuting-pair verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("alpha", "sweep the critical value over a cohomology-class range"),
        ("verify", "run the commuting-pair verification suite"),
        ("barrier", "export barrier functions and Aubry/Mane flags"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--cache", choices=POLICIES, default="rw", help="cache policy")
        if name == "verify":
            p.add_argument(
                "--expect-fail",
                action="store_true",
                help="invert exit semantics (negative controls)",
            )
            p.add_argument(
                "--resolutions",
                default=None,
                help="comma-separated per-axis resolutions, e.g. 16,32",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out)
        if args.command == "alpha":
            return cmd_alpha(cfg, out_dir)
        if args.command == "barrier":
            store = CacheStore(out_dir / "cache", args.cache)
            return cmd_barrier(cfg, out_dir, store)
        resolutions = None
        if args.resolutions:
            try:
                resolutions = [int(x) for x in args.resolutions.split(",")]
            except ValueError as exc:
                raise ConfigError(f"bad --resolutions: {args.resolutions!r}") from exc
            if len(resolutions) < 2:
                raise ConfigError("--resolutions needs at least two values")
        return cmd_verify(cfg, out_dir, args.expect_fail, resolutions)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except WeakKamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
