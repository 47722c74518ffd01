"""Command-line front end: oracle runs, prediction sweeps, identity
checks, and machine-readable reports.

Reports are deterministic: rows are sorted by (n, nu), floats use
repr-roundtrip formatting, and no wall-clock data is emitted, so
identical configurations produce byte-identical files.  JSON reports
carry "schema": "starszego/1"; CSV files start with a version line
"# schema: starszego/1" followed by the fixed column header.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(pivot/branch/conditioning), 4 tolerance breach in --assert mode.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import (
    BchOrder,
    e_classical,
    locally_half_prediction,
    semiclassical_prediction,
    strong_formula,
    weak_ratio_prediction,
)
from .catalogue import SymbolBuilder, catalogue_entry, load_symbol_file, pauli_block_inputs
from .errors import ConfigError, StarSzegoError
from .finite_sections import bocg_evaluate, build_block_Tn, build_Tn, logdet
from .moyal import WindowSpec
from .symbol import sample_symbol
from .wiener_hopf import LEFT, RIGHT, numeric_factorize, tridiagonal_factorize

SCHEMA = "starszego/1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ASSERT = 4


@dataclass
class RunConfig:
    command: str
    symbol: str = "toeplitz-exp"
    n_list: tuple = (20,)
    nu_list: tuple = ()
    orders: tuple = ("d0", "d2", "c0", "c1")
    out: str | None = None
    format: str = "json"
    assert_mode: bool = False
    jobs: int = 1
    seed: int | None = None
    tol: float | None = None

    def __post_init__(self):
        if any(n <= 0 for n in self.n_list):
            raise ConfigError("n values must be positive")
        if any(nu <= 0 for nu in self.nu_list):
            raise ConfigError("nu values must be positive")
        bad = set(self.orders) - {"d0", "d2", "c0", "c1"}
        if bad:
            raise ConfigError(f"unknown order toggles: {sorted(bad)}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @property
    def tolerance(self) -> float:
        if self.tol is not None:
            return self.tol
        env = os.environ.get("STARSZEGO_TOL")
        return float(env) if env else 1e-8


def _builder(cfg: RunConfig) -> SymbolBuilder:
    name = cfg.symbol
    if os.path.exists(name) or name.endswith(".json"):
        return load_symbol_file(name)
    kwargs = {}
    if cfg.nu_list and name == "example3":
        kwargs["nu"] = cfg.nu_list[0]
    return catalogue_entry(name, **kwargs)


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _grid_for_n(builder: SymbolBuilder, n: int, pad: int = 2):
    if builder.n_dependent is not None:
        builder = builder.n_dependent(n)
    return builder.make_grid(-pad, n + pad, 24, 128)


# ---------------------------------------------------------------------------
# commands


def cmd_logdet(cfg: RunConfig) -> dict:
    builder = _builder(cfg)

    def one(n: int) -> dict:
        if builder.block is not None:
            bg = builder.block(0, 2 * n + 2, 10, 64)
            ld = logdet(build_block_Tn(bg, n))
        else:
            ld = logdet(build_Tn(_grid_for_n(builder, n), n))
        return {"n": n, "log_abs": ld.log_abs, "phase": ld.phase,
                "pivot_min": ld.pivot_min}

    rows = sorted(_map_jobs(one, list(cfg.n_list), cfg.jobs), key=lambda r: r["n"])
    return {"rows": rows, "columns": ["n", "log_abs", "phase", "pivot_min"]}


def _rate_fit(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if y > 0]
    if len(pts) < 2:
        return None
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    return float(np.polyfit(lx, ly, 1)[0])


def _residual(oracle: complex, prediction: complex) -> float:
    return float(abs(oracle - prediction) / max(1.0, abs(oracle)))


def cmd_compare(cfg: RunConfig) -> dict:
    builder = _builder(cfg)
    kind = builder.kind
    rows = []
    checks = []
    if kind in ("identity", "toeplitz-exp", "tridiagonal", "example2"):
        for n in sorted(cfg.n_list):
            a = _wide_grid(builder, n)
            oracle = logdet(build_Tn(a, n)).value
            if kind == "identity":
                pred = 0.0 + 0.0j
            elif kind == "toeplitz-exp":
                c = a.restrict(0, 0)
                ec = e_classical(c)
                g0 = _log_zero_coefficient(c)
                pred = n * g0 + ec
            else:
                win = WindowSpec.for_decay(max(a.decay_rho, 0.5), 1e-12)
                fl = tridiagonal_factorize(builder.tridiagonal, LEFT, a.x_min, a.x_max)
                fr = tridiagonal_factorize(builder.tridiagonal, RIGHT, a.x_min, a.x_max)
                pred = strong_formula(a, n, fl, fr, BchOrder(2), win).total
            rows.append({"n": n, "nu": 0.0, "oracle_log_abs": float(oracle.real),
                         "prediction_total": float(pred.real),
                         "residual": _residual(oracle, pred)})
    elif kind == "example3":
        nus = cfg.nu_list or (0.2, 0.1)
        from .catalogue import example3_builder

        for nu in sorted(nus, reverse=True):
            b = example3_builder(nu, builder.params.get("h"), builder.params.get("J"))
            for n in sorted(cfg.n_list):
                a = b.make_grid(0, 2 * n + 2, 24, 128)
                oracle = logdet(build_Tn(a, n)).value
                pred = semiclassical_prediction(b.smooth, n, cfg.orders).total
                rows.append({"n": n, "nu": nu, "oracle_log_abs": float(oracle.real),
                             "prediction_total": float(pred.real),
                             "residual": _residual(oracle, pred)})
    elif kind == "example4":
        for n in sorted(cfg.n_list):
            bn = builder.n_dependent(n)
            a = bn.make_grid(0, n + 2, 24, 128)
            oracle = logdet(build_Tn(a, n)).value
            pred = locally_half_prediction(builder.smooth, n).total
            rows.append({"n": n, "nu": 0.0, "oracle_log_abs": float(oracle.real),
                         "prediction_total": float(pred.real),
                         "residual": float(abs(oracle - pred))})
        rate = _rate_fit([r["n"] for r in rows], [r["residual"] for r in rows])
        if rate is not None:
            checks.append({"name": "n_rate", "value": rate})
    elif kind == "block-pauli":
        from .asymptotics import block_boundary_formula

        d = pauli_block_inputs(**{k: builder.params[k] for k in ("epsilon", "gamma", "h")})
        for n in sorted(cfg.n_list):
            bg = builder.block(0, 2 * n + 2, 10, 64)
            oracle = logdet(build_block_Tn(bg, n)).value
            pred = block_boundary_formula(d["betaL"], d["betaR"], d["gammaL"],
                                          d["gammaR"], n, d["trace_bulk"]).total
            rows.append({"n": n, "nu": 0.0, "oracle_log_abs": float(oracle.real),
                         "prediction_total": float(pred.real),
                         "residual": float(abs(oracle - pred))})
    else:
        raise ConfigError(f"no prediction path for symbol kind {kind!r}")

    report = {"rows": rows,
              "columns": ["n", "nu", "oracle_log_abs", "prediction_total", "residual"],
              "fits": checks}
    if cfg.assert_mode:
        bad = _compare_breach(kind, rows, checks, cfg.tolerance)
        report["assert"] = {"enabled": True, "passed": not bad, "detail": bad}
    return report


def _compare_breach(kind, rows, checks, tol):
    if kind == "identity":
        worst = max((r["residual"] for r in rows), default=0.0)
        return {"worst_residual": worst} if worst > 1e-10 else None
    if kind in ("toeplitz-exp", "tridiagonal", "example2"):
        worst = max((r["residual"] for r in rows), default=0.0)
        return {"worst_residual": worst} if worst > max(tol, 1e-6) else None
    if kind == "example3":
        by_nu = {}
        for r in rows:
            by_nu.setdefault(r["nu"], []).append(r["residual"])
        nus = sorted(by_nu, reverse=True)
        for hi, lo in zip(nus, nus[1:]):
            if abs(hi / lo - 2.0) < 1e-9:
                ratio = max(by_nu[hi]) / max(max(by_nu[lo]), 1e-300)
                if not 6.0 <= ratio <= 20.0:
                    return {"nu_ratio": ratio}
        return None
    if kind == "example4":
        rate = next((c["value"] for c in checks if c["name"] == "n_rate"), None)
        last = rows[-1]["residual"] if rows else 0.0
        if rate is not None and not (-0.7 <= rate <= -0.35):
            return {"n_rate": rate}
        if last > 0.05:
            return {"final_residual": last}
        return None
    if kind == "block-pauli":
        worst = max((r["residual"] for r in rows), default=0.0)
        return {"worst_residual": worst} if worst > 1e-3 else None
    return None


def _log_zero_coefficient(c) -> complex:
    from .asymptotics import _log_on_circle

    logv, _ = _log_on_circle(c, 1024)
    return complex(np.mean(logv))


def _wide_grid(builder: SymbolBuilder, n: int):
    if builder.n_dependent is not None:
        builder = builder.n_dependent(n)
    return builder.make_grid(-80, n + 80, 24, 128)


def cmd_bocg(cfg: RunConfig) -> dict:
    builder = _builder(cfg)
    if builder.tridiagonal is None and builder.kind not in ("toeplitz-exp",):
        raise ConfigError("bocg needs a factorizable symbol (tridiagonal family "
                          "or toeplitz-exp)")
    n_max = max(cfg.n_list)
    lo, hi = -(60 + n_max), n_max + 60 + n_max
    if builder.tridiagonal is not None:
        a = builder.make_grid(lo, hi, 24, 128)
        fl = tridiagonal_factorize(builder.tridiagonal, LEFT, lo, hi)
        fr = tridiagonal_factorize(builder.tridiagonal, RIGHT, lo, hi)
    else:
        a = builder.make_grid(lo, hi, 24, 128)
        win0 = WindowSpec(margin=12, tol=1e-12)
        fl = numeric_factorize(a, LEFT, win0)
        fr = numeric_factorize(a, RIGHT, win0)
    win = WindowSpec(margin=14, tol=1e-12)
    rows = []
    for n in sorted(cfg.n_list):
        rep = bocg_evaluate(a, n, {"left": fl, "right": fr}, win)
        rows.append({
            "n": n,
            "lhs_log_abs": rep.lhs.log_abs,
            "lhs_phase": rep.lhs.phase,
            "log_numerator_re": float(rep.log_numerator.real),
            "log_denominator_re": float(rep.log_denominator.real),
            "log_diagonal_re": float(rep.log_diagonal.real),
            "residual": rep.residual,
            "hankel_size": rep.budgets.get("hankel_size"),
        })
    report = {"rows": rows, "columns": list(rows[0].keys()) if rows else []}
    if cfg.assert_mode:
        worst = max(r["residual"] for r in rows)
        passed = worst <= cfg.tolerance
        report["assert"] = {"enabled": True, "passed": passed,
                            "tolerance": cfg.tolerance, "worst_residual": worst}
    return report


def cmd_factorize(cfg: RunConfig) -> dict:
    builder = _builder(cfg)
    span = max(cfg.n_list) + 40
    a = builder.make_grid(-span, span, 24, 128) if builder.make_grid else None
    if a is None:
        raise ConfigError("factorize needs a scalar symbol")
    win = WindowSpec.for_decay(max(a.decay_rho, 0.3), 1e-12)
    out = {}
    for side in (LEFT, RIGHT):
        pair = numeric_factorize(a, side, win)
        resid = pair.diagnostics.get("residual")
        entry = {"method": "numeric", "side": side,
                 "residual": float(resid) if resid is not None else None,
                 "margin": pair.diagnostics.get("margin"),
                 "pivot_min": pair.diagnostics.get("pivot_min"),
                 "minus": _factor_table(pair.minus),
                 "plus": _factor_table(pair.plus)}
        out[side.lower()] = entry
    return {"factorizations": out}


def _factor_table(g, max_band: int = 8, x_probe=(0.0, 0.5, 1.0)):
    tab = []
    for x in x_probe:
        if not (g.x_min <= x <= g.x_max):
            continue
        for k in range(-min(g.band, max_band), min(g.band, max_band) + 1):
            v = g.coeff(x, k)
            if abs(v) > 1e-14:
                tab.append({"x": x, "k": k, "re": float(v.real), "im": float(v.imag)})
    return tab


def cmd_weak_ratio(cfg: RunConfig) -> dict:
    builder = _builder(cfg)
    if builder.tridiagonal is None:
        raise ConfigError("weak-ratio needs a tridiagonal-family symbol")
    n_max = max(cfg.n_list)
    lo, hi = -10, n_max + 10
    a = builder.make_grid(lo, hi, 24, 128)
    fl = tridiagonal_factorize(builder.tridiagonal, LEFT, lo, hi)
    rows = []
    prev = None
    for n in range(1, n_max + 1):
        ld = logdet(build_Tn(a, n))
        if prev is not None and n in cfg.n_list:
            ratio = np.exp(ld.value - prev)
            pred = weak_ratio_prediction(fl, n)
            rows.append({"n": n, "ratio_re": float(ratio.real),
                         "ratio_im": float(ratio.imag),
                         "prediction_re": float(pred.real),
                         "deviation": float(abs(ratio / pred - 1.0))})
        prev = ld.value
    report = {"rows": rows,
              "columns": ["n", "ratio_re", "ratio_im", "prediction_re", "deviation"]}
    if cfg.assert_mode:
        tol = max(cfg.tolerance, 1e-6)
        worst = max((r["deviation"] for r in rows), default=0.0)
        passed = worst <= tol
        report["assert"] = {"enabled": True, "passed": passed, "tolerance": tol,
                            "worst_deviation": worst}
    return report


COMMANDS = {
    "logdet": cmd_logdet,
    "compare": cmd_compare,
    "bocg": cmd_bocg,
    "factorize": cmd_factorize,
    "weak-ratio": cmd_weak_ratio,
}


# ---------------------------------------------------------------------------
# report serialization


def render_report(cfg: RunConfig, body: dict) -> str:
    doc = {
        "schema": SCHEMA,
        "command": cfg.command,
        "config": {
            "symbol": cfg.symbol,
            "n": list(cfg.n_list),
            "nu": list(cfg.nu_list),
            "orders": list(cfg.orders),
            "seed": cfg.seed,
        },
    }
    doc.update(body)
    if cfg.format == "json":
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}\n")
    cols = body.get("columns") or []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in body.get("rows", []):
        writer.writerow([row.get(c) for c in cols])
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _parse_list(text, cast):
    return tuple(cast(tok) for tok in text.split(",") if tok.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="starszego",
        description="Star-Toeplitz determinants: oracles, identities, predictions.",
    )
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--symbol", default="toeplitz-exp",
                    help="catalogue name or symbol definition JSON file")
    ap.add_argument("--n", default="20", help="comma-separated matrix sizes")
    ap.add_argument("--nu", default="", help="comma-separated inhomogeneity scales")
    ap.add_argument("--orders", default="d0,d2,c0,c1",
                    help="asymptotic order toggles (subset of d0,d2,c0,c1)")
    ap.add_argument("--out", default=None, help="output path (default stdout)")
    ap.add_argument("--format", default="json", choices=("json", "csv"))
    ap.add_argument("--assert", dest="assert_mode", action="store_true",
                    help="turn tolerance targets into pass/fail gates")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None,
                    help="seed for randomized property suites")
    ap.add_argument("--tol", type=float, default=None,
                    help="override the assert tolerance (also via STARSZEGO_TOL)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command,
            symbol=args.symbol,
            n_list=_parse_list(args.n, int),
            nu_list=_parse_list(args.nu, float),
            orders=tuple(t.strip().lower() for t in args.orders.split(",") if t.strip()),
            out=args.out,
            format=args.format,
            assert_mode=args.assert_mode,
            jobs=args.jobs,
            seed=args.seed,
            tol=args.tol,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        body = COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StarSzegoError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = render_report(cfg, body)
    try:
        if cfg.out:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    gate = body.get("assert")
    if gate and gate.get("enabled") and not gate.get("passed"):
        print("tolerance breach in --assert mode", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
