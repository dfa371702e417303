"""Command-line runner.

Usage::

    harmonic-widths <experiment> --config cfg.json [--p INT] [--N INT[,INT...]]
                    [--grid INT[,INT...]] [--seed UINT] [--symbol STR] [--out PATH]

Exit status is 0 on success, 1 for an invalid configuration and 2 when a
numerical routine fails its accuracy contract.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import ect1d, elliptic2d, spectral1d, widths
from .errors import ConfigError, InputError, IoFailure, NumericalFailure
from .io import Report, Table, emit_report, load_weights, save_basis
from .symbols import Polynomial2, divide, factorization_certificate

EXPERIMENTS = ("ect", "widths1d", "eigen2d", "widths2d", "direct", "symdiv", "convergence")

REQUIRED = {
    "ect": ("grid", "out"),
    "widths1d": ("p", "N", "grid", "out"),
    "eigen2d": ("p", "grid", "out"),
    "widths2d": ("p", "N", "grid", "seed", "out"),
    "direct": ("grid", "out"),
    "symdiv": ("symbol", "divisor", "out"),
    "convergence": ("p", "grid", "target", "out"),
}

TWO_D = {"eigen2d", "widths2d", "direct", "convergence"}
TARGETS = ("mu1", "dirichlet", "direct_isotropic", "direct_ball")


@dataclass
class ExperimentConfig:
    experiment: str
    out: Path
    p: int = 1
    N: list = field(default_factory=list)
    grid: list = field(default_factory=list)
    seed: int | None = None
    symbol: str | None = None
    weights_file: Path | None = None
    extra: dict = field(default_factory=dict)

    def rng(self) -> np.random.Generator:
        if self.seed is None:
            raise ConfigError("seed", "required when randomness is used")
        return np.random.Generator(np.random.Philox(self.seed))


def _int(name: str, v, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be at least {lo}, got {v}")
    return v


def _int_list(name: str, v, lo: int | None = None) -> list:
    if isinstance(v, list):
        if not v:
            raise ConfigError(name, "empty list")
        return [_int(name, x, lo) for x in v]
    return [_int(name, v, lo)]


def validate(raw: dict, experiment: str) -> ExperimentConfig:
    """Check a raw config mapping and build an :class:`ExperimentConfig`."""
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    if "experiment" in raw and raw["experiment"] != experiment:
        raise ConfigError("experiment", f"config says {raw['experiment']!r}, command says {experiment!r}")
    for name in REQUIRED[experiment]:
        if name not in raw:
            raise ConfigError(name, "missing required field")
    if experiment == "ect" and "weights" not in raw and "weights_file" not in raw:
        raise ConfigError("weights", "ect needs weights or weights_file")
    cfg = ExperimentConfig(experiment=experiment, out=Path(str(raw["out"])))
    if "p" in raw:
        cfg.p = _int("p", raw["p"], 1)
    if "N" in raw:
        cfg.N = _int_list("N", raw["N"], 0)
    if "grid" in raw:
        cfg.grid = _int_list("grid", raw["grid"], 2)
        if experiment in TWO_D:
            for m in cfg.grid:
                if m % 2 == 0 or m < 2 * cfg.p + 3:
                    raise ConfigError("grid", f"2D grids must be odd and >= {2 * cfg.p + 3}, got {m}")
        if experiment in ("convergence", "direct") and cfg.grid != sorted(set(cfg.grid)):
            raise ConfigError("grid", "grids must be strictly increasing")
    if "seed" in raw:
        s = _int("seed", raw["seed"], 0)
        if s >= 2**64:
            raise ConfigError("seed", "must fit in 64 bits")
        cfg.seed = s
    if "symbol" in raw:
        if not isinstance(raw["symbol"], str):
            raise ConfigError("symbol", "expected polynomial text")
        try:
            Polynomial2.parse(raw["symbol"])
        except InputError as exc:
            raise ConfigError("symbol", str(exc)) from exc
        cfg.symbol = raw["symbol"]
    if raw.get("weights_file") is not None:
        cfg.weights_file = Path(str(raw["weights_file"]))
    if experiment == "symdiv":
        try:
            Polynomial2.parse(str(raw["divisor"]))
        except InputError as exc:
            raise ConfigError("divisor", str(exc)) from exc
    if experiment == "convergence" and raw["target"] not in TARGETS:
        raise ConfigError("target", f"must be one of {', '.join(TARGETS)}")
    known = {"experiment", "out", "p", "N", "grid", "seed", "symbol", "weights_file"}
    cfg.extra = {k: v for k, v in raw.items() if k not in known}
    return cfg


# -- experiments ------------------------------------------------------------


def _symbol(cfg: ExperimentConfig) -> Polynomial2:
    return Polynomial2.parse(cfg.symbol) if cfg.symbol else Polynomial2.laplacian(cfg.p)


def run_ect(cfg: ExperimentConfig) -> Report:
    n = cfg.grid[-1]
    if cfg.weights_file is not None:
        ws = load_weights(cfg.weights_file)
    else:
        w = cfg.extra["weights"]
        if not isinstance(w, list) or not w:
            raise ConfigError("weights", "expected a nonempty list of constants")
        a, b = cfg.extra.get("interval", [0.0, 1.0])
        try:
            ws = ect1d.WeightSystem.constant(ect1d.Interval(float(a), float(b)), [float(x) for x in w], n)
        except (TypeError, ValueError) as exc:
            raise ConfigError("weights", str(exc)) from exc
    basis = ect1d.build_ect(ws)
    summary: dict[str, Any] = {"N": ws.N, "n_quad": ws.n_quad, "interval": [ws.interval.a, ws.interval.b]}
    prod_err = []
    for k in range(1, ws.N + 1):
        s = ect1d.wronskian_numeric(basis.basis, k, ws.t)
        ref = basis.wronskians[k - 1, k : ws.n_quad - k]
        prod_err.append(float(np.max(np.abs(s.values - ref) / np.abs(ref))))
    summary["wronskian_product_rel_error"] = prod_err
    rec = ect1d.recover_weights(basis)
    N = ws.N
    summary["round_trip_rel_error"] = float(np.max(np.abs(rec.values / ws.values[:, N:-N] - 1)))
    polys = cfg.extra.get("polynomials")
    if polys:
        a, b = cfg.extra.get("partition_interval", [-1, 1])
        part = ect1d.piecewise_partition(polys, ect1d.Interval(Fraction(str(a)), Fraction(str(b))))
        summary["partition"] = {
            "breakpoints": [str(x) for x in part.breakpoints],
            "segment_signs": [list(s) for s in part.segment_signs],
            "ect_segments": list(part.ect_segments),
        }
    save_basis(cfg.out / "basis.csv", basis)
    return Report("ect", summary)


def run_widths1d(cfg: ExperimentConfig) -> Report:
    n = cfg.grid[-1]
    p = cfg.p
    count = max(cfg.N) + 1
    spec = spectral1d.solve_spectrum(p, n, count)
    e = widths.Ellipsoid.from_1d(p, n)
    s = np.sqrt(spec.mass)
    rows = []
    for N in cfg.N:
        w = spectral1d.kolmogorov_width(spec, N)
        S = widths.SubspaceBasis.from_fields(spec.eigenvectors[:, :N], "F_N", s) if N else \
            widths.SubspaceBasis(np.zeros((n, 0)), "F_N", s)
        rows.append([p, N, n, w.value, widths.brute_force_distance(S, e)])
    tab = Table(["p", "N", "n", "value", "oracle"], rows)
    spec_tab = Table(["j", "lambda"], [[j + 1, float(v)] for j, v in enumerate(spec.eigenvalues)])
    summary = {"p": p, "n": n, "widths": [{"N": r[1], "value": r[3], "oracle": r[4]} for r in rows]}
    return Report("widths1d", summary, {"widths1d": tab, "spectrum": spec_tab})


def _spectrum2d(cfg: ExperimentConfig, m: int, count: int | None = None):
    op = elliptic2d.assemble(_symbol(cfg), cfg.p, elliptic2d.RectGrid(m))
    count = op.n_interior if count is None else min(count, op.n_interior)
    cl = elliptic2d.clamped_spectrum(op, count)
    return op, cl


def run_eigen2d(cfg: ExperimentConfig) -> Report:
    count = int(cfg.extra.get("count", 10))
    results, rows = [], []
    for m in cfg.grid:
        op, cl = _spectrum2d(cfg, m, count)
        spec = elliptic2d.lift_eigenfunctions(op, cl, with_kernel=m <= elliptic2d.DENSE_MAX_M)
        mu = [c.mu for c in cl]
        entry = {
            "grid": m,
            "mu": mu,
            "lambda": spec.eigenvalues.tolist(),
            "kernel_dimension": m * m - op.n_interior,
        }
        if spec.kernel_basis.shape[1]:
            entry["max_kernel_overlap"] = float(np.abs(spec.inner(spec.kernel_basis, spec.psi)).max())
        results.append(entry)
        rows += [[m, j + 1, v] for j, v in enumerate(mu)]
    summary = {"p": cfg.p, "symbol": _symbol(cfg).to_text(), "results": results}
    return Report("eigen2d", summary, {"spectrum": Table(["m", "j", "lambda"], rows)})


def run_widths2d(cfg: ExperimentConfig) -> Report:
    m = cfg.grid[-1]
    if m > elliptic2d.DENSE_MAX_M:
        raise ConfigError("grid", f"widths2d needs m <= {elliptic2d.DENSE_MAX_M}")
    rng = cfg.rng()
    op = elliptic2d.assemble(_symbol(cfg), cfg.p, elliptic2d.RectGrid(m))
    spec = elliptic2d.complete_spectrum(op)
    e = widths.Ellipsoid.from_operator(op)
    reports = [widths.harmonic_width(spec, cfg.p, N, ellipsoid=e, check=False) for N in cfg.N]
    samples = int(cfg.extra.get("samples", 200))
    worst = -math.inf
    for _ in range(samples):
        f = widths.random_member(spec, rng)
        for N in cfg.N:
            S = widths.tilde_subspace(spec, N)
            worst = max(worst, widths.point_distance(S, f) - 1 / math.sqrt(spec.eigenvalues[N]))
    rows = [[r.p, r.N, r.grid, r.value, r.oracle_value, r.jackson_bound] for r in reports]
    summary = {
        "reports": [r.to_dict() for r in reports],
        "jackson_samples": samples,
        "jackson_max_excess": worst if samples else None,
    }
    return Report("widths2d", summary, {"widths2d": Table(["p", "N", "m", "value", "oracle", "bound"], rows)})


def _direct_residual(example: str, m: int) -> float:
    build = widths.ball_example if example == "ball" else widths.isotropic_example
    space, data = build(m)
    return widths.direct_solution(space, data).residual


def run_direct(cfg: ExperimentConfig) -> Report:
    example = cfg.extra.get("example", "isotropic")
    if example not in ("isotropic", "ball"):
        raise ConfigError("example", "must be 'isotropic' or 'ball'")
    res = [_direct_residual(example, m) for m in cfg.grid]
    orders = [math.nan] + elliptic2d.observed_orders(res)
    rows = [[m, r, o] for m, r, o in zip(cfg.grid, res, orders)]
    summary = {"example": example, "grids": cfg.grid, "residuals": res, "observed_orders": orders[1:]}
    return Report("direct", summary, {"direct": Table(["grid", "residual", "observed_order"], rows)})


def run_symdiv(cfg: ExperimentConfig) -> Report:
    num = Polynomial2.parse(cfg.symbol)
    den = Polynomial2.parse(str(cfg.extra["divisor"]))
    q, r = divide(num, den)
    summary: dict[str, Any] = {
        "divides": r.is_zero(),
        "quotient": q.to_text(),
        "remainder": r.to_text(),
    }
    if num.is_homogeneous() and den.is_homogeneous() and num.degree >= den.degree and not den.is_zero():
        cert = factorization_certificate(num, den)
        summary["quotient_elliptic"] = cert.quotient_elliptic
    return Report("symdiv", summary)


def convergence_value(cfg: ExperimentConfig, target: str, m: int) -> tuple[float, float | None]:
    """Value at grid ``m`` and, when known in closed form, the exact limit."""
    if target == "mu1":
        _, cl = _spectrum2d(cfg, m, 1)
        return cl[0].mu, None
    if target == "dirichlet":
        grid = elliptic2d.RectGrid(m)
        op = elliptic2d.laplacian_power(1, grid)
        f = grid.sample(lambda x, y: -2 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y))
        u = elliptic2d.solve_dirichlet(op, f, elliptic2d.BoundaryData.zeros(grid, 1))
        exact = grid.sample(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        return float(np.abs(u - exact).max()), 0.0
    example = "ball" if target == "direct_ball" else "isotropic"
    return _direct_residual(example, m), 0.0


def aitken(v0: float, v1: float, v2: float) -> float:
    """Limit estimate from three values on successively halved grids."""
    d1, d2 = v1 - v0, v2 - v1
    if d2 == d1:
        return v2
    return v2 - d2 * d2 / (d2 - d1)


def run_convergence(cfg: ExperimentConfig) -> Report:
    target = cfg.extra["target"]
    values, exact = [], None
    for m in cfg.grid:
        v, exact = convergence_value(cfg, target, m)
        values.append(v)
    if exact is None:
        if len(cfg.grid) < 2:
            raise ConfigError("grid", "need at least two grids for the extrapolated reference")
        finer = 2 * cfg.grid[-1] - 1
        v_fine, _ = convergence_value(cfg, target, finer)
        oracle = aitken(values[-2], values[-1], v_fine)
        oracle_note = f"aitken({cfg.grid[-2]}, {cfg.grid[-1]}, {finer})"
    else:
        oracle, oracle_note = exact, "exact"
    errors = [abs(v - oracle) for v in values]
    orders = [math.nan] + elliptic2d.observed_orders(errors)
    rows = [[m, v, e, o] for m, v, e, o in zip(cfg.grid, values, errors, orders)]
    summary = {
        "target": target,
        "p": cfg.p,
        "oracle": oracle,
        "oracle_source": oracle_note,
        "observed_orders": orders[1:],
    }
    tab = Table(["grid", "value", "error_vs_oracle", "observed_order"], rows)
    return Report("convergence", summary, {"convergence": tab})


RUNNERS: dict[str, Callable[[ExperimentConfig], Report]] = {
    "ect": run_ect,
    "widths1d": run_widths1d,
    "eigen2d": run_eigen2d,
    "widths2d": run_widths2d,
    "direct": run_direct,
    "symdiv": run_symdiv,
    "convergence": run_convergence,
}


def run(cfg: ExperimentConfig) -> Report:
    report = RUNNERS[cfg.experiment](cfg)
    emit_report(report, cfg.out)
    return report


def _csv_ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="harmonic-widths", description=__doc__.split("\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, type=Path, help="JSON configuration file")
    ap.add_argument("--p", type=int)
    ap.add_argument("--N", type=_csv_ints)
    ap.add_argument("--grid", type=_csv_ints)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--symbol")
    ap.add_argument("--out", type=Path)
    return ap


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    try:
        raw = json.loads(args.config.read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    for name in ("p", "seed", "symbol"):
        if getattr(args, name) is not None:
            raw[name] = getattr(args, name)
    for name in ("N", "grid"):
        v = getattr(args, name)
        if v is not None:
            raw[name] = v if len(v) > 1 else v[0]
    if args.out is not None:
        raw["out"] = str(args.out)
    return validate(raw, args.experiment)


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        run(cfg)
    except ConfigError as exc:
        print(f"error: invalid config field '{exc.field}': {exc}", file=sys.stderr)
        return 1
    except (InputError, IoFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
