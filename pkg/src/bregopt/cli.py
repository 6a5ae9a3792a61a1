"""Reproducible benchmark runner.

Subcommands:

* ``run``         -- execute each configured method, one CSV trace per method.
* ``compare``     -- run all methods on the identical instance and initial
                     point, emit a combined CSV and an SVG convergence plot.
* ``order-check`` -- fit the empirical convergence rate of a named test
                     system and verify it against an expected interval.

Configurations are JSON files; every output is a deterministic function of
the configuration (seeded generators, fixed iteration order, fixed float
formatting), so reruns diff cleanly.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 order-check acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, optimizers, problems
from .bregman import BregmanParams
from .dynamics import NewtonConfig, midpoint_lagrangian, right_euler_hamiltonian
from .errors import BregoptError, ConfigError
from .manifolds import Euclidean, Sphere
from .optimizers import METHODS, RunConfig, Trace

CSV_COLUMNS = ("k", "t", "f", "grad_norm", "constraint_violation",
               "error_vs_oracle", "newton_iters")

DEFAULT_DIMS = {"rayleigh": (100,), "brockett": (20, 5), "procrustes": (20, 5, 30)}

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def build_problem(block: dict) -> problems.ProblemSpec:
    if not isinstance(block, dict) or "name" not in block:
        raise ConfigError("problem block must be an object with a 'name'")
    name = block["name"]
    if name not in DEFAULT_DIMS:
        raise ConfigError(f"unknown problem {name!r}")
    seed = int(block.get("seed", 0))
    conditioning = float(block.get("conditioning", 10.0))
    if "file" in block:
        a = problems.load_matrix(block["file"])
        try:
            if name == "rayleigh":
                return problems.rayleigh(a)
            if name == "brockett":
                m = int(block.get("m", DEFAULT_DIMS["brockett"][1]))
                return problems.brockett(a, np.arange(1.0, m + 1.0))
            b = problems.load_matrix(block["file_b"])
            return problems.procrustes(a, b)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad problem matrix input: {exc}") from exc
    dims = tuple(int(d) for d in block.get("dims", DEFAULT_DIMS[name]))
    try:
        return problems.make_instance(name, dims, seed=seed, conditioning=conditioning)
    except ValueError as exc:
        raise ConfigError(f"bad problem block: {exc}") from exc


def build_run_config(block: dict) -> RunConfig:
    if not isinstance(block, dict) or "method" not in block:
        raise ConfigError("method block must be an object with a 'method'")
    if block["method"] not in METHODS:
        raise ConfigError(f"unknown method {block['method']!r}")
    try:
        params = BregmanParams(
            p=float(block.get("p", 6.0)),
            p_ring=(float(block["p_ring"]) if "p_ring" in block else None),
            c_const=float(block.get("c_const", 1.0)),
            lambda_conv=float(block.get("lambda_conv", 1.0)),
            h=float(block.get("h", 1e-3)),
            coeff_cap=float(block.get("coeff_cap", 1e6)),
        )
        newton = NewtonConfig(
            tol=float(block.get("newton_tol", 1e-10)),
            max_iter=int(block.get("newton_max_iter", 50)),
        )
        return RunConfig(
            method=block["method"],
            params=params,
            max_iters=int(block.get("max_iters", 1000)),
            stop_grad_tol=float(block.get("stop_grad_tol", 1e-12)),
            stop_f_tol=float(block.get("stop_f_tol", 1e-12)),
            seed=int(block.get("seed", 0)),
            momentum_projection=bool(block.get("momentum_projection", False)),
            newton=newton,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad method block: {exc}") from exc


def _method_label(block: dict, index: int) -> str:
    return str(block.get("label", f"{block.get('method', 'method')}_{index}"))


# ---------------------------------------------------------------------------
# CSV / SVG output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_trace_csv(path: Path, trace: Trace, prefix: tuple = ()) -> None:
    """Write one trace; a failed run gains a trailing all-nan failure row."""
    lines = []
    for i in range(len(trace)):
        row = prefix + (
            trace.ks[i], trace.ts[i], trace.fs[i], trace.grad_norms[i],
            trace.constraint_violations[i], trace.errors_vs_oracle[i],
            trace.newton_iters[i],
        )
        lines.append(",".join(_fmt(v) for v in row))
    if trace.failed:
        next_k = (trace.ks[-1] + 1) if trace.ks else 0
        row = prefix + (next_k, math.nan, math.nan, math.nan, math.nan, None, None)
        lines.append(",".join(_fmt(v) for v in row))
    header = ("method",) * bool(prefix) + CSV_COLUMNS
    path.write_text(",".join(header) + "\n" + "\n".join(lines) + "\n", encoding="utf-8")


def _append_combined(lines: list, label: str, trace: Trace) -> None:
    for i in range(len(trace)):
        row = (
            label, trace.ks[i], trace.ts[i], trace.fs[i], trace.grad_norms[i],
            trace.constraint_violations[i], trace.errors_vs_oracle[i],
            trace.newton_iters[i],
        )
        lines.append(",".join(_fmt(v) for v in row))
    if trace.failed:
        next_k = (trace.ks[-1] + 1) if trace.ks else 0
        lines.append(",".join(_fmt(v) for v in
                              (label, next_k, math.nan, math.nan, math.nan,
                               math.nan, None, None)))


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_PLOT_FLOOR = 1e-16


def write_convergence_svg(path: Path, series, ylabel: str) -> None:
    """Hand-emitted SVG: iteration on x, log10 of the quantity on y.

    ``series`` is a list of ``(label, ks, values)`` triples; values are
    clamped below at a tiny positive floor so the log axis is total.
    """
    width, height = 720.0, 480.0
    left, right, top, bottom = 70.0, 20.0, 30.0, 50.0

    xs_max = max((max(ks) if ks else 1) for _, ks, _ in series) or 1
    logs = []
    for _, _, values in series:
        logs.extend(math.log10(max(v, _PLOT_FLOOR)) for v in values if math.isfinite(v))
    lo = math.floor(min(logs)) if logs else -1.0
    hi = math.ceil(max(logs)) if logs else 1.0
    if hi <= lo:
        hi = lo + 1.0

    def x_px(k):
        return left + (width - left - right) * (k / xs_max)

    def y_px(val):
        ly = math.log10(max(val, _PLOT_FLOOR))
        ly = min(max(ly, lo), hi)
        return top + (height - top - bottom) * (hi - ly) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<line x1="{left:.2f}" y1="{height - bottom:.2f}" x2="{width - right:.2f}" '
        f'y2="{height - bottom:.2f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{left:.2f}" y1="{top:.2f}" x2="{left:.2f}" '
        f'y2="{height - bottom:.2f}" stroke="black" stroke-width="1"/>',
    ]
    decade_step = max(1, int(math.ceil((hi - lo) / 8.0)))
    decade = lo
    while decade <= hi:
        ypix = y_px(10.0 ** decade)
        parts.append(
            f'<line x1="{left - 4:.2f}" y1="{ypix:.2f}" x2="{left:.2f}" '
            f'y2="{ypix:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8:.2f}" y="{ypix + 4:.2f}" font-size="11" '
            f'text-anchor="end">1e{int(decade)}</text>'
        )
        decade += decade_step
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        k = frac * xs_max
        xpix = x_px(k)
        parts.append(
            f'<line x1="{xpix:.2f}" y1="{height - bottom:.2f}" x2="{xpix:.2f}" '
            f'y2="{height - bottom + 4:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{xpix:.2f}" y="{height - bottom + 18:.2f}" font-size="11" '
            f'text-anchor="middle">{int(round(k))}</text>'
        )
    parts.append(
        f'<text x="{(left + width - right) / 2:.2f}" y="{height - 8:.2f}" '
        f'font-size="12" text-anchor="middle">iteration</text>'
    )
    parts.append(
        f'<text x="16" y="{(top + height - bottom) / 2:.2f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 16 '
        f'{(top + height - bottom) / 2:.2f})">{ylabel}</text>'
    )
    for idx, (label, ks, values) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(
            f"{x_px(k):.2f},{y_px(v):.2f}"
            for k, v in zip(ks, values)
            if math.isfinite(v)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{points}"/>'
        )
        ly = top + 16.0 * (idx + 1)
        lx = width - right - 150.0
        parts.append(
            f'<line x1="{lx:.2f}" y1="{ly - 4:.2f}" x2="{lx + 22:.2f}" '
            f'y2="{ly - 4:.2f}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28:.2f}" y="{ly:.2f}" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _prepare(config: dict, out_override: str | None):
    problem = build_problem(config.get("problem", {}))
    blocks = config.get("methods", [])
    if not isinstance(blocks, list) or not blocks:
        raise ConfigError("config needs a non-empty 'methods' list")
    run_configs = [build_run_config(block) for block in blocks]
    labels = [_method_label(block, i) for i, block in enumerate(blocks)]
    out_dir = Path(out_override or config.get("output_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("problem", {}).get("seed", 0))
    initial = problem.manifold.random_point(np.random.default_rng(seed))
    return problem, run_configs, labels, out_dir, initial


def cmd_run(config_path: str, out_override: str | None = None,
            no_plot: bool = False) -> int:
    """Run every method block; write one CSV per block."""
    config = _load_json(config_path)
    problem, run_configs, labels, out_dir, initial = _prepare(config, out_override)
    failed = False
    for run_config, label in zip(run_configs, labels):
        trace = optimizers.run(run_config, problem, initial)
        write_trace_csv(out_dir / f"{label}.csv", trace)
        if trace.failed:
            print(f"{label}: FAILED ({trace.failure_reason})")
            failed = True
        else:
            print(f"{label}: {len(trace) - 1} iterations, final f = {trace.fs[-1]:.6e}")
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_compare(config_path: str, out_override: str | None = None,
                no_plot: bool = False) -> int:
    """Run all method blocks on the identical instance and initial point."""
    config = _load_json(config_path)
    problem, run_configs, labels, out_dir, initial = _prepare(config, out_override)
    if len(run_configs) < 2:
        raise ConfigError("compare needs at least two method blocks")
    lines = []
    series = []
    failed = False
    has_oracle = problem.oracle_value is not None
    for run_config, label in zip(run_configs, labels):
        trace = optimizers.run(run_config, problem, initial)
        _append_combined(lines, label, trace)
        if trace.failed:
            failed = True
            print(f"{label}: FAILED ({trace.failure_reason})")
        else:
            print(f"{label}: {len(trace) - 1} iterations, final f = {trace.fs[-1]:.6e}")
        values = (
            [e for e in trace.errors_vs_oracle] if has_oracle else list(trace.fs)
        )
        pairs = [(k, v) for k, v in zip(trace.ks, values) if v is not None]
        series.append((label, [k for k, _ in pairs], [v for _, v in pairs]))
    header = ("method",) + CSV_COLUMNS
    (out_dir / "compare.csv").write_text(
        ",".join(header) + "\n" + "\n".join(lines) + "\n", encoding="utf-8"
    )
    plot_wanted = bool(config.get("plot", True)) and not no_plot
    if plot_wanted:
        ylabel = "f - oracle" if has_oracle else "f"
        write_convergence_svg(out_dir / "compare.svg", series, ylabel)
    return EXIT_NUMERICAL if failed else EXIT_OK


PENDULUM_GRAVITY = 9.81


def spherical_pendulum_lagrangian():
    """Midpoint discrete Lagrangian of a unit-mass pendulum on the sphere."""
    return midpoint_lagrangian(
        potential=lambda q: PENDULUM_GRAVITY * q[2],
        potential_grad=lambda q: np.array([0.0, 0.0, PENDULUM_GRAVITY]),
        potential_hess=lambda q: np.zeros((3, 3)),
    )


def _order_check_system(name: str):
    """Step and reference maps of the named convergence-rate test system.

    ``quadratic``: momentum-first symplectic Euler on an unconstrained
    quadratic Hamiltonian (first order).  ``spherical_pendulum``: midpoint
    constrained Euler--Lagrange map on the sphere under gravity (second
    order).  States are packed as ``concat(q, p)``.
    """
    if name == "quadratic":
        stiffness = np.array([1.0, 4.0, 9.0])
        manifold = Euclidean(3)
        hd = right_euler_hamiltonian(
            lambda q, p: 0.5 * float(p @ p) + 0.5 * float(q @ (stiffness * q)),
            lambda q, p: stiffness * q,
            lambda q, p: p,
        )

        def step(state, h):
            q, p = state[:3], state[3:]
            result = dynamics.constrained_right_hamilton_step(hd, manifold, q, p, h)
            return np.concatenate([result.q_next, result.p_next])

        initial = np.array([1.0, -0.5, 0.25, 0.0, 0.3, -0.2])
        return step, step, initial

    if name == "spherical_pendulum":
        manifold = Sphere(3)
        lagrangian = spherical_pendulum_lagrangian()

        # The raw two-point momentum carries an O(h) constraint-normal
        # component; projecting it onto the cotangent space leaves the
        # position recursion unchanged and restores second-order momenta.
        def step(state, h):
            q, p = state[:3], state[3:]
            result = dynamics.constrained_lagrangian_map(lagrangian, manifold, q, p, h)
            p_next = dynamics.project_momentum(manifold, result.q_next, result.p_next)
            return np.concatenate([result.q_next, p_next])

        q0 = np.array([0.6, 0.0, 0.8])
        p0 = np.array([0.0, 1.2, 0.0])
        return step, step, np.concatenate([q0, p0])

    raise ConfigError(f"unknown order-check system {name!r}")


def cmd_order_check(config_path: str, out_override: str | None = None,
                    no_plot: bool = False) -> int:
    """Fit an empirical convergence rate and gate it against an interval."""
    config = _load_json(config_path)
    name = config.get("system")
    if name is None:
        raise ConfigError("order-check config needs a 'system'")
    h_list = config.get("h_list")
    if not isinstance(h_list, list) or len(h_list) < 3:
        raise ConfigError("order-check config needs an 'h_list' of >= 3 step sizes")
    duration = float(config.get("duration", 1.0))
    interval = config.get("expected_rate")
    if (not isinstance(interval, list)) or len(interval) != 2:
        raise ConfigError("order-check config needs 'expected_rate': [lo, hi]")
    lo, hi = float(interval[0]), float(interval[1])
    out_dir = Path(out_override or config.get("output_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    step, reference, initial = _order_check_system(name)
    result = dynamics.order_check(step, reference, initial, h_list, duration)

    rows = ["h,error"]
    rows += [f"{_fmt(h)},{_fmt(e)}" for h, e in zip(result.step_sizes, result.errors)]
    rows.append(f"fitted_rate,{_fmt(result.rate)}")
    (out_dir / "order_check.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    ok = (not result.at_noise_floor) and lo <= result.rate <= hi
    status = "pass" if ok else "fail"
    print(f"{name}: fitted rate {result.rate:.4f}, expected [{lo}, {hi}] -> {status}")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bregopt",
        description="Benchmark runner for constrained variational optimizers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "order-check"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to a JSON config")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument("--no-plot", action="store_true", help="skip SVG output")
    args = parser.parse_args(argv)
    handler = {
        "run": cmd_run,
        "compare": cmd_compare,
        "order-check": cmd_order_check,
    }[args.command]
    try:
        return handler(args.config, args.out, args.no_plot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BregoptError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
