"""Command-line front end.

Subcommands::

    mitiq-forge sweep --config fig2a          # CSV of bias and cost per method/order
    mitiq-forge metrics --method clm --noise re --amplitude 0.2
    mitiq-forge boundary --method clm --noise sn --target-scaling 7.389 --target-bias 1e-6
    mitiq-forge certify --method clm --noise sn
    mitiq-forge optimize-tiilm --noise sn --noise-level 0.02 --n-gates 18
    mitiq-forge plot sweep.csv --out sweep.svg

Exit codes: 0 success, 1 a sweep cell failed numerically (a ``FAILED`` row is
written), 2 invalid flags, configuration or CSV, 3 no solution or no tabulated
entry.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources

from .certification import CRITERIA, GOLDEN_METHODS, certify
from .circuit_ir import benchmark_circuit
from .errors import ConfigError, ForgeError, NoSolution, NotTabulated
from .metrics import NoClosedForm, metrics, noise_boundary, table_metrics
from .mitigation_catalog import build_plan, canonical_method, full_order, optimize_tiilm
from .noise_models import NoiseChannelSpec, NoiseKind, noise_level, ore, re, sn
from .pauli_algebra import get_context
from .simulator import simulate

log = logging.getLogger("mitiq_forge")

CSV_HEADER = ("method", "order", "m_params", "bias", "sampling_cost", "length_factor", "runtime_scaling")

SN_METHODS = ("Unmitigated", "CLM", "CSM", "IIAM", "IILM:KF", "IILM:NA", "IISM:KF", "IISM:NA", "TIILM")
RE_METHODS = (
    "Unmitigated", "CHILM", "CHISM", "CIILM", "CLM", "CSM", "IIAM", "IILM:KF", "IILM:NA", "IISM:KF", "IISM:NA", "TIILM",
)
LC_METHODS = ("Unmitigated", "LC-", "LC-CLM", "LC-CSM", "LC-IIAM", "LC-IISM", "LC-TIILM")

# methods with a single (unbiased or fixed) configuration
SINGLE = frozenset({"Unmitigated", "CLM", "CHILM", "CIILM", "IILM:NA", "TIILM", "LC-", "LC-CLM", "LC-TIILM"})


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: the benchmark circuit at fixed noise levels.

    Gate-wise amplitudes follow ``p = e_sn / (2N)`` and ``phi = e_re / N`` with
    ``N = 18 n_repeat``.
    """

    n_repeat: int = 1
    e_sn: float = 0.0
    e_re: float = 0.0
    methods: tuple = ()
    orders: object = "auto"
    max_order: int | None = None
    kf_max_order: int = 5
    precision_digits: int = 64
    sim_digits: int | None = None
    a_param: float = 1.0
    seed: int = 0
    output_path: str = ""
    workers: int = 1

    def __post_init__(self):
        if self.n_repeat < 1:
            raise ConfigError("n_repeat must be positive")
        if self.e_sn < 0 or self.e_re < 0:
            raise ConfigError("noise levels must be non-negative")
        if self.precision_digits < 15:
            raise ConfigError("precision_digits must be at least 15")
        if not 0 <= self.a_param <= 1:
            raise ConfigError("a_param must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    @property
    def n_gates(self) -> int:
        return 18 * self.n_repeat

    @property
    def noise(self) -> NoiseChannelSpec:
        n = self.n_gates
        p, phi = self.e_sn / (2 * n), self.e_re / n
        if p and phi:
            return ore(p, phi)
        if phi:
            return re(phi)
        return sn(p, self.a_param)

    @property
    def simulation_digits(self) -> int:
        return self.sim_digits or self.precision_digits

    def method_list(self) -> tuple:
        if self.methods:
            return self.methods
        if self.e_re and not self.e_sn:
            return RE_METHODS
        return SN_METHODS


_INT_KEYS = {"n_repeat", "precision_digits", "sim_digits", "seed", "max_order", "kf_max_order", "workers"}
_FLOAT_KEYS = {"e_sn", "e_re", "a_param"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` comments allowed).

    ``methods`` is a comma-separated list of catalogue names; ``orders`` is
    ``auto`` or a comma-separated list of integers. ``e_gdn`` is accepted for
    parity with the published parameter table but must be 0.

    Raises:
        ConfigError: on unknown keys, malformed values or invalid settings.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key == "e_gdn":
                if float(value) != 0:
                    raise ConfigError("global depolarising noise is not modelled; e_gdn must be 0")
            elif key == "methods":
                values[key] = tuple(canonical_method(m) for m in value.split(",") if m.strip())
            elif key == "orders":
                values[key] = "auto" if value.lower() == "auto" else tuple(int(x) for x in value.split(","))
            elif key == "output_path":
                values[key] = value
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def bundled_configs() -> list:
    """Names of the shipped figure configurations."""
    root = resources.files("mitiq_forge").joinpath("configs")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config(name_or_path: str) -> ExperimentConfig:
    """Load a config file, or a shipped one by name (``fig2a`` ...)."""
    if os.path.exists(name_or_path):
        with open(name_or_path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    res = resources.files("mitiq_forge").joinpath("configs", f"{name_or_path}.cfg")
    if res.is_file():
        return parse_config(res.read_text(encoding="utf-8"))
    raise ConfigError(f"no config file or bundled config named {name_or_path!r}")


# ---------------------------------------------------------------------------
# sweep


def sweep_orders(method: str, config: ExperimentConfig) -> list:
    """Orders swept for one method (``[None]`` for single-configuration methods)."""
    if method in SINGLE:
        return [None]
    if config.orders != "auto":
        return list(config.orders)
    spec = config.noise
    n = config.n_gates
    if method in ("IIAM", "LC-IIAM"):
        top = 5
    elif method in ("IILM:KF", "IISM:KF"):
        top = config.kf_max_order
    else:
        top = full_order(method, spec, n)
    if config.max_order is not None:
        top = min(top, config.max_order)
    if method == "CHISM":
        return list(range(2, top + 1, 2))
    return list(range(1, top + 1))


def _fmt(x) -> str:
    if x is None or x is NoClosedForm:
        return ""
    return get_context(30).mp.nstr(x, 17, min_fixed=-4, max_fixed=6)


def _cell(args) -> list:
    """Compute one CSV row; runs in worker processes."""
    method, order, config = args
    ctx = get_context(config.precision_digits)
    n = config.n_gates
    spec = config.noise
    plan = build_plan(method, spec, n, order, ctx)
    circuit = benchmark_circuit(config.n_repeat, spec)
    sim_ctx = get_context(config.simulation_digits)
    result = simulate(circuit, plan, sim_ctx)
    rep = metrics(plan, n_gates=n, proxy=False, ctx=ctx)
    m_values = plan.params.get("m_values")
    m_params = ";".join(str(m) for m in m_values) if m_values else ""
    shown_order = "" if order is None and method in SINGLE else plan.order
    for value in (rep.sampling_cost, rep.runtime_scaling, result.benchmark_bias):
        if not ctx.mp.isfinite(value):
            raise OverflowError("non-finite metric")
    return [
        method,
        str(shown_order),
        m_params,
        _fmt(result.benchmark_bias),
        _fmt(rep.sampling_cost),
        _fmt(rep.length_factor),
        _fmt(rep.runtime_scaling),
    ]


def _safe_cell(args) -> list:
    method, order, _ = args
    try:
        return _cell(args)
    except (OverflowError, ZeroDivisionError, FloatingPointError, ForgeError) as exc:
        log.warning("cell %s order %s failed: %s", method, order, exc)
        return [method, "" if order is None else str(order), "FAILED", "", "", "", ""]


def run_sweep(config: ExperimentConfig, out) -> int:
    """Write the sweep CSV to the open text stream ``out``; returns the number of failed cells.

    Rows are flushed in declared order as soon as they are available.
    """
    cells = [(m, o, config) for m in config.method_list() for o in sweep_orders(m, config)]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    failed = 0
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = pool.map(_safe_cell, cells)
            for row in rows:
                failed += row[2] == "FAILED"
                writer.writerow(row)
                out.flush()
    else:
        for cell in cells:
            row = _safe_cell(cell)
            failed += row[2] == "FAILED"
            writer.writerow(row)
            out.flush()
    return failed


# ---------------------------------------------------------------------------
# plot


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f",
            "#bcbd22", "#393b79", "#637939")


def read_sweep_csv(text: str) -> list:
    """Rows of a sweep CSV as dicts with float ``bias`` and ``runtime_scaling``.

    Raises:
        ConfigError: if the CSV is empty or its columns do not match.
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_HEADER:
        raise ConfigError("not a sweep CSV")
    rows = []
    for row in reader:
        if row["m_params"] == "FAILED":
            continue
        try:
            row["bias"] = float(row["bias"])
            row["runtime_scaling"] = float(row["runtime_scaling"])
        except ValueError as exc:
            raise ConfigError(f"malformed row {row}") from exc
        rows.append(row)
    if not rows:
        raise ConfigError("sweep CSV has no data rows")
    return rows


def render_svg(rows, title: str = "", unbiased_below: float = 1e-30) -> str:
    """Log-log scatter of runtime scaling against bias.

    Biased methods are drawn as labelled point series; methods whose bias is
    numerically zero become horizontal lines at their runtime scaling, and the
    unmitigated bias is marked by a vertical line.
    """
    width, height, margin = 760, 520, 70
    series, flat, unmitigated = {}, {}, None
    for r in rows:
        if r["method"] == "Unmitigated":
            unmitigated = r["bias"]
        elif r["bias"] <= unbiased_below:
            flat.setdefault(r["method"], r["runtime_scaling"])
        else:
            series.setdefault(r["method"], []).append((r["bias"], r["runtime_scaling"]))
    xs = [b for pts in series.values() for b, _ in pts] + ([unmitigated] if unmitigated else [])
    ys = [s for pts in series.values() for _, s in pts] + list(flat.values()) + [1.0]
    xs = [x for x in xs if x > 0] or [1e-3, 1.0]
    ys = [y for y in ys if y > 0]
    x0, x1 = math.floor(math.log10(min(xs))), math.ceil(math.log10(max(xs)))
    y0, y1 = math.floor(math.log10(min(ys))), math.ceil(math.log10(max(ys)))
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)

    def px(x):
        return margin + (math.log10(x) - x0) / (x1 - x0) * (width - 2 * margin)

    def py(y):
        return height - margin - (math.log10(y) - y0) / (y1 - y0) * (height - 2 * margin)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<g class="axes" data-xmin="1e{x0}" data-xmax="1e{x1}" data-ymin="1e{y0}" data-ymax="1e{y1}">',
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" height="{height - 2 * margin}" '
        'fill="none" stroke="black"/>',
    ]
    for k in range(x0, x1 + 1):
        out.append(f'<text x="{px(10.0**k):.1f}" y="{height - margin + 18}" text-anchor="middle">1e{k}</text>')
    for k in range(y0, y1 + 1):
        out.append(f'<text x="{margin - 8}" y="{py(10.0**k) + 4:.1f}" text-anchor="end">1e{k}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 20}" text-anchor="middle">bias</text>')
    out.append(
        f'<text x="18" y="{height / 2}" text-anchor="middle" transform="rotate(-90 18 {height / 2})">'
        "runtime scaling</text>"
    )
    if title:
        out.append(f'<text x="{width / 2}" y="30" text-anchor="middle" font-size="15">{title}</text>')
    out.append("</g>")
    names = list(series) + list(flat)
    colour = {m: _PALETTE[i % len(_PALETTE)] for i, m in enumerate(names)}
    if unmitigated:
        x = px(unmitigated)
        out.append(
            f'<line class="unmitigated" x1="{x:.1f}" y1="{margin}" x2="{x:.1f}" y2="{height - margin}" '
            'stroke="black" stroke-dasharray="6,4"/>'
        )
    for m, s in flat.items():
        y = py(s)
        out.append(
            f'<line class="unbiased" data-method="{m}" x1="{margin}" y1="{y:.1f}" x2="{width - margin}" '
            f'y2="{y:.1f}" stroke="{colour[m]}"/>'
        )
    for m, pts in series.items():
        out.append(f'<g class="series" data-method="{m}" fill="{colour[m]}">')
        for b, s in pts:
            out.append(f'<circle cx="{px(b):.1f}" cy="{py(s):.1f}" r="3.5"/>')
        out.append("</g>")
    for i, m in enumerate(names):
        y = margin + 14 + 16 * i
        out.append(f'<rect x="{width - margin + 6}" y="{y - 9}" width="10" height="10" fill="{colour[m]}"/>')
        out.append(f'<text x="{width - margin + 20}" y="{y}">{m}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# argument handling


def _noise_spec(kind: str, amplitude: float, a: float, phi: float = 0.0) -> NoiseChannelSpec:
    kind = NoiseKind.parse(kind)
    if kind == NoiseKind.SN:
        return sn(amplitude, a)
    if kind == NoiseKind.DEPHASING:
        return NoiseChannelSpec(NoiseKind.DEPHASING, p=amplitude)
    if kind == NoiseKind.RE:
        return re(amplitude)
    return ore(amplitude, phi)


def _spec_from_args(args) -> NoiseChannelSpec:
    if args.noise_level is not None:
        n = args.n_gates
        if NoiseKind.parse(args.noise) == NoiseKind.RE:
            return re(args.noise_level / n)
        return _noise_spec(args.noise, args.noise_level / (2 * n), args.a)
    return _noise_spec(args.noise, args.amplitude, args.a, args.phi)


def _emit(args, rows: list) -> None:
    """Print ``(key, value)`` rows as an aligned table or a two-column CSV."""
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        if args.format == "csv":
            w = csv.writer(out, lineterminator="\n")
            w.writerow([k for k, _ in rows])
            w.writerow([v for _, v in rows])
        else:
            width = max(len(k) for k, _ in rows)
            for k, v in rows:
                out.write(f"{k:<{width}}  {v}\n")
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_sweep(args) -> int:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.digits:
        overrides["precision_digits"] = args.digits
        overrides["sim_digits"] = args.digits
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers:
        overrides["workers"] = args.workers
    if args.max_order is not None:
        overrides["max_order"] = args.max_order
    if args.methods:
        overrides["methods"] = tuple(canonical_method(m) for m in args.methods.split(","))
    config = replace(config, **overrides)
    path = args.out or config.output_path
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            failed = run_sweep(config, fh)
    else:
        failed = run_sweep(config, sys.stdout)
    return 1 if failed else 0


def cmd_metrics(args) -> int:
    spec = _spec_from_args(args)
    ctx = get_context(args.digits) if args.digits else get_context(None)
    plan = build_plan(args.method, spec, args.n_gates, args.order, ctx)
    rep = metrics(plan, n_gates=args.n_gates, init_dominated=args.init_dominated, ctx=ctx)
    nstr = ctx.mp.nstr
    rows = [
        ("method", plan.method),
        ("order", plan.order),
        ("sampling_cost", nstr(rep.sampling_cost, 15)),
        ("length_factor", nstr(rep.length_factor, 15)),
        ("runtime_scaling", nstr(rep.runtime_scaling, 15)),
        ("noise_level", nstr(ctx.mpf(noise_level(spec, args.n_gates)), 15)),
        ("mitigated_noise_level", _fmt(rep.mitigated_noise_level) or "NoClosedForm"),
        ("mitigated_proxy_bias", _fmt(rep.mitigated_proxy_bias) or "NoClosedForm"),
    ]
    _emit(args, rows)
    return 0


def cmd_boundary(args) -> int:
    value = noise_boundary(
        args.method, args.noise, args.target_bias, args.target_scaling,
        n_gates=args.n_gates, a=args.a, concatenate=args.concatenate,
    )
    rows = [("method", canonical_method(args.method)), ("noise_boundary", repr(float(value)))]
    if args.closed_form:
        ref = table_metrics(
            args.method, args.noise, "LargeCircuit", n_gates=args.n_gates, a=args.a,
            target_scaling=args.target_scaling, target_bias=args.target_bias,
        )
        if "noise_boundary" in ref:
            rows.append(("closed_form", get_context(30).mp.nstr(ref["noise_boundary"], 15)))
    _emit(args, rows)
    return 0


def cmd_certify(args) -> int:
    if args.method.lower() == "all":
        kind = NoiseKind.parse(args.noise)
        methods = GOLDEN_METHODS.get(NoiseKind.SN if kind == NoiseKind.DEPHASING else kind, ())
    else:
        methods = (canonical_method(args.method),)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n") if args.format == "csv" else None
        if w:
            w.writerow(("method", "noise") + CRITERIA + ("label",))
        for m in methods:
            v = certify(m, args.noise)
            cells = [getattr(v, c) for c in CRITERIA]
            marks = [c.verdict.value + (" (small noise)" if c.note == "small-noise" else "") for c in cells]
            if w:
                w.writerow([m, v.noise_kind.value] + marks + [v.label])
            else:
                out.write(f"{m} [{v.noise_kind.value}]: {v.label}\n")
                for name, mark in zip(CRITERIA, marks):
                    out.write(f"  {name:<10} {mark}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_optimize_tiilm(args) -> int:
    spec = _spec_from_args(args)
    digits = args.digits or 40
    m = optimize_tiilm(spec, args.n_gates, digits)
    _emit(args, [("m_values", ";".join(str(x) for x in m))])
    return 0


def cmd_plot(args) -> int:
    with open(args.csv, encoding="utf-8") as fh:
        rows = read_sweep_csv(fh.read())
    out = args.out or os.path.splitext(args.csv)[0] + ".svg"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(render_svg(rows, args.title or os.path.basename(args.csv)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file or bundled config name (fig2a ... fig7b)")
    common.add_argument("--digits", type=int, help="decimal digits of working precision")
    common.add_argument("--seed", type=int, help="seed recorded with sweeps")
    common.add_argument("--format", choices=("csv", "table"), default="table")
    common.add_argument("--out", help="output file (default stdout)")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--noise", default="SN", help="SN, RE, ORE or Dephasing")
    noise.add_argument("--amplitude", type=float, default=0.0, help="gate-wise p (stochastic) or phi (RE)")
    noise.add_argument("--phi", type=float, default=0.0, help="rotation angle for ORE noise")
    noise.add_argument("--noise-level", type=float, help="circuit noise level e (overrides --amplitude)")
    noise.add_argument("--n-gates", type=int, default=1)
    noise.add_argument("--a", type=float, default=1.0, help="closure parameter of stochastic noise")

    parser = argparse.ArgumentParser(prog="mitiq-forge", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="bias/cost sweep on the benchmark circuit")
    p.add_argument("--methods", help="comma-separated method list (overrides the config)")
    p.add_argument("--max-order", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", parents=[common, noise], help="cost metrics of one plan")
    p.add_argument("--method", required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--init-dominated", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("boundary", parents=[common], help="noise boundary")
    p.add_argument("--method", required=True)
    p.add_argument("--noise", default="SN")
    p.add_argument("--target-scaling", type=float, required=True)
    p.add_argument("--target-bias", type=float, required=True)
    p.add_argument("--n-gates", type=int)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--concatenate", action="store_true")
    p.add_argument("--closed-form", action="store_true", help="also print the tabulated closed form")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("certify", parents=[common], help="qualitative certification")
    p.add_argument("--method", required=True, help="method name or 'all'")
    p.add_argument("--noise", default="SN")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("optimize-tiilm", parents=[common, noise], help="optimise TIILM insertion numbers")
    p.set_defaults(func=cmd_optimize_tiilm)

    p = sub.add_parser("plot", parents=[common], help="render a sweep CSV as SVG")
    p.add_argument("csv")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NoSolution, NotTabulated) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ForgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
