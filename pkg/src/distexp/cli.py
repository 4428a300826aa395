"""
Command-line front end.

Subcommands ``exponent``, ``sweep``, ``simulate`` and ``optimize`` emit CSV
(default) or JSON.  Any value can come from a JSON scenario file given with
``--config``; explicit flags override it.  With ``--out`` the resolved
scenario is also written to ``<out>.meta.json`` and can be fed back through
``--config`` to reproduce the run.

Exit codes: 0 success, 2 usage error, 3 domain error, 4 infeasible
simulation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any

from . import __version__
from .channel import ChannelSpec, dmt_curve, dmt_eval, sd_diversity
from .errors import DomainError, InfeasibleError
from .exponents import INFINITE, compute_exponent
from .montecarlo import SimulationConfig, outage_slopes, simulate
from .optimizer import SearchSpace, optimize_finite_snr
from .staircase import (
    LayerAllocation,
    Scheme,
    bs_allocation,
    bs_objective,
    explicit_bs_allocation,
    hls_objective,
    ls_objective,
    solve_hls_staircase,
    solve_ls_staircase,
)

EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_INFEASIBLE = 4

DEFAULTS: dict[str, dict[str, Any]] = {
    "common": {"mt": 1, "mr": 1, "blocks": 1, "format": "csv"},
    "exponent": {"b": None, "scheme": "bs", "layers": "inf"},
    "sweep": {"b_range": None, "scheme": "ub,single,ls,hls,bs", "layers": "inf"},
    "simulate": {
        "b": None,
        "scheme": "single",
        "layers": "1",
        "gains": None,
        "shares": None,
        "snr_db": "10:30:5",
        "trials": 100_000,
        "seed": 0,
        "shards": 1,
        "epsilon0": 0.01,
        "is_scales": None,
        "fit_points": None,
        "tolerance": 0.1,
    },
    "optimize": {
        "b": None,
        "scheme": "ls",
        "layers": "1",
        "snr_db": None,
        "rate_grid": "0.25:12:0.25",
        "share_step": 0.1,
        "trials": 20_000,
        "seed": 0,
        "evaluator": "auto",
    },
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Numbers with 12 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (list, tuple)):
        return ";".join(fmt(v) for v in x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return format(x, ".12g")


def parse_triplet(text: str, name: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(p) for p in str(text).split(":"))
    except ValueError:
        raise UsageError(f"{name} must look like MIN:MAX:STEP, got {text!r}") from None
    if not step > 0 or hi < lo:
        raise UsageError(f"{name} needs STEP > 0 and MAX >= MIN, got {text!r}")
    return lo, hi, step


def parse_range(text: str, name: str) -> list[float]:
    """``MIN:MAX:STEP`` inclusive of MAX (within rounding)."""
    lo, hi, step = parse_triplet(text, name)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(count)]


def parse_layers(text) -> list[float]:
    out = []
    for part in str(text).split(","):
        part = part.strip().lower()
        if part == "inf":
            out.append(INFINITE)
            continue
        try:
            n = int(part)
        except ValueError:
            raise UsageError(f"layer count must be an integer or 'inf', got {part!r}") from None
        if n < 0:
            raise UsageError(f"layer count must be nonnegative, got {n}")
        out.append(n)
    return out


def parse_floats(text) -> list[float] | None:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mt", type=int, help="transmit antennas (default 1)")
    common.add_argument("--mr", type=int, help="receive antennas (default 1)")
    common.add_argument("--blocks", type=int, help="fading blocks L (default 1)")
    common.add_argument("--config", help="JSON scenario file; flags override its values")
    common.add_argument("--out", help="output path (default stdout); also writes <out>.meta.json")
    common.add_argument("--format", choices=["csv", "json"])

    parser = argparse.ArgumentParser(prog="distexp", description="Distortion exponents of layered transmission over MIMO block fading.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponent", parents=[common], help="exponent of one scheme at one bandwidth ratio")
    p.add_argument("--b", type=float, help="bandwidth ratio (channel uses per source sample)")
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--layers", help="layer count N or 'inf' (default inf)")

    p = sub.add_parser("sweep", parents=[common], help="exponents over a range of bandwidth ratios")
    p.add_argument("--b-range", dest="b_range", help="MIN:MAX:STEP; nonpositive values are skipped")
    p.add_argument("--scheme", help="comma-separated schemes (default all)")
    p.add_argument("--layers", help="comma-separated layer counts for ls/hls/bs (default inf)")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo expected distortion over an SNR grid")
    p.add_argument("--b", type=float)
    p.add_argument("--scheme", choices=["single", "ls", "hls", "bs"])
    p.add_argument("--layers", help="number of layers of the asymptotic allocation (default 1)")
    p.add_argument("--gains", help="explicit multiplexing gains r_1,...,r_n (overrides --layers)")
    p.add_argument("--shares", help="time shares t_1,...,t_n for ls/hls (default equal)")
    p.add_argument("--snr-db", dest="snr_db", help="MIN:MAX:STEP in dB")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--shards", type=int)
    p.add_argument("--epsilon0", type=float, help="BS power slack per layer (default 0.01)")
    p.add_argument("--is-scales", dest="is_scales", help="importance-sampling channel variances, comma-separated")
    p.add_argument("--fit-points", dest="fit_points", type=int, help="top grid points used in slope fits")
    p.add_argument("--tolerance", type=float, help="allowed |fitted - theory| for the verdict (default 0.1)")

    p = sub.add_parser("optimize", parents=[common], help="finite-SNR grid search for the best allocation")
    p.add_argument("--b", type=float)
    p.add_argument("--scheme", choices=["single", "ls", "hls", "bs"])
    p.add_argument("--layers", help="number of layers, at most 3 (default 1)")
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--rate-grid", dest="rate_grid", help="MIN:MAX:STEP in bits per channel use")
    p.add_argument("--share-step", dest="share_step", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--evaluator", choices=["auto", "oracle", "montecarlo"])
    p.add_argument("--emit-grid", dest="emit_grid", help="also write every evaluated candidate to this CSV")
    return parser


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, the config file and explicit flags into one scenario."""
    scenario = dict(DEFAULTS["common"])
    scenario.update(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
        if isinstance(loaded, dict) and isinstance(loaded.get("scenario"), dict):
            loaded = loaded["scenario"]
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(loaded) - set(scenario)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        scenario.update(loaded)
    for key in scenario:
        value = getattr(args, key, None)
        if value is not None:
            scenario[key] = value
    return scenario


def _spec(sc) -> ChannelSpec:
    try:
        return ChannelSpec(int(sc["mt"]), int(sc["mr"]), int(sc["blocks"]))
    except (DomainError, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _positive_b(sc) -> float:
    b = sc.get("b")
    if b is None:
        raise UsageError("--b is required")
    b = float(b)
    if not b > 0 or not math.isfinite(b):
        raise UsageError(f"--b must be positive, got {b!r}")
    return b


# ---------------------------------------------------------------- commands


def cmd_exponent(sc) -> tuple[list[str], list[list]]:
    spec = _spec(sc)
    b = _positive_b(sc)
    (layers,) = parse_layers(sc["layers"])
    result = compute_exponent(spec, sc["scheme"], b, layers)
    gains = result.allocation.gains if result.allocation is not None else None
    layer_label = "-" if Scheme(sc["scheme"]) is Scheme.UPPER_BOUND else fmt(result.layers)
    return ["b", "scheme", "layers", "exponent", "gains"], [[fmt(b), str(result.scheme), layer_label, fmt(result.exponent), fmt(gains)]]


def cmd_sweep(sc) -> tuple[list[str], list[list]]:
    spec = _spec(sc)
    if sc.get("b_range") is None:
        raise UsageError("--b-range is required")
    bs = [b for b in parse_range(sc["b_range"], "--b-range") if b > 0]
    if not bs:
        raise UsageError("--b-range contains no positive bandwidth ratio")
    try:
        schemes = [Scheme(s.strip()) for s in str(sc["scheme"]).split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not schemes:
        raise UsageError("at least one scheme is required")
    layer_list = parse_layers(sc["layers"])
    rows = []
    for b in bs:
        for scheme in schemes:
            if scheme is Scheme.UPPER_BOUND:
                plan = [("-", INFINITE)]
            elif scheme is Scheme.SINGLE:
                plan = [("1", 1)]
            else:
                plan = [(fmt(n), n) for n in layer_list]
            for label, n in plan:
                try:
                    value = fmt(compute_exponent(spec, scheme, b, n).exponent)
                except DomainError:
                    value = ""  # undefined here, e.g. HLS below 1/m_min
                rows.append([fmt(b), scheme.value, label, value])
    return ["b", "scheme", "layers", "exponent"], rows


def simulation_allocation(spec: ChannelSpec, sc) -> LayerAllocation:
    scheme = Scheme(sc["scheme"])
    b = _positive_b(sc)
    gains = parse_floats(sc.get("gains"))
    shares = parse_floats(sc.get("shares"))
    curve = dmt_curve(spec)
    if gains is not None:
        if scheme is Scheme.BS:
            return explicit_bs_allocation(spec, gains)
        if scheme is Scheme.SINGLE and len(gains) != 1:
            raise UsageError("single-layer transmission takes one gain")
        n = len(gains)
        t = tuple(shares) if shares is not None else tuple([1.0 / n] * n) if n else ()
        if len(t) != n or (n and abs(math.fsum(t) - 1.0) > 1e-9):
            raise UsageError("--shares must give one share per layer, summing to 1")
        for r in gains:
            dmt_eval(curve, r)  # range check
        if list(gains) != sorted(gains):
            raise UsageError("LS/HLS gains must be nondecreasing")
        analog = 1.0 / (b * spec.m_min) if scheme is Scheme.HLS else None
        return LayerAllocation(scheme if scheme is not Scheme.SINGLE else Scheme.LS, tuple(gains), time_shares=t, analog_share=analog)
    (n,) = parse_layers(sc["layers"])
    if n == INFINITE:
        raise UsageError("simulation needs a finite layer count")
    n = int(n)
    if scheme is Scheme.SINGLE:
        alloc, _ = solve_ls_staircase(curve, b, 1)
        return alloc
    if scheme is Scheme.LS:
        return solve_ls_staircase(curve, b, n, shares)[0]
    if scheme is Scheme.HLS:
        return solve_hls_staircase(curve, b, n, t=shares)[0]
    if n < 1:
        raise UsageError("BS needs at least one layer")
    return bs_allocation(spec, b, n)


def allocation_theory(spec: ChannelSpec, alloc: LayerAllocation, b: float) -> tuple[float, list[float], list[float]]:
    """Exponent of a fixed allocation and per-layer outage diversities.

    Returns the exponent, the diversity of losing any of layers ``1..k`` and
    the diversity of layer ``k``'s own outage.
    """
    curve = dmt_curve(spec)
    scheme = Scheme(alloc.scheme)
    gains = list(alloc.gains)
    if scheme is Scheme.BS:
        own = [sd_diversity(spec, gains[:k], gains[k]) for k in range(len(gains))]
        lost = [min(own[: k + 1]) for k in range(len(own))]
        return bs_objective(spec, b, gains), lost, own
    own = [dmt_eval(curve, r) for r in gains]
    lost = [dmt_eval(curve, max(gains[: k + 1])) for k in range(len(gains))]
    t = alloc.time_shares
    if scheme is Scheme.HLS:
        return (hls_objective(curve, b, gains, t) if gains else 1.0), lost, own
    return ls_objective(curve, b, gains, t), lost, own


def cmd_simulate(sc) -> tuple[list[str], list[list], dict]:
    spec = _spec(sc)
    b = _positive_b(sc)
    alloc = simulation_allocation(spec, sc)
    try:
        cfg = SimulationConfig(
            snr_grid_db=tuple(parse_range(sc["snr_db"], "--snr-db")),
            trials=int(sc["trials"]),
            seed=int(sc["seed"]),
            epsilon0=float(sc["epsilon0"]),
            shards=int(sc["shards"]),
            is_scales=tuple(parse_floats(sc.get("is_scales")) or ()),
            fit_points=None if sc.get("fit_points") is None else int(sc["fit_points"]),
        )
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    est = simulate(spec, alloc, b, cfg)
    n = alloc.n
    header = ["snr_db", "status", "expected_distortion", "ed_stderr"]
    header += [f"outage_{k}" for k in range(1, n + 1)] + [f"mi_outage_{k}" for k in range(1, n + 1)]
    rows = [
        [fmt(p.snr_db), p.status, fmt(p.expected_distortion), fmt(p.ed_stderr), *map(fmt, p.layer_outage_rates), *map(fmt, p.layer_mi_outage_rates)]
        for p in est.per_snr
    ]
    theory, lost_theory, own_theory = allocation_theory(spec, alloc, b)
    slopes = outage_slopes(est, cfg.fit_points)
    own_slopes = outage_slopes(est, cfg.fit_points, own=True)
    tol = float(sc["tolerance"])
    verdict = "PASS" if abs(est.fitted_exponent - theory) <= tol else "FAIL"
    summary = {
        "gains": list(alloc.gains),
        "fitted_exponent": est.fitted_exponent,
        "fit_stderr": est.fit_stderr,
        "theoretical_exponent": theory,
        "tolerance": tol,
        "verdict": verdict,
        "layer_outage_slopes": [s for s, _ in slopes],
        "layer_outage_theory": lost_theory,
        "layer_mi_outage_slopes": [s for s, _ in own_slopes],
        "layer_mi_outage_theory": own_theory,
        "feasible_points": len(est.feasible()),
    }
    return header, rows, summary


def cmd_optimize(sc, keep_grid: bool = False) -> tuple[list[str], list[list], list]:
    spec = _spec(sc)
    b = _positive_b(sc)
    if sc.get("snr_db") is None:
        raise UsageError("--snr-db is required")
    (n,) = parse_layers(sc["layers"])
    if n == INFINITE:
        raise UsageError("optimize needs a finite layer count")
    rate_grid = parse_triplet(sc["rate_grid"], "--rate-grid")
    try:
        space = SearchSpace(sc["scheme"], int(n), rate_grid, float(sc["share_step"]), float(sc["snr_db"]), b)
        space.share_units()
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    cfg = SimulationConfig((space.snr_db,), int(sc["trials"]), int(sc["seed"]))
    res = optimize_finite_snr(spec, space, cfg, evaluator=sc["evaluator"], keep_grid=keep_grid)
    header = ["scheme", "layers", "snr_db", "b", "expected_distortion", "rates", "gains", "shares", "powers", "candidates", "evaluator"]
    row = [
        space.scheme.value,
        str(space.n),
        fmt(space.snr_db),
        fmt(b),
        fmt(res.ed),
        fmt(res.rates),
        fmt(res.allocation.gains),
        fmt(res.shares),
        fmt(res.powers),
        str(res.candidates),
        res.evaluator,
    ]
    return header, [row], res.grid


# ---------------------------------------------------------------- output


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def to_json(command, scenario, header, rows, extra=None) -> str:
    doc = {"command": command, "scenario": scenario, "rows": [dict(zip(header, r)) for r in rows]}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _summary_text(s: dict) -> str:
    lines = [
        f"gains: {fmt(s['gains'])}",
        f"fitted exponent {s['fitted_exponent']:.4f} +/- {s['fit_stderr']:.4f}, theory {s['theoretical_exponent']:.4f}, "
        f"tolerance {s['tolerance']:g}: {s['verdict']}",
    ]
    per_layer = zip(s["layer_outage_slopes"], s["layer_outage_theory"], s["layer_mi_outage_slopes"], s["layer_mi_outage_theory"])
    for k, (lost, lost_th, own, own_th) in enumerate(per_layer, start=1):
        lines.append(f"layer {k}: loss slope {lost:.4f} (theory {lost_th:.4f}), own outage slope {own:.4f} (theory {own_th:.4f})")
    return "\n".join(lines) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        scenario = resolve(args)
        extra = None
        grid = None
        if args.command == "exponent":
            header, rows = cmd_exponent(scenario)
        elif args.command == "sweep":
            header, rows = cmd_sweep(scenario)
        elif args.command == "simulate":
            header, rows, extra = cmd_simulate(scenario)
            sys.stderr.write(_summary_text(extra))
        else:
            header, rows, grid = cmd_optimize(scenario, keep_grid=bool(args.emit_grid))
        if scenario["format"] == "json":
            text = to_json(args.command, scenario, header, rows, {"summary": extra} if extra else None)
        else:
            text = to_csv(header, rows)
        _write(args.out, text)
        if args.out:
            meta = {"command": args.command, "scenario": scenario}
            _write(args.out + ".meta.json", json.dumps(meta, indent=2) + "\n")
        if grid is not None and args.emit_grid:
            grid_rows = [[fmt(r), fmt(s), fmt(ed)] for r, s, ed in grid]
            _write(args.emit_grid, to_csv(["rates", "split", "expected_distortion"], grid_rows))
        if args.command == "simulate" and extra["feasible_points"] == 0:
            sys.stderr.write("error: no SNR grid point is feasible\n")
            return EXIT_INFEASIBLE
        return 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"distexp: error: {exc}\n")
        return EXIT_USAGE
    except InfeasibleError as exc:
        sys.stderr.write(f"distexp: infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    except DomainError as exc:
        sys.stderr.write(f"distexp: domain error: {exc}\n")
        return EXIT_DOMAIN


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
