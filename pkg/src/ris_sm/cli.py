"""Command-line front end.

    ris-sm simulate --L 100 --nt 2 --M 2 --snr 0:2:30 --trials 1e5 --detectors ml,gd --plot
    ris-sm analyze  --L 80 --nt 2 --M 1 --snr -45:2.5:-20
    ris-sm capacity --L 100 --snr -50:2:10
    ris-sm complexity --L 100 --nt 2 --M 2
    ris-sm power-profile --L 100 --nt 4 --aligned-antenna 0
    ris-sm figure --name fig7 --trials 1e5
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ris_sm import analysis
from ris_sm.constellation import build_constellation
from ris_sm.output import BoundPoint, CapacityPoint, FlopRecord, PowerPoint, emit_plot, write_csv
from ris_sm.simulator import SweepConfig, ec_monte_carlo, received_power_profile, run_ber_sweep

OUT_ENV = "RIS_SM_OUT"
COMMANDS = ("simulate", "analyze", "capacity", "complexity", "power-profile", "figure")

DEFAULTS = dict(
    L=100,
    nt=2,
    M=2,
    mod="psk",
    snr=None,  # command specific, see _default_snr
    trials=100_000,
    seed=0,
    detectors=("ml",),
    phase="aligned",
    k=None,
    receiver=None,  # nominal, except capacity which defaults to effective
    block_size=2000,
    workers=1,
    adaptive=False,
    Q=analysis.DEFAULT_Q,
    exclusion="joint",
    method="closed-form",
    aligned_antenna=0,
    name=None,
    stem=None,
    plot=False,
    out=None,
)

# figure presets: name -> (description, snr grid, list of (label, command, overrides))
FIGURES: dict[str, tuple[str, str | None, list[tuple[str, str, dict]]]] = {
    "fig3": (
        "received power per antenna, antenna 0 co-phased; L=100, nt in {2,4,8}",
        None,
        [(f"nt={n}", "power-profile", dict(L=100, nt=n, aligned_antenna=0, trials=10_000)) for n in (2, 4, 8)],
    ),
    "fig4": (
        "ML / TSML / GD BER; nt=2, M=2, L=100, nominal receiver",
        "0:2:36",
        [("", "simulate", dict(L=100, nt=2, M=2, detectors=("ml", "tsml", "gd"), receiver="nominal"))],
    ),
    "fig5": (
        "union bound and ML BER for BPSK, 4-QAM, 16-QAM; nt=2, L=100, effective receiver",
        "-40:2:0",
        [
            (tag, cmd, dict(L=100, nt=2, M=m, mod=mod, receiver="effective"))
            for m, mod, tag in ((2, "psk", "M=2"), (4, "qam", "4QAM"), (16, "qam", "16QAM"))
            for cmd in ("analyze", "simulate")
        ],
    ),
    "fig6": (
        "union bound and ML BER for nt in {4,8,16}; M=2, L=100, effective receiver",
        "-40:2:-10",
        [(f"nt={n}", cmd, dict(L=100, nt=n, M=2, receiver="effective")) for n in (4, 8, 16) for cmd in ("analyze", "simulate")],
    ),
    "fig7": (
        "CLT check: union bound vs ML BER; nt=2, M=1, L in {10,20,40,80,160}, effective receiver",
        "-45:2.5:10",
        [(f"L={L}", cmd, dict(L=L, nt=2, M=1, receiver="effective")) for L in (10, 20, 40, 80, 160) for cmd in ("analyze", "simulate")],
    ),
    "fig8": (
        "ML BER under RIS phase errors U[-pi/k, pi/k]; nt=2, M=2, L=100, nominal receiver",
        "0:2:36",
        [
            ("aligned", "simulate", dict(L=100, nt=2, M=2, phase="aligned", receiver="nominal")),
            ("k=8", "simulate", dict(L=100, nt=2, M=2, phase="perturbed", k=8.0, receiver="nominal")),
            ("k=4", "simulate", dict(L=100, nt=2, M=2, phase="perturbed", k=4.0, receiver="nominal")),
            ("k=2", "simulate", dict(L=100, nt=2, M=2, phase="perturbed", k=2.0, receiver="nominal")),
            ("random", "simulate", dict(L=100, nt=2, M=2, phase="random", receiver="nominal")),
        ],
    ),
    "fig9": (
        "closed-form ergodic capacity; nt=2, M=2, L in {80,100,120}",
        "-50:1:0",
        [(f"L={L}", "capacity", dict(L=L, nt=2, M=2)) for L in (80, 100, 120)],
    ),
    "fig10": (
        "closed-form ergodic capacity; L=100, (nt, M) in {(2,2), (4,2), (2,4)}",
        "-50:2:10",
        [(f"nt={n},M={m}", "capacity", dict(L=100, nt=n, M=m)) for n, m in ((2, 2), (4, 2), (2, 4))],
    ),
}


class CliError(Exception):
    pass


@dataclass
class ExperimentSpec:
    command: str
    params: dict
    out_dir: Path
    plot: bool
    sources: dict = field(default_factory=dict)  # key -> "flag" | "config" | "default"


# --- argument types ------------------------------------------------------------


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """``start:step:stop`` (inclusive), a comma list, or a single value; ``inf`` means noiseless."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if not all(map(math.isfinite, (start, step, stop))) or step == 0 or (stop - start) / step < 0:
            raise ValueError(f"empty or non-finite range {text!r}")
        n = math.floor((stop - start) / step + 1e-9) + 1
        # round away accumulated float noise such as 0.30000000000000004
        return tuple(float(round(start + i * step, 10)) for i in range(n))
    values = tuple(float(v) for v in text.split(",") if v.strip())
    if not values or any(math.isnan(v) for v in values):
        raise ValueError(f"bad SNR list {text!r}")
    return values


def parse_count(text: str) -> int:
    v = float(text)
    if not math.isfinite(v) or v != int(v) or v < 1:
        raise ValueError(f"expected a positive integer, got {text!r}")
    return int(v)


def parse_detectors(text) -> tuple[str, ...]:
    if isinstance(text, tuple):
        return text
    names = tuple(d.strip().lower() for d in text.split(",") if d.strip())
    bad = [d for d in names if d not in ("ml", "tsml", "gd")]
    if bad or not names:
        raise ValueError(f"unknown detector(s) {bad or text!r}; choose from ml, tsml, gd")
    return names


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _typed(fn, name):
    def conv(text):
        try:
            return fn(text)
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from None

    conv.__name__ = name
    return conv


CONVERTERS = dict(
    L=int, nt=int, M=int, mod=str.lower, snr=parse_snr_grid, trials=parse_count, seed=int, detectors=parse_detectors,
    phase=str.lower, k=float, receiver=str.lower, block_size=parse_count, workers=parse_count, adaptive=parse_bool,
    Q=parse_count, exclusion=str.lower, method=str.lower, aligned_antenna=int, name=str.lower, stem=str, plot=parse_bool,
    out=str,
)


def build_parser() -> argparse.ArgumentParser:
    figure_table = "\n".join(f"  {name:6s} {desc}" + (f" (snr {grid})" if grid else "") for name, (desc, grid, _) in FIGURES.items())
    parser = argparse.ArgumentParser(
        prog="ris-sm",
        description="Monte Carlo and closed-form analysis of RIS-assisted spatial modulation.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            f"Figure presets (figure --name ...):\n{figure_table}\n\n"
            f"Outputs go to --out, else ${OUT_ENV}, else ./results.\n"
            "Config files hold one 'key = value' per line ('#' starts a comment); "
            "keys are the long flag names, and flags given on the command line win."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = dict(
        simulate="Monte Carlo BER sweep",
        analyze="closed-form ABEP union bound",
        capacity="ergodic capacity (closed form or Monte Carlo)",
        complexity="real multiplications and additions per detected symbol",
        **{"power-profile": "mean received power per antenna with the RIS co-phased for one of them"},
        figure="regenerate a figure preset",
    )
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=helps[cmd], description=helps[cmd], formatter_class=argparse.RawDescriptionHelpFormatter,
                           epilog=parser.epilog)
        a = p.add_argument
        a("--config", metavar="PATH", help="key = value file; command-line flags override it")
        a("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./results)")
        a("--stem", help="output file stem (default: the command or figure name)")
        a("--plot", action="store_true", default=None, help="also write an SVG plot")
        a("--L", type=_typed(int, "int"), help="RIS elements (default 100)")
        a("--nt", type=_typed(int, "int"), help="transmit antennas, power of two (default 2)")
        a("--M", type=_typed(int, "int"), help="constellation order, power of two (default 2)")
        a("--mod", choices=("psk", "qam"), type=str.lower, help="constellation family (default psk)")
        a("--snr", type=_typed(parse_snr_grid, "grid"), metavar="GRID",
          help="P_t/N0 in dB: start:step:stop (inclusive), comma list, or inf")
        a("--trials", type=_typed(parse_count, "count"), help="trials per SNR point, e.g. 1e6 (default 1e5)")
        a("--seed", type=_typed(int, "int"), help="master seed (default 0)")
        a("--detectors", type=_typed(parse_detectors, "list"), help="comma list of ml, tsml, gd (default ml)")
        a("--phase", choices=("aligned", "random", "perturbed"), type=str.lower, help="RIS phase mode (default aligned)")
        a("--k", type=_typed(float, "float"), help="phase error U[-pi/k, pi/k]; requires --phase perturbed")
        a("--receiver", choices=("nominal", "effective"), type=str.lower,
          help="detector gains: nominal sum(alpha*beta) or effective through the deployed RIS "
               "(default nominal; effective for capacity)")
        a("--block-size", dest="block_size", type=_typed(parse_count, "count"), help="trials per work unit (default 2000)")
        a("--workers", type=_typed(parse_count, "count"), help="worker processes (default 1)")
        a("--adaptive", action="store_true", default=None, help="stop a point after 1000 bit errors")
        a("--Q", type=_typed(parse_count, "count"), help=f"quadrature nodes (default {analysis.DEFAULT_Q})")
        a("--exclusion", choices=("joint", "both"), type=str.lower, help="capacity pair set (default joint)")
        a("--method", choices=("closed-form", "monte-carlo"), type=str.lower, help="capacity method (default closed-form)")
        a("--aligned-antenna", dest="aligned_antenna", type=_typed(int, "int"), help="co-phased antenna (default 0)")
        a("--name", choices=tuple(FIGURES), type=str.lower, help="figure preset")
    return parser


def read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise CliError(f"config: cannot read {path}: {e.strerror}") from None
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"config {path}:{no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise CliError(f"config {path}:{no}: unknown key {key!r}")
        if not value:
            raise CliError(f"config {path}:{no}: key {key!r} has no value")
        try:
            out[key] = CONVERTERS[key](value)
        except ValueError as e:
            raise CliError(f"config {path}:{no}: bad value for {key!r}: {e}") from None
    return out


def _default_snr(command: str) -> tuple[float, ...]:
    if command == "capacity":
        return parse_snr_grid("-50:2:10")
    if command == "analyze":
        return parse_snr_grid("-40:2:0")
    return parse_snr_grid("0:2:30")


def _merge(ns: argparse.Namespace) -> tuple[dict, dict]:
    file_vals = read_config(ns.config) if ns.config else {}
    params, sources = {}, {}
    for key, default in DEFAULTS.items():
        flag = getattr(ns, key, None)
        if flag is not None:
            params[key], sources[key] = flag, "flag"
        elif key in file_vals:
            params[key], sources[key] = file_vals[key], "config"
        else:
            params[key], sources[key] = default, "default"
    if params["snr"] is None:
        params["snr"] = _default_snr(ns.command)
    if params["receiver"] is None:
        params["receiver"] = "effective" if ns.command == "capacity" else "nominal"
    for key, choices in (("mod", ("psk", "qam")), ("phase", ("aligned", "random", "perturbed")),
                         ("receiver", ("nominal", "effective")), ("exclusion", ("joint", "both")),
                         ("method", ("closed-form", "monte-carlo"))):
        if params[key] not in choices:
            raise CliError(f"{key}: must be one of {', '.join(choices)}, got {params[key]!r}")
    if params["name"] is not None and params["name"] not in FIGURES:
        raise CliError(f"name: unknown figure {params['name']!r}; choose from {', '.join(FIGURES)}")
    return params, sources


def sweep_config(params: dict) -> SweepConfig:
    """Translate CLI parameters into a validated SweepConfig, naming the offending key on error."""
    p = params
    if p["phase"] == "perturbed" and p["k"] is None:
        raise CliError("k: --phase perturbed needs --k")
    if p["phase"] != "perturbed" and p["k"] is not None:
        raise CliError(f"k: only meaningful with --phase perturbed (phase is {p['phase']!r})")
    for key in ("L", "nt"):
        if p[key] < 1:
            raise CliError(f"{key}: must be >= 1, got {p[key]}")
    if p["nt"] & (p["nt"] - 1):
        raise CliError(f"nt: number of transmit antennas must be a power of two, got {p['nt']}")
    try:
        build_constellation(p["M"], p["mod"])
    except ValueError as e:
        raise CliError(f"M: {e}") from None
    try:
        return SweepConfig(
            L=p["L"], n_tx=p["nt"], M=p["M"], kind=p["mod"], detectors=p["detectors"], snr_grid_db=p["snr"],
            trials_per_point=p["trials"], master_seed=p["seed"], phase_mode=p["phase"], perturb_k=p["k"],
            block_size=p["block_size"], receiver=p["receiver"], adaptive=p["adaptive"],
        )
    except ValueError as e:
        raise CliError(str(e)) from None


def _check(command: str, params: dict, sources: dict):
    if command == "figure":
        if params["name"] is None:
            raise CliError("name: figure needs --name (one of " + ", ".join(FIGURES) + ")")
        return
    if params["name"] is not None and sources["name"] == "flag":
        raise CliError(f"name: --name only applies to the figure command, not {command!r}")
    cfg = sweep_config(params)
    if command == "power-profile" and not 0 <= params["aligned_antenna"] < cfg.n_tx:
        raise CliError(f"aligned_antenna: must be in [0, {cfg.n_tx - 1}], got {params['aligned_antenna']}")
    if command == "capacity" and params["method"] == "monte-carlo" and cfg.trials_per_point < 10_000:
        raise CliError("trials: Monte Carlo capacity needs at least 1e4 trials")
    if command in ("analyze", "capacity") and params["method"] == "closed-form" and params["phase"] != "aligned":
        raise CliError("phase: the closed-form analysis assumes co-phased RIS elements")


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-40:2:0" as an option string; bind it to the preceding --snr
    out = []
    for tok in argv:
        if out and out[-1] == "--snr" and tok.startswith("-") and tok[1:2].isdigit():
            out[-1] = f"--snr={tok}"
        else:
            out.append(tok)
    return out


def parse_args(argv=None) -> ExperimentSpec:
    parser = build_parser()
    ns = parser.parse_args(_glue_negative_values(list(sys.argv[1:] if argv is None else argv)))
    try:
        params, sources = _merge(ns)
        _check(ns.command, params, sources)
        out = Path(params["out"] or os.environ.get(OUT_ENV) or "results")
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise CliError(f"out: directory {out} is not writable")
    except (CliError, OSError) as e:
        parser.error(str(e))
    return ExperimentSpec(ns.command, params, out, bool(params["plot"]) or ns.command == "figure", sources)


# --- commands --------------------------------------------------------------------


def _run_one(command: str, params: dict):
    """Returns (records, series, plot kind) for a single command."""
    cfg = sweep_config(params)
    grid = np.array(cfg.snr_grid_db)
    if command == "simulate":
        recs = run_ber_sweep(cfg, workers=params["workers"])
        series = {}
        for r in recs:
            xs, ys = series.setdefault(r.detector, ([], []))
            xs.append(r.snr_db)
            ys.append(r.ber)
        return recs, series, "ber"
    if command == "analyze":
        c = cfg.constellation
        bound = analysis.abep_union_bound(10 ** (grid / 10), cfg.L, cfg.n_tx, c, analysis.gcq_nodes(params["Q"]))
        recs = [BoundPoint(float(s), float(b)) for s, b in zip(grid, np.atleast_1d(bound))]
        return recs, {"bound": (list(grid), list(np.atleast_1d(bound)))}, "ber"
    if command == "capacity":
        if params["method"] == "monte-carlo":
            pts = ec_monte_carlo(cfg)
        else:
            ec = analysis.ergodic_capacity(10 ** (grid / 10), cfg.L, cfg.n_tx, cfg.constellation, params["exclusion"])
            pts = list(zip(grid.tolist(), np.atleast_1d(ec).tolist()))
        recs = [CapacityPoint(float(s), float(e)) for s, e in pts]
        return recs, {"EC": ([r.snr_db for r in recs], [r.ec_bpcu for r in recs])}, "ec"
    if command == "complexity":
        recs = [FlopRecord(d, cfg.L, cfg.n_tx, cfg.M, *analysis.detector_flops(d, cfg.L, cfg.n_tx, cfg.M))
                for d in cfg.detectors]
        return recs, {}, None
    if command == "power-profile":
        prof = received_power_profile(cfg, params["aligned_antenna"])
        recs = [PowerPoint(n, p) for n, p in prof]
        return recs, {"power": ([n for n, _ in prof], [p for _, p in prof])}, "power"
    raise CliError(f"unknown command {command!r}")


PLOT_STYLE = dict(
    ber=dict(log_y=True, ylabel="BER", xlabel="SNR (dB)"),
    ec=dict(log_y=False, ylabel="ergodic capacity (bpcu)", xlabel="SNR (dB)"),
    power=dict(log_y=False, ylabel="mean received power", xlabel="transmit antenna index"),
)


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in label).strip("_")


def run(spec: ExperimentSpec) -> list[Path]:
    """Execute a parsed experiment; returns the files written.

    All computation finishes before anything is written, so a failure never
    leaves a partial set of outputs behind.
    """
    p = spec.params
    if spec.command != "figure":
        recs, series, kind = _run_one(spec.command, p)
        stem = p["stem"] or spec.command
        pending = [(spec.out_dir / f"{stem}.csv", recs)]
        plots = [(spec.out_dir / f"{stem}.svg", series, kind, spec.command)] if spec.plot and kind else []
    else:
        desc, grid, jobs = FIGURES[p["name"]]
        stem = p["stem"] or p["name"]
        pending, combined, kind = [], {}, None
        for label, cmd, overrides in jobs:
            q = dict(p, **overrides)
            if grid is not None and spec.sources.get("snr") != "flag":
                q["snr"] = parse_snr_grid(grid)
            if spec.sources.get("trials") == "flag":
                q["trials"] = p["trials"]
            recs, series, kind = _run_one(cmd, q)
            tag = "_".join(filter(None, (_slug(label), {"simulate": "sim", "analyze": "bound"}.get(cmd))))
            pending.append((spec.out_dir / f"{stem}_{tag or cmd}.csv", recs))
            for s_label, xy in series.items():
                name = " ".join(filter(None, (label, s_label if cmd == "simulate" else ("bound" if cmd == "analyze" else ""))))
                combined[name or s_label] = xy
        plots = [(spec.out_dir / f"{stem}.svg", combined, kind, desc)]
    written = [write_csv(recs, path) for path, recs in pending]
    for path, series, kind, title in plots:
        written.append(emit_plot(series, path, title=title, **PLOT_STYLE[kind]))
    return written


def main(argv=None) -> int:
    spec = parse_args(argv)
    try:
        for path in run(spec):
            print(path)
    except (CliError, ValueError, TypeError, OSError) as e:
        print(f"ris-sm: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
