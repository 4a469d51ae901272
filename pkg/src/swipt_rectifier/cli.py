"""Batch front-end: ``transient``, ``ber``, ``eh`` and ``verify`` subcommands.

Exit status: 0 success, 1 invalid configuration, 2 runtime failure,
3 oracle verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .circuit import Drive
from .config import ConfigError, RunConfig, load_config
from .detection import compute_output_ranges, compute_steady_states
from .errors import RectifierError
from .experiments import ber_curve, eh_sweep, theoretical_curve
from .oracle import max_deviation, simulate_transient_oracle
from .transient import simulate_transient

log = logging.getLogger("swipt_rectifier")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3

TRANSIENT_COLUMNS = ["time_s", "v_c_V", "diode_on"]
BER_COLUMNS = ["eb_n0_dB", "ber", "ci95_halfwidth", "bit_errors", "bits_simulated",
               "ber_theory", "theory_kind"]
EH_COLUMNS = ["symbol_period_s", "block_length", "avg_power_W", "std_error_W", "blocks"]
VERIFY_COLUMNS = ["case", "max_abs_dev_V", "tolerance_V", "passed"]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else f"{float(value):.9g}"
    return str(value)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _load_label(load) -> str:
    return "open" if load in ("open", None) else f"{float(load):g}ohm"


def _plot(path: Path, series, xlabel, ylabel, logy=False):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for x, y, label in series:
        ax.plot(x, y, label=label, marker="o" if len(x) < 50 else None, ms=3)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def cmd_transient(cfg: RunConfig, out: Path, plots: bool = False) -> list:
    tr = cfg.section("transient")
    sim = cfg.section("simulation")
    drive = Drive.constant(tr["amplitude"], tr["duration"])
    written, series = [], []
    for load in tr["loads"]:
        params = cfg.circuit_for_load(load)
        traj = simulate_transient(params, drive, sim["samples_per_period"],
                                  refine=sim["refine_switching"])
        every = tr["write_every"]
        columns = list(TRANSIENT_COLUMNS)
        cols = [traj.sample_times[::every], traj.output_voltage[::every], traj.diode_state[::every]]
        if tr["oracle"]:
            spp = sim["samples_per_period"]
            ratio = max(1, int(np.ceil(200 / spp)))
            oracle = simulate_transient_oracle(params, drive, params.carrier_period / (spp * ratio))
            columns.append("v_c_oracle_V")
            cols.append(oracle.output_voltage[::ratio][:len(traj)][::every])
        path = out / f"transient_Rl_{_load_label(load)}.csv"
        write_atomic(path, csv_text(columns, zip(*cols)))
        written.append(path)
        series.append((traj.sample_times * 1e6, traj.output_voltage, f"Rl = {_load_label(load)}"))
    if plots:
        p = out / "transient.svg"
        _plot(p, series, "time [us]", "V_C [V]")
        written.append(p)
    return written


def _ber_job(args):
    cfg_raw, source, index = args
    cfg = RunConfig(cfg_raw, source)
    curve = cfg.curves[index]
    params = cfg.circuit
    c = cfg.constellation(curve.modulation)
    ber = cfg.section("ber")
    kw = cfg.table_kwargs()
    tol = cfg.section("simulation")["steady_tolerance"]
    results = ber_curve(params, c, curve.detector, curve.symbol_period, curve.window,
                        ber["block_length"], ber["eb_n0_db"], ber["target_bits"], cfg.seed,
                        steady_tol=tol, **kw)
    theory, kind = None, "none"
    if curve.detector == "ML_steady":
        refs = compute_steady_states(params, c, tol, samples_per_period=kw["samples_per_period"],
                                     refine=kw["refine"]).levels
        kind = "exact"
    elif curve.detector == "ML_bounded":
        refs = compute_output_ranges(params, c, curve.symbol_period, ber["block_length"],
                                     **kw).representatives
        kind = "upper_bound"
    if kind != "none" and len(ber["eb_n0_db"]):
        theory = theoretical_curve(c, refs, ber["eb_n0_db"])
    rows = []
    for i, r in enumerate(results):
        rows.append([r.eb_n0_db, r.ber, r.ci95_halfwidth, r.bit_errors, r.bits_simulated,
                     float("nan") if theory is None else theory[i], kind])
    return rows


def _curve_name(curve) -> str:
    return (f"ber_{curve.modulation}_{curve.detector}_Ts{curve.symbol_period * 1e6:g}us"
            f"_K{curve.window}.csv")


def _run_jobs(fn, jobs, workers):
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [_guarded(fn, j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_guarded, [fn] * len(jobs), jobs))


def _guarded(fn, job):
    try:
        return fn(job)
    except RectifierError as exc:
        return exc


def cmd_ber(cfg: RunConfig, out: Path, plots: bool = False, workers: int = 1) -> list:
    """Write one CSV per configured curve; curves that cannot run are reported and skipped."""
    jobs = [(cfg.raw, cfg.source, i) for i in range(len(cfg.curves))]
    outcomes = _run_jobs(_ber_job, jobs, workers)
    written, series, failures = [], [], []
    for curve, rows in zip(cfg.curves, outcomes):
        name = _curve_name(curve)
        if isinstance(rows, Exception):
            failures.append(f"{name}: {rows}")
            continue
        path = out / name
        write_atomic(path, csv_text(BER_COLUMNS, rows))
        written.append(path)
        if rows:
            x = [r[0] for r in rows]
            series.append((x, [max(r[1], 1e-12) for r in rows], name[4:-4]))
    for msg in failures:
        log.error("skipped %s", msg)
    if plots and series:
        p = out / "ber.svg"
        _plot(p, series, "Eb/N0 [dB]", "BER", logy=True)
        written.append(p)
    if failures and not written:
        raise RectifierError("; ".join(failures))
    return written


def cmd_eh(cfg: RunConfig, out: Path, plots: bool = False) -> list:
    eh = cfg.section("eh")
    c = cfg.constellation(eh["modulation"])
    results = eh_sweep(cfg.circuit, c, eh["symbol_periods"], eh["block_length"], eh["num_blocks"],
                       cfg.seed, **cfg.table_kwargs())
    rows = [[r.symbol_period, r.block_length, r.avg_sequence_power, r.std_error, r.sequences_averaged]
            for r in results]
    path = out / "eh.csv"
    write_atomic(path, csv_text(EH_COLUMNS, rows))
    written = [path]
    if plots:
        p = out / "eh.svg"
        _plot(p, [([r[0] * 1e6 for r in rows], [r[2] for r in rows], eh["modulation"])],
              "symbol period [us]", "average sequence power [W]")
        written.append(p)
    return written


def run_verification(cfg: RunConfig, simulate=None) -> list:
    """Closed-form transient (switch instants refined) against the RK4 oracle.

    Returns ``(case, max deviation, tolerance, passed)`` rows. ``simulate`` is
    injectable so a deliberately broken model can be checked to fail.
    """
    simulate = simulate or simulate_transient
    ver = cfg.section("verify")
    steps = ver["steps_per_period"]
    spp = 100
    ratio = int(np.ceil(steps / spp))
    cases = []
    for load in ver["loads"]:
        for amp in ver["amplitudes"]:
            cases.append((f"Rl={_load_label(load)} A={amp:g}", load,
                          Drive.constant(amp, ver["duration"])))
        seq = ver["symbol_sequence"]
        if seq:
            cases.append((f"Rl={_load_label(load)} symbols", load,
                          Drive.from_symbols(seq, ver["symbol_period"])))
    rows = []
    for name, load, drive in cases:
        params = cfg.circuit_for_load(load)
        closed = simulate(params, drive, spp, refine=True)
        oracle = simulate_transient_oracle(params, drive, params.carrier_period / (spp * ratio))
        dev = max_deviation(closed, oracle)
        tol = 1e-6 * max(drive.max_amplitude, 0.0)
        rows.append([name, dev, tol, bool(dev <= tol)])
    return rows


def cmd_verify(cfg: RunConfig, out: Path, simulate=None):
    rows = run_verification(cfg, simulate)
    path = out / "verify.csv"
    write_atomic(path, csv_text(VERIFY_COLUMNS, rows))
    for name, dev, tol, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28s} max |dV| = {dev:.3e} V (tol {tol:.1e} V)")
    return all(r[3] for r in rows), [path]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swipt-rectifier", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("transient", "rectifier output voltage over time"),
                        ("ber", "Monte Carlo bit error rate curves"),
                        ("eh", "average harvested power per symbol period"),
                        ("verify", "closed-form model against the RK4 oracle")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="TOML run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="random seed (overrides config)")
        p.add_argument("--workers", type=int, help="parallel workers, 0 = all cores")
        p.add_argument("--plots", action="store_true", help="also write SVG plots")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, {"seed": args.seed, "workers": args.workers,
                                        "output_dir": str(args.out) if args.out else None})
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = cfg.output_dir
    plots = args.plots or cfg.raw["emit_plots"]
    try:
        if args.command == "transient":
            written = cmd_transient(cfg, out, plots)
        elif args.command == "ber":
            written = cmd_ber(cfg, out, plots, cfg.raw["workers"])
        elif args.command == "eh":
            written = cmd_eh(cfg, out, plots)
        else:
            ok, written = cmd_verify(cfg, out)
            if not ok:
                print("verification FAILED", file=sys.stderr)
                return EXIT_VERIFY
    except (RectifierError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
