"""Command-line driver: ``chhs run|resume|analyze|conditions``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
from pathlib import Path

from . import diagnostics as dg
from .config import RunConfig, load_config, serialize_config
from .errors import BlowUpError, ConfigError, DissipationFailure, NonFiniteError, StructureError
from .initial import generate_ic
from .integrator import State, Trajectory, run
from .model import ModelParams
from .plots import write_gnuplot_script, write_pgm
from .snapshot import Snapshot, save_state

log = logging.getLogger("chhs")

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_IO = 4

CSV_COLUMNS = dg.DiagnosticsRecord.columns() + ["dt"]
FIT_COLUMNS = ["quantity", "rate", "intercept", "r_squared", "t_start", "t_end", "n_samples", "source"]


def _fmt(value) -> str:
    return repr(float(value))


class RunWriter:
    """Checkpoint hook: appends CSV rows, writes snapshots and images."""

    def __init__(self, outdir: Path, cfg: RunConfig, first_step: int, first_is_record: bool):
        self.outdir = outdir
        self.cfg = cfg
        self.snapdir = outdir / "snapshots"
        self.snapdir.mkdir(parents=True, exist_ok=True)
        self.csv_path = outdir / "diagnostics.csv"
        self.written = 0
        # step index of records[0]
        self.first_step = first_step if first_is_record else first_step + 1
        self.saved_times: set[float] = set()

    def _rows(self, traj: Trajectory):
        every = self.cfg.output.csv_every
        for i in range(self.written, len(traj.records)):
            step = self.first_step + i
            if step % every == 0:
                rec = traj.records[i]
                yield [_fmt(getattr(rec, c)) for c in dg.DiagnosticsRecord.columns()] + [_fmt(traj.dts[i])]
        self.written = len(traj.records)

    def __call__(self, state: State, traj: Trajectory):
        rows = list(self._rows(traj))
        if rows:
            with self.csv_path.open("a", newline="") as fh:
                csv.writer(fh).writerows(rows)
                fh.flush()
        save_state(self.snapdir / f"step_{traj.step_index:08d}.snap", state,
                   traj.step_index, traj.dt_next, traj.streak)
        for target, snap_state in traj.snapshots.items():
            if target in self.saved_times:
                continue
            self.saved_times.add(target)
            save_state(self.snapdir / f"t_{target:.6g}.snap", snap_state)
            if self.cfg.output.emit_plots:
                write_pgm(self.outdir / f"phi_t_{target:.6g}.pgm", snap_state.phi)
        if self.cfg.output.emit_plots:
            write_pgm(self.outdir / "phi_latest.pgm", state.phi)


def _start_csv(path: Path, truncate_after: float | None = None) -> bool:
    """Create the CSV with its header, or trim rows beyond ``truncate_after``.

    Returns True when the file was (re)created empty.
    """
    if truncate_after is None or not path.exists():
        with path.open("w", newline="") as fh:
            csv.writer(fh).writerow(CSV_COLUMNS)
        return True
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_COLUMNS:
        raise StructureError(f"{path}: unexpected CSV header")
    kept = [r for r in rows[1:] if float(r[0]) <= truncate_after]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        w.writerows(kept)
    return False


def _integrate(cfg: RunConfig, outdir: Path, state: State, *, record_initial: bool,
               streak: int = 0, step_index: int = 0) -> Trajectory:
    writer = RunWriter(outdir, cfg, step_index, record_initial)
    params = cfg.model_params()
    try:
        traj = run(state, cfg.integrator, params, hooks=[writer],
                   snapshot_times=cfg.output.snapshot_times, record_initial=record_initial,
                   streak=streak, step_index=step_index)
    except (BlowUpError, DissipationFailure) as exc:
        dump = getattr(exc, "state", None)
        if dump is not None:
            save_state(outdir / "failure.snap", dump)
        raise
    save_state(writer.snapdir / "final.snap", traj.final_state, traj.step_index, traj.dt_next, traj.streak)
    if cfg.output.emit_plots:
        write_gnuplot_script(outdir)
    return traj


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    outdir = Path(args.output or cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(serialize_config(cfg))
    state = generate_ic(cfg)
    _start_csv(outdir / "diagnostics.csv")
    traj = _integrate(cfg, outdir, state, record_initial=True)
    log.info("finished at t=%.6g after %d steps (%d rejected)", traj.final_state.time,
             traj.accepted, traj.rejected)
    return EXIT_OK


def cmd_resume(args) -> int:
    cfg = load_config(args.config)
    snap = Snapshot.load(args.snapshot)
    if not snap.domain.same_as(cfg.build_domain()):
        raise ConfigError("snapshot domain differs from the configured domain", key="domain")
    outdir = Path(args.output or cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    if not (outdir / "config.txt").exists():
        (outdir / "config.txt").write_text(serialize_config(cfg))
    fresh = _start_csv(outdir / "diagnostics.csv", truncate_after=snap.time)
    if snap.dt > 0:
        cfg.integrator = dataclasses.replace(
            cfg.integrator, dt=min(max(snap.dt, cfg.integrator.dt_min), cfg.integrator.dt_max))
    state = State(snap.field(), snap.time)
    _integrate(cfg, outdir, state, record_initial=fresh, streak=snap.streak, step_index=snap.step)
    return EXIT_OK


def _read_csv_columns(path: Path) -> dict[str, list[float]]:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    return {name: [float(r[i]) for r in data] for i, name in enumerate(header)}


def _parse_window(text: str | None):
    if not text:
        return None
    a, sep, b = text.partition(":")
    if not sep:
        raise ConfigError("fit window must look like t0:t1", key="--fit-window")
    try:
        return float(a) if a else -math.inf, float(b) if b else math.inf
    except ValueError:
        raise ConfigError("fit window must look like t0:t1", key="--fit-window") from None


def cmd_analyze(args) -> int:
    outdir = Path(args.dir)
    window = _parse_window(args.fit_window)
    cfg_path = outdir / "config.txt"
    params = load_config(cfg_path).model_params() if cfg_path.exists() else None

    by_time: dict[float, Snapshot] = {}
    for path in sorted((outdir / "snapshots").glob("*.snap")):
        snap = Snapshot.load(path)
        by_time.setdefault(snap.time, snap)
    records = []
    for t in sorted(by_time):
        snap = by_time[t]
        p = params or ModelParams(epsilon=snap.domain.epsilon, gamma=snap.domain.gamma)
        records.append(dg.record(State(snap.field(), snap.time), p))
    if records:
        with (outdir / "snapshot_diagnostics.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(dg.DiagnosticsRecord.columns())
            for rec in records:
                w.writerow([_fmt(getattr(rec, c)) for c in dg.DiagnosticsRecord.columns()])

    # snapshots are exact but sparse; fall back to the per-step CSV when they
    # do not give enough samples in the window
    sources = []
    if records:
        sources.append(("snapshots", dg.records_to_columns(records)))
    csv_path = outdir / "diagnostics.csv"
    if csv_path.exists():
        sources.append(("diagnostics.csv", _read_csv_columns(csv_path)))
    if not sources:
        raise StructureError(f"{outdir}: no snapshots and no diagnostics.csv")

    fits_path = outdir / "fits.csv"
    new_file = not fits_path.exists()
    n_ok = 0
    with fits_path.open("a", newline="") as fh:
        w = csv.writer(fh)
        if new_file:
            w.writerow(FIT_COLUMNS)
        for name, column in (("h1_dist_sq", "h1_dist"), ("h2_dist_sq", "h2_dist")):
            fit, error = None, None
            for source, cols in sources:
                values = [v * v for v in cols[column]]
                try:
                    fit = dg.fit_exponential_decay(cols["time"], values, window)
                    break
                except (dg.InsufficientDataError, dg.FitDomainError) as exc:
                    error = exc
            if fit is None:
                print(f"{name}: no fit ({error})", file=sys.stderr)
                continue
            n_ok += 1
            w.writerow([name, _fmt(fit.rate), _fmt(fit.intercept), _fmt(fit.r_squared),
                        _fmt(fit.window[0]), _fmt(fit.window[1]), fit.n_samples, source])
            print(f"{name}: rate={fit.rate:.6g} r2={fit.r_squared:.6f} "
                  f"window=[{fit.window[0]:.4g}, {fit.window[1]:.4g}] n={fit.n_samples} ({source})")
    return EXIT_OK if n_ok else EXIT_ANALYSIS


def cmd_conditions(args) -> int:
    cfg = load_config(args.config)
    state = generate_ic(cfg)
    report = dg.check_theorem_conditions(cfg.build_domain(), state.phi)
    for line in report.lines():
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chhs", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("analyze", help="recompute diagnostics and decay fits")
    p.add_argument("--dir", required=True)
    p.add_argument("--fit-window")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("conditions", help="report long-time theorem hypotheses")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_conditions)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, DissipationFailure, NonFiniteError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except StructureError as exc:
        print(f"bad input file: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
