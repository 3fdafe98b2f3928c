"""Command-line entry point: ``chaos-sep <command> ...``.

Function specs accepted by ``--function``:

  family:p   rho_p*|x| - 1 for odd p >= 3
  tent       2|x| - 1
  slope:s    s*|x| - 1
  file:path  a PL function stored as JSON ({"domain", "knots"}) or CSV (x,y)

Exit codes: 0 success, 1 internal failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import shutil
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

from . import covering, dynamics, mlp, pl, rates, separation

log = logging.getLogger("chaos_sep")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit code 2."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# --- function specs ------------------------------------------------------------


def parse_function(spec: str) -> pl.PLFunction:
    kind, _, arg = spec.partition(":")
    try:
        if kind == "tent" and not arg:
            return separation.tent_map()
        if kind == "family":
            return separation.hard_family(int(arg))
        if kind == "slope":
            s = float(arg)
            if not math.isfinite(s) or s < 0:
                raise ValueError(f"slope must be a finite non-negative number, got {arg!r}")
            return separation.slope_map(s)
        if kind == "file":
            return pl.PLFunction.load(Path(arg))
    except (OSError, ValueError, KeyError, TypeError, separation.ConstructionError) as exc:
        raise UsageError(f"cannot read function {spec!r}: {exc}") from None
    raise UsageError(f"unknown function spec {spec!r} (expected family:p, tent, slope:s or file:path)")


# --- manifest ------------------------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    args: dict
    seeds: list[int] = field(default_factory=list)
    version: str = field(default_factory=_version)
    outputs: dict[str, str] = field(default_factory=dict)  # relative path -> sha256
    wall_time: float = 0.0
    python: str = field(default_factory=platform.python_version)

    def add(self, root: Path, path: Path) -> Path:
        rel = path.relative_to(root).as_posix()
        if rel in self.outputs:
            raise RuntimeError(f"{rel} registered twice")
        self.outputs[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def write(self, root: Path) -> Path:
        path = root / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


class Bundle:
    """Output directory written through a temp dir so failures leave nothing behind."""

    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.manifest = manifest
        self.tmp: Path | None = None

    def __enter__(self) -> "Bundle":
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".chaos-sep-", dir=self.out.parent))
        self._t0 = time.perf_counter()
        return self

    def text(self, name: str, content: str) -> Path:
        path = self.tmp / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
        return self.manifest.add(self.tmp, path)

    def path(self, name: str) -> Path:
        """Reserve a path for a writer that produces the file itself; call ``register`` after."""
        p = self.tmp / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def register(self, path: Path) -> Path:
        return self.manifest.add(self.tmp, path)

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.tmp, ignore_errors=True)
            return False
        self.manifest.wall_time = time.perf_counter() - self._t0
        self.manifest.write(self.tmp)
        if self.out.exists():
            shutil.rmtree(self.out)
        os.replace(self.tmp, self.out)
        return False


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else (str(v).lower() if isinstance(v, bool) else v) for v in r])
    return buf.getvalue()


# --- commands ----------------------------------------------------------------------------


def cmd_rho(args) -> int:
    if args.table is not None:
        if args.table < 3:
            raise UsageError("table size must be >= 3")
        sys.stdout.write(rates.rate_table_csv(args.table))
        return EXIT_OK
    if args.period is None:
        raise UsageError("give --period or --table")
    if args.period < 3 or args.period % 2 == 0:
        raise UsageError("period must be odd and >= 3")
    g = rates.rho_legacy(args.period) if args.legacy else rates.rho(args.period)
    print(repr(g.rho))
    return EXIT_OK


def _period_summary(scan: dynamics.PeriodScan) -> str:
    rows = []
    for n in range(1, scan.max_period + 1):
        orbs = scan.orbits.get(n, [])
        rows.append((n, len(orbs), bool(scan.continua.get(n)), scan.has_period(n)))
    text = _csv(["period", "orbits", "continuum", "present"], rows)
    return text + f"# sharkovsky_consistent={str(scan.sharkovsky_consistent()).lower()}\n"


def cmd_periods(args) -> int:
    if args.max < 1:
        raise UsageError("--max must be >= 1")
    f = parse_function(args.function)
    if not f.is_self_map():
        raise UsageError(f"{args.function} is not a self-map of its domain")
    scan = dynamics.detect_periods(f, args.max)
    sys.stdout.write(_period_summary(scan))
    if args.out:
        Path(args.out).write_text(scan.to_csv())
    return EXIT_OK


def cmd_bound(args) -> int:
    if args.p < 3 or args.p % 2 == 0:
        raise UsageError("period must be odd and >= 3")
    r = rates.rho(args.p).rho
    x, y = separation.default_levels(args.p)
    L = r if args.lipschitz is None else args.lipschitz
    try:
        cfg = separation.SeparationConfig(r, L, args.t, args.width, args.depth, x, y)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    crossings = None
    if args.exact_crossings:
        h = pl.self_compose(separation.hard_family(args.p), args.t)
        crossings = pl.count_crossings(h, x, y)
    rep = separation.theory_bound(cfg, crossings)
    out = rep.to_json()
    out["sizing"] = separation.sizing_readings(args.t, args.width, [args.depth], r)[0]
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _depths(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            ds = list(range(int(a), int(b) + 1))
        else:
            ds = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise UsageError(f"bad depth list {text!r}; use 1..5 or 1,2,3") from None
    if not ds or min(ds) < 1:
        raise UsageError("depths must be >= 1")
    return ds


def _train_config(args) -> mlp.TrainConfig:
    try:
        return mlp.TrainConfig(epochs=args.epochs, lr=args.lr, samples=args.samples, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_experiment(b: Bundle, res: mlp.ExperimentResult, prefix: str) -> None:
    from . import plotting

    b.text(f"{prefix}_results.csv", res.to_csv())
    b.text(f"{prefix}_summary.csv", res.summary_csv())
    detail = [(r.depth, r.seed, r.l1_method, r.l1_error_estimate, r.condition_met) for r in res.rows]
    b.text(f"{prefix}_l1_method.csv", _csv(["depth", "seed", "l1_method", "l1_error_estimate", "condition"], detail))
    for (d, s), losses in sorted(res.curves.items()):
        b.text(f"{prefix}_curves/depth{d}_seed{s}.csv", _csv(["epoch", "loss"], enumerate(losses.tolist(), 1)))
        b.text(f"{prefix}_models/depth{d}_seed{s}.json", json.dumps(res.models[(d, s)].to_json()) + "\n")
    med = res.median_l1()
    per: dict[int, list[float]] = {}
    for r in res.rows:
        per.setdefault(r.depth, []).append(r.l1)
    ds = sorted(med)
    floors = res.floors()
    png = b.path(f"{prefix}_l1_vs_depth.png")
    plotting.plot_experiment(ds, [med[d] for d in ds], [floors[d] for d in ds], png,
                             f"{res.task} task, f^{res.t}",
                             ([min(per[d]) for d in ds], [max(per[d]) for d in ds]))
    b.register(png)


def cmd_train(args) -> int:
    depths = _depths(args.depths)
    if args.seeds < 1 or args.width < 1 or args.jobs < 1:
        raise UsageError("--seeds, --width and --jobs must be >= 1")
    cfg = _train_config(args)
    seeds = list(range(args.seeds))
    manifest = RunManifest("train", vars_for_manifest(args), [cfg.seed + s for s in seeds])
    with Bundle(Path(args.out), manifest) as b:
        res = mlp.run_experiment(args.task, depths, cfg, args.width, seeds, args.t, args.jobs)
        _write_experiment(b, res, args.task)
    print(f"wrote {args.out}")
    return EXIT_OK


# --- report ----------------------------------------------------------------------------


def _report_rates(b: Bundle) -> None:
    from . import plotting

    rows = rates.rate_table(41)
    b.text("rates.csv", rates.rate_table_csv(41))
    b.register(plotting.plot_rates(rows, b.path("rates.png")))


def _report_spectra(b: Bundle) -> None:
    rows = []
    for p in range(3, 16, 2):
        sr = covering.spectral_radius(covering.build_theoretical_graph(p).adjacency)
        r = rates.rho(p).rho
        rows.append((p, sr, r, abs(sr - r)))
    b.text("spectra.csv", _csv(["p", "spectral_radius", "rho", "abs_diff"], rows))


def _report_family(b: Bundle) -> None:
    from . import plotting

    rows, orbit_rows, graphs = [], [], {}
    for p in (3, 5, 7, 9):
        r = rates.rho(p).rho
        f = separation.hard_family(p)
        z = dynamics.family_orbit(r, p)
        orb = dynamics.Orbit.from_points(f, z[:p])
        check = dynamics.orbit_sign_pattern_check(z[:p], r)
        G = covering.oriented_graph(f, orb)
        rep = covering.verify_covering(f, G)
        rows.append((p, r, abs(z[p]), dynamics.pairwise_min_gap(z[:p]), bool(check), rep.orientation or "none",
                     covering.spectral_radius(G.adjacency)))
        orbit_rows += [(p, i, v) for i, v in enumerate(z)]
        graphs[str(p)] = G.to_json()
    b.text("family.csv", _csv(["p", "rho", "closure_residual", "min_gap", "sign_pattern", "orientation",
                               "empirical_spectral_radius"], rows))
    b.text("family_orbits.csv", _csv(["p", "step", "z"], orbit_rows))
    b.text("covering_graphs.json", json.dumps(graphs, indent=2) + "\n")
    b.register(plotting.plot_iterates(separation.hard_family(3), [1, 2, 3], b.path("family3_iterates.png"),
                                      "rho_3|x| - 1"))


def _report_regimes(b: Bundle, extra: pl.PLFunction | None) -> None:
    from . import plotting

    maps = [("family:3", separation.hard_family(3)), ("tent", separation.tent_map()),
            ("slope:1.2", separation.slope_map(1.2))]
    if extra is not None:
        maps.append(("input", extra))
    rows = []
    for name, f in maps:
        scan = dynamics.detect_periods(f, 9)
        odd = [n for n in scan.periods() if n % 2 and n > 1]
        probe = separation.crossing_growth(f, 12, grid=7)
        (a, c), ratio = probe.worst(6)
        rows.append((name, pl.lipschitz(f), " ".join(map(str, scan.periods())), bool(odd),
                     scan.sharkovsky_consistent(), ratio, a, c))
    b.text("regimes.csv", _csv(["map", "lipschitz", "periods_le_9", "odd_period", "sharkovsky_consistent",
                                "crossing_step_ratio", "worst_x", "worst_y"], rows))
    probe = separation.crossing_growth(separation.slope_map(1.2), 20)
    b.text("slope1.2_crossings.csv", probe.to_csv())
    b.register(plotting.plot_iterates(separation.slope_map(1.2), [1, 4, 8], b.path("slope1.2_iterates.png"),
                                      "1.2|x| - 1"))


def _report_oscillations(b: Bundle) -> None:
    from . import plotting

    rows = []
    for p in (3, 5):
        f = separation.hard_family(p)
        orb = dynamics.Orbit.from_points(f, dynamics.family_orbit(rates.rho(p).rho, p)[:p])
        G = covering.oriented_graph(f, orb)
        lo, hi = G.intervals[0]
        trace = covering.oscillation_lower_bound(G, 12)
        b.text(f"delta_p{p}.csv", trace.to_csv())
        h = f
        ts, meas, bound = [], [], []
        for t in range(1, 13):
            if t > 1:
                h = pl.compose(f, h)
            c = pl.count_crossings(h, lo, hi)
            d = trace.at(t, "I0")
            rows.append((p, t, c, d, c >= d))
            ts.append(t), meas.append(c), bound.append(d)
        b.register(plotting.plot_oscillations(ts, meas, bound, b.path(f"oscillations_p{p}.png"), f"p = {p}"))
    b.text("oscillations.csv", _csv(["p", "t", "crossings", "delta_I0", "bound_holds"], rows))


def _report_integral(b: Bundle) -> None:
    f = separation.hard_family(3)
    L = pl.lipschitz(f)
    x, y = separation.default_levels(3)
    rows = []
    h = f
    for t in range(1, 13):
        if t > 1:
            h = pl.compose(f, h)
        rep = separation.interval_integral_check(h, x, y, L**t)
        rows += [(t, iv.lo, iv.hi, iv.level, iv.integral, rep.bound, iv.ratio) for iv in rep.intervals]
    b.text("integral_check.csv", _csv(["t", "lo", "hi", "level", "integral", "bound", "ratio"], rows))


def _report_bounds(b: Bundle) -> None:
    r = rates.rho(3).rho
    x, y = separation.default_levels(3)
    buf = [",".join(separation.SeparationReport.CSV_HEADER) + ",t_required"]
    for t, u in ((40, 20), (8, 20)):
        for l in range(1, 6):
            rep = separation.theory_bound(separation.SeparationConfig(r, r, t, u, l, x, y))
            buf.append(",".join(rep.csv_row() + [str(separation.min_compositions(l, u, r))]))
    b.text("bounds.csv", "\n".join(buf) + "\n")


def cmd_report(args) -> int:
    extra = parse_function(args.function) if args.function else None
    if extra is not None and not extra.is_self_map():
        raise UsageError(f"{args.function} is not a self-map of its domain")
    cfg = _train_config(args)
    seeds = list(range(args.seeds))
    manifest = RunManifest("report", vars_for_manifest(args), [cfg.seed + s for s in seeds])
    with Bundle(Path(args.out), manifest) as b:
        steps = [("rates", lambda: _report_rates(b)), ("spectra", lambda: _report_spectra(b)),
                 ("family", lambda: _report_family(b)), ("regimes", lambda: _report_regimes(b, extra)),
                 ("oscillations", lambda: _report_oscillations(b)), ("integral", lambda: _report_integral(b)),
                 ("bounds", lambda: _report_bounds(b))]
        tasks = ["easy"] if args.quick else ["easy", "hard"]
        for task in tasks:
            steps.append((f"train {task}", lambda task=task: _write_experiment(
                b, mlp.run_experiment(task, [1, 2, 3, 4, 5], cfg, 20, seeds, jobs=args.jobs), task)))
        for name, fn in steps:
            t0 = time.perf_counter()
            fn()
            log.info("%s done in %.1fs", name, time.perf_counter() - t0)
    print(f"wrote {args.out}")
    return EXIT_OK


def vars_for_manifest(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "handler"}


# --- parser --------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_train_opts(p: argparse.ArgumentParser, epochs: int = 1500, seeds: int = 3) -> None:
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--seeds", type=int, default=seeds, help="number of seeds; seed values start at --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--samples", type=int, default=4096, help="training grid size")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chaos-sep", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=_version())
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rho", help="growth rate rho_p or a comparison table")
    p.add_argument("--period", type=int)
    p.add_argument("--legacy", action="store_true", help="root of z^(p-1) - z^(p-2) - 1 instead")
    p.add_argument("--table", type=int, metavar="P_MAX", help="CSV p,rho_new,rho_legacy,gap for odd p <= P_MAX")
    p.set_defaults(handler=cmd_rho)

    p = sub.add_parser("periods", help="periodic orbits up to a maximal period")
    p.add_argument("--function", required=True, help="family:p | tent | slope:s | file:path")
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--out", help="write every orbit point to this CSV")
    p.set_defaults(handler=cmd_periods)

    p = sub.add_parser("bound", help="L1 separation floor for the rho_p family")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--lipschitz", type=float, help="override L (defaults to rho_p)")
    p.add_argument("--exact-crossings", action="store_true", help="use measured crossings of f^t")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("train", help="train MLPs on f^t and record L1 errors")
    p.add_argument("--task", choices=sorted(mlp.TASK_COMPOSITIONS), required=True)
    p.add_argument("--depths", default="1..5")
    p.add_argument("--width", type=int, default=20)
    p.add_argument("--t", type=int, help="override the task's composition count")
    p.add_argument("--out", required=True)
    _add_train_opts(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("report", help="full reproduction bundle (CSVs, figures, manifest)")
    p.add_argument("--out", required=True)
    p.add_argument("--quick", action="store_true", help="skip the f^40 training runs")
    p.add_argument("--function", help="extra map for the regime table")
    _add_train_opts(p)
    p.set_defaults(handler=cmd_report)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"chaos-sep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"chaos-sep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pl.BudgetError as exc:
        print(f"chaos-sep: piece budget exceeded: {exc} (raise {pl.BUDGET_ENV})", file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # noqa: BLE001
        log.debug("internal failure", exc_info=True)
        print(f"chaos-sep: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
