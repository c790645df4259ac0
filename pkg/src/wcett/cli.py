"""Command-line front end.

Every command writes into ``--out`` together with ``manifest.json``, which
records a hash of the effective configuration (input files by checksum)
and a checksum of every file written.  Wall-clock columns are left empty
unless ``--timing`` is given, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

from .dag import DagError, ProgramDag, count_paths, enumerate_paths, merge_series
from .estimator import InfeasibleWindows, NoPathLeft, compare_baseline, estimate_wcett, iterative_basis, solve_delta
from .generate import diamond_chain, layered_dag, make_platform
from .milp import MilpError
from .platform import MeasurementSet, PlatformModel, measure_all, perturb
from .spanner import NotInSpan, PathBasis, compute_spanner

log = logging.getLogger("wcett")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _num(x):
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else _num(v) for v in row])
    return buf.getvalue()


class Run:
    """One output directory plus the manifest describing it."""

    def __init__(self, args: argparse.Namespace):
        self.out = Path(args.out)
        self.written: dict[str, str] = {}
        config = {"command": args.command}
        for key, val in sorted(vars(args).items()):
            if key in ("out", "command", "func", "verbose"):
                continue
            if key in ("dag", "platform", "measurements") and val:
                paths = val if isinstance(val, list) else [val]
                val = [_sha256(Path(p)) for p in paths]
            config[key] = val
        self.config = config
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {self.out}: {exc}") from exc

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.written[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return path

    def close(self) -> None:
        blob = json.dumps(self.config, sort_keys=True).encode("utf-8")
        doc = {
            "config": self.config,
            "config_hash": hashlib.sha256(blob).hexdigest(),
            "files": dict(sorted(self.written.items())),
        }
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _load_dag(path: str) -> ProgramDag:
    return ProgramDag.load(path)


def _seconds(args, t0: float):
    return round(time.perf_counter() - t0, 3) if args.timing else None


# -- commands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.family == "diamond":
        dag = diamond_chain(args.n)
    else:
        dag = layered_dag(args.layers, args.width, args.prob, args.seed, args.exclusions)
    platform = make_platform(dag, args.seed, args.mu, args.law)
    run = Run(args)
    run.write("dag.json", dag.to_json())
    run.write("platform.json", platform.to_json())
    nv, ne, np_ = dag.n_vertices, dag.n_edges, count_paths(dag)
    table = f"# Nodes  # Edges  # Paths\n{nv:>7}  {ne:>7}  {np_:>7}\n"
    run.write("counts.txt", table)
    run.close()
    print(table, end="")
    return EXIT_OK


def cmd_measure(args) -> int:
    dag = _load_dag(args.dag)
    platform = PlatformModel.load(args.platform)
    if args.all:
        paths = enumerate_paths(dag, respect_exclusions=True)
    else:
        work, mapping = merge_series(dag)
        paths = [mapping.expand(p) for p in compute_spanner(work).paths if work.is_feasible(p)]
    ms = measure_all(platform, paths)
    run = Run(args)
    run.write("measurements.csv", ms.to_csv())
    run.close()
    print(f"measured {len(ms)} paths")
    return EXIT_OK


def cmd_basis(args) -> int:
    dag = _load_dag(args.dag)
    work, mapping = merge_series(dag)
    t0 = time.perf_counter()
    seed = [p for p in compute_spanner(work).paths if work.is_feasible(p)]
    res = iterative_basis(work, args.accuracy, seed)
    total = _seconds(args, t0)
    basis = PathBasis(tuple(mapping.expand(p) for p in res.paths))
    run = Run(args)
    run.write("basis.json", basis.to_json())
    if args.platform:
        run.write("measurements.csv", measure_all(PlatformModel.load(args.platform), list(basis.paths)).to_csv())
    rows = [[i, it.k, round(it.seconds, 3) if args.timing else None] for i, it in enumerate(res.history)]
    run.write("iterations.csv", _csv_text(["iteration", "k", "seconds"], rows))
    summary = [[args.accuracy, res.k, len(res.paths), total]]
    run.write("summary.csv", _csv_text(["desired_k", "actual_k", "paths", "seconds"], summary))
    run.close()
    print(f"k={res.k:.6g} paths={len(res.paths)} refinements={len(res.history) - 1}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    dag = _load_dag(args.dag)
    if bool(args.platform) == bool(args.measurements):
        raise ConfigError("give exactly one of --platform or --measurements")
    t0 = time.perf_counter()
    if args.platform:
        report = estimate_wcett(
            dag,
            platform=PlatformModel.load(args.platform),
            accuracy=args.accuracy,
            top=args.top,
            early_stop=args.early_stop,
        )
    else:
        report = estimate_wcett(
            dag,
            measurements=MeasurementSet.load(args.measurements, dag),
            accuracy=args.accuracy,
            top=args.top,
            early_stop=args.early_stop,
        )
    total = _seconds(args, t0)
    run = Run(args)
    run.write("report.json", json.dumps(report.to_dict(args.timing), indent=1) + "\n")
    rows = [[i + 1, r.predicted, report.band_halfwidth, r.measured, total] for i, r in enumerate(report.ranked)]
    run.write("report.csv", _csv_text(["rank", "predicted", "band", "measured", "seconds"], rows))
    run.close()
    print(f"k={report.k:.6g} D={report.D:.6g} band=±{report.band_halfwidth:.6g}")
    for r in report.ranked:
        seen = "-" if r.measured is None else f"{r.measured:.6g}"
        print(f"  T={r.predicted:.6g}  measured={seen}  path={','.join(map(str, r.edges))}")
    return EXIT_OK


def _levels(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad --levels {text!r}") from exc


def cmd_perturb(args) -> int:
    dag = _load_dag(args.dag)
    work, mapping = merge_series(dag)
    base = MeasurementSet.load(args.measurements, dag)
    merged = MeasurementSet((mapping.contract(p), l) for p, l in base)
    rows = []
    for level in _levels(args.levels):
        for s in range(args.seeds):
            noisy = perturb(merged, level, args.seed + s)
            rows.append([level, solve_delta(work, noisy).D])
    run = Run(args)
    run.write("perturb.csv", _csv_text(["level", "D"], rows))
    run.close()
    print(f"{len(rows)} rows")
    return EXIT_OK


def cmd_compare(args) -> int:
    dags = args.dag
    platforms = args.platform or []
    if len(dags) != len(platforms):
        raise ConfigError("--dag and --platform must be given the same number of times")
    rows = []
    for d, p in zip(dags, platforms):
        rows.append(compare_baseline(_load_dag(d), PlatformModel.load(p)).row())
    header = list(rows[0]) if rows else ["basis_paths"]
    run = Run(args)
    run.write("compare.csv", _csv_text(header, [[r[h] for h in header] for r in rows]))
    run.close()
    wins = sum(r["refined_bound"] <= r["baseline_bound"] for r in rows)
    if rows:
        print(f"2k <= 2|B| on {wins}/{len(rows)} instances ({wins / len(rows):.0%})")
    return EXIT_OK


# -- parsing --------------------------------------------------------------------


def _positive_accuracy(text: str) -> float:
    a = float(text)
    if not a >= 1:
        raise argparse.ArgumentTypeError("accuracy must be at least 1")
    return a


def _positive_int(text: str) -> int:
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return k


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wcett", description="Worst-case path timing from path measurements.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dag=True):
        if dag:
            p.add_argument("--dag", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--timing", action="store_true", help="record wall-clock seconds")

    g = sub.add_parser("gen", help="generate a benchmark DAG and platform")
    common(g, dag=False)
    g.add_argument("--family", choices=("diamond", "layered"), required=True)
    g.add_argument("--n", type=_positive_int, default=3, help="diamonds in the chain")
    g.add_argument("--layers", type=_positive_int, default=5)
    g.add_argument("--width", type=_positive_int, default=3)
    g.add_argument("--prob", type=float, default=0.5)
    g.add_argument("--exclusions", type=int, default=0)
    g.add_argument("--mu", type=float, default=0.0, help="variation bound of the platform")
    g.add_argument("--law", choices=("uniform", "adversarial"), default="uniform")
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("measure", help="measure spanner paths (or all paths) on a platform")
    common(m)
    m.add_argument("--platform", required=True)
    m.add_argument("--all", action="store_true", help="measure every feasible path")
    m.set_defaults(func=cmd_measure)

    b = sub.add_parser("basis", help="refine the measured path set to a target accuracy")
    common(b)
    b.add_argument("--accuracy", type=_positive_accuracy, default=2.0)
    b.add_argument("--platform", help="also measure the refined set on this platform")
    b.set_defaults(func=cmd_basis)

    for name in ("estimate", "topk"):
        e = sub.add_parser(name, help="rank the longest paths with error bands")
        common(e)
        e.add_argument("--platform")
        e.add_argument("--measurements")
        e.add_argument("--accuracy", type=_positive_accuracy, default=2.0)
        e.add_argument("--top", type=_positive_int, default=1 if name == "estimate" else 5)
        e.add_argument("--early-stop", action="store_true")
        e.set_defaults(func=cmd_estimate)

    p = sub.add_parser("perturb", help="sweep multiplicative noise levels and report D")
    common(p)
    p.add_argument("--measurements", required=True)
    p.add_argument("--levels", default="10,25,50", help="comma-separated percents")
    p.add_argument("--seeds", type=_positive_int, default=20)
    p.set_defaults(func=cmd_perturb)

    c = sub.add_parser("compare", help="basis-only estimate against the refined estimate")
    c.add_argument("--dag", action="append", required=True)
    c.add_argument("--platform", action="append")
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--timing", action="store_true")
    c.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InfeasibleWindows, NoPathLeft) as exc:
        print(f"wcett: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, DagError, NotInSpan, KeyError) as exc:
        print(f"wcett: bad configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"wcett: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MilpError, RuntimeError) as exc:
        print(f"wcett: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"wcett: bad configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
