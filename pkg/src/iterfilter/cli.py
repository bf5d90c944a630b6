"""Command line entry point: ``iterfilter run|attack|stream``.

Exit codes: 0 success, 1 I/O or validation failure, 2 no convergence
(outputs are still written).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import attacks, engine, ingest
from .model import SolveConfig, TrustFunctionSpec

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
TRUST_NAMES = {"linear": "linear", "exp": "exponential", "exponential": "exponential",
               "reciprocal": "reciprocal"}

log = logging.getLogger("iterfilter")


def _fmt(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".17g")


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, type=Path, help="rating file")
    p.add_argument("--format", choices=ingest.FORMATS, default="movielens")
    p.add_argument("--scale-min", type=float, default=1.0)
    p.add_argument("--scale-max", type=float, default=5.0)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--rater-col", default="rater")
    p.add_argument("--item-col", default="item")
    p.add_argument("--value-col", default="value")
    p.add_argument("--timestamp-col", default=None)
    p.add_argument("--trust", choices=sorted(TRUST_NAMES), default="linear")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--c", type=float, default=1.0, help="uniform trust parameter c_0")
    g.add_argument("--c-file", type=Path, help="CSV item_id,c with one row per item")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--newton", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, default=Path("."))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iterfilter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve for reputations and trust")
    _common(run)

    att = sub.add_parser("attack", help="inject attackers and measure robustness")
    _common(att)
    att.add_argument("--scenario", type=Path, help="key = value scenario file (overrides flags)")
    att.add_argument("--type", choices=["random", "spammer"], default="random")
    att.add_argument("--count", type=int, default=237)
    att.add_argument("--items-per-attacker", default=attacks.MATCH_BASE)
    att.add_argument("--preferred", default=None, help="comma-separated item ids (spammers)")
    att.add_argument("--bins", type=int, default=50)

    st = sub.add_parser("stream", help="warm-started filtering over time epochs")
    _common(st)
    st.add_argument("--epochs", type=int, default=10)
    st.add_argument("--steps", type=int, default=3)
    return parser


def _descriptor(args) -> ingest.DatasetDescriptor:
    ts = args.timestamp_col
    return ingest.DatasetDescriptor(args.format, (args.scale_min, args.scale_max), args.rater_col,
                                    args.item_col, args.value_col, ts, args.delimiter)


def _trust_spec(args, ratings) -> TrustFunctionSpec:
    kind = TRUST_NAMES[args.trust]
    if args.c_file is None:
        return TrustFunctionSpec(kind, args.c)
    lookup = {}
    with open(args.c_file, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            lookup[str(row["item_id"])] = float(row["c"])
    ids = ratings.item_ids or tuple(range(ratings.n_items))
    missing = [j for j in ids if str(j) not in lookup]
    if missing:
        raise ValueError(f"{args.c_file}: no c for item {missing[0]!r}")
    return TrustFunctionSpec(kind, np.array([lookup[str(j)] for j in ids]))


def _config(args, ratings) -> SolveConfig:
    return SolveConfig(_trust_spec(args, ratings), args.tol, args.max_iter, newton=args.newton)


def write_reputations(path, ratings, r) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["item_id", "reputation_normalized", "reputation_raw_scale"])
        raw = ratings.denormalize(r)
        for j in range(ratings.n_items):
            w.writerow([ratings.item_id(j), _fmt(r[j]), _fmt(raw[j])])


def write_trust(path, ratings, t, d) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["rater_id", "t_i", "d_i"])
        for i in range(ratings.n_raters):
            w.writerow([ratings.rater_id(i), _fmt(t[i]), _fmt(d[i])])


def write_trace(path, report) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["iteration", "step_norm", "psi"])
        for rec in report.trace:
            w.writerow([rec.iteration, _fmt(rec.step_norm), _fmt(rec.psi)])


def cmd_run(args) -> int:
    data = ingest.load(args.input, _descriptor(args))
    R = data.ratings
    config = _config(args, R)
    t0 = time.perf_counter()
    report = engine.solve(R, config)
    elapsed = time.perf_counter() - t0
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_reputations(args.out_dir / "reputations.csv", R, report.r)
    write_trust(args.out_dir / "trust.csv", R, report.t, report.d)
    write_trace(args.out_dir / "trace.csv", report)
    ingest.write_id_map(R.rater_ids, args.out_dir / "rater_ids.csv")
    ingest.write_id_map(R.item_ids, args.out_dir / "item_ids.csv")
    print(f"{data.summary()}; iterations={report.iterations_used} converged={report.converged} "
          f"runtime={elapsed:.3f}s")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _scenario(args, ratings) -> attacks.AttackScenario:
    if args.scenario is not None:
        return attacks.read_scenario(args.scenario)
    ipa = args.items_per_attacker
    ipa = ipa if ipa == attacks.MATCH_BASE else int(ipa)
    pref = None
    if args.preferred:
        pos = {str(v): k for k, v in enumerate(ratings.item_ids or range(ratings.n_items))}
        pref = tuple(pos[s.strip()] for s in args.preferred.split(","))
    kind = "random_rater" if args.type == "random" else "spammer"
    return attacks.AttackScenario(kind, args.count, ipa, args.seed, pref)


def cmd_attack(args) -> int:
    data = ingest.load(args.input, _descriptor(args))
    R = data.ratings
    config = _config(args, R)
    scenario = _scenario(args, R)
    t0 = time.perf_counter()
    result = attacks.run_attack(R, scenario, config, bins=args.bins)
    elapsed = time.perf_counter() - t0
    args.out_dir.mkdir(parents=True, exist_ok=True)
    attacks.write_perturbation_csv(result.metrics, args.out_dir / "perturbation.csv")
    attacks.write_separation_csv(result.separation, args.out_dir / "separation.csv")
    attacks.write_scenario(scenario, args.out_dir / "scenario.cfg")
    m = result.metrics
    print(f"{scenario.kind} x{scenario.count}: l1 filtered={m.l1_diff_raw:.6g} "
          f"average={m.l1_diff_average_baseline_raw:.6g} ratio={m.ratio:.4f} runtime={elapsed:.3f}s")
    ok = result.base_report.converged and result.merged_report.converged
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_stream(args) -> int:
    desc = _descriptor(args)
    data = ingest.load(args.input, desc)
    if data.timestamps is None:
        raise ValueError(f"{args.input}: timestamps are required for streaming")
    if args.steps < 1:
        raise ValueError("--steps must be at least 1")
    epochs = ingest.split_epochs(data, args.epochs)
    config = _config(args, data.ratings)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    fh, w = _writer(args.out_dir / "stream.csv")
    all_converged = True
    prev_R = prev_T = None
    with fh:
        w.writerow(["epoch", "n_entries", "steps_applied", "step_norm_after", "drift"])
        for k, R in enumerate(epochs, start=1):
            epoch = engine.make_epoch(R, prev_R, prev_T, args.steps)
            rep = engine.stream_update(epoch, config)
            full = engine.solve(R, config)
            drift = engine.inf_norm(rep.r, full.r)
            w.writerow([k, R.nnz, len(rep.trace), _fmt(rep.trace[-1].step_norm), _fmt(drift)])
            all_converged &= full.converged
            prev_R, prev_T = R, rep.final_trust
    print(f"{len(epochs)} epochs written to {args.out_dir / 'stream.csv'}")
    return EXIT_OK if all_converged else EXIT_NOT_CONVERGED


COMMANDS = {"run": cmd_run, "attack": cmd_attack, "stream": cmd_stream}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
