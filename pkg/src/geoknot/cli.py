"""Command-line entry point: ``geoknot <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, io
from .geometry import TABLE_FUNCTIONALS, DegenerateProjection, functional_vector, writhe_matrix
from .lattice import LatticeError, normalize_label
from .probe import LabeledFeatureTable, shortcut_index, shortcut_probe, train_baseline
from .sampler import BiasSpec, ChainConfig, merge_shards, run_chains
from .topology import (DIRECTION_SCHEDULE, KNOWN_CLASSES, UNKNOWN, invariants, project_to_diagram,
                       verify_knot_class)

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_IO, EXIT_BUDGET = 0, 1, 2, 3, 4

log = logging.getLogger("geoknot")


class UsageError(Exception):
    pass


def parse_bins(text):
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"--bins expects LO:HI:COUNT, got {text!r}") from None
    if count < 1 or not hi > lo:
        raise UsageError("--bins needs HI > LO and COUNT >= 1")
    return lo, hi, count


def build_parser():
    p = argparse.ArgumentParser(prog="geoknot", description=__doc__)
    p.add_argument("--version", action="version", version=FORMAT_VERSION)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="run biased chains and export a dataset")
    s.add_argument("--config", help="key=value file; explicit flags override it")
    s.add_argument("--knot")
    s.add_argument("--n-vertices", type=int)
    s.add_argument("--count", type=int)
    s.add_argument("--bias", choices=["writhe", "acn", "entanglement", "none"])
    s.add_argument("--bins", help="LO:HI:COUNT")
    s.add_argument("--chains", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--jitter", type=float)
    s.add_argument("--pivot-batch", type=int)
    s.add_argument("--bfacf-per-batch", type=int)
    s.add_argument("--max-moves", type=int)
    s.add_argument("--stride", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")

    a = sub.add_parser("analyze", help="functional vectors for XYZ files")
    a.add_argument("--in", dest="inp", required=True)
    a.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="check the knot class of a coordinate file")
    v.add_argument("--in", dest="inp", required=True)
    v.add_argument("--expect", required=True)
    v.add_argument("--gauss-dump", help="write the Gauss code of each projection tried")

    pr = sub.add_parser("probe", help="mutual-information shortcut probe")
    pr.add_argument("--manifest", required=True)
    pr.add_argument("--k", type=int, default=3)
    pr.add_argument("--out", required=True)

    t = sub.add_parser("tau", help="shortcut index m_a / m")
    t.add_argument("--m", type=float)
    t.add_argument("--m-a", type=float)
    t.add_argument("--manifest")
    t.add_argument("--features", help="comma-separated subset (default: top probe functional)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")

    w = sub.add_parser("writhe-matrix", help="export the writhe matrix as CSV")
    w.add_argument("--in", dest="inp", required=True)
    w.add_argument("--out", required=True)
    return p


SAMPLE_DEFAULTS = {"knot": "0_1", "n_vertices": 100, "count": 100, "bias": "writhe",
                   "bins": "-10:10:40", "chains": 1, "seed": 0, "jitter": 0.1,
                   "pivot_batch": 10, "bfacf_per_batch": 100, "max_moves": 10_000_000,
                   "stride": None, "workers": 1, "out": None}
_CASTS = {"n_vertices": int, "count": int, "chains": int, "seed": int, "jitter": float,
          "pivot_batch": int, "bfacf_per_batch": int, "max_moves": int, "stride": int,
          "workers": int}


def sample_settings(args):
    settings = dict(SAMPLE_DEFAULTS)
    if args.config:
        for key, value in io.read_config(args.config).items():
            if key not in settings:
                raise UsageError(f"unknown config key {key!r}")
            settings[key] = _CASTS.get(key, str)(value)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["out"] is None:
        settings["out"] = io.default_output_dir()
    if settings["chains"] < 1:
        raise UsageError("--chains must be >= 1")
    if settings["count"] < settings["chains"]:
        raise UsageError("--count must be at least the number of chains")
    return settings


def chain_configs(st):
    lo, hi, nbins = parse_bins(st["bins"])
    configs = []
    base, extra = divmod(st["count"], st["chains"])
    for chain in range(st["chains"]):
        configs.append(ChainConfig(
            knot=st["knot"], target_n=st["n_vertices"], count=base + (chain < extra),
            bias=BiasSpec(st["bias"], lo, hi, nbins), seed=st["seed"], chain_id=chain,
            pivot_batch=st["pivot_batch"], bfacf_per_batch=st["bfacf_per_batch"],
            max_moves=st["max_moves"], jitter=st["jitter"], stride=st["stride"],
            progress_every=5.0))
    return configs


def cmd_sample(args):
    st = sample_settings(args)
    try:
        configs = chain_configs(st)
    except (ValueError, LatticeError) as exc:
        raise UsageError(str(exc)) from None
    shards = run_chains(configs, workers=st["workers"])
    dataset = merge_shards(shards)
    out = Path(st["out"])
    io.export_records(dataset.records, out)
    start = 0
    for shard in shards:
        mine = dataset.records[start:start + len(shard)]
        start += len(shard)
        rows = [io.record_row(r, f"xyz/{r.label}_{r.id:06d}.xyz") for r in mine]
        io.write_manifest(rows, out / f"shard_{shard.config.chain_id}.csv")
    print(f"wrote {len(dataset)} records to {out / 'manifest.csv'} ({dataset.status})")
    return EXIT_OK if dataset.status == "complete" else EXIT_BUDGET


def classify(coords):
    det, v2 = invariants(coords)
    for label, (want_det, want_v2) in KNOWN_CLASSES.items():
        if det == want_det and v2 in want_v2:
            return label
    return UNKNOWN


def _xyz_inputs(inp):
    p = Path(inp)
    if p.is_dir():
        files = sorted(p.rglob("*.xyz"))
        if not files:
            raise FileNotFoundError(f"no .xyz files under {p}")
        return files
    if not p.exists():
        raise FileNotFoundError(str(p))
    return [p]


def cmd_analyze(args):
    out = Path(args.out)
    rows = []
    for k, f in enumerate(_xyz_inputs(args.inp)):
        curve = io.read_xyz(f)
        row = {"id": k, "label": classify(curve.vertices),
               "path": os.path.relpath(f.resolve(), out.resolve().parent),
               "seed": "", "chain_id": "", "move_index": ""}
        row.update(functional_vector(curve).as_dict())
        rows.append(row)
    io.write_manifest(rows, out)
    print(f"analyzed {len(rows)} files into {out}")
    return EXIT_OK


def cmd_verify(args):
    try:
        label = normalize_label(args.expect)
    except LatticeError as exc:
        raise UsageError(str(exc)) from None
    curve = io.read_xyz(args.inp)
    result = verify_knot_class(curve.vertices, label)
    if args.gauss_dump:
        diagrams = []
        for d in DIRECTION_SCHEDULE:
            try:
                diagrams.append(project_to_diagram(curve.vertices, d))
            except DegenerateProjection:
                continue
        io.write_gauss_dump(diagrams, args.gauss_dump)
    print(f"determinant={result.determinant} v2={result.v2_exact} "
          f"v2_writhe={result.v2_writhe:.4f} verdict={result.verdict}")
    return EXIT_OK if result.verdict == label else EXIT_MISMATCH


def _table(manifest):
    rows = io.read_manifest(manifest, check_paths=False)
    return LabeledFeatureTable({n: [r[n] for r in rows] for n in TABLE_FUNCTIONALS},
                               [r["label"] for r in rows])


def cmd_probe(args):
    try:
        report = shortcut_probe(_table(args.manifest), TABLE_FUNCTIONALS, args.k)
    except io.FormatError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    io.write_probe_report(report, args.out)
    for name, score, rank in report.rows():
        print(f"{rank:2d} {name:12s} {score:.4f} nats")
    return EXIT_OK


def cmd_tau(args):
    if args.manifest:
        table = _table(args.manifest)
        if args.features:
            feats = [f.strip() for f in args.features.split(",")]
            unknown = set(feats) - set(TABLE_FUNCTIONALS)
            if unknown:
                raise UsageError(f"unknown features {sorted(unknown)}")
        else:
            report = shortcut_probe(table, TABLE_FUNCTIONALS)
            feats = [report.rows()[0][0]]
        _, m = train_baseline(table, TABLE_FUNCTIONALS, seed=args.seed)
        _, m_a = train_baseline(table, feats, seed=args.seed)
        feature_set = "+".join(feats)
        n_classes = len(np.unique(table.labels))
    elif args.m is not None and args.m_a is not None:
        m, m_a, feature_set, n_classes = args.m, args.m_a, "given", 2
    else:
        raise UsageError("tau needs --m and --m-a, or --manifest")
    try:
        tau, flag = shortcut_index(m_a, m, n_classes)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from None
    row = {"feature_set": feature_set, "m": m, "m_a": m_a, "tau": tau, "flag": flag}
    if args.out:
        io.write_tau_report([row], args.out)
    print(f"{feature_set}: m={m:.4f} m_a={m_a:.4f} tau={tau:.4f} {flag}".rstrip())
    return EXIT_OK


def cmd_writhe_matrix(args):
    curve = io.read_xyz(args.inp)
    W = writhe_matrix(curve)
    io.write_writhe_matrix(W, args.out)
    print(f"wrote {len(curve)}x{len(curve)} writhe matrix to {args.out}")
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "analyze": cmd_analyze, "verify": cmd_verify,
            "probe": cmd_probe, "tau": cmd_tau, "writhe-matrix": cmd_writhe_matrix}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"geoknot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, io.FormatError) as exc:
        print(f"geoknot: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # invalid geometry in an input file, e.g. coincident vertices
        print(f"geoknot: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
