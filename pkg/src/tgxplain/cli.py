"""Command-line pipeline: synth, explain, discover, export, bench, adapter-check.

Options can come from a key=value config file (--config); explicit flags
win over the file, which wins over built-in defaults. All randomness
derives from the seeds in the configuration, so identical settings give
byte-identical output trees. Files are written to a temp name and renamed,
so an interrupted run leaves no truncated artifacts. Set TGXPLAIN_VERBOSE=1
for progress chatter on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shlex
import sys
import time
from pathlib import Path

from .discovery import (
    CandidateSet,
    brute_force_discover,
    dominant_report,
    gain_series,
    prune_discover,
)
from .errors import DimensionError, ParseError, RangeError
from .graph import TimeWindow, load_dataset, normalize_adjacency, save_dataset
from .model import EmbeddedOracle, load_weights, save_weights
from .perturb import (
    PerturbationConfig,
    TemporalDataset,
    generate_temporal_dataset,
    load_snapshot_dataset,
    save_snapshot_dataset,
)
from .pgm import (
    bic_score,
    candidate_variables,
    empty_network,
    explain_dataset,
    network_from_json,
    network_to_json,
    to_dot,
)
from .protocol import AdapterClient, RemoteOracle, run_conformance
from .synth import SynthSpec, synth_instance

_FLOAT_FMT = "%.17g"


def _verbose() -> bool:
    return bool(os.environ.get("TGXPLAIN_VERBOSE"))


def _log(msg: str) -> None:
    if _verbose():
        print(msg, file=sys.stderr)


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _load_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment."""
    settings = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {i}: expected key = value")
        key, value = line.split("=", 1)
        settings[key.strip().replace("-", "_")] = value.strip()
    return settings


def _merge(args: argparse.Namespace, keys: dict) -> argparse.Namespace:
    """Fill argparse Nones from the config file, then builtin defaults."""
    config = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for key, (default, cast) in keys.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            continue
        if key in config:
            setattr(args, key, cast(config[key]))
        else:
            setattr(args, key, default)
    return args


def _bool_cast(s) -> bool:
    return str(s).lower() in ("1", "true", "yes", "on")


# ---------------------------------------------------------------------------
# synth


_SYNTH_KEYS = {
    "n_nodes": (8, int),
    "t_total": (43, int),
    "window": (4, int),
    "hidden_dim": (6, int),
    "target": (0, int),
    "active_start": (10, int),
    "active_end": (20, int),
    "burst": (3.0, float),
    "base_level": (1.0, float),
    "noise": (0.02, float),
    "extra_edges": (2, int),
    "seed": (0, int),
}


def cmd_synth(args) -> int:
    args = _merge(args, _SYNTH_KEYS)
    spec = SynthSpec(
        n_nodes=args.n_nodes,
        t_total=args.t_total,
        window=args.window,
        hidden_dim=args.hidden_dim,
        target=args.target,
        active_start=args.active_start,
        active_end=args.active_end,
        burst=args.burst,
        base_level=args.base_level,
        noise=args.noise,
        extra_edges=args.extra_edges,
        seed=args.seed,
    )
    g, weights, truth = synth_instance(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    adjacency = out / "adjacency.csv"
    features = out / "features.csv"
    weights_path = out / "weights.json"
    save_dataset(g, adjacency, features)
    save_weights(weights, weights_path)
    manifest = {
        "planted": truth,
        "interval": [spec.interval.start, spec.interval.end],
        "files": {p.name: _sha256(p) for p in (adjacency, features, weights_path)},
    }
    _write_json(out / "manifest.json", manifest)
    print(f"synth instance written to {out}")
    return 0


# ---------------------------------------------------------------------------
# explain


_EXPLAIN_KEYS = {
    "target": (0, int),
    "num_samples": (1000, int),
    "perturb_prob": (0.2, float),
    "change_threshold": (0.01, float),
    "mode": ("mean-replace", str),
    "rng_seed": (0, int),
    "m": (None, int),
    "max_parents": (3, int),
    "b_threshold": (1400.0, float),
    "auto_threshold": (None, float),
    "raw_threshold": (False, _bool_cast),
    "discovery": ("prune", str),
    "paper_faithful": (False, _bool_cast),
    "header": (False, _bool_cast),
}


def _build_oracle(args, g):
    if getattr(args, "adapter_cmd", None):
        client = AdapterClient(shlex.split(args.adapter_cmd))
        return RemoteOracle(client, g), client
    if not getattr(args, "weights", None):
        raise ValueError("either --weights or --adapter-cmd is required")
    weights = load_weights(args.weights)
    return EmbeddedOracle(weights, normalize_adjacency(g)), None


def _resolve_threshold(args, cands, data):
    """Either the configured value or a factor of the best snapshot gain."""
    if args.auto_threshold is not None:
        series = gain_series(cands, data, raw=args.raw_threshold)
        peak = max((max(s.values()) for s in series.values()), default=0.0)
        return args.auto_threshold * peak
    return args.b_threshold


def _run_discovery(args, cands, data, threshold):
    if args.discovery == "brute":
        return brute_force_discover(cands, data, threshold, raw=args.raw_threshold)
    if args.discovery == "prune":
        return prune_discover(
            cands, data, threshold, raw=args.raw_threshold, paper_faithful=args.paper_faithful
        )
    raise ValueError(f"unknown discovery mode {args.discovery!r}")


def cmd_explain(args) -> int:
    args = _merge(args, _EXPLAIN_KEYS)
    g = load_dataset(args.adjacency, args.features, labels_path=args.labels, header=args.header)
    oracle, client = _build_oracle(args, g)
    try:
        t_s, t_e = args.interval
        interval = TimeWindow(t_s, t_e)
        cfg = PerturbationConfig(
            num_samples=args.num_samples,
            perturb_prob=args.perturb_prob,
            change_threshold=args.change_threshold,
            mode=args.mode,
            rng_seed=args.rng_seed,
        )
        variables = candidate_variables(g, args.target)
        _log(f"candidate variables: {variables}")

        out = Path(args.out)
        (out / "datasets").mkdir(parents=True, exist_ok=True)
        (out / "networks").mkdir(exist_ok=True)
        (out / "candidates").mkdir(exist_ok=True)

        data = generate_temporal_dataset(oracle, g, interval, args.target, variables, cfg)
        dataset_files = {}
        for t in interval.snapshots():
            csv_path = out / "datasets" / f"t{t:04d}.csv"
            meta_path = out / "datasets" / f"t{t:04d}.meta.json"
            save_snapshot_dataset(data.snapshot(t), csv_path, meta_path)
            dataset_files[t] = [csv_path.name, meta_path.name]
        _write_json(
            out / "datasets" / "index.json",
            {
                "interval": [interval.start, interval.end],
                "target": args.target,
                "variables": list(variables),
                "files": {str(t): names for t, names in dataset_files.items()},
            },
        )
        _log(f"perturbation datasets written for {interval.length} snapshots")

        labels = g.node_labels
        entries = []
        seen = set()
        for t in interval.snapshots():
            b = explain_dataset(data.snapshot(t), M=args.m, max_parents=args.max_parents)
            _write_json(out / "networks" / f"snapshot{t:04d}.json", network_to_json(b))
            _write_text(out / "networks" / f"snapshot{t:04d}.dot", to_dot(b, labels))
            key = b.canonical_key()
            if key not in seen:
                seen.add(key)
                entries.append((b, t))
        cands = CandidateSet(entries=tuple(entries))
        for ci, (b, origin) in enumerate(cands.entries):
            _write_json(out / "candidates" / f"cand{ci:02d}.json", network_to_json(b))
            _write_text(out / "candidates" / f"cand{ci:02d}.dot", to_dot(b, labels))
        _log(f"{len(cands)} distinct candidate networks")

        series = gain_series(cands, data, raw=args.raw_threshold)
        gains_rows = [["t"] + [f"cand{ci:02d}" for ci in range(len(cands))]]
        for t in interval.snapshots():
            gains_rows.append([str(t)] + [_FLOAT_FMT % series[ci][t] for ci in range(len(cands))])
        _write_text(out / "gains.csv", "\n".join(",".join(r) for r in gains_rows) + "\n")

        standard = empty_network(variables, args.target)
        std_rows = [["t", "standard_bic"]]
        for t in interval.snapshots():
            std_rows.append([str(t), _FLOAT_FMT % bic_score(standard, data.snapshot(t))])
        _write_text(out / "standard_scores.csv", "\n".join(",".join(r) for r in std_rows) + "\n")

        threshold = _resolve_threshold(args, cands, data)
        result = _run_discovery(args, cands, data, threshold)
        _write_json(
            out / "dominant.json",
            dominant_report(result, threshold, args.discovery, raw=args.raw_threshold),
        )
        _log(
            f"discovery ({args.discovery}): {len(result.records)} records, "
            f"{result.score_evaluations} score evaluations"
        )

        files = sorted(
            p.relative_to(out).as_posix()
            for p in out.rglob("*")
            if p.is_file() and p.name != "manifest.json"
        )
        manifest = {
            "files": {name: _sha256(out / name) for name in files},
            "settings": {
                "target": args.target,
                "interval": [interval.start, interval.end],
                "perturbation": cfg.to_dict(),
                "m": args.m,
                "max_parents": args.max_parents,
                "threshold": threshold,
                "raw_threshold": args.raw_threshold,
                "discovery": args.discovery,
                "paper_faithful": args.paper_faithful,
            },
        }
        _write_json(out / "manifest.json", manifest)
        print(f"explanation written to {out} ({len(result.records)} dominant records)")
        return 0
    finally:
        if client is not None:
            client.close()


# ---------------------------------------------------------------------------
# discover (from saved datasets)


def cmd_discover(args) -> int:
    args = _merge(args, _EXPLAIN_KEYS)
    data_dir = Path(args.data)
    index = json.loads((data_dir / "index.json").read_text())
    interval = TimeWindow(*index["interval"])
    snapshots = {}
    for t_str, (csv_name, meta_name) in index["files"].items():
        t = int(t_str)
        snapshots[t] = load_snapshot_dataset(data_dir / csv_name, data_dir / meta_name)
    data = TemporalDataset(
        interval=interval,
        target=int(index["target"]),
        variables=tuple(index["variables"]),
        snapshots=snapshots,
    )
    cand_dir = Path(args.candidates)
    entries = []
    for path in sorted(cand_dir.glob("*.json")):
        b = network_from_json(json.loads(path.read_text()))
        entries.append((b, b.snapshot if b.snapshot is not None else interval.start))
    cands = CandidateSet(entries=tuple(entries))
    threshold = _resolve_threshold(args, cands, data)
    result = _run_discovery(args, cands, data, threshold)
    report = dominant_report(result, threshold, args.discovery, raw=args.raw_threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, report)
    print(
        f"{len(result.records)} dominant records "
        f"({result.score_evaluations} score evaluations) -> {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# export


def cmd_export(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = None
    if args.labels:
        labels = tuple(
            line.rstrip("\n") for line in Path(args.labels).read_text().splitlines() if line.strip()
        )
    count = 0
    for name in args.networks:
        path = Path(name)
        b = network_from_json(json.loads(path.read_text()))
        _write_text(out_dir / (path.stem + ".dot"), to_dot(b, labels))
        count += 1
    print(f"exported {count} network(s) to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    args = _merge(
        args,
        {
            "num_samples": (200, int),
            "seed": (0, int),
            "b_threshold": (None, float),
            "auto_threshold": (0.6, float),
            "raw_threshold": (False, _bool_cast),
        },
    )
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = [
        [
            "L",
            "n_candidates",
            "brute_score_evaluations",
            "brute_seconds",
            "prune_score_evaluations",
            "prune_seconds",
        ]
    ]
    for L in sizes:
        window = 4
        spec = SynthSpec(
            t_total=L + window - 1,
            window=window,
            active_start=max(0, L // 3),
            active_end=max(0, min(L - 1, (2 * L) // 3)),
            seed=args.seed,
        )
        g, weights, _ = synth_instance(spec)
        oracle = EmbeddedOracle(weights, normalize_adjacency(g))
        cfg = PerturbationConfig(
            num_samples=args.num_samples, rng_seed=args.seed, change_threshold=0.001
        )
        variables = candidate_variables(g, spec.target)
        data = generate_temporal_dataset(oracle, g, spec.interval, spec.target, variables, cfg)
        entries = []
        seen = set()
        for t in spec.interval.snapshots():
            b = explain_dataset(data.snapshot(t))
            key = b.canonical_key()
            if key not in seen:
                seen.add(key)
                entries.append((b, t))
        cands = CandidateSet(entries=tuple(entries))
        if args.b_threshold is not None:
            threshold = args.b_threshold
        else:
            series = gain_series(cands, data, raw=args.raw_threshold)
            peak = max((max(s.values()) for s in series.values()), default=0.0)
            threshold = args.auto_threshold * peak
        t0 = time.perf_counter()
        brute = brute_force_discover(cands, data, threshold, raw=args.raw_threshold)
        t_brute = time.perf_counter() - t0
        t0 = time.perf_counter()
        prune = prune_discover(cands, data, threshold, raw=args.raw_threshold)
        t_prune = time.perf_counter() - t0
        rows.append(
            [
                str(L),
                str(len(cands)),
                str(brute.score_evaluations),
                f"{t_brute:.6f}",
                str(prune.score_evaluations),
                f"{t_prune:.6f}",
            ]
        )
        _log(f"L={L}: brute {brute.score_evaluations} evals, prune {prune.score_evaluations}")
    text = "\n".join(",".join(r) for r in rows) + "\n"
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_text(path, text)
        print(f"benchmark written to {path}")
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# adapter-check


def cmd_adapter_check(args) -> int:
    from .errors import ProtocolError

    g = load_dataset(args.adjacency, args.features)
    weights = load_weights(args.weights)
    a_hat = normalize_adjacency(g)
    try:
        report = run_conformance(
            shlex.split(args.adapter_cmd),
            weights,
            g,
            a_hat,
            tol=args.tol,
            timeout=args.timeout,
        )
    except (ProtocolError, TimeoutError) as exc:
        print(f"adapter conformance: FAIL ({exc})", file=sys.stderr)
        return 1
    print(json.dumps(report, indent=1, sort_keys=True))
    print("adapter conformance: PASS")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tgxplain",
        description="Explain temporal graph model predictions and mine dominant time windows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic instance with planted structure")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    for key in _SYNTH_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", type=_SYNTH_KEYS[key][1], default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("explain", help="run the full explanation pipeline")
    p.add_argument("--config")
    p.add_argument("--adjacency", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels")
    p.add_argument("--weights", help="weights document for the embedded model")
    p.add_argument("--adapter-cmd", help="serve the model via this adapter command instead")
    p.add_argument("--interval", nargs=2, type=int, required=True, metavar=("T_S", "T_E"))
    p.add_argument("--out", required=True)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--num-samples", type=int, default=None)
    p.add_argument("--perturb-prob", type=float, default=None)
    p.add_argument("--change-threshold", type=float, default=None)
    p.add_argument("--mode", choices=("mean-replace", "zero-replace"), default=None)
    p.add_argument("--rng-seed", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--b-threshold", type=float, default=None)
    p.add_argument(
        "--auto-threshold",
        type=float,
        default=None,
        metavar="FACTOR",
        help="set the threshold to FACTOR times the best single-snapshot gain",
    )
    p.add_argument("--raw-threshold", action="store_const", const=True, default=None,
                   help="threshold the raw window score instead of the edge gain")
    p.add_argument("--discovery", choices=("prune", "brute"), default=None)
    p.add_argument("--paper-faithful", action="store_const", const=True, default=None,
                   help="record only the first interesting candidate per window")
    p.add_argument("--header", action="store_const", const=True, default=None,
                   help="CSV inputs carry one header row")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("discover", help="rerun discovery from saved datasets")
    p.add_argument("--config")
    p.add_argument("--data", required=True, help="datasets directory from an explain run")
    p.add_argument("--candidates", required=True, help="directory of candidate network JSONs")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--b-threshold", type=float, default=None)
    p.add_argument("--auto-threshold", type=float, default=None, metavar="FACTOR")
    p.add_argument("--raw-threshold", action="store_const", const=True, default=None)
    p.add_argument("--discovery", choices=("prune", "brute"), default=None)
    p.add_argument("--paper-faithful", action="store_const", const=True, default=None)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("export", help="re-serialize networks to GraphViz DOT")
    p.add_argument("networks", nargs="+", help="canonical network JSON files")
    p.add_argument("--labels")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("bench", help="compare brute force and pruning costs")
    p.add_argument("--config")
    p.add_argument("--sizes", required=True, help="comma-separated interval lengths")
    p.add_argument("--num-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--b-threshold", type=float, default=None)
    p.add_argument("--auto-threshold", type=float, default=None, metavar="FACTOR")
    p.add_argument("--raw-threshold", action="store_const", const=True, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("adapter-check", help="validate an external adapter")
    p.add_argument("--adapter-cmd", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--adjacency", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_adapter_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return 3
    except RangeError as exc:
        print(f"range error: {exc}", file=sys.stderr)
        return 4
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    raise SystemExit(main())
