"""Command-line frontend: simulate, analyze, subgraph, report.

``analyze`` runs the stage-one sweep over an event file and writes p-value
records, per-period anomaly sets, whole-network diagnostics and a manifest
that fully reproduces the run.  ``subgraph`` performs the stage-two spectral
analysis around the flagged nodes of one period.  All outputs are plain CSV
so they can be plotted directly.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import date
from pathlib import Path

from . import __version__
from .ingest import (
    DAY_SECONDS,
    MalformedInputError,
    equalized_day_bins,
    discretize,
    fixed_width_scheme,
    parse_events,
)
from .models import clear_caches
from .simulate import Injection, ScenarioConfig, simulate
from .spectral import build_anomaly_subgraph, embed_graph, kmeans_cluster
from .tracker import (
    NetworkTracker,
    TrackerConfig,
    flag_anomalies,
    subject_text,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

PVALUE_COLUMNS = ("mode", "scope", "subject", "period", "p", "direction", "model")
DIAG_COLUMNS = ("period", "dN", "N", "Lambda", "M", "Var", "band_lo", "band_hi", "out_of_band")


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class _RunDir:
    """Tracks files created during a run so failures leave nothing behind."""

    def __init__(self, root: Path):
        self.root = root
        self.created: list[Path] = []

    def open_csv(self, rel: str, header):
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(path, "w", newline="", encoding="utf-8")
        self.created.append(path)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        return fh, writer

    def write_json(self, rel: str, payload) -> None:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.created.append(path)

    def cleanup(self) -> None:
        for path in self.created:
            try:
                path.unlink()
            except OSError:
                pass


# -- shared option plumbing ---------------------------------------------------


def _parse_prior(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"prior must be 'a,b', got {text!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad prior {text!r}: {exc}") from None
    if a <= 0 or b <= 0:
        raise ConfigError(f"prior parameters must be positive: {text}")
    return a, b


def _load_config_file(path: str) -> dict:
    """Flat key = value lines mirroring the long flags; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no} is not 'key = value': {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merged_options(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """Start from hard defaults, overlay config-file values, then CLI flags."""
    merged = dict(parser_defaults)
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
        unknown = set(file_values) - set(parser_defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    for key in parser_defaults:
        cli_value = getattr(args, key)
        if cli_value is not None:
            merged[key] = cli_value
    return merged


def _period_scheme(spec: str, origin: float, events):
    if spec == "day":
        return fixed_width_scheme(DAY_SECONDS, origin)
    if spec == "week":
        return fixed_width_scheme(7 * DAY_SECONDS, origin)
    if spec.startswith("width:"):
        try:
            width = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad period width in {spec!r}") from None
        if width <= 0:
            raise ConfigError("period width must be positive")
        return fixed_width_scheme(width, origin)
    if spec.startswith("equalized:"):
        try:
            m = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad bin count in {spec!r}") from None
        if m < 1:
            raise ConfigError("equalized bin count must be at least 1")
        try:
            return equalized_day_bins(events, m, origin)
        except ValueError as exc:
            raise DataError(str(exc)) from None
    raise ConfigError(f"unknown period spec {spec!r}")


# -- simulate ------------------------------------------------------------------


def _parse_injection(text: str) -> Injection:
    try:
        kind, _, rest = text.partition(":")
        params: dict = {}
        if rest:
            for item in rest.split(","):
                key, _, value = item.partition("=")
                params[key.strip()] = value.strip()
        kwargs: dict = {
            "kind": kind,
            "start": int(params.pop("start")),
            "end": int(params.pop("end")),
        }
        if "pair" in params:
            a, _, b = params.pop("pair").partition("-")
            kwargs["pair"] = (int(a), int(b))
        if "factor" in params:
            kwargs["factor"] = float(params.pop("factor"))
        if "nodes" in params:
            kwargs["nodes"] = tuple(int(v) for v in params.pop("nodes").split("+"))
        if "rate" in params:
            kwargs["rate"] = float(params.pop("rate"))
        if "categories" in params:
            kwargs["categories"] = tuple(params.pop("categories").split("+"))
        if params:
            raise ValueError(f"unknown injection parameters {sorted(params)}")
        return Injection(**kwargs)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad injection {text!r}: {exc}") from None


def _parse_activity(text: str):
    if text == "none":
        return None
    kind, _, rest = text.partition(":")
    try:
        if kind == "bernoulli":
            return ("bernoulli", float(rest))
        if kind == "markov":
            phi, psi = rest.split(",")
            return ("markov", float(phi), float(psi))
    except ValueError:
        pass
    raise ConfigError(f"bad activity spec {text!r}")


def _parse_magnitude(text: str):
    kind, _, rest = text.partition(":")
    try:
        if kind in ("poisson", "geometric"):
            return (kind, float(rest))
    except ValueError:
        pass
    raise ConfigError(f"bad magnitude spec {text!r}")


def _cmd_simulate(args) -> int:
    if args.pairs == "all":
        pairs = "all"
    elif args.pairs == "disjoint":
        if args.nodes % 2:
            raise ConfigError("disjoint pairing needs an even node count")
        pairs = [(2 * i, 2 * i + 1) for i in range(args.nodes // 2)]
    else:
        raise ConfigError(f"unknown pair universe {args.pairs!r}")
    try:
        cfg = ScenarioConfig(
            nodes=args.nodes,
            periods=args.periods,
            activity=_parse_activity(args.activity),
            magnitude=_parse_magnitude(args.magnitude),
            pairs=pairs,
            directed=args.directed,
            towers=args.towers,
            seed=args.seed,
            injections=tuple(_parse_injection(t) for t in args.inject or ()),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    events, truth = simulate(cfg)

    out = Path(args.out_events)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for ev in events:
            if args.format == "call-record":
                writer.writerow(
                    [_fmt(ev.timestamp), ev.src, ev.dst, _fmt(ev.duration or 0.0), ev.category or "0"]
                )
            else:
                day = date.fromordinal(date(1970, 1, 1).toordinal() + int(ev.timestamp // DAY_SECONDS))
                writer.writerow([day.isoformat(), ev.src, ev.dst])
    if args.out_truth:
        payload = truth.to_json_dict()
        payload["config"] = {
            "nodes": cfg.nodes,
            "periods": cfg.periods,
            "activity": cfg.activity,
            "magnitude": cfg.magnitude,
            "directed": cfg.directed,
            "towers": cfg.towers,
            "seed": cfg.seed,
        }
        Path(args.out_truth).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"wrote {len(events)} events over {cfg.periods} periods to {out}")
    return EXIT_OK


# -- analyze -------------------------------------------------------------------

ANALYZE_DEFAULTS = {
    "input": None,
    "format": "call-record",
    "period": "day",
    "origin": "0",
    "header": "false",
    "directed": None,
    "binary_pairs": "false",
    "pair_model": "hurdle-pg",
    "node_model": "hurdle-pg",
    "total_model": "hurdle-pg",
    "activity_prior": "1,1",
    "pair_prior": "0.1,0.1",
    "node_prior": "0.1,0.1",
    "total_prior": "0.1,0.01",
    "dp_mass": "1.0",
    "threshold": "0.05",
    "mode": "sequential",
    "scopes": "pair,node,total",
    "node_origin": "start",
    "threads": "1",
    "seed": "0",
}


def _to_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if str(value).lower() in ("true", "1", "yes"):
        return True
    if str(value).lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def _analyze_config(opts: dict) -> dict:
    if not opts["input"]:
        raise ConfigError("analyze needs --input")
    threshold = float(opts["threshold"])
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1): {threshold}")
    mode = opts["mode"]
    if mode not in ("sequential", "retrospective", "both"):
        raise ConfigError(f"unknown mode {mode!r}")
    scopes = frozenset(s.strip() for s in str(opts["scopes"]).split(",") if s.strip())
    bad = scopes - {"pair", "node", "total"}
    if bad:
        raise ConfigError(f"unknown scopes {sorted(bad)}")
    if opts["format"] not in ("call-record", "undirected-list"):
        raise ConfigError(f"unknown format {opts['format']!r}")
    if opts["node_origin"] not in ("start", "first-seen"):
        raise ConfigError(f"unknown node origin {opts['node_origin']!r}")
    directed = opts["directed"]
    if directed is None:
        directed = opts["format"] == "call-record"
    else:
        directed = _to_bool(directed)
    threads = int(opts["threads"])
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return {
        "input": str(opts["input"]),
        "format": opts["format"],
        "period": str(opts["period"]),
        "origin": float(opts["origin"]),
        "header": _to_bool(opts["header"]),
        "directed": directed,
        "binary_pairs": _to_bool(opts["binary_pairs"]),
        "pair_model": opts["pair_model"],
        "node_model": opts["node_model"],
        "total_model": opts["total_model"],
        "activity_prior": _parse_prior(str(opts["activity_prior"])),
        "pair_prior": _parse_prior(str(opts["pair_prior"])),
        "node_prior": _parse_prior(str(opts["node_prior"])),
        "total_prior": _parse_prior(str(opts["total_prior"])),
        "dp_mass": float(opts["dp_mass"]),
        "threshold": threshold,
        "mode": mode,
        "scopes": sorted(scopes),
        "node_origin": opts["node_origin"],
        "threads": threads,
        "seed": int(opts["seed"]),
    }


def build_tracker(config: dict) -> NetworkTracker:
    def priors(prior_key):
        return {
            "activity_prior": config["activity_prior"],
            "magnitude_prior": config[prior_key],
            "dp_mass": config["dp_mass"],
        }

    tracker_config = TrackerConfig(
        directed=config["directed"],
        binary_pairs=config["binary_pairs"],
        scopes=frozenset(config["scopes"]),
        pair_model=config["pair_model"],
        node_model=config["node_model"],
        total_model=config["total_model"],
        pair_priors=priors("pair_prior"),
        node_priors=priors("node_prior"),
        total_priors=priors("total_prior"),
        retain_history=config["mode"] in ("retrospective", "both"),
        backdate_new_subjects=config["node_origin"] == "start",
        threads=config["threads"],
    )
    return NetworkTracker(tracker_config)


def run_analyze(config: dict, out_dir: Path) -> dict:
    """Execute the full stage-one sweep; returns summary counts."""
    clear_caches()
    try:
        result = parse_events(
            config["input"], config["format"], header=config["header"]
        )
    except OSError as exc:
        raise DataError(f"cannot read {config['input']}: {exc}") from None
    except MalformedInputError as exc:
        raise DataError(str(exc)) from None
    if not result.events:
        raise DataError(f"no events parsed from {config['input']}")
    scheme = _period_scheme(config["period"], config["origin"], result.events)
    try:
        period_groups = discretize(result.events, scheme)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    tracker = build_tracker(config)
    run = _RunDir(out_dir)
    try:
        fh, writer = run.open_csv("pvalues.csv", PVALUE_COLUMNS)
        anomaly_rows: list[tuple] = []
        with fh:
            for index, group in enumerate(period_groups):
                records = tracker.ingest_period(group, period=index + 1)
                if config["mode"] in ("sequential", "both"):
                    for rec in records:
                        writer.writerow(_record_row(rec))
                    for t, nodes in flag_anomalies(records, config["threshold"]).items():
                        anomaly_rows.extend(
                            ("sequential", t, str(n)) for n in sorted(nodes, key=str)
                        )
            if config["mode"] in ("retrospective", "both"):
                retro = tracker.retrospective_all()
                for rec in retro:
                    writer.writerow(_record_row(rec))
                for t, nodes in sorted(
                    flag_anomalies(retro, config["threshold"]).items()
                ):
                    anomaly_rows.extend(
                        ("retrospective", t, str(n)) for n in sorted(nodes, key=str)
                    )
        fh2, writer2 = run.open_csv("anomalies.csv", ("mode", "period", "node"))
        with fh2:
            for row in anomaly_rows:
                writer2.writerow(row)
        for name, path in tracker.diagnostics.items():
            fh3, writer3 = run.open_csv(f"diagnostics/{'total' if name == '__network__' else name}.csv", DIAG_COLUMNS)
            with fh3:
                for row in path.rows():
                    writer3.writerow([_fmt(v) for v in row])
        manifest = {
            "command": "analyze",
            "version": __version__,
            "config": config,
            "periods": len(period_groups),
            "parse_errors": len(result.errors),
            "self_loops_dropped": tracker.self_loop_count,
            "outputs": sorted(str(p.relative_to(out_dir)) for p in run.created)
            + ["manifest.json"],
        }
        run.write_json("manifest.json", manifest)
    except Exception:
        run.cleanup()
        raise
    return {"periods": len(period_groups), "anomaly_rows": len(anomaly_rows)}


def _record_row(rec) -> tuple:
    return (
        rec.mode,
        rec.scope,
        subject_text(rec.scope, rec.subject),
        rec.period,
        repr(rec.p),
        rec.direction,
        rec.model,
    )


def _cmd_analyze(args, parser_defaults) -> int:
    opts = _merged_options(args, parser_defaults)
    config = _analyze_config(opts)
    out_dir = Path(args.out_dir)
    summary = run_analyze(config, out_dir)
    print(
        f"analyzed {summary['periods']} periods; "
        f"{summary['anomaly_rows']} anomaly rows -> {out_dir}"
    )
    return EXIT_OK


# -- subgraph ------------------------------------------------------------------


class _PairCountStore:
    """Minimal count source for build_anomaly_subgraph."""

    def __init__(self, period_groups, directed: bool, binary: bool, upto: int):
        from .tracker import aggregate_counts

        self.period = min(upto, len(period_groups))
        self._totals: dict = {}
        self._per_period: list[dict] = []
        for group in period_groups[: self.period]:
            clean = [e for e in group if e.src != e.dst]
            pair_inc, _, _, _ = aggregate_counts(clean, directed=directed, binary_pairs=binary)
            self._per_period.append(pair_inc)
            for key, dn in pair_inc.items():
                self._totals[key] = self._totals.get(key, 0) + dn

    def pair_totals(self) -> dict:
        return dict(self._totals)

    def pair_counts_in_window(self, start: int, end: int) -> dict:
        out: dict = {}
        for t in range(max(start, 1), min(end, self.period) + 1):
            for key, dn in self._per_period[t - 1].items():
                out[key] = out.get(key, 0) + dn
        return out


def _cmd_subgraph(args) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest at {manifest_path}; run analyze first")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    config = manifest["config"]
    period = args.period
    if period < 1 or period > manifest["periods"]:
        raise ConfigError(f"period {period} outside 1..{manifest['periods']}")
    if args.components < 1:
        raise ConfigError("need at least one embedding component")

    anomalies_path = run_dir / "anomalies.csv"
    if not anomalies_path.exists():
        raise DataError(f"missing {anomalies_path}")
    flagged: list[str] = []
    with open(anomalies_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["mode"] == "sequential" and int(row["period"]) == period:
                flagged.append(row["node"])

    run = _RunDir(run_dir)
    try:
        if not flagged:
            fh, _w = run.open_csv("subgraph/edges.csv", ("a", "b", "weight"))
            fh.close()
            fh, _w = run.open_csv("subgraph/embedding.csv", ("node", "cluster"))
            fh.close()
            print(f"no anomalies at period {period}; wrote empty subgraph", file=sys.stderr)
            return EXIT_OK

        result = parse_events(config["input"], config["format"], header=config["header"])
        scheme = _period_scheme(config["period"], config["origin"], result.events)
        period_groups = discretize(result.events, scheme)
        store = _PairCountStore(
            period_groups, config["directed"], config["binary_pairs"], upto=period
        )
        graph = build_anomaly_subgraph(store, flagged, rule=args.rule)

        fh, writer = run.open_csv("subgraph/edges.csv", ("a", "b", "weight"))
        with fh:
            for i, a in enumerate(graph.nodes):
                for j in range(i + 1, graph.size):
                    w = graph.weights[i, j]
                    if w > 0:
                        writer.writerow([a, graph.nodes[j], _fmt(float(w))])

        coord_header = ["node"] + [f"x{i+1}" for i in range(args.components)] + ["cluster"]
        fh, writer = run.open_csv("subgraph/embedding.csv", coord_header)
        with fh:
            embedding = None
            if graph.size > args.components:
                try:
                    embedding = embed_graph(graph, args.components)
                except ValueError:
                    embedding = None
            if embedding is not None:
                labels = kmeans_cluster(embedding, min(args.clusters, len(embedding.nodes)))
                for node, coords, label in zip(
                    embedding.nodes, embedding.coordinates, labels
                ):
                    writer.writerow([node] + [repr(float(x)) for x in coords] + [label])
                if embedding.isolated:
                    fh2, writer2 = run.open_csv("subgraph/isolated.csv", ("node",))
                    with fh2:
                        for node in embedding.isolated:
                            writer2.writerow([node])
            else:
                print(
                    f"subgraph too small for {args.components} components; "
                    "wrote nodes without coordinates",
                    file=sys.stderr,
                )
                for node in graph.nodes:
                    writer.writerow([node] + [""] * args.components + [0])
        print(f"subgraph over {graph.size} nodes -> {run_dir / 'subgraph'}")
    except Exception:
        run.cleanup()
        raise
    return EXIT_OK


# -- report --------------------------------------------------------------------


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    pvalues_path = run_dir / "pvalues.csv"
    if not pvalues_path.exists():
        raise DataError(f"missing {pvalues_path}")
    per_period: dict[int, int] = {}
    worst: list[tuple] = []
    with open(pvalues_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["mode"] != "sequential":
                continue
            p = float(row["p"])
            t = int(row["period"])
            worst.append((p, t, row["scope"], row["subject"], row["direction"]))
    worst.sort()
    anomalies_path = run_dir / "anomalies.csv"
    if anomalies_path.exists():
        with open(anomalies_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row["mode"] == "sequential":
                    t = int(row["period"])
                    per_period[t] = per_period.get(t, 0) + 1
    print("anomalous nodes per period:")
    for t in sorted(per_period):
        print(f"  period {t:>4}: {'#' * min(per_period[t], 60)} ({per_period[t]})")
    if not per_period:
        print("  (none)")
    print(f"\nlowest sequential p-values (top {args.top}):")
    for p, t, scope, subject, direction in worst[: args.top]:
        print(f"  p={p:.6g}  period={t}  {scope}  {subject}  ({direction})")
    return EXIT_OK


# -- entry ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphwatch",
        description="Streaming anomaly detection for dynamic communication networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic scenario")
    sim.add_argument("--nodes", type=int, required=True)
    sim.add_argument("--periods", type=int, required=True)
    sim.add_argument("--activity", default="bernoulli:0.1")
    sim.add_argument("--magnitude", default="poisson:1.0")
    sim.add_argument("--pairs", default="all", help="'all' or 'disjoint'")
    sim.add_argument("--directed", action="store_true")
    sim.add_argument("--towers", type=int, default=0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--inject", action="append", metavar="SPEC")
    sim.add_argument("--format", choices=("call-record", "undirected-list"), default="call-record")
    sim.add_argument("--out-events", required=True)
    sim.add_argument("--out-truth", default=None)

    ana = sub.add_parser("analyze", help="stage-one sweep over an event file")
    ana.add_argument("--config", default=None, help="flat key=value defaults file")
    for key in ANALYZE_DEFAULTS:
        ana.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
    ana.add_argument("--out-dir", required=True)

    sg = sub.add_parser("subgraph", help="stage-two spectral analysis of one period")
    sg.add_argument("--run-dir", required=True)
    sg.add_argument("--period", type=int, required=True)
    sg.add_argument("--rule", default="ever", help="'ever' or 'recent:W'")
    sg.add_argument("--components", type=int, default=2)
    sg.add_argument("--clusters", type=int, default=2)

    rep = sub.add_parser("report", help="summarize an analyze run")
    rep.add_argument("--run-dir", required=True)
    rep.add_argument("--top", type=int, default=10)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "analyze":
            return _cmd_analyze(args, ANALYZE_DEFAULTS)
        if args.command == "subgraph":
            return _cmd_subgraph(args)
        if args.command == "report":
            return _cmd_report(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
