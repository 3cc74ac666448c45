"""Operator command line.

Subcommands wire the pipeline end to end: extract raw records, build/merge
the knowledge graph, build and query the retrieval index, generate synthetic
worlds and episodes, run episode suites, and sweep the ablation grid. Every
command is deterministic for a fixed config and seed unless the backend mode
is remote.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 backend error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .backends import MockPlanner, RecordingCassette, RemoteBackend, ReplayCassette
from .backtrack import BacktrackConfig, window_for
from .config import RunConfig, load_config
from .embedding import HashingEmbedder
from .errors import BackendError, ConfigError, EventNavError
from .extraction import load_raw_records, process_records, save_sequences, load_sequences
from .kg import EventGraph, build_graph
from .metrics import MetricsReport, compute_metrics
from .policies import OraclePolicy, noisy_policy
from .retrieval import RetrievalIndex, build_index, query
from .runner import derive_seed, knowledge_graph, run_episode, suite_average_subtask_hops
from .sim import (
    NavGraph,
    generate_episodes,
    generate_world,
    load_episodes,
    save_episodes,
)

REPORT_COLUMNS = ("SR", "NE", "TL", "SPL", "OSR", "GC", "PLWSR", "PLWGC")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BACKEND = 4


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    for attr, key in (("seed", "seed"), ("topk", "topk"), ("x", "backtrack_x"),
                      ("w_multiplier", "w_mult"), ("mode", "mode"), ("jobs", "jobs")):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, attr, value)
    cfg.validate()
    return cfg


def _make_backend(cfg: RunConfig):
    if cfg.mode == "mock":
        backend = MockPlanner()
    elif cfg.mode == "replay":
        backend = ReplayCassette(cfg.cassette)
    else:
        backend = RemoteBackend(cfg.model, url=cfg.endpoint)
    if cfg.record:
        if not cfg.cassette:
            raise ConfigError("backend.record requires paths.cassette")
        backend = RecordingCassette(backend, cfg.cassette)
    return backend


def _policy_factory(cfg: RunConfig, world):
    def make(episode):
        oracle = OraclePolicy(world, episode)
        if cfg.epsilon == 0.0:
            return oracle
        return noisy_policy(oracle, cfg.epsilon, derive_seed(cfg.seed, episode.id))
    return make


def _run_suite(episodes, world, cfg: RunConfig, backend, btcfg: BacktrackConfig,
               kg=None, index=None, use_knowledge=True, planner_enabled=True):
    make_policy = _policy_factory(cfg, world)

    def one(episode):
        return run_episode(
            episode, world, make_policy(episode), backend, btcfg,
            kg=kg, index=index, topk=cfg.topk, use_knowledge=use_knowledge,
            planner_enabled=planner_enabled, max_episode_steps=cfg.max_episode_steps,
        )

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(one, episodes))
    else:
        results = [one(ep) for ep in episodes]
    # report ordering is by episode id regardless of completion order
    return sorted(results, key=lambda r: r.episode_id)


def _format_report(rows: list[tuple[str, MetricsReport]]) -> str:
    lines = ["variant\t" + "\t".join(REPORT_COLUMNS)]
    for label, report in rows:
        values = report.as_row()
        lines.append(label + "\t" + "\t".join(f"{values[c]:.4f}" for c in REPORT_COLUMNS))
    return "\n".join(lines) + "\n"


def _emit_report(rows, path: str | None) -> None:
    text = _format_report(rows)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _write_trajectories(results, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for res in results:
            for rec in res.step_records:
                fh.write(json.dumps(
                    {"episode": res.episode_id, "step": rec.index,
                     "viewpoint": rec.viewpoint, "action": rec.action,
                     "s": rec.s, "r": rec.r, "subtask": rec.subtask},
                    ensure_ascii=False, sort_keys=True, separators=(",", ":"),
                ) + "\n")


# --- subcommands -------------------------------------------------------------

def cmd_extract(args) -> int:
    cfg = load_config(args.config)
    records, line_rejects = load_raw_records(args.infile, dataset=args.dataset)
    sequences, report = process_records(records, mode=args.extraction_mode,
                                        mappings=cfg.mappings)
    for rid, err in line_rejects:
        report.reject(rid, err)
    save_sequences(sequences, args.out)
    summary = {"accepted": report.accepted, "rejected": report.rejected,
               "rejects": [list(r) for r in report.rejects]}
    if args.report:
        Path(args.report).write_text(
            json.dumps(summary, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
    print(f"accepted {report.accepted}, rejected {report.rejected} -> {args.out}")
    return EXIT_OK


def cmd_build_kg(args) -> int:
    if bool(args.infile) == bool(args.from_episodes):
        raise ConfigError("build-kg needs exactly one of --in or --from-episodes")
    if args.infile:
        graph = build_graph(load_sequences(args.infile))
    else:
        episodes = load_episodes(args.from_episodes)
        graph = knowledge_graph(episodes, dataset=args.dataset or "custom")
    graph.save(args.out)
    print(f"kg: {graph.stats().node_count} nodes, {graph.stats().edge_count} edges -> {args.out}")
    return EXIT_OK


def cmd_merge(args) -> int:
    merged = EventGraph()
    for path in args.inputs:
        merged = merged.merge(EventGraph.load(path))
    merged.save(args.out)
    st = merged.stats()
    print(f"merged {len(args.inputs)} graphs: {st.node_count} nodes, "
          f"{st.edge_count} edges -> {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    st = EventGraph.load(args.kg).stats()
    print(json.dumps(
        {"node_count": st.node_count, "edge_count": st.edge_count,
         "sequence_count": st.sequence_count,
         "per_dataset": dict(st.per_dataset)},
        ensure_ascii=False, sort_keys=True))
    return EXIT_OK


def cmd_build_index(args) -> int:
    graph = EventGraph.load(args.kg)
    index = build_index(graph, HashingEmbedder(args.dim))
    index.save(args.out)
    print(f"index: {len(index)} vectors, dim {args.dim} -> {args.out}")
    return EXIT_OK


def cmd_query(args) -> int:
    graph = EventGraph.load(args.kg)
    if args.index:
        index = RetrievalIndex.load(args.index)
    else:
        index = build_index(graph, HashingEmbedder(args.dim))
    hits = query(index, graph, args.text, args.k)
    print(f"{'rank':>4}  {'similarity':>10}  subtask -> successors")
    for rank, hit in enumerate(hits, start=1):
        succs = ", ".join(f"{n.text} (x{w})" for n, w in hit.successors)
        print(f"{rank:>4}  {hit.similarity:>10.6f}  {hit.node.text} -> {succs}")
    for hit in hits:
        print(f"hit\t{hit.node.id}\t{hit.similarity:.9f}\t{hit.node.text}")
        for n, w in hit.successors:
            print(f"succ\t{hit.node.id}\t{n.id}\t{w}\t{n.text}")
    return EXIT_OK


def cmd_gen_world(args) -> int:
    graph = generate_world(args.n, args.radius, seed=args.seed or 0)
    graph.save(args.out)
    print(f"world: {len(graph.viewpoints)} viewpoints, {len(graph.edges())} edges -> {args.out}")
    return EXIT_OK


def cmd_gen_episodes(args) -> int:
    graph = NavGraph.load(args.world)
    episodes = generate_episodes(graph, args.count, seed=args.seed or 0)
    save_episodes(episodes, args.out)
    print(f"episodes: {len(episodes)} -> {args.out}")
    return EXIT_OK


def _load_run_inputs(cfg: RunConfig):
    if not cfg.world or not cfg.episodes:
        raise ConfigError("run needs paths.world and paths.episodes")
    world = NavGraph.load(cfg.world)
    episodes = load_episodes(cfg.episodes)
    kg = index = None
    if cfg.kg:
        kg = EventGraph.load(cfg.kg)
        if cfg.index:
            index = RetrievalIndex.load(cfg.index)
        else:
            index = build_index(kg, HashingEmbedder(cfg.dimension))
    return world, episodes, kg, index


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    world, episodes, kg, index = _load_run_inputs(cfg)
    backend = _make_backend(cfg)
    d_avg = cfg.d_avg if cfg.d_avg is not None else suite_average_subtask_hops(world, episodes)
    btcfg = BacktrackConfig(
        window=window_for(d_avg, cfg.w_multiplier), x=cfg.x,
        max_replans=cfg.max_replans, max_steps=cfg.max_steps_per_subtask,
        enabled=cfg.backtrack_enabled,
    )
    results = _run_suite(episodes, world, cfg, backend, btcfg, kg=kg, index=index,
                         use_knowledge=kg is not None)
    report = compute_metrics(results, episodes, world)
    _emit_report([("run", report)], args.out or cfg.report)
    if cfg.trajectories:
        _write_trajectories(results, cfg.trajectories)
    return EXIT_OK


def _eval_rows(cfg: RunConfig, backend) -> list[tuple[str, MetricsReport]]:
    suites = []
    for s in range(cfg.suites):
        world = generate_world(cfg.world_size, cfg.world_radius,
                               seed=derive_seed(cfg.seed, "world", s))
        episodes = generate_episodes(world, cfg.episodes_per_suite,
                                     seed=derive_seed(cfg.seed, "episodes", s))
        kg = knowledge_graph(episodes, dataset=f"suite{s}")
        suites.append((world, episodes, kg))
    merged = EventGraph()
    for _, _, kg in suites:
        merged = merged.merge(kg)
    embedder = HashingEmbedder(cfg.dimension)
    merged_index = build_index(merged, embedder)
    suite_indexes = [build_index(kg, embedder) for _, _, kg in suites]
    d_avg = sum(suite_average_subtask_hops(w, eps) for w, eps, _ in suites) / len(suites)

    def btcfg(x=cfg.x, w_mult=cfg.w_multiplier, enabled=True):
        return BacktrackConfig(window=window_for(d_avg, w_mult), x=x,
                               max_replans=cfg.max_replans,
                               max_steps=cfg.max_steps_per_subtask, enabled=enabled)

    def cell(label, *, knowledge, planner=True, enabled=False, x=None, w_mult=None):
        all_results, all_episodes, all_worlds = [], [], []
        for s, (world, episodes, kg) in enumerate(suites):
            use_kg, use_index, use_knowledge = None, None, False
            if knowledge == "suite":
                use_kg, use_index, use_knowledge = kg, suite_indexes[s], True
            elif knowledge == "merged":
                use_kg, use_index, use_knowledge = merged, merged_index, True
            results = _run_suite(
                episodes, world, cfg, backend,
                btcfg(x=x if x is not None else cfg.x,
                      w_mult=w_mult if w_mult is not None else cfg.w_multiplier,
                      enabled=enabled),
                kg=use_kg, index=use_index, use_knowledge=use_knowledge,
                planner_enabled=planner,
            )
            report = compute_metrics(results, episodes, world)
            all_results.append((report, len(episodes)))
        total = sum(n for _, n in all_results)
        means = {c: sum(getattr(r, c.lower()) * n for r, n in all_results) / total
                 for c in REPORT_COLUMNS}
        return label, MetricsReport(episodes=total, sr=means["SR"], ne=means["NE"],
                                    tl=means["TL"], spl=means["SPL"], osr=means["OSR"],
                                    gc=means["GC"], plwsr=means["PLWSR"],
                                    plwgc=means["PLWGC"])

    rows = [
        cell("base", knowledge="none", planner=False),
        cell("base+planD", knowledge="none"),
        cell("base+planS", knowledge="suite"),
        cell("base+planF", knowledge="merged"),
        cell("base+planF+backtrace", knowledge="merged", enabled=True),
    ]
    for x in cfg.grid_x:
        for w_mult in cfg.grid_w:
            rows.append(cell(f"grid x={x:g} w={w_mult:g}xDavg", knowledge="merged",
                             enabled=True, x=x, w_mult=w_mult))
    return rows


def cmd_eval(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    backend = _make_backend(cfg)
    rows = _eval_rows(cfg, backend)
    _emit_report(rows, args.out or cfg.report)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eventnav", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"eventnav {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="run config JSON")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--topk", type=int, default=None)
    common.add_argument("--backtrack-x", dest="backtrack_x", type=float, default=None)
    common.add_argument("--w-mult", dest="w_mult", type=float, default=None)
    common.add_argument("--mode", choices=("mock", "replay", "remote"), default=None)
    common.add_argument("--jobs", type=int, default=None)

    p = sub.add_parser("extract", parents=[common], help="raw records -> task sequences")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--extraction-mode", default="auto",
                   choices=("auto", "structured", "heuristic"))
    p.add_argument("--report", default=None, help="write extraction report JSON here")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build-kg", help="task sequences or episodes -> knowledge graph")
    p.add_argument("--in", dest="infile", default=None, help="sequence file from extract")
    p.add_argument("--from-episodes", default=None, help="episode file; uses gt chains")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_kg)

    p = sub.add_parser("merge", help="merge knowledge graphs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("stats", help="print knowledge graph statistics")
    p.add_argument("kg")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build-index", help="embed subtask nodes into an index")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=256)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="top-k similar subtasks with successors")
    p.add_argument("--kg", required=True)
    p.add_argument("--index", default=None)
    p.add_argument("--text", required=True)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--dim", type=int, default=256)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("gen-world", help="generate a synthetic viewpoint world")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--radius", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_world)

    p = sub.add_parser("gen-episodes", help="sample episodes on a world")
    p.add_argument("--world", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_episodes)

    p = sub.add_parser("run", parents=[common], help="run an episode suite")
    p.add_argument("--out", default=None, help="report file (TSV)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", parents=[common],
                       help="ablation variants plus the x/W grid")
    p.add_argument("--out", default=None, help="report file (TSV)")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (EventNavError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
