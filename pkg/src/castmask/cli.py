"""Command-line entry point.

Subcommands: ``validate`` (check a scene script), ``build-mask`` (compile a
scene into an SDMR recipe artifact), ``simulate`` (toy-harness leak and
isolation reports, optionally a gamma sweep), ``eval`` (query generation,
oracle voting, metric report).  Exit codes: 0 success, 1 validation/domain
error, 2 I/O or transport error.

Option precedence is flag > config file > default.  The config file uses the
same JSON style as scene scripts; oracle endpoints and parallelism may also
come from ``CASTMASK_ENDPOINTS`` (comma-separated targets) and
``CASTMASK_PARALLELISM``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .attention import (
    DEFAULT_D_MODEL,
    DEFAULT_GAMMA,
    GAMMA_SWEEP,
    build_recipe,
    directional_mass,
)
from .artifacts import write_recipe
from .errors import CastmaskError, SceneSpecError, TransportError
from .evaluation import (
    aggregate_runs,
    compute_metrics,
    generate_queries,
    load_annotations,
)
from .geometry import (
    DEFAULT_EXPANSION_RATIO,
    DEFAULT_SPATIAL_FACTOR,
    DEFAULT_TEMPORAL_FACTOR,
)
from .harness import init_toy_model, instance_embeddings, isolation_probe, leakage_report, run_stack
from .oracle import EvalStats, OracleEndpoint, assemble_votes, run_queries
from .pipeline import compile_scene
from .scene import canonical_dumps, load_scene_spec, parse_scene_spec

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2

DEFAULT_ENDPOINT_TARGETS = ("mock:gt", "mock:gt", "mock:gt")


@dataclass(frozen=True)
class RunConfig:
    """Run-level knobs; defaults mirror the shipped configuration."""

    gamma: float = DEFAULT_GAMMA
    d_model: int = DEFAULT_D_MODEL
    expansion_ratio: float = DEFAULT_EXPANSION_RATIO
    spatial_factor: int = DEFAULT_SPATIAL_FACTOR
    temporal_factor: int = DEFAULT_TEMPORAL_FACTOR
    seeds: tuple[int, ...] = (1,)
    endpoints: tuple[str, ...] = DEFAULT_ENDPOINT_TARGETS
    parallelism: int = 4

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0 <= self.expansion_ratio < 1:
            raise ValueError("expansion ratio must be in [0, 1)")
        if not self.seeds:
            raise ValueError("need at least one seed")


_CONFIG_KEYS = {
    "gamma": float,
    "d_model": int,
    "expansion_ratio": float,
    "spatial_factor": int,
    "temporal_factor": int,
    "parallelism": int,
}


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        updates = {k: conv(raw[k]) for k, conv in _CONFIG_KEYS.items() if k in raw}
        if "seeds" in raw:
            updates["seeds"] = tuple(int(s) for s in raw["seeds"])
        if "endpoints" in raw:
            updates["endpoints"] = tuple(str(e) for e in raw["endpoints"])
        cfg = replace(cfg, **updates)
    env_endpoints = os.environ.get("CASTMASK_ENDPOINTS")
    if env_endpoints:
        cfg = replace(cfg, endpoints=tuple(t.strip() for t in env_endpoints.split(",") if t.strip()))
    env_par = os.environ.get("CASTMASK_PARALLELISM")
    if env_par:
        cfg = replace(cfg, parallelism=int(env_par))
    updates = {}
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            updates[key] = value
    if getattr(args, "seeds", None):
        updates["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if getattr(args, "endpoints", None):
        updates["endpoints"] = tuple(t.strip() for t in args.endpoints.split(","))
    return replace(cfg, **updates)


class _Manifest:
    """Every artifact a command writes, recorded under the run directory."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.entries: dict[str, str] = {}
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str, role: str) -> Path:
        self.entries[role] = name
        return self.out_dir / name

    def write(self) -> None:
        with open(self.out_dir / "manifest.json", "w", encoding="utf-8") as fh:
            fh.write(canonical_dumps(self.entries))


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            document = fh.read()
    except OSError as exc:
        print(f"error: cannot read {args.spec}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        spec = parse_scene_spec(document)
    except SceneSpecError as exc:
        for path, msg in exc.diagnostics:
            print(f"{path}: {msg}")
        return EXIT_DOMAIN
    print(f"OK ({len(spec.persons)} persons, {len(spec.events)} events)")
    return EXIT_OK


def cmd_build_mask(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    try:
        spec = load_scene_spec(args.spec)
    except OSError as exc:
        print(f"error: cannot read {args.spec}: {exc}", file=sys.stderr)
        return EXIT_IO
    except SceneSpecError as exc:
        print(f"invalid scene spec: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        compiled = compile_scene(
            spec,
            gamma=cfg.gamma,
            d_model=cfg.d_model,
            spatial_factor=cfg.spatial_factor,
            temporal_factor=cfg.temporal_factor,
            expansion_ratio=cfg.expansion_ratio,
        )
    except CastmaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    manifest = _Manifest(Path(args.out_dir))
    write_recipe(compiled.recipe, compiled.layout, manifest.path("recipe.sdmr", "recipe"))
    summary = {
        "gamma": cfg.gamma,
        "bias_magnitude": compiled.recipe.bias_magnitude,
        "d_model": cfg.d_model,
        "expansion_ratio": cfg.expansion_ratio,
        "grid": [compiled.grid.t_lat, compiled.grid.h_lat, compiled.grid.w_lat],
        "n_text_tokens": compiled.spans.n_text_tokens,
        "background_tokens": len(compiled.spans.background),
        "events": [
            {
                "actor": s,
                "event": k,
                "region_cells": len(compiled.regions[(s, k)].indices),
                "event_tokens": len(compiled.spans.per_event[(s, k)]),
                "directional_tokens": len(compiled.spans.directional.get((s, k), frozenset())),
            }
            for s, k in sorted(compiled.regions)
        ],
    }
    with open(manifest.path("summary.json", "summary"), "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(summary))
    manifest.write()
    print(f"recipe written to {manifest.out_dir / 'recipe.sdmr'}")
    print(f"gamma={cfg.gamma} bias={compiled.recipe.bias_magnitude} "
          f"grid={compiled.grid.t_lat}x{compiled.grid.h_lat}x{compiled.grid.w_lat} "
          f"tokens={compiled.spans.n_text_tokens}")
    for entry in summary["events"]:
        print(f"  event (s={entry['actor']}, k={entry['event']}): "
              f"{entry['region_cells']} cells, {entry['event_tokens']} tokens, "
              f"{entry['directional_tokens']} directional")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    try:
        spec = load_scene_spec(args.spec)
    except OSError as exc:
        print(f"error: cannot read {args.spec}: {exc}", file=sys.stderr)
        return EXIT_IO
    except SceneSpecError as exc:
        print(f"invalid scene spec: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    compiled = compile_scene(
        spec,
        gamma=cfg.gamma,
        d_model=cfg.d_model,
        spatial_factor=cfg.spatial_factor,
        temporal_factor=cfg.temporal_factor,
        expansion_ratio=cfg.expansion_ratio,
    )
    recipe = compiled.recipe
    seed = cfg.seeds[0]
    model = init_toy_model(seed, cfg.d_model, args.layers)
    visual, text = instance_embeddings(
        seed + 1, recipe.n_visual, recipe.n_text, cfg.d_model
    )

    report: dict = {"seed": seed, "layers": args.layers, "gamma": cfg.gamma}
    if not args.no_mask:
        _, attns = run_stack(model, visual, text, recipe)
        masked_leak = leakage_report(attns, recipe)
        report["masked"] = {
            "total_leak": masked_leak.total_leak,
            "per_row_max": masked_leak.per_row_max,
        }
        rng = np.random.default_rng(seed)
        probes = {}
        for key in sorted(recipe.regions):
            delta = rng.normal(scale=0.5, size=cfg.d_model)
            probes[f"{key[0]},{key[1]}"] = isolation_probe(
                model, visual, text, recipe, key, delta
            )
        report["masked"]["isolation_max_delta"] = probes
        print(f"masked total_leak = {masked_leak.total_leak}")

    _, plain_attns = run_stack(model, visual, text, None)
    unmasked_leak = leakage_report(plain_attns, recipe)
    report["unmasked"] = {
        "total_leak": unmasked_leak.total_leak,
        "per_row_max": unmasked_leak.per_row_max,
        "per_event": {f"{s},{k}": v for (s, k), v in sorted(unmasked_leak.per_event_leak.items())},
    }
    print(f"unmasked total_leak = {unmasked_leak.total_leak:.6f}")

    if args.gamma_sweep:
        grid_values = [float(v) for v in args.gamma_sweep.split(",")]
        sweep = {}
        directed = [k for k in sorted(recipe.regions) if recipe.spans.directional.get(k)]
        for gamma in grid_values:
            swept = build_recipe(
                spans=recipe.spans, regions=recipe.regions, grid=recipe.grid,
                gamma=gamma, d_model=recipe.d_model,
            )
            _, attns = run_stack(model, visual, text, swept)
            sweep[repr(gamma)] = {
                f"{s},{k}": float(
                    np.mean([directional_mass(a, swept, s, k) for a in attns])
                )
                for s, k in directed
            }
        report["gamma_sweep"] = sweep
        for key in directed:
            masses = [sweep[repr(g)][f"{key[0]},{key[1]}"] for g in grid_values]
            print(f"directional mass (s={key[0]}, k={key[1]}): "
                  + " ".join(f"{g}:{m:.4f}" for g, m in zip(grid_values, masses)))

    manifest = _Manifest(Path(args.out_dir))
    with open(manifest.path("simulate_report.json", "report"), "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(report))
    manifest.write()
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    try:
        annotations = load_annotations(args.annotations)
    except OSError as exc:
        print(f"error: cannot read {args.annotations}: {exc}", file=sys.stderr)
        return EXIT_IO
    except SceneSpecError as exc:
        print(f"invalid annotations: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if len(cfg.endpoints) != 3:
        print(f"error: exactly 3 oracle endpoints required, got {len(cfg.endpoints)}", file=sys.stderr)
        return EXIT_DOMAIN
    endpoints = [
        OracleEndpoint(name=f"oracle-{i + 1}", target=target)
        for i, target in enumerate(cfg.endpoints)
    ]
    oracle_names = tuple(ep.name for ep in endpoints)
    queries = generate_queries(annotations)
    media_refs = {c.clip_id: c.media_ref for c in annotations.clips}

    manifest = _Manifest(Path(args.out_dir))
    with open(manifest.path("queries.jsonl", "queries"), "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(q.to_record() + "\n")

    reports = []
    per_seed = []
    for seed in cfg.seeds:
        log_path = manifest.path(f"votes_seed{seed}.jsonl", f"votes_seed{seed}")
        try:
            records, stats = run_queries(
                queries, media_refs, endpoints, log_path,
                parallelism=cfg.parallelism, run_seed=seed,
            )
        except TransportError as exc:
            manifest.write()
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        vote_stats = EvalStats()
        votes = assemble_votes(queries, records, endpoints, vote_stats)
        report = compute_metrics(queries, votes, oracle_names, unparseable=vote_stats.unparseable)
        reports.append(report)
        per_seed.append({"seed": seed, **report.to_obj()})
        print(f"[seed {seed}]")
        print(report.to_table())

    aggregate = aggregate_runs(reports)
    final = {
        "per_seed": per_seed,
        "aggregate": {
            metric: {"mean": mean, "std": std} for metric, (mean, std) in aggregate.items()
        },
        "endpoints": [ep.target for ep in endpoints],
    }
    with open(manifest.path("report.json", "report"), "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(final))
    manifest.write()
    print("aggregate (mean +/- std over seeds):")
    for metric, (mean, std) in aggregate.items():
        print(f"  {metric:<10} {mean:.1f} +/- {std:.1f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="castmask")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (same style as scene scripts)")
        p.add_argument("--gamma", type=float, default=None, help="reweighting strength (default 0.5)")
        p.add_argument("--d-model", dest="d_model", type=int, default=None)
        p.add_argument("--expansion-ratio", dest="expansion_ratio", type=float, default=None,
                       help="box expansion per side (default 0.15)")
        p.add_argument("--spatial-factor", dest="spatial_factor", type=int, default=None)
        p.add_argument("--temporal-factor", dest="temporal_factor", type=int, default=None)
        p.add_argument("--seeds", default=None, help="comma-separated seed list")

    p = sub.add_parser("validate", help="validate a scene script")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-mask", help="compile a scene script into a recipe artifact")
    p.add_argument("spec")
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_build_mask)

    p = sub.add_parser("simulate", help="run the toy harness and report leak/isolation")
    p.add_argument("spec")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--no-mask", action="store_true", help="skip the masked run")
    p.add_argument("--gamma-sweep", dest="gamma_sweep", default=None,
                   help=f"comma-separated gammas, e.g. {','.join(str(g) for g in GAMMA_SWEEP)}")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="generate queries, ask oracles, report metrics")
    p.add_argument("annotations")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--endpoints", default=None,
                   help="comma-separated oracle targets (exactly 3), e.g. mock:gt,mock:gt,mock:gt")
    p.add_argument("--parallelism", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CastmaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
