"""Command-line entry points.

Subcommands:
  run     execute a batch run config (file + flag overrides)
  table2  estimated vs simulated improvement table for one model
  fig1    hop-count demo: one ready row drained by both schemes
"""
from __future__ import annotations

import argparse
import sys

from .analytic import AnalyticParams, improvement_pct
from .config import MeshConfig
from .errors import ConfigError, GatherNocError, SimulationError
from .harness import (
    RunConfig,
    load_run_config,
    parse_kv_text,
    run,
    run_config_from_kv,
    simulated_improvement_pct,
)
from .systolic import run_convolution, run_ready_row
from .workload import model_layers

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4


def _parse_mesh(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(x) for x in text.lower().split("x"))
        return rows, cols
    except ValueError:
        raise ConfigError(f"mesh must look like 8x8, got {text!r}") from None


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    kv: dict[str, str] = {}
    if args.mesh:
        rows, cols = _parse_mesh(args.mesh)
        kv["mesh_rows"], kv["mesh_cols"] = str(rows), str(cols)
    if args.model:
        kv["model"] = args.model
    if args.layers:
        kv["layers"] = args.layers
    if args.modes:
        kv["modes"] = args.modes
    if args.seed is not None:
        kv["seed"] = str(args.seed)
    if args.p_override is not None:
        kv["p_override"] = str(args.p_override)
    if args.output:
        kv["output"] = args.output
    if args.format:
        kv["format"] = args.format
    if args.event_log:
        kv["event_log"] = "true"
    if not kv:
        return cfg
    # rebuild through the same path as config files so flags and file keys
    # stay equivalent
    base = {
        "mesh_rows": str(cfg.mesh.rows),
        "mesh_cols": str(cfg.mesh.cols),
        "virtual_channels": str(cfg.mesh.vc_count),
        "buffer_depth": str(cfg.mesh.buffer_depth),
        "flit_bits": str(cfg.mesh.flit_width),
        "unicast_flits": str(cfg.mesh.unicast_len),
        "gather_flits": str(cfg.mesh.gather_len),
        "pipeline_stages": str(cfg.mesh.pipeline_depth),
        "gather_timeout": str(cfg.mesh.gather_timeout),
        "gather_payload_bits": str(cfg.mesh.gather_payload_bits),
        "mac_cycles": str(cfg.mesh.mac_latency),
        "buffer_commit_rate": str(cfg.mesh.buffer_commit_rate),
        "modes": ",".join(cfg.modes),
        "seed": str(cfg.seed),
        "format": cfg.out_format,
        "event_log": str(cfg.event_log).lower(),
    }
    if cfg.mesh.gather_capacity is not None:
        base["gather_capacity"] = str(cfg.mesh.gather_capacity)
    if cfg.p_override is not None:
        base["p_override"] = str(cfg.p_override)
    if cfg.output:
        base["output"] = cfg.output
    models = {m for m, _ in cfg.layers}
    if len(models) == 1:
        base["model"] = next(iter(models))
        base["layers"] = ",".join(l for _, l in cfg.layers)
    base.update(kv)
    rebuilt = run_config_from_kv(base)
    rebuilt.timeout_table = cfg.timeout_table
    rebuilt.coefficients = cfg.coefficients
    return rebuilt


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    cfg = _apply_overrides(cfg, args)
    result = run(cfg)
    sys.stdout.write(result.table_text)
    for path in result.files:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_table2(args: argparse.Namespace) -> int:
    rows, cols = _parse_mesh(args.mesh)
    mesh = MeshConfig(rows=rows, cols=cols)
    layers = model_layers(args.model)
    names = [l.layer for l in layers]
    est = {l.layer: improvement_pct(AnalyticParams.for_run(mesh, l)) for l in layers}
    lines = [f"{args.model} improvement over repetitive unicast (%), {rows}x{cols} mesh"]
    width = max(len(n) for n in names) + 4
    lines.append("result".ljust(12) + "".join(n.rjust(width) for n in names))
    lines.append("estimated".ljust(12) + "".join(f"{est[n]:.2f}".rjust(width) for n in names))
    if args.simulate:
        sim = {}
        for layer in layers:
            ru = run_convolution(layer, mesh, "ru", seed=args.seed, p_override=args.p_override)
            g = run_convolution(layer, mesh, "gather", seed=args.seed, p_override=args.p_override)
            sim[layer.layer] = simulated_improvement_pct(ru, g)
        lines.append("simulated".ljust(12) + "".join(f"{sim[n]:.2f}".rjust(width) for n in names))
    print("\n".join(lines))
    return EXIT_OK


def cmd_fig1(args: argparse.Namespace) -> int:
    mesh = MeshConfig(rows=args.size, cols=args.size)
    row = args.row if args.row is not None else args.size // 2 - 1
    ru = run_ready_row(mesh, row, "ru")
    g = run_ready_row(mesh, row, "gather")
    print(f"{args.size}x{args.size} mesh, row {row} ready, drained to the right-edge buffer")
    print(f"{'scheme':<20}{'packets':>8}{'flits':>8}{'hops':>8}{'cycles':>8}{'energy':>10}")
    print(f"{'repetitive unicast':<20}{ru.packets:>8}{ru.flits:>8}{ru.hops:>8}"
          f"{ru.total_cycles:>8}{ru.energy:>10.1f}")
    print(f"{'gather':<20}{g.packets:>8}{g.flits:>8}{g.hops:>8}"
          f"{g.total_cycles:>8}{g.energy:>10.1f}")
    if args.output:
        from pathlib import Path

        from .harness import emit_csv
        records = []
        for st in (ru, g):
            records.append({
                "model": st.model, "layer": st.layer, "mesh": st.mesh,
                "mode": st.mode, "total_cycles": st.total_cycles,
                "collection_cycles": st.collection_cycles, "hops": st.hops,
                "flits": st.flits, "energy": st.energy, "improvement_pct": "",
            })
        records.append({
            "model": ru.model, "layer": ru.layer, "mesh": ru.mesh,
            "mode": "improvement", "total_cycles": "", "collection_cycles": "",
            "hops": "", "flits": "", "energy": "",
            "improvement_pct": round(
                100.0 * (ru.total_cycles - g.total_cycles) / ru.total_cycles, 2),
        })
        path = Path(args.output).with_suffix(".csv")
        emit_csv(records, path)
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gathernoc",
        description="Mesh NoC simulator comparing gather-packet result "
                    "collection against repetitive unicast",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a batch run config")
    p_run.add_argument("--config", help="flat key=value config file")
    p_run.add_argument("--mesh", help="mesh size, e.g. 8x8")
    p_run.add_argument("--model", help="model name from the layer database")
    p_run.add_argument("--layers", help="comma list of layer names, or 'all'")
    p_run.add_argument("--modes", help="comma subset of ru,gather,analytic")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--p-override", type=int, dest="p_override",
                       help="truncate the per-layer input-vector count")
    p_run.add_argument("--output", help="output path stem for result files")
    p_run.add_argument("--format", choices=("csv", "json"))
    p_run.add_argument("--event-log", action="store_true", dest="event_log")
    p_run.set_defaults(func=cmd_run)

    p_t2 = sub.add_parser("table2", help="estimated vs simulated improvement table")
    p_t2.add_argument("--model", default="alexnet")
    p_t2.add_argument("--mesh", default="8x8")
    p_t2.add_argument("--simulate", action="store_true")
    p_t2.add_argument("--seed", type=int, default=12345)
    p_t2.add_argument("--p-override", type=int, dest="p_override", default=64)
    p_t2.set_defaults(func=cmd_table2)

    p_f1 = sub.add_parser("fig1", help="one-ready-row hop-count demo")
    p_f1.add_argument("--size", type=int, default=6)
    p_f1.add_argument("--row", type=int, default=None)
    p_f1.add_argument("--output", help="also write the rows as CSV")
    p_f1.set_defaults(func=cmd_fig1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation invariant violated: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GatherNocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    raise SystemExit(main())
