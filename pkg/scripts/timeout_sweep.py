#!/usr/bin/env python3
"""Compare gather collection under different per-node give-up policies.

A flat budget makes distant nodes give up before a row gather can reach
them (the head needs pipeline_stages cycles per hop), splitting a row into
many small packets; the default distance staircase keeps one packet per
row.  Prints packets, timeout launches, flits, hops, and collection cycles
per policy for a one-round run.
"""
import argparse

from gathernoc.config import MeshConfig, default_timeout_table, flat_timeout_table
from gathernoc.systolic import run_convolution
from gathernoc.workload import LayerConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=8)
    parser.add_argument("--flat", default="2,5,10,20,40",
                        help="comma list of flat budgets to sweep")
    parser.add_argument("--seed", type=int, default=12345)
    args = parser.parse_args()

    mesh = MeshConfig(rows=args.size, cols=args.size)
    layer = LayerConfig(model="sweep", layer="one-round", in_channels=3,
                        kernel_side=3, kernels=mesh.cols, layer_side=1,
                        input_vectors=mesh.rows)

    policies = [("staircase (default)", default_timeout_table(mesh))]
    for value in (int(v) for v in args.flat.split(",")):
        policies.append((f"flat {value}", flat_timeout_table(mesh, value)))

    print(f"{args.size}x{args.size} mesh, one round, gather collection")
    print(f"{'policy':<22}{'packets':>8}{'timeouts':>9}{'flits':>7}{'hops':>7}{'cycles':>8}")
    for name, table in policies:
        stats = run_convolution(layer, mesh, "gather", seed=args.seed,
                                timeout_table=table)
        print(f"{name:<22}{stats.packets:>8}{stats.timeout_packets:>9}"
              f"{stats.flits:>7}{stats.hops:>7}{stats.per_round_collection[0]:>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
