#!/usr/bin/env python3
"""Element-classification report for both conductance variants.

Prints kind, terminal inductance or resistance-like strength, the conductance
mismatch norms and a three-level refinement trend.
"""

import argparse
from dataclasses import replace

from foilfem.experiments import ExperimentConfig, load_config, run_classify


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=str, default=None)
    parser.add_argument("--basis", choices=("legendre", "hat"), default="hat")
    parser.add_argument("--mesh-level", type=int, default=0, dest="mesh_level")
    args = parser.parse_args()
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = replace(cfg, basis_family=args.basis, mesh_level=args.mesh_level)
    print(run_classify(cfg), end="")


if __name__ == "__main__":
    main()
