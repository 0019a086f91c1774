#!/usr/bin/env python3
"""Conductance-variant mesh study: original vs consistent matrix, current drive.

Four runs (two meshes x two conductance variants) at dt = 1e-4 s.  Defaults to
the hat voltage-basis family, whose profiles are not exactly representable on
the mesh and therefore carry a nonzero terminal-level conductance mismatch.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from foilfem.experiments import ExperimentConfig, load_config, run_fig5


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=str, default=None)
    parser.add_argument("--out", type=str, default="out/fig5")
    parser.add_argument("--basis", choices=("legendre", "hat"), default="hat")
    args = parser.parse_args()
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = replace(cfg, basis_family=args.basis)
    results = run_fig5(cfg, out_dir=Path(args.out))
    for name, value in results["discrepancy"].items():
        print(f"{name}: rel RMS discrepancy = {value:.6e}")
    for key, step in results["diverged"].items():
        print(f"diverged[{key}] = {step}")


if __name__ == "__main__":
    main()
