#!/usr/bin/env python3
"""Perturbation-sensitivity study: current- and voltage-driven foil winding.

Runs both drives on the fine mesh at two step sizes with the perturbed-sine
source and writes CSV traces, SVG plots and a metrics summary.
"""

import argparse
from pathlib import Path

from foilfem.experiments import ExperimentConfig, format_fig4_metrics, load_config, run_fig4


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=str, default=None)
    parser.add_argument("--out", type=str, default="out/fig4")
    args = parser.parse_args()
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    results = run_fig4(cfg, out_dir=Path(args.out))
    print(format_fig4_metrics(results), end="")


if __name__ == "__main__":
    main()
