#!/usr/bin/env python3
"""Lumped-inductor demonstrations.

Voltage-driven: implicit Euler converges first order to the closed-form
current.  Current-driven with a perturbed source: the output voltage noise
sits at the backward-difference level L * 2 * eps / dt.
"""

import argparse

from foilfem.experiments import ExperimentConfig, demo_inductor, load_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=str, default=None)
    args = parser.parse_args()
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    print(demo_inductor(cfg), end="")


if __name__ == "__main__":
    main()
