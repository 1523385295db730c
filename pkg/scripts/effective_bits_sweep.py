"""Effective key bits of a 128-bit unbiased response versus read-noise level."""
import argparse
import csv
import sys

import numpy as np

from puf_forge.guesswork import effective_bits


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=128)
    parser.add_argument("--bias", type=float, default=0.5)
    parser.add_argument("--step", type=float, default=0.01)
    args = parser.parse_args()

    levels = sorted(set(np.round(np.arange(0, 0.5 + 1e-9, args.step), 6).tolist()) | {0.0012, 0.15})
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["noise", "effective_bits"])
    for eps in levels:
        writer.writerow([eps, f"{effective_bits(args.bias, eps, args.n):.3f}"])


if __name__ == "__main__":
    main()
