"""Simulate a campaign and print breakdown, BER and uniqueness summaries."""
import argparse

from puf_forge.metrics import ber, breakdown_probability, inter_fhd_stats
from puf_forge.simulator import BREAKDOWN_RATES, MEASURED_UNSTABLE, SimConfig, run_campaign


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--chips", type=int, default=99)
    args = parser.parse_args()

    plasma = run_campaign(SimConfig(campaign="plasma", chips=args.chips, repeats=1), seed=args.seed)
    stressed = run_campaign(SimConfig(chips=args.chips), seed=args.seed)
    rows_p = breakdown_probability(plasma.bits)
    rows_s = breakdown_probability(stressed.bits)

    print(f"{'tag':<7}{'plasma':>9}{'target':>9}{'stressed':>10}{'target':>9}")
    for tag, (pp, ps) in BREAKDOWN_RATES.items():
        s = rows_s[tag].percent if tag in rows_s else "-"
        ts = f"{100 * ps:.1f}%" if ps is not None else "-"
        print(f"{tag:<7}{rows_p[tag].percent:>9}{100 * pp:>8.1f}%{s:>10}{ts:>9}")

    print("\ncorner     unstable  BER     target")
    for corner in stressed.bits.corners():
        r = ber(stressed.bits, corner)
        print(f"{corner.label():<10} {r.unstable_count:>5}    {r.percent:<7} {MEASURED_UNSTABLE.get(corner, 0)}")

    stats = inter_fhd_stats(stressed.bits)
    print(f"\ninter-FHD mean {stats.mean:.4f}  std {stats.std:.4f}  over {stats.pairs} pairs")


if __name__ == "__main__":
    main()
