"""Finite-length guesswork exponents against their asymptotic values.

Prints log2(E[G]) / m for a noiseless biased source and for the posterior
attacker on a noisy fair source, next to the limiting exponents.
"""
import argparse
import math

from puf_forge.guesswork import (
    guesswork_growth_rate,
    guesswork_moment_exact,
    noisy_guesswork_exponent,
    noisy_guesswork_moment_exact,
    renyi_conditional_entropy,
)
from puf_forge.prob import BitPMF, bsc_joint, iid_string_pmf


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--bias", type=float, default=0.3)
    parser.add_argument("--noise", type=float, default=0.1)
    parser.add_argument("--max-m", type=int, default=20)
    args = parser.parse_args()

    clean_limit = guesswork_growth_rate(BitPMF(args.bias))
    posterior_limit = renyi_conditional_entropy(bsc_joint(0.5, args.noise), 1.0)
    print(f"noiseless limit {clean_limit:.5f}; posterior limit {posterior_limit:.5f}; "
          f"noisy-response exponent {noisy_guesswork_exponent(0.5, args.noise):.5f}")
    print(" m  noiseless  posterior")
    for m in range(2, args.max_m + 1):
        clean = math.log2(guesswork_moment_exact(iid_string_pmf(args.bias, m), 1.0)) / m
        noisy = math.log2(noisy_guesswork_moment_exact(0.5, args.noise, m)) / m
        print(f"{m:>2}  {clean:.5f}    {noisy:.5f}")


if __name__ == "__main__":
    main()
