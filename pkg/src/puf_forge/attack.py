"""Empirical dictionary attacks, used to check the exact and asymptotic guesswork."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .guesswork import dictionary_ranks, noisy_posterior_groups, posterior_class_probs
from .prob import (
    ENUMERATION_CAP,
    BitPMF,
    NoiseChannel,
    ProbabilityError,
    StringPMF,
    string_to_index,
)


@dataclass
class AttackResult:
    trials: int
    rho: float
    mean_guesses: float
    moment_rho: float
    moment_stderr: float
    success_curve: list[tuple[int, float]] = field(default_factory=list)
    m: int | None = None

    def __post_init__(self):
        probs = [p for _, p in self.success_curve]
        if self.mean_guesses < 1:
            raise ValueError("mean guesses must be >= 1")
        if any(b < a for a, b in zip(probs, probs[1:])) or (probs and probs[-1] > 1 + 1e-12):
            raise ValueError("success curve must be nondecreasing and end at most at 1")

    @property
    def exponent(self) -> float | None:
        """Empirical per-bit exponent ``log2(mean guesses) / m``."""
        if self.m is None:
            return None
        return math.log2(self.mean_guesses) / self.m

    def to_dict(self) -> dict:
        return {
            "trials": self.trials, "rho": self.rho, "m": self.m,
            "mean_guesses": self.mean_guesses, "moment_rho": self.moment_rho,
            "moment_stderr": self.moment_stderr, "exponent": self.exponent,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def curve_csv(self) -> str:
        return curve_to_csv(self.success_curve)


def curve_to_csv(curve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "probability"])
    for k, p in curve:
        writer.writerow([int(k), repr(float(p))])
    return buf.getvalue()


def _probs(pmf: StringPMF) -> np.ndarray:
    if pmf.m > ENUMERATION_CAP:
        raise ProbabilityError(
            f"m={pmf.m} is above the enumeration cap; use guesswork_growth_rate for the exponent")
    return pmf.materialize()


def guess_rank(pmf: StringPMF, secret) -> int:
    """Guess number at which a dictionary attacker hits ``secret``."""
    index = string_to_index(secret, pmf.m)
    return int(dictionary_ranks(_probs(pmf))[index])


def success_within(pmf: StringPMF, k: int) -> float:
    """Probability that the dictionary attack succeeds within ``k`` guesses."""
    probs = _probs(pmf)
    if not 0 <= k <= len(probs):
        raise ValueError(f"k must lie in 0..{len(probs)}")
    return min(float(np.sort(probs)[::-1][:k].sum()), 1.0)


def success_curve_exact(pmf: StringPMF) -> list[tuple[int, float]]:
    cum = np.minimum(np.cumsum(np.sort(_probs(pmf))[::-1]), 1.0)
    return [(k + 1, float(p)) for k, p in enumerate(cum)]


def _empirical_curve(ranks: np.ndarray) -> list[tuple[int, float]]:
    values, counts = np.unique(ranks, return_counts=True)
    cum = np.cumsum(counts) / len(ranks)
    return [(int(v), float(c)) for v, c in zip(values, cum)]


def _result(ranks: np.ndarray, rho: float, m: int | None) -> AttackResult:
    powered = ranks.astype(float) ** rho
    trials = len(ranks)
    stderr = float(powered.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return AttackResult(trials, float(rho), float(ranks.mean()), float(powered.mean()), stderr,
                        _empirical_curve(ranks), m)


def simulate_attack(pmf: StringPMF, trials: int, seed: int = 0, rho: float = 1.0) -> AttackResult:
    """Draw secrets from ``pmf`` and record the dictionary-attack guess count."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    probs = _probs(pmf)
    ranks = dictionary_ranks(probs)
    rng = np.random.default_rng(seed)
    secrets = rng.choice(len(probs), size=trials, p=probs / probs.sum())
    return _result(ranks[secrets], rho, pmf.m)


def simulate_noisy_attack(source: float | BitPMF, m: int, channel: float | NoiseChannel,
                          trials: int, seed: int = 0, rho: float = 1.0) -> AttackResult:
    """Attacker sees ``y = x xor noise`` and guesses x by descending ``P(x | y)``.

    Candidates are grouped by how they differ from y, so no 2^m list is
    built. Within a group of equally likely candidates the secret is
    uniformly placed, which is how a fixed tie-break order sees it too.
    """
    p = source.p1 if isinstance(source, BitPMF) else BitPMF(source).p1
    eps = channel.eps if isinstance(channel, NoiseChannel) else NoiseChannel(channel).eps
    if not 1 <= m <= ENUMERATION_CAP:
        raise ProbabilityError(f"m must lie in 1..{ENUMERATION_CAP}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.random((trials, m)) < p
    noise = rng.random((trials, m)) < eps
    y = x ^ noise
    w = y.sum(axis=1)
    dropped = (y & ~x).sum(axis=1)  # ones of y that x does not have
    added = (x & ~y).sum(axis=1)  # ones of x where y is zero
    tie_u = rng.random(trials)

    ranks = np.empty(trials, dtype=np.int64)
    for weight in np.unique(w):
        probs, counts = noisy_posterior_groups(p, eps, m, int(weight))
        # Map each (j, l) class to its merged tie group.
        class_probs = posterior_class_probs(p, eps, m, int(weight))
        group_of = np.searchsorted(-probs, -class_probs, side="left")
        ends = np.cumsum(counts)
        starts = ends - counts
        sel = np.nonzero(w == weight)[0]
        g = group_of[dropped[sel], added[sel]]
        ranks[sel] = starts[g] + 1 + np.floor(tie_u[sel] * counts[g]).astype(np.int64)
    return _result(ranks, rho, m)

