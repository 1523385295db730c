"""Guesswork moments, Rényi entropies and related security measures.

All logarithms are base 2. ``rho`` is the guesswork moment order; the
matching Rényi order ``1 / (1 + rho)`` is derived internally, so ``rho=1``
(the average number of guesses) pairs with ``H_{1/2}``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .prob import (
    ENUMERATION_CAP,
    BitPMF,
    JointPMF,
    NoiseChannel,
    ProbabilityError,
    StringPMF,
    as_prob_vector,
    iid_string_pmf,
)

AVERAGE_GUESSWORK_RHO = 1.0


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not rho > 0:
        raise ProbabilityError(f"rho must be > 0, got {rho!r}")
    return rho


def _factor_vectors(pmf) -> list[np.ndarray] | None:
    """Per-bit vectors of a product-form string PMF, else None."""
    if isinstance(pmf, StringPMF) and not pmf.is_explicit:
        return [f.as_array() for f in pmf.factors]
    return None


def _shannon(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0


def _renyi(p: np.ndarray, alpha: float) -> float:
    p = p[p > 0]
    return float(np.log2(np.sum(p**alpha)) / (1.0 - alpha)) + 0.0


def binary_entropy(p: float) -> float:
    """Shannon entropy of a Bernoulli(p) bit."""
    return _shannon(np.array([p, 1.0 - p]))


def shannon_entropy(pmf) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    factors = _factor_vectors(pmf)
    if factors is not None:
        return sum(_shannon(f) for f in factors)
    return _shannon(as_prob_vector(pmf))


def renyi_entropy(pmf, alpha: float) -> float:
    """Rényi entropy of order ``alpha`` (``alpha > 0``, ``alpha != 1``)."""
    alpha = float(alpha)
    if not alpha > 0:
        raise ProbabilityError(f"Rényi order must be > 0, got {alpha!r}")
    if alpha == 1.0:
        raise ProbabilityError("Rényi order 1 is the Shannon entropy; use shannon_entropy")
    factors = _factor_vectors(pmf)
    if factors is not None:
        return sum(_renyi(f, alpha) for f in factors)
    return _renyi(as_prob_vector(pmf), alpha)


def _joint_array(joint) -> np.ndarray:
    if isinstance(joint, JointPMF):
        return joint.probs
    arr = np.asarray(joint, dtype=float)
    if arr.ndim != 2 or np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
        raise ProbabilityError("joint must be a 2-D array of probabilities P[x, y]")
    return arr


def renyi_conditional_entropy(joint, rho: float) -> float:
    """Conditional Rényi entropy ``H_{1/(1+rho)}(X|Y)`` (Arikan's form).

    ``joint[x, y]`` holds ``P(X=x, Y=y)``.
    """
    rho = _check_rho(rho)
    probs = _joint_array(joint)
    alpha = 1.0 / (1.0 + rho)
    inner = np.sum(probs**alpha, axis=0) ** (1.0 + rho)
    return float(np.log2(inner.sum()) / rho) + 0.0


def min_entropy(pmf) -> float:
    """``-log2 max P``; for strings this is the whole-string value."""
    factors = _factor_vectors(pmf)
    if factors is not None:
        return sum(-math.log2(f.max()) for f in factors)
    return -math.log2(as_prob_vector(pmf).max()) + 0.0


def guess1_probability(pmf) -> float:
    """Probability that the first dictionary guess is correct."""
    factors = _factor_vectors(pmf)
    if factors is not None:
        return float(np.prod([f.max() for f in factors]))
    return float(as_prob_vector(pmf).max())


def mutual_information(joint) -> float:
    probs = _joint_array(joint)
    px = probs.sum(axis=1, keepdims=True)
    py = probs.sum(axis=0, keepdims=True)
    mask = probs > 0
    ratio = probs[mask] / (px * py)[mask]
    return max(float(np.sum(probs[mask] * np.log2(ratio))), 0.0)


# -- exact guesswork by enumeration -------------------------------------------


def dictionary_order(probs: np.ndarray) -> np.ndarray:
    """Outcome indices in guessing order: descending probability, ties by index."""
    return np.argsort(-np.asarray(probs), kind="stable")


def dictionary_ranks(probs: np.ndarray) -> np.ndarray:
    """1-based guess number of every outcome under dictionary order."""
    order = dictionary_order(probs)
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    return ranks


def _explicit_probs(pmf) -> np.ndarray:
    if isinstance(pmf, StringPMF):
        if pmf.m > ENUMERATION_CAP:
            raise ProbabilityError(
                f"m={pmf.m} is above the enumeration cap; use guesswork_growth_rate"
            )
        return pmf.materialize()
    return as_prob_vector(pmf)


def guesswork_moment_exact(pmf, rho: float) -> float:
    """``E[G^rho]`` for the optimal (dictionary) guessing order."""
    rho = _check_rho(rho)
    probs = _explicit_probs(pmf)
    sorted_p = np.sort(probs)[::-1]
    ranks = np.arange(1, len(sorted_p) + 1, dtype=float)
    return float(np.sum(ranks**rho * sorted_p))


def conditional_guesswork_moment_exact(joint, rho: float) -> float:
    """``E[G(X|Y)^rho]``: for each observation y, guess x by descending P(x|y).

    ``joint[x, y]`` may be a :class:`JointPMF` or any 2-D array of
    probabilities. Columns with ``P(Y=y) = 0`` contribute nothing.
    """
    rho = _check_rho(rho)
    probs = _joint_array(joint)
    # Sorting P(x, y) within a column is the same order as sorting P(x | y).
    sorted_cols = -np.sort(-probs, axis=0)
    ranks = np.arange(1, probs.shape[0] + 1, dtype=float)[:, None]
    return float(np.sum(ranks**rho * sorted_cols))


def iid_pair_joint(joint: JointPMF, m: int) -> np.ndarray:
    """Joint of (X-string, Y-string) for ``m`` i.i.d. copies of a bit pair."""
    if m > ENUMERATION_CAP // 2:
        raise ProbabilityError(f"m={m} is too large for an explicit pair joint")
    out = np.ones((1, 1))
    for _ in range(m):
        out = np.kron(out, joint.probs)
    return out


@lru_cache(maxsize=8)
def _rank_power_cumsum(n: int, rho: float) -> np.ndarray:
    ranks = np.arange(0, n + 1, dtype=float)
    return np.cumsum(ranks**rho)


def _normalize_bias(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ProbabilityError(f"bias must lie in [0, 1], got {p!r}")
    return min(p, 1.0 - p)


def posterior_class_probs(p: float, eps: float, m: int, w: int) -> np.ndarray:
    """``P(x, y)`` for one candidate of each class, given a weight-``w`` observation y.

    Entry ``[j, l]`` is a candidate that drops ``j`` of y's ones and sets
    ``l`` of y's zeros.
    """
    j = np.arange(w + 1)[:, None]
    l = np.arange(m - w + 1)[None, :]
    weight_x = (w - j) + l
    dist = j + l
    logp = _xlogy(weight_x, p) + _xlogy(m - weight_x, 1 - p)
    logp = logp + _xlogy(dist, eps) + _xlogy(m - dist, 1 - eps)
    return np.exp(logp)


def noisy_posterior_groups(p: float, eps: float, m: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Guess-order groups for the posterior attacker seeing a weight-``w`` observation.

    Returns per-group probability ``P(x, y)`` of one member and member
    counts, by descending probability, with exactly tied classes merged.
    """
    probs = posterior_class_probs(p, eps, m, w).ravel()
    counts = (np.array([math.comb(w, a) for a in range(w + 1)])[:, None]
              * np.array([math.comb(m - w, b) for b in range(m - w + 1)])[None, :]).ravel()
    order = np.argsort(-probs, kind="stable")
    probs, counts = probs[order], counts[order].astype(np.int64)
    uniq, start = np.unique(-probs, return_index=True)
    merged = np.add.reduceat(counts, start)
    return -uniq, merged


def _xlogy(k, q: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if q == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    return k * math.log(q)


def noisy_guesswork_moment_exact(p: float, eps: float, m: int, rho: float = 1.0) -> float:
    """Exact ``E[G(X|Y)^rho]`` for i.i.d. Bernoulli(p) strings seen through BSC(eps).

    Enumerates weight classes rather than strings, so it costs O(m^3) instead
    of O(4^m); agrees with :func:`conditional_guesswork_moment_exact` on the
    explicit pair joint.
    """
    rho = _check_rho(rho)
    if m < 1 or m > ENUMERATION_CAP:
        raise ProbabilityError(f"m must be in 1..{ENUMERATION_CAP}")
    csum = _rank_power_cumsum(2**m, rho)
    total = 0.0
    for w in range(m + 1):
        probs, counts = noisy_posterior_groups(p, eps, m, w)
        ends = np.cumsum(counts)
        starts = ends - counts
        total += math.comb(m, w) * float(np.sum(probs * (csum[ends] - csum[starts])))
    return total


# -- asymptotic forms ---------------------------------------------------------


def guesswork_growth_rate(pmf, rho: float = 1.0) -> float:
    """Per-symbol exponent ``rho * H_{1/(1+rho)}`` of optimal guesswork.

    A :class:`JointPMF` (or 2-D array) gives the conditional form
    ``rho * H_{1/(1+rho)}(X|Y)``; anything else is treated as the symbol PMF.
    """
    rho = _check_rho(rho)
    if isinstance(pmf, JointPMF) or (isinstance(pmf, np.ndarray) and pmf.ndim == 2):
        return rho * renyi_conditional_entropy(pmf, rho)
    return rho * renyi_entropy(pmf, 1.0 / (1.0 + rho))


def noisy_guesswork_exponent(p: float | BitPMF, noise: float | NoiseChannel, rho: float = 1.0) -> float:
    """``max(rho*H_{1/(1+rho)}(X) - rho*H(N), 0)`` for a noisy biased response.

    Biases above 1/2 are folded to ``1 - p``; the entropies are symmetric so
    the value is unchanged.
    """
    rho = _check_rho(rho)
    p1 = _normalize_bias(p.p1 if isinstance(p, BitPMF) else p)
    eps = noise.eps if isinstance(noise, NoiseChannel) else NoiseChannel(noise).eps
    value = rho * renyi_entropy(BitPMF(p1), 1.0 / (1.0 + rho)) - rho * binary_entropy(eps)
    return max(value, 0.0)


def effective_bits(p: float, eps: float, n: int) -> float:
    """Exponent of the average guesswork of an ``n``-bit noisy biased response."""
    if n < 1:
        raise ProbabilityError("response length must be >= 1")
    return noisy_guesswork_exponent(p, eps, rho=AVERAGE_GUESSWORK_RHO) * n


def guesswork_distance(joint, rho: float = 1.0) -> float:
    """Relative loss of guesswork exponent when X is guessed knowing Y.

    0 means independent, 1 means Y determines X. Raises when X is
    deterministic, since the ratio is then undefined.
    """
    rho = _check_rho(rho)
    probs = _joint_array(joint)
    alpha = 1.0 / (1.0 + rho)
    h_x = _renyi(probs.sum(axis=1), alpha)
    if h_x <= 1e-15:
        raise ProbabilityError("distance undefined: X has zero entropy")
    h_xy = renyi_conditional_entropy(probs, rho)
    return float(min(max((h_x - h_xy) / h_x, 0.0), 1.0))


@dataclass(frozen=True)
class GuessworkReport:
    rho: float
    bias: float
    noise: float
    n: int
    exponent: float
    effective_bits: float
    exact_moment: float | None = None

    def __post_init__(self):
        if self.exponent < 0 or self.effective_bits < 0:
            raise ProbabilityError("exponent and effective bits must be nonnegative")
        if self.exact_moment is not None and self.exact_moment < 1:
            raise ProbabilityError("a guesswork moment is at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


def guesswork_report(p: float, eps: float, n: int, rho: float = 1.0,
                     exact_cap: int = 20) -> GuessworkReport:
    """Bundle the asymptotic exponent with the exact moment when it is cheap.

    The exact moment is only filled in for a noiseless source short enough to
    enumerate (``n <= exact_cap``).
    """
    exponent = noisy_guesswork_exponent(p, eps, rho)
    exact = None
    if eps == 0 and n <= exact_cap:
        exact = guesswork_moment_exact(iid_string_pmf(_normalize_bias(p), n), rho)
    return GuessworkReport(
        rho=float(rho), bias=float(p), noise=float(eps), n=int(n),
        exponent=exponent, effective_bits=exponent * n, exact_moment=exact,
    )
