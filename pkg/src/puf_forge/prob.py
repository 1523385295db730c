"""Probability mass functions over bits, bit pairs and short bit-strings.

Strings of length ``m`` are indexed by their integer value with the first bit
as the most significant one, so ``"01"`` is index 1 and ``"10"`` is index 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ENUMERATION_CAP = 24
JOINT_TOL = 1e-12
STRING_TOL = 1e-9


class ProbabilityError(ValueError):
    """Raised when a PMF is malformed or an operation is out of its domain."""


@dataclass(frozen=True)
class BitPMF:
    """Bernoulli distribution, parametrised by the probability of a 1."""

    p1: float

    def __post_init__(self):
        p1 = float(self.p1)
        if not (0.0 <= p1 <= 1.0) or np.isnan(p1):
            raise ProbabilityError(f"p1 must lie in [0, 1], got {self.p1!r}")
        object.__setattr__(self, "p1", p1)

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1])


@dataclass(frozen=True)
class NoiseChannel:
    """Binary symmetric channel flipping each bit with probability ``eps``."""

    eps: float

    def __post_init__(self):
        eps = float(self.eps)
        if not (0.0 <= eps <= 0.5) or np.isnan(eps):
            raise ProbabilityError(f"eps must lie in [0, 0.5], got {self.eps!r}")
        object.__setattr__(self, "eps", eps)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JointPMF:
    """Joint distribution of two bits; ``probs[x, y] = P(X=x, Y=y)``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.shape != (2, 2):
            raise ProbabilityError(f"joint PMF must be 2x2, got shape {probs.shape}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ProbabilityError("joint PMF has negative or non-finite entries")
        if abs(probs.sum() - 1.0) > JOINT_TOL:
            raise ProbabilityError(f"joint PMF sums to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other):
        return isinstance(other, JointPMF) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True, eq=False)
class StringPMF:
    """Distribution over ``m``-bit strings.

    Either ``probs`` (explicit, length ``2**m``) or ``factors`` (one
    :class:`BitPMF` per position, product form) is given. Product-form PMFs
    can be materialised while ``m`` stays within the enumeration cap.
    """

    m: int
    probs: np.ndarray | None = None
    factors: tuple[BitPMF, ...] | None = field(default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ProbabilityError("string length m must be >= 1")
        if (self.probs is None) == (self.factors is None):
            raise ProbabilityError("give exactly one of probs or factors")
        if self.probs is not None:
            if self.m > ENUMERATION_CAP:
                raise ProbabilityError(
                    f"m={self.m} exceeds the enumeration cap {ENUMERATION_CAP}; "
                    "use a product-form descriptor"
                )
            probs = _frozen(self.probs)
            if probs.shape != (2**self.m,):
                raise ProbabilityError(f"expected {2**self.m} probabilities, got {probs.shape}")
            if np.any(probs < 0) or not np.all(np.isfinite(probs)):
                raise ProbabilityError("string PMF has negative or non-finite entries")
            if abs(probs.sum() - 1.0) > STRING_TOL:
                raise ProbabilityError(f"string PMF sums to {probs.sum()!r}, not 1")
            object.__setattr__(self, "probs", probs)
        else:
            factors = tuple(self.factors)
            if len(factors) != self.m:
                raise ProbabilityError("need one factor per bit position")
            object.__setattr__(self, "factors", factors)

    @property
    def is_explicit(self) -> bool:
        return self.probs is not None

    @property
    def size(self) -> int:
        return 2**self.m

    def materialize(self, cap: int = ENUMERATION_CAP) -> np.ndarray:
        """Return the explicit probability vector, building it if needed."""
        if self.probs is not None:
            return self.probs
        if self.m > cap:
            raise ProbabilityError(
                f"m={self.m} exceeds the enumeration cap {cap}; use the asymptotic API"
            )
        p1 = np.array([f.p1 for f in self.factors])
        if np.all(p1 == p1[0]):
            return _iid_vector(p1[0], self.m)
        probs = np.ones(1)
        for p in p1:
            probs = np.outer(probs, [1.0 - p, p]).ravel()
        return probs

    def explicit(self, cap: int = ENUMERATION_CAP) -> "StringPMF":
        if self.is_explicit:
            return self
        return StringPMF(self.m, probs=self.materialize(cap))

    def __eq__(self, other):
        if not isinstance(other, StringPMF) or other.m != self.m:
            return False
        if self.is_explicit and other.is_explicit:
            return np.array_equal(self.probs, other.probs)
        return self.factors == other.factors


def estimate_joint(counts, smoothing: float = 0.0) -> JointPMF:
    """Relative-frequency estimate of a 2x2 joint from co-occurrence counts.

    ``smoothing`` adds a pseudo-count to every cell before normalising; the
    default of zero gives the plain maximum-likelihood estimate.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (2, 2):
        raise ProbabilityError(f"counts must be 2x2, got shape {counts.shape}")
    if np.any(counts < 0):
        raise ProbabilityError("counts must be nonnegative")
    if smoothing < 0:
        raise ProbabilityError("smoothing must be nonnegative")
    if counts.sum() == 0:
        raise ProbabilityError("empty sample")
    counts = counts + smoothing
    return JointPMF(counts / counts.sum())


def joint_counts(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """2x2 co-occurrence counts of two equally long bit columns."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ProbabilityError("columns must have equal length")
    return np.bincount(2 * x + y, minlength=4).reshape(2, 2)


def marginals(joint: JointPMF) -> tuple[BitPMF, BitPMF]:
    probs = joint.probs
    px1 = probs[1, 0] + probs[1, 1]
    py1 = probs[0, 1] + probs[1, 1]
    return BitPMF(min(px1, 1.0)), BitPMF(min(py1, 1.0))


def product_joint(px: BitPMF, py: BitPMF) -> JointPMF:
    return JointPMF(np.outer(px.as_array(), py.as_array()))


def bsc_joint(p: float | BitPMF, eps: float | NoiseChannel) -> JointPMF:
    """Per-bit joint of a Bernoulli source X and its noisy copy Y = X xor N."""
    p1 = p.p1 if isinstance(p, BitPMF) else float(p)
    e = eps.eps if isinstance(eps, NoiseChannel) else float(eps)
    px = np.array([1.0 - p1, p1])
    channel = np.array([[1.0 - e, e], [e, 1.0 - e]])
    return JointPMF(px[:, None] * channel)


def popcount(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.uint64)
    counts = np.zeros(values.shape, dtype=np.int64)
    while np.any(values):
        counts += (values & np.uint64(1)).astype(np.int64)
        values = values >> np.uint64(1)
    return counts


def _iid_vector(p1: float, m: int) -> np.ndarray:
    # Probabilities depend only on the weight, so equal-weight strings tie exactly.
    weights = popcount(np.arange(2**m, dtype=np.uint64))
    k = np.arange(m + 1)
    per_weight = p1**k * (1.0 - p1) ** (m - k)
    return per_weight[weights]


def iid_string_pmf(
    p: float | BitPMF, m: int, explicit: bool = True, cap: int = ENUMERATION_CAP
) -> StringPMF:
    """PMF of ``m`` i.i.d. Bernoulli bits."""
    bit = p if isinstance(p, BitPMF) else BitPMF(p)
    if m < 1:
        raise ProbabilityError("string length m must be >= 1")
    if not explicit:
        return StringPMF(m, factors=(bit,) * m)
    if m > cap:
        raise ProbabilityError(
            f"m={m} exceeds the enumeration cap {cap}; request a product-form descriptor"
        )
    return StringPMF(m, probs=_iid_vector(bit.p1, m))


def string_to_index(bits: str | Sequence[int] | int, m: int) -> int:
    """Index of a bit-string; accepts ``"0110"``, a bit sequence, or an int."""
    if isinstance(bits, (int, np.integer)):
        value = int(bits)
        if not 0 <= value < 2**m:
            raise ProbabilityError(f"value {value} out of range for m={m}")
        return value
    if isinstance(bits, str):
        seq = [int(c) for c in bits]
    else:
        seq = [int(b) for b in bits]
    if len(seq) != m:
        raise ProbabilityError(f"secret has length {len(seq)}, expected {m}")
    if any(b not in (0, 1) for b in seq):
        raise ProbabilityError("secret must be binary")
    value = 0
    for b in seq:
        value = (value << 1) | b
    return value


def index_to_string(index: int, m: int) -> str:
    return format(index, f"0{m}b")


def as_prob_vector(pmf) -> np.ndarray:
    """Flat probability vector for any supported PMF-like input."""
    if isinstance(pmf, BitPMF):
        return pmf.as_array()
    if isinstance(pmf, JointPMF):
        return pmf.probs.ravel()
    if isinstance(pmf, StringPMF):
        return pmf.materialize()
    arr = np.asarray(pmf, dtype=float).ravel()
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > STRING_TOL:
        raise ProbabilityError("not a probability vector")
    return arr
