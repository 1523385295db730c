"""Statistical distances and the pairwise bit-independence report."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import TYPE_CHECKING

import numpy as np

from .guesswork import guesswork_distance
from .prob import (
    ProbabilityError,
    as_prob_vector,
    estimate_joint,
    joint_counts,
    marginals,
    product_joint,
)

if TYPE_CHECKING:
    from .metrics import BitMatrix

PAIRINGS = ("adjacent", "same_antenna_ratio")
REPORT_COLUMNS = ("pair_id", "loc_a", "loc_b", "kl_bits", "tvd", "gw")


def _pair_vectors(p, q) -> tuple[np.ndarray, np.ndarray]:
    pv, qv = as_prob_vector(p), as_prob_vector(q)
    if pv.shape != qv.shape:
        raise ProbabilityError("distributions must have the same shape")
    return pv, qv


def kl_divergence(p, q) -> float:
    """``D(P || Q)`` in bits; ``math.inf`` when P puts mass where Q has none."""
    pv, qv = _pair_vectors(p, q)
    mask = pv > 0
    if np.any(qv[mask] == 0):
        return math.inf
    return max(float(np.sum(pv[mask] * np.log2(pv[mask] / qv[mask]))), 0.0)


def total_variation(p, q) -> float:
    pv, qv = _pair_vectors(p, q)
    return min(0.5 * float(np.abs(pv - qv).sum()), 1.0)


@dataclass(frozen=True)
class PairRow:
    pair_id: int
    loc_a: int
    loc_b: int
    kl_bits: float
    tvd: float
    gw: float | None  # None when X is constant across chips


@dataclass(frozen=True)
class Summary:
    max: float
    min: float
    mean: float
    count: int


def _summarize(values: list[float]) -> Summary | None:
    finite = [v for v in values if v is not None and math.isfinite(v)]
    if not finite:
        return None
    return Summary(max(finite), min(finite), float(np.mean(finite)), len(finite))


@dataclass
class IndependenceReport:
    pairing: str
    rows: list[PairRow]
    rho: float = 1.0
    summary: dict[str, Summary | None] = field(init=False)

    def __post_init__(self):
        self.summary = {
            "kl": _summarize([r.kl_bits for r in self.rows]),
            "tvd": _summarize([r.tvd for r in self.rows]),
            "gw": _summarize([r.gw for r in self.rows]),
        }

    def to_dict(self) -> dict:
        return {
            "pairing": self.pairing,
            "rho": self.rho,
            "rows": [_json_row(r) for r in self.rows],
            "summary": {k: (asdict(v) if v else None) for k, v in self.summary.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in self.rows:
            writer.writerow([r.pair_id, r.loc_a, r.loc_b, repr(r.kl_bits), repr(r.tvd),
                             "undefined" if r.gw is None else repr(r.gw)])
        return buf.getvalue()


def _json_row(row: PairRow) -> dict:
    out = asdict(row)
    if math.isinf(row.kl_bits):
        out["kl_bits"] = "inf"
    if row.gw is None:
        out["gw"] = "undefined"
    return out


def location_pairs(antenna_classes: list[str], adjacency: list[int], pairing: str) -> list[tuple[int, int]]:
    """Column pairs to compare under a pairing rule.

    ``adjacent`` pairs neighbours in adjacency-index order;
    ``same_antenna_ratio`` pairs every two locations sharing a class.
    """
    if pairing == "adjacent":
        order = sorted(range(len(adjacency)), key=lambda i: (adjacency[i], i))
        return [(a, b) for a, b in zip(order, order[1:])]
    if pairing == "same_antenna_ratio":
        groups: dict[str, list[int]] = {}
        for i, cls in enumerate(antenna_classes):
            groups.setdefault(cls, []).append(i)
        pairs = [pair for locs in groups.values() for pair in combinations(locs, 2)]
        return sorted(pairs)
    raise ValueError(f"unknown pairing {pairing!r}; expected one of {PAIRINGS}")


def pair_distances(x: np.ndarray, y: np.ndarray, rho: float = 1.0,
                   smoothing: float = 0.0) -> tuple[float, float, float | None]:
    """KL, TVD and guesswork distance between the empirical joint and its marginal product."""
    joint = estimate_joint(joint_counts(x, y), smoothing=smoothing)
    px, py = marginals(joint)
    prod = product_joint(px, py)
    kl = kl_divergence(joint, prod)
    tvd = total_variation(joint, prod)
    try:
        gw = guesswork_distance(joint, rho)
    except ProbabilityError:
        gw = None
    return kl, tvd, gw


def independence_report(bits: "BitMatrix | np.ndarray", pairing: str = "adjacent", rho: float = 1.0,
                        smoothing: float = 0.0, antenna_classes: list[str] | None = None,
                        adjacency: list[int] | None = None) -> IndependenceReport:
    """Pairwise dependence between bit locations across chips.

    ``bits`` is either a :class:`~puf_forge.metrics.BitMatrix` (its reference
    responses and location metadata are used) or a chips x locations array
    with the metadata passed explicitly.
    """
    if isinstance(bits, np.ndarray):
        data = bits
        n_loc = data.shape[1]
        antenna_classes = antenna_classes or [str(i) for i in range(n_loc)]
        adjacency = adjacency if adjacency is not None else list(range(n_loc))
    else:
        data = bits.reference_responses()
        antenna_classes = [loc.antenna_class for loc in bits.locations]
        adjacency = [loc.adjacency_index for loc in bits.locations]
    if data.shape[0] < 2:
        raise ValueError("independence report needs at least 2 chips")
    rows = []
    for pid, (a, b) in enumerate(location_pairs(antenna_classes, adjacency, pairing)):
        kl, tvd, gw = pair_distances(data[:, a], data[:, b], rho, smoothing)
        rows.append(PairRow(pid, a, b, kl, tvd, gw))
    return IndependenceReport(pairing, rows, rho)

