"""Monte-Carlo model of oxide-breakdown bit cells (SSUs).

Each cell is either broken (low resistance) or intact (high resistance); its
equivalent resistance is drawn from a truncated log-normal cluster and read
out against a precision resistor. Voltage stress lifts the breakdown
probability to the post-stress level, and a few cells near the threshold flip
occasionally to reproduce the measured bit error rates.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .metrics import DEFAULT_CORNERS, REFERENCE_CORNER, BitMatrix, Corner, LocationMeta

# Breakdown probability per structure: (plasma induced, voltage stressed).
BREAKDOWN_RATES: Mapping[str, tuple[float, float | None]] = MappingProxyType({
    "M_T1": (0.005, 0.576), "M_T2": (0.005, 0.515), "M_T3": (0.025, 0.571), "M_T4": (0.020, 0.510),
    "V_T1": (0.005, 0.500), "V_T2": (0.061, 0.540), "V_T3": (0.000, 0.647), "V_T4": (0.000, 0.586),
    "P_T1": (0.010, 0.505), "P_T2": (0.025, 0.515), "P_T3": (0.010, 0.586), "P_T4": (0.010, 0.600),
    "Test1": (0.162, None), "Test2": (0.020, None), "Test3": (0.051, None),
    "Test4": (0.010, None), "Test5": (0.030, None),
})

# Cell, VIA, metal, poly areas (um^2) and poly perimeter (um); metadata only.
STRUCTURE_AREAS: Mapping[str, tuple[float, float, float, float, float]] = MappingProxyType({
    "M_T1": (36, 0.87, 1144.57, 0.0, 0.0), "M_T2": (360, 1.17, 1468.57, 0.0, 0.0),
    "M_T3": (1200, 0.0, 4398.88, 0.0, 0.0), "M_T4": (4800, 0.16, 36781.89, 0.0, 0.0),
    "V_T1": (2.4, 0.87, 1108.57, 0.0, 0.0), "V_T2": (8, 2.31, 1108.57, 0.0, 0.0),
    "V_T3": (90, 15.27, 1185.66, 0.0, 0.0), "V_T4": (804, 144.91, 1895.05, 0.0, 0.0),
    "P_T1": (4.8, 1.26, 1917.53, 0.0, 0.0), "P_T2": (27, 1.26, 1917.53, 18.17, 55.59),
    "P_T3": (203, 1.26, 1917.53, 180.07, 128.43), "P_T4": (1800, 1.26, 1917.53, 1800.07, 222.46),
    "Test1": (804, 1071.86, 5631.11, 0.0, 0.0), "Test2": (4.7, 1.86, 0.0, 0.0, 0.0),
    "Test3": (80, 0.26, 299.20, 0.0, 0.0), "Test4": (60, 20.84, 318.78, 28.07, 83.81),
    "Test5": (118, 54.40, 617.25, 56.39, 164.72),
})

STRESSED_TAGS = tuple(f"{g}_T{i}" for g in ("M", "V", "P") for i in range(1, 5))
SINGLE_TAGS = tuple(f"Test{i}" for i in range(1, 6))

# Unstable cells out of 2376 per corner (24 stressed cells on 99 chips).
MEASURED_UNSTABLE: Mapping[Corner, int] = MappingProxyType({
    Corner(0.8, 25): 1, Corner(1.0, 25): 0, Corner(1.2, 25): 3,
    Corner(0.8, 100): 2, Corner(1.0, 100): 2, Corner(1.2, 100): 2,
})
MEASURED_CELLS = 2376

CAMPAIGNS = ("stressed", "plasma")


class ConfigError(ValueError):
    pass


def campaign_layout(campaign: str = "stressed") -> list[LocationMeta]:
    """Per-chip cell layout: two copies of the 12 M/V/P structures, plus the
    five single Test structures in the plasma campaign."""
    if campaign not in CAMPAIGNS:
        raise ConfigError(f"unknown campaign {campaign!r}; expected one of {CAMPAIGNS}")
    tags = list(STRESSED_TAGS) * 2
    if campaign == "plasma":
        tags += list(SINGLE_TAGS)
    return [LocationMeta(tag, tag, i) for i, tag in enumerate(tags)]


@dataclass(frozen=True)
class Cluster:
    """Log-normal resistance cluster truncated to ``[lower, upper]`` ohms."""

    median: float
    log_sigma: float
    lower: float = 0.0
    upper: float = math.inf

    def _bounds(self) -> tuple[float, float]:
        lo = -math.inf if self.lower <= 0 else (math.log(self.lower) - math.log(self.median)) / self.log_sigma
        hi = math.inf if math.isinf(self.upper) else (math.log(self.upper) - math.log(self.median)) / self.log_sigma
        return ndtr(lo), ndtr(hi)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        c_lo, c_hi = self._bounds()
        u = c_lo + (c_hi - c_lo) * rng.random(size)
        z = ndtri(u)
        r = self.median * np.exp(self.log_sigma * z)
        return np.clip(r, self.lower, self.upper)

    def cdf(self, x: float) -> float:
        c_lo, c_hi = self._bounds()
        if x <= self.lower:
            return 0.0
        if x >= self.upper:
            return 1.0
        z = (math.log(x) - math.log(self.median)) / self.log_sigma
        return float((ndtr(z) - c_lo) / (c_hi - c_lo))


def _freeze(mapping):
    return MappingProxyType(dict(mapping))


@dataclass(frozen=True)
class SimConfig:
    p_break_plasma: Mapping[str, float] = field(
        default_factory=lambda: _freeze({k: v[0] for k, v in BREAKDOWN_RATES.items()}))
    p_break_stressed: Mapping[str, float | None] = field(
        default_factory=lambda: _freeze({k: v[1] for k, v in BREAKDOWN_RATES.items()}))
    broken_median_ohms: float = 10e3
    broken_log_sigma: float = 0.7
    broken_ceiling_ohms: float = 100e3
    intact_median_ohms: float = 30e6
    intact_log_sigma: float = 0.12
    intact_floor_ohms: float = 15e6
    precision_resistor_ohms: float = 10e6
    corners: tuple[Corner, ...] = DEFAULT_CORNERS
    corner_drift: Mapping[Corner, float] = field(
        default_factory=lambda: _freeze({c: 0.02 for c in DEFAULT_CORNERS}))
    instability_band: float = 2.4
    instability_rate: Mapping[Corner, float] | None = None
    chips: int = 99
    repeats: int = 10
    campaign: str = "stressed"

    def __post_init__(self):
        object.__setattr__(self, "p_break_plasma", _freeze(self.p_break_plasma))
        object.__setattr__(self, "p_break_stressed", _freeze(self.p_break_stressed))
        object.__setattr__(self, "corner_drift", _freeze(self.corner_drift))
        object.__setattr__(self, "corners", tuple(self.corners))
        if self.instability_rate is not None:
            object.__setattr__(self, "instability_rate", _freeze(self.instability_rate))
        self.validate()

    def validate(self) -> None:
        problems = []
        for name in ("p_break_plasma", "p_break_stressed"):
            for tag, p in getattr(self, name).items():
                if p is not None and not 0.0 <= p <= 1.0:
                    problems.append(f"{name}[{tag}]={p} is not a probability")
        for tag, ps in self.p_break_stressed.items():
            pp = self.p_break_plasma.get(tag)
            if ps is not None and pp is not None and ps < pp:
                problems.append(f"{tag}: stressed probability {ps} below plasma probability {pp}")
        if self.broken_median_ohms * 100 > self.intact_median_ohms:
            problems.append("cluster medians must be at least 100x apart")
        if self.intact_floor_ohms < 100 * self.broken_ceiling_ohms:
            problems.append("intact floor must be at least 100x the broken ceiling")
        if not self.broken_ceiling_ohms < self.precision_resistor_ohms < self.intact_floor_ohms:
            problems.append("precision resistor must lie between the broken ceiling and the intact floor")
        if not (self.broken_median_ohms <= self.broken_ceiling_ohms
                and self.intact_floor_ohms <= self.intact_median_ohms):
            problems.append("cluster medians must lie inside their truncation bounds")
        if self.broken_log_sigma <= 0 or self.intact_log_sigma <= 0:
            problems.append("cluster log-sigmas must be > 0")
        if self.instability_band < 1:
            problems.append("instability band must be >= 1")
        if REFERENCE_CORNER not in self.corners:
            problems.append("the 1V/25C reference corner must be among the corners")
        for c in self.corners:
            if self.corner_drift.get(c, 0.0) < 0:
                problems.append(f"negative drift at {c.label()}")
        if self.instability_rate is not None:
            for c, q in self.instability_rate.items():
                if not 0.0 <= q <= 1.0:
                    problems.append(f"instability rate at {c.label()} is not a probability")
        if self.chips < 1:
            problems.append("chips must be >= 1")
        if self.repeats < 1:
            problems.append("repeats must be >= 1")
        if self.campaign not in CAMPAIGNS:
            problems.append(f"campaign must be one of {CAMPAIGNS}")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def broken_cluster(self) -> Cluster:
        return Cluster(self.broken_median_ohms, self.broken_log_sigma, upper=self.broken_ceiling_ohms)

    @property
    def intact_cluster(self) -> Cluster:
        return Cluster(self.intact_median_ohms, self.intact_log_sigma, lower=self.intact_floor_ohms)

    def band(self) -> tuple[float, float]:
        r = self.precision_resistor_ohms
        return r / self.instability_band, r * self.instability_band

    def resolved_instability(self) -> Mapping[Corner, float]:
        """Per-corner flip rate of borderline cells.

        Unless given explicitly: zero for the plasma campaign (fully stable),
        calibrated to the published unstable counts for the stressed one.
        """
        if self.instability_rate is not None:
            return self.instability_rate
        if self.campaign == "plasma":
            return _freeze({c: 0.0 for c in self.corners})
        return calibrate_instability(self)


def borderline_probability(config: SimConfig, p_break: float) -> float:
    """Chance that a cell with breakdown probability ``p_break`` lands in the band."""
    lo, hi = config.band()
    b, i = config.broken_cluster, config.intact_cluster
    return p_break * (b.cdf(hi) - b.cdf(lo)) + (1 - p_break) * (i.cdf(hi) - i.cdf(lo))


def calibrate_instability(config: SimConfig, targets: Mapping[Corner, int] = MEASURED_UNSTABLE,
                          total_cells: int = MEASURED_CELLS) -> Mapping[Corner, float]:
    """Flip rates giving ``targets[c] / total_cells`` expected unstable cells per corner.

    A borderline cell is unstable at a corner when any of the ``repeats``
    reads flips, so the rate solves ``f * (1 - (1 - q)**repeats) = target``
    with ``f`` the mean borderline fraction of the stressed layout.
    """
    probs = [config.p_break_stressed[t] for t in STRESSED_TAGS]
    frac = float(np.mean([borderline_probability(config, p) for p in probs]))
    rates = {}
    for corner in config.corners:
        target = targets.get(corner, 0) / total_cells
        if target == 0:
            rates[corner] = 0.0
            continue
        if frac <= target:
            raise ConfigError(
                f"instability band too narrow to reach {targets[corner]}/{total_cells} at {corner.label()}")
        rates[corner] = 1.0 - (1.0 - target / frac) ** (1.0 / config.repeats)
    return _freeze(rates)


@dataclass(frozen=True, eq=False)
class SSUPopulation:
    tags: tuple[str, ...]
    broken: np.ndarray  # chips x locations
    r_eq: np.ndarray  # chips x locations, ohms
    config: SimConfig
    seed: int
    stressed: bool = False

    @property
    def chips(self) -> int:
        return self.broken.shape[0]

    @property
    def borderline(self) -> np.ndarray:
        lo, hi = self.config.band()
        return (self.r_eq >= lo) & (self.r_eq <= hi)

    def layout(self) -> list[LocationMeta]:
        return [LocationMeta(t, t, i) for i, t in enumerate(self.tags)]


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *stream])


def _tag_probs(mapping: Mapping[str, float | None], tags: Sequence[str], fallback=None) -> np.ndarray:
    out = []
    for t in tags:
        if t not in mapping:
            raise ConfigError(f"unknown structure tag {t!r}")
        p = mapping[t]
        out.append(fallback[t] if p is None and fallback is not None else p)
    return np.array(out, dtype=float)


def sample_population(config: SimConfig, chips: int | None = None, seed: int = 0,
                      tags: Sequence[str] | None = None) -> SSUPopulation:
    """Draw plasma-damaged cells for ``chips`` chips; deterministic in ``seed``."""
    chips = config.chips if chips is None else chips
    if chips < 1:
        raise ConfigError("chips must be >= 1")
    tags = tuple(t.structure_tag for t in campaign_layout(config.campaign)) if tags is None else tuple(tags)
    p = _tag_probs(config.p_break_plasma, tags)
    rng = _rng(seed, 0)
    shape = (chips, len(tags))
    broken = rng.random(shape) < p[None, :]
    r_broken = config.broken_cluster.sample(rng, shape)
    r_intact = config.intact_cluster.sample(rng, shape)
    r_eq = np.where(broken, r_broken, r_intact)
    return SSUPopulation(tags, broken, r_eq, config, int(seed))


def apply_stress(pop: SSUPopulation, config: SimConfig | None = None) -> SSUPopulation:
    """Voltage-stress every cell that has a post-stress probability.

    Intact cells break with the conditional probability that lifts the
    marginal from the plasma to the stressed level; broken cells stay broken.
    Tags without a stressed probability are left untouched.
    """
    config = pop.config if config is None else config
    pp = _tag_probs(config.p_break_plasma, pop.tags)
    ps = _tag_probs(config.p_break_stressed, pop.tags, fallback=config.p_break_plasma)
    if np.any(ps < pp):
        raise ConfigError("stressed probability below plasma probability")
    with np.errstate(divide="ignore", invalid="ignore"):
        lift = np.where(pp < 1, (ps - pp) / (1 - pp), 0.0)
    rng = _rng(pop.seed, 1)
    newly = (~pop.broken) & (rng.random(pop.broken.shape) < lift[None, :])
    r_new = config.broken_cluster.sample(rng, pop.broken.shape)
    return replace(pop, broken=pop.broken | newly, r_eq=np.where(newly, r_new, pop.r_eq),
                   config=config, stressed=True)


def digitize(r_eq, r_precision: float):
    """Divider readout: 1 when the output exceeds VDD/2, i.e. ``r_eq < r_precision``.

    An exact tie reads 0.
    """
    if np.any(np.asarray(r_eq) <= 0) or r_precision <= 0:
        raise ValueError("resistances must be > 0")
    bits = np.asarray(r_eq) < r_precision
    return int(bits) if bits.ndim == 0 else bits.astype(np.uint8)


def output_voltage_ratio(r_eq, r_precision: float):
    """V_out / VDD of the SSU plus precision-resistor divider."""
    return r_precision / (r_precision + np.asarray(r_eq, dtype=float))


def _corner_stream(corner: Corner) -> tuple[int, int]:
    return int(round(corner.voltage * 1000)), int(round(corner.temperature * 1000))


def measure_reads(pop: SSUPopulation, corner: Corner, repeats: int, seed: int | None = None
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Simulate reads at one corner.

    Returns ``(bits, r_read)`` with shape repeats x chips x locations.
    """
    config = pop.config
    if corner not in config.corners:
        raise ConfigError(f"corner {corner.label()} is not configured")
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    rng = _rng(pop.seed if seed is None else seed, 2, *_corner_stream(corner))
    shape = (repeats,) + pop.r_eq.shape
    sigma = config.corner_drift.get(corner, 0.0)
    r_read = pop.r_eq[None] * np.exp(sigma * rng.standard_normal(shape))
    bits = digitize(r_read, config.precision_resistor_ohms)
    q = config.resolved_instability().get(corner, 0.0)
    flips = pop.borderline[None] & (rng.random(shape) < q)
    return bits ^ flips.astype(np.uint8), r_read


def measure(pop: SSUPopulation, corner: Corner, repeats: int, seed: int | None = None) -> BitMatrix:
    """Reads at one corner as a BitMatrix whose first repeat is the reference."""
    bits, _ = measure_reads(pop, corner, repeats, seed)
    sets = {(corner, r): bits[r] for r in range(repeats)}
    return BitMatrix.from_sets(sets, pop.layout(), reference=(corner, 0))


@dataclass
class Campaign:
    population: SSUPopulation
    bits: BitMatrix
    reads: dict[Corner, np.ndarray]  # first-read resistances, chips x locations

    def write(self, out_dir: str | os.PathLike) -> dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "bitmatrix": os.path.join(out_dir, "bitmatrix.csv"),
            "layout": os.path.join(out_dir, "layout.json"),
            "r_eq": os.path.join(out_dir, "r_eq.csv"),
        }
        self.bits.write_csv(paths["bitmatrix"])
        self.bits.write_layout(paths["layout"])
        write_r_eq_csv(paths["r_eq"], self.reads)
        return paths


def run_campaign(config: SimConfig, seed: int = 0) -> Campaign:
    """Sample, optionally stress, and measure every configured corner."""
    pop = sample_population(config, seed=seed)
    if config.campaign == "stressed":
        pop = apply_stress(pop)
    sets, reads = {}, {}
    for corner in config.corners:
        bits, r_read = measure_reads(pop, corner, config.repeats)
        for r in range(config.repeats):
            sets[(corner, r)] = bits[r]
        reads[corner] = r_read[0]
    matrix = BitMatrix.from_sets(sets, pop.layout(), reference=(REFERENCE_CORNER, 0))
    return Campaign(pop, matrix, reads)


def reference_responses(config: SimConfig, seed: int, chips: int | None = None) -> np.ndarray:
    """Reference-corner reads only; a cheap path for population statistics."""
    pop = sample_population(config, chips, seed)
    if config.campaign == "stressed":
        pop = apply_stress(pop)
    bits, _ = measure_reads(pop, REFERENCE_CORNER, 1)
    return bits[0]


def write_r_eq_csv(path: str | os.PathLike, reads: Mapping[Corner, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["chip_id", "loc", "corner_v", "corner_t", "r_eq_ohms"])
        for corner in sorted(reads):
            arr = reads[corner]
            for chip in range(arr.shape[0]):
                for loc in range(arr.shape[1]):
                    writer.writerow([chip, loc, format(corner.voltage, "g"),
                                     format(corner.temperature, "g"), repr(float(arr[chip, loc]))])
