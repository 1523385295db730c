"""Uniqueness and stability metrics over chips x bit-location measurements."""
from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_FIXED_COLUMNS = ("chip_id", "corner_v", "corner_t", "repeat")


class SchemaError(ValueError):
    """Input file does not follow the BitMatrix schema; ``problems`` lists each issue."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        shown = "\n  ".join(self.problems[:20])
        more = f"\n  ... {len(self.problems) - 20} more" if len(self.problems) > 20 else ""
        super().__init__(f"{len(self.problems)} schema problem(s):\n  {shown}{more}")


@dataclass(frozen=True, order=True)
class Corner:
    voltage: float
    temperature: float

    def __post_init__(self):
        if not self.voltage > 0:
            raise ValueError(f"corner voltage must be > 0, got {self.voltage}")
        object.__setattr__(self, "voltage", float(self.voltage))
        object.__setattr__(self, "temperature", float(self.temperature))

    def label(self) -> str:
        return f"{_num(self.voltage)}V/{_num(self.temperature)}C"


REFERENCE_CORNER = Corner(1.0, 25.0)
DEFAULT_CORNERS = tuple(Corner(v, t) for t in (25.0, 100.0) for v in (0.8, 1.0, 1.2))


def _num(x: float) -> str:
    return format(float(x), "g")


@dataclass(frozen=True)
class LocationMeta:
    structure_tag: str
    antenna_class: str
    adjacency_index: int


@dataclass(eq=False)
class BitMatrix:
    """Binary reads, one row per (chip, corner, repeat), one column per location.

    Exactly one (corner, repeat) measurement set is the reference; by default
    the first read at 1 V / 25 °C.
    """

    data: np.ndarray
    chip_ids: np.ndarray
    corner_v: np.ndarray
    corner_t: np.ndarray
    repeats: np.ndarray
    locations: list[LocationMeta]
    reference: tuple[Corner, int] = (REFERENCE_CORNER, 0)
    _sets: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8)
        self.chip_ids = np.asarray(self.chip_ids, dtype=np.int64)
        self.corner_v = np.asarray(self.corner_v, dtype=float)
        self.corner_t = np.asarray(self.corner_t, dtype=float)
        self.repeats = np.asarray(self.repeats, dtype=np.int64)
        n_rows = self.data.shape[0]
        if self.data.ndim != 2 or self.data.shape[1] != len(self.locations):
            raise ValueError("data must be rows x locations, matching the location metadata")
        if np.any(self.data > 1):
            raise ValueError("data entries must be 0 or 1")
        for name in ("chip_ids", "corner_v", "corner_t", "repeats"):
            if getattr(self, name).shape != (n_rows,):
                raise ValueError(f"{name} must have one entry per row")
        sets: dict[tuple[Corner, int], np.ndarray] = {}
        keys = {}
        for i, key in enumerate(zip(self.corner_v.tolist(), self.corner_t.tolist(), self.repeats.tolist())):
            keys.setdefault(key, []).append(i)
        chip_set = None
        for (v, t, r), rows in keys.items():
            rows = np.array(rows)
            order = np.argsort(self.chip_ids[rows], kind="stable")
            rows = rows[order]
            chips = self.chip_ids[rows]
            if np.any(chips[1:] == chips[:-1]):
                raise ValueError(f"duplicate chip rows in measurement set {v}V/{t}C repeat {r}")
            if chip_set is None:
                chip_set = chips
            elif not np.array_equal(chips, chip_set):
                raise ValueError("every measurement set must cover the same chips")
            sets[(Corner(v, t), int(r))] = rows
        self._sets = sets
        ref = (self.reference[0], int(self.reference[1]))
        if ref not in sets:
            raise ValueError(f"reference measurement set {ref[0].label()} repeat {ref[1]} is missing")
        self.reference = ref

    @property
    def chips(self) -> np.ndarray:
        return self.chip_ids[self._sets[self.reference]]

    @property
    def n_chips(self) -> int:
        return len(self._sets[self.reference])

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    def corners(self) -> list[Corner]:
        return sorted({c for c, _ in self._sets})

    def repeats_at(self, corner: Corner) -> list[int]:
        return sorted(r for c, r in self._sets if c == corner)

    def measurement_set(self, corner: Corner, repeat: int) -> np.ndarray:
        """chips x locations reads of one set, rows ordered by chip id."""
        try:
            rows = self._sets[(corner, int(repeat))]
        except KeyError:
            raise KeyError(f"no measurement set {corner.label()} repeat {repeat}") from None
        return self.data[rows]

    def reference_responses(self) -> np.ndarray:
        return self.measurement_set(*self.reference)

    def corner_stack(self, corner: Corner, repeats: Sequence[int] | None = None) -> np.ndarray:
        """repeats x chips x locations reads at one corner."""
        repeats = self.repeats_at(corner) if repeats is None else list(repeats)
        if not repeats:
            raise KeyError(f"no measurements at corner {corner.label()}")
        return np.stack([self.measurement_set(corner, r) for r in repeats])

    @classmethod
    def from_sets(cls, sets: dict[tuple[Corner, int], np.ndarray], locations: list[LocationMeta],
                  chip_ids: Sequence[int] | None = None,
                  reference: tuple[Corner, int] = (REFERENCE_CORNER, 0)) -> "BitMatrix":
        """Build from ``{(corner, repeat): chips x locations}`` arrays."""
        blocks, cv, ct, rep, ids = [], [], [], [], []
        for (corner, r), arr in sorted(sets.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            arr = np.asarray(arr)
            n = arr.shape[0]
            chip_arr = np.arange(n) if chip_ids is None else np.asarray(chip_ids)
            blocks.append(arr)
            ids.append(chip_arr)
            cv.append(np.full(n, corner.voltage))
            ct.append(np.full(n, corner.temperature))
            rep.append(np.full(n, r))
        # Rows are grouped chip-major to match the on-disk layout.
        data = np.concatenate(blocks)
        ids_a, cv_a, ct_a, rep_a = map(np.concatenate, (ids, cv, ct, rep))
        order = np.lexsort((rep_a, ct_a, cv_a, ids_a))
        return cls(data[order], ids_a[order], cv_a[order], ct_a[order], rep_a[order],
                   list(locations), reference)

    # -- file IO ---------------------------------------------------------------

    def location_names(self) -> list[str]:
        return [f"loc_{i:03d}" for i in range(self.n_locations)]

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(CSV_FIXED_COLUMNS) + self.location_names())
            for i in range(self.data.shape[0]):
                writer.writerow([int(self.chip_ids[i]), _num(self.corner_v[i]), _num(self.corner_t[i]),
                                 int(self.repeats[i])] + self.data[i].tolist())

    def layout_dict(self) -> dict:
        ref_corner, ref_repeat = self.reference
        return {
            "reference": {"corner_v": ref_corner.voltage, "corner_t": ref_corner.temperature,
                          "repeat": ref_repeat},
            "locations": [dict(loc=name, **asdict(meta))
                          for name, meta in zip(self.location_names(), self.locations)],
        }

    def write_layout(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.layout_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, csv_path: str | os.PathLike, layout_path: str | os.PathLike | None = None) -> "BitMatrix":
        """Load a BitMatrix CSV plus its sidecar layout JSON.

        Without a sidecar every location gets its own structure tag and antenna
        class, adjacency follows column order, and a warning is issued.
        """
        header, rows = _read_csv_rows(csv_path)
        n_loc = len(header) - len(CSV_FIXED_COLUMNS)
        if layout_path is None:
            warnings.warn("no layout sidecar given; using column order as location metadata")
            locations = [LocationMeta(f"loc_{i:03d}", f"loc_{i:03d}", i) for i in range(n_loc)]
            reference = (REFERENCE_CORNER, 0)
        else:
            locations, reference = _read_layout(layout_path, header[len(CSV_FIXED_COLUMNS):])
        ids, cv, ct, rep, data = rows
        try:
            return cls(data, ids, cv, ct, rep, locations, reference)
        except ValueError as exc:
            raise SchemaError([str(exc)]) from None


def _read_csv_rows(path):
    problems: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(["file is empty"]) from None
        if tuple(header[:4]) != CSV_FIXED_COLUMNS:
            problems.append(f"header must start with {','.join(CSV_FIXED_COLUMNS)}, got {','.join(header[:4])}")
        loc_cols = header[4:]
        for j, name in enumerate(loc_cols):
            if name != f"loc_{j:03d}":
                problems.append(f"header column {j + 4}: expected loc_{j:03d}, got {name!r}")
        if not loc_cols:
            problems.append("header has no loc_ columns")
        if problems:
            raise SchemaError(problems)
        ids, cv, ct, rep, data = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                problems.append(f"row {lineno}: {len(row)} fields, expected {len(header)}")
                continue
            try:
                ids.append(int(row[0]))
                cv.append(float(row[1]))
                ct.append(float(row[2]))
                rep.append(int(row[3]))
            except ValueError:
                problems.append(f"row {lineno}: chip_id/corner_v/corner_t/repeat not numeric")
                continue
            bits = []
            for j, value in enumerate(row[4:]):
                if value not in ("0", "1"):
                    problems.append(f"row {lineno}, column {loc_cols[j]}: value {value!r} not in {{0,1}}")
                bits.append(value == "1")
            data.append(bits)
    if not data and not problems:
        problems.append("no data rows")
    if problems:
        raise SchemaError(problems)
    return header, (np.array(ids), np.array(cv), np.array(ct), np.array(rep),
                    np.array(data, dtype=np.uint8))


def _read_layout(path, loc_names):
    try:
        doc = json.loads(Path(path).read_text())
        ref = doc["reference"]
        reference = (Corner(ref["corner_v"], ref["corner_t"]), int(ref["repeat"]))
        entries = doc["locations"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise SchemaError([f"layout {path}: {exc}"]) from None
    problems = []
    if len(entries) != len(loc_names):
        problems.append(f"layout lists {len(entries)} locations, CSV has {len(loc_names)}")
    locations = []
    for i, entry in enumerate(entries):
        expected = loc_names[i] if i < len(loc_names) else None
        try:
            if "loc" in entry and entry["loc"] != expected:
                problems.append(f"layout entry {i}: loc {entry['loc']!r} does not match CSV column order")
            locations.append(LocationMeta(str(entry["structure_tag"]), str(entry["antenna_class"]),
                                          int(entry["adjacency_index"])))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"layout entry {i}: {exc!r}")
    if problems:
        raise SchemaError(problems)
    return locations, reference


# -- metrics -------------------------------------------------------------------


def fhd(a, b) -> float:
    """Fractional Hamming distance of two equal-length bit vectors."""
    a = np.asarray(a, dtype=np.uint8).ravel()
    b = np.asarray(b, dtype=np.uint8).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("bit vectors must be non-empty")
    return float(np.count_nonzero(a != b)) / a.size


@dataclass(frozen=True)
class FHDStats:
    mean: float
    std: float
    histogram: np.ndarray  # pair counts indexed by Hamming distance 0..m
    pairs: int
    m: int

    def bins(self) -> list[tuple[float, int]]:
        return [(d / self.m, int(c)) for d, c in enumerate(self.histogram)]

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "pairs": self.pairs, "m": self.m,
                "histogram": [{"fhd": f, "count": c} for f, c in self.bins()]}


def _thread_count(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("PUF_FORGE_THREADS", "1") or 1)
    return max(1, int(threads))


def inter_fhd_stats(bits: "BitMatrix | np.ndarray", threads: int | None = None,
                    chunk: int = 512) -> FHDStats:
    """Statistics of the FHD over all chip pairs of the reference responses.

    Pair distances are accumulated as an exact integer histogram, in row
    blocks, so 10^4 chips stay cheap; block results are summed, which makes
    the outcome independent of the thread count.
    """
    data = bits.reference_responses() if isinstance(bits, BitMatrix) else np.asarray(bits)
    n, m = data.shape
    if n < 2:
        raise ValueError("inter-FHD needs at least 2 chips")
    x = data.astype(np.float32)
    y = 1.0 - x

    def block(start: int) -> np.ndarray:
        stop = min(start + chunk, n)
        hd = x[start:stop] @ y.T + y[start:stop] @ x.T
        hd = np.rint(hd).astype(np.int64)
        cols = np.arange(n)[None, :]
        rows = np.arange(start, stop)[:, None]
        return np.bincount(hd[cols > rows], minlength=m + 1)

    starts = range(0, n, chunk)
    workers = _thread_count(threads)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hist = sum(pool.map(block, starts))
    else:
        hist = sum(block(s) for s in starts)
    hist = np.asarray(hist, dtype=np.int64)
    pairs = int(hist.sum())
    values = np.arange(m + 1) / m
    mean = float(np.dot(values, hist) / pairs)
    var = float(np.dot((values - mean) ** 2, hist) / pairs)
    return FHDStats(mean, math.sqrt(var), hist, pairs, m)


@dataclass(frozen=True)
class BERResult:
    corner: Corner
    unstable_count: int
    total_cells: int
    repeats: int
    ber: float

    @property
    def percent(self) -> str:
        return percent_str(self.ber, decimals=2, truncate=True)

    def to_dict(self) -> dict:
        return {"corner_v": self.corner.voltage, "corner_t": self.corner.temperature,
                "unstable_count": self.unstable_count, "total_cells": self.total_cells,
                "repeats": self.repeats, "ber": self.ber, "ber_percent": self.percent}


def unstable_cells(bits: BitMatrix, corner: Corner, repeats_per_corner: int | None = None) -> np.ndarray:
    """chips x locations mask of cells with any read differing from the reference."""
    repeats = bits.repeats_at(corner)
    if not repeats:
        raise KeyError(f"no measurements at corner {corner.label()}")
    if repeats_per_corner is not None:
        if repeats_per_corner < 1:
            raise ValueError("need at least one repeat per corner")
        repeats = repeats[:repeats_per_corner]
    stack = bits.corner_stack(corner, repeats)
    return np.any(stack != bits.reference_responses()[None], axis=0)


def ber(bits: BitMatrix, corner: Corner, repeats_per_corner: int | None = None) -> BERResult:
    """Fraction of cells unstable at ``corner`` relative to the reference reads."""
    mask = unstable_cells(bits, corner, repeats_per_corner)
    n_rep = len(bits.repeats_at(corner)) if repeats_per_corner is None else min(
        repeats_per_corner, len(bits.repeats_at(corner)))
    count = int(mask.sum())
    return BERResult(corner, count, mask.size, n_rep, count / mask.size)


def percent_str(fraction: float, decimals: int = 2, truncate: bool = False) -> str:
    """Format a fraction as a percentage string.

    ``truncate=True`` cuts instead of rounding; that is how the published
    BER table prints 3/2376 (0.126 %) as 0.12 %.
    """
    scaled = fraction * 100 * 10**decimals
    # 1e-9 guards against 0.29999999 style representation error
    value = math.floor(scaled + 1e-9) if truncate else math.floor(scaled + 0.5)
    return f"{value / 10**decimals:.{decimals}f}%"


@dataclass(frozen=True)
class BreakdownRow:
    tag: str
    broken: int
    total: int
    probability: float

    @property
    def percent(self) -> str:
        return percent_str(self.probability, decimals=1)


def breakdown_probability(bits: BitMatrix | np.ndarray, tags: Iterable[str] | None = None,
                          structure_tags: Sequence[str] | None = None) -> dict[str, BreakdownRow]:
    """Per structure tag, the fraction of reference reads equal to 1 (broken).

    Duplicate cells sharing a tag are pooled. Requested ``tags`` absent from
    the layout are skipped with a warning.
    """
    if isinstance(bits, BitMatrix):
        data = bits.reference_responses()
        structure_tags = [loc.structure_tag for loc in bits.locations]
    else:
        data = np.asarray(bits)
        if structure_tags is None:
            raise ValueError("structure_tags are required for a bare array")
    present = list(dict.fromkeys(structure_tags))
    wanted = present if tags is None else list(tags)
    out = {}
    for tag in wanted:
        if tag not in present:
            warnings.warn(f"unknown structure tag {tag!r}; skipped")
            continue
        cols = [i for i, t in enumerate(structure_tags) if t == tag]
        cells = data[:, cols]
        broken = int(cells.sum())
        out[tag] = BreakdownRow(tag, broken, cells.size, broken / cells.size)
    return out


def majority_vote(measurements: Sequence[int]) -> int:
    values = np.asarray(measurements, dtype=np.int64).ravel()
    if values.size % 2 == 0:
        raise ValueError("ambiguous vote; supply odd repeat count")
    return int(2 * values.sum() > values.size)


def majority_vote_stack(stack: np.ndarray) -> np.ndarray:
    """Elementwise majority over axis 0 of an odd-length stack of reads."""
    stack = np.asarray(stack)
    if stack.shape[0] % 2 == 0:
        raise ValueError("ambiguous vote; supply odd repeat count")
    return (2 * stack.sum(axis=0) > stack.shape[0]).astype(np.uint8)


def majority_error_probability(flip: float, repeats: int) -> float:
    """Probability that a majority of ``repeats`` independent reads are flipped."""
    if repeats % 2 == 0:
        raise ValueError("ambiguous vote; supply odd repeat count")
    need = repeats // 2 + 1
    return sum(math.comb(repeats, k) * flip**k * (1 - flip) ** (repeats - k)
               for k in range(need, repeats + 1))


def or_debias(p_break: float, k: int) -> float:
    """Probability that an OR of ``k`` independent cells outputs 0."""
    if not 0.0 <= p_break <= 1.0:
        raise ValueError("p_break must lie in [0, 1]")
    if k < 1:
        raise ValueError("fan-in must be >= 1")
    return (1.0 - p_break) ** k
