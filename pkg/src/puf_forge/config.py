"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment. Per-structure and
per-corner entries use dotted keys, e.g. ``p_break_stressed.V_T1 = 0.5`` or
``instability_rate.1.2V_25C = 0.01``. Unknown keys are rejected.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .metrics import DEFAULT_CORNERS, Corner
from .simulator import BREAKDOWN_RATES, ConfigError, SimConfig


def _prob(value: str) -> float:
    x = float(value)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{value} is not a probability")
    return x


def _positive(value: str) -> float:
    x = float(value)
    if not x > 0:
        raise ValueError(f"{value} must be > 0")
    return x


def _nonneg_int(value: str) -> int:
    x = int(value)
    if x < 0:
        raise ValueError(f"{value} must be >= 0")
    return x


def _float_list(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip())


def _noise_list(value: str) -> tuple[float, ...]:
    out = _float_list(value)
    if any(not 0.0 <= v <= 0.5 for v in out):
        raise ValueError("noise levels must lie in [0, 0.5]")
    return out


def _noise(value: str) -> float:
    x = float(value)
    if not 0.0 <= x <= 0.5:
        raise ValueError(f"{value} must lie in [0, 0.5]")
    return x


def _choice(*options: str) -> Callable[[str], str]:
    def parse(value: str) -> str:
        if value not in options:
            raise ValueError(f"{value!r} not in {options}")
        return value
    return parse


SCALAR_KEYS: dict[str, Callable[[str], Any]] = {
    "chips": _nonneg_int,
    "repeats": _nonneg_int,
    "campaign": _choice("stressed", "plasma"),
    "precision_resistor_ohms": _positive,
    "broken_median_ohms": _positive,
    "broken_log_sigma": _positive,
    "broken_ceiling_ohms": _positive,
    "intact_median_ohms": _positive,
    "intact_log_sigma": _positive,
    "intact_floor_ohms": _positive,
    "instability_band": _positive,
    "corner_drift_log_sigma": float,
    "pairing": _choice("adjacent", "same_antenna_ratio", "both"),
    "rho": _positive,
    "smoothing": float,
    "bias": _prob,
    "noise": _noise,
    "noise_levels": _noise_list,
    "n_bits": _nonneg_int,
    "m_bits": _nonneg_int,
    "trials": _nonneg_int,
    "repeats_per_corner": _nonneg_int,
}

DOTTED_KEYS: dict[str, Callable[[str], Any]] = {
    "p_break_plasma": _prob,
    "p_break_stressed": _prob,
    "instability_rate": _prob,
    "corner_drift_log_sigma": float,
}

_CORNER_RE = re.compile(r"^([0-9.]+)V_(-?[0-9.]+)C$")


def parse_corner(text: str) -> Corner:
    m = _CORNER_RE.match(text)
    if not m:
        raise ValueError(f"corner {text!r} must look like 1.2V_25C")
    return Corner(float(m.group(1)), float(m.group(2)))


@dataclass
class RunConfig:
    values: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        values: dict[str, Any] = {}
        problems = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"{source}:{lineno}: expected 'key = value'")
                continue
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                values[key] = _parse_value(key, value)
            except KeyError:
                problems.append(f"{source}:{lineno}: unknown key {key!r}")
            except ValueError as exc:
                problems.append(f"{source}:{lineno}: {key}: {exc}")
        if problems:
            raise ConfigError("; ".join(problems))
        return cls(values)

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls()
        return cls.parse(Path(path).read_text(), source=str(path))

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def sim_config(self, **overrides) -> SimConfig:
        """SimConfig with defaults replaced by any simulation keys present."""
        v = dict(self.values)
        v.update({k: val for k, val in overrides.items() if val is not None})
        kwargs: dict[str, Any] = {}
        for key in ("chips", "repeats", "campaign", "precision_resistor_ohms", "broken_median_ohms",
                    "broken_log_sigma", "broken_ceiling_ohms", "intact_median_ohms", "intact_log_sigma",
                    "intact_floor_ohms", "instability_band"):
            if key in v:
                kwargs[key] = v[key]
        plasma = {k: p[0] for k, p in BREAKDOWN_RATES.items()}
        stressed = {k: p[1] for k, p in BREAKDOWN_RATES.items()}
        drift = {c: v.get("corner_drift_log_sigma", 0.02) for c in DEFAULT_CORNERS}
        rates = {}
        for key, val in v.items():
            if "." not in key or key.split(".", 1)[0] not in DOTTED_KEYS:
                continue
            head, tail = key.split(".", 1)
            if head == "p_break_plasma":
                plasma[tail] = val
            elif head == "p_break_stressed":
                stressed[tail] = val
            elif head == "instability_rate":
                rates[parse_corner(tail)] = val
            elif head == "corner_drift_log_sigma":
                drift[parse_corner(tail)] = val
        kwargs.update(p_break_plasma=plasma, p_break_stressed=stressed, corner_drift=drift)
        if rates:
            kwargs["instability_rate"] = {c: rates.get(c, 0.0) for c in DEFAULT_CORNERS}
        return SimConfig(**kwargs)


def _parse_value(key: str, value: str):
    if key in SCALAR_KEYS:
        return SCALAR_KEYS[key](value)
    if "." in key:
        head, tail = key.split(".", 1)
        if head in DOTTED_KEYS:
            if head in ("p_break_plasma", "p_break_stressed") and tail not in BREAKDOWN_RATES:
                raise ValueError(f"unknown structure tag {tail!r}")
            if head in ("instability_rate", "corner_drift_log_sigma"):
                parse_corner(tail)
            return DOTTED_KEYS[head](value)
    raise KeyError(key)
