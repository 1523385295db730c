"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import attack as atk
from .config import RunConfig
from .distance import PAIRINGS, independence_report, pair_distances
from .guesswork import (
    guess1_probability,
    guesswork_growth_rate,
    guesswork_moment_exact,
    guesswork_report,
    mutual_information,
    noisy_guesswork_exponent,
    noisy_guesswork_moment_exact,
)
from .metrics import BitMatrix, SchemaError, ber, breakdown_probability, inter_fhd_stats
from .prob import ENUMERATION_CAP, BitPMF, ProbabilityError, bsc_joint, estimate_joint, iid_string_pmf
from .simulator import ConfigError, run_campaign

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3

# Default effective-bits sweep: a 0.01 grid plus the named noise levels.
DEFAULT_NOISE_SWEEP = tuple(sorted(set(np.round(np.arange(0, 0.5001, 0.01), 4).tolist()) | {0.0012}))
REPORTS = ("fhd", "ber", "breakdown", "independence", "guesswork")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common(sub: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if sub else None
    p.add_argument("--config", metavar="PATH", default=default, help="flat key=value config file")
    p.add_argument("--seed", type=_u64, metavar="U64", default=argparse.SUPPRESS if sub else 0)
    p.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS if sub else ".")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="puf-forge", parents=[_common(False)],
                                     description="Oxide-breakdown PUF simulation and security metrics")
    subs = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    sim = subs.add_parser("simulate", parents=[common], help="simulate a measurement campaign")
    sim.add_argument("--chips", type=int)
    sim.add_argument("--campaign", choices=("stressed", "plasma"))

    rep = subs.add_parser("report", parents=[common], help="compute a metric report")
    rep.add_argument("which", choices=REPORTS)
    rep.add_argument("--bitmatrix", metavar="CSV")
    rep.add_argument("--layout", metavar="JSON", help="sidecar layout (default: layout.json beside the CSV)")
    rep.add_argument("--pairing", choices=PAIRINGS + ("both",))
    rep.add_argument("--rho", type=float)
    rep.add_argument("--bias", type=float)
    rep.add_argument("--noise", help="comma-separated noise levels")
    rep.add_argument("--n", type=int, dest="n_bits")
    rep.add_argument("--repeats-per-corner", type=int)

    att = subs.add_parser("attack", parents=[common], help="simulate a dictionary attack")
    att.add_argument("--bias", type=float)
    att.add_argument("--noise", type=float)
    att.add_argument("--m", type=int, dest="m_bits")
    att.add_argument("--trials", type=int)
    att.add_argument("--rho", type=float)

    dist = subs.add_parser("distances", parents=[common], help="distances of a 2x2 count table")
    dist.add_argument("--counts", required=True, help="n00,n01,n10,n11")
    dist.add_argument("--rho", type=float)
    dist.add_argument("--smoothing", type=float)
    return parser


def _write(out: Path, name: str, text: str) -> str:
    path = out / name
    path.write_text(text)
    return str(path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _pick(args, cfg: RunConfig, name: str, default=None):
    value = getattr(args, name, None)
    return cfg.get(name, default) if value is None else value


def cmd_simulate(args, cfg: RunConfig, out: Path) -> list[str]:
    config = cfg.sim_config(chips=args.chips, campaign=args.campaign)
    campaign = run_campaign(config, seed=args.seed)
    return list(campaign.write(out).values())


def _load_bits(args) -> BitMatrix:
    if not args.bitmatrix:
        raise ConfigError("--bitmatrix is required for this report")
    layout = args.layout
    if layout is None:
        beside = Path(args.bitmatrix).with_name("layout.json")
        layout = str(beside) if beside.exists() else None
    return BitMatrix.read(args.bitmatrix, layout)


def cmd_report(args, cfg: RunConfig, out: Path) -> list[str]:
    which = args.which
    rho = _pick(args, cfg, "rho", 1.0)
    if which == "guesswork":
        bias = _pick(args, cfg, "bias", 0.5)
        n = _pick(args, cfg, "n_bits", 128)
        if args.noise is not None:
            noise = tuple(float(v) for v in args.noise.split(","))
        else:
            noise = cfg.get("noise_levels", DEFAULT_NOISE_SWEEP)
        reports = [guesswork_report(bias, eps, n, rho) for eps in sorted(noise)]
        rows = [(r.noise, r.bias, r.n, r.rho, r.exponent, r.effective_bits) for r in reports]
        return [
            _write(out, "guesswork.json", _dump([r.to_dict() for r in reports])),
            _write(out, "guesswork.csv", _csv(("noise", "bias", "n", "rho", "exponent", "effective_bits"), rows)),
        ]

    bits = _load_bits(args)
    if which == "fhd":
        stats = inter_fhd_stats(bits)
        return [
            _write(out, "fhd.json", _dump(stats.to_dict())),
            _write(out, "fhd.csv", _csv(("fhd", "count"), stats.bins())),
        ]
    if which == "ber":
        k = _pick(args, cfg, "repeats_per_corner")
        results = [ber(bits, c, k) for c in bits.corners()]
        rows = [tuple(r.to_dict()[h] for h in ("corner_v", "corner_t", "unstable_count", "total_cells",
                                                "repeats", "ber", "ber_percent")) for r in results]
        return [
            _write(out, "ber.json", _dump([r.to_dict() for r in results])),
            _write(out, "ber.csv", _csv(("corner_v", "corner_t", "unstable_count", "total_cells",
                                         "repeats", "ber", "ber_percent"), rows)),
        ]
    if which == "breakdown":
        table = breakdown_probability(bits)
        rows = [(r.tag, r.broken, r.total, r.probability, r.percent) for r in table.values()]
        doc = {r.tag: {"broken": r.broken, "total": r.total, "probability": r.probability,
                       "percent": r.percent} for r in table.values()}
        return [
            _write(out, "breakdown.json", _dump(doc)),
            _write(out, "breakdown.csv", _csv(("tag", "broken", "total", "probability", "percent"), rows)),
        ]
    # independence
    pairing = _pick(args, cfg, "pairing", "both")
    pairings = PAIRINGS if pairing == "both" else (pairing,)
    written = []
    for name in pairings:
        report = independence_report(bits, name, rho=rho, smoothing=cfg.get("smoothing", 0.0))
        written.append(_write(out, f"independence_{name}.json", report.to_json() + "\n"))
        written.append(_write(out, f"independence_{name}.csv", report.to_csv()))
    return written


def cmd_attack(args, cfg: RunConfig, out: Path) -> list[str]:
    bias = _pick(args, cfg, "bias", 0.5)
    eps = _pick(args, cfg, "noise", 0.0)
    m = _pick(args, cfg, "m_bits", 8)
    trials = _pick(args, cfg, "trials", 100_000)
    rho = _pick(args, cfg, "rho", 1.0)
    if not 1 <= m <= ENUMERATION_CAP:
        raise ConfigError(
            f"m={m} is outside 1..{ENUMERATION_CAP}; for longer responses use "
            "`report guesswork` (asymptotic exponent) instead of simulation")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    doc = {"bias": bias, "noise": eps, "seed": args.seed}
    written = []
    if eps == 0:
        pmf = iid_string_pmf(bias, m)
        result = atk.simulate_attack(pmf, trials, args.seed, rho)
        doc["exact_moment_rho"] = guesswork_moment_exact(pmf, rho)
        doc["exact_guess1_probability"] = guess1_probability(pmf)
        doc["asymptotic_exponent"] = guesswork_growth_rate(BitPMF(bias), rho)
        written.append(_write(out, "success_curve_exact.csv", atk.curve_to_csv(atk.success_curve_exact(pmf))))
    else:
        result = atk.simulate_noisy_attack(bias, m, eps, trials, args.seed, rho)
        doc["exact_moment_rho"] = noisy_guesswork_moment_exact(bias, eps, m, rho)
        doc["asymptotic_exponent"] = guesswork_growth_rate(bsc_joint(bias, eps), rho)
        doc["noisy_response_exponent"] = noisy_guesswork_exponent(bias, eps, rho)
    doc.update(result.to_dict())
    written.insert(0, _write(out, "attack.json", _dump(doc)))
    written.insert(1, _write(out, "success_curve.csv", result.curve_csv()))
    return written


def cmd_distances(args, cfg: RunConfig, out: Path) -> list[str]:
    try:
        counts = [int(v) for v in args.counts.split(",")]
    except ValueError:
        raise ConfigError("--counts must be four integers n00,n01,n10,n11") from None
    if len(counts) != 4:
        raise ConfigError("--counts must be four integers n00,n01,n10,n11")
    rho = _pick(args, cfg, "rho", 1.0)
    smoothing = _pick(args, cfg, "smoothing", 0.0)
    table = np.array(counts).reshape(2, 2)
    x = np.repeat([0, 0, 1, 1], counts)
    y = np.repeat([0, 1, 0, 1], counts)
    kl, tvd, gw = pair_distances(x, y, rho, smoothing)
    joint = estimate_joint(table, smoothing)
    doc = {"counts": counts, "joint": joint.probs.tolist(), "kl_bits": kl if math.isfinite(kl) else "inf",
           "tvd": tvd, "gw": "undefined" if gw is None else gw, "mutual_information_bits": mutual_information(joint),
           "rho": rho, "smoothing": smoothing}
    return [_write(out, "distances.json", _dump(doc))]


COMMANDS = {"simulate": cmd_simulate, "report": cmd_report, "attack": cmd_attack, "distances": cmd_distances}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = os.environ.get("PUF_FORGE_THREADS")
        if threads is not None and (not threads.isdigit() or int(threads) < 1):
            raise ConfigError("PUF_FORGE_THREADS must be a positive integer")
        cfg = RunConfig.load(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](args, cfg, out)
    except (ConfigError, SchemaError, ProbabilityError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
