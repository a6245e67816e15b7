"""Command-line experiment runner.

Every command writes a JSON summary (``<command>.json``) to ``--out-dir``
and, with ``--format csv``, a per-radius table (``<command>.csv``). Human
readable text goes to stdout. Exit codes: 0 success, 2 configuration
error, 3 degenerate data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config_file
from .cutoff import radii_sequence
from .errors import ContractError, DegenerateInputError, DomainError, OrliczError
from .iteration import doubling_bound, find_contradiction, pj_sequence, recursion_check
from .metric import ball_measure, fit_doubling_exponent, volume_asymptotic
from .sobolev import empirical_superradius, pp_sobolev_check, radial_family, sobolev_ratio, x_tent_family
from .young import BumpKind

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 2, 3

VOLUME_COLUMNS = ("r", "measured", "asymptotic", "ratio")
DOUBLING_COLUMNS = ("r", "mu_B", "mu_2B", "doubling_ratio", "P_1", "setup_holds", "contradiction_j")
SOBOLEV_COLUMNS = ("r", "lhs", "rhs", "ratio", "family_member")
SUPERRADIUS_COLUMNS = ("r", "max_ratio", "argmax", "phi_over_r", "doubling_ratio", "conjectured",
                       "band", "half_ratio", "proven")


def _clean(v):
    """Make ``v`` JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Result:
    def __init__(self, command: str, summary: dict, columns=(), rows=(), text=""):
        self.command = command
        self.summary = summary
        self.columns = tuple(columns)
        self.rows = [tuple(r) for r in rows]
        self.text = text

    def table_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for row in self.rows:
            wr.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def payload(self, cfg: ExperimentConfig, with_rows: bool) -> dict:
        # out_dir stays out of the payload so that reruns elsewhere are byte-identical
        config = {k: v for k, v in cfg.to_dict().items() if k != "out_dir"}
        out = {"schema_version": SCHEMA_VERSION, "command": self.command, "config": config,
               "summary": self.summary}
        if with_rows:
            out["rows"] = [dict(zip(self.columns, row)) for row in self.rows]
        return _clean(out)

    def write(self, cfg: ExperimentConfig) -> list[Path]:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        if cfg.format == "csv" and self.columns:
            p = out / f"{self.command}.csv"
            p.write_text(self.table_csv())
            paths.append(p)
        p = out / f"{self.command}.json"
        p.write_text(json.dumps(self.payload(cfg, cfg.format == "json"), indent=2, sort_keys=True) + "\n")
        paths.append(p)
        return paths


def _need_radii(cfg: ExperimentConfig, k: int) -> np.ndarray:
    r = cfg.radii()
    if r.size < k:
        raise DegenerateInputError(f"insufficient data: the sweep has {r.size} radii, need at least {k}")
    return r


def cmd_volume(cfg: ExperimentConfig) -> Result:
    grid = cfg.make_grid()
    prof = cfg.make_profile()
    rows = []
    for r in cfg.radii():
        m = ball_measure(grid, None, r)
        a = float(volume_asymptotic(prof, r))
        rows.append((float(r), m, a, m / a if a > 0 else math.nan))
    ratios = [row[3] for row in rows if math.isfinite(row[3])]
    if not ratios:
        raise DegenerateInputError("no ball in the sweep carries grid mass")
    summary = {"band_min": min(ratios), "band_max": max(ratios), "profile": prof.describe()}
    text = "\n".join(f"r={r:.6g}  measured={m:.6g}  asymptotic={a:.6g}  ratio={q:.4g}" for r, m, a, q in rows)
    text += f"\nratio band [{summary['band_min']:.4g}, {summary['band_max']:.4g}]"
    return Result("volume", summary, VOLUME_COLUMNS, rows, text)


def cmd_doubling(cfg: ExperimentConfig) -> Result:
    radii = _need_radii(cfg, 4)
    grid = cfg.make_grid()
    phi = cfg.make_bump()
    ct = cfg.effective_c_tilde()
    run_iteration = phi.kind is BumpKind.LOG_POWER and 1 < cfg.gamma < phi.param
    rows, ratios = [], []
    for r in radii:
        mu_b = ball_measure(grid, None, r)
        mu_2b = ball_measure(grid, None, 2 * r)
        if mu_b <= 0:
            ratios.append(math.nan)
            rows.append((float(r), mu_b, mu_2b, math.nan, None, None, None))
            continue
        ratios.append(mu_2b / mu_b)
        p1 = holds = cj = None
        if run_iteration:
            seq = radii_sequence(r, cfg.gamma, cfg.J)
            meas = [ball_measure(grid, None, rj) for rj in seq.radii]
            mu_half = ball_measure(grid, None, r / 2)
            if min(meas) > 0 and mu_half > 0:
                tr = pj_sequence(meas, mu_2b, ct, cfg.gamma, mu_half, seq.radii)
                rep = recursion_check(tr, phi)
                con = find_contradiction(tr, phi)
                p1, holds, cj = float(tr.p[0]), rep.all_hold, con.violating_j
        rows.append((float(r), mu_b, mu_2b, ratios[-1], p1, holds, cj))
    fit = fit_doubling_exponent(radii, np.array(ratios))
    finite = [v for v in ratios if math.isfinite(v)]
    summary = {"fit": fit.to_dict(), "c_tilde": ct, "max_ratio": max(finite), "min_ratio": min(finite)}
    if fit.divergent:
        verdict = "NON-DOUBLING-WITNESS"
        summary["witness_radii"] = [float(r) for r in fit.used]
        detail = f"ln ratio diverges as r -> 0, fitted exponent sigma_hat = {fit.sigma_hat:.4g}"
    else:
        verdict = "DOUBLING-CONSISTENT"
        C_D = doubling_bound(phi.param, cfg.gamma, ct) if run_iteration else None
        summary["C_D"] = C_D
        detail = f"measured ratio in [{min(finite):.4g}, {max(finite):.4g}]"
        if C_D is not None:
            detail += f", implied C_D = {C_D:.6g}"
    summary["verdict"] = verdict
    text = "\n".join(f"r={row[0]:.6g}  mu(2B)/mu(B)={row[3]:.6g}" for row in rows)
    text += f"\n{verdict}: {detail}"
    return Result("doubling", summary, DOUBLING_COLUMNS, rows, text)


def cmd_sobolev(cfg: ExperimentConfig) -> Result:
    radii = cfg.radii()
    grid = cfg.make_grid()
    phi = cfg.make_bump()
    rows, pp = [], []
    for r in radii:
        for name, w in radial_family(grid, None, r, gamma=cfg.gamma, J=cfg.J).items():
            rep = sobolev_ratio(w, grid, None, r, phi, 1.0, cfg.surrogate, name)
            rows.append((rep.r, rep.lhs, rep.rhs, rep.ratio, name))
        cs = [pp_sobolev_check(w, grid, None, r, 1.0).smallest_C for w in x_tent_family(grid, None, r).values()]
        pp.append(max(cs))
    finite_pp = [c for c in pp if math.isfinite(c) and c > 0]
    summary = {
        "pp_smallest_C": pp,
        "pp_uniformity": max(finite_pp) / min(finite_pp) if finite_pp else None,
        "pp_passed": all(c <= 2.0 for c in pp),
    }
    text = "\n".join(f"r={r:.6g}  {m:<5} ratio={q:.6g}" for r, _, _, q, m in rows)
    text += "\n(1,1) tent check, smallest C per radius: " + ", ".join(f"{c:.4g}" for c in pp)
    return Result("sobolev", summary, SOBOLEV_COLUMNS, rows, text)


def cmd_superradius(cfg: ExperimentConfig) -> Result:
    radii = _need_radii(cfg, 4)
    grid = cfg.make_grid()
    phi = cfg.make_bump()
    eps = cfg.epsilon if phi.kind is BumpKind.LOG_POWER else None
    sw = empirical_superradius(grid, phi, radii, gamma=cfg.gamma, surrogate=cfg.surrogate,
                               epsilon=eps, C_S=cfg.C_S)
    rows = [(row.r, row.max_ratio, row.argmax, row.phi_over_r, row.doubling, row.conjectured, row.band,
             row.half_ratio, row.proven) for row in sw.rows]
    summary = sw.summary()
    summary.pop("rows")
    text = "\n".join(f"r={row.r:.6g}  phi(r)/r>={row.phi_over_r:.6g}  conjectured={row.conjectured:.6g}"
                     + (f"  proven={row.proven:.6g}" if row.proven is not None else "") for row in sw.rows)
    text += f"\nslopes: measured phi/r {sw.phi_over_r_slope:.4g}, conjectured {sw.conjectured_slope:.4g}"
    if sw.proven_slope is not None:
        text += f", proven {sw.proven_slope:.4g}"
    text += f"\nmax-ratio slope {sw.slope:.4g}"
    if sw.expected_slope is not None:
        text += f" (formula 1 - sigma*alpha = {sw.expected_slope:.4g})"
    return Result("superradius", summary, SUPERRADIUS_COLUMNS, rows, text)


SWEEPS = {"volume": cmd_volume, "doubling": cmd_doubling, "superradius": cmd_superradius,
          "sobolev": cmd_sobolev}


def cmd_report(cfg: ExperimentConfig) -> Result:
    parts, texts = {}, []
    for name, fn in SWEEPS.items():
        res = fn(cfg)
        parts[name] = res.payload(cfg, True)
        parts[name].pop("config")
        texts.append(f"== {name} ==\n{res.text}")
    return Result("report", parts, text="\n".join(texts))


COMMANDS = {**SWEEPS, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orlicz-doubling", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", help="flat key = value file; flags override its entries")
    add = ap.add_argument
    add("--profile", choices=["exp-power", "euclidean"])
    add("--sigma", type=float)
    add("--half-width", type=float)
    add("--grid-n", type=int)
    add("--neighbors", type=int, choices=[16, 32])
    add("--bump", choices=["log-power", "power"])
    add("--alpha", type=float)
    add("--p", type=float)
    add("--gamma", type=float)
    add("--J", type=int)
    add("--r-min", type=float)
    add("--r-max", type=float)
    add("--r-count", type=int)
    add("--geometric", choices=["true", "false"])
    add("--epsilon", type=float)
    add("--C-S", dest="C_S", type=float)
    add("--c-tilde", type=float)
    add("--surrogate", choices=["q", "lip"])
    add("--seed", type=int)
    add("--out-dir")
    add("--format", choices=["csv", "json"])
    return ap


def load(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    return ExperimentConfig.from_mapping({**values, **flags})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args)
    except (OrliczError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = COMMANDS[args.command](cfg)
    except DegenerateInputError as e:
        print(f"degenerate data: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DomainError, ContractError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    paths = res.write(cfg)
    print(res.text)
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
