"""
Command-line front end: single evaluations, the identity suite and sweeps.

Every subcommand prints one JSON object on stdout.  Failures print
``{"error": {"type": ..., "message": ...}}`` and exit non-zero.

Sweep configuration files hold ``key = value`` lines (``#`` starts a
comment); ``--set key=value`` flags override them.  The output directory
defaults to ``$POLARONLAB_OUTDIR`` and then to the working directory.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigurationError, PolaronLabError
from .records import SweepRecord, dumps, fit_exponent, write_csv, write_json

__all__ = ["RunConfig", "parse_config", "run_sweep", "fit_exponent", "build_parser", "main"]

OUTDIR_ENV = "POLARONLAB_OUTDIR"
MODULES = ("budget", "fermion-budget", "tf", "pekar", "crossover")


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(";", ",").split(",") if v.strip())


@dataclass
class RunConfig:
    """Validated sweep configuration."""

    module: str = "budget"
    n_min: float = 1e4
    n_max: float = 1e12
    n_points: int = 9
    U: float = 0.5
    U_values: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    nodes: tuple = (256, 512, 1024)
    eps_exp: str = "4/15"
    ell_exp: str = "2/5-2/35"
    fermion_eps_exp: str = "2/33"
    C_int: float = 1.0
    K: float = 1.0
    tol: float = 1e-10
    tf_nodes: int = 2048
    seed: int = 0
    outdir: str = ""
    name: str = ""

    _PARSERS = {
        "module": str,
        "n_min": float,
        "n_max": float,
        "n_points": int,
        "U": float,
        "U_values": _floats,
        "nodes": _ints,
        "eps_exp": str,
        "ell_exp": str,
        "fermion_eps_exp": str,
        "C_int": float,
        "K": float,
        "tol": float,
        "tf_nodes": int,
        "seed": int,
        "outdir": str,
        "name": str,
    }

    def __post_init__(self):
        self.validate()

    def validate(self):
        from .trial_budget import parse_fraction

        def need(ok, msg):
            if not ok:
                raise ConfigurationError(msg)

        need(self.module in MODULES, f"module must be one of {', '.join(MODULES)}")
        need(1.0 <= self.n_min <= self.n_max <= 1e150, "need 1 <= n_min <= n_max <= 1e150")
        need(2 <= self.n_points <= 1000, "n_points must lie in [2, 1000]")
        need(0.0 < self.U < 1.0, "U must lie in (0, 1)")
        need(len(self.U_values) >= 1 and all(0.0 <= u < 1.0 for u in self.U_values), "U_values must lie in [0, 1)")
        need(len(self.nodes) >= 1 and all(64 <= k <= 1 << 16 for k in self.nodes), "nodes must lie in [64, 65536]")
        for key in ("eps_exp", "ell_exp", "fermion_eps_exp"):
            try:
                v = parse_fraction(getattr(self, key))
            except (ValueError, ZeroDivisionError, PolaronLabError) as exc:
                raise ConfigurationError(f"{key}: {exc}") from None
            need(0 < v < 1, f"{key} must lie in (0, 1)")
        need(self.C_int > 0 and math.isfinite(self.C_int), "C_int must be positive")
        need(self.K > 0 and math.isfinite(self.K), "K must be positive")
        need(0.0 < self.tol <= 1e-3, "tol must lie in (0, 1e-3]")
        need(256 <= self.tf_nodes <= 1 << 15, "tf_nodes must lie in [256, 32768]")
        need(self.seed >= 0, "seed must be non-negative")

    @classmethod
    def keys(cls) -> list:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def n_values(self) -> np.ndarray:
        return np.geomspace(self.n_min, self.n_max, self.n_points)

    def output_dir(self) -> Path:
        return Path(self.outdir or os.environ.get(OUTDIR_ENV, "") or ".")


def _parse_pairs(pairs: Sequence[tuple], source: str) -> dict:
    known = RunConfig.keys()
    out = {}
    for key, raw, where in pairs:
        if key not in known:
            raise ConfigurationError(f"{source}{where}: unknown key {key!r}")
        try:
            out[key] = RunConfig._PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigurationError(f"{source}{where}: bad value for {key}: {exc}") from None
    return out


def read_config_file(path) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    pairs = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v.strip(), f":{lineno}"))
    return _parse_pairs(pairs, str(path))


def parse_config(path=None, overrides: Sequence[str] = ()) -> RunConfig:
    """Config file values, then ``key=value`` overrides."""
    values = read_config_file(path) if path else {}
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip(), ""))
    values.update(_parse_pairs(pairs, "--set"))
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# sweeps


def _fits(records, x_key, columns) -> dict:
    xs = [r.inputs[x_key] for r in records]
    out = {}
    for col in columns:
        ys = [abs(r.outputs[col]) for r in records]
        if len(ys) >= 2 and all(y > 0 for y in ys):
            f = fit_exponent(xs, ys)
            out[col] = {"slope": f["slope"], "stderr": f["stderr"]}
    return out


def _sweep_budget(cfg: RunConfig):
    from .trial_budget import assemble_budget, parse_fraction

    records = []
    for n in cfg.n_values():
        b = assemble_budget(float(n), cfg.eps_exp, cfg.ell_exp, C_int=cfg.C_int)
        outputs = {"eps": b.eps, "ell": b.ell, "leading": b.leading, "total": b.total, "relative_deficit": b.relative_deficit}
        outputs.update(b.terms)
        records.append(SweepRecord("budget", {"n": float(n)}, outputs))
    cols = ["trace_gamma", "trace_gamma_sq", "r_main", "r_loc", "r_int", "r_xc", "relative_deficit"]
    from .trial_budget import budget_exponents

    exact = budget_exponents(parse_fraction(cfg.eps_exp), parse_fraction(cfg.ell_exp))
    return records, _fits(records, "n", cols), {"exact_exponents": exact}


def _sweep_fermion(cfg: RunConfig):
    from .tf_variational import fermion_lower_budget
    from .trial_budget import parse_fraction

    e = parse_fraction(cfg.fermion_eps_exp)
    records = []
    for N in cfg.n_values():
        b = fermion_lower_budget(float(N), cfg.U, K=cfg.K, eps_exp=e)
        deficit = sum(b.terms.values())
        outputs = {"eps": b.eps, "leading": b.leading, "total": b.total, "deficit": deficit}
        outputs.update(b.terms)
        records.append(SweepRecord("fermion-budget", {"N": float(N), "U": cfg.U}, outputs))
    return records, _fits(records, "N", ["main", "rep", "xc", "deficit"]), {"exact_exponents": b.exponents}


def _sweep_tf(cfg: RunConfig):
    from .tf_variational import minimize_tf

    records = []
    for U in cfg.U_values:
        res = minimize_tf(float(U), tol=min(cfg.tol, 1e-8), n_nodes=cfg.tf_nodes)
        s = res.summary()
        s.pop("U")
        records.append(SweepRecord("tf", {"U": float(U)}, s))
    col = np.array([r.outputs["e_U_over_1mU2"] for r in records])
    spread = float((col.max() - col.min()) / abs(col.mean()))
    return records, {}, {"reduced_energy_spread": spread}


def _sweep_pekar(cfg: RunConfig):
    from .pekar_variational import default_grid, minimize_pekar, soliton_oracle

    oracle = soliton_oracle()
    A_ref = -oracle.energy
    records = []
    for k in cfg.nodes:
        res = minimize_pekar(1.0, grid=default_grid(n_nodes=int(k)), tol=cfg.tol)
        s = res.summary()
        s["relative_error"] = abs(res.A - A_ref) / A_ref
        records.append(SweepRecord("pekar", {"nodes": int(k)}, s))
    errs = [r.outputs["relative_error"] for r in records]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    fits = _fits(records, "nodes", ["relative_error"]) if len(records) >= 2 else {}
    return records, fits, {"oracle_A": A_ref, "monotone": monotone}


def _sweep_crossover(cfg: RunConfig):
    from .direct_models import crossover_scan

    scan = crossover_scan(list(cfg.n_values()), C_int=cfg.C_int)
    return scan.records, {}, {
        "crossover_n": scan.crossover,
        "leading_crossover_n": scan.leading_crossover,
        "single_polaron_energy": scan.single_polaron_energy,
        "A": scan.A,
    }


_SWEEPS = {
    "budget": _sweep_budget,
    "fermion-budget": _sweep_fermion,
    "tf": _sweep_tf,
    "pekar": _sweep_pekar,
    "crossover": _sweep_crossover,
}


def run_sweep(config: RunConfig) -> tuple[list, dict]:
    """Evaluate every point of the configured sweep and write CSV plus JSON.

    Points are evaluated in input order.  Returns ``(records, summary)``;
    ``summary["files"]`` names the written files.

    Raises
    ------
    OSError
        If the output directory cannot be written.
    """
    config.validate()
    records, fits, extra = _SWEEPS[config.module](config)
    cfg = config.to_dict()
    cfg.pop("outdir")
    for rec in records:
        rec.version = __version__
        rec.config = cfg
    outdir = config.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    stem = config.name or f"sweep_{config.module}"
    csv_path = write_csv(outdir / f"{stem}.csv", records)
    summary = {
        "module": config.module,
        "version": __version__,
        "config": cfg,
        "fits": fits,
        "summary": extra,
        "records": [{"inputs": r.inputs, "outputs": r.outputs} for r in records],
    }
    json_path = write_json(outdir / f"{stem}.json", summary)
    for rec in records:
        rec.fits = fits
    summary["files"] = {"csv": str(csv_path), "json": str(json_path)}
    return records, summary


# ---------------------------------------------------------------------------
# subcommands


def _save_profile(path, f, summary):
    if path:
        from .radial_field import save_field

        csv_path, meta_path = save_field(path, f, extra=summary)
        summary["files"] = {"profile": str(csv_path), "metadata": str(meta_path)}


def _report_csv(path, report, inputs):
    if path:
        outputs = {"eps": report.eps, "leading": report.leading, "total": report.total}
        outputs.update(report.terms)
        write_csv(path, [SweepRecord(report.kind, inputs, outputs)])


def cmd_constants(args) -> dict:
    from .pekar_variational import soliton_oracle
    from .special_math import i0_closed_form, i0_quadrature
    from .tf_variational import COULOMB_LEMMA_CONSTANT, KAPPA, LIEB_OXFORD, tf_lane_emden
    from .trial_budget import TRACE_PREFACTOR, TRACE_PREFACTOR_ALT, zero_mode_average

    i0 = i0_closed_form()
    iq = i0_quadrature()
    printed = 0.60868
    oracle = soliton_oracle()
    return {
        "I0_gamma": i0,
        "I0_quadrature": iq,
        "I0_printed": printed,
        "I0": {
            "closed_form": i0,
            "quadrature": iq,
            "difference": abs(i0 - iq),
            "printed": printed,
            "printed_over_closed_form": printed / i0,
            "cube_root_two_times_closed_form": i0 * 2.0 ** (1.0 / 3.0),
        },
        "A": -oracle.energy,
        "pekar_multiplier": oracle.multiplier,
        "kappa": KAPPA,
        "tf_e0": tf_lane_emden(0.0)["energy"],
        "coulomb_lemma_constant": COULOMB_LEMMA_CONSTANT,
        "lieb_oxford": LIEB_OXFORD,
        "trace_prefactor": TRACE_PREFACTOR,
        "trace_prefactor_alt": TRACE_PREFACTOR_ALT,
        "zero_mode_average": zero_mode_average(),
    }


def cmd_pekar(args) -> dict:
    from .pekar_variational import default_grid, minimize_pekar, soliton_oracle

    from .radial_field import RadialGrid

    I = args.coupling
    if args.rmax:
        grid = RadialGrid.uniform(args.rmax, args.nodes)
    else:
        grid = default_grid(args.mass, I, n_nodes=args.nodes)
    res = minimize_pekar(args.mass, I=I, grid=grid, tol=args.tol)
    oracle = soliton_oracle(I, args.mass)
    out = res.summary()
    out["oracle_energy"] = oracle.energy
    out["relative_error"] = abs(res.energy - oracle.energy) / abs(oracle.energy)
    _save_profile(args.out, res.minimizer, out)
    return out


def cmd_tf(args) -> dict:
    from .tf_variational import edge_exponent, minimize_tf, tf_lane_emden

    from .radial_field import RadialGrid

    grid = RadialGrid.uniform(args.rmax, args.nodes) if args.rmax else None
    res = minimize_tf(args.U, grid=grid, tol=args.tol, n_nodes=args.nodes)
    ref = tf_lane_emden(args.U)
    out = res.summary()
    out["lane_emden_energy"] = ref["energy"]
    out["relative_error"] = abs(res.energy - ref["energy"]) / abs(ref["energy"])
    out["edge_exponent"] = edge_exponent(res)
    _save_profile(args.out, res.density, out)
    return out


def cmd_budget(args) -> dict:
    from .trial_budget import assemble_budget

    report = assemble_budget(args.n, args.eps_exp, args.ell_exp, C_int=args.C_int)
    _report_csv(args.csv, report, {"n": args.n})
    return report.to_dict()


def cmd_fermion_budget(args) -> dict:
    from .tf_variational import fermion_lower_budget
    from .trial_budget import parse_fraction

    report = fermion_lower_budget(args.N, args.U, K=args.K, eps_exp=parse_fraction(args.eps_exp))
    _report_csv(args.csv, report, {"N": args.N, "U": args.U, "K": args.K})
    return report.to_dict()


def cmd_probe_kernel(args) -> dict:
    from .trial_budget import CoherentLatticeProbe, coherent_kernel_probe

    rows = []
    for ell in args.ell:
        probe = CoherentLatticeProbe(
            box=args.box, cells=args.cells, ell=ell, p=tuple(args.p), q=tuple(args.q), phi_width=args.phi_width
        )
        rows.append({"ell": ell, **coherent_kernel_probe(probe)})
    gaps = [r["gap"] for r in rows]
    return {
        "rows": rows,
        "strictly_decreasing": all(b < a for a, b in zip(gaps, gaps[1:])),
        "box": args.box,
        "cells": args.cells,
        "phi_width": args.phi_width,
    }


def cmd_verify(args) -> dict:
    from .direct_models import identity_suite

    report = identity_suite(seed=args.seed)
    if not report["passed"]:
        failed = sorted(k for k, v in report.items() if isinstance(v, dict) and not v["passed"])
        raise VerificationFailed(f"identity checks failed: {', '.join(failed)}", report)
    return report


def cmd_sweep(args) -> dict:
    overrides = list(args.set or [])
    if args.outdir:
        overrides.append(f"outdir={args.outdir}")
    cfg = parse_config(args.config, overrides)
    _, summary = run_sweep(cfg)
    return summary


class VerificationFailed(PolaronLabError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def build_parser() -> argparse.ArgumentParser:
    from .trial_budget import DEFAULT_ELL_EXP, DEFAULT_EPS_EXP

    ap = argparse.ArgumentParser(prog="polaronlab", description="Many-polaron energy laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="I0, A, the TF constant and fixed prefactors")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("pekar", help="minimise the single-species functional at mass n")
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--coupling", type=float, default=None, help="coupling I (default I0)")
    p.add_argument("--grid-nodes", "--nodes", dest="nodes", type=int, default=1024)
    p.add_argument("--rmax", type=float, default=None, help="outer radius (default: sized from the Gaussian seed)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default=None, help="write the minimiser profile (CSV plus JSON sidecar)")
    p.set_defaults(func=cmd_pekar)

    p = sub.add_parser("tf", help="Thomas-Fermi minimiser at repulsion U")
    p.add_argument("--U", type=float, default=0.5)
    p.add_argument("--grid-nodes", "--nodes", dest="nodes", type=int, default=2048)
    p.add_argument("--rmax", type=float, default=None, help="outer radius (default: scaled with U)")
    p.add_argument("--tol", type=float, default=1e-11)
    p.add_argument("--out", default=None, help="write the density profile (CSV plus JSON sidecar)")
    p.set_defaults(func=cmd_tf)

    p = sub.add_parser("budget", help="bosonic upper-bound budget at n")
    p.add_argument("--n", type=float, default=1e8)
    p.add_argument("--eps-exp", default=str(DEFAULT_EPS_EXP))
    p.add_argument("--ell-exp", default=str(DEFAULT_ELL_EXP))
    p.add_argument("--cint", "--C-int", dest="C_int", type=float, default=1.0)
    p.add_argument("--csv", default=None, help="also write a one-row CSV")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("fermion-budget", help="fermionic lower-bound remainders at N")
    p.add_argument("--N", type=float, default=1e8)
    p.add_argument("--U", type=float, default=0.5)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--eps-exp", default="2/33")
    p.add_argument("--csv", default=None, help="also write a one-row CSV")
    p.set_defaults(func=cmd_fermion_budget)

    p = sub.add_parser("probe-kernel", help="coherent-state kernel sandwich on a periodic lattice")
    p.add_argument("--ell", type=float, nargs="+", default=[0.4, 0.2, 0.1])
    p.add_argument("--box", type=float, default=1.6)
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--p", type=float, nargs=3, default=[30.0, 0.0, 0.0])
    p.add_argument("--q", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    p.add_argument("--phi-width", type=float, default=0.1)
    p.set_defaults(func=cmd_probe_kernel)

    p = sub.add_parser("verify", help="run the product-state identity suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="parameter sweep with CSV/JSON output")
    p.add_argument("--config", default=None, help="key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    p.add_argument("--outdir", default=None)
    p.set_defaults(func=cmd_sweep)
    return ap


def _error(exc: BaseException, extra: Optional[dict] = None) -> str:
    obj = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    if extra:
        obj["error"]["report"] = extra
    return dumps(obj)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        sys.stdout.write(_error(ConfigurationError("invalid command line")))
        return 2
    try:
        result = args.func(args)
    except VerificationFailed as exc:
        sys.stdout.write(_error(exc, exc.report))
        return 1
    except (ConfigurationError, ValueError) as exc:
        sys.stdout.write(_error(exc))
        return 2
    except (PolaronLabError, OSError, ArithmeticError) as exc:
        sys.stdout.write(_error(exc))
        return 1
    sys.stdout.write(dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
