"""Command-line driver.

    logfield kernel     --model Log1D --out out/kernel.csv
    logfield sample     --out out/sample.csv
    logfield modulus    --model Log1D --out out/modulus.json
    logfield resistance --graph-file k4.txt --out out/R.csv

Every command writes its fully resolved configuration to
``<out stem>.config.json``; ``--from-config`` reruns it. The exit status is
0 exactly when every verdict in the run passes.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .errors import LogFieldError
from .kernels import CovarianceModel, Family, brownian_ma_branches, metric_profile
from .regularity import (Modulus, ModulusForm, covering_number, covering_profile,
                         dudley_integral, lipschitz_statistic, model_forms, modulus,
                         refinement_study)
from .resistance import gaussian_draws, metric_check, read_edge_list, solve_resistances
from .sampling import (FourierFieldSpec, brownian_path, circulant_sample,
                       draw_fourier_coefficients, fourier_ma_variance,
                       moving_average_field, replica_rng)

COMMANDS = ("kernel", "sample", "modulus", "resistance")

DEFAULT_TOLERANCES = {
    "exact": 1e-12,         # closed-form identities
    "dudley": 0.05,         # J against its asymptote
    "omega": 0.10,          # spread of omega / derived form at small r
    "flat": 0.20,           # median change under the correct modulus
    "growth": 0.50,         # median growth under a too-strong modulus
    "resistance": 1e-10,
    "mc_sigma": 3.0,
    "fourier": 0.01,        # truncated-series variance against 4 log 2
}


@dataclass
class RunConfig:
    command: str
    out: str
    model: dict = field(default_factory=lambda: {"family": "Log1D", "alpha": None, "width_s": 1.0})
    seed: int = 0
    replicas: int = 50
    levels: list = field(default_factory=lambda: [2 ** k for k in range(8, 15)])
    r_max: float = 0.25
    r_range: list = field(default_factory=lambda: [0.0, 4.0])
    r_points: int = 401
    widths: list = field(default_factory=lambda: [0.05, 0.2])
    Lambda: int = 4000
    L_box: float = 5.0
    u_range: list = field(default_factory=lambda: [0.0, 20.0])
    u_points: int = 2001
    method: str = "fourier"
    graph_file: Optional[str] = None
    samples: int = 100_000
    figure: bool = True
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        self.model_obj()  # raises on bad family / alpha / s
        if self.replicas < 1:
            raise ValueError("--replicas must be at least 1")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("--levels must be increasing")
        if not self.r_max > 0:
            raise ValueError("--r-max must be positive")
        if self.r_points < 2 or self.u_points < 2:
            raise ValueError("grids need at least two points")
        if self.method not in ("fourier", "exact"):
            raise ValueError("--method must be 'fourier' or 'exact'")
        if self.command == "resistance" and not self.graph_file:
            raise ValueError("resistance needs --graph-file")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerances {sorted(unknown)}")
        return self

    def model_obj(self) -> CovarianceModel:
        return CovarianceModel.from_dict(self.model)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**d)
        cfg.tolerances = {**DEFAULT_TOLERANCES, **cfg.tolerances}
        return cfg


def _meta(cfg: RunConfig, **extra) -> dict:
    # the output path is left out so a rerun elsewhere gives identical bytes
    d = cfg.to_dict()
    d.pop("out")
    d.pop("figure")
    return {**d, **extra}


def _verdict_dict(verdicts: dict) -> dict:
    return {k: bool(v) for k, v in verdicts.items()}


# --- commands ------------------------------------------------------------------

def cmd_kernel(cfg: RunConfig) -> dict:
    model = cfg.model_obj()
    r = np.linspace(cfg.r_range[0], cfg.r_range[1], cfg.r_points)
    profile = metric_profile(model, r)
    rows = profile.to_rows()
    tol = cfg.tolerances["exact"]
    verdicts = {"metric_valid": True}
    if model.family is Family.LOG1D:
        verdicts["rho2_at_1_is_4log2"] = abs(model.rho2(1.0) - 4 * math.log(2)) <= tol
    if model.family is Family.BROWNIAN_MA:
        near, far = brownian_ma_branches(model.width_s, model.width_s)
        verdicts["branches_meet_at_s"] = abs(near - far) <= tol * max(1.0, abs(far))
    verdicts = _verdict_dict(verdicts)
    out = Path(cfg.out)
    io.write_csv(out, ["r", "rho2", "rho"], [(a, c, b) for a, b, c in rows],
                 _meta(cfg, verdicts=verdicts))
    if cfg.figure:
        from .plotting import kernel_figure
        kernel_figure(out.with_suffix(".png"), profile.r_grid, profile.rho2_values,
                      profile.rho_values, f"{model.family.value}, s = {model.width_s:g}")
    return verdicts


def cmd_sample(cfg: RunConfig) -> dict:
    u = np.linspace(cfg.u_range[0], cfg.u_range[1], cfg.u_points)
    columns = {}
    verdicts = {}
    if cfg.method == "fourier":
        spec = FourierFieldSpec(cfg.Lambda, cfg.L_box, cfg.seed)
        coeffs = draw_fourier_coefficients(spec)
        for s in cfg.widths:
            columns[f"phibar_s={s:g}"] = moving_average_field(coeffs, spec, s, u).values
            # the truncated series should reproduce rho2(1) = 4 log 2 at every s
            var = fourier_ma_variance(spec, s, 1.0)
            verdicts[f"variance_s={s:g}"] = abs(var / (4 * math.log(2)) - 1) <= cfg.tolerances["fourier"]
        x_name = "u"
    else:
        model = cfg.model_obj()
        n = cfg.u_points - 1
        length = cfg.u_range[1] - cfg.u_range[0]
        if cfg.u_range[0] != 0:
            raise ValueError("exact sampling needs a u-range starting at 0")
        rng = replica_rng(cfg.seed)
        if model.family is Family.BROWNIAN:
            path = brownian_path(u, rng, cfg.seed)
        else:
            path = circulant_sample(model, n, rng, length, cfg.seed)
        columns[f"{model.family.value}"] = path.values
        x_name = "u"
    zero = np.isclose(u, 0.0, atol=0.0)
    verdicts["pinned_at_0"] = all(np.all(v[zero] == 0.0) for v in columns.values())
    verdicts = _verdict_dict(verdicts)
    out = Path(cfg.out)
    rows = zip(u, *columns.values())
    io.write_csv(out, [x_name, *columns], rows, _meta(cfg, verdicts=verdicts))
    if cfg.figure:
        from .plotting import sample_figure
        sample_figure(out.with_suffix(".png"), u, columns)
    return verdicts


def _dudley_reference(family: Family):
    if family is Family.BROWNIAN:
        return lambda d: d * math.sqrt(-2 * math.log(d)), [1e-3, 1e-4, 1e-6]
    if family is Family.LOG1D:
        return lambda d: d * math.sqrt(math.log(1 / d)), [1e-12, 1e-15]
    return None, []


def _floor_check(profile) -> bool:
    # exact rational reference: 0.1 ** 2 in floats is not 1/100
    for text in ("0.5", "0.1", "0.01"):
        eps = Fraction(text)
        if covering_number(profile, float(eps)) != 1 + math.floor(1 / (2 * eps * eps)):
            return False
    return True


def cmd_modulus(cfg: RunConfig) -> dict:
    model = cfg.model_obj()
    tol = cfg.tolerances
    if model.closed_form:
        r_grid = np.geomspace(1e-10, 1.0, 41)
    else:
        r_grid = np.geomspace(1e-3, 1.0, 13)
    profile = metric_profile(model, r_grid)
    cover = covering_profile(profile)
    mod = modulus(profile, cover)
    claimed, derived, alpha = model_forms(model)
    verdicts = {}
    report = {"model": model.to_dict(), "J_at_0": dudley_integral(cover, 0.0)}
    verdicts["J_at_0_is_0"] = report["J_at_0"] == 0.0

    ref, deltas = _dudley_reference(model.family)
    report["dudley"] = []
    for d in deltas:
        J = dudley_integral(cover, d)
        ratio = J / ref(d)
        report["dudley"].append({"delta": d, "J": J, "ratio": ratio})
        verdicts[f"dudley_ratio_delta={d:g}"] = abs(ratio - 1) <= tol["dudley"]
    if model.family is Family.BROWNIAN:
        verdicts["covering_floor_formula"] = _floor_check(profile)

    small = mod.r_grid <= 1e-3
    ratio = mod.ratio_to_closed_form(derived)
    spread = float(ratio[small].max() / ratio[small].min()) if np.any(small) else math.nan
    report["omega"] = {"claimed_form": claimed.value, "derived_form": derived.value,
                       "spread_small_r": spread}
    if np.any(small):
        verdicts["omega_derived_form_flat"] = spread - 1 <= tol["omega"]

    report["refinement"] = None
    if model.family is not Family.LOG3D:
        control = ModulusForm.SQRT if model.family is Family.BROWNIAN else ModulusForm.LINEAR
        moduli = [Modulus.from_closed_form(derived, alpha=alpha),
                  Modulus.from_closed_form(control)]
        study = refinement_study(model, moduli, cfg.levels, cfg.replicas, cfg.seed, cfg.r_max)
        report["refinement"] = study.to_dict()
        med = study.medians[derived.value]
        verdicts["refinement_flat"] = max(med) / min(med) - 1 < tol["flat"]
        if model.family is Family.BROWNIAN:
            verdicts["sqrt_modulus_grows"] = study.growth(control.value) > 1.0
        elif model.family in (Family.LOG1D, Family.BROWNIAN_MA):
            verdicts["linear_modulus_grows"] = study.growth(control.value) - 1 > tol["growth"]
    if model.family is Family.BROWNIAN:
        n = cfg.levels[-1]
        u = np.arange(n + 1) / n
        levy = Modulus.from_closed_form(ModulusForm.SQRT_R_LOG_INV)
        stats = [lipschitz_statistic(brownian_path(u, replica_rng(cfg.seed, i)), levy, 1.0 / n)
                 for i in range(cfg.replicas)]
        report["levy_median"] = float(np.median(stats))
        verdicts["levy_median_in_1_2"] = 1.0 <= report["levy_median"] <= 2.0

    verdicts = _verdict_dict(verdicts)
    report["verdicts"] = verdicts
    report["config"] = _meta(cfg)
    out = Path(cfg.out)
    io.write_json(out, report)
    io.write_csv(io.sibling(out, ".omega.csv"),
                 ["r", "rho", "omega", "claimed_ratio", "derived_ratio"],
                 zip(mod.r_grid, profile.rho(mod.r_grid), mod.omega_values,
                     mod.ratio_to_closed_form(), ratio),
                 _meta(cfg, claimed_form=claimed.value, derived_form=derived.value))
    medians = {}
    if report["refinement"]:
        ref_rep = report["refinement"]
        rows = [(name, lvl, m, q) for name in ref_rep["moduli"]
                for lvl, m, q in zip(ref_rep["levels"], ref_rep["medians"][name], ref_rep["iqr"][name])]
        io.write_csv(io.sibling(out, ".refinement.csv"), ["modulus", "level", "median", "iqr"],
                     rows, _meta(cfg))
        medians = ref_rep["medians"]
    if cfg.figure:
        from .plotting import modulus_figure
        modulus_figure(out.with_suffix(".png"), mod.r_grid, ratio, derived.value,
                       cfg.levels, medians)
    return verdicts


def cmd_resistance(cfg: RunConfig) -> dict:
    g = read_edge_list(cfg.graph_file)
    res = solve_resistances(g)
    tol = cfg.tolerances
    phi = gaussian_draws(g, cfg.samples, replica_rng(cfg.seed))
    mc = []
    for k, l in itertools.combinations(range(g.n), 2):
        d2 = (phi[:, k] - phi[:, l]) ** 2
        est, err = float(d2.mean()), float(d2.std(ddof=1) / math.sqrt(cfg.samples))
        mc.append({"k": k, "l": l, "R": float(res.R_matrix[k, l]), "mc": est, "stderr": err,
                   "z": (est - res.R_matrix[k, l]) / err})
    metric = metric_check(res.R_matrix)
    verdicts = _verdict_dict({
        "pseudoinverse_residual": max(res.diagnostics["residual_KG"],
                                      res.diagnostics["residual_column_sums"]) <= tol["resistance"],
        "variational_agrees": res.diagnostics["max_variational_diff"] <= tol["resistance"],
        "mc_within_sigma": all(abs(m["z"]) <= tol["mc_sigma"] for m in mc),
        "triangle_R": metric.violations_R == 0,
        "triangle_sqrtR": metric.violations_sqrtR == 0,
    })
    out = Path(cfg.out)
    io.write_csv(out, [f"n{j}" for j in range(g.n)], res.R_matrix.tolist(),
                 _meta(cfg, n=g.n, verdicts=verdicts))
    io.write_json(io.sibling(out, ".json"), {
        "diagnostics": res.diagnostics, "mc": mc, "metric": dataclasses.asdict(metric),
        "verdicts": verdicts, "config": _meta(cfg)})
    if cfg.figure:
        from .plotting import resistance_figure
        resistance_figure(out.with_suffix(".png"), res.R_matrix)
    return verdicts


DISPATCH = {"kernel": cmd_kernel, "sample": cmd_sample,
            "modulus": cmd_modulus, "resistance": cmd_resistance}


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logfield", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--out", help="primary output file")
        sp.add_argument("--from-config", help="rerun from a saved .config.json")
        sp.add_argument("--model", choices=[f.value for f in Family])
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--width-s", type=float, nargs="+")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--levels", type=int, nargs="+")
        sp.add_argument("--r-max", type=float, help="largest separation in the Lipschitz statistic")
        sp.add_argument("--r-range", type=float, nargs=2, metavar=("LO", "HI"))
        sp.add_argument("--r-points", type=int)
        sp.add_argument("--lambda", dest="Lambda", type=int, help="Fourier cutoff")
        sp.add_argument("--box-l", dest="L_box", type=float)
        sp.add_argument("--u-range", type=float, nargs=2, metavar=("LO", "HI"))
        sp.add_argument("--u-points", type=int)
        sp.add_argument("--method", choices=["fourier", "exact"])
        sp.add_argument("--graph-file")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--no-figure", dest="figure", action="store_false", default=None)
        for tol in DEFAULT_TOLERANCES:
            sp.add_argument(f"--tol-{tol.replace('_', '-')}", dest=f"tol_{tol}", type=float)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.from_config:
        cfg = RunConfig.from_dict(io.read_json(args.from_config))
        if cfg.command != args.command:
            raise ValueError(f"config is for {cfg.command!r}, not {args.command!r}")
    else:
        if not args.out:
            raise ValueError("--out is required")
        cfg = RunConfig(command=args.command, out=args.out)
        if args.command == "sample":
            cfg.model = {"family": "Log1D", "alpha": None, "width_s": 1.0}
    if args.out:
        cfg.out = args.out
    model = dict(cfg.model)
    if args.model:
        model["family"] = args.model
        if args.model != "PowerLaw":
            model["alpha"] = None
    if args.alpha is not None:
        model["alpha"] = args.alpha
    if args.method:
        cfg.method = args.method
    if args.width_s:
        if args.command == "sample" and cfg.method == "fourier":
            cfg.widths = list(args.width_s)
        else:
            model["width_s"] = args.width_s[0]
    cfg.model = model
    for name in ("seed", "replicas", "levels", "r_max", "r_points", "Lambda", "L_box",
                 "u_points", "graph_file", "samples", "figure"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    for name in ("r_range", "u_range"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, list(value))
    for tol in DEFAULT_TOLERANCES:
        value = getattr(args, f"tol_{tol}")
        if value is not None:
            cfg.tolerances[tol] = value
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        io.write_json(io.sibling(cfg.out, ".config.json"), cfg.to_dict())
        verdicts = DISPATCH[cfg.command](cfg)
    except (LogFieldError, ValueError, OSError) as exc:
        print(f"logfield {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for name, ok in verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(verdicts.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
