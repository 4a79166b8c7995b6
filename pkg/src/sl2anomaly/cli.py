"""Command-line interface: config ingestion, dispatch, machine-readable output.

Commands
--------
classify   anomaly report as JSON
density    lowest-order invariant density as CSV plus a JSON summary
gamma      Monte-Carlo estimate and/or perturbative coefficient as JSON
sweep      estimates over a lambda ladder as CSV plus a JSON power-law fit
catalog    list built-in families or materialize one as inline JSON

The family is described in a JSON config file (--config); numeric flags
override config values.  Outputs are byte-stable for fixed seeds.  Exit
codes: 0 success, 2 config/validation error, 3 classification/type error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
from jsonschema import Draft202012Validator

from . import catalog as catalog_mod
from .classify import (
    SIGN_TOL,
    ZERO_TOL,
    ClassificationError,
    TypeMismatchError,
    classify_anomaly,
    is_critical_point,
)
from .family import Atom, FamilySpec, FamilyValidationError
from .lyapunov import mc_gamma, parabolic_scaling_check, perturbative_coefficient, sweep
from .measure import rho0_diffusive, rho0_elliptic, support_points
from .sl2_core import ALGEBRAIC_TOL, ROUNDTRIP_TOL

MAT = {"type": "array", "minItems": 2, "maxItems": 2,
       "items": {"type": "array", "minItems": 2, "maxItems": 2,
                 "items": {"type": "number"}}}

ATOM_SCHEMA = {
    "type": "object",
    "oneOf": [
        {"required": ["weight", "T0", "T1", "T2"],
         "properties": {"weight": {"type": "number"}, "label": {"type": "string"},
                        "T0": MAT, "T1": MAT, "T2": MAT},
         "additionalProperties": False},
        {"required": ["weight", "sign", "P"],
         "properties": {"weight": {"type": "number"}, "label": {"type": "string"},
                        "sign": {"enum": [1, -1]}, "P": MAT, "Q": MAT},
         "additionalProperties": False},
    ],
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {
            "type": "object",
            "oneOf": [
                {"required": ["catalog"],
                 "properties": {"catalog": {"enum": sorted(catalog_mod.CATALOG)},
                                "params": {"type": "object"}},
                 "additionalProperties": False},
                {"required": ["atoms"],
                 "properties": {"name": {"type": "string"},
                                "factors_per_atom": {"type": "integer", "minimum": 1},
                                "atoms": {"type": "array", "minItems": 1, "items": ATOM_SCHEMA}},
                 "additionalProperties": False},
            ],
        },
        "lambda": {"type": "number"},
        "ladder": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "seed": {"type": "integer", "minimum": 0},
        "chains": {"type": "integer", "minimum": 1},
        "steps": {"type": "integer", "minimum": 1},
        "grid": {"type": "integer", "minimum": 16},
        "kmax": {"type": "integer", "minimum": 1},
        "renorm_every": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["mc", "perturbative", "both"]},
        "threads": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

DEFAULTS = {"seed": 1, "chains": 8, "steps": 1_000_000, "grid": 2048, "kmax": 8,
            "renorm_every": 32, "mode": "both"}


def fmt17(x: float) -> str:
    return f"{float(x):.17g}"


def _mat_list(m) -> list:
    return [[float(v) for v in row] for row in np.asarray(m)]


def _cplx(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg),
                    key=lambda e: list(e.path))
    if errors:
        msgs = "; ".join(f"{'/'.join(str(p) for p in e.path) or '<root>'}: {e.message}"
                         for e in errors)
        raise ConfigError(f"invalid config: {msgs}")
    return cfg


class ConfigError(ValueError):
    pass


def family_from_config(cfg: dict) -> FamilySpec:
    fam = cfg.get("family")
    if fam is None:
        raise ConfigError("config needs a 'family' entry for this command")
    if "catalog" in fam:
        try:
            return catalog_mod.build(fam["catalog"], fam.get("params", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot build catalog family: {exc}") from exc
    atoms = []
    for i, a in enumerate(fam["atoms"]):
        label = a.get("label", f"atom{i}")
        if "sign" in a:
            atoms.append(Atom.from_generator(a["weight"], a["sign"], a["P"],
                                             a.get("Q"), label=label))
        else:
            atoms.append(Atom.from_poly(a["weight"], (a["T0"], a["T1"], a["T2"]), label=label))
    return FamilySpec(atoms=tuple(atoms), name=fam.get("name", "inline"),
                      factors_per_atom=fam.get("factors_per_atom", 1))


def report_to_dict(report) -> dict:
    return {
        "order": report.order,
        "degree": report.degree,
        "type": report.type,
        "signs": [int(s) for s in report.signs],
        "M": _mat_list(report.M),
        "param": report.param,
        "nilpotent_sign": report.nilpotent_sign,
        "per_atom": [
            {"weight": a.weight, "label": a.label, "sign": int(a.sign),
             "P": _mat_list(a.P), "Q": _mat_list(a.Q),
             "alpha_p": _cplx(a.alpha_p), "beta_p": _cplx(a.beta_p),
             "alpha_q": _cplx(a.alpha_q), "beta_q": _cplx(a.beta_q)}
            for a in report.per_atom
        ],
        "mean_p": _mat_list(report.mean_p),
        "det_mean_p": report.det_mean_p,
        "min_mean_p2": report.min_mean_p2,
        "strictly_diffusive": report.strictly_diffusive,
        "kmax": report.kmax,
        "tolerances": {"algebraic": ALGEBRAIC_TOL, "round_trip": ROUNDTRIP_TOL,
                       "zero_threshold": ZERO_TOL, "sign_match": SIGN_TOL},
    }


def estimate_to_dict(est) -> dict:
    return {"lambda": est.lam, "gamma": est.gamma, "stderr": est.stderr,
            "chains": est.chains, "steps_per_chain": est.steps_per_chain,
            "seed": est.seed, "factors_per_step": est.factors_per_step,
            "gamma_raw": est.gamma_raw, "stderr_raw": est.stderr_raw,
            "renorm_every": est.renorm_every}


def coeff_to_dict(c) -> dict:
    out = {"order": c.order,
           "value": None if c.value != c.value else c.value,  # NaN -> null
           "per_original_factor": c.per_original_factor}
    if c.nondegenerate is not None:
        out["nondegenerate"] = c.nondegenerate
    return out


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def _density_csv(profile) -> str:
    lines = ["theta,rho0,kappa,K"]
    for t, r, k, bk in zip(profile.theta, profile.rho0, profile.kappa, profile.big_k):
        lines.append(",".join(fmt17(v) for v in (t, r, k, bk)))
    return "\n".join(lines) + "\n"


def _sweep_csv(estimates) -> str:
    lines = ["lambda,gamma,stderr,chains,steps,seed"]
    for e in estimates:
        lines.append(",".join([fmt17(e.lam), fmt17(e.gamma), fmt17(e.stderr),
                               str(e.chains), str(e.steps_per_chain), str(e.seed)]))
    return "\n".join(lines) + "\n"


def cmd_classify(cfg, args) -> int:
    f = family_from_config(cfg)
    report = classify_anomaly(f, kmax=cfg["kmax"], grid_n=cfg["grid"])
    doc = report_to_dict(report)
    doc["is_critical_point"] = is_critical_point(f)
    doc["family"] = f.name
    _write(_dump(doc), args.out)
    return 0


def cmd_density(cfg, args) -> int:
    f = family_from_config(cfg)
    report = classify_anomaly(f, kmax=cfg["kmax"], grid_n=cfg["grid"])
    summary = {"family": f.name, "type": report.type, "order": report.order,
               "degree": report.degree, "grid": cfg["grid"]}
    if report.type in ("hyperbolic", "parabolic"):
        sp = support_points(report)
        summary["support_points"] = [{"theta": float(z), "stable": bool(s)}
                                     for z, s in zip(sp.zeros, sp.stable)]
        summary["note"] = ("lowest-order measure is formally atomic on the zeros of E(p); "
                           "no density CSV is produced for this type")
        sys.stdout.write(_dump(summary) + "\n")
        return 0
    profile = (rho0_elliptic(report, n=cfg["grid"]) if report.type == "elliptic"
               else rho0_diffusive(report, n=cfg["grid"]))
    summary.update({"c": profile.c, "C": profile.C})
    if args.format == "json":
        doc = dict(summary)
        doc["theta"] = [float(v) for v in profile.theta]
        doc["rho0"] = [float(v) for v in profile.rho0]
        doc["kappa"] = [float(v) for v in profile.kappa]
        doc["K"] = [float(v) for v in profile.big_k]
        _write(_dump(doc), args.out)
    else:
        if args.out is None:
            raise ConfigError("density CSV needs --out PATH (summary goes to stdout)")
        _write(_density_csv(profile), args.out)
        sys.stdout.write(_dump(summary) + "\n")
    return 0


def cmd_gamma(cfg, args) -> int:
    f = family_from_config(cfg)
    out: dict = {"family": f.name}
    if cfg["mode"] in ("perturbative", "both"):
        report = classify_anomaly(f, kmax=cfg["kmax"], grid_n=cfg["grid"])
        profile = rho0_diffusive(report, n=cfg["grid"]) if report.type == "diffusive" else None
        coeff = perturbative_coefficient(report, profile)
        out["perturbative"] = coeff_to_dict(coeff)
        out["type"] = report.type
        out["order"] = report.order
    if cfg["mode"] in ("mc", "both"):
        if "lambda" not in cfg:
            raise ConfigError("gamma in mc mode needs a lambda value")
        est = mc_gamma(f, cfg["lambda"], cfg["seed"], chains=cfg["chains"],
                       steps=cfg["steps"], renorm_every=cfg["renorm_every"],
                       threads=cfg["threads"])
        out["mc"] = estimate_to_dict(est)
    _write(_dump(out), args.out)
    return 0


def cmd_sweep(cfg, args) -> int:
    f = family_from_config(cfg)
    if "ladder" not in cfg:
        raise ConfigError("sweep needs a ladder of lambda values")
    declared = None
    kind = None
    try:
        report = classify_anomaly(f, kmax=cfg["kmax"], grid_n=cfg["grid"])
        kind = report.type
        declared = {"elliptic": 2.0, "diffusive": 2.0, "hyperbolic": 1.0}.get(kind)
    except ClassificationError:
        pass
    if kind == "parabolic":
        fit = parabolic_scaling_check(f, cfg["ladder"], cfg["seed"], chains=cfg["chains"],
                                      steps=cfg["steps"], renorm_every=cfg["renorm_every"],
                                      threads=cfg["threads"])
        result_doc = {"family": f.name, "type": kind, "fitted_exponent": fit.slope,
                      "dropped": list(fit.dropped)}
        estimates = fit.estimates
    else:
        result = sweep(f, cfg["ladder"], cfg["seed"], chains=cfg["chains"],
                       steps=cfg["steps"], renorm_every=cfg["renorm_every"],
                       threads=cfg["threads"], declared_order=declared)
        result_doc = {"family": f.name, "type": kind,
                      "fitted_exponent": result.fitted_exponent,
                      "fitted_coefficient": result.fitted_coefficient,
                      "declared_order": result.declared_order}
        estimates = result.estimates

    if args.format == "json":
        doc = dict(result_doc)
        doc["estimates"] = [estimate_to_dict(e) for e in estimates]
        _write(_dump(doc), args.out)
    else:
        if args.out is None:
            raise ConfigError("sweep CSV needs --out PATH (fit goes to stdout)")
        _write(_sweep_csv(estimates), args.out)
        sys.stdout.write(_dump(result_doc) + "\n")
    return 0


def cmd_catalog(cfg, args) -> int:
    if cfg.get("family") is None:
        doc = {"entries": {name: {"params": entry["params"], "about": entry["about"]}
                           for name, entry in catalog_mod.CATALOG.items()}}
        _write(_dump(doc), args.out)
        return 0
    f = family_from_config(cfg)
    doc = {"name": f.name, "factors_per_atom": f.factors_per_atom, "atoms": []}
    for a in f.atoms:
        j = a.jet()
        doc["atoms"].append({"weight": a.weight, "label": a.label,
                             "T0": _mat_list(j.t0), "T1": _mat_list(j.t1),
                             "T2": _mat_list(j.t2)})
    _write(_dump(doc), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sl2anomaly",
                                 description="anomalies of random SL(2,R) matrix products: "
                                             "classification, invariant density, Lyapunov exponent")
    ap.add_argument("command", choices=["classify", "density", "gamma", "sweep", "catalog"])
    ap.add_argument("--config", metavar="PATH", help="JSON config with the family and parameters")
    ap.add_argument("--out", metavar="PATH", help="primary output file (default: stdout)")
    ap.add_argument("--format", choices=["json", "csv"], default="csv",
                    help="primary output format for density/sweep (default csv)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--chains", type=int)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--lambda", dest="lam", type=float)
    ap.add_argument("--ladder", help="comma-separated decreasing lambda values")
    ap.add_argument("--grid", type=int)
    ap.add_argument("--kmax", type=int)
    ap.add_argument("--renorm-every", dest="renorm_every", type=int)
    ap.add_argument("--mode", choices=["mc", "perturbative", "both"])
    ap.add_argument("--threads", type=int,
                    help="worker cap for Monte-Carlo chains (env ANOMALY_THREADS)")
    return ap


def merge_config(args) -> dict:
    cfg = dict(DEFAULTS)
    cfg["threads"] = int(os.environ.get("ANOMALY_THREADS", "1"))
    file_cfg = load_config(args.config)
    cfg.update(file_cfg)
    for key, attr in [("seed", "seed"), ("chains", "chains"), ("steps", "steps"),
                      ("lambda", "lam"), ("grid", "grid"), ("kmax", "kmax"),
                      ("renorm_every", "renorm_every"), ("mode", "mode"),
                      ("threads", "threads")]:
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "ladder", None):
        try:
            cfg["ladder"] = [float(x) for x in args.ladder.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --ladder: {exc}") from exc
    return cfg


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": {"kind": kind, "message": message}}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args)
        handler = {"classify": cmd_classify, "density": cmd_density, "gamma": cmd_gamma,
                   "sweep": cmd_sweep, "catalog": cmd_catalog}[args.command]
        return handler(cfg, args)
    except (ConfigError, FamilyValidationError, json.JSONDecodeError, OSError, ValueError) as exc:
        return _fail("validation", str(exc), 2)
    except (ClassificationError, TypeMismatchError) as exc:
        kind = getattr(exc, "kind", "type")
        return _fail(kind, str(exc), 3)
    except RuntimeError as exc:
        return _fail("runtime", str(exc), 3)


if __name__ == "__main__":
    sys.exit(main())
