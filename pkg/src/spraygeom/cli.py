"""Batch front-end: one experiment per invocation, JSON report plus CSV files.

    spraygeom <experiment> [--config cfg.json] [--out prefix] [--seed N]

Exit status is 0 when every asserted check passes, 1 when any check fails and
2 on configuration or domain errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import geodesics as geo
from . import holonomy as hol
from . import models as mdl
from . import projective as pj
from . import spray as spr
from .chart import (ChartPoint, DomainError, HomogeneityError, PreconditionError,
                    RegularityError, sample_points)

EXPERIMENTS = ("inspect", "verify", "deform", "holonomy", "geodesic", "reparam")
ALIASES = {"verify_identities": "verify"}   # accepted in the config's "experiment" field

DEFAULT_TOLERANCES = {
    "homogeneity_F": 1e-10,
    "metric_positive": 1e-10,
    "angular_annihilates_y": 1e-10,
    "g_equals_h_plus_yy": 1e-9,
    "angular_rank": 0.0,
    "y_lower": 1e-10,
    "spray_euler": 1e-9,
    "connection_contraction": 1e-9,
    "berwald_symmetry": 1e-9,
    "jacobi_annihilates_y": 1e-8,
    "curvature_contraction": 1e-8,
    "curvature_routes": 1e-7,
    "isddj_residual": 1e-8,
    "y_horizontal_derivative": 1e-8,
    "spray_conserves_F": 1e-9,
    "nabla_dJF": 1e-8,
    "helmholtz": 1e-8,
    "ladder": 1e-8,
    "deformed_euler": 1e-9,
    "deformed_connection": 1e-8,
    "deformed_jacobi_general": 1e-7,
    "deformed_jacobi_lambda_F": 1e-7,
    "deformed_jacobi_annihilates_y": 1e-8,
    "spray_derivative_of_P": 1e-9,
    "eigen_shift": 1e-7,
    "flag_curvature": 1e-7,
    "base_liouville_residual": 0.5,
    "deformed_liouville_residual": 1e-6,
    "witness": 1e-5,
    "geodesic_F_drift": 1e-7,
    "path_equivalence": 1e-5,
    "deformed_F_drift": 1e-2,
    "reparam_rate": 1e-6,
}


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


# --- configuration --------------------------------------------------------


@dataclass
class SamplerSpec:
    count: int = 10
    seed: int = 0
    box: Optional[list] = None   # [lo, hi], scalars or n-vectors


@dataclass
class GeodesicSpec:
    x0: Optional[list] = None
    v0: Optional[list] = None
    t_end: float = 1.0
    steps: int = 1000
    compare_steps: int = 2000


@dataclass
class ExperimentConfig:
    experiment: str
    model: str = "euclidean"
    dim: int = 2
    params: dict = field(default_factory=dict)
    points: Optional[list] = None          # [{"x": [...], "y": [...]}, ...]
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    lambdas: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    tolerances: dict = field(default_factory=dict)
    output: str = "report"
    geodesic: GeodesicSpec = field(default_factory=GeodesicSpec)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))


def _lambdas(spec) -> list:
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        try:
            return [float(v) for v in np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))]
        except KeyError as exc:
            raise ConfigError(f"lambda range needs start, stop and num (missing {exc})") from None
    raise ConfigError(f"lambdas must be a number, a list or a range object, got {type(spec).__name__}")


def _build(cls, raw, what: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{what} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    extra = sorted(set(raw) - known)
    if extra:
        raise ConfigError(f"unknown {what} key(s): {', '.join(extra)}")
    return cls(**raw)


def parse_config(raw: dict, experiment: str) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    declared = raw.pop("experiment", experiment)
    declared = ALIASES.get(declared, declared)
    if declared != experiment:
        raise ConfigError(f"config declares experiment {declared!r} but {experiment!r} was requested")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = sorted(set(raw) - known)
    if extra:
        raise ConfigError(f"unknown config key(s): {', '.join(extra)}")
    cfg = ExperimentConfig(experiment=experiment, **{k: v for k, v in raw.items()
                                                      if k not in ("sampler", "geodesic", "lambdas")})
    cfg.sampler = _build(SamplerSpec, raw.get("sampler"), "sampler")
    cfg.geodesic = _build(GeodesicSpec, raw.get("geodesic"), "geodesic")
    cfg.lambdas = _lambdas(raw.get("lambdas", cfg.lambdas))
    if "sampler" in raw and "seed" not in raw["sampler"]:
        raise ConfigError("a random sampler needs an explicit seed")
    if not isinstance(cfg.dim, int) or cfg.dim < 2:
        raise ConfigError("dim must be an integer >= 2")
    unknown_tol = sorted(set(cfg.tolerances) - set(DEFAULT_TOLERANCES))
    if unknown_tol:
        raise ConfigError(f"unknown tolerance name(s): {', '.join(unknown_tol)}")
    return cfg


def load_config(path: Optional[str], experiment: str) -> ExperimentConfig:
    if path is None:
        return parse_config({}, experiment)
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(raw, experiment)


def chart_points(cfg: ExperimentConfig, model: mdl.FinslerModel) -> ChartPoint:
    n = model.dim
    if cfg.points is not None:
        try:
            x = np.array([pt["x"] for pt in cfg.points], dtype=float)
            y = np.array([pt["y"] for pt in cfg.points], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"points must be a list of {{x: [...], y: [...]}} objects ({exc})") from None
        if x.ndim != 2 or x.shape != y.shape or x.shape[1] != n:
            raise ConfigError(f"every point needs {n} x- and {n} y-coordinates")
        p = ChartPoint(x, y)
    else:
        s = cfg.sampler
        box = model.box if s.box is None else tuple(s.box)
        if len(box) != 2:
            raise ConfigError("sampler box must be [lo, hi]")
        p = sample_points(n, int(s.count), box, int(s.seed))
    model.check_domain(p.x, p.y)
    return p


# --- report ----------------------------------------------------------------


@dataclass
class Check:
    name: str
    paper_anchor: str
    value: float
    tolerance: float
    bound: str = "upper"    # "upper": pass iff value < tol; "lower": pass iff value > tol; "equal": value == tol

    @property
    def passed(self) -> bool:
        v = self.value
        if not math.isfinite(v):
            return False
        if self.bound == "upper":
            return v < self.tolerance
        if self.bound == "lower":
            return v > self.tolerance
        return v == self.tolerance

    def record(self) -> dict:
        return {"name": self.name, "paper_anchor": self.paper_anchor, "value": self.value,
                "tolerance": self.tolerance, "bound": self.bound, "pass": self.passed}


class Report:
    def __init__(self, cfg: ExperimentConfig, model: mdl.FinslerModel, points: ChartPoint):
        self.cfg = cfg
        self.model = model
        self.points = points
        self.checks: list = []
        self.sections: dict = {}

    def check(self, name: str, anchor: str, value, tol_name: str, bound: str = "upper", suffix: str = "") -> None:
        v = float(np.max(value)) if bound != "lower" else float(np.min(value))
        self.checks.append(Check(name + suffix, anchor, v, self.cfg.tol(tol_name), bound))

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        cfg = dataclasses.asdict(self.cfg)
        return {
            "experiment": self.cfg.experiment,
            "model": {"name": self.model.name, "dim": self.model.dim, "params": dict(self.model.params),
                      "known_flag_curvature": self.model.known_flag_curvature},
            "config": cfg,
            "n_points": len(self.points),
            "checks": [c.record() for c in self.checks],
            **self.sections,
            "all_pass": self.all_pass,
        }


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# --- experiments ----------------------------------------------------------


def _max_abs(a, batch_ndim: int = 1) -> np.ndarray:
    a = np.abs(np.asarray(a, dtype=float))
    return a.reshape(a.shape[:batch_ndim] + (-1,)).max(axis=-1)


def _rel(a, b) -> np.ndarray:
    """Per-point max |a − b| over the largest entry of b."""
    diff = _max_abs(np.asarray(a) - np.asarray(b))
    scale = np.maximum(_max_abs(b), 1e-300)
    return np.where(diff == 0.0, 0.0, diff / scale)


def run_inspect(rep: Report) -> None:
    m, p = rep.model, rep.points
    sp = spr.geodesic_spray(m)
    met = mdl.metric_tensor(m, p)
    ang = mdl.angular_data(m, p)
    hom = mdl.check_homogeneity(m, p)
    rep.check("homogeneity_F", "F(x, λy) = λF(x, y), y^i ∂F/∂y^i = F",
              np.maximum(hom.scaling_residual, hom.euler_residual), "homogeneity_F")
    rep.check("metric_positive", "g_ij = ½ ∂²F²/∂y^i∂y^j positive definite (smallest eigenvalue)",
              met.min_eigenvalue, "metric_positive", bound="lower")
    rep.check("angular_annihilates_y", "h^i_j y^j = 0",
              _max_abs(np.einsum("...ij,...j->...i", ang.h_mixed, p.y)), "angular_annihilates_y")
    values = []
    for k in range(len(p)):
        q = p[k]
        values.append({
            "x": q.x, "y": q.y,
            "F": float(ad.value(m.F(q.x, q.y))),
            "g": met.g[k], "h_lower": ang.h_lower[k], "h_mixed": ang.h_mixed[k],
            "G": spr.spray_coefficients(sp, q),
            "N": spr.connection(sp, q).N,
            "jacobi": spr.jacobi(sp, q).Rjac,
        })
    rep.sections["values"] = values


def _ladder(sp, m, p) -> dict:
    q = p.scaled(2.0)
    F2y = 2.0 * np.asarray(m.F(p.x, p.y))
    out = {
        "F": np.abs(np.asarray(m.F(q.x, q.y)) - F2y) / F2y,
        "G": _rel(spr.spray_coefficients(sp, q), 4.0 * spr.spray_coefficients(sp, p)),
        "N": _rel(spr.connection(sp, q).N, 2.0 * spr.connection(sp, p).N),
        "jacobi": _rel(spr.jacobi(sp, q).Rjac, 4.0 * spr.jacobi(sp, p).Rjac),
        "curvature": _rel(spr.curvature(sp, q).Rcurv, 2.0 * spr.curvature(sp, p).Rcurv),
    }
    return out


def run_verify(rep: Report) -> None:
    m, p = rep.model, rep.points
    sp = spr.geodesic_spray(m)
    n = m.dim
    met = mdl.metric_tensor(m, p)
    ang = mdl.angular_data(m, p)
    F = ang.F
    g_rebuilt = ang.h_lower + np.einsum("...i,...j->...ij", ang.y_lower, ang.y_lower) / (F * F)[..., None, None]
    rep.check("g_equals_h_plus_yy", "g_ij = h_ij + y_i y_j / F²", _max_abs(met.g - g_rebuilt), "g_equals_h_plus_yy")
    rep.check("angular_rank", "rank h_ij = n − 1", np.abs(mdl.numerical_rank(ang.h_lower) - (n - 1)), "angular_rank",
              bound="equal")
    rep.check("angular_annihilates_y", "h^i_j y^j = 0",
              _max_abs(np.einsum("...ij,...j->...i", ang.h_mixed, p.y)), "angular_annihilates_y")
    rep.check("y_lower", "y_i = ½ ∂F²/∂y^i = g_ik y^k",
              _max_abs(ad.value(mdl.y_lower_fn(m)(p.x, p.y)) - ang.y_lower), "y_lower")
    rep.check("spray_euler", "y^j ∂G^i/∂y^j = 2G^i", spr.euler_residual(sp.G, p), "spray_euler")
    G = spr.spray_coefficients(sp, p)
    con = spr.connection(sp, p)
    rep.check("connection_contraction", "N^i_j y^j = 2G^i",
              _max_abs(np.einsum("...ij,...j->...i", con.N, p.y) - 2.0 * G), "connection_contraction")
    rep.check("berwald_symmetry", "G^i_jk = G^i_kj", _max_abs(con.berwald - np.swapaxes(con.berwald, -1, -2)),
              "berwald_symmetry")
    R = spr.jacobi(sp, p).Rjac
    rep.check("jacobi_annihilates_y", "R^i_j y^j = 0", _max_abs(np.einsum("...ij,...j->...i", R, p.y)),
              "jacobi_annihilates_y")
    Rc = spr.curvature(sp, p).Rcurv
    Rd = spr.curvature(sp, p, route="delta").Rcurv
    rep.check("curvature_contraction", "R^i_kj y^k = R^i_j",
              _max_abs(np.einsum("...ikj,...k->...ij", Rc, p.y) - R), "curvature_contraction")
    rep.check("curvature_routes", "⅓(∂R^i_k/∂y^j − ∂R^i_j/∂y^k) = δN^i_j/δx^k − δN^i_k/δx^j",
              _max_abs(Rc - Rd), "curvature_routes")
    rep.check("isddj_residual", "y^k ∂²F²/∂x^k∂y^l − 4 g_lk G^k − ∂F²/∂x^l = 0",
              _max_abs(spr.isddj_residual(m, p, sp)), "isddj_residual")
    rep.check("y_horizontal_derivative", "y_i|j = 0", _max_abs(spr.horizontal_covariant_y(m, p, sp)),
              "y_horizontal_derivative")
    rep.check("spray_conserves_F", "S(F) = 0", np.abs(spr.spray_conserves_F(m, p, sp)), "spray_conserves_F")
    rep.check("nabla_dJF", "∇(d_J F) = 0", _max_abs(spr.nabla_semibasic_dJF(m, p, sp)), "nabla_dJF")
    rep.check("helmholtz", "g_ik R^k_j = g_jk R^k_i", _max_abs(spr.helmholtz_asymmetry(m, p, sp)), "helmholtz")
    exps = {"F": 1, "G": 2, "N": 1, "jacobi": 2, "curvature": 1}
    for name, val in _ladder(sp, m, p).items():
        rep.check(f"ladder_{name}", f"{name}(x, 2y) = 2^{exps[name]} {name}(x, y)", val, "ladder")


def _admissibility(m, p, lambdas) -> tuple:
    eig = pj.eigen_analysis(m, p)
    F = np.asarray(eig.F)
    table = []
    mask = {}
    for lam in lambdas:
        margin = np.abs(lam * lam * (F * F)[..., None] + eig.kappas).min(axis=-1) / (F * F)
        ok = (lam != 0.0) & (margin > pj.ADMISSIBLE_RTOL)
        kl = None
        if m.known_flag_curvature is not None:
            kl = pj.admissible_lambda([], 1.0, [lam], m.known_flag_curvature)[0].constant_curvature_form
        mask[lam] = ok
        table.append({"lambda": lam, "admissible_at_all_points": bool(np.all(ok)),
                      "admissible_points": int(np.count_nonzero(ok)), "min_margin": float(np.min(margin)),
                      "constant_curvature_form": kl})
    return eig, table, mask


def run_deform(rep: Report) -> None:
    m, p = rep.model, rep.points
    sp = spr.geodesic_spray(m)
    eig, table, _ = _admissibility(m, p, rep.cfg.lambdas)
    rep.sections["admissibility"] = table
    F = np.asarray(eig.F)
    if m.known_flag_curvature is not None:
        rep.check("flag_curvature", f"κ_α / F² = {m.known_flag_curvature:g}",
                  _max_abs(eig.kappas / (F * F)[..., None] - m.known_flag_curvature), "flag_curvature")
    for lam in rep.cfg.lambdas:
        sfx = f"[lambda={lam:g}]"
        ctx = pj.deform(sp, pj.ProjectiveFactor.lambda_F(lam, m), certificate=p)
        rep.check("deformed_euler", "y^j ∂G̃^i/∂y^j = 2G̃^i", spr.euler_residual(ctx.deformed.G, p),
                  "deformed_euler", suffix=sfx)
        rep.check("deformed_connection", "Ñ^i_j = N^i_j + λ(F δ^i_j + y^i ∂F/∂y^j)",
                  pj.deformed_connection(ctx, p).discrepancy, "deformed_connection", suffix=sfx)
        gen = pj.deformed_jacobi_general(ctx, p)
        rep.check("deformed_jacobi_general",
                  "R̃^i_j = R^i_j + (P² − S(P))δ^i_j + (2δP/δx^j − P ∂P/∂y^j − ∇(∂P/∂y^j)) y^i",
                  gen.discrepancy, "deformed_jacobi_general", suffix=sfx)
        rep.check("deformed_jacobi_lambda_F", "R̃^i_j = R^i_j + λ²F² h^i_j",
                  pj.deformed_jacobi_finsler(ctx, p).discrepancy, "deformed_jacobi_lambda_F", suffix=sfx)
        rep.check("deformed_jacobi_annihilates_y", "R̃^i_j y^j = 0",
                  _max_abs(np.einsum("...ij,...j->...i", gen.direct, p.y)), "deformed_jacobi_annihilates_y",
                  suffix=sfx)
        SP = ad.value(spr.along_spray(sp, ctx.factor.P, p.x, p.y))
        rep.check("spray_derivative_of_P", "S(P) = λ S(F) = 0", np.abs(SP), "spray_derivative_of_P", suffix=sfx)
        shifted, predicted = pj.eigen_shift(ctx, p)
        rep.check("eigen_shift", "eigenvalues of R̃ on the g-orthocomplement of y = κ_α + λ²F²",
                  _max_abs(shifted - predicted), "eigen_shift", suffix=sfx)


def run_holonomy(rep: Report) -> None:
    m, p = rep.model, rep.points
    n = m.dim
    sp = spr.geodesic_spray(m)
    base = hol.liouville_test(hol.holonomy_for(m, sp, p), p)
    rep.check("base_liouville_residual", "geodesic spray: 𝔠 ∉ Hol_S (residual of 𝔠 against the span)",
              base.residual, "base_liouville_residual", bound="lower")
    _, table, mask = _admissibility(m, p, rep.cfg.lambdas)
    rep.sections["admissibility"] = table
    records = {"base": base.to_json_records(p)}
    for lam in rep.cfg.lambdas:
        sfx = f"[lambda={lam:g}]"
        ctx = pj.deform(sp, pj.ProjectiveFactor.lambda_F(lam, m))
        report = hol.liouville_test(hol.holonomy_for(m, ctx.deformed, p), p)
        records[f"lambda={lam:g}"] = report.to_json_records(p)
        ok = mask[lam]
        if not np.any(ok):
            continue
        rep.check("deformed_liouville_residual", "admissible λ: 𝔠 ∈ Hol_S̃ (residual of 𝔠 against the span)",
                  report.residual[ok], "deformed_liouville_residual", suffix=sfx)
        q = ChartPoint(p.x[ok], p.y[ok])
        F = np.asarray(ad.value(m.F(q.x, q.y)))
        errs = []
        for i in range(n):
            for j in range(n):
                w = hol.direct_witness(ctx, q, i, j)
                errs.append(np.abs(w.coefficient - w.predicted) / (2.0 * abs(lam) / F))
        h_scale = _max_abs(mdl.angular_data(m, q).h_lower)
        rep.check("witness", "𝔠-coefficient of ṽ[h̃_i, v_j] = (2λ/F) h_ij",
                  np.max(errs, axis=0) / h_scale, "witness", suffix=sfx)
    rep.sections["holonomy"] = records


def _initial_conditions(rep: Report):
    gs = rep.cfg.geodesic
    m = rep.model
    if gs.x0 is not None or gs.v0 is not None:
        if gs.x0 is None or gs.v0 is None:
            raise ConfigError("geodesic needs both x0 and v0")
        x0, v0 = np.asarray(gs.x0, dtype=float), np.asarray(gs.v0, dtype=float)
        if x0.shape[-1:] != (m.dim,) or v0.shape[-1:] != (m.dim,):
            raise ConfigError(f"x0 and v0 need {m.dim} components")
    else:
        x0, v0 = rep.points.x, rep.points.y
    m.check_domain(x0, v0)
    return x0, geo.unit_speed(m, x0, v0)


def _first(traj: geo.Trajectory) -> geo.Trajectory:
    return traj[(0,) * (traj.x.ndim - 2)] if traj.x.ndim > 2 else traj


def run_geodesic(rep: Report) -> None:
    m, gs = rep.model, rep.cfg.geodesic
    sp = spr.geodesic_spray(m)
    x0, v0 = _initial_conditions(rep)
    base = geo.integrate(sp, x0, v0, gs.t_end, gs.steps)
    F = geo.along(base, m.F)
    rep.check("geodesic_F_drift", "F(x(t), ẋ(t)) = F(x0, v0) along geodesics of S", np.abs(F - F[:1]).max(axis=0),
              "geodesic_F_drift")
    geo.write_trajectory_csv(_first(base), f"{rep.cfg.output}_geodesic_base.csv")
    summary = {"base_exited": base.exited, "lambdas": []}
    for lam in rep.cfg.lambdas:
        sfx = f"[lambda={lam:g}]"
        ctx = pj.deform(sp, pj.ProjectiveFactor.lambda_F(lam, m))
        cmp = geo.path_equivalence(ctx, x0, v0, gs.t_end, gs.compare_steps)
        rep.check("path_equivalence", "S and S̃ = S − 2λF𝔠 trace the same arc-length parameterized paths",
                  cmp.distances, "path_equivalence", suffix=sfx)
        deformed = geo.integrate(ctx.deformed, x0, v0, gs.t_end, gs.steps)
        Fd = geo.along(deformed, m.F)
        drift = np.abs(Fd - Fd[:1]).max(axis=0)
        if lam != 0.0:
            rep.check("deformed_F_drift", "S̃(F) = −2λF² ≠ 0: the deformed parameterization is not by F-length",
                      drift, "deformed_F_drift", bound="lower", suffix=sfx)
        geo.write_trajectory_csv(_first(deformed), f"{rep.cfg.output}_geodesic_lambda{lam:g}.csv")
        summary["lambdas"].append({"lambda": lam, "common_arc": cmp.common_arc, "truncated": cmp.truncated,
                                   "deformed_exited": deformed.exited, "max_F_drift": float(np.max(drift))})
    rep.sections["geodesic"] = summary


def run_reparam(rep: Report) -> None:
    m, gs = rep.model, rep.cfg.geodesic
    sp = spr.geodesic_spray(m)
    x0, v0 = _initial_conditions(rep)
    base = geo.integrate(sp, x0, v0, gs.t_end, gs.steps)
    t = base.t.reshape((-1,) + (1,) * (base.x.ndim - 2))
    closed = []
    for lam in rep.cfg.lambdas:
        sfx = f"[lambda={lam:g}]"
        trace = geo.reparam_ode(pj.ProjectiveFactor.lambda_F(lam, m), base)
        expected = np.exp(2.0 * lam * t)
        rep.check("reparam_rate", "dt̃/dt = e^{2λt} on unit-speed geodesics",
                  np.abs(trace.dttilde / expected - 1.0).max(axis=0), "reparam_rate", suffix=sfx)
        geo.write_reparam_csv(geo.ReparamTrace(trace.t, _first_col(trace.ttilde), _first_col(trace.dttilde),
                                               trace.params), f"{rep.cfg.output}_reparam_lambda{lam:g}.csv")
        if lam != 0.0:
            c2 = 1.0 / (4.0 * lam * lam) * np.sign(lam)
            _, res = geo.closed_form_reparam(lam, 1.0, c2, np.array([0.0, gs.t_end]))
            closed.append({"lambda": lam, "c1": 1.0, "c2": c2, "residual_at_t0": res[0],
                           "residual_at_t_end": res[1]})
    rep.sections["closed_form_reparam"] = closed


def _first_col(a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[0], -1)[:, 0]


RUNNERS = {
    "inspect": run_inspect,
    "verify": run_verify,
    "deform": run_deform,
    "holonomy": run_holonomy,
    "geodesic": run_geodesic,
    "reparam": run_reparam,
}


def run(cfg: ExperimentConfig) -> Report:
    model = mdl.get_model(cfg.model, cfg.dim, **cfg.params)
    points = chart_points(cfg, model)
    rep = Report(cfg, model, points)
    RUNNERS[cfg.experiment](rep)
    return rep


def write_report(rep: Report) -> Path:
    path = Path(f"{rep.cfg.output}.json")
    path.write_text(dumps(rep.to_dict()) + "\n")
    return path


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spraygeom", description=__doc__.split("\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON experiment configuration")
    ap.add_argument("--out", help="output path prefix (overrides the config)")
    ap.add_argument("--seed", type=int, help="sampler seed (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.sampler.seed = args.seed
        if args.out is not None:
            cfg.output = args.out
        Path(cfg.output).parent.mkdir(parents=True, exist_ok=True)
        rep = run(cfg)
    except (ConfigError, DomainError, RegularityError, HomogeneityError, PreconditionError,
            KeyError, TypeError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    path = write_report(rep)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  value={c.value:.3e}  tol={c.tolerance:g}")
    print(f"report: {path}")
    return 0 if rep.all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
