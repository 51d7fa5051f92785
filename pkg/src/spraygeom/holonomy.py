"""Holonomy distribution of a spray and the Liouville-membership obstruction.

Vector fields on the tangent bundle are kept as closures of (x, y) so that
brackets of brackets are differentiated through the earlier brackets by AD.
Rank and projections are measured in the Sasaki-type metric
G = g_ij dx^i dx^j + g_ij δy^i δy^j, in which horizontal, spray, vertical and
Liouville directions are mutually orthogonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import VectorFieldTM
from .chart import ChartPoint, DomainError, PreconditionError
from .models import FinslerModel, angular_lower_fn, metric_tensor, y_lower_fn
from .projective import DeformationContext
from .spray import SprayData, connection, connection_fn, require_geodesic, spray_vector

SPAN_RTOL = 1e-8
LIOUVILLE_TOL = 1e-6
MAX_GEN = 4


def _const(vec, like):
    return np.broadcast_to(vec, ad.shape(like)[:-1] + vec.shape)


def liouville_field(n: int) -> VectorFieldTM:
    return VectorFieldTM(lambda x, y: ad.concatenate([0.0 * y, y], -1), n, "C")


def spray_field(sp: SprayData) -> VectorFieldTM:
    return VectorFieldTM(lambda x, y: spray_vector(sp, x, y), sp.dim, "S")


def vertical_coordinate_fields(n: int) -> list:
    out = []
    for i in range(n):
        e = np.zeros(2 * n)
        e[n + i] = 1.0
        out.append(VectorFieldTM(lambda x, y, e=e: _const(e, y), n, f"d/dy{i + 1}"))
    return out


def horizontal_fields(sp: SprayData) -> list:
    """δ/δx^i = ∂/∂x^i − N^j_i ∂/∂y^j for i = 1..n."""
    n = sp.dim
    Nf = connection_fn(sp)
    fields = []
    for i in range(n):
        e = np.eye(n)[i]

        def h(x, y, i=i, e=e):
            return ad.concatenate([_const(e, y), -Nf(x, y)[..., :, i]], -1)

        fields.append(VectorFieldTM(h, n, f"h{i + 1}"))
    return fields


def special_frames(m: FinslerModel, sp: SprayData) -> tuple:
    """h_i = δ/δx^i − (y_i/F²) S and v_i = ∂/∂y^i − (y_i/F²) 𝔠."""
    n = m.dim
    Nf = connection_fn(sp)
    yl = y_lower_fn(m)
    hs, vs = [], []
    for i in range(n):
        e = np.eye(n)[i]

        def coef(x, y, i=i):
            return (yl(x, y)[..., i] / m.F2(x, y))[..., None]

        def h(x, y, i=i, e=e, coef=coef):
            c = coef(x, y)
            return ad.concatenate([e - c * y, -Nf(x, y)[..., :, i] + 2.0 * c * sp.G(x, y)], -1)

        def v(x, y, e=e, coef=coef):
            c = coef(x, y)
            return ad.concatenate([0.0 * y, e - c * y], -1)

        hs.append(VectorFieldTM(h, n, f"h{i + 1}"))
        vs.append(VectorFieldTM(v, n, f"v{i + 1}"))
    return hs, vs


def _z(x, y):
    return ad.concatenate([x, y], -1)


def bracket_field(X: VectorFieldTM, Y: VectorFieldTM) -> VectorFieldTM:
    """[X, Y] = D_X Y − D_Y X as a new field closure."""
    n = X.dim

    def br(x, y):
        z = _z(x, y)
        _, DYX = ad.jvp(lambda zz: Y(zz[..., :n], zz[..., n:]), z, X(x, y))
        _, DXY = ad.jvp(lambda zz: X(zz[..., :n], zz[..., n:]), z, Y(x, y))
        return DYX - DXY

    return VectorFieldTM(br, n, f"[{X.name},{Y.name}]")


def lie_bracket(X: VectorFieldTM, Y: VectorFieldTM, p: ChartPoint) -> np.ndarray:
    """Coordinate bracket DY·X − DX·Y at p, via full Jacobians."""
    DX = ad.field_jacobian(X, p)
    DY = ad.field_jacobian(Y, p)
    Xv = ad.value(X(p.x, p.y))
    Yv = ad.value(Y(p.x, p.y))
    return np.einsum("...ab,...b->...a", DY, Xv) - np.einsum("...ab,...b->...a", DX, Yv)


def evaluate(X: VectorFieldTM, p: ChartPoint) -> np.ndarray:
    return np.broadcast_to(ad.value(X(p.x, p.y)), p.batch_shape + (2 * X.dim,))


# --- metric on T(TM) -----------------------------------------------------


def sasaki_whitener(m: FinslerModel, sp: SprayData, p: ChartPoint) -> np.ndarray:
    """Matrix W with |W X| equal to the Sasaki norm of X (coordinates ∂_x then ∂_y)."""
    g = metric_tensor(m, p).g
    N = connection(sp, p).N
    Lt = np.swapaxes(np.linalg.cholesky(g), -1, -2)
    n = p.dim
    W = np.zeros(g.shape[:-2] + (2 * n, 2 * n))
    W[..., :n, :n] = Lt
    W[..., n:, :n] = Lt @ N
    W[..., n:, n:] = Lt
    return W


def sasaki_inner(m: FinslerModel, sp: SprayData, p: ChartPoint, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    W = sasaki_whitener(m, sp, p)
    return np.einsum("...a,...a->...", np.einsum("...ab,...b->...a", W, X), np.einsum("...ab,...b->...a", W, Y))


# --- span closure ------------------------------------------------------


@dataclass
class HolonomySpan:
    basis: np.ndarray            # (..., rank_max, 2n) orthonormal rows in whitened coordinates
    rank: np.ndarray             # (...,)
    generations: int
    tol: float
    rank_history: list = field(default_factory=list)
    converged: bool = True
    whitener: Optional[np.ndarray] = None
    fields: list = field(default_factory=list)

    def project_out(self, v: np.ndarray) -> np.ndarray:
        """Component of the (unwhitened) vector v orthogonal to the span, in whitened coordinates."""
        w = v if self.whitener is None else np.einsum("...ab,...b->...a", self.whitener, v)
        B = self.basis
        mask = (np.arange(B.shape[-2]) < self.rank[..., None])[..., None]
        B = np.where(mask, B, 0.0)
        coeff = np.einsum("...ka,...a->...k", B, w)
        return w - np.einsum("...ka,...k->...a", B, coeff)


def _rank_and_basis(vectors: np.ndarray, tol: float):
    # vectors: (..., k, 2n)
    u, s, vt = np.linalg.svd(vectors, full_matrices=False)
    smax = s[..., :1]
    rank = np.sum(s > tol * np.where(smax > 0, smax, 1.0), axis=-1)
    rank = np.where(smax[..., 0] > 0, rank, 0)
    return rank, vt


def holonomy_span(sp: SprayData, p: ChartPoint, max_gen: int = MAX_GEN, tol: float = SPAN_RTOL,
                  whitener: Optional[np.ndarray] = None) -> HolonomySpan:
    """Close the horizontal fields under Lie brackets, generation by generation.

    Generation k brackets every field of generations < k with every field of
    generation k−1. Stops once the rank is unchanged for a whole generation,
    reaches 2n, or ``max_gen`` generations have been taken.
    """
    if max_gen < 1:
        raise ValueError("max_gen must be at least 1")
    n = sp.dim
    if sp.model is not None:
        sp.model.check_domain(p.x, p.y)
    gens = [horizontal_fields(sp)]

    def whiten(vals):
        return vals if whitener is None else np.einsum("...ab,...kb->...ka", whitener, vals)

    values = whiten(np.stack([evaluate(X, p) for X in gens[0]], axis=-2))
    rank, basis = _rank_and_basis(values, tol)
    history = [rank]
    taken = 0
    converged = bool(np.all(rank == 2 * n))
    for k in range(1, max_gen + 1):
        if converged:
            break
        older = [X for gen in gens[:-1] for X in gen]
        last = gens[-1]
        new = [bracket_field(A, B) for A in older for B in last]
        new += [bracket_field(last[a], last[b]) for a in range(len(last)) for b in range(a + 1, len(last))]
        taken = k
        if not new:
            converged = True
            break
        vals = whiten(np.stack([evaluate(X, p) for X in new], axis=-2))
        values = np.concatenate([values, vals], axis=-2)
        new_rank, basis = _rank_and_basis(values, tol)
        gens.append(new)
        done = (new_rank == rank) | (new_rank == 2 * n)
        rank = new_rank
        history.append(rank)
        if np.all(done):
            converged = True
            break
    return HolonomySpan(basis, rank, taken, tol, history, converged, whitener,
                        [X for gen in gens for X in gen])


def holonomy_for(m: FinslerModel, sp: SprayData, p: ChartPoint, max_gen: int = MAX_GEN, tol: float = SPAN_RTOL) -> HolonomySpan:
    """Holonomy span measured in the Sasaki metric of ``m`` with the connection of ``sp``."""
    return holonomy_span(sp, p, max_gen, tol, whitener=sasaki_whitener(m, sp, p))


@dataclass
class ObstructionReport:
    contains_liouville: np.ndarray
    residual: np.ndarray
    rank: np.ndarray
    generations: int
    witness_used: str = "bracket_closure"
    converged: bool = True

    @property
    def verdict(self) -> list:
        flags = np.atleast_1d(self.contains_liouville)
        return ["not Finsler metrizable (obstruction found)" if f else "no obstruction found at this point"
                for f in flags]

    def to_json_records(self, p: ChartPoint) -> list:
        recs = []
        for k in range(len(p)):
            q = p[k] if p.batch_shape else p
            recs.append({
                "point": {"x": q.x.tolist(), "y": q.y.tolist()},
                "rank": int(np.atleast_1d(self.rank)[k]),
                "generations": self.generations,
                "residual": float(np.atleast_1d(self.residual)[k]),
                "contains_liouville": bool(np.atleast_1d(self.contains_liouville)[k]),
                "witness": self.witness_used,
            })
        return recs


def liouville_test(span: HolonomySpan, p: ChartPoint, tol: float = LIOUVILLE_TOL) -> ObstructionReport:
    """Project 𝔠 = (0, y) onto the span; 𝔠 inside the span is an obstruction to metrizability."""
    C = np.concatenate([np.zeros_like(p.y), p.y], axis=-1)
    Cw = C if span.whitener is None else np.einsum("...ab,...b->...a", span.whitener, C)
    resid = np.linalg.norm(span.project_out(C), axis=-1) / np.linalg.norm(Cw, axis=-1)
    return ObstructionReport(resid < tol, resid, span.rank, span.generations, "bracket_closure", span.converged)


# --- direct witness ------------------------------------------------------


@dataclass(frozen=True)
class WitnessResult:
    coefficient: np.ndarray   # 𝔠-coefficient of ṽ[h̃_i, v_j]
    predicted: np.ndarray     # (2λ/F) h_ij
    vector: np.ndarray        # ṽ[h̃_i, v_j], vertical components


def direct_witness(ctx: DeformationContext, p: ChartPoint, i: int, j: int) -> WitnessResult:
    """𝔠-coefficient of ṽ[h̃_i, v_j] next to its closed form (2λ/F) h_ij (0-based i, j)."""
    f = ctx.factor
    if f.kind != "lambda_F" or f.model is None:
        raise PreconditionError("the direct witness needs P = λF")
    m, lam = f.model, f.lam
    F = m.F(p.x, p.y)
    if np.any(np.abs(F) < 1e-12):
        raise DomainError("F vanishes at the witness point")
    require_geodesic(m, ctx.base, p)
    n = m.dim
    hs, vs = special_frames(m, ctx.base)
    Nt = connection_fn(ctx.deformed)
    h_i = hs[i]

    def h_tilde(x, y):
        xh = h_i(x, y)[..., :n]
        return ad.concatenate([xh, -ad.einsum("...ab,...b->...a", Nt(x, y), xh)], -1)

    W = evaluate(bracket_field(VectorFieldTM(h_tilde, n, f"h~{i + 1}"), vs[j]), p)
    Ntv = connection(ctx.deformed, p).N
    vert = W[..., n:] + np.einsum("...ab,...b->...a", Ntv, W[..., :n])
    g = metric_tensor(m, p).g
    y_low = np.einsum("...ab,...b->...a", g, p.y)
    coeff = np.einsum("...a,...a->...", y_low, vert) / (F * F)
    h_ij = ad.value(angular_lower_fn(m)(p.x, p.y))[..., i, j]
    return WitnessResult(coeff, 2.0 * lam / F * h_ij, vert)


def report_json(report: ObstructionReport, p: ChartPoint) -> str:
    return json.dumps(report.to_json_records(p), indent=2)
