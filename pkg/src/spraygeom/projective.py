"""Projective deformations S̃ = S − 2P𝔠 and the eigen analysis of the Jacobi endomorphism."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .chart import ChartPoint, HomogeneityError, PreconditionError
from .models import FinslerModel, angular_data, metric_tensor
from .spray import SprayData, along_spray, connection, geodesic_spray, jacobi, require_geodesic

FACTOR_EULER_TOL = 1e-8
HELMHOLTZ_TOL = 1e-6
ADMISSIBLE_RTOL = 1e-9


@dataclass(frozen=True)
class ProjectiveFactor:
    """A 1-homogeneous function P(x, y); ``kind`` is ``"lambda_F"`` or ``"custom"``."""

    P: Callable
    dim: int
    kind: str = "custom"
    lam: Optional[float] = None
    model: Optional[FinslerModel] = None

    def __call__(self, x, y):
        return self.P(x, y)

    @classmethod
    def lambda_F(cls, lam: float, model: FinslerModel) -> "ProjectiveFactor":
        return cls(lambda x, y: lam * model.F(x, y), model.dim, "lambda_F", float(lam), model)

    @classmethod
    def zero(cls, dim: int) -> "ProjectiveFactor":
        return cls(lambda x, y: 0.0 * y[..., 0], dim, "custom")

    def euler_residual(self, p: ChartPoint) -> np.ndarray:
        val, dP = ad.value_and_jacobian(lambda yy: self.P(p.x, yy), p.y)
        return np.abs(np.einsum("...i,...i->...", dP, p.y) - val)

    def __add__(self, other: "ProjectiveFactor") -> "ProjectiveFactor":
        return ProjectiveFactor(lambda x, y: self.P(x, y) + other.P(x, y), self.dim, "custom")


@dataclass(frozen=True)
class DeformationContext:
    base: SprayData
    factor: ProjectiveFactor
    deformed: SprayData


def deform(base: SprayData, factor: ProjectiveFactor, certificate: Optional[ChartPoint] = None) -> DeformationContext:
    """G̃^i = G^i + P y^i, the coordinate form of S̃ = S − 2P𝔠."""
    if certificate is not None:
        res = factor.euler_residual(certificate)
        if np.max(res) >= FACTOR_EULER_TOL * (1.0 + np.max(np.abs(ad.value(factor.P(certificate.x, certificate.y))))):
            raise HomogeneityError(f"projective factor is not 1-homogeneous: Euler residual {np.max(res):.3e}")

    def G(x, y):
        return base.G(x, y) + factor.P(x, y)[..., None] * y

    deformed = SprayData(G, base.dim, "deformed", model=base.model, name=f"deformed({base.name})")
    ctx = DeformationContext(base, factor, deformed)
    object.__setattr__(deformed, "context", ctx)
    return ctx


@dataclass(frozen=True)
class RouteComparison:
    direct: np.ndarray
    formula: np.ndarray
    discrepancy: np.ndarray  # max entrywise |direct − formula| per point


def _compare(direct, formula) -> RouteComparison:
    diff = np.abs(direct - formula)
    return RouteComparison(direct, formula, np.max(diff.reshape(diff.shape[:-2] + (-1,)), axis=-1))


def deformed_connection(ctx: DeformationContext, p: ChartPoint) -> RouteComparison:
    """Ñ^i_j = N^i_j + P δ^i_j + y^i ∂P/∂y^j against ∂G̃^i/∂y^j."""
    direct = connection(ctx.deformed, p).N
    N = connection(ctx.base, p).N
    P, dP = ad.value_and_jacobian(lambda yy: ctx.factor.P(p.x, yy), p.y)
    n = p.dim
    formula = N + np.asarray(P)[..., None, None] * np.eye(n) + np.einsum("...i,...j->...ij", p.y, dP)
    return _compare(direct, formula)


def deformed_jacobi_general(ctx: DeformationContext, p: ChartPoint) -> RouteComparison:
    """R̃ directly, and as R + (P² − S(P))δ + (2δP/δx^j − P∂P/∂y^j − ∇(∂P/∂y^j)) y^i."""
    base, P = ctx.base, ctx.factor.P
    n = p.dim
    direct = jacobi(ctx.deformed, p).Rjac
    R = jacobi(base, p).Rjac
    N = connection(base, p).N
    Pv, DP = ad.value_and_jacobian(lambda z: P(z[..., :n], z[..., n:]), np.concatenate([p.x, p.y], -1))
    Pv = np.asarray(Pv)
    Px, Py = DP[..., :n], DP[..., n:]
    SP = np.asarray(ad.value(along_spray(base, P, p.x, p.y)))
    SPy = ad.value(along_spray(base, lambda xx, yy: ad.jac_y(P, xx, yy), p.x, p.y))
    deltaP = Px - np.einsum("...kj,...k->...j", N, Py)
    nablaPy = SPy - np.einsum("...kj,...k->...j", N, Py)
    covector = 2.0 * deltaP - Pv[..., None] * Py - nablaPy
    formula = (R + (Pv * Pv - SP)[..., None, None] * np.eye(n)
               + np.einsum("...i,...j->...ij", p.y, covector))
    return _compare(direct, formula)


def _lambda_F_parts(ctx: DeformationContext):
    f = ctx.factor
    if f.kind != "lambda_F" or f.model is None:
        raise PreconditionError("this formula needs a projective factor of the form λF")
    return f.lam, f.model


def deformed_jacobi_finsler(ctx: DeformationContext, p: ChartPoint) -> RouteComparison:
    """R̃^i_j = R^i_j + λ²F² h^i_j against the direct computation on the deformed spray."""
    lam, m = _lambda_F_parts(ctx)
    require_geodesic(m, ctx.base, p)
    ang = angular_data(m, p)
    formula = jacobi(ctx.base, p).Rjac + (lam * lam * ang.F * ang.F)[..., None, None] * ang.h_mixed
    return _compare(jacobi(ctx.deformed, p).Rjac, formula)


# --- eigen analysis ----------------------------------------------------


def orthocomplement_basis(g: np.ndarray, y: np.ndarray) -> np.ndarray:
    """g-orthonormal basis of {X : g(X, y) = 0}, as columns of an (..., n, n−1) array.

    Gram–Schmidt over the coordinate vectors, skipping the one most parallel to y.
    """
    n = y.shape[-1]
    batch = np.broadcast_shapes(g.shape[:-2], y.shape[:-1])
    g = np.broadcast_to(g, batch + (n, n))
    y = np.broadcast_to(y, batch + (n,))

    def inner(a, b):
        return np.einsum("...i,...ij,...j->...", a, g, b)

    y_low = np.einsum("...ij,...j->...i", g, y)
    ynorm = np.sqrt(inner(y, y))
    cos = np.abs(y_low) / (np.sqrt(np.einsum("...ii->...i", g)) * ynorm[..., None])
    skip = np.argmax(cos, axis=-1)
    # coordinate indices in order with the skipped one moved to the end
    order = np.argsort(np.arange(n) == skip[..., None], axis=-1, kind="stable")[..., : n - 1]
    eye = np.eye(n)
    basis = [y / ynorm[..., None]]
    for k in range(n - 1):
        v = eye[order[..., k]]
        for b in basis:
            v = v - inner(b, v)[..., None] * b
        basis.append(v / np.sqrt(inner(v, v))[..., None])
    return np.stack(basis[1:], axis=-1)


def restricted_eigenvalues(Rmat: np.ndarray, g: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of R restricted to the g-orthocomplement of y."""
    E = orthocomplement_basis(g, y)
    M = np.einsum("...ai,...ab,...bc,...cj->...ij", E, g, Rmat, E)
    ev = np.linalg.eigvals(M)
    return np.sort(ev.real, axis=-1)


@dataclass(frozen=True)
class EigenData:
    kappas: np.ndarray        # (..., n−1) ascending
    eigvecs: np.ndarray       # (..., n, n−1), g-orthonormal columns
    zero_mode: np.ndarray     # (..., n), the spray direction y
    residual: np.ndarray      # max |R X − κ X| per point
    orthogonality: np.ndarray  # max |g(X, y)| per point
    F: np.ndarray


def eigen_analysis(m: FinslerModel, p: ChartPoint, spray: Optional[SprayData] = None) -> EigenData:
    sp = geodesic_spray(m) if spray is None else spray
    g = metric_tensor(m, p).g
    Rmat = jacobi(sp, p).Rjac
    A = g @ Rmat
    asym = np.max(np.abs(A - np.swapaxes(A, -1, -2)))
    scale = max(1.0, float(np.max(np.abs(A))))
    if asym > HELMHOLTZ_TOL * scale:
        raise PreconditionError(f"Jacobi endomorphism is not g-symmetric (asymmetry {asym:.3e}); input is not metrizable")
    E = orthocomplement_basis(g, p.y)
    M = np.einsum("...ai,...ab,...bj->...ij", E, A, E)
    kappas, U = np.linalg.eigh(0.5 * (M + np.swapaxes(M, -1, -2)))
    X = E @ U
    RX = Rmat @ X
    residual = np.max(np.abs(RX - kappas[..., None, :] * X), axis=(-2, -1)) / (1.0 + np.max(np.abs(kappas), axis=-1))
    orth = np.max(np.abs(np.einsum("...ai,...ab,...b->...i", X, g, p.y)), axis=-1)
    F = m.F(p.x, p.y)
    return EigenData(kappas, X, np.broadcast_to(p.y, X.shape[:-1]), residual, orth, F)


@dataclass(frozen=True)
class LambdaVerdict:
    lam: float
    admissible: bool
    margin: float                   # min_α |λ²F² + κ_α| / F²
    constant_curvature_form: Optional[bool] = None  # κ + λ² ≠ 0, when κ is known


def admissible_lambda(eig_kappas: Sequence[float], F_val: float, candidates: Sequence[float],
                      flag_curvature: Optional[float] = None) -> list:
    """λ is admissible iff λ ≠ 0 and λ²F² + κ_α ≠ 0 for every eigen function κ_α."""
    kappas = np.asarray(eig_kappas, dtype=float).ravel()
    F2 = float(F_val) ** 2
    out = []
    for lam in candidates:
        lam = float(lam)
        margin = float(np.min(np.abs(lam * lam * F2 + kappas))) / F2 if kappas.size else np.inf
        ok = lam != 0.0 and margin > ADMISSIBLE_RTOL
        kl = None
        if flag_curvature is not None:
            kl = lam != 0.0 and abs(flag_curvature + lam * lam) > ADMISSIBLE_RTOL
        out.append(LambdaVerdict(lam, bool(ok), margin, kl))
    return out


def eigen_shift(ctx: DeformationContext, p: ChartPoint) -> tuple:
    """Eigenvalues of the deformed Jacobi endomorphism on the g-orthocomplement of y,
    with the predicted κ_α + λ²F²."""
    lam, m = _lambda_F_parts(ctx)
    base_eig = eigen_analysis(m, p, ctx.base)
    g = metric_tensor(m, p).g
    shifted = restricted_eigenvalues(jacobi(ctx.deformed, p).Rjac, g, p.y)
    predicted = base_eig.kappas + (lam * lam * base_eig.F * base_eig.F)[..., None]
    return shifted, np.sort(predicted, axis=-1)
