"""Catalog of Finsler functions and the tensors built directly from F."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .chart import ChartPoint, DomainError, RegularityError

RANK_RTOL = 1e-8
EIG_FLOOR = 1e-10
HOMOGENEITY_LAMBDAS = (0.5, 2.0, 3.0)


def _norm(y):
    return ad.sqrt(ad.sum_(y * y, -1))


@dataclass(frozen=True)
class FinslerModel:
    """A 1-homogeneous function F(x, y) together with its safe chart box.

    ``box`` bounds x for random sampling; ``domain`` is an optional extra
    predicate on plain (x, y) arrays returning a boolean mask. ``energy`` is
    an optional closed form of F², used in place of squaring F (cheaper to
    differentiate and free of the square-root round trip).
    """

    name: str
    dim: int
    func: Callable
    box: tuple
    known_flag_curvature: Optional[float] = None
    params: dict = field(default_factory=dict)
    domain: Optional[Callable] = None
    admissible: Optional[Callable] = None
    energy: Optional[Callable] = None

    def in_domain(self, x, y) -> np.ndarray:
        x, y = ad.value(x), ad.value(y)
        ok = np.linalg.norm(y, axis=-1) > 0.0
        if self.domain is not None:
            ok = ok & self.domain(x, y)
        return ok

    def check_domain(self, x, y) -> None:
        ok = self.in_domain(x, y)
        if not np.all(ok):
            raise DomainError(f"{self.name}: {np.size(ok) - np.count_nonzero(ok)} point(s) outside the chart domain")

    def F(self, x, y):
        self.check_domain(x, y)
        return self.func(x, y)

    def F2(self, x, y):
        if self.energy is not None:
            self.check_domain(x, y)
            return self.energy(x, y)
        f = self.F(x, y)
        return f * f

    __call__ = F

    @property
    def scalar_field(self) -> ad.ScalarField:
        return ad.ScalarField(self.F, self.dim, self.name)

    def sample(self, count: int, seed: int):
        from .chart import sample_points
        return sample_points(self.dim, count, self.box, seed)


def euclidean(n: int = 2) -> FinslerModel:
    return FinslerModel("euclidean", n, lambda x, y: _norm(y), box=(-1.0, 1.0), known_flag_curvature=0.0,
                        energy=lambda x, y: ad.sum_(y * y, -1))


def hyperbolic(n: int = 2) -> FinslerModel:
    """Poincaré upper half-space, F = |y| / x^n (last coordinate positive)."""
    lo = np.full(n, -1.0)
    hi = np.full(n, 1.0)
    lo[-1], hi[-1] = 0.5, 2.0
    return FinslerModel(
        "hyperbolic", n, lambda x, y: _norm(y) / x[..., -1], box=(lo, hi),
        known_flag_curvature=-1.0, domain=lambda x, y: x[..., -1] > 0.0,
        energy=lambda x, y: ad.sum_(y * y, -1) / (x[..., -1] * x[..., -1]),
    )


def _randers_check(b: float):
    def check(g_min_sv: float):
        if abs(b) >= 1.0:
            raise RegularityError(
                f"randers: |b| = {abs(b)} >= 1, F is not a Finsler function "
                f"(smallest singular value of g here: {g_min_sv:.3e})")
    return check


def randers(n: int = 2, b: float = 0.3) -> FinslerModel:
    """Minkowski–Randers norm F = |y| + b·y¹."""
    return FinslerModel(
        "randers", n, lambda x, y: _norm(y) + b * y[..., 0], box=(-1.0, 1.0),
        params={"b": b}, admissible=_randers_check(b),
    )


def randers_halfplane(n: int = 2, b: float = 0.3) -> FinslerModel:
    """Randers metric on the upper half-space, F = (|y| + b·y¹) / x^n.

    Its one-form is not closed, so the geodesic spray is genuinely Finslerian
    and the flag curvature is not constant.
    """
    lo = np.full(n, -1.0)
    hi = np.full(n, 1.0)
    lo[-1], hi[-1] = 0.5, 2.0
    return FinslerModel(
        "randers_halfplane", n, lambda x, y: (_norm(y) + b * y[..., 0]) / x[..., -1], box=(lo, hi),
        params={"b": b}, domain=lambda x, y: x[..., -1] > 0.0, admissible=_randers_check(b),
    )


CATALOG = {
    "euclidean": euclidean,
    "hyperbolic": hyperbolic,
    "randers": randers,
    "randers_halfplane": randers_halfplane,
}


def get_model(name: str, dim: int = 2, **params) -> FinslerModel:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(CATALOG)}") from None
    return factory(dim, **params)


# --- tensors from F (differentiable building blocks) -------------------


def metric_fn(m: FinslerModel) -> Callable:
    """g_ij = ½ ∂²F²/∂y^i∂y^j as a function of (x, y)."""
    def g(x, y):
        return 0.5 * ad.jac_y(lambda xx, yy: ad.jac_y(m.F2, xx, yy), x, y)
    return g


def y_lower_fn(m: FinslerModel) -> Callable:
    """y_i = ½ ∂F²/∂y^i."""
    def yl(x, y):
        return 0.5 * ad.jac_y(m.F2, x, y)
    return yl


def angular_lower_fn(m: FinslerModel) -> Callable:
    """h_ij = F ∂²F/∂y^i∂y^j."""
    def h(x, y):
        hess = ad.jac_y(lambda xx, yy: ad.jac_y(m.F, xx, yy), x, y)
        return m.F(x, y)[..., None, None] * hess
    return h


# --- public operations --------------------------------------------------


@dataclass(frozen=True)
class MetricTensor:
    g: np.ndarray
    min_singular_value: np.ndarray
    min_eigenvalue: np.ndarray


@dataclass(frozen=True)
class AngularData:
    h_lower: np.ndarray
    h_mixed: np.ndarray
    y_lower: np.ndarray
    F: np.ndarray


def metric_tensor(m: FinslerModel, p: ChartPoint) -> MetricTensor:
    m.check_domain(p.x, p.y)
    g = metric_fn(m)(p.x, p.y)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    sv = np.linalg.svd(g, compute_uv=False)
    smallest = float(np.min(sv[..., -1]))
    if m.admissible is not None:
        m.admissible(smallest)
    if np.any(sv[..., -1] <= RANK_RTOL * sv[..., 0]):
        raise RegularityError(f"{m.name}: metric tensor is rank deficient, smallest singular value {smallest:.3e}")
    eig = np.linalg.eigvalsh(g)
    if np.any(eig[..., 0] <= EIG_FLOOR):
        raise RegularityError(
            f"{m.name}: metric tensor not positive definite, smallest eigenvalue {float(np.min(eig[..., 0])):.3e}, "
            f"smallest singular value {smallest:.3e}")
    return MetricTensor(g, sv[..., -1], eig[..., 0])


def angular_data(m: FinslerModel, p: ChartPoint) -> AngularData:
    met = metric_tensor(m, p)
    F = m.F(p.x, p.y)
    h_lower = angular_lower_fn(m)(p.x, p.y)
    y_low = np.einsum("...ij,...j->...i", met.g, p.y)
    n = p.dim
    h_mixed = np.eye(n) - np.einsum("...i,...j->...ij", p.y, y_low) / (F * F)[..., None, None]
    return AngularData(h_lower, h_mixed, y_low, F)


def numerical_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    sv = np.linalg.svd(a, compute_uv=False)
    return np.sum(sv > rtol * sv[..., :1], axis=-1)


@dataclass(frozen=True)
class HomogeneityReport:
    scaling_residual: np.ndarray
    euler_residual: np.ndarray


def check_homogeneity(m: FinslerModel, p: ChartPoint, lambdas=HOMOGENEITY_LAMBDAS) -> HomogeneityReport:
    F0 = m.F(p.x, p.y)
    scaling = np.max([np.abs(m.F(p.x, lam * p.y) - lam * F0) for lam in lambdas], axis=0)
    dF = ad.jac_y(m.F, p.x, p.y)
    euler = np.abs(np.einsum("...i,...i->...", p.y, dF) - F0)
    return HomogeneityReport(scaling, euler)
