"""Sprays and the objects they induce: connection, Jacobi endomorphism,
curvature, Berwald coefficients and the dynamical covariant derivative.

Every ``*_fn`` helper returns a function of (x, y) that accepts dual inputs,
so derived objects can be differentiated again.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .chart import ChartPoint, HomogeneityError, PreconditionError
from .models import FinslerModel, metric_fn

EULER_CERT_TOL = 1e-6


@dataclass(frozen=True)
class SprayData:
    """Spray coefficients G^i(x, y); the spray is S = y^i ∂/∂x^i − 2G^i ∂/∂y^i."""

    G: Callable
    dim: int
    source: str
    model: Optional[FinslerModel] = None
    context: Optional[object] = None
    name: str = ""

    def __call__(self, x, y):
        return self.G(x, y)


def geodesic_spray(m: FinslerModel) -> SprayData:
    """G^i = ¼ g^{il}(y^k ∂²F²/∂y^l∂x^k − ∂F²/∂x^l)."""
    n = m.dim

    def G(x, y):
        def dL(xx, yy):
            return ad.jac_z(m.F2, xx, yy)

        dz, hess = ad.value_and_jacobian(lambda yy: dL(x, yy), y)
        # hess[..., a, l] = ∂_{y^l} ∂_{z^a} F²
        g = 0.5 * hess[..., n:, :]
        mixed = hess[..., :n, :]
        rhs = ad.einsum("...k,...kl->...l", y, mixed) - dz[..., :n]
        if type(rhs) is not ad.Dual and type(g) is not ad.Dual:
            return 0.25 * np.linalg.solve(g, rhs[..., None])[..., 0]
        return 0.25 * ad.einsum("...il,...l->...i", ad.inv(g), rhs)

    return SprayData(G, n, "from_finsler", model=m, name=f"geodesic({m.name})")


def euler_residual(G: Callable, p: ChartPoint, degree: int = 2) -> np.ndarray:
    """max_i |y^j ∂G^i/∂y^j − degree·G^i| per point (G may be vector or scalar valued)."""
    val, jac = ad.value_and_jacobian(lambda yy: G(p.x, yy), p.y)
    y = np.broadcast_to(p.y, p.batch_shape + (p.dim,))
    y = y.reshape(y.shape[:-1] + (1,) * (jac.ndim - y.ndim) + y.shape[-1:])
    res = np.abs(np.sum(jac * y, axis=-1) - degree * val)
    return res if res.ndim == len(p.batch_shape) else np.max(res, axis=-1)


def custom_spray(G: Callable, dim: int, certificate: ChartPoint, tol: float = EULER_CERT_TOL, name: str = "custom") -> SprayData:
    """Accept user coefficients only if they are 2-homogeneous at the certificate points."""
    res = euler_residual(G, certificate)
    scale = 1.0 + np.max(np.abs(ad.value(G(certificate.x, certificate.y))))
    if np.max(res) >= tol * scale:
        raise HomogeneityError(f"{name}: Euler residual {np.max(res):.3e} exceeds {tol:g}; coefficients are not 2-homogeneous")
    return SprayData(G, dim, "custom", name=name)


def spray_vector(sp: SprayData, x, y):
    """Components (y, −2G) of S in the coordinate basis (∂_x, ∂_y)."""
    return ad.concatenate([y, -2.0 * sp.G(x, y)], -1)


def along_spray(sp: SprayData, f: Callable, x, y):
    """S(f) for a (tensor-valued) function f(x, y)."""
    n = sp.dim
    z = ad.concatenate([x, y], -1)
    v = spray_vector(sp, x, y)
    return ad.jvp(lambda zz: f(zz[..., :n], zz[..., n:]), z, v)[1]


def connection_fn(sp: SprayData) -> Callable:
    """N^i_j = ∂G^i/∂y^j, indexed [..., i, j]."""
    return lambda x, y: ad.jac_y(sp.G, x, y)


def berwald_fn(sp: SprayData) -> Callable:
    """G^i_{jk} = ∂²G^i/∂y^j∂y^k, indexed [..., i, j, k]."""
    N = connection_fn(sp)
    return lambda x, y: ad.jac_y(N, x, y)


def jacobi_fn(sp: SprayData) -> Callable:
    """R^i_j = 2δG^i/δx^j − S(N^i_j) + N^i_k N^k_j, which reduces to 2∂_jG^i − S(N^i_j) − N^i_k N^k_j."""
    n = sp.dim

    def R(x, y):
        J = ad.jac_z(sp.G, x, y)
        Gx, N = J[..., :n], J[..., n:]
        SN = along_spray(sp, lambda xx, yy: ad.jac_y(sp.G, xx, yy), x, y)
        return 2.0 * Gx - SN - ad.einsum("...ik,...kj->...ij", N, N)

    return R


def curvature_fn(sp: SprayData) -> Callable:
    """R^i_{jk} = ⅓(∂R^i_k/∂y^j − ∂R^i_j/∂y^k)."""
    R = jacobi_fn(sp)

    def curv(x, y):
        DR = ad.jac_y(R, x, y)  # [i, a, b] = ∂R^i_a/∂y^b
        return (ad.swapaxes(DR, -1, -2) - DR) / 3.0

    return curv


def curvature_delta_fn(sp: SprayData) -> Callable:
    """R^i_{jk} = δN^i_j/δx^k − δN^i_k/δx^j."""
    n = sp.dim
    Nf = connection_fn(sp)

    def curv(x, y):
        N, DN = ad.value_and_jacobian(lambda z: Nf(z[..., :n], z[..., n:]), ad.concatenate([x, y], -1))
        dN = DN[..., :n] - ad.einsum("...ijl,...lk->...ijk", DN[..., n:], N)
        return dN - ad.swapaxes(dN, -1, -2)

    return curv


# --- point evaluations ---------------------------------------------------


@dataclass(frozen=True)
class ConnectionData:
    N: np.ndarray
    berwald: np.ndarray


@dataclass(frozen=True)
class JacobiEndomorphism:
    Rjac: np.ndarray


@dataclass(frozen=True)
class CurvatureTensor:
    Rcurv: np.ndarray


def _check(sp: SprayData, p: ChartPoint):
    if sp.model is not None:
        sp.model.check_domain(p.x, p.y)


def spray_coefficients(sp: SprayData, p: ChartPoint) -> np.ndarray:
    _check(sp, p)
    return ad.value(sp.G(p.x, p.y))


def connection(sp: SprayData, p: ChartPoint) -> ConnectionData:
    _check(sp, p)
    N, B = ad.value_and_jacobian(lambda yy: connection_fn(sp)(p.x, yy), p.y)
    return ConnectionData(ad.value(N), ad.value(B))


def jacobi(sp: SprayData, p: ChartPoint) -> JacobiEndomorphism:
    _check(sp, p)
    return JacobiEndomorphism(ad.value(jacobi_fn(sp)(p.x, p.y)))


def curvature(sp: SprayData, p: ChartPoint, route: str = "jacobi") -> CurvatureTensor:
    """Curvature from y-derivatives of the Jacobi endomorphism (default) or from δN/δx."""
    _check(sp, p)
    fn = {"jacobi": curvature_fn, "delta": curvature_delta_fn}[route](sp)
    return CurvatureTensor(ad.value(fn(p.x, p.y)))


def _require_model(m: FinslerModel, spray: Optional[SprayData]) -> SprayData:
    return geodesic_spray(m) if spray is None else spray


def nabla_dJF_fn(m: FinslerModel, sp: SprayData) -> Callable:
    """Components S(∂F/∂y^i) − N^j_i ∂F/∂y^j of ∇(d_J F)."""
    def comp(x, y):
        dF = ad.jac_y(m.F, x, y)
        SdF = along_spray(sp, lambda xx, yy: ad.jac_y(m.F, xx, yy), x, y)
        N = connection_fn(sp)(x, y)
        return SdF - ad.einsum("...ji,...j->...i", N, dF)
    return comp


def nabla_semibasic_dJF(m: FinslerModel, p: ChartPoint, spray: Optional[SprayData] = None) -> np.ndarray:
    m.check_domain(p.x, p.y)
    sp = _require_model(m, spray)
    return ad.value(nabla_dJF_fn(m, sp)(p.x, p.y))


def horizontal_covariant_y(m: FinslerModel, p: ChartPoint, spray: Optional[SprayData] = None) -> np.ndarray:
    """y_{i|j} = δy_i/δx^j − (∂N^k_i/∂y^j) y_k, indexed [..., i, j]."""
    m.check_domain(p.x, p.y)
    sp = _require_model(m, spray)
    n = m.dim

    def y_low(x, y):
        return 0.5 * ad.jac_y(m.F2, x, y)

    yl, D = ad.value_and_jacobian(lambda z: y_low(z[..., :n], z[..., n:]), np.concatenate([p.x, p.y], -1))
    N = connection(sp, p)
    delta = D[..., :n] - np.einsum("...ik,...kj->...ij", D[..., n:], N.N)
    return delta - np.einsum("...kij,...k->...ij", N.berwald, yl)


def spray_conserves_F(m: FinslerModel, p: ChartPoint, spray: Optional[SprayData] = None) -> np.ndarray:
    """S(F) at p for the model's geodesic spray, or for ``spray`` if given."""
    m.check_domain(p.x, p.y)
    sp = _require_model(m, spray)
    return ad.value(along_spray(sp, m.F, p.x, p.y))


def helmholtz_asymmetry(m: FinslerModel, p: ChartPoint, spray: Optional[SprayData] = None) -> np.ndarray:
    """Entrywise g_ik R^k_j − g_jk R^k_i."""
    sp = _require_model(m, spray)
    g = ad.value(metric_fn(m)(p.x, p.y))
    A = g @ jacobi(sp, p).Rjac
    return A - np.swapaxes(A, -1, -2)


def isddj_residual(m: FinslerModel, p: ChartPoint, spray: Optional[SprayData] = None) -> np.ndarray:
    """Coordinate residual of the Euler–Lagrange equation of F² for the spray.

    Contracting i_S dd_J F² = −dF² with ∂/∂y^l is automatic; contracting with
    ∂/∂x^l gives y^k ∂²F²/∂x^k∂y^l − 4 g_lk G^k − ∂F²/∂x^l = 0.
    """
    sp = _require_model(m, spray)
    n = m.dim
    dz, hess = ad.value_and_jacobian(lambda yy: ad.jac_z(m.F2, p.x, yy), p.y)
    g = 0.5 * hess[..., n:, :]
    G = spray_coefficients(sp, p)
    return (np.einsum("...k,...kl->...l", p.y, hess[..., :n, :]) - dz[..., :n]
            - 4.0 * np.einsum("...lk,...k->...l", g, G))


def require_geodesic(m: FinslerModel, sp: SprayData, p: ChartPoint, tol: float = 1e-8) -> None:
    SF = spray_conserves_F(m, p, sp)
    F = m.F(p.x, p.y)
    if np.max(np.abs(SF) / (1.0 + F * F)) > tol:
        raise PreconditionError(f"spray {sp.name!r} is not the geodesic spray of {m.name}: max |S(F)| = {np.max(np.abs(SF)):.3e}")
