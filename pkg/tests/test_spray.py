import numpy as np
import pytest

from conftest import CATALOG, constant_curvature_jacobi, hyperbolic_G, model_and_points
from spraygeom import autodiff as ad
from spraygeom import models
from spraygeom import spray as spr
from spraygeom.chart import ChartPoint, HomogeneityError, PreconditionError
from spraygeom.projective import ProjectiveFactor, deform


@pytest.fixture
def hyp():
    m = models.hyperbolic(2)
    return m, spr.geodesic_spray(m)


def test_euclidean_objects_vanish():
    m = models.euclidean(3)
    sp = spr.geodesic_spray(m)
    p = m.sample(10, 2)
    assert np.all(spr.spray_coefficients(sp, p) == 0.0)
    con = spr.connection(sp, p)
    assert np.all(con.N == 0.0) and np.all(con.berwald == 0.0)
    assert np.all(spr.jacobi(sp, p).Rjac == 0.0)
    assert np.all(spr.curvature(sp, p).Rcurv == 0.0)
    assert np.max(np.abs(spr.nabla_semibasic_dJF(m, p))) == 0.0
    assert np.max(np.abs(spr.horizontal_covariant_y(m, p))) == 0.0
    assert np.max(np.abs(spr.spray_conserves_F(m, p))) == 0.0


def test_hyperbolic_reference_values(hyp, p_ref):
    m, sp = hyp
    np.testing.assert_allclose(spr.spray_coefficients(sp, p_ref), [-12.0, -3.5], atol=1e-13)
    np.testing.assert_allclose(spr.connection(sp, p_ref).N, [[-4.0, -3.0], [3.0, -4.0]], atol=1e-13)
    np.testing.assert_allclose(spr.jacobi(sp, p_ref).Rjac, [[-16.0, 12.0], [12.0, -9.0]], atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_hyperbolic_spray_matches_christoffel_oracle(n):
    m, p = model_and_points("hyperbolic", n)
    sp = spr.geodesic_spray(m)
    np.testing.assert_allclose(spr.spray_coefficients(sp, p), hyperbolic_G(p.x, p.y), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_hyperbolic_jacobi_is_constant_curvature(n):
    m, p = model_and_points("hyperbolic", n)
    sp = spr.geodesic_spray(m)
    g = models.metric_tensor(m, p).g
    np.testing.assert_allclose(spr.jacobi(sp, p).Rjac, constant_curvature_jacobi(-1.0, g, p.y), atol=1e-11)


def test_randers_with_zero_b_is_flat():
    m = models.randers(2, b=0.0)
    sp = spr.geodesic_spray(m)
    assert np.max(np.abs(spr.spray_coefficients(sp, m.sample(10, 0)))) == 0.0


def test_isddj_residual_small():
    for name in CATALOG:
        m, p = model_and_points(name, 2)
        assert np.max(np.abs(spr.isddj_residual(m, p))) < 1e-8


@pytest.mark.parametrize("name", CATALOG)
@pytest.mark.parametrize("n", [2, 3])
def test_structural_identities(name, n):
    m, p = model_and_points(name, n)
    sp = spr.geodesic_spray(m)
    assert np.max(spr.euler_residual(sp.G, p)) < 1e-9
    G = spr.spray_coefficients(sp, p)
    con = spr.connection(sp, p)
    assert np.max(np.abs(np.einsum("kij,kj->ki", con.N, p.y) - 2 * G)) < 1e-9
    assert np.max(np.abs(con.berwald - np.swapaxes(con.berwald, -1, -2))) < 1e-9
    R = spr.jacobi(sp, p).Rjac
    assert np.max(np.abs(np.einsum("kij,kj->ki", R, p.y))) < 1e-8
    Rc = spr.curvature(sp, p).Rcurv
    assert np.all(Rc == -np.swapaxes(Rc, -1, -2))
    assert np.max(np.abs(np.einsum("kiaj,ka->kij", Rc, p.y) - R)) < 1e-8
    assert np.max(np.abs(Rc - spr.curvature(sp, p, route="delta").Rcurv)) < 1e-7
    assert np.max(np.abs(spr.helmholtz_asymmetry(m, p, sp))) < 1e-8


def test_jacobi_is_two_homogeneous(hyp):
    m, sp = hyp
    p = m.sample(20, 4)
    R1 = spr.jacobi(sp, p).Rjac
    R2 = spr.jacobi(sp, p.scaled(2.0)).Rjac
    assert np.max(np.abs(R2 - 4 * R1)) < 1e-8 * (1 + np.max(np.abs(R2)))


def test_randers_horizontal_derivative_of_y():
    m, p = model_and_points("randers", 2)
    assert np.max(np.abs(spr.horizontal_covariant_y(m, p))) < 1e-7


def test_nabla_dJF_nonzero_for_non_geodesic_spray():
    m = models.euclidean(2)
    p = m.sample(10, 5)
    G = lambda x, y: ad.stack([y[..., 1] * y[..., 1], 0.0 * y[..., 0]], -1)  # noqa: E731
    sp = spr.custom_spray(G, 2, certificate=p)
    assert np.max(np.abs(spr.nabla_semibasic_dJF(m, p, sp))) > 1e-2


def test_custom_spray_needs_two_homogeneity():
    p = models.euclidean(2).sample(5, 0)
    with pytest.raises(HomogeneityError):
        spr.custom_spray(lambda x, y: ad.stack([y[..., 0], y[..., 1]], -1), 2, certificate=p)


def test_deformed_spray_does_not_conserve_F():
    m, p = model_and_points("hyperbolic", 2)
    lam = 0.5
    ctx = deform(spr.geodesic_spray(m), ProjectiveFactor.lambda_F(lam, m))
    F = m.F(p.x, p.y)
    np.testing.assert_allclose(spr.spray_conserves_F(m, p, ctx.deformed), -2 * lam * F * F, rtol=1e-12)


def test_require_geodesic_rejects_deformed(hyp):
    m, sp = hyp
    ctx = deform(sp, ProjectiveFactor.lambda_F(1.0, m))
    with pytest.raises(PreconditionError):
        spr.require_geodesic(m, ctx.deformed, m.sample(3, 0))


def test_point_and_batch_agree(hyp):
    m, sp = hyp
    p = m.sample(4, 9)
    batch = spr.curvature(sp, p).Rcurv
    for k in range(4):
        np.testing.assert_allclose(spr.curvature(sp, p[k]).Rcurv, batch[k], atol=1e-13)


def test_jacobi_matches_fd_on_its_formula(hyp, p_ref):
    # central differences of G only, independent of the nested-dual route
    m, sp = hyp
    n = 2
    G = lambda x, y: ad.value(sp.G(x, y))  # noqa: E731
    z = np.concatenate([p_ref.x, p_ref.y])
    h = 1e-4

    def dG(i, zz):
        out = np.zeros((n, 2 * n))
        for b in range(2 * n):
            e = np.zeros(2 * n)
            e[b] = h
            out[:, b] = (G((zz + e)[:n], (zz + e)[n:]) - G((zz - e)[:n], (zz - e)[n:])) / (2 * h)
        return out

    J = dG(0, z)
    Gx, N = J[:, :n], J[:, n:]
    S = np.concatenate([p_ref.y, -2 * G(p_ref.x, p_ref.y)])
    SN = np.zeros((n, n))
    for b in range(2 * n):
        e = np.zeros(2 * n)
        e[b] = 1e-4
        SN += S[b] * (dG(0, z + e)[:, n:] - dG(0, z - e)[:, n:]) / 2e-4
    R_fd = 2 * Gx - SN - N @ N
    np.testing.assert_allclose(spr.jacobi(sp, p_ref).Rjac, R_fd, atol=1e-5)
