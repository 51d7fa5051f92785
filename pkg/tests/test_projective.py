import numpy as np
import pytest

from conftest import CATALOG, model_and_points
from spraygeom import autodiff as ad
from spraygeom import models
from spraygeom import projective as pj
from spraygeom import spray as spr
from spraygeom.chart import ChartPoint, HomogeneityError, PreconditionError


def _norm(y):
    return ad.sqrt(ad.sum_(y * y, -1))


def custom_factor(dim):
    # 1-homogeneous in y with genuine x-dependence: P = x¹ y¹ + (y^n)² / |y|
    return pj.ProjectiveFactor(lambda x, y: x[..., 0] * y[..., 0] + y[..., -1] * y[..., -1] / _norm(y), dim)


def test_euclidean_deformed_coefficients():
    m = models.euclidean(2)
    ctx = pj.deform(spr.geodesic_spray(m), pj.ProjectiveFactor.lambda_F(1.0, m))
    p = ChartPoint([0.0, 0.0], [3.0, 4.0])
    np.testing.assert_allclose(spr.spray_coefficients(ctx.deformed, p), [15.0, 20.0], atol=1e-14)


def test_zero_factor_is_identity():
    m, p = model_and_points("hyperbolic", 2)
    sp = spr.geodesic_spray(m)
    ctx = pj.deform(sp, pj.ProjectiveFactor.zero(2))
    assert np.all(spr.spray_coefficients(ctx.deformed, p) == spr.spray_coefficients(sp, p))
    cmp = pj.deformed_jacobi_general(ctx, p)
    assert np.max(cmp.discrepancy) < 1e-12
    np.testing.assert_array_equal(cmp.direct, spr.jacobi(sp, p).Rjac)
    assert np.max(pj.deformed_connection(ctx, p).discrepancy) == 0.0


def test_hyperbolic_deformed_is_a_spray():
    m, p = model_and_points("hyperbolic", 2)
    ctx = pj.deform(spr.geodesic_spray(m), pj.ProjectiveFactor.lambda_F(0.5, m), certificate=p)
    assert np.max(spr.euler_residual(ctx.deformed.G, p)) < 1e-9


def test_non_homogeneous_factor_is_rejected():
    m, p = model_and_points("euclidean", 2)
    bad = pj.ProjectiveFactor(lambda x, y: _norm(y) + 1.0, 2)
    with pytest.raises(HomogeneityError):
        pj.deform(spr.geodesic_spray(m), bad, certificate=p)


@pytest.mark.parametrize("name", ["euclidean", "hyperbolic", "randers_halfplane"])
def test_general_route_with_custom_factor(name):
    m, p = model_and_points(name, 2)
    ctx = pj.deform(spr.geodesic_spray(m), custom_factor(2), certificate=p)
    assert np.max(pj.deformed_jacobi_general(ctx, p).discrepancy) < 1e-6
    assert np.max(pj.deformed_connection(ctx, p).discrepancy) < 1e-8


def test_euclidean_lambda_one_reference():
    m = models.euclidean(2)
    ctx = pj.deform(spr.geodesic_spray(m), pj.ProjectiveFactor.lambda_F(1.0, m))
    p = ChartPoint([0.0, 0.0], [3.0, 4.0])
    cmp = pj.deformed_jacobi_finsler(ctx, p)
    np.testing.assert_allclose(cmp.direct, [[16.0, -12.0], [-12.0, 9.0]], atol=1e-12)
    assert cmp.discrepancy < 1e-12


def test_lambda_zero_leaves_jacobi_unchanged():
    m, p = model_and_points("hyperbolic", 3)
    sp = spr.geodesic_spray(m)
    cmp = pj.deformed_jacobi_finsler(pj.deform(sp, pj.ProjectiveFactor.lambda_F(0.0, m)), p)
    np.testing.assert_allclose(cmp.direct, spr.jacobi(sp, p).Rjac, atol=1e-12)


@pytest.mark.parametrize("name", CATALOG)
def test_deformation_invariants(name):
    m, p = model_and_points(name, 3)
    sp = spr.geodesic_spray(m)
    for lam in (0.5, 2.0):
        ctx = pj.deform(sp, pj.ProjectiveFactor.lambda_F(lam, m))
        assert np.max(pj.deformed_connection(ctx, p).discrepancy) < 1e-8
        cmp = pj.deformed_jacobi_finsler(ctx, p)
        assert np.max(cmp.discrepancy) < 1e-7
        assert np.max(np.abs(np.einsum("kij,kj->ki", cmp.direct, p.y))) < 1e-8
        assert np.max(np.abs(ad.value(spr.along_spray(sp, ctx.factor.P, p.x, p.y)))) < 1e-9


def test_deformed_finsler_route_needs_geodesic_base():
    m, p = model_and_points("euclidean", 2)
    once = pj.deform(spr.geodesic_spray(m), pj.ProjectiveFactor.lambda_F(1.0, m))
    twice = pj.deform(once.deformed, pj.ProjectiveFactor.lambda_F(1.0, m))
    with pytest.raises(PreconditionError):
        pj.deformed_jacobi_finsler(twice, p)


def test_transitivity_of_deformations():
    m, p = model_and_points("hyperbolic", 3)
    sp = spr.geodesic_spray(m)
    P1, P2 = pj.ProjectiveFactor.lambda_F(0.7, m), custom_factor(3)
    nested = pj.deform(pj.deform(sp, P1).deformed, P2).deformed
    summed = pj.deform(sp, P1 + P2).deformed
    a, b = spr.spray_coefficients(nested, p), spr.spray_coefficients(summed, p)
    assert np.max(np.abs(a - b)) <= 1e-12 * (1 + np.max(np.abs(a)))


def test_euclidean_eigenvalues_vanish():
    m, p = model_and_points("euclidean", 3)
    eig = pj.eigen_analysis(m, p)
    assert np.all(eig.kappas == 0.0)


def test_hyperbolic_eigenvalue_at_reference_point(p_ref):
    m = models.hyperbolic(2)
    eig = pj.eigen_analysis(m, p_ref)
    np.testing.assert_allclose(eig.kappas, [-25.0], atol=1e-11)


@pytest.mark.parametrize("name", CATALOG)
def test_eigen_data_invariants(name):
    m, p = model_and_points(name, 3)
    eig = pj.eigen_analysis(m, p)
    g = models.metric_tensor(m, p).g
    assert np.max(eig.residual) < 1e-7
    assert np.max(eig.orthogonality) < 1e-9
    gram = np.einsum("kai,kab,kbj->kij", eig.eigvecs, g, eig.eigvecs)
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(2), gram.shape), atol=1e-12)
    assert np.all(np.diff(eig.kappas, axis=-1) >= 0)


def test_eigen_analysis_rejects_non_symmetric_jacobi():
    m = models.euclidean(2)
    p = ChartPoint([0.0, 0.0], [3.0, 4.0])
    ctx = pj.deform(spr.geodesic_spray(m), pj.ProjectiveFactor(lambda x, y: y[..., 0], 2))
    with pytest.raises(PreconditionError, match="not g-symmetric"):
        pj.eigen_analysis(m, p, ctx.deformed)


def test_eigen_shift_hyperbolic():
    m, p = model_and_points("hyperbolic", 3)
    ctx = pj.deform(spr.geodesic_spray(m), pj.ProjectiveFactor.lambda_F(2.0, m))
    shifted, predicted = pj.eigen_shift(ctx, p)
    assert np.max(np.abs(shifted - predicted)) < 1e-7


def test_admissibility_examples():
    flat = pj.admissible_lambda([0.0], 1.0, [1.0, 0.0], flag_curvature=0.0)
    assert flat[0].admissible and flat[0].constant_curvature_form
    assert not flat[1].admissible and not flat[1].constant_curvature_form
    hyperbolic = pj.admissible_lambda([-25.0], 5.0, [1.0, 0.5], flag_curvature=-1.0)
    assert not hyperbolic[0].admissible and not hyperbolic[0].constant_curvature_form
    assert hyperbolic[1].admissible and hyperbolic[1].constant_curvature_form
    generic = pj.admissible_lambda([2.0, 7.0], 1.0, [-3.0, -0.1, 0.2, 1.0, 5.0])
    assert all(v.admissible for v in generic)
