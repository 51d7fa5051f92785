"""Randomized identities over the model catalog."""

import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CATALOG
from spraygeom import autodiff as ad
from spraygeom import geodesics as geo
from spraygeom import holonomy as hol
from spraygeom import models
from spraygeom import projective as pj
from spraygeom import spray as spr

FEW = settings(max_examples=12, deadline=None)

seeds = st.integers(0, 2 ** 32 - 1)
names = st.sampled_from(CATALOG)


def _point(name, seed, n=2):
    m = models.get_model(name, n)
    return m, m.sample(1, seed)[0]


@FEW
@given(names, seeds, st.lists(st.integers(0, 3), min_size=2, max_size=3))
def test_mixed_partials_commute(name, seed, dirs):
    m, p = _point(name, seed)
    base = ad.partial_along(m.F2, p, dirs)
    for perm in set(itertools.permutations(dirs)):
        other = ad.partial_along(m.F2, p, perm)
        assert abs(other - base) <= 1e-12 * (1 + abs(base))


@FEW
@given(names, seeds, st.floats(0.25, 4.0))
def test_homogeneity_of_F_and_G(name, seed, lam):
    m, p = _point(name, seed)
    sp = spr.geodesic_spray(m)
    F1, F2 = ad.value(m.F(p.x, p.y)), ad.value(m.F(p.x, lam * p.y))
    assert abs(F2 - lam * F1) <= 1e-12 * (1 + abs(F2))
    G1 = spr.spray_coefficients(sp, p)
    G2 = spr.spray_coefficients(sp, p.scaled(lam))
    assert np.max(np.abs(G2 - lam * lam * G1)) <= 1e-10 * (1 + np.max(np.abs(G2)))


@FEW
@given(names, seeds, st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_deformations_compose(name, seed, a, b):
    m, p = _point(name, seed)
    sp = spr.geodesic_spray(m)
    Pa, Pb = pj.ProjectiveFactor.lambda_F(a, m), pj.ProjectiveFactor.lambda_F(b, m)
    nested = spr.spray_coefficients(pj.deform(pj.deform(sp, Pa).deformed, Pb).deformed, p)
    summed = spr.spray_coefficients(pj.deform(sp, Pa + Pb).deformed, p)
    assert np.max(np.abs(nested - summed)) <= 1e-12 * (1 + np.max(np.abs(summed)))


@FEW
@given(names, seeds, st.integers(0, 1), st.integers(0, 1))
def test_bracket_is_antisymmetric(name, seed, i, j):
    m, p = _point(name, seed)
    hs, vs = hol.special_frames(m, spr.geodesic_spray(m))
    X, Y = hs[i], vs[j]
    np.testing.assert_array_equal(hol.lie_bracket(X, Y, p), -hol.lie_bracket(Y, X, p))


@settings(max_examples=8, deadline=None)
@given(st.floats(-1.5, 1.5), seeds)
def test_reparam_is_increasing(lam, seed):
    m = models.hyperbolic(2)
    p = m.sample(2, seed)
    tr = geo.integrate(spr.geodesic_spray(m), p.x, geo.unit_speed(m, p.x, p.y), 0.5, 50)
    trace = geo.reparam_ode(pj.ProjectiveFactor.lambda_F(lam, m), tr)
    assert np.all(np.diff(trace.ttilde, axis=0) > 0) and np.all(trace.dttilde > 0)
