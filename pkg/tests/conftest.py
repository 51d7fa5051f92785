import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from spraygeom import models  # noqa: E402
from spraygeom.chart import ChartPoint  # noqa: E402

SEED = 20240611
N_POINTS = 100
DIMS = (2, 3)
CATALOG = tuple(models.CATALOG)


@functools.lru_cache(maxsize=None)
def model_and_points(name: str, n: int, count: int = N_POINTS, seed: int = SEED):
    m = models.get_model(name, n)
    return m, m.sample(count, seed)


def hyperbolic_G(x, y):
    """Conformal Christoffel formula for g = δ/(x^n)²:
    G^i = −y^i y^n / x^n + δ^i_n |y|² / (2 x^n)."""
    xn = x[..., -1:]
    G = -y * y[..., -1:] / xn
    G[..., -1] += np.sum(y * y, axis=-1) / (2.0 * x[..., -1])
    return G


def constant_curvature_jacobi(kappa, g, y):
    """R^i_j = κ(F² δ^i_j − y^i y_j) for a Riemannian metric of constant curvature κ."""
    y_low = np.einsum("...ij,...j->...i", g, y)
    F2 = np.einsum("...i,...i->...", y, y_low)
    n = y.shape[-1]
    return kappa * (F2[..., None, None] * np.eye(n) - np.einsum("...i,...j->...ij", y, y_low))


@pytest.fixture
def p_ref():
    return ChartPoint(np.array([0.0, 1.0]), np.array([3.0, 4.0]))
