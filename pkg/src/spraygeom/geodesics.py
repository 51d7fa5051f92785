"""Geodesic integration, reparameterization along geodesics, and path comparison."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .chart import DomainError, PreconditionError
from .models import FinslerModel
from .projective import DeformationContext, ProjectiveFactor
from .spray import SprayData


@dataclass(frozen=True)
class Trajectory:
    """Samples of one or more geodesics; ``x`` and ``v`` have shape (K, ..., n)."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    spray_id: str
    step: float
    exited: bool = False

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, idx) -> "Trajectory":
        """Select one geodesic out of a batch (the leading sample axis is kept)."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        sel = (slice(None),) + idx
        return Trajectory(self.t, self.x[sel], self.v[sel], self.spray_id, self.step, self.exited)


@dataclass(frozen=True)
class ReparamTrace:
    t: np.ndarray
    ttilde: np.ndarray
    dttilde: np.ndarray
    params: dict


def _rhs(G, x, v):
    return v, -2.0 * np.asarray(ad.value(G(x, v)))


def _inside(model, x, v) -> bool:
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))) or np.any(np.linalg.norm(v, axis=-1) == 0.0):
        return False
    return model is None or bool(np.all(model.in_domain(x, v)))


def _rk4(G, model, x, v, t_end: float, steps: int):
    if np.any(np.linalg.norm(v, axis=-1) == 0.0):
        raise DomainError("initial velocity must be non-zero")
    if not _inside(model, x, v):
        raise DomainError("initial condition outside the chart domain")
    h = float(t_end) / int(steps)
    ts, xs, vs = [0.0], [x], [v]
    exited = False
    for k in range(int(steps)):
        try:
            k1x, k1v = _rhs(G, x, v)
            k2x, k2v = _rhs(G, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
            k3x, k3v = _rhs(G, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
            k4x, k4v = _rhs(G, x + h * k3x, v + h * k3v)
        except (DomainError, np.linalg.LinAlgError, FloatingPointError):
            exited = True
            break
        xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not _inside(model, xn, vn):
            exited = True
            break
        x, v = xn, vn
        ts.append((k + 1) * h)
        xs.append(x)
        vs.append(v)
    return np.array(ts), np.array(xs), np.array(vs), h, exited


def integrate(sp: SprayData, x0, v0, t_end: float, steps: int) -> Trajectory:
    """Classical RK4 for ẋ = v, v̇ = −2G(x, v) with fixed step t_end/steps.

    Initial data may carry leading batch axes; all geodesics share the time
    grid. If any of them leaves the chart domain the whole batch is truncated
    at the last step where every one was inside, and ``exited`` is set.
    """
    x, v = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(v0, dtype=float))
    t, xs, vs, h, exited = _rk4(sp.G, sp.model, x, v, t_end, steps)
    return Trajectory(t, xs, vs, sp.name, h, exited)


def unit_speed(m: FinslerModel, x0, v0) -> np.ndarray:
    v0 = np.asarray(v0, dtype=float)
    return v0 / np.asarray(m.F(np.asarray(x0, dtype=float), v0))[..., None]


def along(traj: Trajectory, f) -> np.ndarray:
    """Evaluate f(x, ẋ) at every sample of a trajectory."""
    return np.asarray(ad.value(f(traj.x, traj.v)))


def reparam_ode(P: ProjectiveFactor, traj: Trajectory) -> ReparamTrace:
    """Integrate d²t̃/dt² = 2P(x, ẋ) dt̃/dt along the samples, t̃(0) = 0, dt̃/dt(0) = 1.

    RK4 on (t̃, w = dt̃/dt) with P linearly interpolated between samples.
    """
    Pk = along(traj, P.P)
    t = traj.t
    tt = np.zeros_like(Pk)
    w = np.ones_like(Pk)
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        p0, p1 = Pk[k], Pk[k + 1]
        pm = 0.5 * (p0 + p1)
        k1t, k1w = w[k], 2.0 * p0 * w[k]
        k2t, k2w = w[k] + 0.5 * h * k1w, 2.0 * pm * (w[k] + 0.5 * h * k1w)
        k3t, k3w = w[k] + 0.5 * h * k2w, 2.0 * pm * (w[k] + 0.5 * h * k2w)
        k4t, k4w = w[k] + h * k3w, 2.0 * p1 * (w[k] + h * k3w)
        tt[k + 1] = tt[k] + h / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t)
        w[k + 1] = w[k] + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        if np.any(w[k + 1] <= 0.0):
            raise PreconditionError(f"dt̃/dt became non-positive at t = {t[k + 1]:.6g}: orientation reversed")
    params = {"lambda": P.lam} if P.kind == "lambda_F" else {"P": "custom"}
    return ReparamTrace(t, tt, w, params)


def arc_length(m: FinslerModel, traj: Trajectory) -> np.ndarray:
    """Cumulative trapezoid of F(x, ẋ) dt along the sample axis."""
    F = along(traj, m.F)
    dt = np.diff(traj.t).reshape((-1,) + (1,) * (F.ndim - 1))
    return np.concatenate([np.zeros_like(F[:1]), np.cumsum(0.5 * dt * (F[1:] + F[:-1]), axis=0)])


def _resample(s: np.ndarray, x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.stack([np.interp(grid, s, x[:, i]) for i in range(x.shape[1])], axis=1)


@dataclass(frozen=True)
class PathComparison:
    """``distance`` is the worst case over the batch; ``distances`` keeps each geodesic.

    ``base`` and ``deformed`` are the two integrated trajectories (unit-speed start).
    """

    distance: float
    common_arc: float
    truncated: bool
    distances: Optional[np.ndarray] = None
    base: Optional[Trajectory] = None
    deformed: Optional[Trajectory] = None

    def __float__(self) -> float:
        return self.distance


def path_equivalence(ctx: DeformationContext, x0, v0, t_end: float, steps: int = 2000,
                     model: Optional[FinslerModel] = None) -> PathComparison:
    """Max distance between the arc-length parameterized images of the base and
    deformed geodesics from (x0, v0), both started at unit speed.

    Both sprays are integrated in one stacked batch: the deformed coefficients
    are the base ones plus P·y, so one base evaluation serves both.
    """
    m = model or ctx.base.model
    if m is None:
        raise PreconditionError("path comparison needs a Finsler model to measure arc length")
    x0, v0 = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(v0, dtype=float))
    v0 = unit_speed(m, x0, v0)
    base, P = ctx.base.G, ctx.factor.P

    def G_pair(x, y):
        G = np.array(ad.value(base(x, y)))
        G[1] += np.asarray(ad.value(P(x[1], y[1])))[..., None] * y[1]
        return G

    t, xs, vs, h, exited = _rk4(G_pair, m, np.stack([x0, x0]), np.stack([v0, v0]), t_end, steps)
    pair = Trajectory(t, xs, vs, "pair", h, exited)
    base_traj = Trajectory(t, xs[:, 0], vs[:, 0], ctx.base.name, h, exited)
    deformed_traj = Trajectory(t, xs[:, 1], vs[:, 1], ctx.deformed.name, h, exited)
    s = arc_length(m, pair)
    flat_s = s.reshape(len(t), 2, -1)
    flat_x = xs.reshape(len(t), 2, -1, xs.shape[-1])
    dists, arcs = [], []
    for j in range(flat_s.shape[-1]):
        sa, sb = flat_s[:, 0, j], flat_s[:, 1, j]
        L = min(sa[-1], sb[-1])
        grid = np.linspace(0.0, L, len(t))
        d = np.linalg.norm(_resample(sa, flat_x[:, 0, j], grid) - _resample(sb, flat_x[:, 1, j], grid), axis=1)
        dists.append(np.max(d))
        arcs.append(L)
    dists = np.array(dists).reshape(x0.shape[:-1])
    return PathComparison(float(np.max(dists)), float(np.min(arcs)), exited, dists, base_traj, deformed_traj)


def closed_form_reparam(lam: float, c1: float, c2: float, t, diagnostic: bool = False):
    """t̃ = c1·t + 2λc2·e^{2λt} and its residual d²t̃/dt² − 2λ dt̃/dt on a unit-speed geodesic.

    The residual equals −2λc1, so it vanishes only on the c1 = 0 family; it is
    reported, not asserted. ``c1 = 0`` is accepted only with ``diagnostic``.
    """
    if not lam * c2 > 0:
        raise PreconditionError("need λ·c2 > 0")
    if not (c1 > 0 or (diagnostic and c1 == 0)):
        raise PreconditionError("need c1 > 0 (c1 = 0 only in diagnostic mode)")
    t = np.asarray(t, dtype=float)
    e = np.exp(2.0 * lam * t)
    tt = c1 * t + 2.0 * lam * c2 * e
    d1 = c1 + 4.0 * lam * lam * c2 * e
    d2 = 8.0 * lam ** 3 * c2 * e
    return tt, d2 - 2.0 * lam * d1


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)])
        for t, x, v in zip(traj.t, traj.x, traj.v):
            w.writerow([format(t, ".17g")] + [format(c, ".17g") for c in x] + [format(c, ".17g") for c in v])


def write_reparam_csv(trace: ReparamTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "ttilde", "dttilde"])
        for row in zip(trace.t, trace.ttilde, trace.dttilde):
            w.writerow([format(c, ".17g") for c in row])
