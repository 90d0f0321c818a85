"""Quotient estimator of the transition density, Pi_tilde = F_tilde / f_tilde
on a compact square B x B, with a guard against small denominators.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from .estimate1d import (PenaltyConfig, ProjectionEstimate1D, fmt, model_collection_1d,
                         select_and_fit_1d)
from .estimate2d import ProjectionEstimate2D, consecutive_pairs, select_and_fit_2d
from .fourier import basis_matrix
from .noise import delta_m

DEFAULT_GRID = 101


@dataclass(frozen=True)
class StationaryFloor:
    """Lower bound f0 of f on B and sup of Pi on B x B (known in simulations only)."""

    f0: float
    pi_sup: float

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError("f0 must be positive")
        if not self.pi_sup > 0:
            raise ValueError("pi_sup must be positive")


@dataclass
class TransitionEstimate:
    f_est: ProjectionEstimate1D
    F_est: ProjectionEstimate2D
    B: tuple
    n: int
    restriction_relaxed: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.B
        if not lo < hi:
            raise ValueError("B must be a nonempty interval")
        if self.n < 2:
            raise ValueError("n must be >= 2")

    def surface(self, xs, ys):
        """Pi_tilde on the tensor grid xs by ys (rows indexed by x)."""
        fx = self.f_est(np.asarray(xs, dtype=float))
        Fxy = self.F_est(xs, ys)
        return quotient_estimate(fx[:, None], Fxy, self.n)

    def grid(self, points=DEFAULT_GRID):
        xs = np.linspace(self.B[0], self.B[1], points)
        return xs, xs, self.surface(xs, xs)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.empty(x.shape)
        flat_x, flat_y = x.ravel(), y.ravel()
        fx = self.f_est(flat_x)
        # pointwise F through the separable form, one row per point
        Bx = basis_matrix(self.F_est.m, self.F_est.window, flat_x)
        By = basis_matrix(self.F_est.m, self.F_est.window, flat_y)
        Fxy = np.einsum("ij,jk,ik->i", Bx, self.F_est.coeffs, By)
        out.ravel()[:] = quotient_estimate(fx, Fxy, self.n)
        return out


def quotient_estimate(f_val, F_val, n):
    """F/f where |F| <= n |f|, else 0 (also 0 when f = 0)."""
    f_val = np.asarray(f_val, dtype=float)
    F_val = np.asarray(F_val, dtype=float)
    ok = (np.abs(F_val) <= n * np.abs(f_val)) & (f_val != 0)
    safe = np.where(ok, f_val, 1.0)
    out = np.where(ok, F_val / safe, 0.0)
    return out if out.ndim else float(out)


def restricted_models_f(n, noise, cfg=None):
    """Models with m >= ln ln n and m Delta(m) <= n / (ln n)^2."""
    if n < 16:
        raise ValueError("restricted model set needs n >= 16")
    try:
        return model_collection_1d(n, noise, restricted=True, cfg=cfg).models
    except ValueError:
        pass
    lo = math.log(math.log(n))
    cap = n / math.log(n) ** 2
    m_lo = max(1, math.ceil(lo))
    if m_lo * delta_m(noise, m_lo) > cap:
        raise ValueError(f"no admissible restricted model: m={m_lo} >= ln ln n "
                         f"violates m Delta(m) <= n/(ln n)^2 = {cap:.6g}")
    raise ValueError(f"no admissible restricted model: Delta(m) <= n fails for m >= {m_lo}")


def default_B(y, noise):
    """[q10, q90] of the observations, shrunk by half the noise IQR on each side."""
    lo, hi = np.quantile(np.asarray(y, dtype=float), [0.1, 0.9])
    half = noise.iqr / 2
    if hi - lo > 2 * half:
        return (float(lo + half), float(hi - half))
    return (float(lo), float(hi))


def estimate_transition(y, noise, cfg=None, B=None, restricted="auto"):
    """Fit f_tilde on Y_1..Y_n and F_tilde on (Y_i, Y_{i+1}), i = 1..n.

    ``restricted`` selects the 1D model set: True uses only the restricted
    set (error if empty), False the plain set, and "auto" the restricted set
    when it is nonempty and the plain set otherwise.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 3:
        raise ValueError("need at least three observations")
    cfg = cfg or PenaltyConfig()
    n = y.size - 1
    relaxed = False
    if restricted is True:
        models = restricted_models_f(n, noise)
    elif restricted is False:
        models = model_collection_1d(n, noise).models
    elif restricted == "auto":
        try:
            models = restricted_models_f(n, noise)
        except ValueError:
            models = model_collection_1d(n, noise).models
            relaxed = True
    else:
        raise ValueError(f"bad restricted option {restricted!r}")
    f_est = select_and_fit_1d(y[:n], noise, cfg, n=n, models=models)
    F_est = select_and_fit_2d(consecutive_pairs(y), noise, cfg, n=n)
    B = default_B(y, noise) if B is None else (float(B[0]), float(B[1]))
    return TransitionEstimate(f_est=f_est, F_est=F_est, B=B, n=n, restriction_relaxed=relaxed)


def floor_from_model(model, B, points=401):
    """f0 = min f on B and pi_sup = max Pi on B x B from the true chain."""
    xs = np.linspace(B[0], B[1], points)
    f0 = float(np.min(model.f(xs)))
    pi_sup = float(np.max(model.Pi(xs[:, None], xs[None, :])))
    return StationaryFloor(f0=f0, pi_sup=pi_sup)


def surrogate_bound(mise_F, mise_f, floor, factor=10.0):
    """factor * (8/f0^2) (mise_F + pi_sup mise_f)."""
    return factor * 8.0 / floor.f0 ** 2 * (mise_F + floor.pi_sup * mise_f)


def write_transition(path, est, points=DEFAULT_GRID, seed=None):
    xs, ys, P = est.grid(points)
    with open(path, "w", newline="") as fh:
        fh.write("x,y,pi_hat\n")
        for a, x in enumerate(xs):
            for b, yv in enumerate(ys):
                fh.write(f"{fmt(x)},{fmt(yv)},{fmt(P[a, b])}\n")
    meta = {"m_hat": est.f_est.m, "M_hat": est.F_est.m, "B": list(est.B), "n": est.n,
            "seed": seed, "restriction_relaxed": est.restriction_relaxed}
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta
