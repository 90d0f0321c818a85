"""Projection deconvolution estimator of the joint density F of consecutive
pairs (X_i, X_{i+1}) on the tensor sinc space, with penalized selection.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .estimate1d import (M_CAP, PenaltyConfig, fmt, kernel_matrix, pooled_window,
                         quadrature_grid, select_model)
from .fourier import basis_matrix
from .noise import delta_m, max_model, penalty_exponents

NORM_RTOL = 1e-9


@dataclass
class ProjectionEstimate2D:
    m: int
    j_min: int
    j_max: int
    coeffs: np.ndarray
    contrast_value: float = float("nan")
    penalty_value: float = 0.0
    n: int = 0
    noise_kind: str = ""
    candidates: tuple = field(default=(), repr=False)

    @property
    def window(self):
        return (self.j_min, self.j_max)

    @property
    def criterion(self):
        return self.contrast_value + self.penalty_value

    @property
    def norm_sq(self):
        return float(np.sum(self.coeffs ** 2))

    def __call__(self, x, y):
        return evaluate_2d(self, x, y)


def as_pairs(pairs):
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must have shape (n, 2)")
    return pairs


def consecutive_pairs(y):
    y = np.asarray(y, dtype=float).ravel()
    return np.column_stack([y[:-1], y[1:]])


def coefficients_2d(pairs, m, noise, window=None, method="auto"):
    """A_jk = (1/n) sum_i v_{phi_{m,j}}(Y_i) v_{phi_{m,k}}(Y'_i) on a square window.

    With both kernel matrices taken on one grid this is exactly the tensor
    quadrature of (m/4pi^2) int int exp(-ijv - ikw) psi2(vm, wm) /
    (q*(-vm) q*(-wm)) dv dw.
    """
    pairs = as_pairs(pairs)
    if pairs.shape[0] < 2:
        raise ValueError("need at least two pairs")
    if window is None:
        window = pooled_window(pairs, m=m)
    grid = None
    if method == "quadrature" or noise.kernel is None:
        grid = quadrature_grid(pairs.ravel(), m, window)
    V0 = kernel_matrix(pairs[:, 0], m, noise, window, grid, method)
    V1 = kernel_matrix(pairs[:, 1], m, noise, window, grid, method)
    return V0.T @ V1 / pairs.shape[0]


def contrast_2d(est):
    """Gamma_n at the minimizer: -sum A_jk^2."""
    return -float(np.sum(np.asarray(est.coeffs) ** 2))


def evaluate_2d(est, x, y):
    """Surface sum_jk A_jk phi_j(x_a) phi_k(y_b) on the grid x by y."""
    Bx = basis_matrix(est.m, est.window, np.ravel(x))
    By = basis_matrix(est.m, est.window, np.ravel(y))
    return Bx @ est.coeffs @ By.T


def penalty_2d(m, noise, cfg, n):
    _, rho2 = penalty_exponents(noise.s)
    return cfg.kappa2 * (math.pi * m) ** rho2 * delta_m(noise, m) ** 2 / n


def model_collection_2d(n, noise, m_cap=M_CAP):
    """All m with Delta(m)^2 <= n, capped at ``m_cap``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    top = min(max_model(noise, n, square=True), m_cap)
    if top < 1:
        raise ValueError(f"no admissible model for n={n} (Delta(1)^2 = {delta_m(noise, 1) ** 2:.6g})")
    return list(range(1, top + 1))


def check_norm_bound(est, noise):
    bound = delta_m(noise, est.m) ** 2
    if est.norm_sq > bound * (1 + NORM_RTOL):
        raise AssertionError(f"norm bound violated: {est.norm_sq} > Delta(m)^2 = {bound}")


def fit_2d(pairs, m, noise, cfg=None, n=None, window=None):
    pairs = as_pairs(pairs)
    n = pairs.shape[0] if n is None else n
    window = pooled_window(pairs, m=m) if window is None else window
    A = coefficients_2d(pairs, m, noise, window)
    est = ProjectionEstimate2D(m=m, j_min=window[0], j_max=window[1], coeffs=A,
                               n=n, noise_kind=noise.kind)
    est.contrast_value = contrast_2d(est)
    est.penalty_value = penalty_2d(m, noise, cfg, n) if cfg else 0.0
    check_norm_bound(est, noise)
    return est


def select_and_fit_2d(pairs, noise, cfg=None, n=None, models=None):
    cfg = cfg or PenaltyConfig()
    pairs = as_pairs(pairs)
    n = pairs.shape[0] if n is None else n
    if models is None:
        models = model_collection_2d(n, noise)
    fits = {m: fit_2d(pairs, m, noise, cfg, n) for m in models}
    best = select_model({m: e.criterion for m, e in fits.items()})
    est = fits[best]
    est.candidates = tuple((m, e.contrast_value, e.penalty_value) for m, e in sorted(fits.items()))
    return est


def write_estimate_2d(path, est):
    js = range(est.j_min, est.j_max + 1)
    with open(path, "w", newline="") as fh:
        fh.write(f"# m={est.m} n={est.n} noise={est.noise_kind}\n")
        fh.write("j,k,A_jk\n")
        for a, j in enumerate(js):
            for b, k in enumerate(js):
                fh.write(f"{j},{k},{fmt(est.coeffs[a, b])}\n")


def read_estimate_2d(path):
    with open(path) as fh:
        header = dict(tok.split("=", 1) for tok in fh.readline()[1:].split())
        fh.readline()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    js = sorted({int(r[0]) for r in rows})
    size = len(js)
    A = np.array([float(r[2]) for r in rows]).reshape(size, size)
    return ProjectionEstimate2D(m=int(header["m"]), j_min=js[0], j_max=js[-1], coeffs=A,
                                n=int(header["n"]), noise_kind=header["noise"])
