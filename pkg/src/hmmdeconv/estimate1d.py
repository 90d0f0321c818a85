"""Projection deconvolution estimator of the stationary density with
penalized selection of the sinc resolution m.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .fourier import (QuadratureGrid, basis_matrix, fourier_coeff_grid,
                      grid_for_frequency, oscillation_rule)
from .noise import cf_eval, delta_m, max_model, penalty_exponents

CF_FLOOR = 1e-300
IMAG_TOL = 1e-8
# bounds the cost of near-identity noise, where Delta(m) <= n admits m up to n
M_CAP = 16


@dataclass(frozen=True)
class PenaltyConfig:
    kappa1: float = 4.0
    kappa2: float = 4.0

    def __post_init__(self):
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise ValueError("penalty constants must be positive")


@dataclass
class ProjectionEstimate1D:
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

    def __call__(self, x):
        return evaluate_1d(self, x)

    def clipped(self, x):
        """Display-only view max(f_hat, 0)."""
        return np.maximum(evaluate_1d(self, x), 0.0)


@dataclass
class ModelCollection1D:
    n: int
    models: list
    deltas: dict
    penalties: dict = field(default_factory=dict)


# ---------------------------------------------------------- numerical core

def data_window(y, m, margin=1.0):
    """Translation indices j whose basis centre j/m lies within the data range +- margin."""
    y = np.asarray(y, dtype=float)
    return (math.ceil(m * (y.min() - margin)), math.floor(m * (y.max() + margin)))


def pooled_window(*arrays, m):
    return data_window(np.concatenate([np.ravel(a) for a in arrays]), m)


def max_frequency(y, m, window):
    """Largest |m y - j| over the data range and the window."""
    y = np.asarray(y, dtype=float)
    j_lo, j_hi = window
    return max(abs(m * y.max() - j_lo), abs(j_hi - m * y.min()), 1.0)


def quadrature_grid(y, m, window, n_points=None):
    """Grid for coefficient integrals at resolution m.

    By default the size follows the fastest mode of the integrand; an
    explicit ``n_points`` must still satisfy the documented oscillation rule.
    """
    y = np.asarray(y, dtype=float)
    if n_points is None:
        grid = grid_for_frequency(max_frequency(y, m, window))
    else:
        grid = QuadratureGrid(int(n_points))
    need = oscillation_rule(m, float(np.max(np.abs(y))))
    if grid.n_points < need:
        raise ValueError(f"quadrature grid too coarse: n_points={grid.n_points} < {need}")
    return grid


def inverse_cf(noise, grid, m):
    """1 / q*(-v m) on the grid nodes."""
    q = np.asarray(cf_eval(noise, -m * grid.nodes), dtype=complex)
    if np.any(np.abs(q) < CF_FLOOR):
        raise FloatingPointError("noise cf underflow")
    return 1.0 / q


def _split(n_points):
    r = math.ceil(math.sqrt(n_points))
    return math.ceil(n_points / r), r


def _phase_factors(x, m, grid):
    """A, B with A[i, l] * B[i, r] = exp(i m x_i v_{l R + r})."""
    L, R = _split(grid.n_points)
    h = grid.step
    mx = m * np.asarray(x, dtype=float)
    A = np.exp(1j * np.outer(mx, -math.pi + h * R * np.arange(L)))
    B = np.exp(1j * np.outer(mx, h * np.arange(R)))
    return A, B


def ecf_on_grid(y, m, grid, block=8192):
    """psi_hat(v m) at the grid nodes for the sample y."""
    y = np.asarray(y, dtype=float)
    L, R = _split(grid.n_points)
    acc = np.zeros((L, R), dtype=complex)
    for start in range(0, y.size, block):
        A, B = _phase_factors(y[start:start + block], m, grid)
        acc += A.T @ B
    return acc.ravel()[:grid.n_points] / y.size


def _check_real(c):
    re, im = c.real, c.imag
    if np.max(np.abs(im), initial=0.0) > IMAG_TOL * (1.0 + np.max(np.abs(re), initial=0.0)):
        raise FloatingPointError("coefficients have a non-negligible imaginary part")
    return np.ascontiguousarray(re)


def kernel_matrix(x, m, noise, window, grid=None, method="auto"):
    """V[i, j - j_lo] = v_{phi_{m,j}}(x_i), the deconvolution kernel of the basis.

    v_{phi_{m,j}}(x) = (sqrt(m)/2pi) int_{-pi}^{pi} exp(-i j v) exp(i x v m) / q*(-v m) dv.
    ``method="auto"`` uses the noise's closed-form kernel when it has one;
    ``"quadrature"`` always integrates on the grid.
    """
    x = np.asarray(x, dtype=float).ravel()
    js = np.arange(window[0], window[1] + 1)
    if method == "auto" and noise.kernel is not None:
        return math.sqrt(m) * noise.kernel(m, m * x[:, None] - js[None, :])
    if grid is None:
        grid = quadrature_grid(x, m, window)
    col = grid.weights * inverse_cf(noise, grid, m) * math.sqrt(m) / (2 * math.pi)
    C = np.exp(-1j * np.outer(grid.nodes, js)) * col[:, None]
    N = grid.n_points
    block = max(1, 2 ** 21 // N)
    out = np.empty((x.size, js.size))
    for start in range(0, x.size, block):
        A, B = _phase_factors(x[start:start + block], m, grid)
        E = (A[:, :, None] * B[:, None, :]).reshape(A.shape[0], -1)[:, :N]
        out[start:start + block] = _check_real(E @ C)
    return out


# ---------------------------------------------------------------- estimator

def coefficients_1d(y, m, noise, window=None, n_points=None):
    """a_j = (1/n) sum_i v_{phi_{m,j}}(Y_i) for j in the window."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("need at least two observations")
    if window is None:
        window = data_window(y, m)
    grid = quadrature_grid(y, m, window, n_points)
    g = math.sqrt(m) * ecf_on_grid(y, m, grid) * inverse_cf(noise, grid, m)
    return _check_real(fourier_coeff_grid(g, grid, window))


def contrast_1d(est):
    """gamma_n at the minimizer: ||f_m||^2 - 2 sum a_j^2 = -sum a_j^2."""
    return -float(np.sum(np.asarray(est.coeffs) ** 2))


def evaluate_1d(est, x):
    x = np.asarray(x, dtype=float)
    vals = basis_matrix(est.m, est.window, x.ravel()) @ est.coeffs
    return vals.reshape(x.shape)


def penalty_1d(m, noise, cfg, n):
    rho1, _ = penalty_exponents(noise.s)
    return cfg.kappa1 * (math.pi * m) ** rho1 * delta_m(noise, m) / n


def model_collection_1d(n, noise, restricted=False, cfg=None, m_cap=M_CAP):
    """All m >= 1 with Delta(m) <= n, optionally also m >= ln ln n and
    m Delta(m) <= n / (ln n)^2.  Capped at ``m_cap``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    top = min(max_model(noise, n), m_cap)
    models = list(range(1, top + 1))
    if restricted:
        lo = math.log(math.log(n))
        cap = n / math.log(n) ** 2
        models = [m for m in models if m >= lo and m * delta_m(noise, m) <= cap * (1 + 1e-12)]
    if not models:
        raise ValueError(f"no admissible model for n={n} (Delta(1) = {delta_m(noise, 1):.6g})")
    deltas = {m: delta_m(noise, m) for m in models}
    pens = {m: penalty_1d(m, noise, cfg, n) for m in models} if cfg else {}
    return ModelCollection1D(n=n, models=models, deltas=deltas, penalties=pens)


def select_model(criteria):
    """argmin over {m: value}; ties go to the smallest m."""
    best = None
    for m in sorted(criteria):
        if best is None or criteria[m] < criteria[best]:
            best = m
    return best


def fit_1d(y, m, noise, cfg=None, n=None, window=None, n_points=None):
    y = np.asarray(y, dtype=float).ravel()
    n = y.size if n is None else n
    window = data_window(y, m) if window is None else window
    a = coefficients_1d(y, m, noise, window, n_points)
    est = ProjectionEstimate1D(m=m, j_min=window[0], j_max=window[1], coeffs=a,
                               n=n, noise_kind=noise.kind)
    est.contrast_value = contrast_1d(est)
    est.penalty_value = penalty_1d(m, noise, cfg, n) if cfg else 0.0
    return est


def select_and_fit_1d(y, noise, cfg=None, n=None, restricted=False, models=None,
                      n_points=None):
    """Fit every admissible m and keep the minimizer of contrast + penalty."""
    cfg = cfg or PenaltyConfig()
    y = np.asarray(y, dtype=float).ravel()
    n = y.size if n is None else n
    if models is None:
        models = model_collection_1d(n, noise, restricted).models
    fits = {m: fit_1d(y, m, noise, cfg, n, n_points=n_points) for m in models}
    best = select_model({m: e.criterion for m, e in fits.items()})
    est = fits[best]
    est.candidates = tuple((m, e.contrast_value, e.penalty_value) for m, e in sorted(fits.items()))
    return est


# ------------------------------------------------------------------- output

def fmt(x):
    return format(float(x), ".17g")


def write_estimate_1d(path, est):
    with open(path, "w", newline="") as fh:
        fh.write(f"# m={est.m} n={est.n} noise={est.noise_kind}\n")
        fh.write("j,a_j\n")
        for j, a in zip(range(est.j_min, est.j_max + 1), est.coeffs):
            fh.write(f"{j},{fmt(a)}\n")


def read_estimate_1d(path):
    with open(path) as fh:
        header = dict(tok.split("=", 1) for tok in fh.readline()[1:].split())
        fh.readline()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    js = [int(r[0]) for r in rows]
    return ProjectionEstimate1D(m=int(header["m"]), j_min=js[0], j_max=js[-1],
                                coeffs=np.array([float(r[1]) for r in rows]),
                                n=int(header["n"]), noise_kind=header["noise"])
