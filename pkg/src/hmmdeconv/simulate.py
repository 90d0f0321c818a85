"""Stationary Markov chains with closed-form truth, and the additive-noise
observation layer Y = X + eps.

Random streams come from counter-based Philox generators keyed by
(base seed, role, extra keys), so the latent path and the noise never share
a stream and replicates can run in any order.
"""
from dataclasses import dataclass, field
import math
import zlib

import numpy as np
from scipy import integrate, signal, special, stats

from .noise import log_chisq


def substream(seed, role, *keys):
    """Independent generator for (seed, role, keys)."""
    if seed is None or int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    entropy = [int(seed), zlib.crc32(role.encode())] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class SmoothnessClass:
    """Fourier decay class: int |f*|^2 (x^2+1)^delta exp(2 a |x|^r) < inf."""

    delta: float
    r: float
    a: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if self.r == 0 and not self.delta > 0.5:
            raise ValueError("delta must exceed 1/2 when r = 0")
        if self.r > 0 and not self.a > 0:
            raise ValueError("a must be positive when r > 0")


def _ar_path(coef, drift, innov_sd, start, n, rng):
    """x_0 = start, x_t = coef x_{t-1} + drift + innov_sd z_t; returns n+1 values."""
    u = drift + innov_sd * rng.standard_normal(n)
    rest = signal.lfilter([1.0], [1.0, -coef], u, zi=[coef * start])[0]
    return np.concatenate([[start], rest])


@dataclass
class ChainModel:
    """Base for chains with exact samplers and closed-form f, F and Pi."""

    name: str = field(init=False, default="chain")

    def sample(self, n, seed, *keys):
        """Stationary path X_1..X_{n+1}."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return self._sample(n, substream(seed, "latent", *keys))

    def f(self, x):
        raise NotImplementedError

    def F(self, x, y):
        raise NotImplementedError

    def Pi(self, x, y):
        return self.F(x, y) / self.f(x)

    def bias_f(self, m):
        """||f - f_m||^2 = (1/2pi) int_{|u| > pi m} |f*(u)|^2 du."""
        c = math.pi * m
        val, _ = integrate.quad(self.f_star_sq, c, np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
        return val / math.pi

    def bias_F(self, m):
        """||F - F_m||^2: |F*|^2 integrated outside the square [-pi m, pi m]^2."""
        c = math.pi * m
        opts = dict(epsabs=1e-14, epsrel=1e-10, limit=200)

        def outer(u):
            tail_v = sum(integrate.quad(lambda v: self.F_star_sq(u, v), lo, hi, **opts)[0]
                         for lo, hi in ((-np.inf, -c), (c, np.inf)))
            if abs(u) > c:
                tail_v += integrate.quad(lambda v: self.F_star_sq(u, v), -c, c, **opts)[0]
            return tail_v

        total = sum(integrate.quad(outer, lo, hi, **opts)[0]
                    for lo, hi in ((-np.inf, -c), (-c, c), (c, np.inf)))
        return total / (4 * math.pi ** 2)


@dataclass
class AR1Chain(ChainModel):
    """X_{t+1} = alpha X_t + beta + eta, eta ~ N(0, sigma^2)."""

    alpha: float = 0.5
    beta: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not abs(self.alpha) < 1:
            raise ValueError("|alpha| must be < 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        self.name = "ar1"

    @property
    def mean(self):
        return self.beta / (1 - self.alpha)

    @property
    def var(self):
        return self.sigma ** 2 / (1 - self.alpha ** 2)

    @property
    def sd(self):
        return math.sqrt(self.var)

    @property
    def smoothness_f(self):
        return SmoothnessClass(delta=0.5, r=2.0, a=self.var / 2)

    @property
    def smoothness_F(self):
        # exponent sigma^2/2 reproduces the displayed supersmooth-noise rate
        return SmoothnessClass(delta=0.5, r=2.0, a=self.sigma ** 2 / 2)

    def params(self):
        return {"alpha": self.alpha, "beta": self.beta, "sigma": self.sigma}

    def _sample(self, n, rng):
        start = self.mean + self.sd * rng.standard_normal()
        return _ar_path(self.alpha, self.beta, self.sigma, start, n, rng)

    def f(self, x):
        return stats.norm.pdf(x, self.mean, self.sd)

    def F(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self.f(x) * self.Pi(x, y)

    def Pi(self, x, y):
        return stats.norm.pdf(y, self.alpha * np.asarray(x) + self.beta, self.sigma)

    def f_star_sq(self, u):
        return np.exp(-self.var * np.asarray(u) ** 2)

    def F_star_sq(self, u, v):
        return np.exp(-self.var * (u * u + v * v + 2 * self.alpha * u * v))

    def bias_f(self, m):
        s = self.sd
        return special.erfc(s * math.pi * m) / (2 * math.sqrt(math.pi) * s)

    def bias_F(self, m):
        s, al, c = self.sd, self.alpha, math.pi * m
        k = math.sqrt(math.pi) / (2 * s)
        w = self.var * (1 - al * al)
        opts = dict(epsabs=1e-16, epsrel=1e-12, limit=200)

        def v_tail(u):
            return k * (special.erfc(s * (c + al * u)) + special.erfc(s * (c - al * u)))

        def v_core(u):
            return k * (special.erf(s * (c + al * u)) + special.erf(s * (c - al * u)))

        # pairs with |v| > c, any u; then |u| > c with |v| <= c (use symmetry in u)
        part1 = 2 * integrate.quad(lambda u: math.exp(-w * u * u) * v_tail(u), 0, np.inf, **opts)[0]
        part2 = 2 * integrate.quad(lambda u: math.exp(-w * u * u) * v_core(u), c, np.inf, **opts)[0]
        return (part1 + part2) / (4 * math.pi ** 2)


@dataclass
class OUChain(AR1Chain):
    """Regular sampling of dV = theta V dt + sigma dB (theta < 0) at step tau."""

    # derived from (theta, sigma_ou, tau) in __post_init__
    alpha: float = field(init=False, default=0.5)
    beta: float = field(init=False, default=0.0)
    sigma: float = field(init=False, default=1.0)
    theta: float = -1.0
    sigma_ou: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if not self.theta < 0:
            raise ValueError("theta must be negative")
        if not (self.sigma_ou > 0 and self.tau > 0):
            raise ValueError("sigma and tau must be positive")
        self.alpha = math.exp(self.theta * self.tau)
        self.beta = 0.0
        stat_var = self.sigma_ou ** 2 / (2 * abs(self.theta))
        self.sigma = math.sqrt(stat_var * (1 - self.alpha ** 2))
        super().__post_init__()
        self.name = "ou"

    def params(self):
        return {"theta": self.theta, "sigma": self.sigma_ou, "tau": self.tau}


@dataclass
class CIRChain(ChainModel):
    """dR = (2 theta R + kappa sigma0^2) dt + 2 sigma0 sqrt(R) dW sampled at step tau.

    Built as the squared norm of kappa independent AR(1) components.
    """

    theta: float = -1.0
    kappa: int = 2
    sigma0: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if not self.theta < 0:
            raise ValueError("theta must be negative")
        if int(self.kappa) != self.kappa or self.kappa < 2:
            raise ValueError("kappa must be an integer >= 2")
        if not (self.sigma0 > 0 and self.tau > 0):
            raise ValueError("sigma0 and tau must be positive")
        self.kappa = int(self.kappa)
        self.name = "cir"

    @property
    def coef(self):
        return math.exp(self.theta * self.tau)

    @property
    def beta2(self):
        return self.sigma0 ** 2 * (math.exp(2 * self.theta * self.tau) - 1) / (2 * self.theta)

    @property
    def scale(self):
        return self.sigma0 ** 2 / abs(self.theta)

    @property
    def mean(self):
        return self.kappa * self.scale / 2

    @property
    def sd(self):
        return math.sqrt(self.kappa / 2) * self.scale

    @property
    def smoothness_f(self):
        return SmoothnessClass(delta=(self.kappa - 1) / 2, r=0.0, a=0.0)

    @property
    def smoothness_F(self):
        return SmoothnessClass(delta=(self.kappa - 1) / 2, r=0.0, a=0.0)

    def params(self):
        return {"theta": self.theta, "kappa": self.kappa, "sigma0": self.sigma0, "tau": self.tau}

    def _sample(self, n, rng):
        comp_sd = math.sqrt(self.scale / 2)
        paths = [_ar_path(self.coef, 0.0, math.sqrt(self.beta2), comp_sd * rng.standard_normal(), n, rng)
                 for _ in range(self.kappa)]
        return np.sum(np.square(paths), axis=0)

    def f(self, x):
        return stats.gamma.pdf(x, self.kappa / 2, scale=self.scale)

    def Pi(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        b2 = self.beta2
        nc = np.maximum(math.exp(2 * self.theta * self.tau) * x / b2, 0.0)
        out = stats.ncx2.pdf(y / b2, self.kappa, nc) / b2
        return np.where(x >= 0, out, 0.0)

    def F(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self.f(x) * self.Pi(x, y)

    def conditional_mean(self, x):
        return math.exp(2 * self.theta * self.tau) * np.asarray(x) + self.kappa * self.beta2

    def f_star_sq(self, u):
        return (1 + (np.asarray(u) * self.scale) ** 2) ** (-self.kappa / 2)

    def F_star_sq(self, u, v):
        c = self.scale
        z = 1 - (1 - math.exp(2 * self.theta * self.tau)) * c * c * u * v + 1j * c * (u + v)
        return np.abs(z) ** (-self.kappa)


CHAINS = {"ar1": AR1Chain, "ou": OUChain, "cir": CIRChain}


def simulate_ar1(alpha, beta, sigma, n, seed, *keys):
    return AR1Chain(alpha=alpha, beta=beta, sigma=sigma).sample(n, seed, *keys)


def simulate_cir(theta, kappa, sigma0, tau, n, seed, *keys):
    return CIRChain(theta=theta, kappa=kappa, sigma0=sigma0, tau=tau).sample(n, seed, *keys)


def add_noise(path, noise, seed, *keys):
    """Y = X + eps with eps drawn from a stream disjoint from the latent one."""
    path = np.asarray(path, dtype=float)
    eps = noise.sample(substream(seed, "noise", *keys), path.shape)
    return path + eps


def simulate_sv(theta, sigma, tau, n, seed, *keys):
    """Latent log-volatility X (sampled OU) and Y = X + log(eta^2)."""
    x = OUChain(theta=theta, sigma_ou=sigma, tau=tau).sample(n, seed, *keys)
    return x, add_noise(x, log_chisq(), seed, *keys)


def true_density_eval(model, which, points):
    """Evaluate the true f (points x), F or Pi (points of shape (..., 2))."""
    if not isinstance(model, ChainModel):
        raise TypeError("model has no closed-form truth")
    if which == "f":
        return model.f(np.asarray(points, dtype=float))
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("bivariate points need a trailing axis of length 2")
    if which == "F":
        return model.F(pts[..., 0], pts[..., 1])
    if which == "Pi":
        return model.Pi(pts[..., 0], pts[..., 1])
    raise ValueError(f"unknown density '{which}'")


def write_path(path_csv, x, y):
    with open(path_csv, "w", newline="") as fh:
        fh.write("i,x_i,y_i\n")
        for i, (a, b) in enumerate(zip(x, y), start=1):
            fh.write(f"{i},{format(float(a), '.17g')},{format(float(b), '.17g')}\n")
