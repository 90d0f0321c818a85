"""Known noise laws: characteristic function, decay parameters, variance
scales Delta(m) and Delta_2(m), penalty exponents and sampling.

The characteristic function follows the Fourier convention
``q*(u) = E exp(-i u eps)``.
"""
from dataclasses import dataclass, field
import csv
import math
import threading
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from .fourier import _sinc, sinc_second_derivative

LOG_MAX = math.log(np.finfo(float).max)


class DeltaOverflow(ArithmeticError):
    """Delta(m) is not representable in double precision."""

    def __init__(self, m, largest_feasible):
        self.m = m
        self.largest_feasible = largest_feasible
        super().__init__(f"delta overflow at m={m} (largest feasible m={largest_feasible})")


class DeltaTable:
    """Per-noise cache of Delta(m), Delta_2(m); populate-once under a lock."""

    def __init__(self):
        self._values = {}
        self._lock = threading.Lock()

    def get(self, key, compute):
        try:
            return self._values[key]
        except KeyError:
            pass
        value = compute()
        with self._lock:
            return self._values.setdefault(key, value)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Noise distribution with its A2 envelope declaration.

    ``log_inv_sq`` optionally returns log |q*(u)|^{-2} in closed form, and
    ``log_delta``/``log_delta2`` give log Delta(m), log Delta_2(m) in closed
    form.  ``exact_delta(m, kind)`` returns Delta (kind 1) or Delta_2 (kind 2)
    directly when a rational closed form exists.  Without any of these the
    integrals fall back to adaptive quadrature.
    ``kernel(m, z)``, when known, is v_{phi_{m,j}}(x) / sqrt(m) as a function
    of z = m x - j.
    """

    kind: str
    cf: Callable
    gamma: float
    s: float
    b: float
    k0: float = 1.0
    k1: float = 1.0
    sampler: Optional[Callable] = None
    iqr: float = 0.0
    params: dict = field(default_factory=dict)
    log_inv_sq: Optional[Callable] = None
    log_delta: Optional[Callable] = None
    log_delta2: Optional[Callable] = None
    kernel: Optional[Callable] = None
    exact_delta: Optional[Callable] = None
    table: DeltaTable = field(default_factory=DeltaTable, repr=False)

    def __post_init__(self):
        if self.gamma < 0 or self.s < 0:
            raise ValueError("gamma and s must be non-negative")
        if self.s > 0 and self.b <= 0:
            raise ValueError("b must be positive when s > 0")
        if self.s == 0 and self.gamma <= 0 and self.kind != "identity":
            raise ValueError("gamma must be positive when s = 0")

    def __call__(self, u):
        return cf_eval(self, u)

    def sample(self, rng, size):
        if self.sampler is None:
            raise ValueError(f"noise '{self.kind}' has no sampler")
        return self.sampler(rng, size)

    def describe(self):
        extra = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({extra})" if extra else self.kind


def cf_eval(noise, u):
    out = noise.cf(np.asarray(u, dtype=float))
    out = np.asarray(out, dtype=complex)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------- built-ins

def identity():
    """Degenerate noise eps = 0; the estimators reduce to plain projections."""
    return NoiseModel(
        kind="identity",
        cf=lambda u: np.ones_like(u, dtype=complex),
        gamma=0.0, s=0.0, b=0.0,
        sampler=lambda rng, size: np.zeros(size),
        log_inv_sq=lambda u: np.zeros_like(u),
        exact_delta=lambda m, kind: float(m) if kind == 1 else m / (2 * math.pi),
        kernel=lambda m, z: _sinc(z),
    )


def _laplace_delta(m, kind):
    # (1/pi) int_0^a (1+u^2)^2 du and (1/2pi^2) int_0^a (1+u^2)^4 du, a = pi m
    a = math.pi * m
    if kind == 1:
        return (a + 2 * a ** 3 / 3 + a ** 5 / 5) / math.pi
    poly = a + 4 * a ** 3 / 3 + 6 * a ** 5 / 5 + 4 * a ** 7 / 7 + a ** 9 / 9
    return poly / (2 * math.pi ** 2)


def laplace():
    """Standard Laplace noise, q*(u) = 1/(1+u^2) (variance 2)."""
    return NoiseModel(
        kind="laplace",
        cf=lambda u: (1.0 / (1.0 + u * u)).astype(complex),
        gamma=2.0, s=0.0, b=0.0, k0=1.0, k1=1.0,
        sampler=lambda rng, size: rng.laplace(0.0, 1.0, size),
        iqr=2 * math.log(2.0),
        log_inv_sq=lambda u: 2 * np.log1p(u * u),
        exact_delta=_laplace_delta,
        # 1/q*(-u) = 1 + u^2, so v_t = t - t''
        kernel=lambda m, z: _sinc(z) - m * m * sinc_second_derivative(z),
    )


def _log_erfi_integral(x):
    """log of int_0^x exp(t^2) dt = log(exp(x^2) D(x)), D the Dawson function."""
    return x * x + math.log(special.dawsn(x))


def gaussian(tau):
    """Centered normal noise with standard deviation tau."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    t2 = tau * tau

    def log_delta(m):
        # (1/pi) int_0^{pi m} exp(tau^2 u^2) du
        return _log_erfi_integral(tau * math.pi * m) - math.log(math.pi * tau)

    def log_delta2(m):
        # (1/(2 pi^2)) int_0^{pi m} exp(2 tau^2 u^2) du
        r = math.sqrt(2.0) * tau
        return _log_erfi_integral(r * math.pi * m) - math.log(2 * math.pi ** 2 * r)

    return NoiseModel(
        kind="gaussian",
        cf=lambda u: np.exp(-0.5 * t2 * u * u).astype(complex),
        gamma=0.0, s=2.0, b=t2 / 2, k0=1.0, k1=1.0,
        sampler=lambda rng, size: tau * rng.standard_normal(size),
        iqr=2 * stats.norm.ppf(0.75) * tau,
        params={"tau": tau},
        log_inv_sq=lambda u: t2 * u * u,
        log_delta=log_delta,
        log_delta2=log_delta2,
    )


def log_chisq_cf(u):
    """q*(u) = 2^{-iu} Gamma(1/2 - iu) / sqrt(pi) for eps = log(eta^2)."""
    u = np.asarray(u, dtype=float)
    # subtracting loggamma(1/2) rather than log(sqrt(pi)) keeps q*(0) exactly 1
    z = special.loggamma(0.5 - 1j * u) - special.loggamma(0.5 + 0j) - 1j * u * math.log(2.0)
    return np.exp(z)


def _log_sinh(x):
    return x + math.log1p(-math.exp(-2 * x)) - math.log(2.0)


def log_chisq():
    """Log of a chi-square(1) variable; |q*(u)|^2 = 1/cosh(pi u)."""
    def log_delta(m):
        # (1/2pi) int cosh(pi u) du over [-pi m, pi m] = sinh(pi^2 m) / pi^2
        return _log_sinh(math.pi ** 2 * m) - 2 * math.log(math.pi)

    def log_delta2(m):
        # (1/4pi^2) int cosh^2(pi u) du = (pi m + sinh(2 pi^2 m)/(2 pi)) / (4 pi^2)
        a = math.pi * m
        big = _log_sinh(2 * math.pi ** 2 * m) - math.log(2 * math.pi)
        return big + math.log1p(a * math.exp(-big)) - math.log(4 * math.pi ** 2)

    q = stats.chi2(1)
    return NoiseModel(
        kind="log_chisq",
        cf=log_chisq_cf,
        gamma=0.0, s=1.0, b=math.pi / 2, k0=1.0, k1=math.sqrt(2.0),
        sampler=lambda rng, size: np.log(rng.standard_normal(size) ** 2),
        iqr=math.log(q.ppf(0.75)) - math.log(q.ppf(0.25)),
        log_inv_sq=lambda u: np.logaddexp(np.pi * u, -np.pi * u) - math.log(2.0),
        log_delta=log_delta,
        log_delta2=log_delta2,
    )


def user_table(u, re, im, gamma, s=0.0, b=0.0, k0=1.0, k1=1.0, name="user_table"):
    """q* tabulated on a grid and linearly interpolated (diagnostic quality).

    A table given on u >= 0 only is extended by Hermitian symmetry.  The
    model has no sampler and evaluating outside the table is an error.
    """
    u = np.asarray(u, dtype=float)
    vals = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
    order = np.argsort(u)
    u, vals = u[order], vals[order]
    if u[0] >= 0:
        keep = u > 0
        u = np.concatenate([-u[keep][::-1], u])
        vals = np.concatenate([np.conj(vals[keep][::-1]), vals])
    lo, hi = u[0], u[-1]

    def cf(x):
        x = np.asarray(x, dtype=float)
        if np.any((x < lo) | (x > hi)):
            raise ValueError(f"frequency outside tabulated range [{lo}, {hi}]")
        return np.interp(x, u, vals.real) + 1j * np.interp(x, u, vals.imag)

    return NoiseModel(kind=name, cf=cf, gamma=gamma, s=s, b=b, k0=k0, k1=k1,
                      params={"u_max": float(hi)})


def read_cf_table(path, **declared):
    """Load a CSV with columns u, re, im into a :func:`user_table` model."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"u", "re", "im"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["u"]), float(row["re"]), float(row["im"])))
            except (TypeError, ValueError):
                raise ValueError(f"{path}: malformed number on line {lineno}") from None
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two rows")
    arr = np.array(rows)
    return user_table(arr[:, 0], arr[:, 1], arr[:, 2], **declared)


BUILTIN = {
    "identity": identity,
    "laplace": laplace,
    "gaussian": gaussian,
    "log_chisq": log_chisq,
}


# ------------------------------------------------------------ Delta tables

def _log_integrand(noise, u, power):
    if noise.log_inv_sq is not None:
        return 0.5 * power * noise.log_inv_sq(u)
    mod = np.abs(np.asarray(noise.cf(u), dtype=complex))
    with np.errstate(divide="ignore"):
        return -power * np.log(mod)


def _log_quad(noise, m, power):
    """log of int_{-pi m}^{pi m} |q*(u)|^{-power} du, scaled to avoid overflow."""
    top = math.pi * m
    probe = np.linspace(0.0, top, 257)
    logs = _log_integrand(noise, np.concatenate([probe, -probe]), power)
    if not np.all(np.isfinite(logs)):
        raise FloatingPointError("noise cf vanishes on the integration range")
    shift = float(np.max(logs))

    def f(u):
        return math.exp(float(_log_integrand(noise, np.array([u]), power)[0]) - shift)

    val, _ = integrate.quad(f, -top, top, epsabs=1e-10 * 2 * top, epsrel=1e-10, limit=500)
    return shift + math.log(val)


def _largest_feasible(noise, kind, m):
    k = m - 1
    while k >= 1:
        try:
            _log_delta_any(noise, k, kind)
            return k
        except DeltaOverflow:
            k -= 1
    return 0


def _log_delta_any(noise, m, kind):
    if noise.exact_delta is not None:
        val = math.log(noise.exact_delta(m, kind))
    elif kind == 1:
        if noise.log_delta is not None:
            val = noise.log_delta(m)
        else:
            val = _log_quad(noise, m, 2) - math.log(2 * math.pi)
    else:
        if noise.log_delta2 is not None:
            val = noise.log_delta2(m)
        else:
            val = _log_quad(noise, m, 4) - math.log(4 * math.pi ** 2)
    if val >= LOG_MAX:
        raise DeltaOverflow(m, None)
    return val


def _delta(noise, m, kind):
    if m < 1:
        raise ValueError("m must be >= 1")

    def compute():
        try:
            log_val = _log_delta_any(noise, m, kind)
            if noise.exact_delta is not None:
                return noise.exact_delta(m, kind)
            return math.exp(log_val)
        except DeltaOverflow:
            raise DeltaOverflow(m, _largest_feasible(noise, kind, m)) from None

    return noise.table.get((kind, m), compute)


def delta_m(noise, m):
    """Delta(m) = (1/2pi) int_{-pi m}^{pi m} |q*(u)|^{-2} du."""
    return _delta(noise, m, 1)


def delta2_m(noise, m):
    """Delta_2(m) = (1/4pi^2) int_{-pi m}^{pi m} |q*(u)|^{-4} du."""
    return _delta(noise, m, 2)


def max_model(noise, bound, square=False):
    """Largest m with Delta(m) <= bound (Delta(m)^2 <= bound if ``square``).

    Returns 0 when even m = 1 fails.  The scan stops at the first overflow.
    """
    m = 0
    while True:
        try:
            d = delta_m(noise, m + 1)
        except DeltaOverflow:
            return m
        # relative slack absorbs closed-form roundoff at exact boundaries
        if (d * d if square else d) > bound * (1 + 1e-12):
            return m
        m += 1


def penalty_exponents(s):
    """Exponents of pi m in pen(m) and Pen(m)."""
    if s < 0:
        raise ValueError("s must be non-negative")
    rho1 = max(0.0, s - max(0.0, 1.0 - s) / 2.0)
    rho2 = max(0.0, s - max(0.0, 1.0 - s))
    return rho1, rho2


# ------------------------------------------------------------- diagnostics

@dataclass
class EnvelopeReport:
    n_checked: int
    violations: list

    @property
    def ok(self):
        return not self.violations


def envelope(noise, u):
    """Lower and upper A2 envelopes on ``u``."""
    u = np.asarray(u, dtype=float)
    base = (u * u + 1.0) ** (-noise.gamma / 2) * np.exp(-noise.b * np.abs(u) ** noise.s)
    return noise.k0 * base, noise.k1 * base


def check_envelope(noise, u_grid, rtol=1e-12):
    """List grid points where |q*| leaves the declared envelope."""
    u = np.asarray(u_grid, dtype=float)
    mod = np.abs(cf_eval(noise, u))
    lo, hi = envelope(noise, u)
    bad = (mod < lo * (1 - rtol)) | (mod > hi * (1 + rtol))
    violations = [(float(a), float(b), float(c), float(d))
                  for a, b, c, d in zip(u[bad], mod[bad], lo[bad], hi[bad])]
    return EnvelopeReport(n_checked=u.size, violations=violations)


@dataclass
class GrowthReport:
    m: list
    log_delta: list
    poly_exponent: float
    exp_coefficient: float
    c1: float
    c1_prime: float
    flagged: bool


def delta_growth_diagnostic(noise, m_list):
    """Compare log Delta(m) with (pi m)^{2 gamma + 1 - s} exp(2 b (pi m)^s).

    The polynomial exponent (and, for s > 0, the coefficient of (pi m)^s) is
    fitted freely by least squares; c1, c1' are the extreme ratios of
    Delta(m) to the declared template.  Flagged when they differ by more
    than a factor 10.
    """
    ms = np.asarray(sorted(set(int(m) for m in m_list)), dtype=float)
    logd = np.array([math.log(delta_m(noise, int(m))) for m in ms])
    x = np.log(math.pi * ms)
    cols = [np.ones_like(ms), x]
    if noise.s > 0:
        cols.append((math.pi * ms) ** noise.s)
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), logd, rcond=None)
    exp_coef = float(coef[2]) if noise.s > 0 else 0.0
    template = (2 * noise.gamma + 1 - noise.s) * x + 2 * noise.b * (math.pi * ms) ** noise.s
    ratio = logd - template
    c1, c1p = float(np.exp(ratio.max())), float(np.exp(ratio.min()))
    return GrowthReport(
        m=[int(m) for m in ms], log_delta=logd.tolist(),
        poly_exponent=float(coef[1]), exp_coefficient=exp_coef,
        c1=c1, c1_prime=c1p, flagged=bool(c1 / c1p > 10.0),
    )
