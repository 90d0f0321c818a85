"""Monte Carlo risk studies: MISE on grids, replicate loops, empirical rate
fits and their theoretical predictions, oracle model search and the
slope-style penalty calibration.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import math
import time
from typing import Optional

import numpy as np

from .estimate1d import PenaltyConfig, fit_1d, model_collection_1d, penalty_1d, select_and_fit_1d
from .estimate2d import consecutive_pairs, fit_2d, model_collection_2d, penalty_2d, select_and_fit_2d
from .noise import delta_m, max_model, penalty_exponents
from .simulate import add_noise
from .transition import (TransitionEstimate, default_B, floor_from_model, restricted_models_f,
                         surrogate_bound)

MISE_POINTS = 1024
SPREAD = 6.0


# -------------------------------------------------------------------- MISE

def _trap_weights(lo, hi, points):
    w = np.full(points, (hi - lo) / (points - 1))
    w[[0, -1]] /= 2
    return w


def mise_grid(est, truth, domain, points=MISE_POINTS):
    """Trapezoid approximation of int (est - truth)^2 over an interval or a rectangle.

    For a rectangle ``((x0, x1), (y0, y1))`` the evaluators take the two axis
    grids and return the surface with rows indexed by x.
    """
    if np.ndim(domain[0]) == 0:
        lo, hi = domain
        xs = np.linspace(lo, hi, points)
        diff = np.asarray(est(xs), dtype=float) - np.asarray(truth(xs), dtype=float)
        if not np.all(np.isfinite(diff)):
            raise ValueError("non-finite evaluator output")
        return float(_trap_weights(lo, hi, points) @ diff ** 2)
    (x0, x1), (y0, y1) = domain
    xs = np.linspace(x0, x1, points)
    ys = np.linspace(y0, y1, points)
    diff = np.asarray(est(xs, ys), dtype=float) - np.asarray(truth(xs, ys), dtype=float)
    if not np.all(np.isfinite(diff)):
        raise ValueError("non-finite evaluator output")
    return float(_trap_weights(x0, x1, points) @ diff ** 2 @ _trap_weights(y0, y1, points))


def support_domain(model, spread=SPREAD):
    return (model.mean - spread * model.sd, model.mean + spread * model.sd)


# ------------------------------------------------------------------ studies

@dataclass
class RiskRecord:
    n: int
    replicate: int
    seed: int
    m_hat: Optional[int] = None
    M_hat: Optional[int] = None
    mise_f: Optional[float] = None
    mise_F: Optional[float] = None
    mise_pi: Optional[float] = None
    wall_time: float = 0.0
    status: str = "ok"

    def __post_init__(self):
        for name in ("mise_f", "mise_F", "mise_pi"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")

    @property
    def failed(self):
        return self.status != "ok"


RECORD_FIELDS = ("n", "replicate", "seed", "m_hat", "M_hat", "mise_f", "mise_F", "mise_pi", "status")


def study_B(model, noise, base_seed, size=100_000):
    """Default B applied to a large pilot sample, shared by every replicate."""
    x = model.sample(size, base_seed, 0, 0, 1)
    y = add_noise(x, noise, base_seed, 0, 0, 1)
    return default_B(y, noise)


def _pi_truth(model):
    return lambda xs, ys: model.Pi(xs[:, None], ys[None, :])


def run_replicate(model, noise, cfg, n, rep, base_seed, B, points=MISE_POINTS):
    """Simulate, fit f, F and Pi, and score them.  Failures are recorded, not raised."""
    t0 = time.perf_counter()
    rec = RiskRecord(n=n, replicate=rep, seed=base_seed)
    errors = []
    x = model.sample(n, base_seed, n, rep)
    y = add_noise(x, noise, base_seed, n, rep)
    dom = support_domain(model)
    f_est = F_est = None
    try:
        f_est = select_and_fit_1d(y[:n], noise, cfg, n=n)
        rec.m_hat = f_est.m
        rec.mise_f = mise_grid(f_est, model.f, dom, points)
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        errors.append(f"f: {exc}")
    try:
        F_est = select_and_fit_2d(consecutive_pairs(y), noise, cfg, n=n)
        rec.M_hat = F_est.m
        rec.mise_F = mise_grid(F_est, lambda xs, ys: model.F(xs[:, None], ys[None, :]),
                               (dom, dom), points)
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        errors.append(f"F: {exc}")
    if f_est is not None and F_est is not None:
        try:
            f_pi = f_est
            try:
                models = restricted_models_f(n, noise)
                if models != [m for m, _, _ in f_est.candidates]:
                    f_pi = select_and_fit_1d(y[:n], noise, cfg, n=n, models=models)
            except ValueError:
                pass
            est = TransitionEstimate(f_est=f_pi, F_est=F_est, B=B, n=n)
            rec.mise_pi = mise_grid(est.surface, _pi_truth(model), (B, B), points)
        except (ValueError, FloatingPointError, ArithmeticError) as exc:
            errors.append(f"Pi: {exc}")
    if errors:
        rec.status = "failed: " + "; ".join(errors)
    rec.wall_time = time.perf_counter() - t0
    return rec


def mc_risk_study(model, noise, cfg=None, n_list=(500, 2000, 8000), replicates=10,
                  base_seed=0, threads=1, B=None, points=MISE_POINTS):
    """Records for every (n, replicate), sorted by that key; deterministic in base_seed."""
    n_list = [int(n) for n in n_list]
    if not n_list or any(b < a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be nonempty and nondecreasing")
    if replicates < 2:
        raise ValueError("replicates must be >= 2")
    cfg = cfg or PenaltyConfig()
    B = study_B(model, noise, base_seed) if B is None else tuple(B)
    tasks = [(n, r) for n in dict.fromkeys(n_list) for r in range(replicates)]

    def run(task):
        return run_replicate(model, noise, cfg, task[0], task[1], base_seed, B, points)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, tasks))
    else:
        records = [run(t) for t in tasks]
    return sorted(records, key=lambda r: (r.n, r.replicate))


def medians_by_n(records, key):
    out = {}
    for n in sorted({r.n for r in records}):
        vals = [getattr(r, key) for r in records if r.n == n and getattr(r, key) is not None]
        out[n] = float(np.median(vals)) if vals else None
    return out


def write_records(path, records, timings=False):
    fields = RECORD_FIELDS + (("wall_time",) if timings else ())
    with open(path, "w", newline="") as fh:
        fh.write(",".join(fields) + "\n")
        for rec in records:
            row = asdict(rec)
            cells = []
            for k in fields:
                v = row[k]
                if v is None:
                    cells.append("")
                elif isinstance(v, float):
                    cells.append(format(v, ".17g"))
                else:
                    cells.append(str(v).replace(",", ";"))
            fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------- rate fits

@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    regime: str = "power"
    log_power: Optional[float] = None
    medians: dict = field(default_factory=dict)


def _linfit(x, y):
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return coef, sse, r2


def rate_fit(data, key="mise_f"):
    """Least-squares slope of log(median MISE) against log n.

    ``data`` is a list of RiskRecord or a mapping n -> MISE value(s).  A
    logarithmic regime, MISE ~ c (ln n)^(-p), is reported when the power law
    has R^2 < 0.9 and that template fits better, or when the template fits
    a thousand times better in SSE.
    """
    if isinstance(data, dict):
        med = {int(n): float(np.median(np.atleast_1d(v))) for n, v in data.items()}
    else:
        med = {n: v for n, v in medians_by_n(data, key).items() if v is not None}
    if len(med) < 3:
        raise ValueError("rate fit needs at least 3 distinct n")
    ns = np.array(sorted(med), dtype=float)
    vals = np.array([med[int(n)] for n in ns])
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise ValueError("degenerate MISE values (zero or non-finite)")
    ly = np.log(vals)
    (b0, b1), sse_pow, r2 = _linfit(np.log(ns), ly)
    (_, c1), sse_log, _ = _linfit(np.log(np.log(ns)), ly)
    regime, log_power = "power", None
    if sse_log < 1e-3 * sse_pow or (r2 < 0.9 and sse_log < sse_pow):
        regime, log_power = "logarithmic", float(-c1)
    return RateFit(slope=float(b1), intercept=float(b0), r2=float(r2), regime=regime,
                   log_power=log_power, medians=med)


@dataclass(frozen=True)
class RatePrediction:
    regime: str
    exponent: Optional[float]
    log_power: Optional[float]
    description: str


def predict_rate(smooth, noise, dim=1):
    """Upper-bound rate for the 1D (dim=1) or bivariate (dim=2) estimator.

    ``exponent`` is the power of n and ``log_power`` the power of ln n; None
    marks regimes whose constants are not available in closed form.
    """
    delta, r, a = smooth.delta, smooth.r, smooth.a
    g, s, b = noise.gamma, noise.s, noise.b
    rho1, rho2 = penalty_exponents(s)
    tag_r = "r" if dim == 1 else "R"
    if r == 0 and s == 0:
        e = -2 * delta / (2 * delta + 2 * g + 1) if dim == 1 else -2 * delta / (2 * delta + 4 * g + 2)
        return RatePrediction(f"{tag_r}=0, s=0", e, 0.0, f"n^{e:.6g}")
    if r == 0:
        p = -2 * delta / s
        return RatePrediction(f"{tag_r}=0, s>0", 0.0, p, f"(ln n)^{p:.6g}")
    if s == 0:
        p = (2 * g + 1) / r if dim == 1 else (4 * g + 2) / r
        return RatePrediction(f"{tag_r}>0, s=0", -1.0, p, f"(ln n)^{p:.6g}/n (near-parametric)")
    if r < s:
        return RatePrediction(f"{tag_r}<s", 0.0, -2 * delta / s,
                              "(ln n)^(-2 delta/s) times exp(sum b_i (ln n)^...): slower than any power")
    if r > s:
        return RatePrediction(f"{tag_r}>s", -1.0, None,
                              "faster than any power of ln n, slower than 1/n")
    if dim == 1:
        xi = (2 * delta * b + (s - 2 * g - 1 - rho1) * a) / ((a + b) * s)
        e = -a / (a + b)
    else:
        xi = (4 * delta * b + (2 * s - 4 * g - 2 - rho2) * a) / ((a + 2 * b) * s)
        e = -a / (a + 2 * b)
    return RatePrediction(f"{tag_r}=s", e, -xi, f"n^{e:.6g} (ln n)^{-xi:.6g}")


# ------------------------------------------------------------------- oracle

@dataclass
class OracleResult:
    m: int
    risk: float
    table: dict


def oracle_m_search(model, noise, n, dim=1):
    """argmin over admissible m of bias(m) + Delta(m)/n (Delta(m)^2/n in 2D)."""
    top = max_model(noise, n, square=(dim == 2))
    if top < 1:
        raise ValueError("no admissible model")
    bias = model.bias_f if dim == 1 else model.bias_F
    table = {}
    best = None
    for m in range(1, top + 1):
        var = delta_m(noise, m) ** dim / n
        if best is not None and var > table[best]:
            break
        table[m] = bias(m) + var
        if best is None or table[m] < table[best]:
            best = m
    return OracleResult(m=best, risk=table[best], table=table)


# -------------------------------------------------------------- calibration

KAPPA_GRID = tuple(2.0 ** k for k in range(-2, 6))


@dataclass
class Calibration:
    kappa: Optional[float]
    status: str
    grid: tuple
    stability: tuple
    selections: tuple


def _calibrate(contrasts, units, grid, threshold):
    """contrasts/units: per replicate dicts m -> value.  Returns the calibration."""
    models = sorted(contrasts[0])
    sel = [[min(models, key=lambda m: (c[m] + k * u[m], m)) for k in grid]
           for c, u in zip(contrasts, units)]
    sel = np.array(sel)
    stab = tuple(float(np.mean(np.all(sel[:, i:] == sel[:, i:i + 1], axis=1))) for i in range(len(grid)))
    if len(models) == 1:
        return Calibration(None, "unidentified", tuple(grid), stab, tuple(map(tuple, sel.T.tolist())))
    for k, frac in zip(grid, stab):
        if frac >= threshold:
            return Calibration(float(k), "ok", tuple(grid), stab, tuple(map(tuple, sel.T.tolist())))
    return Calibration(None, "unstable", tuple(grid), stab, tuple(map(tuple, sel.T.tolist())))


def calibrate_penalty(model, noise, n, replicates=20, base_seed=0, grid=KAPPA_GRID,
                      threshold=0.9, dim=1, threads=1):
    """Smallest kappa on the grid beyond which the selected model stops changing
    in at least ``threshold`` of the pilot replicates.

    Each model is fitted once per replicate; only the penalty weight varies.
    """
    unit = PenaltyConfig(1.0, 1.0)

    def pilot(rep):
        x = model.sample(n, base_seed, n, rep, 2)
        y = add_noise(x, noise, base_seed, n, rep, 2)
        if dim == 1:
            models = model_collection_1d(n, noise).models
            c = {m: fit_1d(y[:n], m, noise, n=n).contrast_value for m in models}
            u = {m: penalty_1d(m, noise, unit, n) for m in models}
        else:
            models = model_collection_2d(n, noise)
            pairs = consecutive_pairs(y)
            c = {m: fit_2d(pairs, m, noise, n=n).contrast_value for m in models}
            u = {m: penalty_2d(m, noise, unit, n) for m in models}
        return c, u

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(pilot, range(replicates)))
    else:
        out = [pilot(r) for r in range(replicates)]
    return _calibrate([c for c, _ in out], [u for _, u in out], tuple(grid), threshold)


# ------------------------------------------------------------------ summary

def summarize_study(records, model, noise, cfg, B):
    """Key-value summary: medians, fitted vs predicted rates, oracle and surrogate checks."""
    out = {"noise": noise.describe(), "chain": model.name,
           "B": f"[{B[0]:.17g}, {B[1]:.17g}]",
           "records": len(records), "failed": sum(r.failed for r in records)}
    for key in ("mise_f", "mise_F", "mise_pi"):
        for n, v in medians_by_n(records, key).items():
            out[f"median.{key}.n{n}"] = v
    for key in ("m_hat", "M_hat"):
        for n, v in medians_by_n(records, key).items():
            out[f"median.{key}.n{n}"] = v
    preds = {"mise_f": predict_rate(model.smoothness_f, noise, 1),
             "mise_F": predict_rate(model.smoothness_F, noise, 2),
             "mise_pi": predict_rate(model.smoothness_F, noise, 2)}
    for key, pred in preds.items():
        out[f"predicted.{key}.regime"] = pred.regime
        out[f"predicted.{key}.exponent"] = pred.exponent
        out[f"predicted.{key}.rate"] = pred.description
        try:
            fit = rate_fit(records, key)
            out[f"fitted.{key}.slope"] = fit.slope
            out[f"fitted.{key}.r2"] = fit.r2
            out[f"fitted.{key}.regime"] = fit.regime
        except ValueError as exc:
            out[f"fitted.{key}.slope"] = f"unavailable ({exc})"
    for n in sorted({r.n for r in records}):
        med = medians_by_n([r for r in records if r.n == n], "mise_f")[n]
        try:
            orc = oracle_m_search(model, noise, n)
        except ValueError:
            continue
        out[f"oracle.f.n{n}.m"] = orc.m
        out[f"oracle.f.n{n}.risk"] = orc.risk
        if med is not None:
            out[f"oracle.f.n{n}.flag"] = "violated" if orc.risk > 2 * med else "ok"
    floor = floor_from_model(model, B)
    out["surrogate.f0"] = floor.f0
    out["surrogate.pi_sup"] = floor.pi_sup
    for n in sorted({r.n for r in records}):
        sub = [r for r in records if r.n == n]
        m = {k: medians_by_n(sub, k)[n] for k in ("mise_f", "mise_F", "mise_pi")}
        if None in m.values():
            out[f"surrogate.n{n}"] = "unavailable"
            continue
        bound = surrogate_bound(m["mise_F"], m["mise_f"], floor)
        out[f"surrogate.n{n}.lhs"] = m["mise_pi"]
        out[f"surrogate.n{n}.bound"] = bound
        out[f"surrogate.n{n}.pass"] = bool(m["mise_pi"] <= bound)
    return out


def write_summary(path, summary):
    with open(path, "w") as fh:
        for k, v in summary.items():
            if isinstance(v, float):
                v = format(v, ".17g")
            fh.write(f"{k} = {v}\n")
