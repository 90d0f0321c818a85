"""Figure output: plain gnuplot scripts with inline data, and PNG renders
through matplotlib's Agg backend.
"""
import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps PNG bytes identical across reruns
PNG_META = {"Software": None}
LABELS = {"mise_f": "f", "mise_F": "F", "mise_pi": "Pi"}


def _g(x):
    return format(float(x), ".17g")


def mise_plot_script(path, medians):
    """gnuplot script of median MISE against n on log-log axes.

    ``medians`` maps a series key to {n: value}; series without values are skipped.
    """
    series = {k: {n: v for n, v in d.items() if v is not None} for k, d in medians.items()}
    series = {k: d for k, d in series.items() if d}
    lines = ["set logscale xy", "set xlabel 'n'", "set ylabel 'median MISE'", "set key top right"]
    for k, d in series.items():
        lines.append(f"${k} << EOD")
        lines.extend(f"{n} {_g(v)}" for n, v in sorted(d.items()))
        lines.append("EOD")
    if series:
        plots = ", ".join(f"${k} using 1:2 with linespoints title '{LABELS.get(k, k)}'" for k in series)
        lines.append("plot " + plots)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def render_mise_plot(path, medians):
    fig, ax = plt.subplots(figsize=(5, 4))
    for k, d in medians.items():
        pts = sorted((n, v) for n, v in d.items() if v is not None)
        if pts:
            ns, vs = zip(*pts)
            ax.loglog(ns, vs, "o-", label=LABELS.get(k, k))
    ax.set_xlabel("n")
    ax.set_ylabel("median MISE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)


def render_estimates(path, f_est, trans, points=201):
    """Density estimate on the data window and the transition surface on B x B."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 4))
    lo, hi = f_est.j_min / f_est.m, f_est.j_max / f_est.m
    xs = np.linspace(lo, hi, points)
    ax0.plot(xs, f_est(xs), label="estimate")
    ax0.plot(xs, f_est.clipped(xs), "--", label="clipped")
    ax0.set_xlabel("x")
    ax0.set_title(f"stationary density, m = {f_est.m}")
    ax0.legend()
    gx, gy, P = trans.grid(min(points, 101))
    im = ax1.imshow(P.T, origin="lower", extent=(gx[0], gx[-1], gy[0], gy[-1]), aspect="auto")
    ax1.set_xlabel("x")
    ax1.set_ylabel("y")
    ax1.set_title(f"transition density, M = {trans.F_est.m}")
    fig.colorbar(im, ax=ax1)
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)


def stability_plot_script(path, grid, curves):
    lines = ["set logscale x", "set xlabel 'kappa'", "set ylabel 'stable fraction'",
             "set yrange [0:1.05]"]
    for name, stab in curves.items():
        lines.append(f"${name} << EOD")
        lines.extend(f"{_g(k)} {_g(v)}" for k, v in zip(grid, stab))
        lines.append("EOD")
    lines.append("plot " + ", ".join(f"${name} using 1:2 with linespoints title '{name}'"
                                     for name in curves))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def render_stability(path, grid, curves):
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, stab in curves.items():
        ax.semilogx(grid, stab, "o-", label=name)
    ax.set_xlabel("kappa")
    ax.set_ylabel("stable fraction")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)
