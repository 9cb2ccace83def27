"""Figure rendering for report outputs.

Curves are rendered to files next to the delimited data; the matplotlib
import is deferred and forced onto the Agg backend so headless runs work.
"""

import math


def render_growth_curve(rows, path, bits=False, title=None):
    """Render a growth-rate sweep to an image file.

    rows: sequences (nu1, value, converged, iterations, solver) as emitted by
    the growth-rate command.  Non-converged points are marked separately.
    """
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    scale = 1.0 / math.log(2.0) if bits else 1.0
    xs_ok, ys_ok, xs_bad, ys_bad = [], [], [], []
    for nu1, value, converged, _its, _solver in rows:
        if not math.isfinite(value):
            continue
        if converged:
            xs_ok.append(nu1)
            ys_ok.append(value * scale)
        else:
            xs_bad.append(nu1)
            ys_bad.append(value * scale)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if xs_ok:
        ax.plot(xs_ok, ys_ok, ".", ms=4, color="tab:blue", label="iteration converged")
    if xs_bad:
        ax.plot(xs_bad, ys_bad, "x", ms=5, color="tab:red",
                label="iteration failed (dual value)")
    ax.axhline(0.0, color="gray", lw=0.6)
    ax.set_xlabel(r"$\nu(1)$")
    ax.set_ylabel("growth rate [{}]".format("bits" if bits else "nats"))
    if title:
        ax.set_title(title)
    if xs_ok or xs_bad:
        ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
