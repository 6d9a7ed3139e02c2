"""Figure rendering for aggregated convergence curves."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

X_LABELS = {"evals": "function evaluations", "wall": "wall time (ns)"}
Y_LABELS = {"norm_gap": "normalized gap", "grad": "hypergradient norm"}


def render_convergence(curves, x_axis: str, y_axis: str, out_path: str,
                       log_y: bool = True) -> str:
    """Mean curve per group with a +/- 1 std band; log-scale y by default.

    Returns the output path for convenience.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for curve in curves:
        line, = ax.plot(curve.x, curve.mean,
                        label=f"{curve.label} (n={curve.n_runs})")
        ax.fill_between(curve.x, curve.mean - curve.std, curve.mean + curve.std,
                        alpha=0.25, color=line.get_color(), linewidth=0)
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(X_LABELS.get(x_axis, x_axis))
    ax.set_ylabel(Y_LABELS.get(y_axis, y_axis))
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
