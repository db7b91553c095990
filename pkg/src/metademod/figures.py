"""Figure rendering for experiment reports.

Plots are written next to the CSVs they portray; the CSVs remain the
machine-readable contract.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SCHEME_STYLE = {
    "maml": dict(color="tab:red", marker="o"),
    "joint": dict(color="tab:blue", marker="s"),
    "fixed": dict(color="tab:green", marker="^"),
    "ideal": dict(color="black", marker="", linestyle="--"),
}


def render_ser_curves(aggregates, out_path, title=None):
    """Plot mean SER against the pilot budget P, one curve per scheme.

    `aggregates` holds (scheme, P, mean_ser, trials) tuples as produced by
    aggregate_rows.
    """
    by_scheme = {}
    for scheme, p, mean_ser, _n in aggregates:
        by_scheme.setdefault(scheme, []).append((p, mean_ser))

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for scheme, pts in by_scheme.items():
        pts.sort()
        ps = [p for p, _ in pts]
        sers = [max(s, 1e-12) for _, s in pts]
        ax.semilogy(ps, sers, label=scheme, **_SCHEME_STYLE.get(scheme, {}))
    ax.set_xlabel("number of target-device pilots P")
    ax.set_ylabel("symbol error rate")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_decision_grid(table, grid, out_path):
    """Render per-symbol probability maps of a decision-grid table.

    `table` is the (n_points, 2 + M) array from decision_grid, evaluated on
    `grid` in row-major (re, im) order.
    """
    n_classes = table.shape[1] - 2
    probs = table[:, 2:].reshape(grid.re_points, grid.im_points, n_classes)
    ncols = int(np.ceil(np.sqrt(n_classes)))
    nrows = int(np.ceil(n_classes / ncols))

    fig, axes = plt.subplots(nrows, ncols, figsize=(2.6 * ncols, 2.3 * nrows),
                             squeeze=False, sharex=True, sharey=True)
    extent = (*grid.re_range, *grid.im_range)
    img = None
    for s in range(nrows * ncols):
        ax = axes[s // ncols][s % ncols]
        if s >= n_classes:
            ax.axis("off")
            continue
        # transpose so re runs along x and im along y
        img = ax.imshow(probs[:, :, s].T, origin="lower", extent=extent,
                        vmin=0.0, vmax=1.0, aspect="auto", cmap="viridis")
        ax.set_title(f"p(s={s} | y)", fontsize=9)
    fig.supxlabel("Re y")
    fig.supylabel("Im y")
    fig.colorbar(img, ax=axes, shrink=0.85)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
