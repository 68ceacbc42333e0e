"""Static vector-graphic summaries of study results.

All figures are SVG files rendered off-screen.  Output is deterministic:
creation timestamps are suppressed and element ids are salted with a fixed
string, so repeated runs of the same study produce byte-identical files.
"""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "samplab"

import numpy as np  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

ESTIMATOR_COLORS = {
    "HT": "#d95f02", "GREG1": "#7570b3", "GREG2": "#1b9e77",
    "HF-HT": "#d95f02", "HF-GREG1": "#7570b3", "HF-GREG2": "#1b9e77",
}


def _save(fig, path) -> str:
    fig.savefig(str(path), format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(path)


def _grid(frame, values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(frame.n_rows, frame.n_cols)


def _extent(frame):
    x0, y0 = frame.origin
    return (x0, x0 + frame.width, y0, y0 + frame.height)


def population_map(population, path) -> str:
    """Covariate and response surfaces of one population, three panels."""
    frame = population.frame
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4), constrained_layout=True)
    panels = [("x1", population.x1), ("x2", population.x2), ("y", population.y)]
    for ax, (name, values) in zip(axes, panels):
        im = ax.imshow(_grid(frame, values), origin="lower", extent=_extent(frame),
                       cmap="viridis")
        ax.set_title(name)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle(f"population {population.population_index} "
                 f"(esr = {population.esr:.3g})")
    return _save(fig, path)


def variance_panels(rows, title: str, path) -> str:
    """Empirical vs mean estimated variance across the ladder, per estimator.

    ``rows`` holds the moving-average rows of one (design, sample size);
    one panel per estimator compares the two smoothed variance series.
    """
    tags = sorted({r.estimator for r in rows})
    fig, axes = plt.subplots(1, max(len(tags), 1),
                             figsize=(3.6 * max(len(tags), 1), 3.4),
                             sharey=True, squeeze=False, constrained_layout=True)
    for ax, tag in zip(axes[0], tags):
        series = sorted((r for r in rows if r.estimator == tag),
                        key=lambda r: r.population_id)
        esr = [r.esr for r in series]
        ax.plot(esr, [r.empirical_variance_smooth for r in series],
                color="#333333", label="empirical")
        ax.plot(esr, [r.mean_estimated_variance_smooth for r in series],
                color=ESTIMATOR_COLORS.get(tag, "#1f77b4"), linestyle="--",
                label="mean estimated")
        ax.set_title(tag)
        ax.set_xlabel("esr")
    axes[0][0].set_ylabel("variance of the estimated mean")
    axes[0][0].legend(frameon=False, fontsize=8)
    fig.suptitle(title)
    return _save(fig, path)


def bias_panels(smoothed, path) -> str:
    """Smoothed percent bias across the ladder, one panel per design cell."""
    cells = sorted({(r.design, r.n) for r in smoothed})
    fig, axes = plt.subplots(1, max(len(cells), 1),
                             figsize=(4.6 * max(len(cells), 1), 3.6),
                             sharey=True, squeeze=False, constrained_layout=True)
    for ax, (design, n) in zip(axes[0], cells):
        rows = [r for r in smoothed if r.design == design and r.n == n]
        for tag in sorted({r.estimator for r in rows}):
            series = sorted((r for r in rows if r.estimator == tag),
                            key=lambda r: r.population_id)
            ax.plot([r.esr for r in series],
                    [r.percent_bias_smooth for r in series],
                    color=ESTIMATOR_COLORS.get(tag, "#1f77b4"), label=tag)
        ax.axhline(0.0, color="#999999", linewidth=0.8)
        ax.set_title(f"{design}, n = {n}")
        ax.set_xlabel("esr")
        ax.legend(frameon=False, fontsize=8)
    axes[0][0].set_ylabel("percent bias of the variance estimator")
    fig.suptitle("variance-estimator percent bias (smoothed)")
    return _save(fig, path)


def variogram_panel(entries, path, title="semivariogram") -> str:
    """Empirical points and fitted exponential curves, one panel.

    ``entries`` is a sequence of (label, EmpiricalVariogram, ExponentialFit);
    the fit may be None to plot points only.
    """
    fig, ax = plt.subplots(figsize=(5.2, 3.8), constrained_layout=True)
    palette = ["#d95f02", "#7570b3", "#1b9e77", "#e7298a"]
    for k, (label, vario, fit) in enumerate(entries):
        color = palette[k % len(palette)]
        ax.plot(vario.bin_centers, vario.gamma, "o", color=color, markersize=4,
                label=label)
        if fit is not None:
            d = np.linspace(0, float(vario.max_lag), 200)
            ax.plot(d, fit.predict(d), color=color, linewidth=1.2)
    ax.set_xlabel("lag distance")
    ax.set_ylabel("semivariance")
    ax.set_ylim(bottom=0)
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def stemmap_map(stemmap, raster, path, max_points: int = 20000) -> str:
    """Tree locations beside the covariate raster layers."""
    names = list(raster.layers)
    fig, axes = plt.subplots(1, 1 + len(names),
                             figsize=(3.2 * (1 + len(names)), 4.2),
                             constrained_layout=True)
    axes = np.atleast_1d(axes)
    step = max(1, stemmap.n_trees // max_points)
    axes[0].plot(stemmap.x[::step], stemmap.y[::step], ".", markersize=0.8,
                 color="#2d6a4f", alpha=0.6)
    axes[0].set_title(f"trees (n = {stemmap.n_trees})")
    axes[0].set_aspect("equal")
    for ax, name in zip(axes[1:], names):
        im = ax.imshow(_grid(raster.frame, raster.layers[name]), origin="lower",
                       extent=_extent(raster.frame), cmap="viridis")
        ax.set_title(name)
        fig.colorbar(im, ax=ax, shrink=0.75)
    return _save(fig, path)


def estimator_table(summaries, path) -> str:
    """Table-shaped figure of per-estimator study results."""
    headers = ["estimator", "mean estimate", "empirical var",
               "mean est. var", "percent bias"]
    rows = [[s.estimator, f"{s.mean_of_mu_hat:.4g}", f"{s.empirical_variance:.4g}",
             f"{s.mean_estimated_variance:.4g}", f"{s.percent_bias:.2f}"]
            for s in summaries]
    fig, ax = plt.subplots(figsize=(6.4, 0.5 + 0.42 * (len(rows) + 1)),
                           constrained_layout=True)
    ax.axis("off")
    table = ax.table(cellText=rows, colLabels=headers, loc="center",
                     cellLoc="center")
    table.scale(1.0, 1.4)
    ax.set_title("estimator performance", pad=10)
    return _save(fig, path)
