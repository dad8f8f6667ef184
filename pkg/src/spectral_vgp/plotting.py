"""Optional PNG rendering of figure data (``figures --plot``)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {"figure.dpi": 110, "axes.spines.top": False, "axes.spines.right": False, "font.size": 9}


def _panel(ax, grid, f0, data, band, title):
    ax.scatter(data.x, data.y, s=2, color="0.7", rasterized=True)
    ax.fill_between(grid, band.lower, band.upper, color="tab:blue", alpha=0.25, linewidth=0)
    ax.plot(grid, band.mean, color="tab:blue", lw=1.2)
    ax.plot(grid, f0, color="k", lw=1.0)
    ax.set_title(title)
    ax.set_xlim(grid[0], grid[-1])


def plot_figures(out_dir, grid, f0, data, exact, bands):
    """One PNG per ``m`` (strategies side by side, exact posterior first)."""
    out_dir = Path(out_dir)
    strategies = list(dict.fromkeys(s for s, _ in bands))
    paths = []
    with plt.rc_context(STYLE):
        for m in sorted({m for _, m in bands}):
            fig, axes = plt.subplots(1, len(strategies) + 1, figsize=(3.2 * (len(strategies) + 1), 2.8), sharey=True)
            _panel(axes[0], grid, f0, data, exact, "exact")
            for ax, s in zip(axes[1:], strategies):
                _panel(ax, grid, f0, data, bands[(s, m)], f"{s}, m={m}")
            fig.tight_layout()
            path = out_dir / f"figures_m{m}.png"
            fig.savefig(path)
            plt.close(fig)
            paths.append(path)
    return paths
