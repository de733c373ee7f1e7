"""Figure rendering for NMSE-vs-SNR result tables.

Renders one log-scale curve per (method, grid size) cell to an image file
next to the delimited output.  Import cost is deferred so the rest of the
package never pulls in matplotlib.
"""

from pathlib import Path

from .harness import ResultTable

_METHOD_STYLE = {
    "oracle-mmse": dict(color="black", marker="D"),
    "l21-cd": dict(color="tab:blue", marker="^"),
    "l21-direct": dict(color="tab:red", marker="s"),
    "ml": dict(color="tab:green", marker="o"),
}


def _label(method: str, grid_size: int) -> str:
    return method if grid_size == 0 else f"{method} G={grid_size}"


def render_nmse_figure(table: ResultTable, path, title: str | None = None) -> Path:
    """Plot aggregate NMSE against SNR and write the figure to ``path``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    aggregates = table.aggregates()
    if not aggregates:
        raise ValueError("result table holds no records to plot")

    series: dict = {}
    for agg in aggregates:
        series.setdefault((agg.method, agg.grid_size), []).append(
            (agg.snr_db, agg.mean_nmse)
        )

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    linestyles = ["-", "--", "-.", ":"]
    grid_order = sorted({key[1] for key in series})
    for (method, grid_size), points in sorted(series.items()):
        points.sort()
        snrs, values = zip(*points)
        style = dict(_METHOD_STYLE.get(method, {}))
        style["linestyle"] = linestyles[grid_order.index(grid_size) % len(linestyles)]
        ax.semilogy(snrs, values, label=_label(method, grid_size), **style)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("NMSE")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
