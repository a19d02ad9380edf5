"""SVG band diagrams (matplotlib, deterministic output)."""

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp so the SVG bytes only depend on the data
matplotlib.rcParams["svg.hashsalt"] = "iwatsuka"


def band_diagram(table, interval=None, title=None) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, row in enumerate(table.bands, 1):
        ax.plot(table.k_grid, row, lw=1.0, label=f"E_{j}")
    if interval is not None:
        ax.axhspan(interval[0], interval[1], color="tab:orange", alpha=0.25, lw=0)
    top = float(table.bands.max())
    ax.set_ylim(0.0, top * 1.05 if interval is None else max(top, interval[1]) * 1.05)
    ax.set_xlabel("k")
    ax.set_ylabel("E")
    if title:
        ax.set_title(title)
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
