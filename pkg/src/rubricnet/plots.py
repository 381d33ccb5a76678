"""Static SVG renderings of the analysis artifacts."""

from collections.abc import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .analysis import ContributionProfile, CorrelationTable, Dendrogram

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def render_correlation_svg(table: CorrelationTable, path) -> None:
    """Horizontal bar chart of per-feature correlation, strongest on top."""
    names = [name for name, _ in table.entries]
    taus = [tau for _, tau in table.entries]
    fig, ax = plt.subplots(figsize=(6, 0.4 * len(names) + 1.2))
    positions = range(len(names))[::-1]
    ax.barh(list(positions), taus, color=["#2b6cb0" if t >= 0 else "#c05621" for t in taus])
    ax.set_yticks(list(positions))
    ax.set_yticklabels(names)
    ax.set_xlabel("rank correlation with difficulty")
    ax.axvline(0.0, color="#444", linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_dendrogram_svg(dendrogram: Dendrogram, labels: Sequence[str], path) -> None:
    """Draw the merge tree with link height equal to the linkage distance."""
    order = dendrogram.leaf_order()
    x_of = {leaf: float(pos) for pos, leaf in enumerate(order)}
    height_of = {leaf: 0.0 for leaf in order}

    fig, ax = plt.subplots(figsize=(max(6, 0.7 * dendrogram.n_leaves), 4.5))
    next_id = dendrogram.n_leaves
    for a, b, dist in dendrogram.merges:
        xa, xb = x_of.pop(a), x_of.pop(b)
        ha, hb = height_of.pop(a), height_of.pop(b)
        ax.plot([xa, xa, xb, xb], [ha, dist, dist, hb], color="#2b6cb0", linewidth=1.2)
        x_of[next_id] = (xa + xb) / 2.0
        height_of[next_id] = dist
        next_id += 1
    ax.set_xticks(range(len(order)))
    ax.set_xticklabels([labels[i] for i in order], rotation=60, ha="right")
    ax.set_ylabel("average linkage distance")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_contributions_svg(
    profile: ContributionProfile, labels: Sequence[str], path
) -> None:
    """One line per descriptor: its grade-relative contribution across grades."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for column in range(profile.values.shape[1]):
        ax.plot(profile.grades, profile.values[:, column], marker="o", label=labels[column])
    ax.set_xlabel("grade")
    ax.set_ylabel("contribution relative to grade 1")
    ax.axhline(0.0, color="#444", linewidth=0.8)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
