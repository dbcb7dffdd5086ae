"""Matrix figure: criteria x mechanisms, coloured by fixture agreement."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .scenarios import CRITERIA, MECHANISMS  # noqa: E402

STYLE = {
    "font.family": "sans-serif",
    "font.size": 8,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.dpi": 150,
}

# 0 = not run, 1 = mismatch, 2 = match
_CMAP = ListedColormap(["#d9d9d9", "#d7301f", "#41ab5d"])


def _wrap(text, width=34):
    words, lines, cur = text.split(), [], ""
    for w in words:
        if cur and len(cur) + 1 + len(w) > width:
            lines.append(cur)
            cur = w
        else:
            cur = f"{cur} {w}".strip()
    if cur:
        lines.append(cur)
    return "\n".join(lines[:3])


def render_matrix(matrix, path, title="Comparison matrix"):
    from .matrix import MECHANISM_TITLES

    grid = []
    for c in CRITERIA:
        row = []
        for m in MECHANISMS:
            r = matrix.cells.get((c, m))
            row.append(0 if r is None else (2 if r.matches_expected else 1))
        grid.append(row)

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(9, 7))
        ax.imshow(grid, cmap=_CMAP, vmin=0, vmax=2, aspect="auto")
        ax.set_xticks(range(len(MECHANISMS)), [MECHANISM_TITLES[m] for m in MECHANISMS])
        ax.set_yticks(range(len(CRITERIA)), CRITERIA)
        ax.xaxis.tick_top()
        for i, c in enumerate(CRITERIA):
            for j, m in enumerate(MECHANISMS):
                r = matrix.cells.get((c, m))
                if r is not None:
                    ax.text(j, i, _wrap(r.table_cell), ha="center", va="center", fontsize=6.5, color="white")
        ax.set_title(title, pad=24)
        for spine in ax.spines.values():
            spine.set_visible(False)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
