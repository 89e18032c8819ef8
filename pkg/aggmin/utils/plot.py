from pathlib import Path

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import pandas as pd

THEME = {
    'bg': '#0E1117',
    'text': '#ECEFF4',
    'grid': '#2E3440',
    'lines': ['#1E88E5', '#FFC107', '#00C853', '#FF5252', '#9C27B0', '#00BCD4'],
}


def dark_theme_plt():
    plt.style.use('dark_background')
    plt.rcParams.update({
        'figure.facecolor': THEME['bg'],
        'axes.facecolor': THEME['bg'],
        'text.color': THEME['text'],
        'axes.labelcolor': THEME['text'],
        'xtick.color': THEME['text'],
        'ytick.color': THEME['text'],
        'grid.color': THEME['grid'],
        'grid.alpha': 0.3,
        'grid.linestyle': '--',
        'axes.grid': True,
        'axes.edgecolor': THEME['text'],
        'axes.linewidth': 1.2,
        'font.size': 11,
        'axes.titlesize': 13,
        'axes.labelsize': 10,
        'legend.fontsize': 9,
        # identical inputs give identical files
        'svg.hashsalt': 'aggmin',
    })


def line_chart(
    series: dict[str, pd.DataFrame],
    x: str,
    y: str,
    path: str | Path,
    title: str = '',
    logx: bool = False,
    logy: bool = False,
    comments: list[str] | None = None,
) -> None:
    """One line per labelled frame, saved as a static SVG; comments go into its description."""
    dark_theme_plt()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (label, df), color in zip(series.items(), THEME['lines'] * len(series)):
        ax.plot(df[x], df[y], color=color, linewidth=1.2, marker='o', markersize=3, label=label)
    ax.set_xscale('log' if logx else 'linear')
    ax.set_yscale('log' if logy else 'linear')
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format='svg', metadata={'Date': None, 'Description': '; '.join(comments) if comments else None})
    plt.close(fig)
