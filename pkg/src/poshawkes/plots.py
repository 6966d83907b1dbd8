"""Optional SVG figures; matplotlib is imported only when a figure is requested."""

import numpy as np

from .background import identifiable

BAND_COLORS = {"protest": "#2ca02c", "team_a": "#1f77b4", "team_b": "#d62728"}


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        raise OSError("SVG output needs matplotlib (pip install 'artifact[plot]')") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    # fixed metadata keeps the SVG bytes reproducible
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def weights_svg(beta, path):
    plt = _pyplot()
    ident = identifiable(beta)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    names = list(ident)
    vals = [ident[k] for k in names]
    ax.barh(names, vals, color=["#999999" if v >= 0 else "#555555" for v in vals])
    ax.axvline(0.0, color="black", lw=0.8)
    ax.set_xlabel("coefficient (log-rate)")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def forecast_svg(cal, hour_starts, predicted, observed, path):
    plt = _pyplot()
    hour_starts = np.asarray(hour_starts, float)
    fig, ax = plt.subplots(figsize=(9, 3.5))
    days = (hour_starts - hour_starts[0]) / 86400.0 if hour_starts.size else hour_starts
    for k, t in enumerate(hour_starts):
        d = cal.local(t).date()
        for name, dates in (("protest", cal.protest_dates), ("team_a", cal.team_a_dates), ("team_b", cal.team_b_dates)):
            if d in dates:
                ax.axvspan(days[k], days[k] + 1 / 24, color=BAND_COLORS[name], alpha=0.12, lw=0)
    if observed is not None:
        ax.plot(days, observed, color="black", lw=0.8, label="observed")
    ax.plot(days, predicted, color="#ff7f0e", lw=1.2, label="predicted")
    ax.set_xlabel("days from horizon start")
    ax.set_ylabel("posts per hour")
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def folds_svg(results, path):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    for ax, metric in zip(axes, ("mae", "pearson")):
        data, labels = [], []
        for res in results:
            v = res._values(metric)
            if v.size:
                data.append(v)
                labels.append(res.model)
        if data:
            ax.violinplot(data, showmeans=True)
            ax.set_xticks(range(1, len(labels) + 1), labels)
        ax.set_title("MAE" if metric == "mae" else "Pearson r")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
