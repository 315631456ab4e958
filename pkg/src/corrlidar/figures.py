"""Figure rendering for the CLI report path.

Every function takes computed results plus an output path, saves one
PNG, and returns the path. Rendering is headless (Agg); nothing here
feeds back into the numerics.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm

_DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_correlation_figure(curves, path, title="Normalized correlation"):
    """Overlay analytic and empirical correlation curves.

    Curves with standard errors render as error bars, the rest as
    lines; the x axis is the phase difference when available, else the
    sweep pixel index.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in curves:
        x = curve.delta if curve.pixels2 is None else curve.pixels2
        label = f"N={curve.n_sources}, m={curve.order} ({curve.kind})"
        if curve.std_errors is not None:
            ax.errorbar(x, curve.values, yerr=3 * curve.std_errors, fmt="o",
                        markersize=3, capsize=2, label=label + r", 3$\sigma$")
        else:
            ax.plot(x, curve.values, label=label)
    ax.set_xlabel("phase difference (rad)" if curves and curves[0].pixels2 is None
                  else "sweep pixel")
    ax.set_ylabel("normalized correlation")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def save_grid_figure(grid, path, title="Reduced Fisher information"):
    """Heatmap of reduced Fisher values on a log color scale."""
    fig, ax = plt.subplots(figsize=(6, 5))
    extent = [grid.m_values[0] - 0.5, grid.m_values[-1] + 0.5,
              grid.n_values[0] - 0.5, grid.n_values[-1] + 0.5]
    image = ax.imshow(grid.reduced, origin="lower", extent=extent,
                      aspect="auto", norm=LogNorm())
    fig.colorbar(image, ax=ax, label="reduced value")
    n_min, m_min = grid.min_location()
    ax.scatter([m_min], [n_min], marker="s", s=80, facecolors="none",
               edgecolors="lime", label=f"minimum ({n_min}, {m_min})")
    ax.set_xlabel("correlation order")
    ax.set_ylabel("number of sources")
    ax.set_title(f"{title} ({grid.method})")
    ax.legend(loc="upper left", fontsize=8)
    return _finish(fig, path)


def save_relative_difference_figure(numeric_grid, approx_grid, path):
    """Heatmap of (numeric - approx) / numeric over a shared grid."""
    rel = (numeric_grid.reduced - approx_grid.reduced) / numeric_grid.reduced
    fig, ax = plt.subplots(figsize=(6, 5))
    extent = [numeric_grid.m_values[0] - 0.5, numeric_grid.m_values[-1] + 0.5,
              numeric_grid.n_values[0] - 0.5, numeric_grid.n_values[-1] + 0.5]
    image = ax.imshow(100 * rel, origin="lower", extent=extent, aspect="auto",
                      cmap="magma")
    fig.colorbar(image, ax=ax, label="relative difference (%)")
    ax.set_xlabel("correlation order")
    ax.set_ylabel("number of sources")
    ax.set_title(f"{numeric_grid.method} vs {approx_grid.method}")
    return _finish(fig, path)


def save_fit_figure(pipeline, path):
    """Coefficients against source count with their fitted power laws."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    n = np.array([f.n_sources for f in pipeline.per_n], dtype=float)
    dense = np.linspace(n.min(), n.max(), 200)
    for name, marker in (("a", "o"), ("b", "s"), ("c", "^")):
        values = np.array([getattr(f, name) for f in pipeline.per_n])
        law = pipeline.power_laws[name]
        color = ax.loglog(n, values, marker, markersize=4,
                          label=f"{name}(N), p={law.p:.3f}, e={law.e:.3f}")[0].get_color()
        ax.loglog(dense, law(dense), "-", color=color, alpha=0.6)
    ax.set_xlabel("number of sources")
    ax.set_ylabel("coefficient value")
    ax.set_title("Fisher-scaling fit coefficients")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def save_estimate_figure(counts, geom, estimate, path):
    """Middle-row counts against the fitted mean curve."""
    from .correlation import normalized_correlation
    from .geometry import spatial_frequency

    row = counts.n_pixels // 2
    n2 = np.arange(1, counts.n_pixels + 1, dtype=float)
    omega1 = spatial_frequency(geom.plane1, geom.source)
    kappa = (2 * np.pi * geom.source.spacing * geom.plane2.pixel_pitch
             / geom.source.wavelength)
    delta = omega1 * (row + 1) - (kappa / estimate.z2_hat) * n2
    model = estimate.scale_hat * normalized_correlation(
        geom.source.n_sources, geom.order, delta)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(n2, counts.counts[row], ".", markersize=3, label=f"counts, row {row + 1}")
    ax.plot(n2, model, "-", label=f"fit, distance {estimate.z2_hat:.6g} m")
    ax.set_xlabel("sweep pixel")
    ax.set_ylabel("counts")
    ax.set_title("Count map fit (single row shown)")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def save_campaign_figure(report, path):
    """Histogram of estimates with the truth and the variance floor."""
    good = report.z2_hats[report.converged]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(good, bins=30, alpha=0.75, label=f"{good.size} estimates")
    ax.axvline(report.true_distance, color="k", linestyle="--", label="truth")
    sigma = np.sqrt(report.crb)
    ax.axvspan(report.true_distance - sigma, report.true_distance + sigma,
               color="tab:orange", alpha=0.25,
               label=r"$\pm\sqrt{\mathrm{CRB}}$")
    ax.set_xlabel("estimated distance (m)")
    ax.set_ylabel("trials")
    ax.set_title(f"Campaign: efficiency {report.efficiency:.3f}, "
                 f"bias {report.bias:.3g} m")
    ax.legend(fontsize=8)
    return _finish(fig, path)
