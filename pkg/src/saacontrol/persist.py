"""CSV tables, manifests and SVG figures written by solves and studies."""
import csv
import json
import platform

import numpy as np

RAW_HEADER = ["N", "rep", "obj_gap", "l1_dist", "ref_gap", "status"]
SUMMARY_HEADER = ["N", "mean_obj_gap", "se_obj_gap", "mean_l1", "se_l1", "mean_gap", "se_gap"]
RATES_HEADER = ["metric", "slope", "intercept", "r2"]
VALUES_HEADER = ["N", "rep", "saa_value"]
METRICS = ("obj_gap", "l1_dist", "ref_gap")


def fmt(x):
    return repr(float(x))


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_rows(path, header=None):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        if header is not None and head != header:
            raise ValueError(f"{path}: unexpected header {head}")
        return [dict(zip(head, row)) for row in r]


def write_control(path, mesh, u):
    c = mesh.centroids
    write_rows(
        path,
        ["cell", "x", "y", "value"],
        [[i, fmt(c[i, 0]), fmt(c[i, 1]), fmt(u[i])] for i in range(mesh.n_cells)],
    )


def read_control(path):
    return np.array([float(r["value"]) for r in read_rows(path)])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def versions():
    import scipy

    from . import __version__

    return {
        "saacontrol": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    # fixed salt so element ids, and hence the files, are reproducible
    matplotlib.rcParams["svg.hashsalt"] = "saacontrol"
    import matplotlib.pyplot as plt

    return plt


def plot_control(path, mesh, u, title=None):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    tpc = ax.tripcolor(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.cells, facecolors=u, cmap="coolwarm")
    fig.colorbar(tpc, ax=ax)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_rate(path, N, means, fit, label):
    plt = _pyplot()
    N = np.asarray(N, dtype=float)
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    ax.loglog(N, means, "o", label="empirical mean")
    if fit is not None:
        ax.loglog(N, np.exp(fit.intercept) * N**fit.slope, "-",
                  label=f"fit: slope {fit.slope:.2f} (r2 {fit.r_squared:.2f})")
    ax.set_xlabel("N")
    ax.set_ylabel(label)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
