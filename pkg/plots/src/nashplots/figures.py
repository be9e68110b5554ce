"""Render equilibrium-seeking experiment CSVs into figures.

Consumes the experiment CLI's outputs as plain files: trajectory CSVs with
columns t,err_gap,consensus,opt_gap,tracking (plus x{i}_{j}_{k} action
columns when runs log positions) and the key = value metadata sidecar.
Pure readers; input files are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class SchemaError(ValueError):
    """Input file does not match the experiment output schema."""


class UnsupportedDimension(ValueError):
    """Trajectory plots need two-dimensional agent actions."""


@dataclass(frozen=True)
class PlotJob:
    inputs: tuple
    kind: str  # 'errgap' | 'trajectories'
    out: str
    labels: Optional[tuple] = None
    meta: Optional[str] = None


def read_csv(path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise SchemaError(f"{path}: empty file")
        names = header.split(",")
        rows = [line.split(",") for line in fh if line.strip()]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    if any(len(r) != len(names) for r in rows):
        raise SchemaError(f"{path}: ragged rows")
    data = np.array(rows, dtype=float)
    return {name: data[:, idx] for idx, name in enumerate(names)}


def read_metadata(path):
    meta = {}
    with open(path) as fh:
        for line in fh:
            key, sep, value = line.partition("=")
            if sep:
                meta[key.strip()] = value.strip()
    return meta


def metadata_path_for(csv_path) -> Path:
    """Sidecar convention: <prefix>_seed<k>.csv / <prefix>_avg.csv -> <prefix>_meta.txt."""
    path = Path(csv_path)
    stem = path.name
    if "_" not in stem:
        raise SchemaError(f"{path}: cannot derive metadata path, pass it explicitly")
    prefix = stem[: stem.rfind("_")]
    return path.with_name(f"{prefix}_meta.txt")


def plot_errgap(csv_paths: Sequence, labels: Optional[Sequence[str]] = None, out=None):
    """Log-scale error-gap curves, one per CSV, legend from labels."""
    paths = [Path(p) for p in csv_paths]
    if not paths:
        raise SchemaError("need at least one CSV")
    if labels is None:
        labels = [p.stem for p in paths]
    if len(labels) != len(paths):
        raise SchemaError(f"{len(paths)} CSVs but {len(labels)} labels")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for path, label in zip(paths, labels):
        data = read_csv(path)
        if "t" not in data or "err_gap" not in data:
            raise SchemaError(f"{path}: missing t/err_gap columns")
        ax.semilogy(data["t"], data["err_gap"], label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("error gap")
    ax.legend()
    fig.tight_layout()
    if out:
        fig.savefig(out)
    return fig


def plot_trajectories(csv_path, meta_path=None, out=None):
    """Per-cluster 2-D agent traces with the equilibrium marked.

    Needs a run executed with position logging; cluster structure and the
    equilibrium point come from the metadata sidecar.
    """
    data = read_csv(csv_path)
    meta = read_metadata(meta_path if meta_path else metadata_path_for(csv_path))
    try:
        sizes = [int(s) for s in meta["config.sizes"].split()]
        dim = int(meta["config.dim"])
        x_star = np.array(meta["x_star"].split(), dtype=float)
    except KeyError as exc:
        raise SchemaError(f"metadata missing field {exc}") from exc
    if dim != 2:
        raise UnsupportedDimension(f"trajectory plots need dim = 2, got {dim}")
    if len(x_star) != sum(sizes) * dim:
        raise SchemaError("metadata sizes and equilibrium length disagree")
    for i, n_i in enumerate(sizes):
        for j in range(n_i):
            if f"x{i}_{j}_0" not in data or f"x{i}_{j}_1" not in data:
                raise SchemaError(
                    f"missing position columns for cluster {i} agent {j}; "
                    "run the experiment with --log-positions"
                )

    fig, axes = plt.subplots(1, len(sizes), figsize=(4.0 * len(sizes), 3.6), squeeze=False)
    offset = 0
    for i, n_i in enumerate(sizes):
        ax = axes[0][i]
        for j in range(n_i):
            px, py = data[f"x{i}_{j}_0"], data[f"x{i}_{j}_1"]
            (line,) = ax.plot(px, py, linewidth=0.9)
            ax.plot(px[0], py[0], marker="o", color=line.get_color(), markersize=4)
            ne = x_star[offset + j * dim : offset + (j + 1) * dim]
            ax.plot(ne[0], ne[1], marker="*", color="black", markersize=10)
        ax.set_title(f"network {i + 1}")
        ax.set_xlabel("first coordinate")
        if i == 0:
            ax.set_ylabel("second coordinate")
        offset += n_i * dim
    fig.tight_layout()
    if out:
        fig.savefig(out)
    return fig


def render(job: PlotJob):
    if job.kind == "errgap":
        return plot_errgap(job.inputs, job.labels, job.out)
    if job.kind == "trajectories":
        return plot_trajectories(job.inputs[0], meta_path=job.meta, out=job.out)
    raise ValueError(f"unknown figure kind {job.kind!r}")
