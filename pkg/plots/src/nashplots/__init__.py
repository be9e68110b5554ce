"""Figures for equilibrium-seeking experiment outputs."""

from .figures import (
    PlotJob,
    SchemaError,
    UnsupportedDimension,
    metadata_path_for,
    plot_errgap,
    plot_trajectories,
    read_csv,
    read_metadata,
    render,
)

__version__ = "0.1.0"
