"""Experiment configuration, seeded runs and sweeps, CSV persistence.

Config files are flat ``key = value`` text: '#' starts a comment, lists are
whitespace-separated, groups inside a list are split by ';' (and by '|' for
per-cluster blocks). See the README for the full key reference.
"""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .algorithm import DivergenceError, RunMetrics, StepSizes, initialize, run
from .analysis import (
    HeterogeneityViolation,
    NotStronglyMonotone,
    certificate,
    compute_constants,
    plateau_bound,
    solve_ne,
)
from .game import build_connectivity_game, load_quadratic_game
from .network import CommGraph, ring_graph

CSV_COLUMNS = ("t", "err_gap", "consensus", "opt_gap", "tracking")


class ConfigError(Exception):
    def __init__(self, source, line, message):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}" if line else f"{source}: {message}")


class ExperimentDiverged(RuntimeError):
    def __init__(self, seed, iteration, paths):
        super().__init__(f"run with seed {seed} diverged at iteration {iteration}")
        self.seed = seed
        self.iteration = iteration
        self.paths = paths


class InsufficientData(ValueError):
    pass


@dataclass
class RunConfig:
    game_kind: str = "connectivity"
    n_clusters: int = 3
    n_per: int = 4
    dim: int = 2
    game_file: Optional[str] = None
    graph_kind: str = "ring"
    self_weight: float = 0.5
    matrices: dict = field(default_factory=dict)  # cluster index -> weight matrix
    mu: float = 1e-4
    alphas: tuple = (0.1, 0.08, 0.06)
    estimator: str = "local"
    iters: int = 2000
    seed: int = 1
    n_seeds: int = 20
    init_kind: str = "zeros"
    x0: Optional[np.ndarray] = None
    y0: Optional[list] = None
    out: Optional[str] = None
    log_positions: bool = False
    workers: int = 1
    plateau_frac: float = 0.1
    descent_threshold: float = 2.0
    sweep_axis: Optional[str] = None
    sweep_values: Optional[list] = None
    source: str = "<config>"
    lines: dict = field(default_factory=dict)

    def _line(self, key):
        return self.lines.get(key, 0)

    def build_game(self):
        if self.game_kind == "connectivity":
            try:
                return build_connectivity_game(self.n_clusters, self.n_per, self.dim)
            except ValueError as exc:
                raise ConfigError(self.source, self._line("game"), str(exc)) from exc
        if self.game_kind == "file":
            if not self.game_file:
                raise ConfigError(self.source, self._line("game"), "game = file needs game_file")
            try:
                return load_quadratic_game(self.game_file)
            except (OSError, ValueError) as exc:
                raise ConfigError(self.source, self._line("game_file"), str(exc)) from exc
        raise ConfigError(self.source, self._line("game"), f"unknown game kind {self.game_kind!r}")

    def build_graphs(self, game):
        graphs = []
        for i in range(game.n_clusters):
            try:
                if self.graph_kind == "ring":
                    graphs.append(ring_graph(game.sizes[i], self.self_weight, cluster=i))
                elif self.graph_kind == "explicit":
                    if i not in self.matrices:
                        raise ValueError(f"missing weight matrix A{i}")
                    graphs.append(CommGraph(self.matrices[i], cluster=i))
                else:
                    raise ValueError(f"unknown graph kind {self.graph_kind!r}")
            except ValueError as exc:
                raise ConfigError(self.source, self._line("graph"), str(exc)) from exc
        return graphs

    def build_steps(self, game):
        try:
            return StepSizes(self.alphas, game.sizes, game.dim)
        except ValueError as exc:
            raise ConfigError(self.source, self._line("alpha"), str(exc)) from exc

    def initial_state(self, game):
        if self.init_kind == "zeros":
            return None, None
        if self.init_kind == "explicit":
            if self.x0 is None:
                raise ConfigError(self.source, self._line("init"), "init = explicit needs x0")
            if len(self.x0) != game.coords:
                raise ConfigError(
                    self.source, self._line("x0"), f"x0 needs {game.coords} entries, got {len(self.x0)}"
                )
            x0 = np.asarray(self.x0, dtype=float)
            if self.y0 is not None:
                return x0, self.y0
            # default y0: every agent starts from its cluster's block of x0
            y0 = [
                np.tile(x0[game.cluster_slice(i)], (game.sizes[i], 1))
                for i in range(game.n_clusters)
            ]
            return x0, y0
        raise ConfigError(self.source, self._line("init"), f"unknown init kind {self.init_kind!r}")


@dataclass
class SweepConfig:
    base: RunConfig
    axis: str  # 'alpha_scale' | 'alpha_sets'
    values: list

    def settings(self):
        """(label, alphas) per sweep point; each must pass validation on build."""
        out = []
        if self.axis == "alpha_scale":
            for scale in self.values:
                alphas = tuple(scale * a for a in self.base.alphas)
                out.append((f"scale{scale:g}", alphas))
        else:
            for idx, alphas in enumerate(self.values):
                out.append((f"set{idx}", tuple(alphas)))
        return out


# -- config file parsing ------------------------------------------------------


def _parse_pairs(path):
    pairs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(path, lineno, f"expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in pairs:
                raise ConfigError(path, lineno, f"duplicate key {key!r}")
            pairs[key] = (value.strip(), lineno)
    return pairs


def _take(pairs, key, convert, default, path):
    if key not in pairs:
        return default, 0
    value, lineno = pairs.pop(key)
    try:
        return convert(value), lineno
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, lineno, f"bad value for {key!r}: {exc}") from exc


def _floats(text):
    return tuple(float(v) for v in text.split())


def _matrix(text):
    rows = [np.array(r.split(), dtype=float) for r in text.split(";") if r.strip()]
    mat = np.vstack(rows)
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix must be square, got shape {mat.shape}")
    return mat


def _bool(text):
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def load_config(path) -> RunConfig:
    pairs = _parse_pairs(path)
    lines = {k: ln for k, (_, ln) in pairs.items()}
    cfg = RunConfig(source=str(path), lines=lines)

    cfg.game_kind, _ = _take(pairs, "game", str, cfg.game_kind, path)
    cfg.n_clusters, _ = _take(pairs, "N", int, cfg.n_clusters, path)
    cfg.n_per, _ = _take(pairs, "n_per", int, cfg.n_per, path)
    cfg.dim, _ = _take(pairs, "d", int, cfg.dim, path)
    cfg.game_file, _ = _take(pairs, "game_file", str, None, path)
    cfg.graph_kind, _ = _take(pairs, "graph", str, cfg.graph_kind, path)
    cfg.self_weight, _ = _take(pairs, "self_weight", float, cfg.self_weight, path)
    cfg.mu, _ = _take(pairs, "mu", float, cfg.mu, path)
    cfg.alphas, _ = _take(pairs, "alpha", _floats, cfg.alphas, path)
    cfg.estimator, _ = _take(pairs, "estimator", str, cfg.estimator, path)
    cfg.iters, _ = _take(pairs, "T", int, cfg.iters, path)
    cfg.seed, _ = _take(pairs, "seed", int, cfg.seed, path)
    cfg.n_seeds, _ = _take(pairs, "seeds", int, cfg.n_seeds, path)
    cfg.init_kind, _ = _take(pairs, "init", str, cfg.init_kind, path)
    x0, _ = _take(pairs, "x0", _floats, None, path)
    cfg.x0 = None if x0 is None else np.array(x0)
    y0_text, _ = _take(pairs, "y0", str, None, path)
    if y0_text is not None:
        cfg.y0 = [_matrix_block(b) for b in y0_text.split("|")]
    cfg.out, _ = _take(pairs, "out", str, None, path)
    cfg.log_positions, _ = _take(pairs, "log_positions", _bool, False, path)
    cfg.workers, _ = _take(pairs, "workers", int, 1, path)
    cfg.plateau_frac, _ = _take(pairs, "plateau_frac", float, cfg.plateau_frac, path)
    cfg.descent_threshold, _ = _take(pairs, "descent_threshold", float, cfg.descent_threshold, path)

    for i in range(cfg.n_clusters):
        key = f"A{i}"
        if key in pairs:
            mat, _ = _take(pairs, key, _matrix, None, path)
            cfg.matrices[i] = mat

    scale, _ = _take(pairs, "alpha_scale", _floats, None, path)
    sets_text, sets_line = _take(pairs, "alpha_sets", str, None, path)
    if scale is not None:
        cfg.sweep_axis, cfg.sweep_values = "alpha_scale", list(scale)
    if sets_text is not None:
        if cfg.sweep_axis is not None:
            raise ConfigError(path, sets_line, "give only one of alpha_scale / alpha_sets")
        cfg.sweep_axis = "alpha_sets"
        cfg.sweep_values = [_floats(g) for g in sets_text.split(";") if g.strip()]

    if pairs:
        key, (_, lineno) = next(iter(pairs.items()))
        raise ConfigError(path, lineno, f"unknown key {key!r}")

    _validate(cfg)
    return cfg


def _matrix_block(text):
    rows = [np.array(r.split(), dtype=float) for r in text.split(";") if r.strip()]
    return np.vstack(rows)


def _validate(cfg):
    def bad(key, msg):
        raise ConfigError(cfg.source, cfg._line(key), msg)

    if cfg.mu <= 0:
        bad("mu", f"mu must be > 0, got {cfg.mu}")
    if cfg.iters < 0:
        bad("T", f"T must be >= 0, got {cfg.iters}")
    if cfg.n_seeds < 1:
        bad("seeds", f"seeds must be >= 1, got {cfg.n_seeds}")
    if cfg.seed < 0:
        bad("seed", f"seed must be >= 0, got {cfg.seed}")
    if cfg.workers < 1:
        bad("workers", f"workers must be >= 1, got {cfg.workers}")
    if cfg.estimator not in ("local", "global"):
        bad("estimator", f"estimator must be 'local' or 'global', got {cfg.estimator!r}")
    game = cfg.build_game()
    if len(cfg.alphas) != game.n_clusters:
        bad("alpha", f"alpha needs one entry per cluster ({game.n_clusters}), got {len(cfg.alphas)}")
    cfg.build_graphs(game)
    cfg.build_steps(game)
    cfg.initial_state(game)


def load_sweep_config(path) -> SweepConfig:
    cfg = load_config(path)
    if cfg.sweep_axis is None:
        raise ConfigError(path, 0, "sweep config needs alpha_scale or alpha_sets")
    sweep = SweepConfig(base=cfg, axis=cfg.sweep_axis, values=cfg.sweep_values)
    for label, alphas in sweep.settings():
        derived = replace(cfg, alphas=alphas)
        _validate(derived)
    return sweep


# -- CSV and metadata persistence ---------------------------------------------


def _atomic_write(path, text):
    path = str(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def position_columns(game):
    return [
        f"x{i}_{j}_{k}"
        for i in range(game.n_clusters)
        for j in range(game.sizes[i])
        for k in range(game.dim)
    ]


def write_metrics_csv(path, metrics: RunMetrics, pos_names=None):
    header = list(CSV_COLUMNS)
    table = [metrics.t, metrics.err_gap, metrics.consensus, metrics.opt_gap, metrics.tracking]
    if metrics.positions is not None:
        header += pos_names
        table += list(metrics.positions.T)
    lines = [",".join(header)]
    for r in range(len(metrics.t)):
        cells = [str(int(table[0][r]))] + [f"{col[r]:.17g}" for col in table[1:]]
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_metrics_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    return {name: data[:, idx] for idx, name in enumerate(header)}


def _metric_average(per_seed):
    avg = RunMetrics(
        t=per_seed[0].t.copy(),
        err_gap=np.mean([m.err_gap for m in per_seed], axis=0),
        consensus=np.mean([m.consensus for m in per_seed], axis=0),
        opt_gap=np.mean([m.opt_gap for m in per_seed], axis=0),
        tracking=np.mean([m.tracking for m in per_seed], axis=0),
    )
    if per_seed[0].positions is not None:
        avg.positions = np.mean([m.positions for m in per_seed], axis=0)
    return avg


def _certificate_lines(game, graphs, steps, mu):
    constants = compute_constants(game, graphs, mu)
    lines = [
        f"cert.n = {constants.n}",
        f"cert.size_sq = {constants.size_sq:.17g}",
        f"cert.size_cube = {constants.size_cube:.17g}",
        f"cert.lipschitz = {constants.lipschitz:.17g}",
        f"cert.monotone = {constants.monotone:.17g}",
        f"cert.grad_cap = {constants.grad_cap:.17g}",
        f"cert.sigma_max = {constants.sigma_max:.17g}",
        f"cert.mixing = {constants.mixing:.17g}",
        f"cert.alpha_max = {steps.alpha_max:.17g}",
        f"cert.alpha_bar = {steps.alpha_bar:.17g}",
        f"cert.eps_alpha = {steps.heterogeneity:.17g}",
    ]
    try:
        cert = certificate(constants, steps)
        lines += [
            f"cert.eps_bound = {cert.eps_bound:.17g}",
            f"cert.alpha_bound = {cert.alpha_bound:.17g}",
            f"cert.rho = {cert.spectral_radius:.17g}",
            f"cert.status = {'holds' if cert.holds else 'advisory'}",
        ]
    except HeterogeneityViolation:
        eps_bound = constants.monotone / (2.0 * np.sqrt(constants.n) * constants.lipschitz)
        lines += [
            f"cert.eps_bound = {eps_bound:.17g}",
            "cert.status = heterogeneity-violation",
        ]
    return lines


def _config_lines(cfg, game):
    lines = [
        f"config.game = {cfg.game_kind}",
        f"config.sizes = {' '.join(str(s) for s in game.sizes)}",
        f"config.dim = {game.dim}",
        f"config.graph = {cfg.graph_kind}",
        f"config.self_weight = {cfg.self_weight:.17g}",
        f"config.mu = {cfg.mu:.17g}",
        "config.alpha = " + " ".join(f"{a:.17g}" for a in cfg.alphas),
        f"config.estimator = {cfg.estimator}",
        f"config.T = {cfg.iters}",
        f"config.seed = {cfg.seed}",
        f"config.seeds = {cfg.n_seeds}",
        f"config.init = {cfg.init_kind}",
        f"config.log_positions = {str(cfg.log_positions).lower()}",
    ]
    if cfg.game_file:
        lines.insert(1, f"config.game_file = {cfg.game_file}")
    return lines


@dataclass
class ExperimentResult:
    config: RunConfig
    ne: np.ndarray
    seeds: list
    per_seed: list
    average: RunMetrics
    csv_paths: list
    avg_path: Optional[str]
    meta_path: Optional[str]


def _seed_task(cfg: RunConfig, seed: int):
    game = cfg.build_game()
    graphs = cfg.build_graphs(game)
    steps = cfg.build_steps(game)
    ne = solve_ne(game)
    x0, y0 = cfg.initial_state(game)
    state = initialize(
        game, graphs, steps, cfg.mu, x0=x0, y0=y0, seed=seed, estimator=cfg.estimator
    )
    try:
        metrics = run(state, cfg.iters, ne=ne, record_positions=cfg.log_positions)
    except DivergenceError as err:
        return seed, "diverged", err.metrics, err.iteration
    return seed, "ok", metrics, None


def run_experiment(cfg: RunConfig, write: bool = True) -> ExperimentResult:
    """Run every seed, write per-seed CSVs, the seed average, and metadata.

    Raises ExperimentDiverged after persisting the partial trajectory of the
    first diverging seed.
    """
    game = cfg.build_game()
    graphs = cfg.build_graphs(game)
    steps = cfg.build_steps(game)
    ne = solve_ne(game)
    seeds = [cfg.seed + k for k in range(cfg.n_seeds)]
    pos_names = position_columns(game) if cfg.log_positions else None

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_seed_task, [cfg] * len(seeds), seeds))
    else:
        outcomes = [_seed_task(cfg, s) for s in seeds]

    out = cfg.out
    per_seed, csv_paths = [], []
    for seed, status, metrics, iteration in outcomes:
        path = f"{out}_seed{seed}.csv" if write and out else None
        if path:
            write_metrics_csv(path, metrics, pos_names)
            csv_paths.append(path)
        if status == "diverged":
            if path:
                _atomic_write(
                    f"{out}_meta.txt",
                    "\n".join(_config_lines(cfg, game) + [f"diverged.seed = {seed}", f"diverged.iteration = {iteration}"]) + "\n",
                )
            raise ExperimentDiverged(seed, iteration, csv_paths)
        per_seed.append(metrics)

    average = _metric_average(per_seed)
    avg_path = meta_path = None
    if write and out:
        avg_path = f"{out}_avg.csv"
        write_metrics_csv(avg_path, average, pos_names)
        meta_path = f"{out}_meta.txt"
        meta = _config_lines(cfg, game)
        meta.append("x_star = " + " ".join(f"{v:.17g}" for v in ne))
        meta += _certificate_lines(game, graphs, steps, cfg.mu)
        _atomic_write(meta_path, "\n".join(meta) + "\n")
    return ExperimentResult(cfg, ne, seeds, per_seed, average, csv_paths, avg_path, meta_path)


class RateFit(NamedTuple):
    rate: float
    r_squared: float
    window: tuple


def fit_linear_rate(err_gap, window=None, plateau_frac=0.1, threshold=2.0) -> RateFit:
    """Least-squares slope of log(err_gap) over the descent window.

    Without an explicit window, the fit covers the segment before the
    trajectory first comes within `threshold` times its final plateau (the
    mean over the trailing `plateau_frac` of iterations).
    """
    err = np.asarray(err_gap, dtype=float)
    if window is None:
        tail = max(1, int(round(len(err) * plateau_frac)))
        plateau = float(err[-tail:].mean())
        below = np.nonzero(err <= threshold * plateau)[0]
        end = int(below[0]) if len(below) else len(err)
        window = (0, end)
    lo, hi = int(window[0]), int(window[1])
    if hi - lo < 10:
        raise InsufficientData(f"descent window [{lo}, {hi}) has fewer than 10 points")
    seg = err[lo:hi]
    if (seg <= 0).any():
        raise ValueError("err_gap must be positive inside the fit window")
    t = np.arange(lo, hi, dtype=float)
    logs = np.log(seg)
    coeffs = np.polyfit(t, logs, 1)
    fitted = np.polyval(coeffs, t)
    ss_res = float(((logs - fitted) ** 2).sum())
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(float(coeffs[0]), r2, (lo, hi))


def plateau_level(err_gap, plateau_frac=0.1) -> float:
    err = np.asarray(err_gap, dtype=float)
    tail = max(1, int(round(len(err) * plateau_frac)))
    return float(err[-tail:].mean())


@dataclass
class SweepResult:
    settings: list  # (label, alphas, eps_alpha, fit, plateau, ExperimentResult)
    summary_path: Optional[str]


def sweep_experiment(sweep: SweepConfig, write: bool = True) -> SweepResult:
    """Run each sweep setting and collect fitted rates and plateaus."""
    base = sweep.base
    results = []
    for label, alphas in sweep.settings():
        cfg = replace(
            base,
            alphas=alphas,
            out=f"{base.out}_{label}" if base.out else None,
            matrices=dict(base.matrices),
        )
        res = run_experiment(cfg, write=write)
        game = cfg.build_game()
        steps = cfg.build_steps(game)
        try:
            fit = fit_linear_rate(
                res.average.err_gap, plateau_frac=cfg.plateau_frac, threshold=cfg.descent_threshold
            )
        except InsufficientData:
            fit = RateFit(float("nan"), float("nan"), (0, 0))
        plateau = plateau_level(res.average.err_gap, cfg.plateau_frac)
        results.append((label, alphas, steps, fit, plateau, res))

    summary_path = None
    if write and base.out:
        lines = ["setting,alpha_max,eps_alpha,fit_rate,plateau"]
        for label, alphas, steps, fit, plateau, _ in results:
            lines.append(
                f"{label},{steps.alpha_max:.17g},{steps.heterogeneity:.17g},"
                f"{fit.rate:.17g},{plateau:.17g}"
            )
        summary_path = f"{base.out}_summary.csv"
        _atomic_write(summary_path, "\n".join(lines) + "\n")
    return SweepResult(results, summary_path)


def analyze_report(cfg: RunConfig):
    """Certificate report as (lines, exit_code): 0 holds, 1 advisory, 2 violated."""
    game = cfg.build_game()
    graphs = cfg.build_graphs(game)
    steps = cfg.build_steps(game)
    try:
        constants = compute_constants(game, graphs, cfg.mu)
    except NotStronglyMonotone as exc:
        return [f"error: {exc}"], 2
    lines = [
        f"n: {constants.n}",
        f"size_sq: {constants.size_sq:g}",
        f"size_cube: {constants.size_cube:g}",
        f"lipschitz: {constants.lipschitz:.6g}",
        f"monotone: {constants.monotone:.6g}",
        f"grad_cap: {constants.grad_cap:.6g}",
        f"sigma_max: {constants.sigma_max:.6g}",
        f"mixing: {constants.mixing:.6g}",
        f"mu: {constants.mu:g}",
        f"alpha: {' '.join(f'{a:g}' for a in steps.per_cluster)}",
        f"alpha_max: {steps.alpha_max:.6g}",
        f"alpha_bar: {steps.alpha_bar:.6g}",
        f"eps_alpha: {steps.heterogeneity:.6g}",
        f"eps_bound: {constants.monotone / (2 * np.sqrt(constants.n) * constants.lipschitz):.6g}",
        f"eps_ok: {steps.heterogeneity < constants.monotone / (2 * np.sqrt(constants.n) * constants.lipschitz)}",
    ]
    try:
        cert = certificate(constants, steps)
    except HeterogeneityViolation as exc:
        lines.append(f"certificate: heterogeneity-violation ({exc})")
        return lines, 2
    for idx, value in enumerate(cert.m, start=1):
        lines.append(f"m{idx}: {value:.6g}")
    lines += [
        f"alpha_1: {cert.alpha_caps[0]:.6g}",
        f"alpha_2: {cert.alpha_caps[1]:.6g}",
        f"alpha_3: {cert.alpha_caps[2]:.6g}",
        f"alpha_bound: {cert.alpha_bound:.6g}",
        f"alpha_ok: {cert.alpha_ok}",
        f"rho_M: {cert.spectral_radius:.6g}",
    ]
    if cert.spectral_radius < 1.0:
        bounds = plateau_bound(cert)
        lines += [
            f"plateau_consensus: {bounds[0]:.6g}",
            f"plateau_opt_gap: {bounds[1]:.6g}",
            f"plateau_tracking: {bounds[2]:.6g}",
        ]
    holds = cert.holds
    lines.append(f"certificate: {'holds' if holds else 'advisory'}")
    return lines, 0 if holds else 1
