"""Config-driven experiment runner with reproducible CSV/JSON outputs.

Configs are flat dotted key=value text (diff-able, echoed back fully
defaulted).  Experiment tables use a fixed CSV header; reruns of the same
(config, seed) are byte-identical regardless of the thread count because
all per-row randomness is derived up front and rows are serialized in a
fixed order.  Wall-clock timings therefore go to the JSON summary; the
``runtime_ms`` CSV column stays 0 unless ``record_runtime`` is opted in.
"""

import hashlib
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from importlib import resources
from time import perf_counter

import numpy as np

from .diagnostics import (
    EmptyLocalizationError,
    RatioQuery,
    erm_estimator,
    gaussian_shift_bound,
    ratio_sup_estimate,
    two_point_minimax_demo,
)
from .erm import ErmConfig, erm_linear, erm_maxnorm_factorized, excess_risk
from .fixed_points import FixedPointQuery, predicted_rate, solve_fixed_point
from .geometry import ConvexBody
from .rng import derive_rng, derive_seed_sequence
from .sim import DesignSpec, NoiseSpec, sample_dataset
from .widths import gaussian_width_mc

CSV_HEADER = ("config_id,cell,trial,seed,N,d,p,q,sigma,excess_risk,"
              "predicted_rate,regime,s_star,r_star,iso_holds,runtime_ms")

MODES = ("erm", "ratio", "two_point", "shift", "width")
T_STAR_RULES = ("sparse4", "sparse16", "dense", "zero", "rank1_signs")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str = ""
    mode: str = "erm"
    body_kind: str = "l1_ball"
    body_dim: int = 64
    body_p: int = 0
    body_q: int = 0
    body_radius: float = 1.0
    design_kind: str = "gaussian"
    noise_kind: str = "gaussian_noise"
    grid_N: tuple = (64,)
    grid_sigma: tuple = (1.0,)
    trials: int = 20
    seed: int = 1
    t_star_rule: str = "sparse4"
    c1: float = 1.0
    c3: float = 1.0
    Q: float = 1.0
    kG: float = 1.783
    fp_trials: int = 400
    iso_enabled: bool = True
    iso_candidates: int = 16
    iso_ascent: int = 40
    solver_max_iter: int = 50_000
    solver_tol: float = 1e-8
    solver_restarts: int = 8
    record_runtime: bool = False
    lambda_scales: tuple = (1.0,)
    deltas: tuple = (0.5, 0.1, 0.02)
    width_points: int = 12
    demo_seeds: int = 20
    shift_draws: int = 100_000

    _KEYMAP = {
        "preset": "preset", "mode": "mode",
        "body.kind": "body_kind", "body.dim": "body_dim", "body.p": "body_p",
        "body.q": "body_q", "body.radius": "body_radius",
        "design.kind": "design_kind", "noise.kind": "noise_kind",
        "grid.N": "grid_N", "grid.sigma": "grid_sigma",
        "trials": "trials", "seed": "seed", "t_star.rule": "t_star_rule",
        "constants.c1": "c1", "constants.c3": "c3", "constants.Q": "Q",
        "constants.kG": "kG", "fp.trials": "fp_trials",
        "iso.enabled": "iso_enabled", "iso.candidates": "iso_candidates",
        "iso.ascent": "iso_ascent", "solver.max_iter": "solver_max_iter",
        "solver.tol": "solver_tol", "solver.restarts": "solver_restarts",
        "record_runtime": "record_runtime", "ratio.lambda_scales": "lambda_scales",
        "demo.deltas": "deltas", "width.points": "width_points",
        "demo.seeds": "demo_seeds", "shift.draws": "shift_draws",
    }

    def __post_init__(self):
        self.validate()

    def validate(self):
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode: unknown mode {self.mode!r}")
        if self.body_kind == "maxnorm_ball" and not (self.body_p and self.body_q):
            problems.append("body.p/body.q: required for maxnorm_ball")
        if not self.grid_N or any(n < 1 for n in self.grid_N):
            problems.append("grid.N: must be a nonempty list of N >= 1")
        if not self.grid_sigma or any(s < 0 for s in self.grid_sigma):
            problems.append("grid.sigma: must be nonempty, entries >= 0")
        if self.trials < 1:
            problems.append("trials: must be >= 1")
        if self.t_star_rule not in T_STAR_RULES:
            problems.append(f"t_star.rule: unknown rule {self.t_star_rule!r}")
        if self.body_radius <= 0:
            problems.append("body.radius: must be positive")
        if problems:
            raise ConfigError("; ".join(problems))

    def body(self) -> ConvexBody:
        if self.body_kind == "maxnorm_ball":
            return ConvexBody("maxnorm_ball", (self.body_p, self.body_q),
                              self.body_radius, self.kG)
        return ConvexBody(self.body_kind, self.body_dim, self.body_radius,
                          self.kG)

    def design(self) -> DesignSpec:
        if self.design_kind == "matrix_iid":
            return DesignSpec("matrix_iid", p=self.body_p, q=self.body_q)
        return DesignSpec(self.design_kind, d=self.body_dim)

    def t_star(self) -> np.ndarray:
        if self.t_star_rule == "zero":
            return np.zeros(self.body().ambient_dim)
        if self.t_star_rule in ("sparse4", "sparse16", "dense"):
            d = self.body_dim
            k = {"sparse4": 4, "sparse16": 16, "dense": d}[self.t_star_rule]
            k = min(k, d)
            t = np.zeros(d)
            t[:k] = self.body_radius / k     # boundary point of the l1 ball
            return t
        p, q = self.body_p, self.body_q
        u = np.array([(-1.0) ** i for i in range(p)])
        v = np.array([(-1.0) ** j for j in range(q)])
        return self.body_radius * np.outer(u, v).reshape(-1)

    @classmethod
    def from_mapping(cls, mapping) -> "ExperimentConfig":
        kwargs = {}
        unknown = [k for k in mapping if k not in cls._KEYMAP]
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in mapping.items():
            name = cls._KEYMAP[key]
            kwargs[name] = _coerce(name, raw, types[name])
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_config_text(text))

    def to_text(self) -> str:
        """Fully-defaulted echo in the flat dotted format (stable key order)."""
        inv = {v: k for k, v in self._KEYMAP.items()}
        lines = []
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                rendered = ",".join(_fmt(v) for v in val)
            elif isinstance(val, bool):
                rendered = "true" if val else "false"
            else:
                rendered = _fmt(val)
            lines.append(f"{inv[f.name]} = {rendered}")
        return "\n".join(lines) + "\n"

    def config_id(self) -> str:
        if self.preset:
            return self.preset
        return hashlib.sha1(self.to_text().encode()).hexdigest()[:12]


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _coerce(name, raw, ftype):
    if isinstance(raw, (tuple, list)):
        return tuple(raw)
    s = str(raw).strip()
    if ftype == tuple:
        parts = [p.strip() for p in s.split(",") if p.strip()]
        out = []
        for p in parts:
            out.append(float(p) if ("." in p or "e" in p or "E" in p) else int(p))
        return tuple(out)
    if ftype == bool:
        if s.lower() in ("true", "1", "yes", "on"):
            return True
        if s.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected boolean, got {raw!r}")
    if ftype == int:
        return int(s)
    if ftype == float:
        return float(s)
    return s


def parse_config_text(text: str) -> dict:
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = stripped.partition("=")
        mapping[key.strip()] = val.strip()
    return mapping


@dataclass(frozen=True)
class ResultRow:
    config_id: str
    cell: int
    trial: int
    seed: int
    N: int
    d: int
    p: int
    q: int
    sigma: float
    excess_risk: float
    predicted_rate: float
    regime: str
    s_star: float
    r_star: float
    iso_holds: object      # True / False / None (not evaluated)
    runtime_ms: float

    def to_csv(self, record_runtime: bool) -> str:
        iso = "" if self.iso_holds is None else ("1" if self.iso_holds else "0")
        rt = _fmt(self.runtime_ms) if record_runtime else "0"
        p = "" if self.p == 0 else str(self.p)
        q = "" if self.q == 0 else str(self.q)
        return ",".join([
            self.config_id, str(self.cell), str(self.trial), str(self.seed),
            str(self.N), str(self.d), p, q, _fmt(self.sigma),
            _fmt(self.excess_risk), _fmt(self.predicted_rate), self.regime,
            _fmt(self.s_star), _fmt(self.r_star), iso, rt,
        ])


def _row_seed(master, *tags) -> int:
    return int(derive_seed_sequence(master, *tags).generate_state(1, np.uint64)[0]
               & ((1 << 62) - 1))


# ---------------------------------------------------------------------------
# presets


def presets() -> dict:
    """The seven named experiment configurations."""
    out = {}
    out["b1_rates"] = ExperimentConfig(
        preset="b1_rates", mode="erm", body_kind="l1_ball", body_dim=64,
        design_kind="gaussian", noise_kind="gaussian_noise",
        grid_N=(32, 64, 128, 256, 512, 1024), grid_sigma=(1.0,), trials=200,
        seed=1, t_star_rule="sparse16",
    )
    out["b1_low_noise"] = ExperimentConfig(
        preset="b1_low_noise", mode="erm", body_kind="l1_ball", body_dim=64,
        design_kind="gaussian", noise_kind="gaussian_noise",
        grid_N=(4, 8, 16, 32), grid_sigma=(0.0,), trials=20, seed=2,
        t_star_rule="sparse4", iso_enabled=False, solver_tol=1e-9,
        solver_max_iter=1_000_000,
    )
    out["maxnorm_rates"] = ExperimentConfig(
        preset="maxnorm_rates", mode="erm", body_kind="maxnorm_ball",
        body_p=6, body_q=6, design_kind="matrix_iid",
        noise_kind="gaussian_noise", grid_N=(64, 128, 256), grid_sigma=(1.0,),
        trials=50, seed=3, t_star_rule="rank1_signs", iso_enabled=False,
    )
    out["ratio_lower"] = ExperimentConfig(
        preset="ratio_lower", mode="ratio", body_kind="l1_ball", body_dim=32,
        design_kind="gaussian", noise_kind="orthogonal_target",
        grid_N=(64,), grid_sigma=(1.0,), trials=50, seed=4, t_star_rule="zero",
        lambda_scales=(0.5, 1.0, 2.0), iso_candidates=64, iso_ascent=60,
    )
    out["two_point_demo"] = ExperimentConfig(
        preset="two_point_demo", mode="two_point", body_kind="l1_ball",
        body_dim=8, design_kind="gaussian", noise_kind="gaussian_noise",
        grid_N=(4,), grid_sigma=(1.0,), trials=1, seed=5, t_star_rule="zero",
        demo_seeds=20,
    )
    out["shift_bound_check"] = ExperimentConfig(
        preset="shift_bound_check", mode="shift", grid_N=(1,),
        grid_sigma=(1.0,), trials=1, seed=6, t_star_rule="zero",
    )
    out["width_profile"] = ExperimentConfig(
        preset="width_profile", mode="width", body_kind="l1_ball",
        body_dim=256, grid_N=(1,), grid_sigma=(1.0,), trials=400, seed=7,
        t_star_rule="zero", width_points=12,
    )
    return out


# ---------------------------------------------------------------------------
# runner


def _solve_row(config, body, data, row_seed):
    if body.kind == "maxnorm_ball":
        cfg = ErmConfig(restarts=config.solver_restarts)
        return erm_maxnorm_factorized(body.dim[0], body.dim[1], data,
                                      cfg=cfg, radius=body.radius,
                                      seed=row_seed)
    cfg = ErmConfig(max_iter=config.solver_max_iter, tol=config.solver_tol)
    return erm_linear(body, data, cfg)


def _erm_cell_rows(config, cell_index, N, sigma, cid):
    body = config.body()
    design = config.design()
    t_star = config.t_star()
    pred = predicted_rate(body, N, sigma,
                          constants={"c1": config.c1, "c3": config.c3,
                                     "Q": config.Q},
                          trials=config.fp_trials, seed=config.seed)
    noise = NoiseSpec(config.noise_kind, sigma=sigma)
    s_sq = pred.s_star**2 if np.isfinite(pred.s_star) else 0.0

    def one_trial(trial):
        row_seed = _row_seed(config.seed, "cell", cell_index, "trial", trial)
        tic = perf_counter()
        iso_holds = None
        try:
            data = sample_dataset(design, noise,
                                  None if config.noise_kind == "orthogonal_target"
                                  else t_star, N, seed=row_seed)
            sol = _solve_row(config, body, data, row_seed)
            excess = excess_risk(sol, data)
            if config.iso_enabled and body.kind != "maxnorm_ball" and s_sq > 0:
                try:
                    worst = ratio_sup_estimate(
                        RatioQuery(lam=s_sq, m=config.iso_candidates,
                                   ascent_steps=config.iso_ascent, body=body),
                        data, seed=row_seed)
                    iso_holds = worst <= 0.5
                except EmptyLocalizationError:
                    iso_holds = None
            regime = pred.regime
            err = None
        except Exception as exc:  # recorded per-row, never aborts the table
            excess, regime, err = float("nan"), "error", repr(exc)
        ms = (perf_counter() - tic) * 1e3
        p, q = (body.dim if body.kind == "maxnorm_ball" else (0, 0))
        row = ResultRow(
            config_id=cid, cell=cell_index, trial=trial, seed=row_seed, N=N,
            d=body.ambient_dim, p=p, q=q, sigma=sigma, excess_risk=excess,
            predicted_rate=pred.rate, regime=regime,
            s_star=pred.s_star if np.isfinite(pred.s_star) else 0.0,
            r_star=pred.r_star, iso_holds=iso_holds, runtime_ms=ms,
        )
        return row, err

    return one_trial


def run_experiment(config: ExperimentConfig, out_dir: str = None,
                   threads: int = 1):
    """Run the configured experiment; returns (rows, summary).

    When ``out_dir`` is given, writes ``rows.csv`` (fixed header),
    ``summary.json`` and the fully-defaulted ``config.echo`` there.
    """
    config.validate()
    tic = perf_counter()
    cid = config.config_id()
    if config.mode == "erm":
        rows, failures = _run_erm(config, cid, threads)
        summary = _summarize_erm(config, rows, failures)
    elif config.mode == "ratio":
        rows, summary = _run_ratio(config, cid)
    elif config.mode == "two_point":
        rows, summary = _run_two_point(config, cid)
    elif config.mode == "shift":
        rows, summary = _run_shift(config, cid)
    else:
        rows, summary = _run_width(config, cid)
    summary["config_id"] = cid
    summary["mode"] = config.mode
    summary["wall_seconds"] = perf_counter() - tic
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.echo"), "w") as fh:
            fh.write(config.to_text())
        _write_rows(os.path.join(out_dir, "rows.csv"), config, rows)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return rows, summary


def _run_erm(config, cid, threads):
    cells = list(itertools.product(config.grid_N, config.grid_sigma))
    tasks = []
    for ci, (N, sigma) in enumerate(cells):
        trial_fn = _erm_cell_rows(config, ci, int(N), float(sigma), cid)
        for t in range(config.trials):
            tasks.append((trial_fn, t))
    results = [None] * len(tasks)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {pool.submit(fn, t): i for i, (fn, t) in enumerate(tasks)}
            for fut, i in futs.items():
                results[i] = fut.result()
    else:
        for i, (fn, t) in enumerate(tasks):
            results[i] = fn(t)
    rows = [r for r, _ in results]
    failures = [e for _, e in results if e is not None]
    return rows, failures


def _summarize_erm(config, rows, failures):
    cells = {}
    for row in rows:
        cell = cells.setdefault(row.cell, {"N": row.N, "sigma": row.sigma,
                                           "excess": [], "iso": []})
        if np.isfinite(row.excess_risk):
            cell["excess"].append(row.excess_risk)
        if row.iso_holds is not None:
            cell["iso"].append(bool(row.iso_holds))
    table = []
    for ci in sorted(cells):
        c = cells[ci]
        med = float(np.median(c["excess"])) if c["excess"] else float("nan")
        iso_freq = float(np.mean(c["iso"])) if c["iso"] else None
        pred = next(r.predicted_rate for r in rows if r.cell == ci)
        table.append({"cell": ci, "N": c["N"], "sigma": c["sigma"],
                      "median_excess": med, "predicted_rate": pred,
                      "iso_frequency": iso_freq,
                      "n_ok": len(c["excess"])})
    return {"cells": table, "failures": failures,
            "n_rows": len(rows), "n_failures": len(failures)}


def _run_ratio(config, cid):
    body = config.body()
    design = config.design()
    noise = NoiseSpec(config.noise_kind, sigma=config.grid_sigma[0])
    N = int(config.grid_N[0])
    eta = config.c1 / max(config.grid_sigma[0], 1e-12)
    s_res = solve_fixed_point(body, FixedPointQuery("s_star", N=N, eta=eta),
                              trials=config.fp_trials, seed=config.seed)
    lam0 = s_res.value**2
    rows = []
    means = []
    failures = []
    for scale in config.lambda_scales:
        lam = lam0 * float(scale)
        vals = []
        for trial in range(config.trials):
            row_seed = _row_seed(config.seed, "ratio", scale, trial)
            try:
                data = sample_dataset(design, noise, None, N, seed=row_seed)
                val = ratio_sup_estimate(
                    RatioQuery(lam=lam, m=config.iso_candidates,
                               ascent_steps=config.iso_ascent, body=body),
                    data, seed=row_seed)
            except Exception as exc:
                failures.append(repr(exc))
                val = float("nan")
            else:
                vals.append(val)
            rows.append({"lambda": lam, "lambda_scale": float(scale),
                         "trial": trial, "seed": row_seed, "ratio_sup": val,
                         "iso_holds": bool(val <= 0.5)})
        means.append({
            "lambda": lam, "lambda_scale": float(scale),
            "mean_ratio_sup": float(np.mean(vals)) if vals else float("nan"),
            "frac_iso_fails": float(np.mean([v > 0.5 for v in vals]))
            if vals else float("nan"),
        })
    summary = {"s_star": s_res.value, "lambda0": lam0, "eta": eta,
               "levels": means, "n_rows": len(rows),
               "n_failures": len(failures), "failures": failures}
    return rows, summary


def _run_two_point(config, cid):
    body = config.body()
    design = config.design()
    N = int(config.grid_N[0])
    sigma = float(config.grid_sigma[0])
    est_zero = lambda X, Y: np.zeros(body.ambient_dim)
    est_erm = erm_estimator(body)
    rows = []
    ok = 0
    for s in range(config.demo_seeds):
        seed = _row_seed(config.seed, "two-point", s)
        X = design.sample(N, derive_rng(seed, "design"))
        for name, est in (("zero", est_zero), ("erm", est_erm)):
            reported, bound = two_point_minimax_demo(
                est, body, X, noise_seed=seed, sigma=sigma,
                witness_seed=seed)
            holds = reported >= bound - 1e-9
            ok += int(holds)
            rows.append({"seed": seed, "estimator": name,
                         "reported_error": reported, "lower_bound": bound,
                         "holds": holds})
    summary = {"n_rows": len(rows), "n_holds": ok, "n_failures": 0,
               "failures": []}
    return rows, summary


def _run_shift(config, cid):
    pairs = [(a, b) for a in (0.05, 0.25, 0.5, 0.75, 0.9)
             for b in (0.5, 1.95996)]
    rng = derive_rng(config.seed, "shift-mc")
    rows = []
    worst = 0.0
    for alpha, shift in pairs:
        bound = gaussian_shift_bound(alpha, shift)
        # halfspace {x1 >= b}: the bound is attained with equality
        b = -_ndtri(alpha)
        x = rng.standard_normal(config.shift_draws)
        emp_u = float(np.mean(x >= b))
        emp_v = float(np.mean(x - shift >= b))
        gap = abs(emp_v - gaussian_shift_bound(emp_u, shift))
        worst = max(worst, gap)
        rows.append({"alpha": alpha, "shift": shift, "bound": bound,
                     "mc_measure_u": emp_u, "mc_measure_v": emp_v,
                     "equality_gap": gap})
    summary = {"n_rows": len(rows), "worst_equality_gap": worst,
               "n_failures": 0, "failures": []}
    return rows, summary


def _ndtri(a):
    from scipy.special import ndtri
    return float(ndtri(a))


def _run_width(config, cid):
    body = config.body()
    d_f = body.l2_diameter
    grid = np.geomspace(d_f / 64.0, d_f, config.width_points)
    rows = []
    for r in grid:
        est = gaussian_width_mc(body, float(r), trials=config.trials,
                                seed=config.seed)
        rows.append({"r": est.r, "mean": est.mean, "stderr": est.stderr,
                     "trials": est.trials})
    summary = {"n_rows": len(rows), "n_failures": 0, "failures": []}
    return rows, summary


def _write_rows(path, config, rows):
    with open(path, "w", newline="\n") as fh:
        if config.mode == "erm":
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(row.to_csv(config.record_runtime) + "\n")
        else:
            if not rows:
                return
            keys = list(rows[0].keys())
            fh.write(",".join(keys) + "\n")
            for row in rows:
                fh.write(",".join(_csv_cell(row[k]) for k in keys) + "\n")


def _csv_cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def fit_rate(rows, x: str = "N", y: str = "excess_risk"):
    """Least squares of log(median y per x-cell) on log x: (slope, intercept, r2)."""
    groups = {}
    for row in rows:
        rx = getattr(row, x) if not isinstance(row, dict) else row[x]
        ry = getattr(row, y) if not isinstance(row, dict) else row[y]
        if np.isfinite(ry):
            groups.setdefault(float(rx), []).append(float(ry))
    if len(groups) < 2:
        raise ValueError("need at least two distinct x cells")
    xs = np.array(sorted(groups))
    ys = np.array([np.median(groups[v]) for v in xs])
    if (ys <= 0).any() or (xs <= 0).any():
        raise ValueError("log-log fit needs positive cells")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def load_constants() -> dict:
    """Calibrated constants pinned by the acceptance suite (versioned file)."""
    text = resources.files("ermlab").joinpath("constants.default").read_text()
    out = {}
    for key, raw in parse_config_text(text).items():
        try:
            out[key] = float(raw)
        except ValueError:
            out[key] = raw
    return out
