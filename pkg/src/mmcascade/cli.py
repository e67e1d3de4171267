"""Command-line front end: config parsing, subcommand dispatch, CSV/JSON emission.

Experiments are described by a single JSON config document; command-line
flags override config fields of the same name.  Recognized fields:

``params``
    ``{"r", "J", "kappa_fwd", "kappa_bwd", "kappa_p"}`` -- the cascade.
``n, T, reps, K, seed, threads, out``
    System size, horizon, replicate count, sample size, base seed,
    worker count, output directory.
``grid_points``
    Output grid resolution on [0, T].
``z0``
    Initial (z_S, z_P) for the reduced solve.
``zs``
    Frozen substrate level for ``stationary`` / ``poisson``.
``sample_mode``
    ``uniform`` or ``first`` for ``sample-taus``.
``fit``
    ``kM,kP`` for the aggregate two-parameter form, ``raw`` for all rate
    constants, or ``raw:i,j,...`` (1-based positions into
    kappa_1, kappa_-1, ..., kappa_p) to free a subset and pin the rest at
    the config values.
``bounds, fixed, optimizer, chain, prior``
    Inference controls; see the fit subcommands.
``kde_grid``
    ``[lo, hi, points]`` evaluation grid for ``kde``.
``column``
    Input column selected by ``kde``.

Every CSV starts with a provenance line ``# mmcascade <version>
config=<hash> seed=<seed>``; outputs are byte-identical for identical
(config, seed).  Numbers are written as shortest round-trip decimals.

Exit codes: 0 success, 1 validation error (unknown flags, malformed
config, bad field values), 2 numerical failure (solver breakdown, failed
optimization, zero-acceptance chain).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fclt import FluctuationModel, empirical_fluctuation, simulate_fluctuation_batch
from .infer import (
    ChainConfig,
    InferenceProblem,
    MLEResult,
    OptimizerConfig,
    RawParameterization,
    ReducedParameterization,
    UniformBoxPrior,
    fit_bayes,
    fit_mle,
    kde,
)
from .ips import TauSample, ParticleRun, chaos_diagnostics, sample_taus, simulate_ips
from .model import CascadeParams, ScalingRegime
from .poisson import solve_poisson
from .qssa import solve_reduced_ode, stationary_weights
from .rk45 import SolverError
from .ssa import simulate_batch, simulate_full
from .util import config_hash, fmt, mix_seed

_REQUIRED = object()

# Parameter sets of the three reproduced experiments.
_FIG1_PARAMS = {
    "r": 2,
    "J": 10,
    "kappa_fwd": [1.0, 1.0],
    "kappa_bwd": [1.0, 1.0],
    "kappa_p": 0.1,
}
_FIG23_PARAMS = {
    "r": 1,
    "J": 10,
    "kappa_fwd": [2.0],
    "kappa_bwd": [0.2],
    "kappa_p": 0.1,
}


# ---------------------------------------------------------------------------
# config handling


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ValueError(f"config: cannot read {path!r}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValueError(f"config: malformed JSON in {path!r}: {e}") from e
    if not isinstance(doc, dict):
        raise ValueError("config: top-level document must be a JSON object")
    return doc


def _as_int(name: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"config field {name!r} must be an integer, got {v!r}")
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError(f"config field {name!r} must be an integer, got {v!r}")
        v = int(v)
    return v


def _as_float(name: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"config field {name!r} must be a number, got {v!r}")
    return float(v)


def _as_str(name: str, v) -> str:
    if not isinstance(v, str):
        raise ValueError(f"config field {name!r} must be a string, got {v!r}")
    return v


def _field(cfg: dict, name: str, cast, default=_REQUIRED):
    if name not in cfg:
        if default is _REQUIRED:
            raise ValueError(f"config field {name!r} is required for this subcommand")
        return default
    return cast(name, cfg[name])


def _params_from_config(cfg: dict) -> CascadeParams:
    raw = cfg.get("params")
    if raw is None:
        raise ValueError("config field 'params' is required for this subcommand")
    if not isinstance(raw, dict):
        raise ValueError("config field 'params' must be a JSON object")
    try:
        return CascadeParams(
            r=_as_int("params.r", raw["r"]),
            J=_as_int("params.J", raw["J"]),
            kappa_fwd=tuple(raw["kappa_fwd"]),
            kappa_bwd=tuple(raw["kappa_bwd"]),
            kappa_p=raw["kappa_p"],
        )
    except KeyError as e:
        raise ValueError(f"config field 'params' is missing key {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise ValueError(f"config field 'params': {e}") from e


def _bounds_list(cfg: dict, name: str, default=None) -> tuple[tuple[float, float], ...]:
    raw = cfg.get(name, default)
    if raw is None:
        raise ValueError(f"config field {name!r} is required for this subcommand")
    try:
        out = tuple((float(lo), float(hi)) for lo, hi in raw)
    except (TypeError, ValueError) as e:
        raise ValueError(f"config field {name!r} must be a list of [lo, hi] pairs: {e}") from e
    return out


def _sample_mode(cfg: dict) -> str:
    mode = _field(cfg, "sample_mode", _as_str, "uniform")
    if mode not in ("uniform", "first"):
        raise ValueError(f"config field 'sample_mode' must be 'uniform' or 'first', got {mode!r}")
    return mode


def _merge_flags(args: argparse.Namespace, cfg: dict) -> dict:
    """Overlay command-line flags onto the config document."""
    merged = dict(cfg)
    for name in (
        "seed",
        "threads",
        "out",
        "n",
        "T",
        "K",
        "reps",
        "sample_mode",
        "fit",
        "zs",
        "column",
        "source",
    ):
        v = getattr(args, name, None)
        if v is not None:
            merged[name] = v
    grid = getattr(args, "grid", None)
    if grid is not None:
        parts = grid.split(",")
        if len(parts) != 3:
            raise ValueError(f"--grid must be 'lo,hi,points', got {grid!r}")
        merged["kde_grid"] = [float(parts[0]), float(parts[1]), int(parts[2])]
    in_path = getattr(args, "in_path", None)
    if in_path is not None:
        merged["in"] = in_path
    for flag in ("occupation", "diagnostics"):
        if getattr(args, flag, False):
            merged[flag] = True
    return merged


# ---------------------------------------------------------------------------
# output helpers


def _provenance(cfg: dict, seed: int) -> str:
    # the worker count and output directory do not influence results, so
    # they are excluded from the hash and identical experiments written to
    # different places still match byte for byte
    hashed = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    return f"# mmcascade {__version__} config={config_hash(hashed)} seed={seed}"


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(float(v))


def _write_csv(path: Path, provenance: str, header: list[str], rows, meta=(), tail=()) -> None:
    lines = [provenance, *meta, ",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    lines.extend(tail)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def _jsonify(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonify(x) for x in v]
    if isinstance(v, (list, tuple)):
        return [_jsonify(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonify(x) for k, x in v.items()}
    return v


def _write_json(path: Path, cfg: dict, seed: int, payload: dict) -> None:
    hashed = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    doc = {
        "provenance": {
            "version": __version__,
            "config": config_hash(hashed),
            "seed": seed,
        }
    }
    doc.update(_jsonify(payload))
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def _read_table(path: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Parse a CSV written by this tool: '#' metadata, header, string rows."""
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ValueError(f"cannot read input file {path!r}: {e}") from e
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, _, val = token.partition("=")
                    meta.setdefault(key, val)
            continue
        if header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    if header is None:
        raise ValueError(f"input file {path!r} has no header row")
    return meta, header, rows


def _read_column(path: str, column: str) -> np.ndarray:
    _, header, rows = _read_table(path)
    if column not in header:
        raise ValueError(f"input file {path!r} has no column {column!r} (columns: {','.join(header)})")
    j = header.index(column)
    return np.array([float(row[j]) for row in rows])


def _read_taus(path: str) -> TauSample:
    meta, header, rows = _read_table(path)
    if "t" not in header:
        raise ValueError(f"input file {path!r} has no column 't'")
    if "T" not in meta:
        raise ValueError(f"input file {path!r} is missing the '# T=<horizon>' metadata line")
    j = header.index("t")
    times = sorted(float(row[j]) for row in rows)
    return TauSample(times=tuple(times), T=float(meta["T"]))


# ---------------------------------------------------------------------------
# fit plumbing shared by fit-mle / fit-bayes / repro-fig2 / repro-fig3


def _parse_fit(cfg: dict, params: CascadeParams):
    """Resolve the 'fit' field into (parameterization, fixed dict)."""
    spec = _field(cfg, "fit", _as_str, "kM,kP").strip()
    low = spec.lower()
    if low in ("km,kp", "kappa_m,kappa_p"):
        parameterization = ReducedParameterization(J=params.J)
        fixed: dict[str, float] = {}
    elif low == "raw" or low.startswith("raw:"):
        parameterization = RawParameterization(r=params.r, J=params.J)
        names = parameterization.names
        values = []
        for i in range(params.r):
            values.extend((params.kappa_fwd[i], params.kappa_bwd[i]))
        values.append(params.kappa_p)
        if low == "raw":
            fixed = {}
        else:
            try:
                idx = [int(tok) for tok in spec[4:].split(",")]
            except ValueError as e:
                raise ValueError(f"config field 'fit': bad raw index list in {spec!r}") from e
            if len(set(idx)) != len(idx) or any(not 1 <= i <= len(names) for i in idx):
                raise ValueError(
                    f"config field 'fit': raw indices must be distinct and in 1..{len(names)}"
                )
            free = {names[i - 1] for i in idx}
            fixed = {nm: v for nm, v in zip(names, values) if nm not in free}
    else:
        raise ValueError(
            f"config field 'fit' must be 'kM,kP', 'raw', or 'raw:i,j,...', got {spec!r}"
        )
    for key, value in cfg.get("fixed", {}).items():
        fixed[key] = _as_float(f"fixed.{key}", value)
    return parameterization, fixed


def _build_problem(cfg: dict, params: CascadeParams, data: TauSample) -> InferenceProblem:
    parameterization, fixed = _parse_fit(cfg, params)
    dim = len([n for n in parameterization.names if n not in fixed])
    bounds = _bounds_list(cfg, "bounds", default=[[1e-3, 10.0]] * dim)
    return InferenceProblem(
        data=data,
        parameterization=parameterization,
        bounds=bounds,
        fixed=fixed,
    )


def _optimizer_config(cfg: dict) -> OptimizerConfig:
    raw = cfg.get("optimizer", {})
    if not isinstance(raw, dict):
        raise ValueError("config field 'optimizer' must be a JSON object")
    allowed = {"starts", "xatol", "fatol", "maxiter"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"config field 'optimizer' has unknown keys {sorted(unknown)}")
    return OptimizerConfig(**raw)


def _chain_config(cfg: dict) -> ChainConfig:
    raw = cfg.get("chain", {})
    if not isinstance(raw, dict):
        raise ValueError("config field 'chain' must be a JSON object")
    allowed = {"burn_in", "samples", "target_accept", "adapt_interval", "initial_step"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"config field 'chain' has unknown keys {sorted(unknown)}")
    return ChainConfig(**raw)


def _kde_rows(values: np.ndarray, cfg: dict) -> list[tuple[float, float]]:
    """KDE curve on the configured grid, or a data-driven one covering the mass."""
    spec = cfg.get("kde_grid")
    if spec is not None:
        try:
            lo, hi, points = float(spec[0]), float(spec[1]), int(spec[2])
        except (TypeError, ValueError, IndexError) as e:
            raise ValueError("config field 'kde_grid' must be [lo, hi, points]") from e
        if not (hi > lo and points >= 2):
            raise ValueError("config field 'kde_grid' must satisfy lo < hi and points >= 2")
    else:
        sd = float(np.std(values, ddof=1))
        if sd == 0.0:
            raise ValueError("kde grid cannot be derived from degenerate values; set 'kde_grid'")
        bw = 1.06 * sd * len(values) ** (-0.2)
        lo = float(np.min(values)) - 4.0 * bw
        hi = float(np.max(values)) + 4.0 * bw
        points = 512
    grid = np.linspace(lo, hi, points)
    density = kde(values, grid)
    return list(zip(grid.tolist(), density.tolist()))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate_ssa(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    n = _field(cfg, "n", _as_int, 1000)
    T = _field(cfg, "T", _as_float, 5.0)
    reps = _field(cfg, "reps", _as_int, 100)
    seed = _field(cfg, "seed", _as_int, 0)
    threads = _field(cfg, "threads", _as_int, 1)
    points = _field(cfg, "grid_points", _as_int, 201)
    grid = np.linspace(0.0, T, points)
    batch = simulate_batch(
        params, ScalingRegime(n=n), T, grid, reps, base_seed=seed, threads=threads
    )
    header = ["t", "rep"] + [f"z_c_{i}" for i in range(1, params.r + 1)] + ["z_s", "z_p"]
    rows = []
    for rep in range(reps):
        for j, t in enumerate(grid):
            rows.append(
                (t, rep, *batch.z_c[rep, j, :], batch.z_s[rep, j], batch.z_p[rep, j])
            )
    _write_csv(out / "trajectories.csv", _provenance(cfg, seed), header, rows)
    if cfg.get("occupation"):
        traj = simulate_full(params, ScalingRegime(n=n), T, seed=mix_seed(seed, reps))
        weights = traj.scaled().occupation_measure()
        occ_rows = [
            (";".join(str(c) for c in cell), w) for cell, w in sorted(weights.items())
        ]
        _write_csv(out / "occupation.csv", _provenance(cfg, seed), ["cell", "weight"], occ_rows)


def _cmd_reduce(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    T = _field(cfg, "T", _as_float, 5.0)
    seed = _field(cfg, "seed", _as_int, 0)
    points = _field(cfg, "grid_points", _as_int, 201)
    z0 = cfg.get("z0", [1.0, 0.0])
    try:
        z0 = (float(z0[0]), float(z0[1]))
    except (TypeError, ValueError, IndexError) as e:
        raise ValueError("config field 'z0' must be [z_s0, z_p0]") from e
    grid = np.linspace(0.0, T, points)
    if z0[0] == 0.0:
        # nothing to convert; the reduced flow is constant
        rows = [(t, 0.0, z0[1]) for t in grid]
    else:
        path = solve_reduced_ode(params, z0, T)
        zs = np.atleast_1d(path.z_s(grid))
        rows = [(t, z, (z0[0] + z0[1]) - z) for t, z in zip(grid, zs.tolist())]
    _write_csv(out / "reduced.csv", _provenance(cfg, seed), ["t", "z_s", "z_p"], rows)


def _cmd_stationary(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    zs = _field(cfg, "zs", _as_float, 1.0)
    seed = _field(cfg, "seed", _as_int, 0)
    sw = stationary_weights(params, zs)
    rows = [(i + 1, sw.a[i], sw.p[i]) for i in range(params.r)]
    _write_csv(out / "stationary.csv", _provenance(cfg, seed), ["i", "a_i", "p_i"], rows)


def _cmd_poisson(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    zs = _field(cfg, "zs", _as_float, 1.0)
    seed = _field(cfg, "seed", _as_int, 0)
    sol = solve_poisson(params, zs)
    rows = [(i + 1, sol.b1[i], sol.b2[i]) for i in range(params.r)]
    tail = [f"# residual_max={fmt(sol.residual_max)} residual_bound={fmt(sol.residual_bound)}"]
    _write_csv(
        out / "poisson.csv", _provenance(cfg, seed), ["i", "b1_i", "b2_i"], rows, tail=tail
    )


def _cmd_fclt_model(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    T = _field(cfg, "T", _as_float, 5.0)
    seed = _field(cfg, "seed", _as_int, 0)
    points = _field(cfg, "grid_points", _as_int, 201)
    grid = np.linspace(0.0, T, points)
    model = FluctuationModel(solve_reduced_ode(params, (1.0, 0.0), T))
    rows = []
    for t in grid:
        A = model.drift(t)
        D = model.diffusion(t)
        rows.append((t, A[0, 0], A[1, 0], D[0, 0], D[0, 1], D[1, 1]))
    _write_csv(
        out / "fclt_model.csv",
        _provenance(cfg, seed),
        ["t", "a11", "a21", "d11", "d12", "d22"],
        rows,
    )


def _cmd_fclt_empirical(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    n = _field(cfg, "n", _as_int, 1000)
    T = _field(cfg, "T", _as_float, 1.0)
    reps = _field(cfg, "reps", _as_int, 100)
    seed = _field(cfg, "seed", _as_int, 0)
    threads = _field(cfg, "threads", _as_int, 1)
    source = _field(cfg, "source", _as_str, "ssa")
    path = solve_reduced_ode(params, (1.0, 0.0), T)
    if source == "ssa":
        grid = np.array([0.0, T])
        batch = simulate_batch(
            params, ScalingRegime(n=n), T, grid, reps, base_seed=seed, threads=threads
        )
        u = empirical_fluctuation(batch, path)
    elif source == "sde":
        model = FluctuationModel(path)
        u = simulate_fluctuation_batch(model, np.zeros(2), T, reps, seed=seed)
    else:
        raise ValueError(f"config field 'source' must be 'ssa' or 'sde', got {source!r}")
    rows = [(rep, u[rep, 0], u[rep, 1]) for rep in range(reps)]
    _write_csv(
        out / "fluctuations.csv", _provenance(cfg, seed), ["rep", "u_s", "u_p"], rows
    )


def _cmd_ips(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    n = _field(cfg, "n", _as_int, 1000)
    T = _field(cfg, "T", _as_float, 1.0)
    seed = _field(cfg, "seed", _as_int, 0)
    run = simulate_ips(params, n, T, seed)
    meta = [f"# n={n}", f"# T={fmt(T)}"]
    rows = [(i + 1, t) for i, t in enumerate(run.times.tolist())]
    _write_csv(
        out / "conversions.csv", _provenance(cfg, seed), ["idx", "t"], rows, meta=meta
    )
    if cfg.get("diagnostics"):
        reps = _field(cfg, "reps", _as_int, 100)
        report = chaos_diagnostics(params, n, reps, T, base_seed=seed)
        _write_json(
            out / "ips_diagnostics.json",
            cfg,
            seed,
            {
                "n": report.n,
                "reps": report.reps,
                "T": report.T,
                "survival_sup_dist": report.sup_distance,
                "stderr_survival_sup_dist": report.sup_se,
                "pair_corr": report.pair_corr,
                "stderr_pair_corr": report.pair_corr_se,
            },
        )


def _cmd_sample_taus(cfg: dict, out: Path) -> None:
    K = _field(cfg, "K", _as_int, 100)
    seed = _field(cfg, "seed", _as_int, 0)
    mode = _sample_mode(cfg)
    in_path = cfg.get("in")
    if in_path is not None:
        meta, header, rows_in = _read_table(in_path)
        if "t" not in header:
            raise ValueError(f"input file {in_path!r} has no column 't'")
        if "n" not in meta or "T" not in meta:
            raise ValueError(
                f"input file {in_path!r} is missing '# n=' / '# T=' metadata lines"
            )
        j = header.index("t")
        times = np.array([float(row[j]) for row in rows_in])
        run = ParticleRun(n=int(meta["n"]), T=float(meta["T"]), times=np.sort(times))
    else:
        params = _params_from_config(cfg)
        n = _field(cfg, "n", _as_int, 1000)
        T = _field(cfg, "T", _as_float, 1.0)
        run = simulate_ips(params, n, T, mix_seed(seed, 1))
    sample = sample_taus(run, K, seed=seed, mode=mode)
    meta_out = [f"# T={fmt(run.T)}"]
    rows = [(t,) for t in sample.times]
    _write_csv(out / "taus.csv", _provenance(cfg, seed), ["t"], rows, meta=meta_out)


def _mle_payload(problem: InferenceProblem, result: MLEResult) -> dict:
    return {
        "names": list(problem.free_names),
        "theta": result.theta,
        "loglik": result.loglik,
        "converged": result.converged,
        "fixed": problem.fixed,
        "starts": [
            {
                "x0": s.x0,
                "theta": s.theta,
                "loglik": s.loglik,
                "success": s.success,
                "iterations": s.iterations,
            }
            for s in result.starts
        ],
    }


def _cmd_fit_mle(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    seed = _field(cfg, "seed", _as_int, 0)
    in_path = cfg.get("in")
    if in_path is None:
        raise ValueError("fit-mle requires --in TAUS_CSV (or config field 'in')")
    data = _read_taus(in_path)
    problem = _build_problem(cfg, params, data)
    result = fit_mle(problem, _optimizer_config(cfg), seed=seed)
    _write_json(out / "mle.json", cfg, seed, _mle_payload(problem, result))
    summary = " ".join(
        f"{name}={fmt(v)}" for name, v in zip(problem.free_names, result.theta)
    )
    print(f"mle: {summary} loglik={fmt(result.loglik)}")


def _cmd_fit_bayes(cfg: dict, out: Path) -> None:
    params = _params_from_config(cfg)
    seed = _field(cfg, "seed", _as_int, 0)
    in_path = cfg.get("in")
    if in_path is None:
        raise ValueError("fit-bayes requires --in TAUS_CSV (or config field 'in')")
    data = _read_taus(in_path)
    problem = _build_problem(cfg, params, data)
    prior_bounds = cfg.get("prior")
    if prior_bounds is None and problem.dim == 2 and isinstance(
        problem.parameterization, ReducedParameterization
    ):
        # box prior covering the reference experiment's parameter region
        prior_bounds = [[1e-3, 0.5], [1e-3, 1.0]]
    if prior_bounds is None:
        raise ValueError("config field 'prior' is required for this fit")
    prior = UniformBoxPrior(_bounds_list({"prior": prior_bounds}, "prior"))
    posterior = fit_bayes(problem, prior, _chain_config(cfg), seed=seed)
    _write_chain(out / "chain.csv", cfg, seed, posterior)
    _write_json(
        out / "posterior.json",
        cfg,
        seed,
        {
            "names": list(posterior.names),
            "acceptance_rate": posterior.acceptance_rate,
            "step": posterior.step,
            "posterior_mean": posterior.samples.mean(axis=0),
        },
    )


def _write_chain(path: Path, cfg: dict, seed: int, posterior) -> None:
    d = posterior.samples.shape[1]
    header = ["iter", "logpost"] + [f"param_{j + 1}" for j in range(d)]
    rows = [
        (i + 1, posterior.log_posts[i], *posterior.samples[i])
        for i in range(posterior.samples.shape[0])
    ]
    meta = [f"# names={','.join(posterior.names)}"]
    _write_csv(path, _provenance(cfg, seed), header, rows, meta=meta)


def _cmd_kde(cfg: dict, out: Path) -> None:
    seed = _field(cfg, "seed", _as_int, 0)
    in_path = cfg.get("in")
    if in_path is None:
        raise ValueError("kde requires --in CSV (or config field 'in')")
    column = _field(cfg, "column", _as_str)
    values = _read_column(in_path, column)
    rows = _kde_rows(values, cfg)
    _write_csv(out / "kde.csv", _provenance(cfg, seed), ["x", "density"], rows)


def _cmd_repro_fig1(cfg: dict, out: Path) -> None:
    cfg = {"params": _FIG1_PARAMS, "T": 5.0, "reps": 100, **cfg}
    params = _params_from_config(cfg)
    T = _field(cfg, "T", _as_float)
    reps = _field(cfg, "reps", _as_int)
    seed = _field(cfg, "seed", _as_int, 0)
    threads = _field(cfg, "threads", _as_int, 1)
    points = _field(cfg, "grid_points", _as_int, 201)
    grid = np.linspace(0.0, T, points)
    header = ["t", "rep"] + [f"z_c_{i}" for i in range(1, params.r + 1)] + ["z_s", "z_p"]
    for stream, n in enumerate((100, 1000), start=1):
        batch = simulate_batch(
            params,
            ScalingRegime(n=n),
            T,
            grid,
            reps,
            base_seed=mix_seed(seed, stream),
            threads=threads,
        )
        rows = []
        for rep in range(reps):
            for j, t in enumerate(grid):
                rows.append(
                    (t, rep, *batch.z_c[rep, j, :], batch.z_s[rep, j], batch.z_p[rep, j])
                )
        _write_csv(out / f"fig1_n{n}.csv", _provenance(cfg, seed), header, rows)
    path = solve_reduced_ode(params, (1.0, 0.0), T)
    zs = np.atleast_1d(path.z_s(grid))
    ode_rows = [(t, z, 1.0 - z) for t, z in zip(grid, zs.tolist())]
    _write_csv(out / "fig1_ode.csv", _provenance(cfg, seed), ["t", "z_s", "z_p"], ode_rows)


def _cmd_repro_fig2(cfg: dict, out: Path) -> None:
    cfg = {"params": _FIG23_PARAMS, "T": 2.0, "n": 100000, "K": 1000, "reps": 200, **cfg}
    params = _params_from_config(cfg)
    T = _field(cfg, "T", _as_float)
    n = _field(cfg, "n", _as_int)
    K = _field(cfg, "K", _as_int)
    reps = _field(cfg, "reps", _as_int)
    seed = _field(cfg, "seed", _as_int, 0)
    mode = _sample_mode(cfg)
    opt = _optimizer_config(cfg)
    estimates = np.empty((reps, 2))
    for k in range(reps):
        run = simulate_ips(params, n, T, mix_seed(seed, 3 * k))
        data = sample_taus(run, K, seed=mix_seed(seed, 3 * k + 1), mode=mode)
        problem = _build_problem(cfg, params, data)
        result = fit_mle(problem, opt, seed=mix_seed(seed, 3 * k + 2))
        estimates[k] = result.theta
    rows = [(k, estimates[k, 0], estimates[k, 1]) for k in range(reps)]
    _write_csv(
        out / "fig2_mles.csv",
        _provenance(cfg, seed),
        ["rep", "kappa_m", "kappa_p"],
        rows,
    )
    for j, name in enumerate(("kappa_m", "kappa_p")):
        _write_csv(
            out / f"fig2_kde_{name}.csv",
            _provenance(cfg, seed),
            ["x", "density"],
            _kde_rows(estimates[:, j], cfg),
        )
    med = np.median(estimates, axis=0)
    print(f"medians: kappa_m={fmt(med[0])} kappa_p={fmt(med[1])}")


def _cmd_repro_fig3(cfg: dict, out: Path) -> None:
    cfg = {"params": _FIG23_PARAMS, "T": 3.0, "n": 100000, "K": 1000, **cfg}
    params = _params_from_config(cfg)
    T = _field(cfg, "T", _as_float)
    n = _field(cfg, "n", _as_int)
    K = _field(cfg, "K", _as_int)
    seed = _field(cfg, "seed", _as_int, 0)
    mode = _sample_mode(cfg)
    run = simulate_ips(params, n, T, mix_seed(seed, 1))
    data = sample_taus(run, K, seed=mix_seed(seed, 2), mode=mode)
    problem = _build_problem(cfg, params, data)
    prior_bounds = cfg.get("prior", [[1e-3, 0.5], [1e-3, 1.0]])
    prior = UniformBoxPrior(_bounds_list({"prior": prior_bounds}, "prior"))
    posterior = fit_bayes(problem, prior, _chain_config(cfg), seed=mix_seed(seed, 3))
    _write_chain(out / "fig3_chain.csv", cfg, seed, posterior)
    for j, name in enumerate(problem.free_names):
        _write_csv(
            out / f"fig3_kde_{name}.csv",
            _provenance(cfg, seed),
            ["x", "density"],
            _kde_rows(posterior.samples[:, j], cfg),
        )
    _write_json(
        out / "fig3_posterior.json",
        cfg,
        seed,
        {
            "names": list(posterior.names),
            "acceptance_rate": posterior.acceptance_rate,
            "step": posterior.step,
            "posterior_mean": posterior.samples.mean(axis=0),
        },
    )


_DISPATCH = {
    "simulate-ssa": _cmd_simulate_ssa,
    "reduce": _cmd_reduce,
    "stationary": _cmd_stationary,
    "poisson": _cmd_poisson,
    "fclt-model": _cmd_fclt_model,
    "fclt-empirical": _cmd_fclt_empirical,
    "ips": _cmd_ips,
    "sample-taus": _cmd_sample_taus,
    "fit-mle": _cmd_fit_mle,
    "fit-bayes": _cmd_fit_bayes,
    "kde": _cmd_kde,
    "repro-fig1": _cmd_repro_fig1,
    "repro-fig2": _cmd_repro_fig2,
    "repro-fig3": _cmd_repro_fig3,
}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mmcascade", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"mmcascade {__version__}")

    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config document")
    common.add_argument("--seed", type=int, help="base seed for all randomness")
    common.add_argument("--threads", type=int, help="worker process count")
    common.add_argument("--out", metavar="DIR", help="output directory (default '.')")

    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def add(name: str, help_: str, **kwargs) -> _Parser:
        return sub.add_parser(name, parents=[common], help=help_, **kwargs)

    p = add("simulate-ssa", "replicated jump-process trajectories on a grid")
    p.add_argument("--n", type=int, help="system size")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--reps", type=int, help="replicate count")
    p.add_argument(
        "--occupation",
        action="store_true",
        help="also write the complex-block occupation measure of one full run",
    )

    p = add("reduce", "deterministic reduced (z_S, z_P) path")
    p.add_argument("--T", type=float, help="time horizon")

    p = add("stationary", "frozen-substrate stationary cell probabilities")
    p.add_argument("--zs", type=float, help="substrate level")

    p = add("poisson", "centered-propensity corrector coefficients")
    p.add_argument("--zs", type=float, help="substrate level")

    p = add("fclt-model", "drift and diffusion of the fluctuation SDE along the path")
    p.add_argument("--T", type=float, help="time horizon")

    p = add("fclt-empirical", "terminal fluctuations, from the jump process or the SDE")
    p.add_argument("--n", type=int, help="system size")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--reps", type=int, help="replicate count")
    p.add_argument("--source", choices=["ssa", "sde"], help="fluctuation source")

    p = add("ips", "particle-system conversion times (optionally chaos diagnostics)")
    p.add_argument("--n", type=int, help="particle count")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--reps", type=int, help="replicates for diagnostics")
    p.add_argument(
        "--diagnostics",
        action="store_true",
        help="also write survival / pair-correlation diagnostics",
    )

    p = add("sample-taus", "draw K observed conversion times")
    p.add_argument("--in", dest="in_path", metavar="CSV", help="conversion-times CSV")
    p.add_argument("--n", type=int, help="particle count (inline simulation)")
    p.add_argument("--T", type=float, help="time horizon (inline simulation)")
    p.add_argument("--K", type=int, help="sample size")
    p.add_argument("--sample-mode", dest="sample_mode", choices=["uniform", "first"])

    p = add("fit-mle", "maximum-likelihood fit from observed conversion times")
    p.add_argument("--in", dest="in_path", metavar="CSV", help="TauSample CSV")
    p.add_argument("--fit", help="kM,kP | raw | raw:i,j,...")

    p = add("fit-bayes", "random-walk Metropolis posterior from observed times")
    p.add_argument("--in", dest="in_path", metavar="CSV", help="TauSample CSV")
    p.add_argument("--fit", help="kM,kP | raw | raw:i,j,...")

    p = add("kde", "kernel density estimate of one CSV column")
    p.add_argument("--in", dest="in_path", metavar="CSV", help="input table")
    p.add_argument("--column", help="column to estimate")
    p.add_argument("--grid", metavar="LO,HI,POINTS", help="evaluation grid")

    p = add("repro-fig1", "trajectory overlays vs the reduced path (two system sizes)")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--reps", type=int, help="replicate count")

    p = add("repro-fig2", "replicated maximum-likelihood estimates and their densities")
    p.add_argument("--n", type=int, help="particle count")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--K", type=int, help="sample size per replicate")
    p.add_argument("--reps", type=int, help="replicate count")

    p = add("repro-fig3", "posterior chain and densities from one sample")
    p.add_argument("--n", type=int, help="particle count")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--K", type=int, help="sample size")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = _merge_flags(args, _load_config(args.config))
        out = Path(cfg.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
        _DISPATCH[args.command](cfg, out)
    except (SolverError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except RuntimeError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
