"""Experiment configuration, drivers, and file output.

Configs are strict JSON (unknown fields are rejected with their path);
numeric tables are written as comma-separated UTF-8 with a header row and
full-precision floats, so rerunning a config with the same seed reproduces
every output byte for byte.  Timestamps appear only in the report index.
"""

import json
import math
import os
from datetime import datetime, timezone

import numpy as np
from jsonschema import Draft202012Validator

from .chain import ChainParams, Observer, run_chain, sample_initial
from .errors import (
    CapabilityError,
    ConfigurationError,
    MissingArtifactError,
)
from .lyapunov import (
    ENERGY_CUBED,
    VELOCITY_SIXTH,
    LyapunovSpec,
    drift_slope_regression,
    estimate_kernel_drift,
)
from .model import ParticleState, make_builtin_model
from .oracle import GridSpec, reference_expectation, self_consistent_fixed_point
from .rng import RngStream, derive_seed
from .risk import fit_geometric_rate, histogram_divergence, quadratic_risk
from .theory import (
    LsiConstants,
    contraction_constants,
    lsi_constants,
    lyapunov_constants,
)

EXPERIMENT_KINDS = (
    "sample",
    "sweep_h",
    "sweep_N",
    "converge",
    "lyapunov_check",
    "oracle",
    "constants",
    "risk",
)

# bounded observables by id: f maps positions (N, d) -> (N,), with sup norm
OBSERVABLES = {
    "x2_clip25": (lambda x: np.clip(np.sum(x * x, axis=-1), 0.0, 25.0), 25.0),
    "cos_x1": (lambda x: np.cos(x[..., 0]), 1.0),
    "x2": (lambda x: np.sum(x * x, axis=-1), math.inf),
}

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}

_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(EXPERIMENT_KINDS)},
        "out_dir": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variant"],
            "properties": {
                "variant": {"type": "string"},
                "r": _NUM, "s": _NUM, "L": _NUM, "a": _NUM, "b": _NUM,
                "d": _POS_INT, "ridge_r": _NUM,
                "xs": {"type": "array"}, "ys": {"type": "array"},
            },
        },
        "n_particles": _POS_INT,
        "chain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": _NUM,
                "gamma": _NUM,
                "n_steps": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "init": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["point", "gaussian", "uniform"]},
                "at": {"type": ["number", "array"]},
                "mean": {"type": ["number", "array"]},
                "std": _NUM,
                "wrap": {"type": "boolean"},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lo": _NUM, "hi": _NUM, "n_cells": _POS_INT},
            "required": ["lo", "hi", "n_cells"],
        },
        "observable": {"enum": sorted(OBSERVABLES)},
        "stride": _POS_INT,
        "burn_in": {"type": "number", "minimum": 0.0, "maximum": 0.9},
        "h_grid": {"type": "array", "items": _NUM, "minItems": 1},
        "n_grid": {"type": "array", "items": _POS_INT, "minItems": 1},
        "reps": _POS_INT,
        "n_bins": _POS_INT,
        "n_states": _POS_INT,
        "m_draws": _POS_INT,
        "state_scales": {"type": "array", "items": _NUM, "minItems": 1},
        "c_euclidean": _NUM,
        "slope_gate": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        "damping": _NUM,
        "tol": _NUM,
        "max_iter": _POS_INT,
        "oracle_mean": _NUM,
        "gamma": _NUM,
        "rho": _NUM,
        "c1_hat": _NUM,
        "delta_n": _NUM,
        "lsi": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rho_bar": _NUM, "mmm": _NUM, "eps": _NUM,
                "lambda_flat": _NUM, "alpha_n": _NUM,
                "alpha_n_prime": _NUM, "lambda_prime": _NUM, "rho_n": _NUM,
            },
            "required": ["rho_bar", "mmm"],
        },
        "d": _POS_INT,
    },
}

_VALIDATOR = Draft202012Validator(_SCHEMA)


def validate_config(config):
    """Strict-schema validation; raises with the offending field path."""
    errors = sorted(_VALIDATOR.iter_errors(config), key=lambda e: e.json_path)
    if errors:
        first = errors[0]
        raise ConfigurationError(f"config invalid at {first.json_path}: {first.message}")
    return config


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return validate_config(json.load(fh))


def _require(config, *names):
    missing = [n for n in names if n not in config]
    if missing:
        raise ConfigurationError(
            f"config kind {config.get('kind')!r} requires field(s): {', '.join(missing)}"
        )


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _chain_params(config, n_steps_override=None, h_override=None):
    chain = dict(config.get("chain", {}))
    h = h_override if h_override is not None else chain.get("h")
    n_steps = n_steps_override if n_steps_override is not None else chain.get("n_steps", 0)
    if h is None or "gamma" not in chain:
        raise ConfigurationError("config requires chain.h and chain.gamma")
    return ChainParams(
        h=h,
        gamma=chain["gamma"],
        n_steps=n_steps,
        master_seed=chain.get("seed", 0),
    )


def _grid(config, model=None):
    if "grid" in config:
        g = config["grid"]
        return GridSpec(g["lo"], g["hi"], g["n_cells"])
    if model is not None and model.space.is_torus:
        return GridSpec(0.0, 1.0, 1024)
    return GridSpec(-8.0, 8.0, 2001)


def _oracle_density(config, model):
    result = self_consistent_fixed_point(
        model,
        _grid(config, model),
        damping=config.get("damping", 0.5),
        tol=config.get("tol", 1e-10),
        max_iter=config.get("max_iter", 500),
    )
    return result.density


def _observable(config):
    _require(config, "observable")
    return config["observable"], *OBSERVABLES[config["observable"]]


def resolve_threads(explicit=None):
    """--threads flag, else the MFKL_THREADS environment variable, else 1."""
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("MFKL_THREADS")
    return max(1, int(env)) if env else 1


def decaying_segment(tv_series, floor, head=0.85, tail_factor=2.5):
    """Index range of the geometric decay: drop the saturated head (TV near
    its maximum of 1) and the statistical noise floor at the tail."""
    tv_series = np.asarray(tv_series)
    below_head = tv_series < head
    start = int(np.argmax(below_head)) if below_head.any() else 0
    below_floor = tv_series < tail_factor * max(floor, 1e-12)
    end = int(np.argmax(below_floor)) if below_floor.any() else len(tv_series)
    if end - start < 10:
        start, end = 0, len(tv_series)
    return start, end


# ---------------------------------------------------------------------------
# experiment drivers (one per kind)


def _run_sample(config, out_dir):
    _require(config, "model", "n_particles", "chain", "init")
    model = make_builtin_model(config["model"])
    params = _chain_params(config)
    rng = RngStream(params.master_seed)
    init = sample_initial(config["init"], config["n_particles"], model.space, rng)
    stride = config.get("stride", 1)

    def snapshot(step, state):
        return step, state.positions.copy(), state.velocities.copy()

    obs = Observer(snapshot, stride=stride)
    final, _ = run_chain(model, init, params, [obs], rng)

    rows = []
    for step, pos, vel in obs.records:
        for i in range(pos.shape[0]):
            for k in range(pos.shape[1]):
                rows.append((step, i, k, pos[i, k], vel[i, k]))
    write_csv(os.path.join(out_dir, "trajectory.csv"),
              ["step", "particle", "coord", "x", "v"], rows)
    final_rows = [
        (i, k, final.positions[i, k], final.velocities[i, k])
        for i in range(final.n_particles)
        for k in range(final.d)
    ]
    write_csv(os.path.join(out_dir, "final_state.csv"),
              ["particle", "coord", "x", "v"], final_rows)
    return {}


def _stationary_estimate(model, config, params, f, n_particles, rep_seed):
    """Time-averaged observable over the post-burn-in trajectory."""
    rng = RngStream(rep_seed)
    init = sample_initial(config["init"], n_particles, model.space, rng)
    stride = config.get("stride", 10)
    burn = config.get("burn_in", 0.2)
    first_kept = int(burn * params.n_steps)
    values = []

    def visit(step, state):
        if step >= first_kept:
            values.append(float(np.mean(f(state.positions))))

    run_chain(model, init, params, [Observer(visit, stride=stride)], rng)
    return float(np.mean(values))


def _run_sweep_h(config, out_dir):
    _require(config, "model", "n_particles", "chain", "init", "h_grid", "observable")
    model = make_builtin_model(config["model"])
    obs_id, f, _ = _observable(config)
    oracle_value = (
        config["oracle_mean"]
        if "oracle_mean" in config
        else reference_expectation(_oracle_density(config, model), lambda x: f(x[:, None]))
    )
    reps = config.get("reps", 4)
    gate_lo, gate_hi = config.get("slope_gate", [1.5, 2.5])
    rows = []
    biases = []
    for h in config["h_grid"]:
        params = _chain_params(config, h_override=h)
        estimates = [
            _stationary_estimate(
                model, config, params, f, config["n_particles"],
                derive_seed(params.master_seed, k),
            )
            for k in range(reps)
        ]
        estimates = np.asarray(estimates)
        bias = float(estimates.mean() - oracle_value)
        std_err = float(estimates.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        biases.append(abs(bias))
        rows.append((h, bias, std_err, None, None, None))
    write_csv(os.path.join(out_dir, "sweep.csv"),
              ["parameter", "estimate", "std_err", "gate_lo", "gate_hi", "pass"], rows)
    hs = np.asarray(config["h_grid"], dtype=float)
    slope = float(np.polyfit(np.log(hs), np.log(np.maximum(biases, 1e-300)), 1)[0])
    summary = {
        "experiment": "sweep_h",
        "observable": obs_id,
        "oracle_value": oracle_value,
        "slope": slope,
        "gate": [gate_lo, gate_hi],
        "pass": bool(gate_lo <= slope <= gate_hi),
    }
    write_json(os.path.join(out_dir, "summary.json"), {**summary, "config": config})
    return summary


def _run_sweep_n(config, out_dir, threads=1):
    _require(config, "model", "chain", "init", "n_grid", "reps", "observable", "oracle_mean")
    model = make_builtin_model(config["model"])
    obs_id, f, f_sup = _observable(config)
    if not math.isfinite(f_sup):
        raise ConfigurationError(f"observable {obs_id!r} is unbounded; risk needs bounded f")
    params = _chain_params(config)
    rows = []
    estimates = []
    for n_particles in config["n_grid"]:
        est = quadratic_risk(
            model, f, params, n_particles, config["reps"],
            config["oracle_mean"], config["init"], f_id=obs_id, threads=threads,
        )
        estimates.append(est)
        rows.append((n_particles, est.value, est.std_err, None, None, None))
    write_csv(os.path.join(out_dir, "sweep.csv"),
              ["parameter", "estimate", "std_err", "gate_lo", "gate_hi", "pass"], rows)
    decreasing = all(
        estimates[i].value > estimates[i + 1].value for i in range(len(estimates) - 1)
    )
    summary = {
        "experiment": "sweep_N",
        "observable": obs_id,
        "risk_decreasing_in_N": decreasing,
        "pass": decreasing,
    }
    write_json(os.path.join(out_dir, "summary.json"), {**summary, "config": config})
    return summary


def _run_converge(config, out_dir):
    _require(config, "model", "n_particles", "chain", "init")
    model = make_builtin_model(config["model"])
    density = _oracle_density(config, model)
    params = _chain_params(config)
    reps = config.get("reps", 64)
    stride = config.get("stride", 1)
    n_bins = config.get("n_bins", 50)
    n_particles = config["n_particles"]

    pooled = {}
    for k in range(reps):
        rng = RngStream(derive_seed(params.master_seed, k))
        init = sample_initial(config["init"], n_particles, model.space, rng)
        obs = Observer(lambda step, state: (step, state.positions[:, 0].copy()), stride=stride)
        run_chain(model, init, params, [obs], rng)
        for step, xs in obs.records:
            pooled.setdefault(step, []).append(xs)

    steps = sorted(pooled)
    rows = []
    tv_series = []
    for step in steps:
        samples = np.concatenate(pooled[step])
        tv = histogram_divergence(samples, density, n_bins=n_bins, kind="tv")
        kl = histogram_divergence(samples, density, n_bins=n_bins, kind="kl")
        tv_series.append(tv)
        rows.append((step, tv, kl))
    write_csv(os.path.join(out_dir, "series.csv"), ["step", "tv", "kl"], rows)

    tv_series = np.asarray(tv_series)
    floor = float(np.median(tv_series[-max(3, len(tv_series) // 5):]))
    start, end = decaying_segment(tv_series, floor)
    fit = fit_geometric_rate(tv_series[start:end])
    rate_per_step = fit.rate ** (1.0 / stride)  # records are stride steps apart
    kappa = contraction_constants(params.gamma, config.get("rho", 1.0)).kappa
    gate = 1.0 / (1.0 + kappa * params.h) + 0.02
    summary = {
        "experiment": "converge",
        "rate": rate_per_step,
        "r_squared": fit.r_squared,
        "segment": [int(start), int(end)],
        "tv_floor": floor,
        "rate_gate": gate,
        "pass": bool(rate_per_step <= gate and fit.r_squared > 0.9),
    }
    write_json(os.path.join(out_dir, "summary.json"), {**summary, "config": config})
    return summary


def _random_states(model, n_particles, scales, n_states, rng):
    states = []
    for j in range(n_states):
        scale = scales[j % len(scales)]
        if model.space.is_torus:
            positions = rng.uniforms(n_particles * model.space.d).reshape(
                n_particles, model.space.d
            )
        else:
            positions = scale * rng.normal_matrix((n_particles, model.space.d))
        velocities = scale * rng.normal_matrix((n_particles, model.space.d))
        states.append(ParticleState(positions, velocities, model.space))
    return states


def _run_lyapunov_check(config, out_dir):
    _require(config, "model", "n_particles", "chain", "h_grid")
    model = make_builtin_model(config["model"])
    gamma = config["chain"]["gamma"]
    seed = config["chain"].get("seed", 0)
    n_states = config.get("n_states", 100)
    m_draws = config.get("m_draws", 10_000)
    scales = config.get("state_scales", [0.5, 1.0, 3.0])
    n_particles = config["n_particles"]
    states = _random_states(model, n_particles, scales, n_states, RngStream(seed))

    rows = []
    failures = []
    summary = {"experiment": "lyapunov_check"}
    if model.space.is_torus:
        spec = LyapunovSpec(kind=VELOCITY_SIXTH)
        for h in config["h_grid"]:
            params = ChainParams(h=h, gamma=gamma, n_steps=1, master_seed=seed)
            for idx, state in enumerate(states):
                report = estimate_kernel_drift(
                    model, state, params, spec, m_draws=m_draws,
                    rng=RngStream(derive_seed(seed, 1)),
                )
                rows.append((
                    idx, h, report.pv_estimate, report.pv_std_err,
                    report.rhs_bound, report.margin_sigmas, report.holds,
                ))
                if not report.holds:
                    failures.append({"state": idx, "h": h})
        write_csv(
            os.path.join(out_dir, "drift.csv"),
            ["state", "h", "pv_estimate", "pv_std_err", "rhs_bound", "margin_sigmas", "holds"],
            rows,
        )
        summary.update({"mode": "torus_bound", "failures": failures, "pass": not failures})
    else:
        spec = LyapunovSpec.for_model(model, gamma, n_particles)
        slope_rows = []
        for h in config["h_grid"]:
            params = ChainParams(h=h, gamma=gamma, n_steps=1, master_seed=seed)
            consts = lyapunov_constants(model.space, gamma, model.coeffs, n_particles)
            fit = drift_slope_regression(
                model, states, params, spec, m_draws=m_draws, seed=derive_seed(seed, 1)
            )
            gate = 1.0 - consts.theta * h + 2.0 * fit.slope_std_err
            ok = fit.slope <= gate
            slope_rows.append((h, fit.slope, fit.slope_std_err, None, gate, ok))
            if not ok:
                failures.append({"h": h, "slope": fit.slope, "gate": gate})
        write_csv(
            os.path.join(out_dir, "drift.csv"),
            ["parameter", "estimate", "std_err", "gate_lo", "gate_hi", "pass"],
            slope_rows,
        )
        summary.update({"mode": "euclidean_slope", "failures": failures, "pass": not failures})
    write_json(os.path.join(out_dir, "summary.json"), {**summary, "config": config})
    return summary


def _run_oracle(config, out_dir):
    _require(config, "model")
    model = make_builtin_model(config["model"])
    density = _oracle_density(config, model)
    rows = list(zip(density.centers, density.values))
    write_csv(os.path.join(out_dir, "density.csv"), ["x", "density"], rows)
    return {}


def _run_constants(config, out_dir):
    _require(config, "gamma", "rho")
    constants = contraction_constants(
        config["gamma"], config["rho"],
        c1_hat=config.get("c1_hat", 0.0), delta_n=config.get("delta_n", 0.0),
    )
    payload = {
        "a": constants.a,
        "kappa": constants.kappa,
        "c2": constants.c2,
        "rho": constants.rho,
        "delta_n": constants.delta_n,
        "c1_hat": constants.c1_hat,
        "gamma": constants.gamma,
    }
    if "lsi" in config:
        report = lsi_constants(
            LsiConstants(**config["lsi"]),
            config.get("n_particles", 1),
            config.get("d", 1),
        )
        payload["lsi"] = {
            "lambda_tilde": report.lambda_tilde,
            "delta_n": report.delta_n,
            "r_entropy": report.r_entropy,
            "eta_n": report.eta_n,
            "rho_prime_star": report.rho_prime_star,
            "rho_prime_reason": report.rho_prime_reason,
            "rho_star": report.rho_star,
            "rho_star_reason": report.rho_star_reason,
        }
    if "model" in config:
        model = make_builtin_model(config["model"])
        consts = lyapunov_constants(
            model.space, config["gamma"], model.coeffs, config.get("n_particles", 1)
        )
        if model.space.is_torus:
            payload["lyapunov"] = {"torus_additive": consts.torus_additive}
        else:
            payload["lyapunov"] = {
                "alpha": consts.alpha, "theta": consts.theta, "lambda0": consts.lambda0,
            }
    write_json(os.path.join(out_dir, "constants.json"), {**payload, "config": config})
    return payload


def _run_risk(config, out_dir, threads=1):
    _require(config, "model", "n_particles", "chain", "init", "reps", "observable")
    model = make_builtin_model(config["model"])
    obs_id, f, f_sup = _observable(config)
    if not math.isfinite(f_sup):
        raise ConfigurationError(f"observable {obs_id!r} is unbounded; risk needs bounded f")
    oracle_value = (
        config["oracle_mean"]
        if "oracle_mean" in config
        else reference_expectation(_oracle_density(config, model), lambda x: f(x[:, None]))
    )
    params = _chain_params(config)
    estimate = quadratic_risk(
        model, f, params, config["n_particles"], config["reps"],
        oracle_value, config["init"], f_id=obs_id, threads=threads,
    )
    payload = {
        "value": estimate.value,
        "std_err": estimate.std_err,
        "reps": estimate.reps,
        "oracle_mean": oracle_value,
        "config": config,
    }
    write_json(os.path.join(out_dir, "risk.json"), payload)
    return payload


def run_experiment(config, out_dir=None, seed=None, threads=None):
    """Run one experiment described by a validated config mapping.

    ``seed`` overrides the config seed; outputs land in ``out_dir`` (or the
    config's ``out_dir``).  Returns the summary payload of the experiment.
    """
    config = validate_config(dict(config))
    if seed is not None:
        config.setdefault("chain", {})
        config["chain"] = {**config["chain"], "seed": int(seed)}
    out_dir = out_dir or config.get("out_dir")
    if not out_dir:
        raise ConfigurationError("no output directory given (config out_dir or --out)")
    os.makedirs(out_dir, exist_ok=True)
    threads = resolve_threads(threads)

    kind = config["kind"]
    write_json(os.path.join(out_dir, "config.json"), config)
    if kind == "sample":
        return _run_sample(config, out_dir)
    if kind == "sweep_h":
        return _run_sweep_h(config, out_dir)
    if kind == "sweep_N":
        return _run_sweep_n(config, out_dir, threads=threads)
    if kind == "converge":
        return _run_converge(config, out_dir)
    if kind == "lyapunov_check":
        return _run_lyapunov_check(config, out_dir)
    if kind == "oracle":
        return _run_oracle(config, out_dir)
    if kind == "constants":
        return _run_constants(config, out_dir)
    if kind == "risk":
        return _run_risk(config, out_dir, threads=threads)
    raise ConfigurationError(f"unknown experiment kind {kind!r}")


def emit_report(results_dir):
    """Summarize an experiment directory: pass/fail text plus a file index.

    Returns the report text.  Raises :class:`MissingArtifactError` when the
    directory lacks the experiment outputs.
    """
    if not os.path.isdir(results_dir):
        raise MissingArtifactError(f"no results directory {results_dir!r}")
    files = sorted(
        f for f in os.listdir(results_dir) if os.path.isfile(os.path.join(results_dir, f))
    )
    if "config.json" not in files:
        raise MissingArtifactError(
            f"{results_dir!r} has no config.json; not an experiment directory"
        )
    with open(os.path.join(results_dir, "config.json"), encoding="utf-8") as fh:
        config = json.load(fh)
    kind = config.get("kind", "?")
    lines = [f"experiment: {kind}"]
    summary_path = os.path.join(results_dir, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path, encoding="utf-8") as fh:
            summary = json.load(fh)
        verdict = summary.get("pass")
        if verdict is not None:
            lines.append("PASS" if verdict else "FAIL")
        if not summary.get("pass", True) and summary.get("failures"):
            for failure in summary["failures"]:
                lines.append("  failed: " + json.dumps(failure, sort_keys=True))
        for key in ("slope", "rate", "r_squared", "rate_gate", "tv_floor"):
            if key in summary:
                lines.append(f"  {key} = {summary[key]}")
    else:
        expected = {"constants": "constants.json", "risk": "risk.json",
                    "oracle": "density.csv", "sample": "trajectory.csv"}.get(kind)
        if expected and expected not in files:
            raise MissingArtifactError(f"{results_dir!r} lacks {expected}")
        lines.append("OK (no gates declared)")
    report_text = "\n".join(lines) + "\n"
    with open(os.path.join(results_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report_text)
    index = {
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "experiment": kind,
        "files": [
            {"name": f, "bytes": os.path.getsize(os.path.join(results_dir, f))}
            for f in files
        ],
    }
    write_json(os.path.join(results_dir, "index.json"), index)
    return report_text
