"""Command-line batch runner.

    hybridsim <mode> --config run.json [--seed N] [--allow-inadmissible] [--out DIR]

Exit codes: 0 success, 2 invalid configuration or inadmissible model,
3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import hashlib
import importlib.metadata
import json
import os
import platform
import sys
import warnings
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import __version__, _config
from .discrete import integrate_discrete
from .errors import HybridSimError, NumericalError, SchemaError, ValidationError
from .grid import integrate_grid
from .jump import ensemble_estimate, run_jump_ensemble
from .kernels import resolve_backend
from .model import DiffusiveModel, DiscreteModel, load_model, model_from_dict, summarize_reports, validate_model
from .models import build_preset, build_three_site, circle_state, parse_preset
from .noise import NoiseSpec
from .state import (
    Grid,
    HybridStateDiscrete,
    HybridStateGrid,
    TrajectoryState,
    bloch_field,
    concentrate,
    decode_complex,
    encode_complex,
    loads_state,
    state_to_dict,
)
from .unravel import ensemble_bins, grid_bins, replay_monitored, run_diffusive_ensemble

MODES = ("hme-discrete", "hme-grid", "unravel-jump", "unravel-diffusive", "unravel-monitored", "validate")
STOCHASTIC = ("unravel-jump", "unravel-diffusive", "unravel-monitored")

_number_or_list = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]}
_int_or_list = {"oneOf": [{"type": "integer", "minimum": 3},
                          {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1}]}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["mode", "model", "numerics"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "model": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "preset": {"type": "string"},
                "file": {"type": "string"},
                "inline": {"type": "object"},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "minimum": 0},
                "grid": {
                    "type": "object",
                    "required": ["n", "lower", "upper"],
                    "additionalProperties": False,
                    "properties": {
                        "n": _int_or_list,
                        "lower": _number_or_list,
                        "upper": _number_or_list,
                        "periodic": {"type": "boolean"},
                    },
                },
                "n_trajectories": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**63 - 1},
                "scheme": {"enum": ["rk4", "euler"]},
                "normalization": {"enum": ["dynamic", "raw"]},
                "state": {"enum": ["pure", "mixed"]},
                "derivative": {"enum": ["central", "spectral"]},
                "cfl": {"type": "number", "exclusiveMinimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
            },
        },
        "initial": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["pure", "circle", "gaussian", "file"]},
                "x": {},
                "psi": {"type": "array"},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "path": {"type": "string"},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "xi_xi_choice": {"enum": ["zero", "monitored", "custom"]},
                "C": {"type": "array"},
                "target": {"enum": ["full", "reduced"]},
                "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "sample_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "formats": {"type": "array", "items": {"enum": ["json", "csv"]}},
                "export_trajectories": {"type": "integer", "minimum": 0},
                "bins": {"type": "integer", "minimum": 1},
            },
        },
        "compare": {"type": "boolean"},
    },
    "allOf": [
        {
            "if": {"properties": {"mode": {"enum": list(STOCHASTIC)}}, "required": ["mode"]},
            "then": {"properties": {"numerics": {"required": ["dt", "t_end", "n_trajectories", "master_seed"]}}},
        },
        {
            "if": {"properties": {"mode": {"enum": ["hme-discrete", "hme-grid"]}}, "required": ["mode"]},
            "then": {"properties": {"numerics": {"required": ["dt", "t_end"]}}},
        },
        {
            "if": {"properties": {"mode": {"const": "hme-grid"}}, "required": ["mode"]},
            "then": {"properties": {"numerics": {"required": ["grid"]}}},
        },
    ],
}


@dataclass
class RunConfig:
    mode: str
    model: dict
    numerics: dict
    initial: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    compare: bool = True
    raw: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.numerics.get("master_seed")

    def canonical_json(self):
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else "/"


def parse_config(text, mode=None, seed=None):
    """Parse and validate a JSON run configuration.

    ``mode`` and ``seed`` (from the command line) are merged in before
    validation.  Raises :class:`SchemaError` listing every violation with
    its JSON pointer.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([("/", f"invalid JSON: {exc.msg} (line {exc.lineno})")]) from None
    if not isinstance(data, dict):
        raise SchemaError([("/", "configuration must be a JSON object")])
    problems = []
    if mode is not None:
        if "mode" in data and data["mode"] != mode:
            problems.append(("/mode", f"config mode {data['mode']!r} conflicts with command-line mode {mode!r}"))
        data["mode"] = mode
    if seed is not None:
        if not isinstance(data.get("numerics"), dict):
            data.setdefault("numerics", {})
        if isinstance(data["numerics"], dict):
            data["numerics"]["master_seed"] = int(seed)
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    for err in sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        path = list(err.absolute_path)
        if err.validator == "required":
            missing = err.message.split("'")[1] if "'" in err.message else ""
            path.append(missing)
        problems.append((_pointer(path), err.message))
    if problems:
        raise SchemaError(problems)
    return RunConfig(
        mode=data["mode"],
        model=data["model"],
        numerics=data["numerics"],
        initial=data.get("initial", {}),
        noise=data.get("noise", {}),
        output=data.get("output", {}),
        compare=data.get("compare", True),
        raw=data,
    )


# output -----------------------------------------------------------------------

def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex(obj)
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class Collector:
    """Writes every output file of a run; the only place touching the disk."""

    def __init__(self, directory):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self.files = []

    def _path(self, name):
        self.files.append(name)
        return os.path.join(self.directory, name)

    def json(self, name, obj):
        with open(self._path(name), "w", encoding="utf-8") as fh:
            json.dump(to_jsonable(obj), fh, sort_keys=True, indent=1)
            fh.write("\n")

    def jsonl(self, name, records):
        with open(self._path(name), "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(to_jsonable(r), sort_keys=True) + "\n")

    def csv(self, name, header, rows):
        with open(self._path(name), "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


# model/initial construction ---------------------------------------------------

def _build_model(cfg, base_dir):
    src = cfg.model
    if "preset" in src:
        try:
            return build_preset(src["preset"])
        except ValueError as exc:
            raise SchemaError([("/model/preset", str(exc))]) from None
    if "file" in src:
        path = src["file"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return load_model(path)
    return model_from_dict(src["inline"])


def _grid(cfg):
    g = cfg.numerics.get("grid")
    if g is None:
        return None
    n = np.atleast_1d(g["n"])
    lo = np.broadcast_to(np.atleast_1d(g["lower"]), n.shape)
    up = np.broadcast_to(np.atleast_1d(g["upper"]), n.shape)
    return Grid.box(tuple(int(v) for v in n), tuple(map(float, lo)), tuple(map(float, up)), g.get("periodic", True))


def _psi(spec, d):
    if "psi" in spec:
        psi = decode_complex(spec["psi"]) if np.ndim(spec["psi"]) > 1 else np.asarray(spec["psi"], dtype=complex)
    else:
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1.0
    if psi.shape != (d,):
        raise SchemaError([("/initial/psi", f"expected {d} amplitudes")])
    return psi / np.linalg.norm(psi)


def _initial(cfg, model, grid, base_dir):
    spec = cfg.initial
    kind = spec.get("kind")
    if kind == "file":
        path = spec["path"] if os.path.isabs(spec["path"]) else os.path.join(base_dir, spec["path"])
        with open(path, encoding="utf-8") as fh:
            return loads_state(fh.read())
    if isinstance(model, DiscreteModel):
        if kind is None and cfg.model.get("preset", "").startswith("three-site"):
            return build_three_site()[1]
        x = spec.get("x", model.points[0])
        if isinstance(x, list):
            x = tuple(x)
        return TrajectoryState(x, psi=_psi(spec, model.dim))
    if kind is None:
        name = parse_preset(cfg.model["preset"])[0] if "preset" in cfg.model else ""
        kind = "circle" if name == "two-level" and grid is not None else "pure"
    if kind == "circle":
        if grid is None or model.d != 2 or model.N != 1:
            raise SchemaError([("/initial/kind", "circle initial state needs a 1-D grid and a qubit")])
        return circle_state(grid)
    x = np.atleast_1d(np.asarray(spec.get("x", np.zeros(model.N)), dtype=float))
    psi = _psi(spec, model.d)
    if kind == "gaussian":
        if grid is None:
            raise SchemaError([("/numerics/grid", "gaussian initial state needs a grid")])
        return concentrate(grid, x, np.outer(psi, psi.conj()), spec.get("width"))
    return TrajectoryState(x, psi=psi)


def _sample_times(cfg):
    st = cfg.output.get("sample_times")
    if st is not None:
        return np.asarray(st, dtype=float)
    return np.array([0.0, float(cfg.numerics["t_end"])])


def _noise_spec(cfg):
    n = cfg.noise
    C = n.get("C")
    if C is not None:
        C = decode_complex(C) if np.ndim(C) > 2 else np.asarray(C, dtype=complex)
    return NoiseSpec(n.get("xi_xi_choice", "zero"), C, n.get("target", "full"), n.get("eta", 1.0))


def _validation(model, grid):
    if isinstance(model, DiscreteModel):
        return {"kind": "discrete", "admissible": True, "hermitian": True, "independent": True,
                "n_generators": model.n_generators}
    ok, reports = validate_model(model, grid=grid)
    out = summarize_reports(reports)
    out["kind"] = "diffusive"
    return out


# mode runners -------------------------------------------------------------

def _run_hme_discrete(cfg, model, init, col):
    if not isinstance(model, DiscreteModel):
        raise ValidationError("hme-discrete needs a discrete model")
    if isinstance(init, TrajectoryState):
        init = HybridStateDiscrete.pure(model.points, init.x, init.psi)
    ts = _sample_times(cfg)
    sol = integrate_discrete(init, model, cfg.numerics["t_end"], cfg.numerics["dt"], cfg.numerics.get("scheme", "rk4"),
                             ts)
    col.jsonl("states.jsonl", ({"t": float(t), "state": state_to_dict(sol.state(k))}
                               for k, t in enumerate(sol.times)))
    marg = np.trace(sol.blocks, axis1=-2, axis2=-1).real
    if "csv" in cfg.output.get("formats", ["json"]):
        col.csv("marginals.csv", ["t"] + [f"p[{p}]" for p in model.points],
                (np.concatenate([[t], m]) for t, m in zip(sol.times, marg)))
    return {
        "final_marginal": dict(zip(map(str, model.points), marg[-1])),
        "trace_drift": sol.trace_drift(),
        "min_eigenvalue": sol.min_eigenvalue(),
    }


def _run_hme_grid(cfg, model, grid, init, col, strict):
    if not isinstance(model, DiffusiveModel):
        raise ValidationError("hme-grid needs a diffusive model")
    if isinstance(init, TrajectoryState):
        init = concentrate(grid, np.atleast_1d(init.x), np.outer(init.psi, init.psi.conj()))
    ts = _sample_times(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = integrate_grid(init, model, cfg.numerics["t_end"], cfg.numerics["dt"], ts,
                             cfg.numerics.get("scheme", "rk4"), cfg.numerics.get("cfl", 0.25),
                             cfg.numerics.get("derivative", "central"), strict=False)
    marg = sol.marginals()
    col.json("marginal.json", {"times": sol.times, "nodes": grid.nodes().reshape(-1, grid.ndim),
                               "marginal": marg.reshape(len(sol.times), -1)})
    col.jsonl("states.jsonl", ({"t": float(t), "state": state_to_dict(sol.state(k))}
                               for k, t in enumerate(sol.times)))
    nodes = grid.nodes().reshape(-1, grid.ndim)
    w = grid.weights().ravel()
    mean = (marg.reshape(len(sol.times), -1) * w) @ nodes
    out = {
        "trace_drift": sol.trace_drift(),
        "total_trace": sol.total_trace(),
        "final_mean_x": mean[-1],
        "min_eigenvalue": float(np.linalg.eigvalsh(sol.blocks[-1]).min()),
    }
    if model.d == 2:
        _, s = bloch_field(sol.blocks)
        out["max_bloch_length"] = np.linalg.norm(s, axis=-1).reshape(len(sol.times), -1).max(axis=1)
    return out


def _run_jump(cfg, model, init, col, backend):
    if not isinstance(model, DiscreteModel):
        raise ValidationError("unravel-jump needs a discrete model")
    num = cfg.numerics
    ts = _sample_times(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ens = run_jump_ensemble(init, model, num["t_end"], num["dt"], num["n_trajectories"], num["master_seed"], ts,
                                num.get("normalization", "dynamic") == "dynamic", backend,
                                num.get("batch_size", 1024))
    est = ensemble_estimate(ens)
    col.json("ensemble.json", {"times": est.times, "points": model.points, "mean": est.mean,
                               "stderr": est.stderr, "n_trajectories": est.n})
    n_exp = min(cfg.output.get("export_trajectories", 0), ens.n_trajectories)
    if n_exp:
        col.jsonl("trajectories.jsonl", ({"trajectory": m, **r} for m in range(n_exp) for r in ens.records(m)))
    marg = np.trace(est.mean, axis1=-2, axis2=-1).real
    hits = ens.x[:, -1][:, None] == np.arange(len(model.points))[None]
    out = {
        "final_marginal": dict(zip(map(str, model.points), marg[-1])),
        "final_marginal_stderr": dict(zip(map(str, model.points), hits.std(axis=0, ddof=1) / np.sqrt(ens.n_trajectories)
                                          if ens.n_trajectories > 1 else np.zeros(len(model.points)))),
        "mean_jumps": float(ens.jumps[:, -1].mean()),
        "mean_jumps_stderr": float(ens.jumps[:, -1].std(ddof=1) / np.sqrt(ens.n_trajectories))
        if ens.n_trajectories > 1 else 0.0,
        "max_rate_dt": ens.max_rate_dt,
    }
    if cfg.compare:
        ref = integrate_discrete(HybridStateDiscrete.pure(model.points, init.x, init.psi) if isinstance(
            init, TrajectoryState) else init, model, num["t_end"], num["dt"], "rk4", ts)
        dev = np.abs(est.mean - ref.blocks)
        se = np.abs(est.stderr.real) + np.abs(est.stderr.imag)
        out["max_deviation_vs_hme"] = float(dev.max())
        out["max_deviation_in_stderr"] = float(np.max(np.where(se > 0, dev / np.where(se > 0, se, 1.0), 0.0)))
        out["reference_trace_drift"] = ref.trace_drift()
    return out


def _run_diffusive(cfg, model, grid, init, col, backend, monitored):
    if not isinstance(model, DiffusiveModel):
        raise ValidationError("diffusive unraveling needs a diffusive model")
    num = cfg.numerics
    ts = _sample_times(cfg)
    spec = NoiseSpec("monitored") if monitored else _noise_spec(cfg)
    mode = "monitored" if monitored else num.get("state", "pure")
    record = bool(cfg.output.get("export_trajectories", 0))
    ens = run_diffusive_ensemble(init, model, num["t_end"], num["dt"], num["n_trajectories"], num["master_seed"], spec,
                                 mode, ts, backend, num.get("batch_size", 2048), record_noise=record)
    M = ens.n_trajectories
    x = ens.x
    purity = np.stack([ens.purity(s) for s in range(len(ens.times))], axis=1)

    def se(v):
        return v.std(axis=0, ddof=1) / np.sqrt(M) if M > 1 else np.zeros(v.shape[1:])

    col.json("ensemble.json", {
        "times": ens.times,
        "mean_x": x.mean(axis=0), "stderr_x": se(x),
        "mean_purity": purity.mean(axis=0), "stderr_purity": se(purity),
        "n_trajectories": M,
    })
    out = {
        "final_mean_x": x[:, -1].mean(axis=0), "final_mean_x_stderr": se(x[:, -1]),
        "final_mean_purity": float(purity[:, -1].mean()), "final_mean_purity_stderr": float(se(purity[:, -1])),
    }
    n_exp = min(cfg.output.get("export_trajectories", 0), M)
    if n_exp:
        col.jsonl("trajectory_x.jsonl", ({"trajectory": m, "t": float(t), "x": ens.x[m, s]}
                                         for m in range(n_exp) for s, t in enumerate(ens.times)))
        key = "sigma" if ens.mixed else "psi"
        col.jsonl(f"trajectory_{key}.jsonl", ({"trajectory": m, "t": float(t), key: ens.states[m, s]}
                                              for m in range(n_exp) for s, t in enumerate(ens.times)))
        col.jsonl("trajectory_noise.jsonl", ({"trajectory": m, **{k: v[m] for k, v in ens.noise.items()}}
                                             for m in range(n_exp)))
    if monitored and n_exp:
        # replay the first exported trajectory from its classical record alone
        n_steps = int(round(num["t_end"] / num["dt"]))
        full = run_diffusive_ensemble(init, model, num["t_end"], num["dt"], 1, num["master_seed"], spec, mode,
                                      np.arange(n_steps + 1) * num["dt"], backend)
        rep = replay_monitored(full.states[0, 0], full.x[0], model, num["dt"], backend)
        out["replay_max_difference"] = float(np.max(np.abs(rep - full.states[0])))
    if cfg.compare and grid is not None and isinstance(init, HybridStateGrid) and grid.ndim == 1 and model.d == 2:
        bins = cfg.output.get("bins", 16)
        npb = grid.shape[0] // bins
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            dt_grid = _grid_dt(model, grid, num["t_end"])
            sol = integrate_grid(init, model, num["t_end"], dt_grid, [num["t_end"]])
        from .state import PAULI

        obs = np.concatenate([np.eye(2)[None], PAULI])
        mean, err = ensemble_bins(ens, len(ens.times) - 1, grid, npb, obs)
        ref = grid_bins(sol.blocks[-1], grid, npb, obs)
        z = np.abs(mean - ref) / np.where(err > 0, err, np.inf)
        out["max_bin_deviation_in_stderr"] = float(z.max())
        out["grid_reference_dt"] = dt_grid
    return out


def _grid_dt(model, grid, t_end, c=0.25):
    from .grid import cfl_limit

    lim = min(cfl_limit(model, grid, c), t_end if t_end > 0 else 1.0)
    return t_end / np.ceil(t_end / lim) if t_end > 0 else lim


# entry points -------------------------------------------------------------

def _versions():
    v = {"hybridsim": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "jsonschema", "numba"):
        try:
            v[pkg] = importlib.metadata.version(pkg)
        except importlib.metadata.PackageNotFoundError:
            pass
    return v


def run(cfg, out_dir=None, allow_inadmissible=False, base_dir="."):
    """Execute a parsed configuration; returns the process exit code."""
    out_dir = out_dir or cfg.output.get("directory", "hybridsim-out")
    try:
        col = Collector(out_dir)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 4
    try:
        backend = resolve_backend()
        model = _build_model(cfg, base_dir)
        grid = _grid(cfg)
        col.json("manifest.json", {
            "config_sha256": cfg.digest(), "config": cfg.raw, "seed": cfg.seed, "mode": cfg.mode,
            "backend": backend, "versions": _versions(),
        })
        report = _validation(model, grid)
        if cfg.mode == "validate" or isinstance(model, DiffusiveModel):
            col.json("validation.json", report)
        if not report["admissible"] and not allow_inadmissible:
            print("error: model is not admissible (see validation.json)", file=sys.stderr)
            return 2
        if cfg.mode == "validate":
            col.json("summary.json", {"mode": cfg.mode, "admissible": report["admissible"]})
            return 0
        init = _initial(cfg, model, grid, base_dir)
        if cfg.mode == "hme-discrete":
            summary = _run_hme_discrete(cfg, model, init, col)
        elif cfg.mode == "hme-grid":
            summary = _run_hme_grid(cfg, model, grid, init, col, not allow_inadmissible)
        elif cfg.mode == "unravel-jump":
            summary = _run_jump(cfg, model, init, col, backend)
        else:
            summary = _run_diffusive(cfg, model, grid, init, col, backend, cfg.mode == "unravel-monitored")
        summary["mode"] = cfg.mode
        summary["admissible"] = report["admissible"]
        col.json("summary.json", summary)
        return 0
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except HybridSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ValidationError.exit_code


def main(argv=None):
    parser = argparse.ArgumentParser(prog="hybridsim", description="Hybrid classical-quantum master equation runs.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    parser.add_argument("--allow-inadmissible", action="store_true",
                        help="run models that violate complete positivity")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 4
    try:
        cfg = parse_config(text, mode=args.mode, seed=args.seed)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    base = os.path.dirname(os.path.abspath(args.config))
    return run(cfg, args.out, args.allow_inadmissible, base)


if __name__ == "__main__":
    sys.exit(main())
