"""Command-line front end.

Verbs: realize (target map -> schedule + error report), maurey (sampling
rate study), kr (triangular transport tables), counterexample (pushforward
TV counterexamples), simulate (trajectory streaming), evaluate (schedule
vs target metrics).  One JSON config per run; defaults are echoed into the
report so identical config + seed reproduce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from reluflow.kr import GridDensity, kr_map
from reluflow.maurey import (
    TimeMixture,
    builtin_mixture,
    rate_fit,
    reference_flow,
    run_errors,
    sample_schedule,
)
from reluflow.metrics import (
    oscillation_counterexample,
    rounding_counterexample,
)
from reluflow.pipeline import map_errors, realize_target
from reluflow.schedule import ControlSchedule, Segment, flow_points
from reluflow.targets import density_from_spec, get_target


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _emit(out_path, text: str) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _config_echo(defaults: dict, config: dict, seed: int) -> dict:
    cfg = {**defaults, **config}
    cfg["seed"] = seed
    return cfg


def _load_schedule(spec) -> ControlSchedule:
    if isinstance(spec, dict):
        return ControlSchedule.from_dict(spec)
    return ControlSchedule.load(spec)


def _density(spec, shape) -> GridDensity:
    """Density from CLI config: explicit values, generic names, or catalog."""
    if isinstance(spec, dict):
        return GridDensity(np.asarray(spec["values"], dtype=float))
    shape = tuple(int(n) for n in shape)
    if spec == "uniform":
        return GridDensity.uniform(shape)
    if spec == "2x" and len(shape) == 1:
        return GridDensity.from_function(
            lambda X: np.maximum(2 * X[:, 0], 1e-9), shape)
    return density_from_spec(spec, shape)


# --------------------------------------------------------------------------
def cmd_realize(config: dict, out, seed: int) -> int:
    defaults = {
        "target": "sine-shear", "target_params": {}, "epsilon": 0.1,
        "mesh_h": 0.125, "cube_h": None, "p": 2.0, "resolution": 128,
        "samples_per_core": 4, "schedule_out": None,
    }
    cfg = _config_echo(defaults, config, seed)
    target = get_target(cfg["target"], cfg["target_params"])
    result = realize_target(
        target, epsilon=float(cfg["epsilon"]), mesh_h=float(cfg["mesh_h"]),
        cube_h=None if cfg["cube_h"] is None else float(cfg["cube_h"]),
        p=float(cfg["p"]), seed=seed, resolution=int(cfg["resolution"]),
        samples_per_core=int(cfg["samples_per_core"]))
    cfg["cube_h"] = result.cube_h
    sched_path = cfg["schedule_out"]
    if sched_path is None:
        base = Path(out) if out is not None else Path("schedule.json")
        sched_path = str(base.with_suffix("")) + ".schedule.json"
        cfg["schedule_out"] = sched_path
    result.schedule.save(sched_path)
    report = {"config": cfg, "schedule_file": str(sched_path),
              **result.to_report()}
    _emit(out, _json_text(report))
    return 0 if result.ok else 1


def cmd_maurey(config: dict, out, seed: int) -> int:
    defaults = {
        "mixture": "builtin", "N": [16, 32, 64, 128, 256, 512],
        "n_seeds": 20, "n_eval": 64, "step": 1e-3, "eval_radius_frac": 0.5,
    }
    cfg = _config_echo(defaults, config, seed)
    m = (builtin_mixture() if cfg["mixture"] == "builtin"
         else TimeMixture.from_dict(cfg["mixture"]))
    rng = np.random.default_rng(seed)
    radius = m.R * float(cfg["eval_radius_frac"])
    pts = rng.uniform(-radius / np.sqrt(m.d), radius / np.sqrt(m.d),
                      size=(int(cfg["n_eval"]), m.d))
    reference = reference_flow(m, pts, step=float(cfg["step"]))
    rows = []
    means_e, means_d = [], []
    for N in cfg["N"]:
        es, ds = [], []
        for s in range(int(cfg["n_seeds"])):
            run = sample_schedule(m, int(N), seed + s)
            e, d = run_errors(run, m, pts, reference=reference)
            rows.append((int(N), seed + s, e, d))
            es.append(e)
            ds.append(d)
        means_e.append((int(N), float(np.mean(es))))
        means_d.append((int(N), float(np.mean(ds))))
    slope_e = rate_fit(means_e)
    slope_d = rate_fit(means_d)
    rows.append(("slope_e", "", slope_e, ""))
    rows.append(("slope_delta", "", "", slope_d))
    text = "# config " + json.dumps(cfg, sort_keys=True) + "\n"
    text += _csv_text(("N", "seed", "e_N", "delta_N"), rows)
    _emit(out, text)
    return 0


def cmd_kr(config: dict, out, seed: int) -> int:
    defaults = {"rho0": "uniform", "rho1": "tilted", "shape": [65, 65],
                "grid": 9, "points": None}
    cfg = _config_echo(defaults, config, seed)
    rho0 = _density(cfg["rho0"], cfg["shape"])
    rho1 = _density(cfg["rho1"], cfg["shape"])
    phi = kr_map(rho0, rho1)
    d = rho0.d
    if cfg["points"] is not None:
        X = np.atleast_2d(np.asarray(cfg["points"], dtype=float))
    else:
        n = int(cfg["grid"])
        axes = [np.linspace(0.0, 1.0, n)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([g.ravel() for g in mesh], axis=-1)
    Y = phi(X)
    header = tuple(f"x{k}" for k in range(d)) + tuple(
        f"phi{k}" for k in range(d))
    rows = [tuple(x) + tuple(y) for x, y in zip(X, Y)]
    text = "# config " + json.dumps(cfg, sort_keys=True) + "\n"
    text += _csv_text(header, rows)
    _emit(out, text)
    return 0


def cmd_counterexample(config: dict, out, seed: int) -> int:
    defaults = {"kind": "oscillation", "alpha": 0.1, "h": 1.0 / 64,
                "refine": 8, "resolution": 200001}
    cfg = _config_echo(defaults, config, seed)
    rows = []
    if cfg["kind"] == "oscillation":
        sup, tv = oscillation_counterexample(
            float(cfg["alpha"]), float(cfg["h"]),
            resolution=int(cfg["resolution"]))
        params = f"alpha={_fmt(float(cfg['alpha']))};h={_fmt(float(cfg['h']))}"
        rows.append(("sup_displacement", params, sup))
        rows.append(("pushforward_tv", params, tv))
    elif cfg["kind"] == "rounding":
        tv = rounding_counterexample(float(cfg["h"]), refine=int(cfg["refine"]))
        params = f"h={_fmt(float(cfg['h']))};refine={int(cfg['refine'])}"
        rows.append(("histogram_tv", params, tv))
    else:
        raise ValueError(f"unknown counterexample kind {cfg['kind']!r}")
    text = "# config " + json.dumps(cfg, sort_keys=True) + "\n"
    text += _csv_text(("metric", "params", "value"), rows)
    _emit(out, text)
    return 0


def cmd_simulate(config: dict, out, seed: int) -> int:
    defaults = {"schedule": None, "points": [[0.0]], "substeps": 4}
    cfg = _config_echo(defaults, config, seed)
    if cfg["schedule"] is None:
        raise ValueError("simulate requires a 'schedule' (path or object)")
    sched = _load_schedule(cfg["schedule"])
    X = np.atleast_2d(np.asarray(cfg["points"], dtype=float))
    n, d = X.shape
    logdet = np.zeros(n)
    t = 0.0
    rows = []

    def snapshot():
        for i in range(n):
            rows.append((i, t) + tuple(X[i]) + (logdet[i],))

    snapshot()
    k = int(cfg["substeps"])
    for seg in sched.segments:
        piece = ControlSchedule((Segment(seg.neuron, seg.duration / k),))
        for _ in range(k):
            X, ld = flow_points(X, piece)
            logdet = logdet + ld
            t += seg.duration / k
            snapshot()
    header = ("point", "t") + tuple(f"x{j}" for j in range(d)) + ("logdet",)
    text = "# config " + json.dumps(cfg, sort_keys=True) + "\n"
    text += _csv_text(header, rows)
    _emit(out, text)
    return 0


def cmd_evaluate(config: dict, out, seed: int) -> int:
    defaults = {"schedule": None, "target": "identity", "target_params": {},
                "p": 2.0, "resolution": 128}
    cfg = _config_echo(defaults, config, seed)
    if cfg["schedule"] is None:
        raise ValueError("evaluate requires a 'schedule' (path or object)")
    sched = _load_schedule(cfg["schedule"])
    target = get_target(cfg["target"], cfg["target_params"])
    lp, tv = map_errors(target, sched, float(cfg["p"]),
                        int(cfg["resolution"]))
    rows = [("lp_error", lp), ("tv_error", tv),
            ("n_segments", len(sched)), ("switch_count", sched.switch_count),
            ("total_duration", sched.total_duration)]
    text = "# config " + json.dumps(cfg, sort_keys=True) + "\n"
    text += _csv_text(("metric", "value"), rows)
    _emit(out, text)
    return 0


_COMMANDS = {
    "realize": cmd_realize,
    "maurey": cmd_maurey,
    "kr": cmd_kr,
    "counterexample": cmd_counterexample,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reluflow",
        description="Piecewise-constant single-neuron flow schedules: "
                    "construction, sampling, transport, and diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="JSON config file (defaults echoed into report)")
        p.add_argument("--out", default=None,
                       help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for grid sweeps (reports only; "
                            "computation is deterministic regardless)")
    args = parser.parse_args(argv)
    config = {}
    if args.config is not None:
        config = json.loads(Path(args.config).read_text())
    return _COMMANDS[args.command](config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
