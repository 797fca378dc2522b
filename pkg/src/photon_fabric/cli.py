"""Command-line surface for the toolkit.

Subcommands: optimize, evaluate, sweep, circuit, route, simulate, report.
Every command reads its settings from flags, optionally seeded by a JSON
config file (flags win), validates them, and writes self-describing
artifacts into --out. Exit codes: 0 success, 2 config or schema problem,
3 numerical failure, 4 unroutable request.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, devices, fabric, io, netsim, routing, topopt
from .errors import (Diverged, NoResonance, SchemaError, SolverFailure,
                     Unroutable, UnsupportedSize)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3
EXIT_UNROUTABLE = 4

DEVICE_PRESETS = ("splitter", "crossover", "resonator")
SCALES = ("desk", "full")

PROBLEM_MAKERS = {
    "splitter": devices.make_splitter_problem,
    "crossover": devices.make_crossover_problem,
    "resonator": devices.make_resonator_problem,
}


# --- config plumbing ----------------------------------------------------------

def _effective_config(args, keys):
    """Merge the optional config file with explicit flags; flags win."""
    cfg = {}
    if getattr(args, "config", None):
        doc = io.read_json(args.config)
        doc.pop("toolkit", None)
        cfg.update(doc)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _provenance(cfg):
    return {"config_sha256": _config_hash(cfg)}


def _need(cfg, key, kind, choices=None):
    if key not in cfg or cfg[key] is None:
        raise SchemaError(f"config field {key!r} is required")
    try:
        val = kind(cfg[key])
    except (TypeError, ValueError):
        raise SchemaError(f"config field {key!r} must be {kind.__name__}")
    if choices is not None and val not in choices:
        raise SchemaError(f"config field {key!r} must be one of {choices}")
    cfg[key] = val
    return val


def _outdir(cfg):
    out = cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _geometry(scale):
    return devices.desk_geometry() if scale == "desk" else devices.full_geometry()


# --- optimize -----------------------------------------------------------------

def cmd_optimize(args):
    cfg = _effective_config(args, ("device", "scale", "seed", "iterations",
                                   "out"))
    device = _need(cfg, "device", str, DEVICE_PRESETS)
    scale = cfg.setdefault("scale", "desk")
    _need(cfg, "scale", str, SCALES)
    seed = _need(cfg, "seed", int)
    iters = int(cfg.setdefault("iterations", 200))
    if iters < 1:
        raise SchemaError("iterations must be a positive integer")
    out = _outdir(cfg)

    if scale == "full":
        print("warning: full-scale optimization solves a large system per "
              "iteration and can run for hours", file=sys.stderr)
    problem = PROBLEM_MAKERS[device](_geometry(scale))
    result = topopt.optimize(problem, iters, seed)

    prov = _provenance(cfg)
    io.write_density_csv(os.path.join(out, "density.csv"),
                         result.rho_binary, meta=prov)
    io.write_history_csv(os.path.join(out, "history.csv"),
                         result.history, meta=prov)
    io.write_density_png(os.path.join(out, "density.png"), result.rho_binary)
    metrics = [m.__dict__ for m in
               devices.evaluate_device(result.rho_binary, problem)]
    io.write_json(os.path.join(out, "metrics.json"), {
        "command": "optimize", "device": device, "scale": scale,
        "seed": seed, "iterations": iters,
        "objective": result.objective,
        "binary_objective": result.binary_objective,
        "binary_powers": result.binary_powers,
        "conditions": metrics,
        "converged": bool(np.isfinite(result.binary_objective)),
    }, meta=prov)
    for name, power in sorted(result.binary_powers.items()):
        print(f"{name}: {power:.4f}")
    print(f"objective {result.binary_objective:.4f} after {iters} iterations")
    return EXIT_OK


# --- evaluate -----------------------------------------------------------------

def cmd_evaluate(args):
    cfg = _effective_config(args, ("density", "device", "scale", "out"))
    density = _need(cfg, "density", str)
    device = _need(cfg, "device", str, DEVICE_PRESETS)
    cfg.setdefault("scale", "desk")
    scale = _need(cfg, "scale", str, SCALES)
    out = _outdir(cfg)

    level = io.read_density_csv(density)
    problem = PROBLEM_MAKERS[device](_geometry(scale))
    if level.shape != problem.design_shape:
        raise SchemaError(
            f"density shape {level.shape} does not match the {scale} "
            f"design region {problem.design_shape}")
    metrics = devices.evaluate_device(level, problem)
    io.write_json(os.path.join(out, "metrics.json"), {
        "command": "evaluate", "device": device, "scale": scale,
        "conditions": [m.__dict__ for m in metrics],
    }, meta=_provenance(cfg))
    for m in metrics:
        xt = "n/a" if m.crosstalk_db is None else f"{m.crosstalk_db:.2f} dB"
        print(f"{m.condition}: IL {m.insertion_loss_db:.2f} dB, XT {xt}")
    return EXIT_OK


# --- sweep --------------------------------------------------------------------

def cmd_sweep(args):
    cfg = _effective_config(args, ("density", "scale", "start", "stop",
                                   "step", "jobs", "fit", "out"))
    density = _need(cfg, "density", str)
    cfg.setdefault("scale", "desk")
    scale = _need(cfg, "scale", str, SCALES)
    start = _need(cfg, "start", float)
    stop = _need(cfg, "stop", float)
    step = float(cfg.setdefault("step", 0.25))
    jobs = int(cfg.setdefault("jobs", 1))
    if not (start < stop and step > 0.0):
        raise SchemaError("sweep band needs start < stop and step > 0")
    out = _outdir(cfg)

    level = io.read_density_csv(density)
    wl, p_through, p_drop = devices.sweep_device(
        level, _geometry(scale), start, stop, step, jobs=jobs)
    prov = _provenance(cfg)
    io.write_spectra_csv(os.path.join(out, "spectra.csv"), wl,
                         {"p_through": p_through, "p_drop": p_drop},
                         meta=prov)
    print(f"swept {wl.size} points over {start}..{stop} nm")
    if cfg.get("fit"):
        res = devices.fit_lorentzian(wl, p_drop)
        io.write_json(os.path.join(out, "fit.json"), {
            "command": "sweep", "lambda_r_nm": res.lambda_r, "q": res.q,
            "extinction_db": res.extinction_db,
            "fit_residual": res.fit_residual,
        }, meta=prov)
        print(f"resonance at {res.lambda_r:.3f} nm, Q {res.q:.0f}")
    return EXIT_OK


# --- circuit ------------------------------------------------------------------

def cmd_circuit(args):
    cfg = _effective_config(args, ("kind", "n", "out"))
    kind = _need(cfg, "kind", str)
    n = cfg.get("n")
    out = _outdir(cfg)

    spec = fabric.ArchitectureSpec(kind=kind, n=int(n) if n else None)
    layout = fabric.generate(spec)
    counts = fabric.count_components(layout)
    prov = _provenance(cfg)
    io.write_json(os.path.join(out, "layout.json"),
                  fabric.layout_to_json(layout), meta=prov)
    io.write_json(os.path.join(out, "counts.json"), {
        "command": "circuit", "kind": layout.kind,
        "n_rails": layout.n_rails, "n_columns": len(layout.columns),
        "counts": counts,
    }, meta=prov)
    parts = ", ".join(f"{k} {v}" for k, v in sorted(counts.items()) if v)
    print(f"{layout.kind}: {layout.n_rails} rails, {parts}")
    return EXIT_OK


# --- route --------------------------------------------------------------------

def _parse_request(doc):
    """Translate one request document into solver arguments."""
    if "permutation" in doc:
        return [int(x) for x in doc["permutation"]]
    if "routes" in doc:
        return {(int(i), float(lam)): int(j) for i, lam, j in doc["routes"]}
    if "select" in doc:
        return int(doc["select"])
    if doc.get("passive", False) or not doc:
        return None
    raise SchemaError(
        "request must carry one of: permutation, routes, select, passive")


def _verify_request(tracer, layout, state, request):
    if request is None:
        return True
    if isinstance(request, list):
        return tracer.trace(state) == dict(enumerate(request))
    if isinstance(request, int):
        got = tracer.trace(state)
        if layout.kind == "select_1to8":
            return got == {0: request}
        return got.get(request) == 0 and all(
            v == "terminated" for k, v in got.items() if k != request)
    for (i, lam), j in request.items():
        if tracer.trace(state, color=lam).get(i) != j:
            return False
    return True


def cmd_route(args):
    cfg = _effective_config(args, ("layout", "request", "out"))
    layout_path = _need(cfg, "layout", str)
    request_path = _need(cfg, "request", str)
    out = _outdir(cfg)

    layout = fabric.layout_from_json(io.read_json(layout_path))
    req_doc = io.read_json(request_path)
    req_doc.pop("toolkit", None)
    batch = req_doc.get("requests", [req_doc])
    if not isinstance(batch, list) or not batch:
        raise SchemaError("requests must be a non-empty list")

    tracer = routing.Tracer(layout)
    prov = _provenance(cfg)
    rows = {"request_id": [], "verified": [], "non_ambient": []}
    any_unroutable = False
    for idx, entry in enumerate(batch):
        request = _parse_request(dict(entry))
        try:
            state = routing.solve_state(layout, request)
        except Unroutable as err:
            print(f"request {idx}: unroutable ({err})", file=sys.stderr)
            rows["request_id"].append(idx)
            rows["verified"].append(0)
            rows["non_ambient"].append(np.nan)
            any_unroutable = True
            continue
        ok = _verify_request(tracer, layout, state, request)
        active = routing.non_ambient_count(layout, state)
        io.write_json(os.path.join(out, f"state_{idx:03d}.json"), {
            "command": "route", "kind": layout.kind,
            "request": entry, "verified": bool(ok),
            "non_ambient": active,
            "actuation": state.actuation, "delta_n": state.delta_n,
        }, meta=prov)
        rows["request_id"].append(idx)
        rows["verified"].append(int(ok))
        rows["non_ambient"].append(active)
        print(f"request {idx}: verified={bool(ok)}, non-ambient {active}")
    io.write_table_csv(os.path.join(out, "verification.csv"),
                       {k: np.array(v, dtype=float) for k, v in rows.items()},
                       meta=prov)
    return EXIT_UNROUTABLE if any_unroutable else EXIT_OK


# --- simulate -----------------------------------------------------------------

def _load_state(path):
    doc = io.read_json(path)
    actuation = doc.get("actuation", {})
    return routing.SwitchState(actuation=dict(actuation),
                               delta_n=dict(doc.get("delta_n", {})))


def _load_params(path):
    if not path:
        return netsim.paper_nominal()
    doc = io.read_json(path)
    return netsim.DeviceParams(
        coupler=netsim.CouplerParams(**doc.get("coupler", {})),
        crossover=netsim.CrossoverParams(**doc.get("crossover", {})),
        resonator=netsim.ResonatorParams(**doc.get("resonator", {})),
        block_loss=doc.get("block_loss", 0.5))


def cmd_simulate(args):
    cfg = _effective_config(args, ("layout", "state", "params", "start",
                                   "stop", "step", "out"))
    layout_path = _need(cfg, "layout", str)
    state_path = _need(cfg, "state", str)
    start = _need(cfg, "start", float)
    stop = _need(cfg, "stop", float)
    step = float(cfg.setdefault("step", 0.1))
    if not (start <= stop and step > 0.0):
        raise SchemaError("band needs start <= stop and step > 0")
    out = _outdir(cfg)

    layout = fabric.layout_from_json(io.read_json(layout_path))
    state = _load_state(state_path)
    params = _load_params(cfg.get("params"))
    npts = int(round((stop - start) / step)) + 1
    wavelengths = start + step * np.arange(npts)

    responses = netsim.circuit_response(layout, state, wavelengths,
                                        params=params)
    ports = {}
    for i, rin in enumerate(layout.input_rails):
        for j, rout in enumerate(layout.output_rails):
            ports[f"p_in{i}_out{j}"] = np.array(
                [abs(r.matrix[rout, rin]) ** 2 for r in responses])
    prov = _provenance(cfg)
    io.write_spectra_csv(os.path.join(out, "spectra.csv"), wavelengths,
                         ports, meta=prov)

    tracer = routing.Tracer(layout)
    cols = {"wavelength_nm": [], "input": [], "output": [],
            "il_db": [], "crosstalk_db": []}
    for wl, resp in zip(wavelengths, responses):
        traced = tracer.trace(state, color=float(wl))
        intended = {layout.input_rails[i]: layout.output_rails[j]
                    for i, j in traced.items() if isinstance(j, int)}
        metrics = netsim.path_metrics(resp, intended)
        for i, outcome in traced.items():
            cols["wavelength_nm"].append(float(wl))
            cols["input"].append(i)
            if isinstance(outcome, int):
                rail = layout.input_rails[i]
                cols["output"].append(outcome)
                cols["il_db"].append(metrics["il_db"][rail])
                cols["crosstalk_db"].append(metrics["crosstalk_db"][rail])
            else:
                cols["output"].append(np.nan)
                cols["il_db"].append(np.nan)
                cols["crosstalk_db"].append(np.nan)
    io.write_table_csv(os.path.join(out, "path_metrics.csv"),
                       {k: np.array(v, dtype=float) for k, v in cols.items()},
                       meta=prov)
    print(f"simulated {npts} wavelengths on {layout.kind}")
    return EXIT_OK


# --- report -------------------------------------------------------------------

def cmd_report(args):
    cfg = _effective_config(args, ("dir", "out"))
    src = cfg.setdefault("dir", ".")
    cfg.setdefault("out", src)
    out = _outdir(cfg)

    summary = {}
    metrics_path = os.path.join(src, "metrics.json")
    if os.path.exists(metrics_path):
        doc = io.read_json(metrics_path)
        summary["metrics"] = {
            "command": doc.get("command"),
            "conditions": [
                {"condition": c.get("condition"),
                 "insertion_loss_db": c.get("insertion_loss_db"),
                 "crosstalk_db": c.get("crosstalk_db")}
                for c in doc.get("conditions", [])],
        }
    history_path = os.path.join(src, "history.csv")
    if os.path.exists(history_path):
        names, data = io.read_table_csv(history_path)
        obj = data[:, names.index("objective")]
        summary["history"] = {"iterations": int(data.shape[0]),
                              "final_objective": float(obj[-1]),
                              "best_objective": float(obj.max())}
    verification_path = os.path.join(src, "verification.csv")
    if os.path.exists(verification_path):
        names, data = io.read_table_csv(verification_path)
        ok = data[:, names.index("verified")]
        summary["verification"] = {"requests": int(data.shape[0]),
                                   "verified": int(ok.sum())}
    spectra_path = os.path.join(src, "spectra.csv")
    if os.path.exists(spectra_path):
        names, data = io.read_table_csv(spectra_path)
        wl = data[:, names.index("wavelength_nm")]
        summary["spectra"] = {"points": int(data.shape[0]),
                              "band_nm": [float(wl.min()), float(wl.max())]}
    counts_path = os.path.join(src, "counts.json")
    if os.path.exists(counts_path):
        doc = io.read_json(counts_path)
        summary["circuit"] = {"kind": doc.get("kind"),
                              "counts": doc.get("counts")}
    if not summary:
        raise SchemaError(f"no recognized artifacts under {src!r}")
    io.write_json(os.path.join(out, "report.json"), {
        "command": "report", "source": src, "sections": summary,
    }, meta=_provenance(cfg))
    for section, body in sorted(summary.items()):
        print(f"{section}: {json.dumps(body, sort_keys=True)}")
    return EXIT_OK


# --- entry point --------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="photon-fabric",
        description="Inverse design and switch-fabric simulation toolkit")
    parser.add_argument("--version", action="version",
                        version=f"photon-fabric {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override")
        p.add_argument("--out", help="output directory (default .)")

    p = sub.add_parser("optimize", help="run a device optimization")
    p.add_argument("--device", choices=DEVICE_PRESETS)
    p.add_argument("--scale", choices=SCALES)
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="score a density map")
    p.add_argument("--density")
    p.add_argument("--device", choices=DEVICE_PRESETS)
    p.add_argument("--scale", choices=SCALES)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="wavelength sweep of a density map")
    p.add_argument("--density")
    p.add_argument("--scale", choices=SCALES)
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("--fit", action="store_true", default=None,
                   help="fit a resonance to the drop spectrum")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("circuit", help="generate an architecture layout")
    p.add_argument("--kind")
    p.add_argument("--n", type=int)
    common(p)
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("route", help="solve switch states for requests")
    p.add_argument("--layout")
    p.add_argument("--request")
    common(p)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("simulate", help="spectral response of a routed state")
    p.add_argument("--layout")
    p.add_argument("--state")
    p.add_argument("--params")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--step", type=float)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="summarize artifacts in a directory")
    p.add_argument("--dir")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except (UnsupportedSize, FileNotFoundError, json.JSONDecodeError,
            KeyError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except Unroutable as err:
        print(f"unroutable: {err}", file=sys.stderr)
        return EXIT_UNROUTABLE
    except (SolverFailure, Diverged, NoResonance) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
