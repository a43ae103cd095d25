"""Scenario files, the run orchestrator and run artifacts.

A scenario is a JSON document tagged ``"schema": "dampedwave.scenario/1"``.
Unknown keys are rejected.  ``run_scenario`` integrates it and writes into
its own output directory::

    manifest.json     config, status, check results, sha256 of every artifact
    report.json       check details (and the interaction report if requested)
    energy.csv        t, E, Q, E + Q, energy norm, sup |u|
    modulation.csv    fitted scales and components per sample
    virial.csv        dV/dt, right-hand side and residual per variant
    exterior.csv      exterior energies for each requested radius
    trapping.csv      K, J, Z and the modified energy with its exact rate
    checkpoint.json   final state
    *.svg             plots (see :mod:`dampedwave.plots`)

Nothing time-dependent is written, so identical configs give identical files.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import copy
import csv
import hashlib
import json
import logging
import math
import os
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bubbles import BubbleFamily, interaction_term, closed_form_constants
from .evolve import (ConfigError, RunConfig, exterior_energy, initial_state, run,
                     write_checkpoint)
from .grid import GridError, energy_norm
from .modulation import track
from .spectral import load_or_build_pack
from .trapping import etilde, etilde_rate, kinetic_J, nehari_K, trap_check, z_functional
from .virial import VARIANTS, virial_identity_residual

__all__ = [
    "SCHEMA_ID",
    "SCHEMA",
    "EXIT_OK",
    "EXIT_VALIDATION",
    "EXIT_CHECK",
    "EXIT_BLOWUP",
    "WORKERS_ENV",
    "CACHE_ENV",
    "load_scenario",
    "validate_scenario",
    "bundled_scenarios",
    "resolve_scenario",
    "run_scenario",
    "run_many",
    "write_csv",
    "file_sha256",
]

log = logging.getLogger(__name__)

SCHEMA_ID = "dampedwave.scenario/1"
MANIFEST_ID = "dampedwave.manifest/1"
EXIT_OK, EXIT_VALIDATION, EXIT_CHECK, EXIT_BLOWUP = 0, 1, 2, 3
WORKERS_ENV = "DAMPEDWAVE_WORKERS"
CACHE_ENV = "DAMPEDWAVE_CACHE"

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NUMS = {"type": "array", "items": _NUM}

_PERTURBATION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["unstable_mode", "gaussian"]},
        "eps": _NUM, "alpha": {"type": "number", "minimum": 0},
        "bubble": {"type": "integer", "minimum": 0},
        "amp": _NUM, "center": _NUM, "width": _POS, "vamp": _NUM,
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "name", "D", "alpha", "grid", "data", "t_end"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9._-]+$"},
        "description": {"type": "string"},
        "D": {"type": "integer", "minimum": 3, "maximum": 10},
        "alpha": {"type": "number", "minimum": 0},
        "t_end": _POS,
        "dt": _POS,
        "cadence": _POS,
        "nonlinear": {"type": "boolean"},
        "output_dir": {"type": "string"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["N", "r_max"],
            "properties": {
                "kind": {"enum": ["uniform", "stretched"]},
                "N": {"type": "integer", "minimum": 1},
                "r_max": _POS,
                "h0": _POS,
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["multibubble", "multibubble+perturbation", "gaussian",
                                  "samples"]},
                "iotas": {"type": "array", "items": {"enum": [-1, 1]}, "minItems": 1},
                "lambdas": {"type": "array", "items": _POS, "minItems": 1},
                "scale": _NUM,
                "perturbation": _PERTURBATION,
                "amp": _NUM, "center": _NUM, "width": _POS, "vamp": _NUM,
                "u": _NUMS, "udot": _NUMS,
            },
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "modulation": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "iotas": {"type": "array", "items": {"enum": [-1, 1]}},
                        "lambdas": {"type": "array", "items": _POS},
                        "spectral_N": {"type": "integer", "minimum": 64},
                        "refined": {"type": "boolean"},
                        "max_change": _POS,
                    },
                },
                "virial": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["rho"],
                    "properties": {
                        "rho": _POS,
                        "variants": {"type": "array", "items": {"enum": list(VARIANTS)},
                                     "minItems": 1},
                    },
                },
                "exterior": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["rho"],
                    "properties": {"rho": {"type": "array", "items": {"type": "number",
                                                                       "minimum": 0},
                                           "minItems": 1}},
                },
                "trapping": {"type": "boolean"},
                "interaction": {"type": "boolean"},
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d_max": _POS,
                "energy_ratio_max": _POS,
                "interaction_sign": {"type": "boolean"},
                "nehari_nonnegative": {"type": "boolean"},
                "etilde_nonincreasing": {"type": "boolean"},
            },
        },
    },
}


# -- loading and validation ---------------------------------------------------

def _field(path):
    parts = [str(p) if not isinstance(p, int) else f"[{p}]" for p in path]
    out = ""
    for p in parts:
        out += p if p.startswith("[") or not out else "." + p
    return out or "<root>"


def validate_scenario(doc):
    """Return ``doc`` with defaults filled in, or raise :class:`ConfigError`.

    Schema errors are reported one per line as ``field: message``.  The
    resulting run parameters are then checked against the run invariants
    (CFL, domain large enough for ``t_end``).
    """
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.path)))
    if errors:
        raise ConfigError("\n".join(f"{_field(e.path)}: {e.message}" for e in errors))
    doc = copy.deepcopy(doc)
    doc["grid"].setdefault("kind", "uniform")
    if doc["grid"]["kind"] == "stretched" and "h0" not in doc["grid"]:
        raise ConfigError("grid.h0: required for a stretched grid")
    doc.setdefault("cadence", 0.1)
    doc.setdefault("nonlinear", True)
    doc.setdefault("diagnostics", {})
    doc.setdefault("checks", {})
    try:
        cfg = _run_config(doc)
        grid = cfg.build_grid()
    except (GridError, KeyError, TypeError) as exc:
        raise ConfigError(f"grid: {exc}") from exc
    if "dt" not in doc:
        doc["dt"] = 0.5 * grid.h_min
        cfg = _run_config(doc)
    cfg.validate(grid)
    return doc


def load_scenario(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return validate_scenario(doc)


def bundled_scenarios():
    """Mapping of bundled scenario names to their files."""
    here = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(here.glob("*.json"))}


def resolve_scenario(name_or_path):
    """Accept a file path or the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if str(name_or_path) in bundled:
        return bundled[str(name_or_path)]
    raise ConfigError(f"no scenario file or bundled scenario named {name_or_path!r}")


def _run_config(doc):
    return RunConfig(D=doc["D"], alpha=float(doc["alpha"]), dt=float(doc.get("dt", 1.0)),
                     t_end=float(doc["t_end"]), grid=dict(doc["grid"]), data=dict(doc["data"]),
                     cadence=float(doc["cadence"]), nonlinear=bool(doc["nonlinear"]))


# -- artifacts -----------------------------------------------------------------

def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    """Header row plus rows; floats with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _json_dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


# -- diagnostics -------------------------------------------------------------------

def _energy_rows(traj):
    g = traj.grid
    rows = []
    for k, (t, st) in enumerate(traj.states()):
        E, Q = traj.energy[k], traj.dissipation[k]
        rows.append([t, E, Q, E + Q, energy_norm(g, st), traj.sup_norm[k]])
    return ["t", "E", "Q", "E_plus_Q", "energy_norm", "sup_u"], rows


def _virial_rows(traj, spec, nonlinear):
    variants = spec.get("variants", list(VARIANTS))
    if len(traj) < 5:
        return ["t"], [], {}
    res = {v: virial_identity_residual(traj, spec["rho"], v, nonlinear=nonlinear)
           for v in variants}
    header = ["t"]
    for v in variants:
        header += [f"V_{v}", f"dVdt_{v}", f"rhs_{v}", f"residual_{v}"]
    times = res[variants[0]].times
    rows = []
    for i, t in enumerate(times):
        row = [t]
        for v in variants:
            r = res[v]
            row += [r.V[i + 2], r.dVdt[i], r.rhs[i], r.dVdt[i] - r.rhs[i]]
        rows.append(row)
    summary = {v: {"relative_residual": res[v].relative} for v in variants}
    return header, rows, summary


def _exterior_rows(traj, radii):
    g = traj.grid
    header = ["t"] + [f"ext_{rho:g}" for rho in radii]
    rows = [[t] + [exterior_energy(g, st, rho) for rho in radii] for t, st in traj.states()]
    return header, rows


def _trapping_rows(traj):
    g, a = traj.grid, traj.alpha
    header = ["t", "K", "J", "Z", "Etilde", "Etilde_rate", "Z_half", "Etilde_half",
              "Etilde_rate_half", "inside_trap"]
    rows = []
    for t, st in traj.states():
        rep = trap_check(g, st, a)
        rows.append([t, nehari_K(g, st.u), kinetic_J(g, st.u), z_functional(g, st, a),
                     etilde(g, st, a), etilde_rate(g, st, a),
                     z_functional(g, st, a, "half"), etilde(g, st, a, "half"),
                     etilde_rate(g, st, a, "half"), rep.inside_trap])
    return header, rows


def _interaction_report(doc, traj, mtrack):
    """Sign and size of the inner-scale drift against the interaction law.

    For two bubbles the inner scale obeys, to leading order,
    ``lambda_1'' + alpha lambda_1' = iota_1 iota_2 omega^2 mu^((D-2)/2) / lambda_1``
    with ``mu = lambda_1/lambda_2``, so it grows for equal signs (attraction)
    and shrinks for opposite signs.
    """
    g = traj.grid
    D = g.D
    data = doc["data"]
    fam = BubbleFamily(D, tuple(data["iotas"]), tuple(data["lambdas"]))
    rep = interaction_term(g, fam)
    out = {"brackets": rep.brackets, "predicted_brackets": rep.predicted,
           "bracket_relative_errors": rep.relative_errors(), "tail_bound": rep.tail_bound}
    if fam.M < 2 or mtrack is None:
        out["sign_consistent"] = bool(np.all(np.sign(rep.brackets) == np.sign(rep.predicted)))
        return out
    lam0 = fam.lambdas[0]
    ok = [k for k, s in enumerate(mtrack.states) if s.status == "ok"]
    k_last = ok[-1]
    T = mtrack.times[k_last]
    moved = float(mtrack.states[k_last].lambdas[0] - lam0)
    a = doc["alpha"]
    mu = fam.lambdas[0] / fam.lambdas[1]
    acc = fam.iotas[0] * fam.iotas[1] * closed_form_constants(D).omega_sq_exact \
        * mu ** ((D - 2) / 2.0) / lam0
    shape = T * T / 2.0 if a == 0 else (a * T - 1.0 + math.exp(-a * T)) / (a * a)
    predicted_move = acc * shape
    expected_sign = fam.iotas[0] * fam.iotas[1]
    out.update({
        "t_final": T,
        "lambda1_displacement": moved,
        "predicted_displacement": predicted_move,
        "displacement_ratio": moved / predicted_move,
        "expected_sign": expected_sign,
        "sign_consistent": bool(np.sign(moved) == expected_sign
                                and np.all(np.sign(rep.brackets) == np.sign(rep.predicted))),
    })
    return out


def _evaluate_checks(doc, traj, mtrack, trap_rows, interaction):
    checks = doc.get("checks", {})
    results = {}
    g = traj.grid
    if "d_max" in checks:
        ds = [s.d_value for s in mtrack.states] if mtrack else [math.nan]
        worst = max(ds) if all(np.isfinite(ds)) else math.nan
        results["d_max"] = {"limit": checks["d_max"], "value": worst,
                            "passed": bool(worst <= checks["d_max"])}
    if "energy_ratio_max" in checks:
        e0 = energy_norm(g, traj.state(0))
        e1 = energy_norm(g, traj.state(len(traj) - 1))
        ratio = e1 / e0
        results["energy_ratio_max"] = {"limit": checks["energy_ratio_max"], "value": ratio,
                                       "passed": bool(ratio < checks["energy_ratio_max"])}
    if checks.get("nehari_nonnegative"):
        kmin = min(row[1] for row in trap_rows) if trap_rows else math.nan
        results["nehari_nonnegative"] = {"value": kmin, "passed": bool(kmin >= 0)}
    if checks.get("etilde_nonincreasing"):
        et = np.array([row[4] for row in trap_rows])
        worst = float(np.max(np.diff(et))) if et.size > 1 else 0.0
        results["etilde_nonincreasing"] = {"value": worst, "passed": bool(worst <= 0.0)}
    if checks.get("interaction_sign"):
        ok = bool(interaction and interaction.get("sign_consistent"))
        results["interaction_sign"] = {"passed": ok}
    return results


# -- orchestration ------------------------------------------------------------------

def run_scenario(path_or_doc, out_dir=None, plots=True):
    """Validate, integrate and write all artifacts.  Returns ``(exit_code, run_dir)``.

    Exit codes: 0 success, 1 invalid config, 2 a numerical check failed or
    the run produced non-finite values, 3 blow-up candidate.  Artifacts are
    written in every case except 1.
    """
    try:
        if isinstance(path_or_doc, dict):
            doc = validate_scenario(path_or_doc)
        else:
            doc = load_scenario(resolve_scenario(path_or_doc))
    except ConfigError as exc:
        log.error("invalid scenario:\n%s", exc)
        return EXIT_VALIDATION, None
    run_dir = Path(out_dir or doc.get("output_dir") or Path("runs") / doc["name"])
    cfg = _run_config(doc)
    diag = doc["diagnostics"]
    D = doc["D"]
    pert = doc["data"].get("perturbation", {})
    need_pack = "modulation" in diag or pert.get("kind") == "unstable_mode"
    pack = None
    if need_pack:
        spec_N = diag.get("modulation", {}).get("spectral_N", 2048)
        pack = load_or_build_pack(D, spec_N, cache_dir=os.environ.get(CACHE_ENV))
    try:
        grid = cfg.build_grid()
        state = initial_state(grid, cfg.data, pack)
        cfg.validate(grid, state)
    except (ConfigError, GridError, KeyError) as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_VALIDATION, None

    run_dir.mkdir(parents=True, exist_ok=True)
    traj = run(cfg, state=state, pack=pack)
    artifacts = []

    def emit(name, header, rows):
        write_csv(run_dir / name, header, rows)
        artifacts.append(name)

    emit("energy.csv", *_energy_rows(traj))
    report = {"status": traj.status, "message": traj.message}

    mtrack = None
    if "modulation" in diag:
        m = diag["modulation"]
        iotas = m.get("iotas", doc["data"].get("iotas"))
        lambdas = m.get("lambdas", doc["data"].get("lambdas"))
        mtrack = track(traj, pack, iotas, lambdas, max_change=m.get("max_change", 0.1),
                       refined=m.get("refined", True))
        mtrack.to_csv(run_dir / "modulation.csv")
        artifacts.append("modulation.csv")
        report["modulation_events"] = [list(e) for e in mtrack.events]
    if "virial" in diag:
        header, rows, summary = _virial_rows(traj, diag["virial"], cfg.nonlinear)
        emit("virial.csv", header, rows)
        report["virial"] = summary
    if "exterior" in diag:
        emit("exterior.csv", *_exterior_rows(traj, diag["exterior"]["rho"]))
    trap_rows = None
    if diag.get("trapping"):
        header, trap_rows = _trapping_rows(traj)
        emit("trapping.csv", header, trap_rows)
    interaction = None
    if diag.get("interaction"):
        interaction = _interaction_report(doc, traj, mtrack)
        report["interaction"] = interaction

    final_t = traj.times[-1]
    final = traj.state(len(traj) - 1)
    if traj.status == "nan" and traj.last_good is not None:
        final_t, final = traj.last_good
    write_checkpoint(run_dir / "checkpoint.json", grid, final_t, final)
    artifacts.append("checkpoint.json")

    checks = _evaluate_checks(doc, traj, mtrack, trap_rows, interaction)
    report["checks"] = checks
    if traj.status == "blowup-candidate":
        code = EXIT_BLOWUP
    elif traj.status != "ok" or not all(c["passed"] for c in checks.values()):
        code = EXIT_CHECK
    else:
        code = EXIT_OK
    report["exit_code"] = code
    _json_dump(run_dir / "report.json", report)
    artifacts.append("report.json")

    if plots:
        from .plots import emit_plots
        artifacts += [p.name for p in emit_plots(run_dir)]

    manifest = {
        "schema": MANIFEST_ID,
        "scenario": doc["name"],
        "package_version": __version__,
        "config": doc,
        "status": traj.status,
        "exit_code": code,
        "checks": {k: v["passed"] for k, v in checks.items()},
        "artifacts": {name: file_sha256(run_dir / name) for name in sorted(set(artifacts))},
    }
    _json_dump(run_dir / "manifest.json", manifest)
    for name, c in checks.items():
        log.info("check %s: %s", name, "pass" if c["passed"] else "FAIL")
    return code, run_dir


def _run_one(args):
    path, out_dir = args
    return run_scenario(path, out_dir)


def run_many(paths, out_root=None, workers=None):
    """Run several scenarios, each in its own directory, in parallel workers.

    ``workers`` defaults to the ``DAMPEDWAVE_WORKERS`` environment variable
    (1 if unset).  Returns the list of ``(exit_code, run_dir)``.
    """
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    jobs = []
    for p in paths:
        out = None
        if out_root is not None:
            out = Path(out_root) / (Path(str(p)).stem if len(paths) > 1 else "")
        jobs.append((p, out))
    if workers <= 1 or len(jobs) == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, jobs))
