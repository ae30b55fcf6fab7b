"""Scenario-driven batch runner.

Scenario document (JSON, ``schema_version`` 1)::

    {
      "schema_version": 1,                # required, must be 1
      "description": "free text",         # optional
      "seed": 0,                          # optional integer, feeds seeded tasks
      "tolerances": {"stokes_mismatch": 1e-3},   # optional overrides of TOLERANCES
      "model": MODEL_SPEC,                # default model for every task
      "tasks": [                          # required, non-empty, run in this order
        {"task": "berry_phase_loop",      # registered task name (see list_tasks())
         "id": "bp",                      # optional unique id; default "NN_<task>"
         "model": MODEL_SPEC,             # optional per-task model
         "params": {...},                 # task parameters (see list_tasks())
         "output": "bp"}                  # optional file stem under the output directory
      ]
    }

    MODEL_SPEC = {"model": NAME, "params": {...builder arguments...},
                  "boundary": "obc"|"pbc",          # rice_mele only
                  "units": {"hbar":1,"e_charge":1,"mass":1,"c_light":1},
                  "frame": [{"charge": Z, "position": [x, y], "mass": M}, ...]}  # planar_molecule only

Model names: ``two_level``, ``rice_mele``, ``interacting_ring``,
``two_site_molecule``, ``continuum_ring``, ``planar_molecule``; ``params`` are
the keyword arguments of the matching ``build_*`` function (for
``rice_mele`` ``nonlocal_projector`` is ``{"strength": g, "vector": [...]}``;
for ``planar_molecule`` ``basis_cut`` may be ``"auto"``).

Every key is checked: unknown keys anywhere in the document are
``ConfigParseError`` with the dotted field path and, when it can be located,
the line. Unknown task names are ``UnknownTask``. Both are configuration
errors (CLI exit code 2).

Outputs in the output directory:

* ``<output>.json`` per task: task, id, effective parameters, model
  fingerprint, status, error, result and checks. Deterministic: sorted keys,
  shortest round-trip float repr, no timings.
* ``summary.csv``: aggregate long table ``id, task, status, error_code, quantity, value``
  of the scalar results.
* ``plot_data.csv``: tidy plot data ``id, task, series, index, x, y, value``.
* ``<output>_trajectory.csv`` for ``propagate`` tasks.
* ``manifest.json``: scenario hash, per-task status / error code / wall
  time / artifacts and the exit code. Only this file carries wall times.

A task failing with a library error is recorded with that error's code and
never stops later tasks; a computed result that violates one of its checks is
recorded with code ``ToleranceExceeded``.
"""
from __future__ import annotations

import csv
import hashlib
import inspect
import io
import json
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigParseError, QGeomError, ToleranceExceeded, UnknownTask
from .models import (
    NuclearFrame,
    Nucleus,
    Units,
    build_continuum_ring,
    build_interacting_ring,
    build_planar_molecule,
    build_rice_mele,
    build_two_level,
    build_two_site_molecule,
    choose_basis_cut,
)

SCHEMA_VERSION = 1
OUT_ENV_VAR = "QGEOM_OUT"
DEFAULT_OUT = "qgeom_out"
REQUIRED = object()

TOLERANCES = {
    "berry_phase": 1e-4,
    "curvature_routes": 1e-6,
    "convergence_order_window": 0.2,
    "stokes_mismatch": 1e-3,
    "static_drift": 1e-10,
    "slope_window": 0.2,
    "rate_relative_error": 0.01,
    "continuity": 1e-12,
    "adiabatic_continuity": 1e-10,
    "polarizability_routes": 1e-10,
    "finite_field": 1e-6,
    "acoustic_sum": 1e-8,
    "n_star_routes": 1e-6,
    "dcs_residual": 1e-6,
    "magnetic_routes": 1e-8,
    "relation_62": 1e-8,
    "gauge_spread": 1e-8,
    "lz_identity": 1e-8,
}


# -- JSON helpers -------------------------------------------------------------
def jsonable(v):
    """Plain JSON data; non-finite floats become null."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return x if math.isfinite(x) else None
    if isinstance(v, complex):
        return {"re": jsonable(v.real), "im": jsonable(v.imag)}
    return v


def dumps(doc) -> str:
    return json.dumps(jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


# -- document validation ------------------------------------------------------
def _line_of(text: str | None, key: str) -> int | None:
    """1-based line of the first occurrence of the JSON key ``"key"`` (best effort)."""
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Doc:
    """Carries the raw text so errors can point at a line."""

    def __init__(self, text: str | None):
        self.text = text

    def error(self, message: str, path: str, key: str | None = None) -> ConfigParseError:
        return ConfigParseError(message, _line_of(self.text, key or path.split(".")[-1].split("[")[0]), path)

    def keys(self, obj, allowed, required, path):
        if not isinstance(obj, dict):
            raise self.error("expected an object", path)
        for k in obj:
            if k not in allowed:
                raise self.error(f"unknown key {k!r}; allowed: {sorted(allowed)}", f"{path}.{k}" if path else k, k)
        for k in required:
            if k not in obj:
                raise self.error(f"missing required key {k!r}", f"{path}.{k}" if path else k)


def _number(doc: _Doc, v, path, integer=False):
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok:
        raise doc.error(f"expected {'an integer' if integer else 'a number'}, got {v!r}", path)
    return v


# -- models -------------------------------------------------------------------
def _units(doc, spec, path):
    if spec is None:
        return None
    doc.keys(spec, {"hbar", "e_charge", "mass", "c_light"}, (), path)
    for k, v in spec.items():
        _number(doc, v, f"{path}.{k}")
    return Units(**{k: float(v) for k, v in spec.items()})


def _frame(doc, spec, path):
    if not isinstance(spec, list) or not spec:
        raise doc.error("frame must be a non-empty list of nuclei", path)
    nuclei = []
    for i, n in enumerate(spec):
        p = f"{path}[{i}]"
        doc.keys(n, {"charge", "position", "mass"}, ("charge", "position"), p)
        pos = n["position"]
        if not isinstance(pos, list) or len(pos) != 2:
            raise doc.error("position must be [x, y]", f"{p}.position")
        nuclei.append(Nucleus(float(_number(doc, n["charge"], f"{p}.charge")),
                              tuple(float(_number(doc, c, f"{p}.position")) for c in pos),
                              float(_number(doc, n.get("mass", 1836.0), f"{p}.mass"))))
    return NuclearFrame(tuple(nuclei))


MODEL_BUILDERS: dict[str, Callable] = {
    "continuum_ring": build_continuum_ring,
    "interacting_ring": build_interacting_ring,
    "planar_molecule": build_planar_molecule,
    "rice_mele": build_rice_mele,
    "two_level": build_two_level,
    "two_site_molecule": build_two_site_molecule,
}
_SPECIAL_ARGS = {"units", "frame", "boundary"}


def validate_model_spec(doc: _Doc, spec, path: str) -> dict:
    doc.keys(spec, {"model", "params", "boundary", "units", "frame"}, ("model",), path)
    name = spec["model"]
    if name not in MODEL_BUILDERS:
        raise doc.error(f"unknown model {name!r}; known: {sorted(MODEL_BUILDERS)}", f"{path}.model", "model")
    sig = inspect.signature(MODEL_BUILDERS[name]).parameters
    params = spec.get("params", {})
    allowed = set(sig) - _SPECIAL_ARGS
    doc.keys(params, allowed, [k for k in allowed if sig[k].default is inspect.Parameter.empty],
             f"{path}.params")
    if "boundary" in spec:
        if "boundary" not in sig:
            raise doc.error(f"model {name!r} takes no boundary", f"{path}.boundary", "boundary")
        if spec["boundary"] not in ("obc", "pbc"):
            raise doc.error("boundary must be 'obc' or 'pbc'", f"{path}.boundary", "boundary")
    if "frame" in spec:
        if "frame" not in sig:
            raise doc.error(f"model {name!r} takes no frame", f"{path}.frame", "frame")
        _frame(doc, spec["frame"], f"{path}.frame")
    _units(doc, spec.get("units"), f"{path}.units")
    if "nonlocal_projector" in params and params["nonlocal_projector"] is not None:
        doc.keys(params["nonlocal_projector"], {"strength", "vector"}, ("strength", "vector"),
                 f"{path}.params.nonlocal_projector")
    if params.get("basis_cut") is not None and not isinstance(params.get("basis_cut"), int) \
            and params.get("basis_cut") != "auto":
        raise doc.error("basis_cut must be an integer or 'auto'", f"{path}.params.basis_cut", "basis_cut")
    return spec


def build_model(spec: dict):
    """Build a model from a validated MODEL_SPEC."""
    doc = _Doc(None)
    name = spec["model"]
    kwargs = dict(spec.get("params", {}))
    if "boundary" in spec:
        kwargs["boundary"] = spec["boundary"]
    if "frame" in spec:
        kwargs["frame"] = _frame(doc, spec["frame"], "model.frame")
    units = _units(doc, spec.get("units"), "model.units")
    if units is not None:
        kwargs["units"] = units
    if kwargs.get("nonlocal_projector") is not None:
        npj = kwargs["nonlocal_projector"]
        kwargs["nonlocal_projector"] = (float(npj["strength"]), [float(x) for x in npj["vector"]])
    if name == "planar_molecule" and kwargs.get("basis_cut") == "auto":
        extra = {k: v for k, v in kwargs.items() if k not in ("omega_x", "omega_y", "basis_cut")}
        kwargs["basis_cut"] = choose_basis_cut(kwargs["omega_x"], kwargs["omega_y"], **extra)
    return MODEL_BUILDERS[name](**kwargs)


# -- tasks --------------------------------------------------------------------
@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance_key: str
    mode: str = "max"  # "max": value <= tol


@dataclass
class TaskOutput:
    result: dict
    rows: list = field(default_factory=list)  # (series, index, x, y, value)
    checks: list = field(default_factory=list)
    files: dict = field(default_factory=dict)  # suffix -> text


@dataclass(frozen=True)
class TaskContext:
    seed: int
    index: int
    tolerances: dict

    def rng(self) -> np.random.Generator:
        """Generator depending only on (seed, task position): independent of --jobs."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.index]))


@dataclass(frozen=True)
class TaskSpec:
    name: str
    fn: Callable
    doc: str
    params: dict  # name -> (default | REQUIRED, description)
    needs_model: bool = True
    nested: Callable | None = None  # extra validation of nested documents: (doc, args, path) -> None


TASKS: dict[str, TaskSpec] = {}


def task(name: str, doc: str, params: dict, needs_model: bool = True, nested=None):
    def deco(fn):
        TASKS[name] = TaskSpec(name, fn, doc, params, needs_model, nested)
        return fn
    return deco


def list_tasks() -> list[dict]:
    """Sorted task catalog: name, description and parameter docs (with defaults)."""
    out = []
    for name in sorted(TASKS):
        spec = TASKS[name]
        out.append({"name": name, "doc": spec.doc,
                    "params": {k: {"default": None if d is REQUIRED else d, "required": d is REQUIRED,
                                   "doc": text} for k, (d, text) in sorted(spec.params.items())}})
    return out


# -- scenario -----------------------------------------------------------------
@dataclass(frozen=True)
class TaskDecl:
    index: int
    id: str
    name: str
    params: dict
    model: dict | None
    output: str


@dataclass(frozen=True)
class Scenario:
    schema_version: int
    seed: int
    tolerances: dict
    model: dict | None
    tasks: tuple
    description: str = ""
    source_hash: str = ""


_TOP_KEYS = {"schema_version", "description", "seed", "tolerances", "model", "tasks"}
_TASK_KEYS = {"task", "id", "model", "params", "output"}
_SAFE_NAME = re.compile(r"^[A-Za-z0-9_.-]+(/[A-Za-z0-9_.-]+)*$")


def parse_scenario(text: str, tolerance_overrides: dict | None = None) -> Scenario:
    """Parse and validate a scenario document; raises ConfigParseError / UnknownTask."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"invalid JSON: {exc.msg}", exc.lineno, None) from None
    doc = _Doc(text)
    doc.keys(raw, _TOP_KEYS, ("schema_version", "tasks"), "")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise doc.error(f"unsupported schema_version {raw['schema_version']!r} (expected {SCHEMA_VERSION})",
                        "schema_version")
    seed = _number(doc, raw.get("seed", 0), "seed", integer=True)
    tols = dict(TOLERANCES)
    user_tols = raw.get("tolerances", {})
    doc.keys(user_tols, set(TOLERANCES), (), "tolerances")
    for k, v in user_tols.items():
        tols[k] = float(_number(doc, v, f"tolerances.{k}"))
    for k, v in (tolerance_overrides or {}).items():
        if k not in TOLERANCES:
            raise ConfigParseError(f"unknown tolerance {k!r}; known: {sorted(TOLERANCES)}", None, f"--tolerance {k}")
        tols[k] = float(v)
    model = validate_model_spec(doc, raw["model"], "model") if "model" in raw else None
    if not isinstance(raw["tasks"], list) or not raw["tasks"]:
        raise doc.error("tasks must be a non-empty list", "tasks")
    decls, ids, outputs = [], set(), set()
    for i, t in enumerate(raw["tasks"]):
        path = f"tasks[{i}]"
        doc.keys(t, _TASK_KEYS, ("task",), path)
        name = t["task"]
        if name not in TASKS:
            raise UnknownTask(f"unknown task {name!r} at {path}; see list-tasks")
        spec = TASKS[name]
        args = t.get("params", {})
        doc.keys(args, set(spec.params), [k for k, (d, _) in spec.params.items() if d is REQUIRED],
                 f"{path}.params")
        args = {k: (args[k] if k in args else d) for k, (d, _) in spec.params.items()}
        if spec.nested:
            spec.nested(doc, args, f"{path}.params")
        tmodel = validate_model_spec(doc, t["model"], f"{path}.model") if "model" in t else None
        if spec.needs_model and tmodel is None and model is None:
            raise doc.error("task needs a model and the scenario has no default model", f"{path}.model")
        tid = t.get("id", f"{i:02d}_{name}")
        if not isinstance(tid, str) or not _SAFE_NAME.match(tid) or "/" in tid:
            raise doc.error(f"invalid task id {tid!r}", f"{path}.id", "id")
        if tid in ids:
            raise doc.error(f"duplicate task id {tid!r}", f"{path}.id", "id")
        ids.add(tid)
        out = t.get("output", tid)
        if not isinstance(out, str) or not _SAFE_NAME.match(out) or ".." in out.split("/"):
            raise doc.error(f"output must be a relative path without '..', got {out!r}", f"{path}.output", "output")
        if out in outputs:
            raise doc.error(f"duplicate output {out!r}", f"{path}.output", "output")
        outputs.add(out)
        decls.append(TaskDecl(i, tid, name, args, tmodel, out))
    canonical = json.dumps({"scenario": raw, "tolerances": tols}, sort_keys=True)
    return Scenario(SCHEMA_VERSION, seed, tols, model, tuple(decls), str(raw.get("description", "")),
                    hashlib.sha256(canonical.encode()).hexdigest())


def load_scenario(path, tolerance_overrides: dict | None = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read scenario: {exc}") from None
    return parse_scenario(text, tolerance_overrides)


# -- execution ----------------------------------------------------------------
@dataclass
class TaskRecord:
    decl: TaskDecl
    status: str
    error_code: str | None
    message: str | None
    wall_time: float
    output: TaskOutput | None
    fingerprint: str | None


@dataclass
class RunManifest:
    scenario_hash: str
    out_dir: str
    tasks: list  # dicts in declaration order
    artifacts: list
    exit_code: int

    @property
    def ok(self) -> bool:
        return self.exit_code == 0

    def status_of(self, task_id: str) -> dict:
        for t in self.tasks:
            if t["id"] == task_id:
                return t
        raise KeyError(task_id)

    def as_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "scenario_hash": self.scenario_hash, "tasks": self.tasks,
                "artifacts": self.artifacts, "exit_code": self.exit_code}


def _evaluate_checks(out: TaskOutput, tols: dict) -> list[dict]:
    res = []
    for c in out.checks:
        tol = tols[c.tolerance_key]
        val = float(c.value)
        passed = bool(math.isfinite(val) and val <= tol)
        res.append({"name": c.name, "value": val, "tolerance_key": c.tolerance_key, "tolerance": tol,
                    "passed": passed})
    return res


class _ModelCache:
    def __init__(self):
        self._cache = {}

    def get(self, spec):
        key = json.dumps(spec, sort_keys=True)
        if key not in self._cache:
            self._cache[key] = build_model(spec)  # builders are pure; a racing rebuild is harmless
        return self._cache[key]


def _run_one(decl: TaskDecl, scenario: Scenario, cache: _ModelCache) -> TaskRecord:
    spec = TASKS[decl.name]
    ctx = TaskContext(scenario.seed, decl.index, scenario.tolerances)
    t0 = time.perf_counter()
    fp = None
    try:
        model = None
        if spec.needs_model:
            model = cache.get(decl.model or scenario.model)
            fp = model.fingerprint()
        out = spec.fn(model, dict(decl.params), ctx)
        checks = _evaluate_checks(out, scenario.tolerances)
        out.result = {**out.result}
        failed = [c for c in checks if not c["passed"]]
        out.checks = checks
        if failed:
            msg = "; ".join(f"{c['name']}={c['value']:.3e} > {c['tolerance_key']}={c['tolerance']:g}" for c in failed)
            return TaskRecord(decl, "error", ToleranceExceeded.code, msg, time.perf_counter() - t0, out, fp)
        return TaskRecord(decl, "ok", None, None, time.perf_counter() - t0, out, fp)
    except QGeomError as exc:
        return TaskRecord(decl, "error", exc.code, str(exc), time.perf_counter() - t0, None, fp)
    except Exception as exc:  # isolate unexpected failures too
        return TaskRecord(decl, "error", "InternalError", f"{type(exc).__name__}: {exc}",
                          time.perf_counter() - t0, None, fp)


def _flatten_scalars(d, prefix=""):
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten_scalars(v, key + ".")
        elif isinstance(v, (bool, np.bool_, int, float, np.integer, np.floating, str)) or v is None:
            yield key, v


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def resolve_out_dir(out_dir=None) -> Path:
    return Path(out_dir or os.environ.get(OUT_ENV_VAR) or DEFAULT_OUT)


def run_scenario(scenario: Scenario, out_dir=None, jobs: int = 1) -> RunManifest:
    """Execute all tasks (concurrently with ``jobs`` > 1), then write outputs in declaration order."""
    out = resolve_out_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = _ModelCache()
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda d: _run_one(d, scenario, cache), scenario.tasks))
    else:
        records = [_run_one(d, scenario, cache) for d in scenario.tasks]

    summary, plot, manifest_tasks = [], [], []
    for rec in records:
        d = rec.decl
        artifacts = [f"{d.output}.json"]
        report = {"id": d.id, "task": d.name, "params": d.params, "model": d.model or scenario.model,
                  "model_fingerprint": rec.fingerprint, "status": rec.status, "seed": scenario.seed,
                  "error": None if rec.error_code is None else {"code": rec.error_code, "message": rec.message},
                  "result": rec.output.result if rec.output else None,
                  "checks": rec.output.checks if rec.output else []}
        _write(out / f"{d.output}.json", dumps(report))
        if rec.output:
            for suffix, text in sorted(rec.output.files.items()):
                name = f"{d.output}{suffix}"
                _write(out / name, text)
                artifacts.append(name)
            for q, v in _flatten_scalars(jsonable(rec.output.result)):
                summary.append((d.id, d.name, rec.status, rec.error_code, q, v))
            for series, idx, x, y, v in rec.output.rows:
                plot.append((d.id, d.name, series, idx, x, y, v))
        else:
            summary.append((d.id, d.name, rec.status, rec.error_code, "", None))
        manifest_tasks.append({"id": d.id, "task": d.name, "status": rec.status, "error_code": rec.error_code,
                               "message": rec.message, "wall_time_s": round(rec.wall_time, 6),
                               "artifacts": artifacts})
    _write(out / "summary.csv", _csv_text(["id", "task", "status", "error_code", "quantity", "value"], summary))
    _write(out / "plot_data.csv", _csv_text(["id", "task", "series", "index", "x", "y", "value"], plot))
    exit_code = 0 if all(r.status == "ok" for r in records) else 1
    manifest = RunManifest(scenario.source_hash, str(out), manifest_tasks,
                           ["summary.csv", "plot_data.csv", "manifest.json"], exit_code)
    _write(out / "manifest.json", dumps(manifest.as_dict()))
    return manifest


def run(scenario_path, out_dir=None, jobs: int = 1, tolerance_overrides: dict | None = None) -> RunManifest:
    """Load, validate and execute a scenario file. Configuration errors raise; task errors are recorded."""
    return run_scenario(load_scenario(scenario_path, tolerance_overrides), out_dir, jobs)


from . import tasks as _tasks  # noqa: E402,F401  (registers the task catalog)

__all__ = ["run", "run_scenario", "parse_scenario", "load_scenario", "list_tasks", "Scenario", "RunManifest",
           "TOLERANCES", "OUT_ENV_VAR", "build_model", "TASKS", "SCHEMA_VERSION"]
