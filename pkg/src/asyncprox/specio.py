"""Problem and run specification files (TOML or JSON).

A run spec names a problem from the catalog, a schedule, the resolvent
parameter policy, and engine settings:

.. code-block:: toml

    [problem]
    variant = "quadratic"          # affine | quadratic | saddle | box_vi
    block_sizes = [2, 2, 2, 2]
    Q = [...]                      # row-major entries, or "@matrix.csv"
    q = [...]

    [schedule]
    kind = "random"                # jacobi | gauss_seidel | random
    s_bound = 3
    sync_period = 10
    seed = 1

    [run]
    engine = "simulated"           # simulated | parallel
    c = "auto"                     # "auto" or a positive number
    tol = 1e-8
    max_iter = 50000

Matrices may be flat row-major arrays, nested row lists, or strings
``"@path.csv"`` referencing a CSV file relative to the spec file.  JSON
files with the same structure are accepted interchangeably; the
serializer emits JSON (with flat row-major matrices), and parsing the
serialized form reproduces the spec exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .block_space import BlockStructure, BlockVector
from .engine import ParallelConfig, RunConfig
from .errors import ParameterError
from .operators import AffineMonotone, BoxVI, Problem, QuadraticMin, SaddleQuadratic
from .scheduler import Schedule

__all__ = ["RunSpec", "load_run_spec", "parse_run_spec", "run_spec_to_json_dict",
           "save_run_spec", "problem_from_dict", "problem_to_json_dict",
           "demo_spec_path", "DEMO_VARIANTS"]

DEMO_VARIANTS = ("affine", "quadratic", "saddle", "box_vi")

ENGINES = ("simulated", "parallel")


@dataclass
class RunSpec:
    """Validated contents of a run specification file."""

    problem: Problem
    schedule: Schedule
    c_mode: str                      # "auto" or "explicit"
    c_value: float | None
    engine: str
    run: RunConfig
    parallel: ParallelConfig = field(default_factory=ParallelConfig)
    output_path: str | None = None
    output_format: str = "jsonl"

    def resolve_c(self) -> float:
        from .operators import auto_c

        if self.c_mode == "auto":
            return auto_c(self.problem.modulus, self.problem.structure.n_blocks)
        return float(self.c_value)


def _spec_error(section: str, key: str, message: str) -> ParameterError:
    return ParameterError(f"spec field [{section}] {key}: {message}")


def _parse_matrix(value, rows: int, cols: int, section: str, key: str,
                  base_dir: Path | None) -> np.ndarray:
    if isinstance(value, str):
        if not value.startswith("@"):
            raise _spec_error(section, key, f"string value must be an '@file.csv' reference, got {value!r}")
        path = Path(value[1:])
        if not path.is_absolute():
            if base_dir is None:
                raise _spec_error(section, key, "relative @file reference needs a spec file path")
            path = base_dir / path
        try:
            M = np.loadtxt(path, delimiter=",", ndmin=2)
        except OSError as exc:
            raise _spec_error(section, key, f"cannot read {path}: {exc}") from exc
    else:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 1:
            if arr.size != rows * cols:
                raise _spec_error(section, key,
                                  f"expected {rows * cols} row-major entries, got {arr.size}")
            M = arr.reshape(rows, cols)
        elif arr.ndim == 2:
            M = arr
        else:
            raise _spec_error(section, key, f"expected a matrix, got {arr.ndim} dimensions")
    if M.shape != (rows, cols):
        raise _spec_error(section, key, f"expected shape ({rows}, {cols}), got {M.shape}")
    return M


def _parse_vector(value, section: str, key: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64).ravel()
    if arr.size == 0:
        raise _spec_error(section, key, "vector is empty")
    return arr


def _require(table: dict, section: str, key: str):
    if key not in table:
        raise _spec_error(section, key, "missing required field")
    return table[key]


def problem_from_dict(table: dict, base_dir: Path | None = None) -> Problem:
    variant = _require(table, "problem", "variant")
    sizes = table.get("block_sizes")
    modulus_override = table.get("modulus")
    structure = None if sizes is None else BlockStructure(sizes)

    if variant == "affine":
        b = _parse_vector(_require(table, "problem", "b"), "problem", "b")
        A = _parse_matrix(_require(table, "problem", "A"), b.size, b.size,
                          "problem", "A", base_dir)
        return AffineMonotone(A, b, structure=structure, modulus_override=modulus_override)
    if variant == "quadratic":
        q = _parse_vector(_require(table, "problem", "q"), "problem", "q")
        Q = _parse_matrix(_require(table, "problem", "Q"), q.size, q.size,
                          "problem", "Q", base_dir)
        lower = table.get("lower")
        upper = table.get("upper")
        return QuadraticMin(Q, q, lower=lower, upper=upper, structure=structure,
                            modulus_override=modulus_override)
    if variant == "saddle":
        p = _parse_vector(_require(table, "problem", "p"), "problem", "p")
        q = _parse_vector(_require(table, "problem", "q"), "problem", "q")
        P = _parse_matrix(_require(table, "problem", "P"), p.size, p.size,
                          "problem", "P", base_dir)
        R = _parse_matrix(_require(table, "problem", "R"), q.size, q.size,
                          "problem", "R", base_dir)
        K = _parse_matrix(_require(table, "problem", "K"), q.size, p.size,
                          "problem", "K", base_dir)
        return SaddleQuadratic(P, R, K, p, q, structure=structure,
                               modulus_override=modulus_override)
    if variant == "box_vi":
        b = _parse_vector(_require(table, "problem", "b"), "problem", "b")
        A = _parse_matrix(_require(table, "problem", "A"), b.size, b.size,
                          "problem", "A", base_dir)
        lower = _parse_vector(_require(table, "problem", "lower"), "problem", "lower")
        upper = _parse_vector(_require(table, "problem", "upper"), "problem", "upper")
        return BoxVI(A, b, lower, upper, structure=structure,
                     modulus_override=modulus_override)
    raise _spec_error("problem", "variant", f"unknown variant {variant!r}")


def problem_to_json_dict(problem: Problem) -> dict:
    d: dict = {"variant": problem.variant,
               "block_sizes": list(problem.structure.sizes)}
    if isinstance(problem, AffineMonotone):
        d["A"] = problem.A.ravel().tolist()
        d["b"] = problem.b.tolist()
    elif isinstance(problem, QuadraticMin):
        d["Q"] = problem.Q.ravel().tolist()
        d["q"] = problem.q.tolist()
        if problem.box is not None:
            d["lower"] = problem.lower.tolist()
            d["upper"] = problem.upper.tolist()
    elif isinstance(problem, SaddleQuadratic):
        d["P"] = problem.P.ravel().tolist()
        d["R"] = problem.R.ravel().tolist()
        d["K"] = problem.K.ravel().tolist()
        d["p"] = problem.p.tolist()
        d["q"] = problem.q.tolist()
    elif isinstance(problem, BoxVI):
        d["A"] = problem.A.ravel().tolist()
        d["b"] = problem.b.tolist()
        d["lower"] = problem.lower.tolist()
        d["upper"] = problem.upper.tolist()
    else:
        raise TypeError(f"unknown problem variant {type(problem).__name__}")
    if getattr(problem, "modulus_override", None) is not None:
        d["modulus"] = problem.modulus_override
    return d


def _schedule_from_dict(table: dict, n_blocks: int) -> Schedule:
    kind = table.get("kind", "jacobi")
    try:
        return Schedule(
            kind=kind,
            n_blocks=n_blocks,
            s_bound=int(table.get("s_bound", 0)),
            sync_period=int(table.get("sync_period", 1)),
            seed=int(table.get("seed", 0)),
        )
    except ParameterError as exc:
        raise _spec_error("schedule", "kind", str(exc)) from exc


def parse_run_spec(data: dict, base_dir: Path | None = None) -> RunSpec:
    """Build a validated RunSpec from a parsed TOML/JSON document."""
    if "problem" not in data:
        raise _spec_error("problem", "", "missing [problem] section")
    prob_table = data["problem"]
    if "file" in prob_table:
        path = Path(prob_table["file"])
        if not path.is_absolute():
            if base_dir is None:
                raise _spec_error("problem", "file", "relative reference needs a spec file path")
            path = base_dir / path
        nested = _read_document(path)
        prob_table = nested.get("problem", nested)
        base_dir = path.parent
    problem = problem_from_dict(prob_table, base_dir)

    schedule = _schedule_from_dict(data.get("schedule", {}), problem.structure.n_blocks)

    run_table = data.get("run", {})
    c_raw = run_table.get("c", "auto")
    if isinstance(c_raw, str):
        if c_raw != "auto":
            raise _spec_error("run", "c", f"expected 'auto' or a number, got {c_raw!r}")
        c_mode, c_value = "auto", None
    else:
        c_value = float(c_raw)
        if c_value <= 0.0:
            raise _spec_error("run", "c", f"explicit c must be positive, got {c_value}")
        c_mode = "explicit"

    engine = run_table.get("engine", "simulated")
    if engine not in ENGINES:
        raise _spec_error("run", "engine", f"expected one of {ENGINES}, got {engine!r}")

    reference = run_table.get("reference")
    if reference is not None:
        reference = BlockVector(problem.structure, reference)
    try:
        run_cfg = RunConfig(
            tol=float(run_table.get("tol", 1e-8)),
            max_iter=int(run_table.get("max_iter", 50_000)),
            record_every=int(run_table.get("record_every", 1)),
            reference=reference,
        )
        parallel = ParallelConfig(
            workers=run_table.get("workers"),
            epoch_len=int(run_table.get("epoch_len", 16)),
            staleness_cap=int(run_table.get("staleness_cap", 64)),
        )
    except ParameterError as exc:
        raise _spec_error("run", "", str(exc)) from exc

    out_table = data.get("output", {})
    output_format = out_table.get("format", "jsonl")
    if output_format not in ("csv", "jsonl"):
        raise _spec_error("output", "format", f"expected csv or jsonl, got {output_format!r}")

    return RunSpec(
        problem=problem,
        schedule=schedule,
        c_mode=c_mode,
        c_value=c_value,
        engine=engine,
        run=run_cfg,
        parallel=parallel,
        output_path=out_table.get("path"),
        output_format=output_format,
    )


def _read_document(path: Path) -> dict:
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text.decode("utf-8"))
    # unknown extension: try TOML first, then JSON
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError:
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: neither valid TOML nor valid JSON ({exc})") from exc


def load_run_spec(path) -> RunSpec:
    path = Path(path)
    try:
        data = _read_document(path)
    except tomllib.TOMLDecodeError as exc:
        raise ParameterError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: spec document must be a table at top level")
    return parse_run_spec(data, base_dir=path.parent)


def run_spec_to_json_dict(spec: RunSpec) -> dict:
    run: dict = {
        "engine": spec.engine,
        "c": "auto" if spec.c_mode == "auto" else spec.c_value,
        "tol": spec.run.tol,
        "max_iter": spec.run.max_iter,
        "record_every": spec.run.record_every,
        "epoch_len": spec.parallel.epoch_len,
        "staleness_cap": spec.parallel.staleness_cap,
    }
    if spec.run.reference is not None:
        run["reference"] = spec.run.reference.data.tolist()
    doc = {
        "problem": problem_to_json_dict(spec.problem),
        "schedule": {
            "kind": spec.schedule.kind,
            "s_bound": spec.schedule.s_bound,
            "sync_period": spec.schedule.sync_period,
            "seed": spec.schedule.seed,
        },
        "run": run,
    }
    if spec.output_path is not None or spec.output_format != "jsonl":
        doc["output"] = {"format": spec.output_format}
        if spec.output_path is not None:
            doc["output"]["path"] = spec.output_path
    return doc


def save_run_spec(spec: RunSpec, path):
    Path(path).write_text(json.dumps(run_spec_to_json_dict(spec), indent=2) + "\n",
                          encoding="utf-8")


def demo_spec_path(variant: str) -> Path:
    """Filesystem path of a bundled demo spec (one per catalog variant)."""
    if variant not in DEMO_VARIANTS:
        raise ParameterError(f"unknown demo variant {variant!r}; expected one of {DEMO_VARIANTS}")
    ref = resources.files("asyncprox") / "specs" / f"{variant}.toml"
    with resources.as_file(ref) as p:
        return Path(p)
