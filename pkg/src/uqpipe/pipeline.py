"""Staged analysis runs: configuration, execution, persistence, reports.

A run executes the methodology end to end inside one run directory:

    design -> sample -> screen -> fit -> validate -> sobol -> quantile

``design`` builds an optimized space-filling design, ``sample`` attaches
outputs (a builtin benchmark evaluation, or files produced by an
external simulator), ``screen`` ranks and selects explanatory inputs,
``fit`` builds the joint mean/dispersion metamodel, ``validate``
measures predictivity and interval calibration, and ``sobol`` /
``quantile`` run the metamodel-based analyses.

Every stage writes a ``stage_<name>.json`` artifact keyed by a content
hash of its settings, its seed and its upstream artifacts; rerunning a
pipeline reuses any artifact whose hash still matches instead of
recomputing it, so finished work survives interruptions and partial
runs can be extended without disturbing earlier results.  All stage
seeds derive from the master seed and the stage name alone, so changing
one stage's settings never changes another stage's randomness.

Each invocation rewrites the derived outputs from the stored artifacts:
``report.json`` (machine readable), ``report.txt`` (summary tables),
the delimited exports, and the figures.  Two runs with the same
configuration and seed produce byte-identical outputs.
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import os
from collections.abc import Mapping
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, figures
from .bench import get_benchmark
from .data import LearningSample, ingest_sample, write_matrix_csv
from .design import centered_l2_discrepancy, optimized_lhs
from .errors import ConfigError, DataError, NumericalError, UqpipeError
from .input_space import InputSpace
from .joint_gp import BuildTrace, JointGpConfig, JointGpModel, build_joint
from .quantile import QuantileReport, compute_quantiles
from .screening import ScreeningReport, screen
from .sensitivity import (SobolReport, compute_sobol, dispersion_sensitivity,
                          space_sampler)
from .utils import derive_seed, format_float
from .validation import CoverageCurve, coverage_curve, loo_q2, q2

STAGES = ("design", "sample", "screen", "fit", "validate", "sobol",
          "quantile")

_REPORT_JSON = "report.json"
_REPORT_TEXT = "report.txt"
_LOCK_NAME = "run.lock"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _positive(name: str, value: int) -> int:
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer") from None
    if value < 1:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _unit_open(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number") from None
    if not 0.0 < value < 1.0:
        raise ConfigError(f"{name} must lie in (0, 1), got {value}")
    return value


@dataclass(frozen=True)
class DesignSettings:
    """Design-of-experiments stage settings."""

    n: int = 200
    iters: int = 2000
    restarts: int = 3

    def __post_init__(self):
        object.__setattr__(self, "n", _positive("design.n", self.n))
        if int(self.iters) < 0:
            raise ConfigError("design.iters must be non-negative")
        object.__setattr__(self, "iters", int(self.iters))
        object.__setattr__(self, "restarts",
                           _positive("design.restarts", self.restarts))


@dataclass(frozen=True)
class ScreeningSettings:
    """Input-screening stage settings."""

    alpha: float = 0.1
    method: str = "permutation"
    n_permutations: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "alpha",
                           _unit_open("screening.alpha", self.alpha))
        object.__setattr__(self, "n_permutations",
                           _positive("screening.n_permutations",
                                     self.n_permutations))


@dataclass(frozen=True)
class FitSettings:
    """Joint metamodel stage settings."""

    restarts: int = 5
    warm_restarts: int = 2
    dispersion_floor_factor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "restarts",
                           _positive("fit.restarts", self.restarts))
        object.__setattr__(self, "warm_restarts",
                           _positive("fit.warm_restarts",
                                     self.warm_restarts))
        object.__setattr__(self, "dispersion_floor_factor",
                           float(self.dispersion_floor_factor))


@dataclass(frozen=True)
class ValidationSettings:
    """Validation stage settings (test-sample size in benchmark mode)."""

    n_test: int = 500

    def __post_init__(self):
        object.__setattr__(self, "n_test",
                           _positive("validation.n_test", self.n_test))


@dataclass(frozen=True)
class SensitivitySettings:
    """Sensitivity stage settings."""

    n_mc: int = 100_000
    second_order_top: int = 4
    n_bootstrap: int = 200

    def __post_init__(self):
        object.__setattr__(self, "n_mc",
                           _positive("sensitivity.n_mc", self.n_mc))
        if int(self.second_order_top) < 0:
            raise ConfigError("sensitivity.second_order_top must be >= 0")
        object.__setattr__(self, "second_order_top",
                           int(self.second_order_top))
        object.__setattr__(self, "n_bootstrap",
                           _positive("sensitivity.n_bootstrap",
                                     self.n_bootstrap))


@dataclass(frozen=True)
class QuantileSettings:
    """Quantile stage settings."""

    p: float = 0.95
    n_mc: int = 100_000
    n_points: int = 2000
    n_traj: int = 1000
    n_bootstrap: int = 500
    ci_level: float = 0.90

    def __post_init__(self):
        object.__setattr__(self, "p", _unit_open("quantile.p", self.p))
        object.__setattr__(self, "ci_level",
                           _unit_open("quantile.ci_level", self.ci_level))
        for name in ("n_mc", "n_points", "n_traj", "n_bootstrap"):
            object.__setattr__(self, name,
                               _positive(f"quantile.{name}",
                                         getattr(self, name)))


@dataclass(frozen=True)
class ExternalData:
    """File paths for an externally evaluated sample."""

    x: str
    y: str
    test_x: str | None = None
    test_y: str | None = None

    def __post_init__(self):
        if (self.test_x is None) != (self.test_y is None):
            raise ConfigError(
                "external test data needs both test_x and test_y"
            )


_SECTION_TYPES = {
    "design": DesignSettings,
    "screening": ScreeningSettings,
    "fit": FitSettings,
    "validation": ValidationSettings,
    "sensitivity": SensitivitySettings,
    "quantile": QuantileSettings,
}


def _build_section(cls, doc, label: str):
    doc = {} if doc is None else doc
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config section {label!r} must be a mapping")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {label}: {', '.join(unknown)}")
    try:
        return cls(**doc)
    except UqpipeError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {label} section: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: model source, input space, stage settings.

    Exactly one model source is set: ``bench`` names a builtin
    benchmark (which carries its own input space), or ``external``
    points at sample files and ``space`` declares the input space.
    """

    seed: int = 0
    bench: str | None = None
    external: ExternalData | None = None
    space: InputSpace | None = None
    design: DesignSettings = field(default_factory=DesignSettings)
    screening: ScreeningSettings = field(default_factory=ScreeningSettings)
    fit: FitSettings = field(default_factory=FitSettings)
    validation: ValidationSettings = field(
        default_factory=ValidationSettings)
    sensitivity: SensitivitySettings = field(
        default_factory=SensitivitySettings)
    quantile: QuantileSettings = field(default_factory=QuantileSettings)

    def __post_init__(self):
        try:
            object.__setattr__(self, "seed", int(self.seed))
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        if (self.bench is None) == (self.external is None):
            raise ConfigError(
                "configure exactly one model source: model.bench or "
                "model.external"
            )
        if self.bench is not None and self.space is not None:
            raise ConfigError(
                "a builtin benchmark carries its own input space; "
                "remove the space section"
            )
        if self.external is not None and self.space is None:
            raise ConfigError("external data needs a space declaration")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RunConfig":
        if not isinstance(doc, Mapping):
            raise ConfigError("configuration must be a mapping")
        known = {"seed", "model", "space", *_SECTION_TYPES}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(
                f"unknown top-level config key(s): {', '.join(unknown)}"
            )
        model = doc.get("model")
        if not isinstance(model, Mapping) or not model:
            raise ConfigError(
                "config needs a model section with bench or external"
            )
        bad = sorted(set(model) - {"bench", "external"})
        if bad:
            raise ConfigError(f"unknown key(s) in model: {', '.join(bad)}")
        bench = model.get("bench")
        external = model.get("external")
        if external is not None:
            external = _build_section(ExternalData, external,
                                      "model.external")
        space = doc.get("space")
        if space is not None:
            try:
                space = InputSpace.from_dicts(space)
            except UqpipeError:
                raise
            except (TypeError, KeyError, AttributeError) as exc:
                raise ConfigError(
                    f"invalid space declaration: {exc}"
                ) from exc
        sections = {
            name: _build_section(klass, doc.get(name), name)
            for name, klass in _SECTION_TYPES.items()
        }
        return cls(seed=doc.get("seed", 0),
                   bench=None if bench is None else str(bench),
                   external=external, space=space, **sections)

    def to_dict(self) -> dict:
        model = ({"bench": self.bench} if self.bench is not None
                 else {"external": dataclasses.asdict(self.external)})
        doc = {"seed": self.seed, "model": model}
        if self.space is not None:
            doc["space"] = self.space.to_dicts()
        for name in _SECTION_TYPES:
            doc[name] = dataclasses.asdict(getattr(self, name))
        return doc


def load_config(path) -> RunConfig:
    """Parse a YAML configuration file into a validated RunConfig."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        raise ConfigError(f"{path}: empty configuration")
    return RunConfig.from_dict(doc)


def config_hash(config: RunConfig) -> str:
    """Stable digest of the resolved configuration."""
    return _digest_of(config.to_dict())


# ---------------------------------------------------------------------------
# Run-directory plumbing
# ---------------------------------------------------------------------------

def _dump_json(doc) -> str:
    try:
        return json.dumps(doc, indent=2, sort_keys=True,
                          allow_nan=False) + "\n"
    except ValueError as exc:
        raise NumericalError(
            f"result contains non-finite values: {exc}"
        ) from exc


def _digest_of(doc) -> str:
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True).encode("utf-8")
    ).hexdigest()


def _file_digest(path) -> str:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


@contextmanager
def _directory_lock(run_dir: Path):
    """Exclusive ownership of a run directory for one process."""
    run_dir.mkdir(parents=True, exist_ok=True)
    lock = run_dir / _LOCK_NAME
    for attempt in range(2):
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            break
        except FileExistsError:
            try:
                holder = int(lock.read_text(encoding="utf-8").strip())
            except (OSError, ValueError):
                holder = None
            if holder is not None and _pid_alive(holder):
                raise DataError(
                    f"run directory {run_dir} is locked by process "
                    f"{holder}; wait for it or remove {lock}"
                ) from None
            # Stale lock from a dead process: reclaim it.
            lock.unlink(missing_ok=True)
    else:  # pragma: no cover - two racing reclaims
        raise DataError(f"could not acquire lock {lock}")
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with io.open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_csv_cell(v) for v in row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class StageResult:
    """A stage's content hash and JSON payload, plus reuse provenance."""

    name: str
    digest: str
    payload: dict
    reused: bool


# ---------------------------------------------------------------------------
# The run itself
# ---------------------------------------------------------------------------

class PipelineRun:
    """One analysis run bound to a configuration and a run directory."""

    def __init__(self, config: RunConfig, out_dir):
        self.config = config
        self.dir = Path(out_dir)
        if config.bench is not None:
            self.benchmark = get_benchmark(config.bench)
            self.space = self.benchmark.space
        else:
            self.benchmark = None
            self.space = config.space
        self._results: dict[str, StageResult] = {}
        self._joint: JointGpModel | None = None
        self._messages: list[str] = []

    # -- orchestration ---------------------------------------------------

    def execute(self, target: str | None = None) -> dict:
        """Run stages and rebuild the run directory's outputs.

        ``target`` limits the run to one stage and its dependency
        chain; ``None`` runs everything.  Returns the report document.
        Stages whose stored artifact hash still matches are loaded
        instead of recomputed.
        """
        if target is None:
            chain = [name for name in STAGES
                     if name != "design" or self.benchmark is not None]
        elif target in STAGES:
            chain = self._chain(target)
        else:
            raise ConfigError(
                f"unknown stage {target!r}; choose from {', '.join(STAGES)}"
            )
        with _directory_lock(self.dir):
            _write_text(self.dir / "config.json",
                        _dump_json(self.config.to_dict()))
            for name in chain:
                self._ensure(name)
            for name in STAGES:
                if name not in self._results:
                    self._peek(name)
            doc = self._report_doc()
            self._write_artifacts()
            _write_text(self.dir / _REPORT_JSON, _dump_json(doc))
            _write_text(self.dir / _REPORT_TEXT, self._report_text(doc))
        return doc

    @property
    def messages(self) -> list[str]:
        """Per-stage progress notes from the last execute call."""
        return list(self._messages)

    def _deps(self, name: str) -> tuple[str, ...]:
        if name == "sample":
            # External samples arrive as files; no design stage needed.
            return ("design",) if self.benchmark is not None else ()
        return {
            "design": (),
            "screen": ("sample",),
            "fit": ("screen",),
            "validate": ("fit",),
            "sobol": ("fit",),
            "quantile": ("fit",),
        }[name]

    def _chain(self, target: str) -> list[str]:
        needed: set[str] = set()

        def visit(name: str):
            for dep in self._deps(name):
                visit(dep)
            needed.add(name)

        visit(target)
        return [name for name in STAGES if name in needed]

    def _stage_seed(self, name: str) -> int:
        return derive_seed(self.config.seed, f"stage/{name}")

    def _stage_path(self, name: str) -> Path:
        return self.dir / f"stage_{name}.json"

    def _digest(self, name: str) -> str:
        return _digest_of(self._fingerprint(name))

    def _ensure(self, name: str) -> StageResult:
        found = self._peek(name)
        if found is not None:
            return found
        for dep in self._deps(name):
            self._ensure(dep)
        try:
            digest = self._digest(name)
            payload = getattr(self, f"_run_{name}")()
        except UqpipeError as exc:
            raise type(exc)(f"[stage {name}] {exc}") from exc
        # Round-trip through JSON so computed and reused payloads are
        # indistinguishable downstream.
        text = _dump_json({"hash": digest, "payload": payload})
        _write_text(self._stage_path(name), text)
        payload = json.loads(text)["payload"]
        result = StageResult(name=name, digest=digest, payload=payload,
                             reused=False)
        self._results[name] = result
        self._messages.append(f"{name}: computed")
        return result

    def _peek(self, name: str) -> StageResult | None:
        """Load a stage artifact if present and still current."""
        if name in self._results:
            return self._results[name]
        for dep in self._deps(name):
            if self._peek(dep) is None:
                return None
        path = self._stage_path(name)
        if not path.exists():
            return None
        try:
            digest = self._digest(name)
        except UqpipeError:
            # Fingerprints of file-based stages need the files present;
            # without them nothing can be validated as current.
            return None
        try:
            stored = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        if stored.get("hash") != digest:
            return None
        result = StageResult(name=name, digest=digest,
                             payload=stored["payload"], reused=True)
        self._results[name] = result
        self._messages.append(f"{name}: reused")
        return result

    # -- fingerprints ------------------------------------------------------

    def _fingerprint(self, name: str) -> dict:
        doc = {
            "stage": name,
            "seed": self._stage_seed(name),
            "space": self.space.to_dicts(),
            "upstream": {dep: self._results[dep].digest
                         for dep in self._deps(name)},
        }
        cfg = self.config
        if name == "design":
            doc["settings"] = dataclasses.asdict(cfg.design)
        elif name == "sample":
            if self.benchmark is not None:
                doc["source"] = {"bench": cfg.bench}
            else:
                doc["source"] = {
                    "x": _file_digest(cfg.external.x),
                    "y": _file_digest(cfg.external.y),
                }
        elif name == "screen":
            doc["settings"] = dataclasses.asdict(cfg.screening)
        elif name == "fit":
            doc["settings"] = dataclasses.asdict(cfg.fit)
        elif name == "validate":
            doc["settings"] = dataclasses.asdict(cfg.validation)
            if self.benchmark is not None:
                doc["source"] = {"bench": cfg.bench}
            elif cfg.external.test_x is not None:
                doc["source"] = {
                    "test_x": _file_digest(cfg.external.test_x),
                    "test_y": _file_digest(cfg.external.test_y),
                }
            else:
                doc["source"] = None
        elif name == "sobol":
            doc["settings"] = dataclasses.asdict(cfg.sensitivity)
            doc["settings"]["screening_alpha"] = cfg.screening.alpha
            doc["settings"]["screening_method"] = cfg.screening.method
            doc["upstream"]["sample"] = self._results["sample"].digest
        elif name == "quantile":
            doc["settings"] = dataclasses.asdict(cfg.quantile)
            doc["upstream"]["sample"] = self._results["sample"].digest
        return doc

    # -- shared reconstructions -------------------------------------------

    def _sample_obj(self) -> LearningSample:
        payload = self._results["sample"].payload
        return LearningSample(x=np.asarray(payload["x"], dtype=float),
                              y=np.asarray(payload["y"], dtype=float),
                              names=tuple(payload["names"]))

    def _joint_obj(self) -> JointGpModel:
        if self._joint is None:
            self._joint = JointGpModel.from_dict(
                self._results["fit"].payload["model"])
        return self._joint

    # -- stages -------------------------------------------------------------

    def _run_design(self) -> dict:
        settings = self.config.design
        design = optimized_lhs(settings.n, self.space.dim,
                               iters=settings.iters,
                               restarts=settings.restarts,
                               seed=self._stage_seed("design"))
        return {
            "n": int(design.n),
            "dim": int(design.dim),
            "names": self.space.names,
            "discrepancy": centered_l2_discrepancy(design),
            "unit": design.unit.tolist(),
        }

    def _run_sample(self) -> dict:
        if self.benchmark is not None:
            design = self._results["design"].payload
            unit = np.asarray(design["unit"], dtype=float)
            physical = self.space.transform(unit)
            y = self.benchmark.evaluate(physical)
            x, source = physical, f"bench:{self.config.bench}"
        else:
            external = self.config.external
            sample = ingest_sample(external.x, external.y,
                                   expected_names=self.space.names)
            earlier = self._peek("design")
            if earlier is not None and earlier.payload["n"] != sample.n:
                raise DataError(
                    f"external outputs have {sample.n} rows but the "
                    f"exported design has {earlier.payload['n']}; "
                    "evaluate the full design before resuming"
                )
            x, y = sample.x, sample.y
            source = f"external:{Path(external.x).name}"
        return {
            "n": int(x.shape[0]),
            "dim": int(x.shape[1]),
            "names": self.space.names,
            "source": source,
            "x": x.tolist(),
            "y": np.asarray(y, dtype=float).tolist(),
        }

    def _run_screen(self) -> dict:
        settings = self.config.screening
        report = screen(self._sample_obj(), alpha=settings.alpha,
                        method=settings.method,
                        n_permutations=settings.n_permutations,
                        seed=self._stage_seed("screen"))
        return report.to_dict()

    def _run_fit(self) -> dict:
        settings = self.config.fit
        screening = ScreeningReport.from_dict(
            self._results["screen"].payload)
        model, trace = build_joint(
            self._sample_obj(), screening,
            config=JointGpConfig(
                restarts=settings.restarts,
                warm_restarts=settings.warm_restarts,
                dispersion_floor_factor=settings.dispersion_floor_factor),
            seed=self._stage_seed("fit"))
        names = self.space.names
        return {
            "model": model.to_dict(),
            "trace": trace.to_dict(),
            "explanatory": [names[i] for i in model.explanatory],
            "residual": [names[i] for i in model.residual_inputs],
            "build_q2": trace.final_q2(),
            "loo_q2": loo_q2(model),
        }

    def _run_validate(self) -> dict:
        joint = self._joint_obj()
        payload: dict = {"loo_q2": self._results["fit"].payload["loo_q2"],
                         "test": None}
        test = self._test_sample()
        if test is None:
            return payload
        mean, _ = joint.predict_mean(test.x)
        active = list(joint.gp_mean_hom.active_inputs)
        homo = coverage_curve(joint.gp_mean_hom,
                              LearningSample(x=test.x[:, active], y=test.y))
        hetero = coverage_curve(joint, test)
        payload["test"] = {
            "n": int(test.n),
            "q2": q2(test.y, mean),
            "observed": test.y.tolist(),
            "predicted": mean.tolist(),
            "coverage": {
                "homoscedastic": homo.to_dict(),
                "heteroscedastic": hetero.to_dict(),
            },
            "coverage_max_deviation": {
                "homoscedastic": homo.max_deviation(),
                "heteroscedastic": hetero.max_deviation(),
            },
        }
        return payload

    def _test_sample(self) -> LearningSample | None:
        if self.benchmark is not None:
            n_test = self.config.validation.n_test
            x = self.space.sample(n_test, self._stage_seed("validate"))
            return LearningSample(x=x, y=self.benchmark.evaluate(x),
                                  names=tuple(self.space.names))
        external = self.config.external
        if external.test_x is None:
            return None
        return ingest_sample(external.test_x, external.test_y,
                             expected_names=self.space.names)

    def _run_sobol(self) -> dict:
        settings = self.config.sensitivity
        joint = self._joint_obj()
        sample = self._sample_obj()
        sampler = space_sampler(self.space)
        report = compute_sobol(joint, sampler, sample, n_mc=settings.n_mc,
                               seed=self._stage_seed("sobol"),
                               second_order_top=settings.second_order_top,
                               n_bootstrap=settings.n_bootstrap)
        drivers = dispersion_sensitivity(
            joint, sample, alpha=self.config.screening.alpha,
            n_permutations=self.config.screening.n_permutations,
            seed=self._stage_seed("sobol"),
            method=self.config.screening.method)
        return {"indices": report.to_dict(),
                "dispersion_drivers": drivers.to_dict()}

    def _run_quantile(self) -> dict:
        settings = self.config.quantile
        report = compute_quantiles(
            self._joint_obj(), space_sampler(self.space),
            self._sample_obj(), p=settings.p, n_mc=settings.n_mc,
            n_points=settings.n_points, n_traj=settings.n_traj,
            n_bootstrap=settings.n_bootstrap, ci_level=settings.ci_level,
            seed=self._stage_seed("quantile"))
        return report.to_dict()

    # -- derived outputs -----------------------------------------------------

    def _write_artifacts(self):
        writers = {
            "design": self._export_design,
            "sample": self._export_sample,
            "screen": self._export_screen,
            "fit": self._export_fit,
            "validate": self._export_validate,
            "sobol": self._export_sobol,
            "quantile": self._export_quantile,
        }
        for name in STAGES:
            if name in self._results:
                writers[name](self._results[name].payload)

    def _export_design(self, payload: dict):
        unit = np.asarray(payload["unit"], dtype=float)
        write_matrix_csv(self.dir / "design.csv",
                         self.space.transform(unit), payload["names"])

    def _export_sample(self, payload: dict):
        names = list(payload["names"])
        if "output" in names:
            raise DataError(
                "input name 'output' collides with the sample export "
                "column; rename that input"
            )
        x = np.asarray(payload["x"], dtype=float)
        y = np.asarray(payload["y"], dtype=float)
        write_matrix_csv(self.dir / "sample.csv",
                         np.hstack([x, y[:, None]]), names + ["output"])

    def _export_screen(self, payload: dict):
        report = ScreeningReport.from_dict(payload)
        rows = sorted(report.inputs, key=lambda r: (-r.r2_hsic, r.index))
        _write_csv(self.dir / "screening.csv",
                   ("input", "rank", "r2_hsic", "p_value", "selected"),
                   [(r.name, r.rank, r.r2_hsic, r.p_value, r.selected)
                    for r in rows])
        figures.plot_screening(report, self.dir / "figures" /
                               "screening.png")

    def _export_fit(self, payload: dict):
        trace = BuildTrace.from_dict(payload["trace"])
        _write_csv(self.dir / "build_trace.csv",
                   ("step", "input", "loo_q2"),
                   trace.to_rows())
        _write_text(self.dir / "model.json", _dump_json(payload["model"]))
        figures.plot_build_trace(trace, self.dir / "figures" /
                                 "build_trace.png")

    def _export_validate(self, payload: dict):
        test = payload["test"]
        if test is None:
            return
        curves = {
            label: CoverageCurve.from_dict(doc)
            for label, doc in test["coverage"].items()
        }
        first = next(iter(curves.values()))
        _write_csv(self.dir / "coverage.csv",
                   ("alpha", *sorted(curves)),
                   [(alpha, *(curves[label].observed[i]
                              for label in sorted(curves)))
                    for i, alpha in enumerate(first.alphas)])
        _write_csv(self.dir / "predicted_vs_observed.csv",
                   ("observed", "predicted"),
                   list(zip(test["observed"], test["predicted"])))
        figures.plot_coverage(curves, self.dir / "figures" / "coverage.png")
        figures.plot_predicted_vs_observed(
            np.asarray(test["observed"]), np.asarray(test["predicted"]),
            self.dir / "figures" / "predicted_vs_observed.png")

    def _export_sobol(self, payload: dict):
        report = SobolReport.from_dict(payload["indices"])
        rows = []
        for entry in (*report.first, *report.second, *report.total_pii,
                      report.s_t_eps):
            rows.append(("+".join(entry.names) or "residual-group",
                         entry.kind, entry.estimate, entry.std_error,
                         entry.clamped))
        _write_csv(self.dir / "sobol.csv",
                   ("inputs", "kind", "estimate", "std_error", "clamped"),
                   rows)
        figures.plot_sobol(report, self.dir / "figures" / "sobol.png")

    def _export_quantile(self, payload: dict):
        report = QuantileReport.from_dict(payload)
        _write_csv(self.dir / "quantile.csv",
                   ("method", "estimate", "ci_low", "ci_high", "ci_level"),
                   [(e.method, e.estimate, e.ci_low, e.ci_high, e.ci_level)
                    for e in report.entries])
        figures.plot_quantile(report, self.dir / "figures" / "quantile.png")

    # -- reports ------------------------------------------------------------

    def _report_doc(self) -> dict:
        stages: dict = {}
        for name in STAGES:
            result = self._results.get(name)
            if result is None:
                stages[name] = {"status": "skipped"}
            else:
                stages[name] = {"status": "ok",
                                **self._report_section(name, result.payload)}
        return {
            "provenance": {
                "tool": "uqpipe",
                "version": __version__,
                "seed": self.config.seed,
                "config_sha256": config_hash(self.config),
            },
            "config": self.config.to_dict(),
            "stages": stages,
        }

    def _report_section(self, name: str, payload: dict) -> dict:
        if name == "design":
            return {"n": payload["n"], "dim": payload["dim"],
                    "discrepancy": payload["discrepancy"],
                    "file": "design.csv"}
        if name == "sample":
            return {"n": payload["n"], "dim": payload["dim"],
                    "source": payload["source"], "file": "sample.csv"}
        if name == "screen":
            return {**payload, "file": "screening.csv",
                    "figure": "figures/screening.png"}
        if name == "fit":
            return {"explanatory": payload["explanatory"],
                    "residual": payload["residual"],
                    "trace": payload["trace"],
                    "build_q2": payload["build_q2"],
                    "loo_q2": payload["loo_q2"],
                    "model_file": "model.json",
                    "file": "build_trace.csv",
                    "figure": "figures/build_trace.png"}
        if name == "validate":
            doc = {"loo_q2": payload["loo_q2"], "test": None}
            test = payload["test"]
            if test is not None:
                doc["test"] = {
                    "n": test["n"], "q2": test["q2"],
                    "coverage": test["coverage"],
                    "coverage_max_deviation":
                        test["coverage_max_deviation"],
                    "files": ["coverage.csv", "predicted_vs_observed.csv"],
                    "figures": ["figures/coverage.png",
                                "figures/predicted_vs_observed.png"],
                }
            return doc
        if name == "sobol":
            return {**payload, "file": "sobol.csv",
                    "figure": "figures/sobol.png"}
        return {**payload, "file": "quantile.csv",
                "figure": "figures/quantile.png"}

    def _report_text(self, doc: dict) -> str:
        lines: list[str] = []
        prov = doc["provenance"]
        model = doc["config"]["model"]
        source = (f"bench:{model['bench']}" if "bench" in model
                  else f"external:{model['external']['x']}")
        lines += [
            "uqpipe run report",
            "=================",
            f"version       : {prov['version']}",
            f"master seed   : {prov['seed']}",
            f"config sha256 : {prov['config_sha256']}",
            f"model source  : {source}",
        ]
        for name in STAGES:
            section = doc["stages"][name]
            lines.append("")
            if section["status"] == "skipped":
                lines.append(f"[{name}] skipped")
                continue
            lines.append(f"[{name}]")
            lines += self._format_section(name, section)
        return "\n".join(lines) + "\n"

    @staticmethod
    def _format_section(name: str, section: dict) -> list[str]:
        if name == "design":
            return [f"  points: {section['n']}   inputs: {section['dim']}"
                    f"   centered-L2 discrepancy: "
                    f"{section['discrepancy']:.6g}"]
        if name == "sample":
            return [f"  rows: {section['n']}   source: "
                    f"{section['source']}"]
        if name == "screen":
            rows = sorted(section["inputs"],
                          key=lambda r: (-r["r2_hsic"], r["index"]))
            out = [f"  {section['method']} test, alpha="
                   f"{section['alpha']:g}",
                   f"  {'input':<14}{'rank':>5}{'r2_hsic':>12}"
                   f"{'p-value':>12}  selected"]
            for r in rows:
                rank = "-" if r["rank"] is None else str(r["rank"])
                out.append(
                    f"  {r['name']:<14}{rank:>5}{r['r2_hsic']:>12.6f}"
                    f"{r['p_value']:>12.6g}  "
                    f"{'yes' if r['selected'] else 'no'}")
            return out
        if name == "fit":
            out = [f"  explanatory: {', '.join(section['explanatory'])}"]
            if section["residual"]:
                out.append(f"  residual group: "
                           f"{', '.join(section['residual'])}")
            out.append(f"  {'step':<6}{'input':<14}{'loo_q2':>10}")
            for step in section["trace"]["steps"]:
                out.append(f"  {step['step']:<6}{step['input_name']:<14}"
                           f"{step['loo_q2']:>10.4f}")
            out.append(f"  final build Q2: {section['build_q2']:.4f}   "
                       f"leave-one-out Q2: {section['loo_q2']:.4f}")
            return out
        if name == "validate":
            out = [f"  leave-one-out Q2: {section['loo_q2']:.4f}"]
            test = section["test"]
            if test is None:
                out.append("  no test sample; interval calibration "
                           "not assessed")
            else:
                dev = test["coverage_max_deviation"]
                out.append(f"  test rows: {test['n']}   test Q2: "
                           f"{test['q2']:.4f}")
                out.append(
                    "  coverage max deviation: "
                    + "   ".join(f"{label} {value:.4f}"
                                 for label, value in sorted(dev.items())))
            return out
        if name == "sobol":
            indices = section["indices"]
            var = indices["var_y"]
            out = [f"  sample size N: {indices['mc_size']}",
                   f"  {'inputs':<14}{'kind':<12}{'estimate':>10}"
                   f"{'std err':>10}"]
            for entry in (*indices["first"], *indices["second"],
                          *indices["total_pii"], indices["s_t_eps"]):
                label = "+".join(entry["names"]) or "residual-group"
                out.append(f"  {label:<14}{entry['kind']:<12}"
                           f"{entry['estimate']:>10.4f}"
                           f"{entry['std_error']:>10.4f}")
            out.append(
                f"  variance: empirical {var['empirical']:.6g}   "
                f"metamodel {var['metamodel']:.6g}   mean part "
                f"{var['mean_component']:.6g}   dispersion "
                f"{var['mean_dispersion']:.6g}")
            drivers = [r["name"] for r in
                       section["dispersion_drivers"]["inputs"]
                       if r["selected"]]
            out.append("  dispersion drivers: "
                       + (", ".join(drivers) if drivers else "none"))
            return out
        out = [f"  probability level: {section['p']:g}"]
        out.append(f"  {'method':<16}{'estimate':>12}  interval")
        for entry in section["methods"]:
            if "ci" in entry:
                interval = (f"[{entry['ci'][0]:.6g}, "
                            f"{entry['ci'][1]:.6g}] at "
                            f"{entry['ci_level']:.0%}")
            else:
                interval = "-"
            out.append(f"  {entry['method']:<16}"
                       f"{entry['estimate']:>12.6g}  {interval}")
        return out


def run_pipeline(config: RunConfig, out_dir,
                 target: str | None = None) -> dict:
    """Execute the staged analysis and return the report document."""
    return PipelineRun(config, out_dir).execute(target)
