"""Strict run configuration: a versioned JSON file that drives the CLI."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

from .energyfields import FieldConfig
from .errors import PnpfError
from .pipeline import PipelineConfig
from .trajgen import GeneratorConfig

__all__ = ["CONFIG_VERSION", "RunConfig", "load_run_config", "parse_run_config"]

CONFIG_VERSION = 1
DEFAULT_PORT = int(os.environ.get("PNPF_PORT", "8731"))


@dataclass
class RunConfig:
    task_file: str | None = None
    generator_spec: dict | None = None  # built-in task generator + kwargs
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    seeds: tuple = (0,)
    output_dir: str = "."
    success_radius: float | None = None
    port: int = DEFAULT_PORT
    tick_rate: float = 50.0

    def __post_init__(self):
        if self.task_file is not None and self.generator_spec is not None:
            raise PnpfError("config: task file and generator spec are exclusive")
        if not self.seeds or any(int(s) != s for s in self.seeds):
            raise PnpfError("config: seeds must be a non-empty integer list")
        if self.tick_rate <= 0:
            raise PnpfError("config: tick_rate must be positive")


def _strict(section: str, data: dict, allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise PnpfError(
            f"config: unknown key(s) in {section}: {', '.join(sorted(unknown))}")


def _dataclass_from(section: str, cls, data: dict, **extra):
    names = [f.name for f in fields(cls)]
    _strict(section, data, names)
    kw = dict(data)
    for key in ("hidden", "hyper_hidden"):
        if key in kw:
            kw[key] = tuple(kw[key])
    kw.update(extra)
    return cls(**kw)


_GENERATOR_KINDS = ("figure-eight", "double-knot-like", "pulley-like",
                    "lasa", "periodic-eight")


def parse_run_config(data: dict, base_dir: str = ".") -> RunConfig:
    if not isinstance(data, dict):
        raise PnpfError("config: top level must be a JSON object")
    _strict("config", data, ["version", "task", "pipeline", "seeds",
                             "output_dir", "success_radius", "serve"])
    if data.get("version") != CONFIG_VERSION:
        raise PnpfError(f"config: version must be {CONFIG_VERSION}")
    task_file = None
    generator_spec = None
    task = data.get("task")
    if task is not None:
        _strict("task", task, ["file", "generator"])
        if ("file" in task) == ("generator" in task):
            raise PnpfError("config: task needs exactly one of file/generator")
        if "file" in task:
            task_file = os.path.join(base_dir, task["file"])
            if not os.path.isfile(task_file):
                raise PnpfError(f"config: task file not found: {task_file}")
        else:
            gen = dict(task["generator"])
            kind = gen.get("kind")
            if kind not in _GENERATOR_KINDS:
                raise PnpfError(
                    f"config: generator kind must be one of {_GENERATOR_KINDS}")
            generator_spec = gen

    pipe_data = dict(data.get("pipeline") or {})
    sub = {}
    for name, cls in (("generator", GeneratorConfig),
                      ("nominal_field", FieldConfig),
                      ("safety_field", FieldConfig)):
        if name in pipe_data:
            sub[name] = _dataclass_from(f"pipeline.{name}", cls,
                                        pipe_data.pop(name))
    pipeline = _dataclass_from("pipeline", PipelineConfig, pipe_data, **sub)

    serve = dict(data.get("serve") or {})
    _strict("serve", serve, ["port", "tick_rate"])
    return RunConfig(task_file=task_file, generator_spec=generator_spec,
                     pipeline=pipeline,
                     seeds=tuple(data.get("seeds", (0,))),
                     output_dir=data.get("output_dir", "."),
                     success_radius=data.get("success_radius"),
                     port=int(serve.get("port", DEFAULT_PORT)),
                     tick_rate=float(serve.get("tick_rate", 50.0)))


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise PnpfError(f"config: cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise PnpfError(
            f"config: invalid JSON at line {e.lineno} column {e.colno}") from e
    return parse_run_config(data, base_dir=os.path.dirname(str(path)) or ".")


def make_task(cfg: RunConfig):
    """Load or synthesize the task a RunConfig points at."""
    from .datasets import (gen_intersecting_task, gen_periodic_eight,
                           lasa_shape_path, load_lasa, load_task)
    if cfg.task_file is not None:
        return load_task(cfg.task_file)
    if cfg.generator_spec is None:
        raise PnpfError("config: no task source given")
    spec = dict(cfg.generator_spec)
    kind = spec.pop("kind")
    if kind == "periodic-eight":
        return gen_periodic_eight(**spec)
    if kind == "lasa":
        return load_lasa(lasa_shape_path(spec["name"]))
    return gen_intersecting_task(kind, **spec)
