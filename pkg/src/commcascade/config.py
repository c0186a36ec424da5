"""Experiment configuration: JSON schema, validation, sweep resolution.

A config document declares the model, which engines to run, sweep axes,
replication counts and numerics. CLI flags override single fields. All
randomness anywhere downstream derives from (seed, cell index, replication
index), making outputs reproducible bit for bit.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .dist import DEFAULT_TAIL_TOL, build_distribution
from .errors import ConfigError
from .genmodel import (DegreeTargetedSeeding, GlobalSeeding, LinearThreshold,
                       ModelSpec, PerCommunitySeeding, TableThreshold)
from .odeflow import OdeConfig

ENGINES = ("simulate", "meanfield", "ode", "contagion")


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level config must be a JSON object")
    return doc


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return doc[key]


def threshold_from_dict(decl, where: str = "model.threshold"):
    if not isinstance(decl, dict) or len(decl) != 1:
        raise ConfigError(f"{where}: expected a one-key object")
    (kind, value), = decl.items()
    try:
        if kind == "linear":
            return LinearThreshold(float(value))
        if kind == "table":
            return TableThreshold({(int(ds), int(dc), int(comm)): float(k)
                                   for ds, dc, comm, k in value})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown threshold kind {kind!r}")


def seeding_from_dict(decl, where: str = "model.seeding"):
    if not isinstance(decl, dict) or len(decl) != 1:
        raise ConfigError(f"{where}: expected a one-key object")
    (kind, value), = decl.items()
    try:
        if kind == "global":
            return GlobalSeeding(float(value))
        if kind == "per_community":
            a1, a2 = value
            return PerCommunitySeeding(float(a1), float(a2))
        if kind == "degree_targeted":
            b1, b2 = value
            return DegreeTargetedSeeding(float(b1), float(b2))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown seeding kind {kind!r}")


def model_from_dict(decl: dict, tail_tol: float = DEFAULT_TAIL_TOL) -> ModelSpec:
    where = "model"
    if not isinstance(decl, dict):
        raise ConfigError(f"{where}: expected an object")
    try:
        p1 = build_distribution(_require(decl, "p1", where), tail_tol)
        p2 = build_distribution(_require(decl, "p2", where), tail_tol)
        pm = build_distribution(_require(decl, "pm", where), tail_tol)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    threshold = threshold_from_dict(_require(decl, "threshold", where))
    seeding = seeding_from_dict(_require(decl, "seeding", where))
    try:
        return ModelSpec(p1=p1, p2=p2, pm=pm,
                         n1=int(_require(decl, "n1", where)),
                         n2=int(_require(decl, "n2", where)),
                         threshold=threshold, seeding=seeding)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _resolve_path(doc: dict, dotted: str):
    node = doc
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"sweep: parameter path {dotted!r} not found")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"sweep: parameter path {dotted!r} not found")
    return node, parts[-1]


@dataclass(frozen=True)
class SweepAxis:
    param: str
    values: tuple


@dataclass
class ExperimentConfig:
    """Validated experiment plan plus the resolved raw document."""

    raw: dict
    engines: tuple[str, ...]
    axes: tuple[SweepAxis, ...]
    replications: int
    seed: int
    record_every: int
    tail_tol: float
    ode: OdeConfig
    overlay_sim: bool
    emit_paths: bool
    contagion_alphas: tuple[float, ...] | None

    def model(self) -> ModelSpec:
        return model_from_dict(self.raw["model"], self.tail_tol)

    def cells(self) -> list[dict]:
        """Resolved config documents, one per sweep cell, in deterministic order."""
        if not self.axes:
            return [copy.deepcopy(self.raw)]
        out = []
        for combo in product(*(axis.values for axis in self.axes)):
            doc = copy.deepcopy(self.raw)
            for axis, value in zip(self.axes, combo):
                node, leaf = _resolve_path(doc, axis.param)
                node[leaf] = value
            out.append(doc)
        return out

    def cell_model(self, cell_doc: dict) -> ModelSpec:
        return model_from_dict(cell_doc["model"], self.tail_tol)

    def rng_for(self, cell_index: int, replication: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, cell_index, replication]))


def build_experiment(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    doc = copy.deepcopy(doc)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("step", "eps", "t_max", "mode"):
            doc.setdefault("ode", {})[{"eps": "epsilon"}.get(key, key)] = value
        else:
            doc[key] = value

    _require(doc, "model", "config")
    model_from_dict(doc["model"], float(doc.get("tail_tol", DEFAULT_TAIL_TOL)))

    engines = tuple(doc.get("engines", ["meanfield"]))
    for engine in engines:
        if engine not in ENGINES:
            raise ConfigError(f"engines: unknown engine {engine!r}")
    if not engines:
        raise ConfigError("engines: empty engine list")

    axes = []
    for i, axis in enumerate(doc.get("sweep", [])):
        where = f"sweep[{i}]"
        param = _require(axis, "param", where)
        values = _require(axis, "values", where)
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{where}: values must be a nonempty list")
        _resolve_path(doc, param)
        axes.append(SweepAxis(param=str(param), values=tuple(values)))

    replications = int(doc.get("replications", 1))
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    record_every = int(doc.get("record_every", 1000))
    if record_every < 1:
        raise ConfigError("record_every must be >= 1")

    ode_doc = doc.get("ode", {})
    try:
        ode = OdeConfig(step=float(ode_doc.get("step", 1e-3)),
                        epsilon=float(ode_doc.get("epsilon", 1e-6)),
                        t_max=(None if ode_doc.get("t_max") is None else float(ode_doc["t_max"])),
                        mode=str(ode_doc.get("mode", "trajectory")),
                        sample_stride=int(ode_doc.get("sample_stride", 1)))
    except ValueError as exc:
        raise ConfigError(f"ode: {exc}") from exc

    alphas = doc.get("contagion", {}).get("alphas")
    return ExperimentConfig(
        raw=doc,
        engines=engines,
        axes=tuple(axes),
        replications=replications,
        seed=int(doc.get("seed", 0)),
        record_every=record_every,
        tail_tol=float(doc.get("tail_tol", DEFAULT_TAIL_TOL)),
        ode=ode,
        overlay_sim=bool(doc.get("evolve", {}).get("overlay_sim", True)),
        emit_paths=bool(doc.get("emit_paths", False)),
        contagion_alphas=None if alphas is None else tuple(float(a) for a in alphas),
    )
