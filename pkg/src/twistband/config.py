"""Run configuration: JSON schema, parsing and validation.

Schema (twistband/config-v1), all lengths dimensionless, energies in
inverse length squared:

{
  "geometry": {"shape": "rectangle", "a": 1.0, "b": 0.7}
            | {"shape": "disc", "r": 1.0}
            | {"shape": "mask", "path": "omega.mask"},
  "h": 0.05,                  # cross-section spacing (ignored for masks)
  "beta": 0.2,                # constant twist rate
  "kmax": 2.0, "nk": 81,      # sweep covers [-kmax, kmax] with nk points
  "nmax": 6,                  # bands per k
  "energies": [15.2],         # window centers for the mourre command
  "delta": 0.1,               # initial window half-width
  "R": 20.0,                  # critical-scan ceiling (optional)
  "tube": {"Ltube": 10.0, "h3": 0.1,
           "profile": {"kind": "gaussian", "eps0": 0.1, "sigma": 1.0}},
  "output_dir": "out",
  "seed": 0,
  "jobs": 1
}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import GeometrySpec
from .tube import TwistProfile

SCHEMA_VERSION = "twistband/config-v1"
MIN_NK = 16


@dataclass
class TubeConfig:
    Ltube: float
    h3: float
    profile_kind: str = "none"
    eps0: float = 0.0
    sigma: float = 1.0
    table_path: str = ""
    ltube_list: tuple = ()

    def profile(self, beta: float) -> TwistProfile:
        if self.profile_kind == "table":
            xs, eps = load_profile_table(self.table_path)
            return TwistProfile(beta=beta, kind="table", table_x=xs, table_eps=eps)
        return TwistProfile(beta=beta, kind=self.profile_kind, eps0=self.eps0, sigma=self.sigma)


@dataclass
class RunConfig:
    geometry: GeometrySpec
    beta: float
    kmax: float
    nk: int
    nmax: int
    energies: list = field(default_factory=list)
    delta: float = 0.1
    R: float | None = None
    tube: TubeConfig | None = None
    output_dir: str = "out"
    seed: int = 0
    jobs: int = 1

    def kgrid(self) -> np.ndarray:
        return np.linspace(-self.kmax, self.kmax, self.nk)

    def echo(self) -> dict:
        geo = {"shape": self.geometry.shape}
        if self.geometry.shape == "rectangle":
            geo.update({"a": self.geometry.a, "b": self.geometry.b})
        elif self.geometry.shape == "disc":
            geo.update({"r": self.geometry.r})
        else:
            geo.update({"path": self.geometry.mask_path})
        doc = {
            "schema": SCHEMA_VERSION,
            "geometry": geo,
            "h": self.geometry.h,
            "beta": self.beta,
            "kmax": self.kmax,
            "nk": self.nk,
            "nmax": self.nmax,
            "energies": list(self.energies),
            "delta": self.delta,
            "R": self.R,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "jobs": self.jobs,
        }
        if self.tube is not None:
            doc["tube"] = {
                "Ltube": self.tube.Ltube,
                "h3": self.tube.h3,
                "profile": {"kind": self.tube.profile_kind, "eps0": self.tube.eps0,
                            "sigma": self.tube.sigma, "table": self.tube.table_path},
            }
        return doc


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ConfigError(f"missing required field '{where}{key}'", field=where + key)
    val = doc[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return int(val)
    if not isinstance(val, kind):
        raise ConfigError(f"field '{where}{key}' has wrong type", field=where + key)
    return val


def _positive(value, name):
    if not value > 0:
        raise ConfigError(f"field '{name}' must be positive", field=name)
    return value


def parse_config(doc: dict, base_dir: str | Path = ".") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", field="")
    geod = _require(doc, "geometry", dict, "")
    shape = _require(geod, "shape", str, "geometry.")
    if shape == "rectangle":
        h = _positive(_require(doc, "h", float, ""), "h")
        geo = GeometrySpec.rectangle(
            _positive(_require(geod, "a", float, "geometry."), "geometry.a"),
            _positive(_require(geod, "b", float, "geometry."), "geometry.b"),
            h,
        )
    elif shape == "disc":
        h = _positive(_require(doc, "h", float, ""), "h")
        geo = GeometrySpec.disc(
            _positive(_require(geod, "r", float, "geometry."), "geometry.r"), h
        )
    elif shape == "mask":
        path = _require(geod, "path", str, "geometry.")
        if not os.path.isabs(path):
            path = str(Path(base_dir) / path)
        geo = GeometrySpec.mask(path)
    else:
        raise ConfigError(f"unknown geometry shape {shape!r}", field="geometry.shape")

    beta = _require(doc, "beta", float, "")
    kmax = _positive(_require(doc, "kmax", float, ""), "kmax")
    nk = _require(doc, "nk", int, "")
    if nk < MIN_NK:
        raise ConfigError(f"nk must be >= {MIN_NK}", field="nk")
    nmax = _positive(_require(doc, "nmax", int, ""), "nmax")

    energies = doc.get("energies", [])
    if not isinstance(energies, list) or any(
        not isinstance(e, (int, float)) or isinstance(e, bool) for e in energies
    ):
        raise ConfigError("'energies' must be a list of numbers", field="energies")
    delta = doc.get("delta", 0.1)
    if not isinstance(delta, (int, float)) or delta <= 0:
        raise ConfigError("'delta' must be a positive number", field="delta")
    R = doc.get("R")
    if R is not None and (not isinstance(R, (int, float)) or isinstance(R, bool)):
        raise ConfigError("'R' must be a number", field="R")

    tube = None
    if "tube" in doc and doc["tube"] is not None:
        td = _require(doc, "tube", dict, "")
        prof = td.get("profile") or {"kind": "none"}
        kind = prof.get("kind", "none")
        if kind not in ("none", "gaussian", "table"):
            raise ConfigError(f"unknown tube profile kind {kind!r}", field="tube.profile.kind")
        table_path = prof.get("table", "")
        if kind == "table":
            if not table_path:
                raise ConfigError("table profile needs 'table' path", field="tube.profile.table")
            if not os.path.isabs(table_path):
                table_path = str(Path(base_dir) / table_path)
        ltube_list = td.get("Ltube_list", ())
        tube = TubeConfig(
            Ltube=_positive(_require(td, "Ltube", float, "tube."), "tube.Ltube"),
            h3=_positive(_require(td, "h3", float, "tube."), "tube.h3"),
            profile_kind=kind,
            eps0=float(prof.get("eps0", 0.0)),
            sigma=float(prof.get("sigma", 1.0)),
            table_path=table_path,
            ltube_list=tuple(float(x) for x in ltube_list),
        )

    out_dir = doc.get("output_dir", "out")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("'seed' must be an integer", field="seed")
    jobs = doc.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("'jobs' must be a positive integer", field="jobs")

    return RunConfig(
        geometry=geo, beta=float(beta), kmax=float(kmax), nk=int(nk), nmax=int(nmax),
        energies=[float(e) for e in energies], delta=float(delta),
        R=float(R) if R is not None else None, tube=tube,
        output_dir=str(out_dir), seed=int(seed), jobs=int(jobs),
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", field="--config") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", field="--config") from exc
    return parse_config(doc, base_dir=Path(path).parent)


def load_profile_table(path):
    """CSV 'x3,eps' rows; header optional."""
    xs, eps = [], []
    try:
        lines = Path(path).read_text().strip().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read profile table {path}: {exc}",
                          field="tube.profile.table") from exc
    for ln in lines:
        ln = ln.strip()
        if not ln or ln.startswith("#") or ln.lower().startswith("x3"):
            continue
        parts = ln.split(",")
        if len(parts) != 2:
            raise ConfigError(f"bad profile row {ln!r}", field="tube.profile.table")
        xs.append(float(parts[0]))
        eps.append(float(parts[1]))
    order = np.argsort(xs)
    return np.asarray(xs)[order], np.asarray(eps)[order]
