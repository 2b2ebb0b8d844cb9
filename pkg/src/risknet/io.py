"""Model files: JSON-schema validation and construction of model objects."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match
from referencing import Registry, Resource

from .cb_network import CbNetwork, SubsidiarySpec
from .efficiency import Subsidiary
from .levy_core import ClaimLaw, LevyModel
from .map_scale import MapModel

SCHEMAS = ("claim", "model", "subsidiary", "network", "cb", "map")


class SchemaViolation(ValueError):
    """Model file does not match its schema; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    text = resources.files("risknet.schemas").joinpath(f"{name}.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _registry() -> Registry:
    return Registry().with_resources(
        (f"{n}.json", Resource.from_contents(_schema(n))) for n in SCHEMAS
    )


def validate(doc: dict, kind: str) -> None:
    validator = Draft202012Validator(_schema(kind), registry=_registry())
    err = best_match(validator.iter_errors(doc))
    if err is not None:
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        raise SchemaViolation(path, err.message)


def load(path: str | Path, kind: str) -> dict:
    doc = json.loads(Path(path).read_text())
    validate(doc, kind)
    return doc


# -- builders


def claim_from_dict(d: dict) -> ClaimLaw:
    if d["kind"] == "exponential":
        return ClaimLaw.exponential(d["rate"])
    if d["kind"] == "hyperexponential":
        return ClaimLaw.hyperexponential(d["weights"], d["rates"])
    return ClaimLaw.phase_type(d["beta"], d["B"])


def model_from_dict(d: dict) -> LevyModel:
    return LevyModel(d["c"], d["lambda"], claim_from_dict(d["claim"]), d.get("sigma", 0.0))


def subsidiary_from_dict(d: dict) -> Subsidiary:
    return Subsidiary(model_from_dict(d["model"]), d["k"], d.get("K", 0.0), d.get("q", 0.1))


def network_from_dict(d: dict) -> CbNetwork:
    subs = [SubsidiarySpec(s["u"], s["c"], s["k"], s["lambda"], claim_from_dict(s["claim"]))
            for s in d["subsidiaries"]]
    return CbNetwork(d["u0"], d["c0"], subs, d.get("chain", False))


def cb_subsidiary_from_dict(d: dict) -> SubsidiarySpec:
    s = d["subsidiary"]
    return SubsidiarySpec(0.0, s["c"], s["k"], s["lambda"], ClaimLaw.exponential(s["mu"]))


def map_from_dict(d: dict) -> MapModel:
    phases = d["phases"]
    n = len(phases)
    Q = np.asarray(d["Q"], dtype=float)
    if Q.shape != (n, n):
        raise SchemaViolation("$.Q", f"expected a {n}x{n} matrix")
    claims = [claim_from_dict(p["claim"]) if "claim" in p else None for p in phases]
    jumps = {}
    for idx, j in enumerate(d.get("jumps", [])):
        if j["from"] >= n or j["to"] >= n:
            raise SchemaViolation(f"$.jumps[{idx}]", "phase index out of range")
        jumps[(j["from"], j["to"])] = claim_from_dict(j["claim"])
    return MapModel(
        Q=Q,
        c=[p["c"] for p in phases],
        sigma=[p.get("sigma", 0.0) for p in phases],
        kill=[p.get("kill", 0.0) for p in phases],
        lam=[p.get("lambda", 0.0) for p in phases],
        claims=claims,
        jumps=jumps,
    )
