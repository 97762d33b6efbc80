"""Study configuration: JSON schema, validation and canonical hashing."""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from ..energy import PairPotential, VolumetricPotential
from ..exceptions import ConfigError, GridTooSmall
from ..graph import GraphParams

KINDS = ("w-inf-convergence", "beta-gap", "phantom", "two-temp", "growth-sandwich", "rank-one", "concentration",
         "poincare", "subadditivity")

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM}
_MATRIX = {"type": "array", "items": _NUMS, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "polyhom study configuration",
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "name": {"type": "string"},
        "graph": {"type": "object"},
        "domain": {"type": "array", "items": _NUMS, "minItems": 2, "maxItems": 2},
        "windows": _NUMS,
        "band": {"type": ["number", "null"]},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "pair": {"type": "object"},
        "volumetric": {"type": ["object", "null"]},
        "lambdas": {"type": "array", "items": _MATRIX},
        "betas": _NUMS,
        "n_grid": _NUMS,
        "beta0": {"type": "number", "exclusiveMinimum": 0},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "budget": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"solver": {"type": "object"}, "chain": {"type": "object"}},
        },
        "options": {"type": "object"},
        "thresholds": {"type": "object", "additionalProperties": _NUM},
        "output": {"type": "string"},
    },
}

SCHEMA_LOCATION = "polyhom.studies.config.SCHEMA"

DEFAULT_THRESHOLDS = {
    "phantom_rtol": 1e-10,
    "cauchy_gap": 0.02,
    "restart_spread": 0.01,
    "ratio_factor": 3.0,
    "identity_rtol": 1e-12,
    "identity_k": 3.0,
    "defect_k": 2.0,
    "concentration_k": 2.0,
    "poincare_factor": 2.0,
}

# kinds whose points need these grids
_NEEDS = {
    "w-inf-convergence": ("lambdas", "windows"),
    "beta-gap": ("lambdas", "betas"),
    "phantom": ("lambdas",),
    "two-temp": ("lambdas", "n_grid"),
    "growth-sandwich": ("lambdas",),
    "rank-one": ("lambdas",),
    "concentration": ("lambdas", "betas"),
    "poincare": ("windows",),
    "subadditivity": ("lambdas",),
}


def _pointer(path):
    return "/" + "/".join(str(p) for p in path)


@dataclass
class StudyConfig:
    """A parameter sweep over one of the study kinds.

    Geometry is either an explicit ``domain`` box (with ``eps``) or a list of
    ``windows``, each giving the box ``[0, L)^d`` at ``ε = 1``. ``lambdas``
    are ``n × d`` matrices. Estimator budgets live under ``budget.solver``
    (forwarded to the minimizer) and ``budget.chain`` (sampler and
    integration settings). Kind-specific settings go in ``options``.
    """

    kind: str
    name: str = "study"
    graph: dict = field(default_factory=dict)
    domain: list = None
    windows: list = field(default_factory=list)
    band: float = None
    eps: float = 1.0
    pair: dict = field(default_factory=lambda: {"kind": "kuhn-grun-p10"})
    volumetric: dict = None
    lambdas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    n_grid: list = field(default_factory=list)
    beta0: float = 1.0
    seeds: list = field(default_factory=lambda: [0])
    budget: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    output: str = "results"

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, data):
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"{exc.message} at {_pointer(exc.absolute_path)} (schema: {SCHEMA_LOCATION}"
                              f"{_pointer(exc.absolute_schema_path)})") from None
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        with path.open() as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def canonical(self):
        """Canonical JSON of everything that affects results (the output path excluded)."""
        d = self.to_dict()
        d.pop("output")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def validate(self):
        def bad(where, msg):
            raise ConfigError(f"{msg} at /{where} (schema: {SCHEMA_LOCATION})")

        if self.kind not in KINDS:
            bad("kind", f"unknown study kind {self.kind!r}")
        for key in _NEEDS[self.kind]:
            if not getattr(self, key):
                bad(key, f"{self.kind} needs a nonempty {key} grid")
        if not self.seeds:
            bad("seeds", "seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            bad("seeds", "seeds must be distinct")
        if self.domain is None and not self.windows:
            bad("windows", "give either a domain or a window schedule")
        try:
            self.graph_params()
        except (TypeError, ValueError) as exc:
            bad("graph", str(exc))
        try:
            self.pair_potential()
            self.volumetric_potential()
        except (TypeError, ValueError) as exc:
            bad("pair", str(exc))
        d = self.graph_params().dimension
        for i, L in enumerate(self.lambdas):
            if np.asarray(L, dtype=float).shape[1:] != (d,):
                bad(f"lambdas/{i}", f"matrix must have {d} columns")
        if self.kind == "w-inf-convergence" and len(set(self.windows)) < 3:
            raise GridTooSmall(f"w-inf-convergence needs at least three window sizes, got {len(set(self.windows))}")
        if self.kind == "beta-gap" and len(self.betas) < 4:
            raise GridTooSmall("beta-gap needs at least four beta values")
        if self.kind == "two-temp" and len(self.n_grid) < 3:
            raise GridTooSmall("two-temp needs at least three N values")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS)
        if unknown:
            bad("thresholds", f"unknown thresholds {sorted(unknown)}")

    def graph_params(self):
        return GraphParams(**self.graph)

    def pair_potential(self):
        kw = dict(self.pair)
        if "matrix" in kw and kw["matrix"] is not None:
            kw["matrix"] = np.asarray(kw["matrix"], dtype=float)
        return PairPotential(**kw)

    def volumetric_potential(self):
        return None if self.volumetric is None else VolumetricPotential(**self.volumetric)

    def threshold(self, key):
        return float(self.thresholds.get(key, DEFAULT_THRESHOLDS[key]))

    def lambda_matrices(self):
        return [np.asarray(L, dtype=float) for L in self.lambdas]
