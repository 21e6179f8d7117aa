"""Experiment configuration: a strict TOML schema for models and runs.

Unknown keys anywhere in the file are rejected, so a config archives
exactly what ran. The resolved config (after CLI overrides) is hashed into
every output header for reproducibility.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .choice import (
    ConstantUtility,
    ContinuousMeetings,
    DiscreteChoiceModel,
    DiscreteMeetings,
    HomophilyUtility,
    LinearOutDegreeUtility,
    LogitShocks,
    TableIsolatedUtility,
    TradeUtility,
    probit_like_shocks,
)
from .extensions import SwitchingCostModel
from .graphs import TypeProfile


class ConfigError(Exception):
    """Configuration failed schema validation."""


_MODEL_KEYS = {"utility", "shocks", "n_nodes", "switching_cost", "params", "types", "meeting"}
_PARAM_KEYS = {"a", "v0", "gamma", "c", "seed", "scale", "value"}
_TYPES_KEYS = {"counts", "weights", "distances"}
_MEETING_KEYS = {"kind", "total", "probs", "rates"}
_ANALYSIS_KEYS = {
    "kind", "steps", "horizon", "burn_in", "chains",
    "v0", "gamma", "v0_min", "v0_max", "v0_steps",
    "gamma_min", "gamma_max", "gamma_steps",
    "variant", "circle_length", "family",
    "rho", "damping", "max_iters", "flow_seed", "flow_scale",
    "exhaustive_witnesses",
}
_RUN_KEYS = {"seed", "out", "threads", "cap"}
_TOP_KEYS = {"model", "analysis", "run"}

UTILITY_FAMILIES = {
    "linear_outdegree", "per_dyad", "homophily", "trade",
    "random_isolated", "constant", "planner_linkcount",
}
SHOCK_FAMILIES = {"logit", "probit"}


def _check_keys(section: Dict[str, Any], allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    model: Dict[str, Any]
    analysis: Dict[str, Any]
    run: Dict[str, Any]

    @classmethod
    def load(cls, path: str, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        return cls.from_dict(raw, overrides)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any],
                  overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        _check_keys(raw, _TOP_KEYS, "top level")
        model = dict(raw.get("model", {}))
        analysis = dict(raw.get("analysis", {}))
        run = dict(raw.get("run", {}))
        _check_keys(model, _MODEL_KEYS, "model")
        _check_keys(model.get("params", {}), _PARAM_KEYS, "model.params")
        _check_keys(model.get("types", {}), _TYPES_KEYS, "model.types")
        _check_keys(model.get("meeting", {}), _MEETING_KEYS, "model.meeting")
        _check_keys(analysis, _ANALYSIS_KEYS, "analysis")
        _check_keys(run, _RUN_KEYS, "run")

        if overrides:
            for key, value in overrides.items():
                if value is not None:
                    run[key] = value
        run.setdefault("seed", 0)
        run.setdefault("out", "out")
        run.setdefault("threads", 1)
        run.setdefault("cap", 20)

        if "utility" in model and model["utility"] not in UTILITY_FAMILIES:
            raise ConfigError(
                f"unknown utility family {model['utility']!r}; "
                f"expected one of {sorted(UTILITY_FAMILIES)}"
            )
        if model.get("shocks", "logit") not in SHOCK_FAMILIES:
            raise ConfigError(f"unknown shock family {model.get('shocks')!r}")
        return cls(model=model, analysis=analysis, run=run)

    def resolved(self) -> Dict[str, Any]:
        return {"model": self.model, "analysis": self.analysis, "run": self.run}

    def reproducible(self) -> Dict[str, Any]:
        """The part of the config that determines results.

        Output location and worker count are excluded: neither may change a
        single output byte, and both are recorded in headers separately.
        """
        return {
            "model": self.model,
            "analysis": self.analysis,
            "run": {k: v for k, v in self.run.items() if k not in ("out", "threads")},
        }

    def sha256(self) -> str:
        blob = json.dumps(self.reproducible(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- model assembly -----------------------------------------------------

    def n_nodes(self) -> int:
        if "n_nodes" not in self.model:
            raise ConfigError("[model] needs n_nodes for finite-size analyses")
        return int(self.model["n_nodes"])

    def type_profile(self, finite: bool) -> TypeProfile:
        types = self.model.get("types")
        if types is None:
            raise ConfigError("[model.types] section required for typed models")
        if finite:
            if "counts" not in types:
                raise ConfigError("[model.types] needs counts for finite-N runs")
            return TypeProfile.from_counts(types["counts"])
        if "weights" in types:
            return TypeProfile.from_weights(types["weights"])
        counts = np.asarray(types["counts"], dtype=float)
        return TypeProfile.from_weights(tuple(counts / counts.sum()))

    def distances(self) -> np.ndarray:
        types = self.model.get("types")
        if types is None or "distances" not in types:
            raise ConfigError("[model.types] needs a distances matrix")
        return np.asarray(types["distances"], dtype=float)

    def shocks(self):
        return LogitShocks() if self.model.get("shocks", "logit") == "logit" else probit_like_shocks()

    def utility(self):
        family = self.model.get("utility")
        if family is None:
            raise ConfigError("[model] needs a utility family")
        params = self.model.get("params", {})
        n = self.n_nodes()
        if family == "linear_outdegree":
            return LinearOutDegreeUtility(float(params.get("a", 1.0)))
        if family == "constant":
            return ConstantUtility(float(params.get("value", 0.0)))
        if family == "random_isolated":
            rng = np.random.default_rng(int(params.get("seed", 0)))
            return TableIsolatedUtility.random(n, rng, scale=float(params.get("scale", 1.0)))
        if family == "homophily":
            return HomophilyUtility(
                float(params.get("v0", 0.0)),
                float(params.get("gamma", 0.0)),
                self.type_profile(finite=True),
                self.distances(),
            )
        if family == "trade":
            return TradeUtility(
                float(params.get("v0", 0.0)),
                float(params.get("gamma", 0.0)),
                float(params.get("c", 0.0)),
                self.type_profile(finite=True),
                self.distances(),
            )
        if family == "planner_linkcount":
            from .choice import PlannerUtility

            scale = float(params.get("scale", 1.0))
            return PlannerUtility(lambda g: scale * g.n_links)
        raise ConfigError(f"utility family {family!r} has no finite-N constructor")

    def switching_model(self):
        """Finite-N switching model: discrete choice, plus optional state bias."""
        n = self.n_nodes()
        cost = self.model.get("switching_cost")
        if cost is not None:
            if self.model.get("shocks", "logit") != "logit":
                raise ConfigError("switching costs are defined for logit shocks")
            return SwitchingCostModel(self.utility(), float(cost), n)
        return DiscreteChoiceModel(self.utility(), self.shocks(), n)

    def meetings(self):
        section = self.model.get("meeting")
        if section is None:
            raise ConfigError("[model.meeting] section required")
        kind = section.get("kind", "discrete")
        n = self.n_nodes()
        if kind == "discrete":
            if "probs" in section:
                return DiscreteMeetings(n, tuple(float(x) for x in section["probs"]))
            return DiscreteMeetings.uniform(n, float(section.get("total", 0.3)))
        if kind == "continuous":
            if "rates" in section:
                return ContinuousMeetings(n, tuple(float(x) for x in section["rates"]))
            return ContinuousMeetings.uniform(n, float(section.get("total", 1.0)))
        raise ConfigError(f"unknown meeting kind {kind!r}")


def derive_seed(master: int, index: int) -> int:
    """Deterministic per-cell / per-chain seed from the master seed."""
    blob = f"{master}:{index}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1
