"""Model specs, input validation, and the fit/predict dispatch.

Eleven families share the contract: linear-ish families (ols, ridge,
lasso, elastic_net, huber) and knn standardise features internally; tree
families work on raw features. Fitting is deterministic given
(spec, X, y) — tree randomness is driven by per-tree streams derived
from (seed, tree index).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..errors import (
    DimensionMismatch,
    InvalidHyperparameter,
    NonFiniteInput,
    NonPositiveTarget,
)

FAMILIES = (
    "ols",
    "ridge",
    "lasso",
    "elastic_net",
    "huber",
    "knn",
    "decision_tree",
    "random_forest",
    "extra_trees",
    "adaboost",
    "gradient_boosting",
)

_STANDARDISED_FAMILIES = frozenset({"ols", "ridge", "lasso", "elastic_net", "huber", "knn"})

DEFAULT_FAMILY_PARAMS: Mapping[str, dict] = MappingProxyType(
    {
        "ols": {},
        "ridge": {"alpha": 1.0},
        "lasso": {"alpha": 1.0, "tol": 1e-7, "max_sweeps": 10_000},
        "elastic_net": {"alpha": 1.0, "l1_ratio": 0.5, "tol": 1e-7, "max_sweeps": 10_000},
        "huber": {"delta": 1.35, "max_iter": 100, "tol": 1e-8},
        "knn": {"k": 5},
        "decision_tree": {"max_depth": None},
        "random_forest": {"n_trees": 300, "max_depth": None},
        "extra_trees": {"n_trees": 300, "max_depth": None},
        "adaboost": {"n_rounds": 200, "max_depth": 4},
        "gradient_boosting": {"n_rounds": 500, "max_depth": 3, "learning_rate": 0.05},
    }
)

# Stand-ins for third-party boosting variants: same family, three profiles.
GRADIENT_BOOSTING_PRESETS: Mapping[str, dict] = MappingProxyType(
    {
        "gbA": {"n_rounds": 300, "max_depth": 3, "learning_rate": 0.05},
        "gbB": {"n_rounds": 500, "max_depth": 4, "learning_rate": 0.05},
        "gbC": {"n_rounds": 800, "max_depth": 6, "learning_rate": 0.05},
    }
)


@dataclass(frozen=True)
class ModelSpec:
    """A named, seeded configuration of one model family."""

    name: str
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def resolved_params(self) -> dict:
        merged = dict(DEFAULT_FAMILY_PARAMS[self.family])
        merged.update(self.params)
        return merged


def default_model_specs(seed: int = 0) -> list[ModelSpec]:
    """The eleven default base models, in declaration (tie-break) order."""
    return [ModelSpec(name=f, family=f, seed=seed) for f in FAMILIES]


def _check_int(name: str, value, low: int | None = None) -> None:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise InvalidHyperparameter(f"{name} must be an integer, got {value!r}")
    if low is not None and value < low:
        raise InvalidHyperparameter(f"{name} must be >= {low}, got {value}")


def _check_pos(name: str, value) -> None:
    if not np.isfinite(value) or value <= 0:
        raise InvalidHyperparameter(f"{name} must be > 0, got {value!r}")


def validate_spec(spec: ModelSpec) -> None:
    """Raise InvalidHyperparameter for unknown families/keys or bad ranges."""
    if spec.family not in FAMILIES:
        raise InvalidHyperparameter(f"unknown model family {spec.family!r}")
    known = set(DEFAULT_FAMILY_PARAMS[spec.family])
    extra = set(spec.params) - known
    if extra:
        raise InvalidHyperparameter(f"{spec.name}: unknown hyperparameters {sorted(extra)} for family {spec.family!r}")
    p = spec.resolved_params()
    if "alpha" in p and (not np.isfinite(p["alpha"]) or p["alpha"] < 0):
        raise InvalidHyperparameter(f"{spec.name}: alpha must be >= 0")
    if "l1_ratio" in p and not 0.0 <= p["l1_ratio"] <= 1.0:
        raise InvalidHyperparameter(f"{spec.name}: l1_ratio must be in [0, 1]")
    if "tol" in p:
        _check_pos(f"{spec.name}: tol", p["tol"])
    if "max_sweeps" in p:
        _check_int(f"{spec.name}: max_sweeps", p["max_sweeps"], low=1)
    if "delta" in p:
        _check_pos(f"{spec.name}: delta", p["delta"])
    if "max_iter" in p:
        _check_int(f"{spec.name}: max_iter", p["max_iter"], low=1)
    if "k" in p:
        _check_int(f"{spec.name}: k", p["k"], low=1)
    if "max_depth" in p and p["max_depth"] is not None:
        _check_int(f"{spec.name}: max_depth", p["max_depth"], low=1)
    if "n_trees" in p:
        _check_int(f"{spec.name}: n_trees", p["n_trees"], low=1)
    if "n_rounds" in p:
        low = 0 if spec.family == "gradient_boosting" else 1
        _check_int(f"{spec.name}: n_rounds", p["n_rounds"], low=low)
    if "learning_rate" in p and not 0.0 < p["learning_rate"] <= 1.0:
        raise InvalidHyperparameter(f"{spec.name}: learning_rate must be in (0, 1]")


class FittedModel:
    """A trained model: spec, standardisation stats, family parameters.

    Immutable after fit; predict is deterministic. Subclasses implement
    ``_predict_std`` on standardised inputs (identity stats for trees).
    """

    kind = "base"

    def __init__(self, spec: ModelSpec, feature_mean: np.ndarray, feature_scale: np.ndarray):
        self.spec = spec
        self.feature_mean = np.asarray(feature_mean, dtype=np.float64)
        self.feature_scale = np.asarray(feature_scale, dtype=np.float64)

    @property
    def n_features(self) -> int:
        return self.feature_mean.shape[0]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        if not np.isfinite(X).all():
            raise NonFiniteInput("prediction input contains NaN or Inf")
        return self._predict_std((X - self.feature_mean) / self.feature_scale)

    def _predict_std(self, Xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _state_dict(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "spec": spec_to_dict(self.spec),
                "feature_mean": self.feature_mean.tolist(),
                "feature_scale": self.feature_scale.tolist(),
                "state": self._state_dict()}


def _standardisation(X: np.ndarray, identity: bool) -> tuple[np.ndarray, np.ndarray]:
    d = X.shape[1]
    if identity:
        return np.zeros(d), np.ones(d)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    return mean, scale


def _validate_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1:
        raise DimensionMismatch(f"expected X (n, d) and y (n,), got {X.shape} / {y.shape}")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows of features but {y.shape[0]} targets")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if X.shape[1] < 1:
        raise ValueError("need at least 1 feature")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise NonFiniteInput("training data contains NaN or Inf")
    if (y <= 0).any():
        raise NonPositiveTarget("live weights must be > 0 kg")
    return X, y


def fit(spec: ModelSpec, X, y) -> FittedModel:
    """Train one base model. Deterministic given (spec, X, y).

    Rank-deficient linear systems resolve through the pseudo-inverse
    rather than erroring.
    """
    from . import linear, neighbors, trees

    validate_spec(spec)
    X, y = _validate_training_data(X, y)
    mean, scale = _standardisation(X, identity=spec.family not in _STANDARDISED_FAMILIES)
    Xs = (X - mean) / scale
    params = spec.resolved_params()

    if spec.family == "ols":
        return linear.fit_ols(spec, Xs, y, mean, scale)
    if spec.family == "ridge":
        return linear.fit_ridge(spec, Xs, y, mean, scale, alpha=params["alpha"])
    if spec.family == "lasso":
        return linear.fit_coordinate_descent(
            spec, Xs, y, mean, scale, alpha=params["alpha"], l1_ratio=1.0,
            tol=params["tol"], max_sweeps=params["max_sweeps"])
    if spec.family == "elastic_net":
        return linear.fit_coordinate_descent(
            spec, Xs, y, mean, scale, alpha=params["alpha"], l1_ratio=params["l1_ratio"],
            tol=params["tol"], max_sweeps=params["max_sweeps"])
    if spec.family == "huber":
        return linear.fit_huber(
            spec, Xs, y, mean, scale, delta=params["delta"],
            max_iter=params["max_iter"], tol=params["tol"])
    if spec.family == "knn":
        return neighbors.fit_knn(spec, Xs, y, mean, scale, k=params["k"])
    if spec.family == "decision_tree":
        return trees.fit_decision_tree(spec, Xs, y, mean, scale, max_depth=params["max_depth"])
    if spec.family == "random_forest":
        return trees.fit_forest(spec, Xs, y, mean, scale, n_trees=params["n_trees"],
                                max_depth=params["max_depth"], bootstrap=True, random_thresholds=False)
    if spec.family == "extra_trees":
        return trees.fit_forest(spec, Xs, y, mean, scale, n_trees=params["n_trees"],
                                max_depth=params["max_depth"], bootstrap=False, random_thresholds=True)
    if spec.family == "adaboost":
        return trees.fit_adaboost(spec, Xs, y, mean, scale, n_rounds=params["n_rounds"],
                                  max_depth=params["max_depth"])
    if spec.family == "gradient_boosting":
        return trees.fit_gradient_boosting(spec, Xs, y, mean, scale, n_rounds=params["n_rounds"],
                                           max_depth=params["max_depth"],
                                           learning_rate=params["learning_rate"])
    raise InvalidHyperparameter(f"unknown model family {spec.family!r}")


def predict(model: FittedModel, X) -> np.ndarray:
    """Uniform prediction surface; see FittedModel.predict."""
    return model.predict(X)


def spec_to_dict(spec: ModelSpec) -> dict:
    return {"name": spec.name, "family": spec.family, "params": dict(spec.params), "seed": spec.seed}


def spec_from_dict(d: dict) -> ModelSpec:
    return ModelSpec(name=d["name"], family=d["family"], params=dict(d.get("params", {})),
                     seed=int(d.get("seed", 0)))


def model_to_dict(model: FittedModel) -> dict:
    """JSON-ready serialisation; floats keep full precision via repr."""
    return model.to_dict()


def model_from_dict(d: dict) -> FittedModel:
    from . import linear, neighbors, trees

    kinds = {
        "linear": linear.LinearModel,
        "knn": neighbors.KNNModel,
        "decision_tree": trees.DecisionTreeModel,
        "forest": trees.ForestModel,
        "adaboost": trees.AdaBoostModel,
        "gradient_boosting": trees.GradientBoostingModel,
    }
    try:
        cls = kinds[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {d.get('kind')!r}") from None
    return cls._from_dict(d)
