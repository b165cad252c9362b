"""Model ranking, out-of-fold meta-features, and the ridge combiner.

Base models are ranked by cross-validated MAPE on a shared fold
assignment. The meta-features handed to the combiner are strictly
out-of-fold: sample i's column entries come from models fit with i's
fold held out, so no target leaks into its own meta-feature. The
combiner is a closed-form ridge on centred meta-features with an
unpenalised intercept and the penalty fixed at 1.0 by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, HerdWeightError
from .evaluation import FoldAssignment, compute_metrics, kfold_split
from .regressors import (
    FittedModel,
    ModelSpec,
    fit,
    model_from_dict,
    model_to_dict,
    spec_from_dict,
    spec_to_dict,
)

DEFAULT_RIDGE_ALPHA = 1.0


@dataclass(frozen=True)
class RankedModel:
    """One ranking row: model name plus its CV-mean metrics."""

    name: str
    mape: float
    r2: float
    mae: float


@dataclass(frozen=True)
class ModelRanking:
    """Base models ordered by CV MAPE ascending (ties: declaration order)."""

    entries: tuple[RankedModel, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def top(self, m: int) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries[:m])


@dataclass
class StackedEnsemble:
    """Ranked base models refit on the full training split plus combiner."""

    specs: list[ModelSpec]
    models: list[FittedModel]
    weights: np.ndarray
    intercept: float
    alpha: float
    ranking: ModelRanking

    @property
    def m_top(self) -> int:
        return len(self.models)


def _tag_fit_error(name: str, exc: HerdWeightError) -> HerdWeightError:
    return type(exc)(f"model {name!r}: {exc}")


def oof_predictions(X, y, specs, folds: FoldAssignment, *, log=None, sample_ids=None) -> np.ndarray:
    """(n, len(specs)) matrix of strictly out-of-fold predictions.

    Entry (i, m) is spec m's prediction for sample i from a model fit on
    every fold except sample i's.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if sample_ids is None:
        sample_ids = np.arange(len(y))
    out = np.empty((len(y), len(specs)))
    for f in range(folds.k):
        tr, te = folds.train_indices(f), folds.test_indices(f)
        for m, spec in enumerate(specs):
            try:
                model = fit(spec, X[tr], y[tr])
            except HerdWeightError as exc:
                raise _tag_fit_error(spec.name, exc) from exc
            if log is not None:
                log.record(f"oof fold={f} model={spec.name}", sample_ids[tr])
            out[te, m] = model.predict(X[te])
    return out


def rank_base_models(X, y, specs, *, k: int = 5, seed: int = 0,
                     folds: FoldAssignment | None = None,
                     oof: np.ndarray | None = None) -> ModelRanking:
    """Rank specs by mean CV MAPE over a shared fold assignment."""
    y = np.asarray(y, dtype=np.float64)
    if folds is None:
        folds = kfold_split(len(y), k, seed)
    if oof is None:
        oof = oof_predictions(X, y, specs, folds)

    means = []
    for m, spec in enumerate(specs):
        triples = [compute_metrics(y[folds.test_indices(f)], oof[folds.test_indices(f), m])
                   for f in range(folds.k)]
        means.append((float(np.mean([t.mape for t in triples])),
                      float(np.mean([t.r2 for t in triples])),
                      float(np.mean([t.mae for t in triples]))))
    order = sorted(range(len(specs)), key=lambda m: (means[m][0], m))
    entries = tuple(RankedModel(name=specs[m].name, mape=means[m][0], r2=means[m][1], mae=means[m][2])
                    for m in order)
    return ModelRanking(entries=entries)


def build_meta_features(X, y, top_specs, *, k: int = 5, seed: int = 0,
                        folds: FoldAssignment | None = None, log=None,
                        sample_ids=None) -> np.ndarray:
    """Out-of-fold prediction matrix for the selected top specs."""
    y = np.asarray(y, dtype=np.float64)
    if folds is None:
        folds = kfold_split(len(y), k, seed)
    return oof_predictions(X, y, top_specs, folds, log=log, sample_ids=sample_ids)


def ridge_combiner(meta: np.ndarray, y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Closed-form ridge on centred columns; intercept unpenalised."""
    meta = np.asarray(meta, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    col_mean = meta.mean(axis=0)
    centred = meta - col_mean
    y_mean = y.mean()
    gram = centred.T @ centred + alpha * np.eye(meta.shape[1])
    rhs = centred.T @ (y - y_mean)
    if alpha > 0:
        w = np.linalg.solve(gram, rhs)
    else:
        w, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    return w, float(y_mean - col_mean @ w)


def fit_stack(X, y, specs, ranking: ModelRanking, *, m_top: int | None = None,
              k: int = 5, seed: int = 0, alpha: float = DEFAULT_RIDGE_ALPHA,
              folds: FoldAssignment | None = None, oof: np.ndarray | None = None,
              log=None, sample_ids=None) -> StackedEnsemble:
    """Fit the combiner on out-of-fold meta-features; refit bases on all data.

    ``oof``, when given, must be the (n, len(specs)) matrix aligned with
    ``specs`` — the top columns are sliced out of it instead of refitting.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if m_top is None:
        m_top = len(ranking)
    if not 1 <= m_top <= len(ranking):
        raise ValueError(f"m_top must be in [1, {len(ranking)}], got {m_top}")
    if sample_ids is None:
        sample_ids = np.arange(len(y))
    by_name = {s.name: s for s in specs}
    top_names = ranking.top(m_top)
    top_specs = [by_name[name] for name in top_names]

    if oof is not None:
        col_of = {s.name: i for i, s in enumerate(specs)}
        meta = oof[:, [col_of[name] for name in top_names]]
    else:
        if folds is None:
            folds = kfold_split(len(y), k, seed)
        meta = oof_predictions(X, y, top_specs, folds, log=log, sample_ids=sample_ids)

    weights, intercept = ridge_combiner(meta, y, alpha)
    if log is not None:
        log.record("combiner", sample_ids)
    models = []
    for spec in top_specs:
        try:
            models.append(fit(spec, X, y))
        except HerdWeightError as exc:
            raise _tag_fit_error(spec.name, exc) from exc
        if log is not None:
            log.record(f"refit model={spec.name}", sample_ids)
    return StackedEnsemble(specs=top_specs, models=models, weights=weights,
                           intercept=intercept, alpha=alpha, ranking=ranking)


def predict_stack(ensemble: StackedEnsemble, X) -> np.ndarray:
    """Affine combination of the refit base predictions."""
    base = base_predictions(ensemble, X)
    return base @ ensemble.weights + ensemble.intercept


def base_predictions(ensemble: StackedEnsemble, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D feature matrix, got shape {X.shape}")
    return np.column_stack([m.predict(X) for m in ensemble.models])


def ensemble_to_dict(ensemble: StackedEnsemble) -> dict:
    return {
        "format_version": 1,
        "alpha": ensemble.alpha,
        "weights": ensemble.weights.tolist(),
        "intercept": ensemble.intercept,
        "specs": [spec_to_dict(s) for s in ensemble.specs],
        "models": [model_to_dict(m) for m in ensemble.models],
        "ranking": [{"name": e.name, "mape": e.mape, "r2": e.r2, "mae": e.mae}
                    for e in ensemble.ranking.entries],
    }


def ensemble_from_dict(d: dict) -> StackedEnsemble:
    if d.get("format_version") != 1:
        raise ValueError(f"unsupported ensemble format_version {d.get('format_version')!r}")
    ranking = ModelRanking(entries=tuple(
        RankedModel(name=e["name"], mape=e["mape"], r2=e["r2"], mae=e["mae"]) for e in d["ranking"]))
    return StackedEnsemble(
        specs=[spec_from_dict(s) for s in d["specs"]],
        models=[model_from_dict(m) for m in d["models"]],
        weights=np.asarray(d["weights"], dtype=np.float64),
        intercept=float(d["intercept"]),
        alpha=float(d["alpha"]),
        ranking=ranking,
    )
