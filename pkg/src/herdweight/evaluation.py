"""Cross-validation protocol, metrics, and the ensemble-size sweep.

The headline protocol is nested: an outer k-fold loop scores the full
stacking procedure (rank on inner folds, build meta-features, fit the
combiner, refit bases) on held-out folds it never touched, and the inner
fold assignment is derived deterministically from (seed, outer fold).
Reported spread is the population std over fold values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidK, LengthMismatch, NonPositiveTarget, ZeroVarianceTarget

__all__ = [
    "FoldAssignment",
    "MetricTriple",
    "FoldStats",
    "MetricReport",
    "ProvenanceLog",
    "AuditReport",
    "CVResult",
    "SweepRow",
    "kfold_split",
    "compute_metrics",
    "cross_validate",
    "cross_validate_model",
    "ensemble_size_sweep",
]


@dataclass(frozen=True)
class FoldAssignment:
    """Seeded shuffle-then-chunk assignment of n samples to k folds."""

    k: int
    fold_of: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.fold_of.shape[0]

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def kfold_split(n: int, k: int, seed: int) -> FoldAssignment:
    """Assign n samples to k folds whose sizes differ by at most one."""
    if not 2 <= k <= n:
        raise InvalidK(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.intp)
    base, extra = divmod(n, k)
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        fold_of[perm[start : start + size]] = f
        start += size
    return FoldAssignment(k=k, fold_of=fold_of, seed=seed)


@dataclass(frozen=True)
class MetricTriple:
    """R^2, MAE (kg) and MAPE (%) for one prediction set.

    r2 is NaN for a single sample, where it is undefined.
    """

    r2: float
    mae: float
    mape: float


def compute_metrics(y, y_pred) -> MetricTriple:
    """Score predictions against positive targets.

    R^2 = 1 - SS_res/SS_tot; MAE = mean |y - y_hat|; MAPE = 100 * mean
    |y - y_hat| / y. Constant targets give R^2 = 0 when predictions match
    them exactly and raise ZeroVarianceTarget otherwise.
    """
    y = np.asarray(y, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y.shape != y_pred.shape or y.ndim != 1 or y.size == 0:
        raise LengthMismatch(f"targets {y.shape} vs predictions {y_pred.shape}")
    if (y <= 0).any():
        raise NonPositiveTarget("targets must be > 0 for percentage error")
    err = y - y_pred
    mae = float(np.abs(err).mean())
    mape = float(100.0 * (np.abs(err) / y).mean())
    if y.size < 2:
        return MetricTriple(r2=float("nan"), mae=mae, mape=mape)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float((err**2).sum())
    if ss_tot == 0.0:
        if ss_res == 0.0:
            return MetricTriple(r2=0.0, mae=mae, mape=mape)
        raise ZeroVarianceTarget("constant targets with non-matching predictions")
    return MetricTriple(r2=1.0 - ss_res / ss_tot, mae=mae, mape=mape)


@dataclass(frozen=True)
class FoldStats:
    per_fold: tuple[float, ...]
    mean: float
    std: float


def _fold_stats(values) -> FoldStats:
    arr = np.asarray(values, dtype=np.float64)
    return FoldStats(per_fold=tuple(arr.tolist()), mean=float(arr.mean()), std=float(arr.std()))


@dataclass(frozen=True)
class MetricReport:
    """Per-fold metrics with mean and population std across folds."""

    r2: FoldStats
    mae: FoldStats
    mape: FoldStats

    def to_json_dict(self) -> dict:
        out = {}
        for key, stats in (("r2", self.r2), ("mae_kg", self.mae), ("mape_pct", self.mape)):
            out[key] = {"per_fold": list(stats.per_fold), "mean": stats.mean, "std": stats.std}
        return out


def report_from_triples(triples) -> MetricReport:
    return MetricReport(
        r2=_fold_stats([t.r2 for t in triples]),
        mae=_fold_stats([t.mae for t in triples]),
        mape=_fold_stats([t.mape for t in triples]),
    )


class ProvenanceLog:
    """Recorder for the sample ids flowing into every fit call."""

    def __init__(self) -> None:
        self.records: list[tuple[str, frozenset]] = []

    def record(self, stage: str, ids) -> None:
        self.records.append((stage, frozenset(int(i) for i in ids)))


@dataclass(frozen=True)
class AuditReport:
    """Outcome of the leakage audit across all outer folds."""

    n_fits: int
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class CVResult:
    report: MetricReport
    audit: AuditReport | None = None


def _inner_seed(seed: int, outer_fold: int) -> int:
    return int(np.random.SeedSequence([seed, outer_fold]).generate_state(1)[0])


def _outer_fold_task(args) -> tuple[int, MetricTriple, int, tuple[str, ...]]:
    from . import stacking  # imported here to avoid a module cycle

    fold, X, y, outer_seed, k, specs, m_top, inner_k, alpha, audit = args
    outer = kfold_split(len(y), k, outer_seed)
    train_ids = outer.train_indices(fold)
    test_ids = outer.test_indices(fold)
    X_train, y_train = X[train_ids], y[train_ids]

    log = ProvenanceLog() if audit else None
    inner = kfold_split(len(train_ids), inner_k, _inner_seed(outer_seed, fold))
    oof = stacking.oof_predictions(X_train, y_train, specs, inner, log=log, sample_ids=train_ids)
    ranking = stacking.rank_base_models(X_train, y_train, specs, k=inner_k, folds=inner, oof=oof)
    ens = stacking.fit_stack(X_train, y_train, specs, ranking, m_top=m_top, folds=inner,
                             oof=oof, alpha=alpha, log=log, sample_ids=train_ids)
    triple = compute_metrics(y[test_ids], stacking.predict_stack(ens, X[test_ids]))

    n_fits = 0
    violations: list[str] = []
    if log is not None:
        held_out = frozenset(int(i) for i in test_ids)
        n_fits = len(log.records)
        for stage, ids in log.records:
            overlap = ids & held_out
            if overlap:
                violations.append(f"fold {fold}: {stage} trained on held-out samples {sorted(overlap)}")
    return fold, triple, n_fits, tuple(violations)


def cross_validate(X, y, specs, *, m_top=None, k: int = 5, inner_k: int = 5,
                   seed: int = 0, alpha: float = 1.0, audit: bool = False,
                   jobs: int = 1) -> CVResult:
    """Score the full stacking pipeline by nested k-fold cross-validation.

    With ``audit=True`` every fit call is tagged with the sample ids it
    saw, and the result carries a leakage report. Outer folds can run in
    parallel (``jobs``); the result is independent of scheduling.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if m_top is None:
        m_top = len(specs)
    tasks = [(f, X, y, seed, k, list(specs), m_top, inner_k, alpha, audit) for f in range(k)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_outer_fold_task, tasks))
    else:
        results = [_outer_fold_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    triples = [r[1] for r in results]
    audit_report = None
    if audit:
        violations: list[str] = []
        n_fits = 0
        for _, _, fits, viol in results:
            n_fits += fits
            violations.extend(viol)
        audit_report = AuditReport(n_fits=n_fits, violations=tuple(violations))
    return CVResult(report=report_from_triples(triples), audit=audit_report)


def cross_validate_model(X, y, spec, *, k: int = 5, seed: int = 0) -> MetricReport:
    """Plain k-fold CV of a single base model (no stacking)."""
    from .regressors import fit as fit_model

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    folds = kfold_split(len(y), k, seed)
    triples = []
    for f in range(k):
        tr, te = folds.train_indices(f), folds.test_indices(f)
        model = fit_model(spec, X[tr], y[tr])
        triples.append(compute_metrics(y[te], model.predict(X[te])))
    return report_from_triples(triples)


@dataclass(frozen=True)
class SweepRow:
    m: int
    r2_mean: float
    r2_std: float
    mae_mean: float
    mae_std: float
    mape_mean: float
    mape_std: float


def ensemble_size_sweep(X, y, specs, m_values, *, k: int = 5, inner_k: int = 5,
                        seed: int = 0, alpha: float = 1.0) -> list[SweepRow]:
    """Nested-CV metrics for each ensemble size in ``m_values``.

    All sizes share the same folds, rankings and base fits per outer
    fold; only the combiner is refit per size.
    """
    from . import stacking  # imported here to avoid a module cycle
    from .regressors import fit as fit_model

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m_values = [int(m) for m in m_values]
    if not m_values:
        raise ValueError("m_values is empty")
    if min(m_values) < 1 or max(m_values) > len(specs):
        raise ValueError(f"ensemble sizes must lie in [1, {len(specs)}], got {m_values}")

    outer = kfold_split(len(y), k, seed)
    by_name = {s.name: s for s in specs}
    per_fold: dict[int, list[MetricTriple]] = {m: [] for m in m_values}
    for fold in range(k):
        tr, te = outer.train_indices(fold), outer.test_indices(fold)
        X_train, y_train = X[tr], y[tr]
        inner = kfold_split(len(tr), inner_k, _inner_seed(seed, fold))
        oof = stacking.oof_predictions(X_train, y_train, specs, inner)
        ranking = stacking.rank_base_models(X_train, y_train, specs, folds=inner, oof=oof)
        ranked_names = [e.name for e in ranking.entries]
        col_of = {s.name: i for i, s in enumerate(specs)}
        needed = ranked_names[: max(m_values)]
        refit = {name: fit_model(by_name[name], X_train, y_train) for name in needed}
        base_test = np.column_stack([refit[name].predict(X[te]) for name in needed])
        for m in m_values:
            cols = [col_of[name] for name in ranked_names[:m]]
            w, b = stacking.ridge_combiner(oof[:, cols], y_train, alpha)
            preds = base_test[:, :m] @ w + b
            per_fold[m].append(compute_metrics(y[te], preds))

    rows = []
    for m in m_values:
        rep = report_from_triples(per_fold[m])
        rows.append(SweepRow(m=m, r2_mean=rep.r2.mean, r2_std=rep.r2.std,
                             mae_mean=rep.mae.mean, mae_std=rep.mae.std,
                             mape_mean=rep.mape.mean, mape_std=rep.mape.std))
    return rows
