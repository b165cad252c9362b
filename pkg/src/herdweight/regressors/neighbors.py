"""k-nearest-neighbour regression on standardised features."""

from __future__ import annotations

import numpy as np

from .base import FittedModel, ModelSpec, spec_from_dict


class KNNModel(FittedModel):
    """Mean of the k nearest training targets (Euclidean distance).

    Distance ties resolve to the lower training-sample index. k larger
    than the training set is clamped, which makes knn with k >= n the
    training-mean predictor.
    """

    kind = "knn"

    def __init__(self, spec, feature_mean, feature_scale, train_std, targets, k):
        super().__init__(spec, feature_mean, feature_scale)
        self.train_std = np.asarray(train_std, dtype=np.float64)
        self.targets = np.asarray(targets, dtype=np.float64)
        self.k = int(k)

    def _predict_std(self, Xs):
        k_eff = min(self.k, self.train_std.shape[0])
        diff = Xs[:, None, :] - self.train_std[None, :, :]
        d2 = np.einsum("qnd,qnd->qn", diff, diff)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        return self.targets[order].mean(axis=1)

    def _state_dict(self):
        return {"train_std": self.train_std.tolist(), "targets": self.targets.tolist(), "k": self.k}

    @classmethod
    def _from_dict(cls, d):
        s = d["state"]
        return cls(spec_from_dict(d["spec"]), np.array(d["feature_mean"]), np.array(d["feature_scale"]),
                   np.array(s["train_std"]), np.array(s["targets"]), s["k"])


def fit_knn(spec: ModelSpec, Xs, y, mean, scale, *, k: int) -> KNNModel:
    return KNNModel(spec, mean, scale, Xs.copy(), y.copy(), k)
