"""scikit-learn compatible estimator facade.

``X`` is a sequence of observations in any of the forms accepted by
:func:`penet.validation.unpack_sequences` (Trajectory, (values, h) pair, or
dict).  Sequences may have different lengths; the network estimators bucket
them internally.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import cqmle_fit, lse_drift, midpoint_predictor
from .dataset import DatasetRecord
from .model import PEnetConfig, PEnetModel
from .sde import FAMILY_BUILDERS, ParamVector, SdeFamily, Trajectory
from .training import TrainConfig, train
from .validation import check_targets, unpack_sequences


def _resolve_family(family) -> SdeFamily:
    if isinstance(family, SdeFamily):
        return family
    if family in FAMILY_BUILDERS:
        return FAMILY_BUILDERS[family]()
    raise ValueError(f"unknown family {family!r}; expected one of {sorted(FAMILY_BUILDERS)}")


class PEnetRegressor(BaseEstimator, RegressorMixin):
    """Sequence-to-parameters regressor backed by the CNN-LSTM network.

    Parameters mirror the training configuration; ``family`` fixes the
    output dimension and the loss weights.
    """

    def __init__(
        self,
        family="gaussian",
        use_cnn: bool = True,
        standardize_input: bool = True,
        batch_size: int = 64,
        max_epochs: int = 60,
        lr: float = 0.001,
        clip_norm: float | None = 5.0,
        val_fraction: float = 0.05,
        patience: int = 8,
        seed: int = 0,
    ):
        self.family = family
        self.use_cnn = use_cnn
        self.standardize_input = standardize_input
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.lr = lr
        self.clip_norm = clip_norm
        self.val_fraction = val_fraction
        self.patience = patience
        self.seed = seed

    def fit(self, X, y):
        family = _resolve_family(self.family)
        values_list, hs = unpack_sequences(X)
        y = check_targets(y, len(values_list), family.n_params)
        records = []
        for i, (values, h) in enumerate(zip(values_list, hs)):
            noise_param = float(y[i, 2]) if family.n_params == 3 else None
            records.append(
                DatasetRecord(
                    Trajectory(values, float(h), float(values[0])),
                    ParamVector(float(y[i, 0]), float(y[i, 1]), noise_param),
                    seed=i,
                )
            )
        model_config = PEnetConfig.for_family(
            family, use_cnn=self.use_cnn, standardize_input=self.standardize_input
        )
        config = TrainConfig(
            dataset="<in-memory>",
            model=model_config,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            lr=self.lr,
            clip_norm=self.clip_norm,
            val_fraction=self.val_fraction,
            patience=self.patience,
            seed=self.seed,
        )
        self.model_, self.adam_, self.log_ = train(config, records, family)
        self.family_ = family
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        values_list, hs = unpack_sequences(X)
        return self.model_.predict(values_list, hs)


class LeastSquaresDrift(BaseEstimator):
    """Closed-form least-squares drift estimator; fit is a no-op."""

    def fit(self, X=None, y=None):
        return self

    def predict(self, X) -> np.ndarray:
        values_list, hs = unpack_sequences(X, min_length=3)
        return np.array(
            [lse_drift(Trajectory(v, float(h), float(v[0]))) for v, h in zip(values_list, hs)]
        )


class CauchyQMLE(BaseEstimator):
    """Per-trajectory Cauchy quasi-MLE returning (eta, epsilon, nu) columns."""

    def fit(self, X=None, y=None):
        return self

    def fit_one(self, values, h):
        values = np.asarray(values, dtype=np.float64)
        return cqmle_fit(Trajectory(values, float(h), float(values[0])))

    def predict(self, X) -> np.ndarray:
        values_list, hs = unpack_sequences(X, min_length=10)
        rows = []
        for values, h in zip(values_list, hs):
            result = self.fit_one(values, h)
            rows.append([result.eta_hat, result.epsilon_hat, result.nu_hat])
        return np.asarray(rows)


class MidpointPredictor(BaseEstimator):
    """Constant predictor returning training-range midpoints."""

    def __init__(self, family="gaussian"):
        self.family = family

    def fit(self, X=None, y=None):
        self.family_ = _resolve_family(self.family)
        self.midpoint_ = midpoint_predictor(self.family_).as_array()
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "midpoint_")
        return np.tile(self.midpoint_, (len(X), 1))
