"""Estimator-style wrappers around the sampling, hermitization and outlier tools.

The objects follow the scikit-learn conventions (constructor parameters only,
``fit`` returns ``self``, learned state carries a trailing underscore) so that
``get_params``/``set_params``/``clone`` work. Only the parts of the estimator
contract that make sense for square random matrices are implemented.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_square_matrix
from .ensemble import EnsembleSpec, diagnostics, sample_matrix
from .outliers import OutlierReport, Perturbation, factor, outlier_report, predict
from .spectral import eigenvalues, hermitize


class EnsembleSampler(BaseEstimator):
    """Seeded sampler for an ensemble specification.

    Parameters
    ----------
    spec : EnsembleSpec or dict
        Graph and entry model.
    seed : int, optional
        Master seed; overrides ``spec.seed`` when given.

    Attributes
    ----------
    spec_ : EnsembleSpec
        Parsed specification, set by ``fit``.
    diagnostics_ : ModelDiagnostics
        Model checks computed at fit time.
    """

    def __init__(self, spec=None, seed: Optional[int] = None):
        self.spec = spec
        self.seed = seed

    def fit(self, X=None, y=None):
        spec = self.spec
        if spec is None:
            raise ValueError("EnsembleSampler needs a spec")
        if isinstance(spec, dict):
            spec = EnsembleSpec.from_dict(spec)
        self.spec_ = spec
        self.diagnostics_ = diagnostics(spec)
        return self

    def sample(self, trial_index: int = 0, stream_id: int = 0) -> np.ndarray:
        """Normalized matrix for one trial (independent of any other trial)."""
        check_is_fitted(self, "spec_")
        return sample_matrix(self.spec_, seed=self.seed, trial_index=trial_index,
                             stream_id=stream_id).entries

    def sample_many(self, trials) -> list:
        return [self.sample(t) for t in trials]


class HermitizationTransformer(TransformerMixin, BaseEstimator):
    """Map a square matrix X to its 2n x 2n Hermitization at a fixed shift.

    Parameters
    ----------
    z : complex
        Spectral parameter.
    v : complex
        Diagonal shift placed on both diagonal blocks (``-v I``).
    """

    def __init__(self, z: complex = 0.0, v: complex = 0.0):
        self.z = z
        self.v = v

    def fit(self, X, y=None):
        X = check_square_matrix(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_square_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return hermitize(X, self.z, self.v)


class OutlierLocator(BaseEstimator):
    """Predict and match outliers of X + C for a fixed low-rank perturbation C.

    ``fit(C)`` factors the perturbation and computes the predicted outlier
    locations lambda + rho/lambda; ``predict(X)`` computes the observed
    eigenvalues of X + C outside the enlarged region and matches them.

    Parameters
    ----------
    rho : complex
        Ellipticity parameter of the unperturbed ensemble.
    epsilon : float
        Separation parameter.
    cap_distance : float, optional
        Matching cap; defaults to the dimension-dependent cap.
    rank_cap : int
        Largest accepted rank of C.

    Attributes
    ----------
    perturbation_ : Perturbation
    predictions_ : list of OutlierPrediction
    """

    def __init__(self, rho: complex = 0.0, epsilon: float = 0.1,
                 cap_distance: Optional[float] = None, rank_cap: int = 16):
        self.rho = rho
        self.epsilon = epsilon
        self.cap_distance = cap_distance
        self.rank_cap = rank_cap

    def fit(self, C, y=None):
        pert = C if isinstance(C, Perturbation) else factor(C, rank_cap=self.rank_cap)
        self.perturbation_ = pert
        self.predictions_ = predict(pert, self.rho, self.epsilon)
        self.n_features_in_ = pert.n
        return self

    def predict(self, X) -> OutlierReport:
        check_is_fitted(self, "perturbation_")
        X = check_square_matrix(X)
        if X.shape[0] != self.n_features_in_:
            raise ValueError(f"X is {X.shape[0]} x {X.shape[0]}, expected n={self.n_features_in_}")
        return outlier_report(X, self.perturbation_, self.rho, self.epsilon,
                              cap_distance=self.cap_distance)

    def score(self, X, y=None) -> float:
        """1.0 when every admissible prediction is matched within the cap, else 0.0."""
        return float(self.predict(X).success)

    def observed_outliers(self, X) -> np.ndarray:
        return np.asarray(self.predict(X).observed, dtype=complex)

    def spectrum(self, X) -> np.ndarray:
        check_is_fitted(self, "perturbation_")
        return eigenvalues(check_square_matrix(X) + self.perturbation_.dense()).eigenvalues
