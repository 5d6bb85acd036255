"""Estimator protocol (get_params/set_params/fit/predict, scikit-learn
conventions) plus the input-validation helpers the estimators share."""

from __future__ import annotations

import inspect

import numpy as np

from ..errors import ModelStateError, ShapeError


class BaseEstimator:
    """get_params/set_params follow the scikit-learn contract: every
    constructor argument is a public parameter, so estimators clone and
    grid-search cleanly."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [name for name, p in sig.parameters.items()
                if name != "self" and p.kind not in
                (p.VAR_POSITIONAL, p.VAR_KEYWORD)]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def check_is_fitted(estimator, attribute: str):
    if getattr(estimator, attribute, None) is None:
        raise ModelStateError(
            f"{type(estimator).__name__} must be fitted before use")


def as_float_array(x, ndim: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    return arr


def as_bool_mask(x, shape: tuple, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=bool)
    if arr.shape != shape:
        raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


class ChannelStandardizer:
    """Per-channel mean/std computed over unmasked steps; padded steps are
    re-zeroed after scaling so they stay exactly zero."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    @classmethod
    def fit(cls, sequences: np.ndarray, mask: np.ndarray) -> "ChannelStandardizer":
        valid = sequences[mask]
        if valid.size == 0:
            raise ShapeError("cannot standardize: mask excludes every step")
        mean = valid.mean(axis=0)
        std = valid.std(axis=0)
        std = np.where(std < 1e-6, 1.0, std)
        return cls(mean, std)

    def transform(self, sequences: np.ndarray, mask: np.ndarray | None = None
                  ) -> np.ndarray:
        out = (sequences - self.mean) / self.std
        if mask is not None:
            out = out * mask[..., None]
        return out

    def inverse(self, sequences: np.ndarray) -> np.ndarray:
        return sequences * self.std + self.mean
