"""Logarithmic excess-loss models and their least-squares fits.

Three model kinds, all in log10:

* ``elevation``: loss = a1 * log10(theta) + a2
* ``density``:   loss = a1 * log10(mu + a2) + a3
* ``height``:    loss = a1 * log10(h + a2) + a3

The shifted kinds are fitted by profiling out (a1, a3) with linear least
squares and searching the one remaining shift a2.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

KINDS = ("elevation", "density", "height")


class FitError(ValueError):
    """Data cannot support the requested fit."""


@dataclass(frozen=True)
class LogModel:
    kind: str
    a1: float
    a2: float
    a3: float | None = None
    rmse: float = 0.0
    r2: float = 1.0
    n_points: int = 0
    filter: str | None = None

    @property
    def shifted(self) -> bool:
        return self.kind != "elevation"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> LogModel:
        if data.get("kind") not in KINDS:
            raise ValueError(f"unknown model kind {data.get('kind')!r}")
        return cls(**data)


def evaluate(model: LogModel, x):
    """Model loss in dB at `x` (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if model.shifted:
        arg = arr + model.a2
        if np.any(arg <= 0):
            raise ValueError(f"x + a2 must be positive for a {model.kind} model")
        out = model.a1 * np.log10(arg) + model.a3
    else:
        if np.any(arr <= 0):
            raise ValueError("elevation must be positive")
        out = model.a1 * np.log10(arr) + model.a2
    return float(out) if out.ndim == 0 else out


def goodness(model: LogModel, points) -> tuple[float, float]:
    """(rmse, r2) of the model against (x, loss) points.

    r2 is reported as 0 for constant data.
    """
    x, y = _split(points)
    if len(x) == 0:
        raise ValueError("no points")
    resid = y - evaluate(model, x)
    rmse = float(np.sqrt(np.mean(resid**2)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 0.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return rmse, r2


def _split(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def _linear_fit(z: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept and SSE of y ~ slope*z + intercept."""
    zc = z - z.mean()
    szz = float(zc @ zc)
    slope = float(zc @ (y - y.mean())) / szz
    intercept = float(y.mean() - slope * z.mean())
    resid = y - (slope * z + intercept)
    return slope, intercept, float(resid @ resid)


def _profile_sse(x: np.ndarray, y: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """SSE of the best (a1, a3) for each candidate shift, vectorised."""
    z = np.log10(x[None, :] + shifts[:, None])
    zc = z - z.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    szz = np.einsum("ij,ij->i", zc, zc)
    szy = zc @ yc
    with np.errstate(divide="ignore", invalid="ignore"):
        sse = float(yc @ yc) - np.where(szz > 0, szy**2 / szz, 0.0)
    return np.maximum(sse, 0.0)


def _profile_slope(x: np.ndarray, y: np.ndarray, shift: float) -> float:
    """d(profile SSE)/d(shift); by the envelope theorem only the a2 partial remains."""
    a1, a3, _ = _linear_fit(np.log10(x + shift), y)
    resid = y - (a1 * np.log10(x + shift) + a3)
    return float(-2 * a1 / math.log(10) * np.sum(resid / (x + shift)))


class LogLossRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of a logarithmic excess-loss model.

    Parameters
    ----------
    kind : {"elevation", "density", "height"}
        Model form. ``elevation`` has no shift and is solved in closed form.
    n_grid : int
        Number of candidate shifts in the coarse search (shifted kinds).
    shift_max_factor : float
        Upper search bound for a2 is ``shift_max_factor * (max(x) - min(x))``.
    eps : float
        Lower search bound for a2 is ``-min(x) + eps``.
    xatol : float
        Absolute tolerance of the root search refining the best grid cell.
    shift : float or None
        Fix a2 instead of searching for it.
    """

    def __init__(self, kind="elevation", n_grid=2000, shift_max_factor=10.0, eps=1e-9, xatol=1e-10, shift=None):
        self.kind = kind
        self.n_grid = n_grid
        self.shift_max_factor = shift_max_factor
        self.eps = eps
        self.xatol = xatol
        self.shift = shift

    def _xy(self, X, y=None):
        x = np.asarray(X, dtype=float)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ValueError(f"expected a single feature, got {x.shape[1]}")
            x = x[:, 0]
        if y is None:
            return x
        y = np.asarray(y, dtype=float).ravel()
        if len(x) != len(y):
            raise ValueError(f"X and y lengths differ ({len(x)} vs {len(y)})")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite values in input")
        return x, y

    def fit(self, X, y):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        x, y = self._xy(X, y)
        if self.kind == "elevation":
            self._fit_elevation(x, y)
        else:
            self._fit_shifted(x, y)
        self.n_features_in_ = 1
        rmse, r2 = goodness(self._model(), np.column_stack([x, y]))
        self.rmse_, self.r2_ = rmse, r2
        self.model_ = self._model(rmse, r2, len(x))
        return self

    def _fit_elevation(self, x, y):
        if len(x) < 2:
            raise FitError("elevation fit needs at least 2 points")
        if np.any(x <= 0):
            raise FitError("elevation angles must be positive")
        if np.ptp(x) == 0:
            raise FitError("all elevation angles are equal")
        self.a1_, self.a2_, _ = _linear_fit(np.log10(x), y)
        self.a3_ = None

    def _fit_shifted(self, x, y):
        if len(x) < 3:
            raise FitError(f"{self.kind} fit has 3 coefficients and needs at least 3 points")
        span = float(np.ptp(x))
        if span == 0:
            raise FitError("all x values are equal")
        if self.shift is not None:
            if np.any(x + self.shift <= 0):
                raise FitError("fixed shift leaves x + a2 non-positive")
            a2 = float(self.shift)
        else:
            a2 = self._search_shift(x, y, span)
        self.a1_, self.a3_, _ = _linear_fit(np.log10(x + a2), y)
        self.a2_ = a2

    def _search_shift(self, x, y, span) -> float:
        xmin = float(x.min())
        lo = -xmin + self.eps
        hi = self.shift_max_factor * span
        if not hi > lo:
            raise FitError(f"empty shift search domain ({lo}, {hi}]")
        # geometric spacing in x_min + a2 resolves the steep end near the pole
        offsets = np.geomspace(self.eps, hi + xmin, self.n_grid)
        shifts = offsets - xmin
        sse = _profile_sse(x, y, shifts)
        k = int(np.argmin(sse))  # first minimum, i.e. smallest shift, wins ties
        left, right = shifts[max(k - 1, 0)], shifts[min(k + 1, len(shifts) - 1)]
        # SSE is flat at its minimum, so refine on the stationarity condition instead
        gl, gr = _profile_slope(x, y, left), _profile_slope(x, y, right)
        if right > left and np.isfinite(gl) and np.isfinite(gr) and gl < 0 < gr:
            return float(brentq(lambda s: _profile_slope(x, y, s), left, right, xtol=self.xatol, rtol=4 * np.finfo(float).eps))
        return float(shifts[k])

    def _model(self, rmse=0.0, r2=1.0, n=0) -> LogModel:
        return LogModel(self.kind, self.a1_, self.a2_, self.a3_, rmse, r2, n)

    @property
    def coef_(self) -> tuple:
        check_is_fitted(self, "model_")
        if self.kind == "elevation":
            return (self.a1_, self.a2_)
        return (self.a1_, self.a2_, self.a3_)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.asarray(evaluate(self.model_, self._xy(X)), dtype=float).reshape(-1)


def fit_elevation(points) -> LogModel:
    """Closed-form fit of loss = a1*log10(theta) + a2 to (theta, loss) points."""
    x, y = _split(points)
    return LogLossRegressor("elevation").fit(x, y).model_


def fit_shifted(points, kind: str = "density", **params) -> LogModel:
    """Fit loss = a1*log10(x + a2) + a3 to (x, loss) points."""
    if kind not in ("density", "height"):
        raise ValueError(f"shifted fit kind must be 'density' or 'height', got {kind!r}")
    x, y = _split(points)
    return LogLossRegressor(kind, **params).fit(x, y).model_


def fit(points, kind: str, **params) -> LogModel:
    if kind == "elevation":
        return fit_elevation(points)
    return fit_shifted(points, kind, **params)


# -- files -------------------------------------------------------------------

FEATURE = {"elevation": "theta_elev", "density": "mu", "height": "h_avg"}


def parse_filter(spec: str) -> tuple[str, float, float]:
    """Parse ``key=center:width`` (``width`` may carry a leading ``±``)."""
    try:
        key, rest = spec.split("=", 1)
        center, width = rest.split(":", 1)
        return key.strip(), float(center), abs(float(width.strip().lstrip("±+")))
    except ValueError as exc:
        raise ValueError(f"bad filter {spec!r}; expected key=center:width") from exc


def select_points(records: list[dict], kind: str, filters=()) -> np.ndarray:
    """(x, excess_loss) pairs for `kind` from result records passing all filters."""
    parsed = [parse_filter(f) if isinstance(f, str) else f for f in filters]
    feature = FEATURE[kind]
    rows = []
    for rec in records:
        if rec.get("excess_loss_db") is None or rec.get(feature) is None:
            continue
        if all(rec.get(k) is not None and abs(rec[k] - c) <= w + 1e-12 for k, c, w in parsed):
            rows.append((float(rec[feature]), float(rec["excess_loss_db"])))
    return np.array(rows, dtype=float).reshape(-1, 2)


def save_model(model: LogModel, path) -> None:
    data = {k: (float(f"{v:.6g}") if isinstance(v, float) and math.isfinite(v) else v) for k, v in model.to_dict().items()}
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def load_model(path) -> LogModel:
    return LogModel.from_dict(json.loads(Path(path).read_text()))
