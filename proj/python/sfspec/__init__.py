"""Schedule-free spectral optimizers with a C++ core."""

import csv
import io
import json

import numpy as np

from ._sfspec import (
    ConfigError,
    DivergenceError,
    NumericalError,
    decay_at_y_growth,
    dual_pairing,
    frobenius_norm,
    nuclear_norm,
    operator_norm,
    polar,
    state_size,
    stationarity_terms,
    steady_state_rms,
    svd,
    tuned_hyperparams,
    z_norm_cap,
)
from . import _sfspec

__all__ = [
    "ConfigError",
    "DivergenceError",
    "NumericalError",
    "Optimizer",
    "decay_at_y_growth",
    "dual_pairing",
    "frobenius_norm",
    "nuclear_norm",
    "operator_norm",
    "polar",
    "predict",
    "run",
    "state_size",
    "stationarity_bound",
    "stationarity_terms",
    "steady_state_rms",
    "svd",
    "tuned_hyperparams",
    "verify",
    "z_norm_cap",
]


def stationarity_bound(**inputs):
    return stationarity_terms(**inputs)["total"]


def _as_text(config):
    return config if isinstance(config, str) else json.dumps(config)


def run(config):
    """Runs one experiment from a config dict or JSON string.

    Returns a dict with ``summary``, ``trajectory`` (column name to numpy
    array) and the fully resolved ``config``.
    """
    summary, text, resolved = _sfspec._run(_as_text(config))
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    columns = {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
    columns["step"] = columns["step"].astype(np.int64)
    return {"summary": json.loads(summary), "trajectory": columns, "config": json.loads(resolved)}


def predict(calc, inputs):
    return json.loads(_sfspec._predict(calc, _as_text(inputs)))


def verify(suite="all"):
    return json.loads(_sfspec._verify(suite))


class Optimizer:
    """Stateful optimizer over a list of parameter arrays.

    1-d arrays are treated as vector parameters. Gradients passed to
    ``step`` must be evaluated at ``params()``.
    """

    def __init__(self, kind, params, **hyperparams):
        self._shapes = [np.shape(p) for p in params]
        self._impl = _sfspec._Optimizer(kind, [self._as_2d(p) for p in params], json.dumps(hyperparams))

    @staticmethod
    def _as_2d(a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim == 1:
            return a.reshape(1, -1)
        if a.ndim != 2:
            raise ValueError("parameters must be 1-d or 2-d")
        return a

    def _restore(self, arrays):
        return [a.reshape(shape) for a, shape in zip(arrays, self._shapes)]

    def step(self, grads):
        return self._impl.step([self._as_2d(g) for g in grads])

    def train(self):
        self._impl.set_mode("train")

    def eval(self):
        self._impl.set_mode("eval")

    def params(self):
        return self._restore(self._impl.live())

    def x(self):
        return self._restore(self._impl.x())

    def z(self):
        return self._restore(self._impl.z())
