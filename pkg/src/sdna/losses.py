"""Scalar loss families and their Fenchel conjugates.

Conventions follow the ERM primal ``(1/n) sum_i phi_i(a_i^T w)``: each loss is
parametrised by the example label ``b_i``. ``phi`` is ``1/gamma``-smooth, so
``phi*`` is ``gamma``-strongly convex on its domain.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, logit, xlogy

from . import _kernels


class QuadraticLoss:
    """``phi(t) = (t - b)^2 / 2`` with ``phi*(u) = u^2 / 2 + b u``."""

    name = "quadratic"
    gamma = 1.0
    code = _kernels.QUADRATIC

    def value(self, t, b):
        return 0.5 * (np.asarray(t) - b) ** 2

    def derivative(self, t, b):
        return np.asarray(t) - b

    def conjugate(self, u, b):
        u = np.asarray(u, dtype=float)
        return 0.5 * u * u + b * u

    def conjugate_derivative(self, u, b):
        return np.asarray(u) + b

    def check_labels(self, b):
        if not np.all(np.isfinite(b)):
            raise ValueError("labels must be finite")


class LogisticLoss:
    """``phi(t) = log(1 + exp(-b t))`` for labels ``b`` in {-1, +1}.

    The conjugate is finite for ``s = -b u`` in [0, 1], where
    ``phi*(u) = s log s + (1 - s) log(1 - s)``.
    """

    name = "logistic"
    gamma = 4.0
    code = _kernels.LOGISTIC

    def value(self, t, b):
        return np.logaddexp(0.0, -b * np.asarray(t, dtype=float))

    def derivative(self, t, b):
        return -b * expit(-b * np.asarray(t, dtype=float))

    def conjugate(self, u, b):
        s = -b * np.asarray(u, dtype=float)
        inside = (s >= 0) & (s <= 1)
        sc = np.clip(s, 0.0, 1.0)
        val = xlogy(sc, sc) + xlogy(1 - sc, 1 - sc)
        return np.where(inside, val, np.inf)

    def conjugate_derivative(self, u, b):
        s = -b * np.asarray(u, dtype=float)
        return -b * logit(s)

    def check_labels(self, b):
        if not np.all(np.isin(b, (-1.0, 1.0))):
            raise ValueError("logistic loss needs labels in {-1, +1}")


LOSSES = {"quadratic": QuadraticLoss, "logistic": LogisticLoss}


def get_loss(name):
    if not isinstance(name, str):
        return name
    try:
        return LOSSES[name]()
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None
