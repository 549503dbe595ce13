"""Closed-form values used as independent oracles."""

from __future__ import annotations

import numpy as np


def heat_evolved_gaussian(x, t, center, width):
    """``exp(t Lap/2)`` applied to ``exp(-|y - c|^2 / (2 w^2))`` at ``x`` (any dimension)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = np.atleast_1d(np.asarray(center, dtype=float))
    s2 = t + width**2
    r2 = float(np.sum((x - c) ** 2))
    return (width**2 / s2) ** (0.5 * x.size) * np.exp(-0.5 * r2 / s2)


def gauge_transformed_gaussian(x, t, b, center, width):
    """``e^{-ibx} exp(t Lap/2)(e^{ib.} f)(x)`` for a 1-d Gaussian bump ``f``.

    This is ``exp(-tH) f`` for the constant scalar gauge ``alpha = i b``.
    """
    x = float(x)
    w2 = width**2
    s2 = t + w2
    mu = (x * w2 + center * t) / s2
    var = t * w2 / s2
    base = np.sqrt(w2 / s2) * np.exp(-0.5 * (x - center) ** 2 / s2)
    return np.exp(-1j * b * x) * base * np.exp(1j * b * mu - 0.5 * b**2 * var)


def mehler_diagonal(x, t):
    """Diagonal of the kernel of ``exp(-t(-Lap/2 + x^2/2))`` in one dimension."""
    return (2.0 * np.pi * np.sinh(t)) ** -0.5 * np.exp(-np.asarray(x) ** 2 * np.tanh(0.5 * t))


def harmonic_trace(t):
    """``sum_k exp(-t(k + 1/2))``."""
    return 0.5 / np.sinh(0.5 * t)


def harmonic_trace_on_box(t, lo, hi):
    """Integral of :func:`mehler_diagonal` over ``[lo, hi]``."""
    from scipy.special import erf

    a = np.sqrt(np.tanh(0.5 * t))
    pref = (2.0 * np.pi * np.sinh(t)) ** -0.5 * np.sqrt(np.pi) / (2.0 * a)
    return float(pref * (erf(a * hi) - erf(a * lo)))


def dirichlet_eigenvalues(length, count):
    """Lowest eigenvalues of ``-1/2 d^2/dx^2`` on an interval with Dirichlet ends."""
    k = np.arange(1, count + 1)
    return 0.5 * (np.pi * k / length) ** 2


def discrete_dirichlet_eigenvalues(h, m):
    """Exact eigenvalues of the ``-1/2`` second-difference matrix with ``m`` interior nodes."""
    k = np.arange(1, m + 1)
    return (2.0 / h**2) * np.sin(0.5 * np.pi * k / (m + 1)) ** 2
