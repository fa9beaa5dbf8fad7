"""Separable stationary kernels: RBF and per-dimension spectral mixture.

Both kernels are products of one-dimensional factors, so on a grid the
covariance is the Kronecker product of the per-axis factor matrices.
Flat parameter vectors hold log-transformed positives:

* ``Rbf``: ``[log l_1 .. log l_D, log signal_var]``
* ``SpectralMixture``: per dimension, per component ``[log w, mean, log var]``
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch

JITTER = 1e-8
TWO_PI = 2.0 * np.pi


def _pairwise_delta(xa, xb) -> np.ndarray:
    return np.asarray(xa, float)[:, None] - np.asarray(xb, float)[None, :]


def _as_points(x, ndim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if ndim == 1 else x[None, :]
    if x.shape[1] != ndim:
        raise DimensionMismatch(f"points have dimension {x.shape[1]}, kernel expects {ndim}")
    return x


@dataclass(frozen=True)
class Rbf:
    """``signal_var * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)``.

    The signal variance is attached to the factor of dimension 0.
    """

    length_scales: np.ndarray
    signal_var: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if not (np.all(ls > 0) and np.all(np.isfinite(ls))):
            raise ValueError("length scales must be positive and finite")
        if not (self.signal_var > 0 and np.isfinite(self.signal_var)):
            raise ValueError("signal variance must be positive and finite")
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "signal_var", float(self.signal_var))

    @property
    def ndim(self) -> int:
        return self.length_scales.size

    @property
    def n_params(self) -> int:
        return self.ndim + 1

    def factor(self, d: int, xa, xb) -> np.ndarray:
        delta = _pairwise_delta(xa, xb)
        f = np.exp(-0.5 * delta**2 / self.length_scales[d] ** 2)
        return self.signal_var * f if d == 0 else f

    def factor_derivs(self, d: int, xa, xb):
        """``[(flat_param_index, dF/dparam), ...]`` for the parameters of factor ``d``."""
        delta = _pairwise_delta(xa, xb)
        f = self.factor(d, xa, xb)
        out = [(d, f * delta**2 / self.length_scales[d] ** 2)]
        if d == 0:
            out.append((self.ndim, f))
        return out

    def pack(self) -> np.ndarray:
        return np.concatenate([np.log(self.length_scales), [np.log(self.signal_var)]])

    @classmethod
    def unpack(cls, vec, ndim: int) -> "Rbf":
        vec = np.asarray(vec, float)
        return cls(np.exp(vec[:ndim]), float(np.exp(vec[ndim])))

    def to_dict(self) -> dict:
        return {"type": "rbf", "length_scales": self.length_scales.tolist(),
                "signal_var": self.signal_var}


@dataclass(frozen=True)
class SpectralMixture:
    """Product over dimensions of univariate Q-component spectral mixtures.

    Factor for dimension d at lag t::

        sum_q w[d,q] * cos(2 pi t m[d,q]) * exp(-2 pi^2 t^2 v[d,q])

    Arrays ``weights``, ``means``, ``variances`` have shape (D, Q); means are
    in cycles per input unit, variances in (cycles per unit)^2.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w, m, v = (np.atleast_2d(np.asarray(a, dtype=float)) for a in
                   (self.weights, self.means, self.variances))
        if not (w.shape == m.shape == v.shape):
            raise DimensionMismatch("weights, means and variances must share shape (D, Q)")
        if np.any(w < 0) or not np.all(np.any(w > 0, axis=1)):
            raise ValueError("weights must be nonnegative with one positive per dimension")
        if np.any(v <= 0):
            raise ValueError("variances must be positive")
        if not all(np.all(np.isfinite(a)) for a in (w, m, v)):
            raise ValueError("non-finite spectral mixture parameter")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def ndim(self) -> int:
        return self.weights.shape[0]

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    @property
    def n_params(self) -> int:
        return 3 * self.weights.size

    def _terms(self, d: int, delta):
        t = delta[..., None]
        w, m, v = self.weights[d], self.means[d], self.variances[d]
        env = np.exp(-2.0 * np.pi**2 * t**2 * v)
        phase = TWO_PI * t * m
        return w, m, v, t, env, phase

    def factor(self, d: int, xa, xb) -> np.ndarray:
        w, _, _, _, env, phase = self._terms(d, _pairwise_delta(xa, xb))
        return np.sum(w * np.cos(phase) * env, axis=-1)

    def factor_derivs(self, d: int, xa, xb):
        w, m, v, t, env, phase = self._terms(d, _pairwise_delta(xa, xb))
        c = np.cos(phase) * env
        base = 3 * self.n_components * d
        out = []
        for q in range(self.n_components):
            out.append((base + 3 * q, w[q] * c[..., q]))
            out.append((base + 3 * q + 1,
                        -w[q] * TWO_PI * t[..., 0] * np.sin(phase[..., q]) * env[..., q]))
            out.append((base + 3 * q + 2,
                        -w[q] * c[..., q] * 2.0 * np.pi**2 * t[..., 0] ** 2 * v[q]))
        return out

    def pack(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            lw = np.log(self.weights)
        return np.stack([lw, self.means, np.log(self.variances)], axis=-1).ravel()

    @classmethod
    def unpack(cls, vec, ndim: int) -> "SpectralMixture":
        arr = np.asarray(vec, float).reshape(ndim, -1, 3)
        return cls(np.exp(arr[..., 0]), arr[..., 1].copy(), np.exp(arr[..., 2]))

    def to_dict(self) -> dict:
        return {"type": "sm", "weights": self.weights.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist()}


KernelSpec = Union[Rbf, SpectralMixture]


def kernel_from_dict(d: dict) -> KernelSpec:
    if d["type"] == "rbf":
        return Rbf(np.array(d["length_scales"]), d["signal_var"])
    if d["type"] == "sm":
        return SpectralMixture(np.array(d["weights"]), np.array(d["means"]),
                               np.array(d["variances"]))
    raise ValueError(f"unknown kernel type {d['type']!r}")


def unpack_like(spec: KernelSpec, vec) -> KernelSpec:
    """Rebuild a kernel of the same type and shape from a flat vector."""
    return type(spec).unpack(vec, spec.ndim)


def eval_dense(spec: KernelSpec, xa, xb) -> np.ndarray:
    """Kernel matrix between point sets ``xa`` (na, D) and ``xb`` (nb, D)."""
    xa, xb = _as_points(xa, spec.ndim), _as_points(xb, spec.ndim)
    out = np.ones((xa.shape[0], xb.shape[0]))
    for d in range(spec.ndim):
        out *= spec.factor(d, xa[:, d], xb[:, d])
    return out


def eval_factors(spec: KernelSpec, axes) -> list[np.ndarray]:
    """Per-axis factor matrices whose Kronecker product is the grid kernel."""
    if len(axes) != spec.ndim:
        raise DimensionMismatch(f"{len(axes)} axes for a {spec.ndim}-D kernel")
    return [spec.factor(d, a, a) for d, a in enumerate(axes)]
