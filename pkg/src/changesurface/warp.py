"""Weighting functions and the softmax warp that turns them into a change surface."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

TWO_PI = 2.0 * np.pi


def rks_features(x, omega, b) -> np.ndarray:
    """Random kitchen sink features ``sqrt(2/m) * cos(x @ omega.T + b)``, shape (n, m)."""
    x = np.atleast_2d(np.asarray(x, float))
    omega = np.atleast_2d(np.asarray(omega, float))
    b = np.asarray(b, float).ravel()
    if omega.shape[1] != x.shape[1] or omega.shape[0] != b.size:
        raise DimensionMismatch(f"x {x.shape}, omega {omega.shape}, b {b.shape}")
    m = b.size
    return np.sqrt(2.0 / m) * np.cos(x @ omega.T + b)


@dataclass(frozen=True)
class RksWeight:
    """``w(x) = sqrt(2/m) * sum_i a_i cos(omega_i . (x - origin) + b_i)``.

    ``sigma0`` and ``Lambda`` are the prior hyperparameters the draw came
    from; they are kept for reporting and are not optimized.  ``origin`` only
    re-references the phases (the uniform phase prior is unchanged by it) and
    keeps ``b`` well conditioned when inputs sit far from zero.
    """

    a: np.ndarray
    omega: np.ndarray
    b: np.ndarray
    sigma0: float = 1.0
    Lambda: np.ndarray | None = None
    origin: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a, float).ravel()
        omega = np.atleast_2d(np.asarray(self.omega, float))
        b = np.mod(np.asarray(self.b, float).ravel(), TWO_PI)
        if not (a.size == omega.shape[0] == b.size):
            raise DimensionMismatch("a, omega and b must have one entry per feature")
        ndim = omega.shape[1]
        lam = np.ones(ndim) if self.Lambda is None else np.asarray(self.Lambda, float).ravel()
        if np.any(lam <= 0):
            raise ValueError("Lambda must be positive")
        origin = np.zeros(ndim) if self.origin is None else np.asarray(self.origin, float).ravel()
        for name, val in (("a", a), ("omega", omega), ("b", b), ("Lambda", lam), ("origin", origin)):
            object.__setattr__(self, name, val)

    @property
    def m(self) -> int:
        return self.a.size

    @property
    def ndim(self) -> int:
        return self.omega.shape[1]

    @property
    def n_params(self) -> int:
        return self.m * (self.ndim + 2)

    def features(self, x) -> np.ndarray:
        return rks_features(np.atleast_2d(x) - self.origin, self.omega, self.b)

    def __call__(self, x) -> np.ndarray:
        return self.features(x) @ self.a

    def param_grad(self, x, gw) -> np.ndarray:
        """Gradient of ``sum_j gw_j * w(x_j)`` with respect to ``pack()``."""
        xc = np.atleast_2d(x) - self.origin
        arg = xc @ self.omega.T + self.b
        c = np.sqrt(2.0 / self.m)
        ga = c * (np.cos(arg).T @ gw)
        gs = -c * self.a * (np.sin(arg) * gw[:, None])  # (n, m)
        gomega = gs.T @ xc
        gb = gs.sum(axis=0)
        return np.concatenate([ga, gomega.ravel(), gb])

    def pack(self) -> np.ndarray:
        return np.concatenate([self.a, self.omega.ravel(), self.b])

    def unpack(self, vec) -> "RksWeight":
        m, D = self.m, self.ndim
        vec = np.asarray(vec, float)
        return RksWeight(vec[:m], vec[m:m + m * D].reshape(m, D), vec[m + m * D:],
                         self.sigma0, self.Lambda, self.origin)

    def param_scales(self, span) -> np.ndarray:
        """Natural magnitudes of the packed parameters, for optimizer scaling."""
        span = np.asarray(span, float)
        return np.concatenate([np.ones(self.m), np.tile(1.0 / span, self.m), np.ones(self.m)])

    def bound(self) -> float:
        return float(np.sqrt(2.0 / self.m) * np.sum(np.abs(self.a)))

    def to_dict(self) -> dict:
        return {"type": "rks", "a": self.a.tolist(), "omega": self.omega.tolist(),
                "b": self.b.tolist(), "sigma0": self.sigma0, "Lambda": self.Lambda.tolist(),
                "origin": self.origin.tolist()}


@dataclass(frozen=True)
class PolyWeight:
    """``w(x) = beta0 + sum_{i=1..p} beta_i . (x - origin)**i`` with elementwise powers."""

    beta0: float
    coefs: np.ndarray  # (p, D)
    origin: np.ndarray | None = None

    def __post_init__(self):
        coefs = np.atleast_2d(np.asarray(self.coefs, float))
        origin = np.zeros(coefs.shape[1]) if self.origin is None else np.asarray(self.origin, float).ravel()
        if not (np.isfinite(self.beta0) and np.all(np.isfinite(coefs))):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "coefs", coefs)
        object.__setattr__(self, "origin", origin)

    @property
    def degree(self) -> int:
        return self.coefs.shape[0]

    @property
    def ndim(self) -> int:
        return self.coefs.shape[1]

    @property
    def n_params(self) -> int:
        return 1 + self.coefs.size

    def _powers(self, x):
        xc = np.atleast_2d(x) - self.origin
        return xc[:, None, :] ** np.arange(1, self.degree + 1)[None, :, None]  # (n, p, D)

    def __call__(self, x) -> np.ndarray:
        return self.beta0 + np.einsum("npd,pd->n", self._powers(x), self.coefs)

    def param_grad(self, x, gw) -> np.ndarray:
        gc = np.einsum("npd,n->pd", self._powers(x), gw)
        return np.concatenate([[np.sum(gw)], gc.ravel()])

    def pack(self) -> np.ndarray:
        return np.concatenate([[self.beta0], self.coefs.ravel()])

    def unpack(self, vec) -> "PolyWeight":
        vec = np.asarray(vec, float)
        return PolyWeight(vec[0], vec[1:].reshape(self.coefs.shape), self.origin)

    def param_scales(self, span) -> np.ndarray:
        span = np.asarray(span, float)
        return np.concatenate([[1.0], (span[None, :] ** -np.arange(1.0, self.degree + 1)[:, None]).ravel()])

    def to_dict(self) -> dict:
        return {"type": "poly", "beta0": self.beta0, "coefs": self.coefs.tolist(),
                "origin": self.origin.tolist()}


@dataclass(frozen=True)
class ZeroWeight:
    """Reference weighting function fixed at zero (removes softmax shift freedom)."""

    ndim: int = 1
    n_params: int = field(default=0, init=False)

    def __call__(self, x) -> np.ndarray:
        return np.zeros(np.atleast_2d(x).shape[0])

    def param_grad(self, x, gw) -> np.ndarray:
        return np.zeros(0)

    def pack(self) -> np.ndarray:
        return np.zeros(0)

    def unpack(self, vec) -> "ZeroWeight":
        return self

    def param_scales(self, span) -> np.ndarray:
        return np.zeros(0)

    def to_dict(self) -> dict:
        return {"type": "zero", "ndim": self.ndim}


WeightFunction = RksWeight | PolyWeight | ZeroWeight


def weight_from_dict(d: dict) -> WeightFunction:
    kind = d["type"]
    if kind == "rks":
        return RksWeight(np.array(d["a"]), np.array(d["omega"]), np.array(d["b"]),
                         d["sigma0"], np.array(d["Lambda"]), np.array(d["origin"]))
    if kind == "poly":
        return PolyWeight(d["beta0"], np.array(d["coefs"]), np.array(d["origin"]))
    if kind == "zero":
        return ZeroWeight(d["ndim"])
    raise ValueError(f"unknown weight function type {kind!r}")


@dataclass(frozen=True)
class ChangeSurface:
    """The r weighting functions whose softmax gives each regime's coverage.

    A single regime (r = 1) is allowed and yields weights identically one;
    it is how the plain stationary model is expressed.
    """

    weights: tuple

    def __post_init__(self):
        ws = tuple(self.weights)
        if len(ws) < 1:
            raise ValueError("a change surface needs at least one weighting function")
        object.__setattr__(self, "weights", ws)

    @property
    def r(self) -> int:
        return len(self.weights)

    def raw(self, x) -> np.ndarray:
        """(n, r) unwarped weighting function values."""
        return np.stack([w(x) for w in self.weights], axis=1)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def warp(surface: ChangeSurface, x) -> np.ndarray:
    """(n, r) regime weights ``softmax(w_1(x), ..., w_r(x))``; rows sum to one."""
    return softmax(surface.raw(x))


def sample_rks_prior(m: int, Lambda, sigma0: float, seed, origin=None) -> RksWeight:
    """Draw ``a ~ N(0, sigma0/m I)``, ``omega_i ~ N(0, Lambda^{-1} / (4 pi^2))``, ``b ~ U(0, 2pi)``.

    ``Lambda`` holds squared length scales, one per input dimension.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if m < 1:
        raise ValueError("need at least one feature")
    rng = np.random.default_rng(seed)
    lam = np.atleast_1d(np.asarray(Lambda, float))
    a = rng.normal(0.0, np.sqrt(sigma0 / m), size=m)
    omega = rng.normal(0.0, 1.0, size=(m, lam.size)) / (TWO_PI * np.sqrt(lam))
    b = rng.uniform(0.0, TWO_PI, size=m)
    return RksWeight(a, omega, b, float(sigma0), lam, origin)


# --- change surface summaries -------------------------------------------------

def level_crossings(t, s, level: float) -> np.ndarray:
    """Locations where the piecewise-linear series ``s(t)`` crosses ``level``."""
    t, s = np.asarray(t, float), np.asarray(s, float)
    g = s - level
    out = []
    for k in range(len(t) - 1):
        if g[k] == 0.0:
            out.append(t[k])
        elif g[k] * g[k + 1] < 0:
            out.append(t[k] + (t[k + 1] - t[k]) * g[k] / (g[k] - g[k + 1]))
    if len(t) and g[-1] == 0.0:
        out.append(t[-1])
    return np.unique(np.asarray(out, float))


def _nearest(crossings: np.ndarray, t0: float) -> float:
    if crossings.size == 0 or not np.isfinite(t0):
        return np.nan
    return float(crossings[np.argmin(np.abs(crossings - t0))])


@dataclass(frozen=True)
class SeriesSummary:
    midpoint: float  # first 0.5 crossing; nan when there is none
    slope: float  # 0.5 / (t_0.75 - t_0.25)
    duration: float  # |t_0.9 - t_0.1|
    n_crossings: int

    @property
    def crossed(self) -> bool:
        return self.n_crossings > 0


def summarize_series(t, s) -> SeriesSummary:
    """Midpoint, slope and 0.1-to-0.9 duration of one regime weight along ``t``.

    The 0.25/0.75 and 0.1/0.9 crossings used are the ones nearest the midpoint.
    """
    mids = level_crossings(t, s, 0.5)
    if mids.size == 0:
        return SeriesSummary(np.nan, np.nan, np.nan, 0)
    t0 = float(mids[0])
    t25, t75 = (_nearest(level_crossings(t, s, lv), t0) for lv in (0.25, 0.75))
    t10, t90 = (_nearest(level_crossings(t, s, lv), t0) for lv in (0.1, 0.9))
    slope = 0.5 / (t75 - t25) if np.isfinite(t25) and np.isfinite(t75) and t75 != t25 else np.nan
    return SeriesSummary(t0, slope, abs(t90 - t10), int(mids.size))


@dataclass(frozen=True)
class SurfaceSummary:
    """Per-slice summaries along a time axis; ``coords`` has one row per slice."""

    time_axis: int
    coords: np.ndarray
    series: tuple

    def rows(self):
        for c, s in zip(self.coords, self.series):
            yield [*c.tolist(), s.midpoint, s.slope, s.duration, int(s.crossed)]


def surface_summary(surface: ChangeSurface, axes, time_axis: int, regime: int = 0) -> SurfaceSummary:
    """Summarize ``warp(surface)[:, regime]`` along ``axes[time_axis]`` for every other-axis slice."""
    axes = [np.asarray(a, float) for a in axes]
    t = axes[time_axis]
    others = [a for d, a in enumerate(axes) if d != time_axis]
    coords, series = [], []
    for combo in itertools.product(*others) if others else [()]:
        pts = np.empty((t.size, len(axes)))
        k = 0
        for d in range(len(axes)):
            if d == time_axis:
                pts[:, d] = t
            else:
                pts[:, d] = combo[k]
                k += 1
        s = warp(surface, pts)[:, regime]
        coords.append(combo)
        series.append(summarize_series(t, s))
    return SurfaceSummary(time_axis, np.asarray(coords, float).reshape(len(coords), len(others)),
                          tuple(series))
