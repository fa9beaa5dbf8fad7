"""The change-surface Gaussian process: covariance, marginal likelihood, fitting, prediction.

The covariance is ``k(x, x') = sum_i s_i(x) k_i(x, x') s_i(x')`` with
``s = softmax(w_1(x), ..., w_r(x))`` and stationary separable ``k_i``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt
import scipy.sparse as sp

from .errors import DegenerateDenominator, DimensionMismatch, IncompleteGrid, NoConvergence, NotPSD, SizeCap
from .grid import GridDataset
from .kernels import JITTER, KernelSpec, eval_dense, eval_factors, unpack_like
from .kron import KronOperator, cg_solve, kron_eigvals, scaled_term_spectrum
from .logdet import DENSE_CAP, MIDDLE, WeylStrategy, weyl_logdet
from .warp import ChangeSurface, warp

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ChangeSurfaceModel:
    """r regimes mixed by a softmax change surface, plus Gaussian noise.

    ``y_offset`` is subtracted from responses before any likelihood or
    posterior computation (the latent mean is zero on the shifted scale).
    """

    surface: ChangeSurface
    kernels: tuple
    noise_var: float
    y_offset: float = 0.0

    def __post_init__(self):
        kernels = tuple(self.kernels)
        if len(kernels) != self.surface.r:
            raise DimensionMismatch(f"{len(kernels)} kernels for {self.surface.r} regimes")
        if not (self.noise_var > 0 and np.isfinite(self.noise_var)):
            raise ValueError("noise variance must be positive and finite")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "noise_var", float(self.noise_var))
        object.__setattr__(self, "y_offset", float(self.y_offset))

    @property
    def r(self) -> int:
        return self.surface.r

    @property
    def ndim(self) -> int:
        return self.kernels[0].ndim

    def _blocks(self):
        return list(self.kernels) + list(self.surface.weights)

    def pack(self) -> np.ndarray:
        """Flat vector: kernel parameters by regime, weight-function parameters, log noise."""
        return np.concatenate([b.pack() for b in self._blocks()] + [[math.log(self.noise_var)]])

    def unpack(self, vec) -> "ChangeSurfaceModel":
        vec = np.asarray(vec, float)
        pos, kernels, weights = 0, [], []
        for k in self.kernels:
            kernels.append(unpack_like(k, vec[pos:pos + k.n_params]))
            pos += k.n_params
        for w in self.surface.weights:
            weights.append(w.unpack(vec[pos:pos + w.n_params]))
            pos += w.n_params
        if pos + 1 != vec.size:
            raise DimensionMismatch(f"parameter vector of length {vec.size}, expected {pos + 1}")
        return ChangeSurfaceModel(ChangeSurface(tuple(weights)), tuple(kernels),
                                  math.exp(vec[pos]), self.y_offset)

    def param_scales(self, span) -> np.ndarray:
        """Typical magnitude of each packed parameter given per-axis input spans."""
        span = np.asarray(span, float)
        parts = []
        for k in self.kernels:
            if hasattr(k, "means"):
                s = np.ones((k.ndim, k.n_components, 3))
                s[..., 1] = 1.0 / span[:, None]
                parts.append(s.ravel())
            else:
                parts.append(np.ones(k.n_params))
        parts += [w.param_scales(span) for w in self.surface.weights]
        return np.concatenate(parts + [[1.0]])

    def n_kernel_params(self) -> int:
        return sum(k.n_params for k in self.kernels)


def composite_dense(model: ChangeSurfaceModel, xa, xb, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense nonstationary covariance between point sets (noise excluded)."""
    xa, xb = np.atleast_2d(xa), np.atleast_2d(xb)
    if max(xa.shape[0], xb.shape[0]) > cap:
        raise SizeCap(f"dense covariance of {xa.shape[0]}x{xb.shape[0]} exceeds cap {cap}")
    sa, sb = warp(model.surface, xa), warp(model.surface, xb)
    out = np.zeros((xa.shape[0], xb.shape[0]))
    for i, k in enumerate(model.kernels):
        out += sa[:, i, None] * eval_dense(k, xa, xb) * sb[None, :, i]
    return out


def build_operator(model: ChangeSurfaceModel, data: GridDataset) -> KronOperator:
    """Scaled-Kronecker representation of the training covariance plus noise."""
    if len(data.axes) != model.ndim:
        raise IncompleteGrid(f"{len(data.axes)}-D grid for a {model.ndim}-D model")
    s = warp(model.surface, data.points())
    terms = tuple((s[:, i], tuple(eval_factors(k, data.axes))) for i, k in enumerate(model.kernels))
    return KronOperator(terms, model.noise_var)


# --- exact (dense) marginal likelihood -----------------------------------------

def _cholesky(k: np.ndarray):
    try:
        return sla.cholesky(k, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        pass
    base = float(np.mean(np.diag(k)))
    for scale in (1e-10, 1e-8, 1e-6):
        try:
            return sla.cholesky(k + scale * base * np.eye(k.shape[0]), lower=True, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            continue
    raise NotPSD("covariance is not positive definite")


class _SubGrid:
    """Training points of a grid (possibly a subset) with per-axis bookkeeping."""

    def __init__(self, data: GridDataset, idx=None):
        self.data = data
        self.idx = np.arange(data.n) if idx is None else np.asarray(idx)
        self.mi = data.multi_index(self.idx)
        self.x = data.points(self.idx)
        self.y = data.y[self.idx]
        self.n = self.idx.size
        self._sel = [None] * data.ndim

    def selector(self, d: int):
        """Sparse (n, n_d) one-hot map from points to axis-d positions."""
        if self._sel[d] is None:
            nd = self.data.shape[d]
            self._sel[d] = sp.csr_matrix((np.ones(self.n), (np.arange(self.n), self.mi[:, d])),
                                         shape=(self.n, nd))
        return self._sel[d]

    def expand(self, factor: np.ndarray, d: int) -> np.ndarray:
        ix = self.mi[:, d]
        return np.take(factor[ix], ix, axis=1)

    def aggregate(self, p: np.ndarray, d: int) -> np.ndarray:
        e = self.selector(d)
        return np.asarray((e.T @ np.asarray((e.T @ p)).T))


def _nlml_dense(model: ChangeSurfaceModel, sub: _SubGrid, grad: bool):
    n, D = sub.n, model.ndim
    y = sub.y - model.y_offset
    s = warp(model.surface, sub.x)
    per_dim, kmats = [], []
    cov = np.zeros((n, n))
    tmp = np.empty((n, n))
    for i, k in enumerate(model.kernels):
        dims = [sub.expand(k.factor(d, sub.data.axes[d], sub.data.axes[d]), d) for d in range(D)]
        kd = dims[0].copy() if D > 1 else dims[0]
        for m in dims[1:]:
            kd *= m
        per_dim.append(dims)
        kmats.append(kd)
        np.multiply(kd, s[:, i, None], out=tmp)
        tmp *= s[None, :, i]
        cov += tmp
    cov[np.diag_indices(n)] += model.noise_var
    chol = _cholesky(cov)
    del cov
    alpha = sla.cho_solve((chol, True), y, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    value = 0.5 * (y @ alpha) + 0.5 * logdet + 0.5 * n * LOG_2PI
    if not grad:
        return value, None

    w, info = sla.lapack.dpotri(chol, lower=1, overwrite_c=1)
    if info != 0:
        raise NotPSD("inverse from Cholesky factor failed")
    del chol
    w += np.tril(w, -1).T  # upper triangle of the factor was zero
    w -= alpha[:, None] * alpha[None, :]  # W = K^-1 - alpha alpha^T

    g_kern = []
    h = np.empty((n, model.r))  # s_i * dNLML/ds_i
    for i, k in enumerate(model.kernels):
        si = s[:, i]
        np.multiply(w, si[:, None], out=tmp)
        tmp *= si[None, :]  # diag(s) W diag(s)
        h[:, i] = np.einsum("jk,jk->j", tmp, kmats[i])
        gk = np.zeros(k.n_params)
        dims = per_dim[i]
        for d in range(D):
            if D == 1:
                p = tmp
            else:
                p = np.prod([dims[dd] for dd in range(D) if dd != d], axis=0) if D > 2 else dims[1 - d]
                p = tmp * p
            agg = sub.aggregate(p, d)
            ax = sub.data.axes[d]
            for pidx, dfac in k.factor_derivs(d, ax, ax):
                gk[pidx] += 0.5 * np.sum(agg * dfac)
        g_kern.append(gk)
    # softmax chain rule: dNLML/dw_j = h_j - s_j * sum_i h_i
    g_w = h - s * np.sum(h, axis=1, keepdims=True)
    g_weights = [wf.param_grad(sub.x, g_w[:, j]) for j, wf in enumerate(model.surface.weights)]
    g_noise = 0.5 * model.noise_var * np.trace(w)
    return value, np.concatenate(g_kern + g_weights + [[g_noise]])


def nlml_exact(model: ChangeSurfaceModel, data: GridDataset, idx=None, cap: int = DENSE_CAP) -> float:
    """Negative log marginal likelihood by dense Cholesky, constant term included.

    ``idx`` restricts the likelihood to a subset of the grid cells.
    """
    sub = _SubGrid(data, idx)
    if sub.n > cap:
        raise SizeCap(f"n={sub.n} exceeds dense cap {cap}")
    return float(_nlml_dense(model, sub, grad=False)[0])


def nlml_exact_grad(model: ChangeSurfaceModel, data: GridDataset, idx=None, cap: int = DENSE_CAP):
    """``(value, gradient)`` of :func:`nlml_exact` with respect to ``model.pack()``."""
    sub = _SubGrid(data, idx)
    if sub.n > cap:
        raise SizeCap(f"n={sub.n} exceeds dense cap {cap}")
    value, g = _nlml_dense(model, sub, grad=True)
    return float(value), g


# --- bounded (scalable) marginal likelihood ------------------------------------

@dataclass(frozen=True)
class BoundTerms:
    value: float
    logdet: float
    quad: float
    cg_iterations: int
    converged: bool


def nlml_bound_terms(model: ChangeSurfaceModel, data: GridDataset,
                     strategy: WeylStrategy = MIDDLE, cg_tol: float = 1e-6,
                     max_iter: int = 1000, x0=None) -> BoundTerms:
    op = build_operator(model, data)
    y = data.y - model.y_offset
    spectra = [scaled_term_spectrum(s, kron_eigvals(fs, jitter=JITTER)) for s, fs in op.terms]
    logdet = weyl_logdet(spectra, model.noise_var, strategy)
    sol = cg_solve(op, y, tol=cg_tol, max_iter=max_iter, x0=x0)
    quad = float(y @ sol.x)
    value = 0.5 * quad + 0.5 * logdet + 0.5 * data.n * LOG_2PI
    return BoundTerms(value, logdet, quad, sol.iterations, sol.converged)


def nlml_bound(model: ChangeSurfaceModel, data: GridDataset, strategy: WeylStrategy = MIDDLE,
               cg_tol: float = 1e-6, max_iter: int = 1000, strict: bool = True) -> float:
    """Upper bound on the NLML: Weyl-bounded log determinant plus a CG quadratic term.

    Requires the complete grid.  Raises :class:`NoConvergence` when CG
    stalls, unless ``strict`` is false.
    """
    terms = nlml_bound_terms(model, data, strategy, cg_tol, max_iter)
    if strict and not terms.converged:
        raise NoConvergence(f"CG did not reach tol {cg_tol} in {max_iter} iterations")
    return terms.value


# --- fitting --------------------------------------------------------------------

@dataclass
class FitConfig:
    mode: str = "auto"  # "exact", "bound" or "auto" (exact when n <= dense_cap)
    strategy: WeylStrategy = MIDDLE
    max_iter: int = 200
    dense_cap: int = DENSE_CAP
    cg_tol: float = 1e-10
    fd_step: float = 1e-5
    center_y: bool = True
    noise_floor: float = 1e-6  # lower bound on noise variance relative to var(y)
    log_bound: float = 25.0  # box on log-transformed parameters
    gtol: float = 1e-6


@dataclass
class FitReport:
    objective: float
    initial_objective: float
    trace: list = field(default_factory=list)
    strategy: str = "exact"
    wall_time: float = 0.0
    converged: bool = False
    line_search_failed: bool = False
    n_evals: int = 0
    message: str = ""

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("objective", "initial_objective", "trace", "strategy",
                                               "wall_time", "converged", "line_search_failed",
                                               "n_evals", "message")}


def _log_param_mask(model: ChangeSurfaceModel) -> np.ndarray:
    mask = []
    for k in model.kernels:
        if hasattr(k, "means"):
            m = np.ones((k.ndim, k.n_components, 3), bool)
            m[..., 1] = False
            mask.append(m.ravel())
        else:
            mask.append(np.ones(k.n_params, bool))
    mask += [np.zeros(w.n_params, bool) for w in model.surface.weights]
    return np.concatenate(mask + [[True]])


def axis_spans(data: GridDataset) -> np.ndarray:
    return np.array([a[-1] - a[0] if a.size > 1 else 1.0 for a in data.axes])


def fit(model: ChangeSurfaceModel, data: GridDataset, config: FitConfig | None = None, idx=None):
    """Optimize every hyperparameter by L-BFGS on the selected NLML objective.

    Returns ``(fitted_model, FitReport)``.  The best parameters seen are
    returned even when the line search fails.
    """
    cfg = config or FitConfig()
    t0 = time.perf_counter()
    sub = _SubGrid(data, idx)
    if cfg.center_y:
        model = replace(model, y_offset=float(np.mean(sub.y)))
    mode = cfg.mode
    if mode == "auto":
        mode = "exact" if sub.n <= cfg.dense_cap else "bound"
    if mode == "bound" and sub.n != data.n:
        raise IncompleteGrid("bounded mode needs the complete grid")
    if mode == "exact" and sub.n > cfg.dense_cap:
        raise SizeCap(f"n={sub.n} exceeds dense cap {cfg.dense_cap}")

    scales = model.param_scales(axis_spans(data))
    theta0 = model.pack()
    z0 = theta0 / scales
    yvar = float(np.var(sub.y)) or 1.0
    lo = np.full(z0.size, -np.inf)
    hi = np.full(z0.size, np.inf)
    logmask = _log_param_mask(model)
    lo[logmask], hi[logmask] = -cfg.log_bound, cfg.log_bound
    lo[-1] = math.log(cfg.noise_floor * yvar)
    z0 = np.clip(np.nan_to_num(z0, neginf=-cfg.log_bound), lo, hi)

    state = {"best": np.inf, "theta": theta0, "evals": 0}

    def exact_obj(theta):
        return nlml_exact_grad(model.unpack(theta), data, idx, cfg.dense_cap)

    def bound_obj(theta):
        def f(th):
            return nlml_bound(model.unpack(th), data, cfg.strategy, cfg.cg_tol, strict=False)
        val = f(theta)
        g = np.empty_like(theta)
        for j in range(theta.size):
            h = cfg.fd_step * max(1.0, abs(theta[j]))
            tp, tm = theta.copy(), theta.copy()
            tp[j] += h
            tm[j] -= h
            g[j] = (f(tp) - f(tm)) / (2 * h)
        return val, g

    obj = exact_obj if mode == "exact" else bound_obj

    def wrapped(z):
        theta = z * scales
        state["evals"] += 1
        try:
            val, g = obj(theta)
        except (NotPSD, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            log.debug("objective failed: %s", exc)
            return 1e25, np.zeros_like(z)
        if not np.isfinite(val) or not np.all(np.isfinite(g)):
            return 1e25, np.zeros_like(z)
        if val < state["best"]:
            state["best"], state["theta"] = val, theta.copy()
        return val, g * scales

    f0, _ = wrapped(z0)
    trace = [float(f0)]

    def callback(intermediate_result):
        trace.append(float(intermediate_result.fun))

    res = sopt.minimize(wrapped, z0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                        callback=callback,
                        options={"maxiter": cfg.max_iter, "gtol": cfg.gtol, "maxcor": 20})
    fitted = model.unpack(state["theta"])
    msg = str(res.message)
    report = FitReport(objective=float(state["best"]), initial_objective=float(f0), trace=trace,
                       strategy="exact" if mode == "exact" else str(cfg.strategy),
                       wall_time=time.perf_counter() - t0, converged=bool(res.success),
                       line_search_failed="ABNORMAL" in msg.upper(), n_evals=state["evals"],
                       message=msg)
    return fitted, report


# --- prediction -----------------------------------------------------------------

def predict(model: ChangeSurfaceModel, data: GridDataset, xstar=None, idx=None,
            with_var: bool = False, cap: int = DENSE_CAP, cg_tol: float = 1e-8,
            max_iter: int = 2000, chunk: int = 512):
    """Posterior mean (and optionally variance, noise included) at ``xstar``.

    Training data are the grid cells ``idx`` (all cells when omitted).
    Uses a dense Cholesky when the training set fits under ``cap`` and
    conjugate gradients on the Kronecker operator otherwise.  ``xstar=None``
    predicts at every grid cell.
    """
    sub = _SubGrid(data, idx)
    xs = data.points() if xstar is None else np.atleast_2d(np.asarray(xstar, float))
    if xs.shape[1] != model.ndim:
        raise DimensionMismatch(f"{xs.shape[1]}-D test points for a {model.ndim}-D model")
    y = sub.y - model.y_offset
    prior_var = None
    if with_var:
        s = warp(model.surface, xs)
        prior_var = sum(s[:, i] ** 2 * np.diag(eval_dense(k, xs[:1], xs[:1]))[0]
                        for i, k in enumerate(model.kernels)) + model.noise_var

    if sub.n <= cap:
        cov = composite_dense(model, sub.x, sub.x, cap)
        cov[np.diag_indices(sub.n)] += model.noise_var
        chol = _cholesky(cov)
        alpha = sla.cho_solve((chol, True), y, check_finite=False)
        mean = np.empty(xs.shape[0])
        var = np.empty(xs.shape[0]) if with_var else None
        for c0 in range(0, xs.shape[0], chunk):
            kst = composite_dense(model, xs[c0:c0 + chunk], sub.x, max(cap, sub.n))
            mean[c0:c0 + chunk] = kst @ alpha
            if with_var:
                v = sla.solve_triangular(chol, kst.T, lower=True, check_finite=False)
                var[c0:c0 + chunk] = prior_var[c0:c0 + chunk] - np.sum(v**2, axis=0)
        mean += model.y_offset
        return (mean, np.clip(var, 0.0, None)) if with_var else mean

    if sub.n != data.n:
        raise IncompleteGrid("CG prediction needs the complete grid")
    op = build_operator(model, data)
    sol = cg_solve(op, y, tol=cg_tol, max_iter=max_iter)
    if not sol.converged:
        raise NoConvergence(f"CG stopped at relative residual {sol.rel_residual:.2e}")
    if xstar is None:
        mean = op.matvec(sol.x) - model.noise_var * sol.x
    else:
        mean = np.concatenate([composite_dense(model, xs[c0:c0 + chunk], sub.x, np.inf) @ sol.x
                               for c0 in range(0, xs.shape[0], chunk)])
    mean = mean + model.y_offset
    if not with_var:
        return mean
    var = np.empty(xs.shape[0])
    for j in range(xs.shape[0]):
        kst = composite_dense(model, xs[j:j + 1], sub.x, np.inf)[0]
        v = cg_solve(op, kst, tol=cg_tol, max_iter=max_iter)
        var[j] = prior_var[j] - kst @ v.x
    return mean, np.clip(var, 0.0, None)


def nmse(y_test, y_pred, y_train_mean: float) -> float:
    """``||y_test - y_pred||^2 / ||y_test - mean(y_train)||^2``."""
    y_test, y_pred = np.asarray(y_test, float), np.asarray(y_pred, float)
    if y_test.shape != y_pred.shape:
        raise DimensionMismatch("y_test and y_pred differ in length")
    denom = float(np.sum((y_test - y_train_mean) ** 2))
    if denom == 0.0:
        raise DegenerateDenominator("test responses all equal the training mean")
    return float(np.sum((y_test - y_pred) ** 2)) / denom
