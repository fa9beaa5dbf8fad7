"""Model initialization.

Weights first: random RKS weighting functions are screened under a simplified
model with RBF regimes and the best one is optimized.  Spectral mixtures
second: for each regime, the empirical spectrum of the responses where that
regime dominates is summarized by a 1-D Gaussian mixture per dimension.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateComponent, DegenerateData, EmptyRegime
from .grid import GridDataset
from .kernels import Rbf, SpectralMixture
from .model import ChangeSurfaceModel, FitConfig, axis_spans, fit, nlml_exact
from .warp import ChangeSurface, ZeroWeight, sample_rks_prior, warp

log = logging.getLogger(__name__)


@dataclass
class InitConfig:
    g: int = 10  # candidate weighting functions
    h: int = 10  # RBF hyperparameter draws per candidate
    partial_iters: int = 30
    final_iters: int = 100
    Q: int = 3
    m: int = 5
    seed: int = 0
    max_points: int = 600  # weight screening runs on a random subset above this size
    sort_line: bool = False
    v_as_variance: bool = False  # map GMM variance (not std) to the SM variance
    samples_per_line: int = 64

    def __post_init__(self):
        if self.g < 1 or self.h < 1 or self.partial_iters < 1:
            raise ValueError("g, h and partial_iters must be >= 1")


# --- 1-D Gaussian mixture --------------------------------------------------------

@dataclass(frozen=True)
class Gmm1D:
    weights: np.ndarray  # mixing proportions, sum to one
    means: np.ndarray
    stds: np.ndarray
    trace: tuple = ()  # log-likelihood after each EM iteration of the final run
    reseeds: int = 0
    degenerate: bool = False

    @property
    def Q(self) -> int:
        return self.weights.size

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, float)[:, None]
        comp = (np.log(self.weights) - np.log(self.stds) - 0.5 * np.log(2 * np.pi)
                - 0.5 * ((x - self.means) / self.stds) ** 2)
        return np.logaddexp.reduce(comp, axis=1)


def _kmeanspp(x, Q, rng):
    centres = [x[rng.integers(x.size)]]
    for _ in range(1, Q):
        d2 = np.min((x[:, None] - np.asarray(centres)[None, :]) ** 2, axis=1)
        if d2.sum() == 0:
            centres.append(x[rng.integers(x.size)])
        else:
            centres.append(x[rng.choice(x.size, p=d2 / d2.sum())])
    return np.asarray(centres, float)


def fit_gmm1d(samples, Q: int, seed=0, max_iter: int = 500, tol: float = 1e-10,
              max_reseeds: int = 3) -> Gmm1D:
    """EM fit of a Q-component 1-D Gaussian mixture with k-means++ seeding.

    A component whose variance falls below ``(1e-3 * std)^2`` is re-seeded and
    EM restarted; after ``max_reseeds`` restarts variances are clamped at the
    floor and the result is flagged ``degenerate``.
    """
    x = np.asarray(samples, float).ravel()
    if np.unique(x).size < Q:
        raise DegenerateData(f"need at least {Q} distinct samples")
    rng = np.random.default_rng(seed)
    sd = float(np.std(x))
    if Q == 1:
        ll = float(np.sum(Gmm1D(np.ones(1), np.array([x.mean()]), np.array([sd])).logpdf(x)))
        return Gmm1D(np.ones(1), np.array([x.mean()]), np.array([sd]), (ll,))
    floor = (1e-3 * sd) ** 2
    reseeds = 0
    means = _kmeanspp(x, Q, rng)
    while True:
        phi, mu, var = np.full(Q, 1.0 / Q), means.copy(), np.full(Q, sd**2)
        trace, collapsed = [], None
        for _ in range(max_iter):
            comp = np.log(phi) - 0.5 * np.log(2 * np.pi * var) - 0.5 * (x[:, None] - mu) ** 2 / var
            norm = np.logaddexp.reduce(comp, axis=1)
            resp = np.exp(comp - norm[:, None])
            nk = resp.sum(axis=0) + 1e-300
            phi = nk / x.size
            mu = (resp * x[:, None]).sum(axis=0) / nk
            var = (resp * (x[:, None] - mu) ** 2).sum(axis=0) / nk
            low = var < floor
            if np.any(low):
                if reseeds < max_reseeds:
                    collapsed = int(np.argmax(low))
                    break
                var = np.maximum(var, floor)
            ll = float(np.sum(np.logaddexp.reduce(
                np.log(phi) - 0.5 * np.log(2 * np.pi * var) - 0.5 * (x[:, None] - mu) ** 2 / var, axis=1)))
            trace.append(ll)
            if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * abs(trace[-1]):
                break
        if collapsed is None:
            break
        reseeds += 1
        log.debug("GMM component %d collapsed; re-seeding (%d)", collapsed, reseeds)
        means = mu.copy()
        means[collapsed] = x[rng.integers(x.size)]
    degenerate = reseeds >= max_reseeds and bool(np.any(var <= floor))
    return Gmm1D(phi, mu, np.sqrt(var), tuple(trace), reseeds, degenerate)


# --- empirical spectrum ----------------------------------------------------------

def line_spectrum(values, spacing: float, sort: bool = False):
    """Frequencies (cycles per unit) and normalized power ``|FFT(values)|^2`` of one grid line."""
    v = np.sort(values) if sort else np.asarray(values, float)
    power = np.abs(np.fft.rfft(v)) ** 2
    freqs = np.fft.rfftfreq(v.size, d=spacing)
    total = power.sum()
    return freqs, (power / total if total > 0 else power)


def empirical_spectrum(data: GridDataset, regime_mask, d: int, seed=0, sort_line: bool = False,
                       samples_per_line: int = 64, y=None) -> np.ndarray:
    """Pooled frequency samples from the power spectra of grid lines along axis ``d``.

    Each line (other coordinates fixed) is restricted to the masked cells,
    which are treated as evenly spaced.  ``min(samples_per_line, len)``
    frequencies are drawn per line in proportion to power and spread
    uniformly within their bin.
    """
    rng = np.random.default_rng(seed)
    yy = data.y if y is None else np.asarray(y, float)
    mask = np.moveaxis(np.asarray(regime_mask, bool).reshape(data.shape), d, -1).reshape(-1, data.shape[d])
    lines = np.moveaxis(yy.reshape(data.shape), d, -1).reshape(-1, data.shape[d])
    ax = data.axes[d]
    spacing = float(np.mean(np.diff(ax))) if ax.size > 1 else 1.0
    out = []
    for vals, sel in zip(lines, mask):
        if sel.sum() < 2:
            continue
        freqs, prob = line_spectrum(vals[sel], spacing, sort_line)
        if prob.sum() <= 0:
            continue
        k = min(samples_per_line, int(sel.sum()))
        bins = rng.choice(freqs.size, size=k, p=prob)
        width = 1.0 / (sel.sum() * spacing)
        out.append(np.abs(freqs[bins] + rng.uniform(-0.5, 0.5, k) * width))
    if not out:
        raise EmptyRegime(f"no line along axis {d} has two or more regime points")
    return np.concatenate(out)


def init_sm(data: GridDataset, surface: ChangeSurface, Q: int = 3, seed=0, idx=None,
            sort_line: bool = False, v_as_variance: bool = False, samples_per_line: int = 64):
    """Spectral mixture kernels per regime from GMM fits to empirical spectra.

    For dimension 0 the mixture weights are ``std(y) * phi_q``; for the others
    they are ``phi_q`` (the product kernel's overall scale lives in one
    dimension).  Means are ``mu_q`` and variances ``sigma_q`` (or
    ``sigma_q^2`` with ``v_as_variance``).

    Returns ``(kernels, details)`` where ``details`` lists, per regime, the
    fitted :class:`Gmm1D` per dimension and whether the full-data fallback
    was used.
    """
    rng = np.random.default_rng(seed)
    train = np.zeros(data.n, bool)
    train[np.arange(data.n) if idx is None else np.asarray(idx)] = True
    ytr = data.y[train]
    std_y = float(np.std(ytr))
    yc = data.y - np.mean(ytr)
    s = warp(surface, data.points())
    kernels, details = [], []
    for i in range(surface.r):
        mask = train & (s[:, i] > 0.5) if surface.r > 1 else train
        w, mu, v, gmms, fallback = [], [], [], [], []
        for d in range(data.ndim):
            try:
                samples = empirical_spectrum(data, mask, d, rng, sort_line, samples_per_line, yc)
                g, fb = fit_gmm1d(samples, Q, rng), False
            except (EmptyRegime, DegenerateData):
                # too few regime points for a Q-component spectrum: use all training points
                samples = empirical_spectrum(data, train, d, rng, sort_line, samples_per_line, yc)
                g, fb = fit_gmm1d(samples, Q, rng), True
            w.append(g.weights * (std_y if d == 0 else 1.0))
            mu.append(g.means)
            v.append(g.stds**2 if v_as_variance else g.stds)
            gmms.append(g)
            fallback.append(fb)
        kernels.append(SpectralMixture(np.array(w), np.array(mu), np.array(v)))
        details.append({"gmm": gmms, "fallback": fallback})
    return kernels, details


# --- weighting function initialization ---------------------------------------------

@dataclass
class WeightInit:
    model: ChangeSurfaceModel  # simplified model with RBF regimes
    draw_objectives: np.ndarray  # (g, h) NLML of every sampled candidate
    partial_objectives: np.ndarray  # (g,) NLML after the abbreviated optimization
    winner: int
    final_objective: float
    subset: np.ndarray  # grid indices used for screening
    defaults: dict = field(default_factory=dict)


def _rbf_draw(rng, span, var_y):
    ls = span * np.exp(rng.uniform(np.log(0.05), np.log(1.0), size=span.size))
    return Rbf(ls, var_y * float(np.exp(rng.uniform(np.log(0.1), np.log(1.0)))))


def init_weights(data: GridDataset, cfg: InitConfig | None = None, r: int = 2, idx=None) -> WeightInit:
    """Screen ``g`` RKS weighting-function draws under an RBF-regime model.

    Defaults: ``Lambda = (range/2)^2`` per axis, ``sigma0 = std(y)``, noise
    standard deviation ``mean(|y|)/10``.  Each candidate keeps the best of
    ``h`` RBF draws, is optimized for ``partial_iters`` steps, and the best
    candidate is then optimized for ``final_iters`` steps.
    """
    cfg = cfg or InitConfig()
    rng = np.random.default_rng(cfg.seed)
    idx = np.arange(data.n) if idx is None else np.asarray(idx)
    y = data.y[idx]
    std_y = float(np.std(y))
    if std_y == 0:
        raise DegenerateData("responses have zero variance")
    if idx.size > cfg.max_points:
        idx = np.sort(rng.choice(idx, size=cfg.max_points, replace=False))
    span = axis_spans(data)
    lam = (span / 2.0) ** 2
    origin = np.array([0.5 * (a[0] + a[-1]) for a in data.axes])
    noise_var = (float(np.mean(np.abs(y))) / 10.0) ** 2 or 1e-2 * std_y**2
    offset = float(np.mean(data.y[idx]))
    defaults = {"Lambda": lam.tolist(), "sigma0": std_y, "noise_std": float(np.sqrt(noise_var))}

    draws = np.empty((cfg.g, cfg.h))
    partial = np.empty(cfg.g)
    fitted = []
    pcfg = FitConfig(mode="exact", max_iter=cfg.partial_iters, center_y=False)
    for c in range(cfg.g):
        weights = [sample_rks_prior(cfg.m, lam, std_y, rng, origin) for _ in range(r - 1)]
        surface = ChangeSurface(tuple(weights) + (ZeroWeight(data.ndim),))
        best = None
        for j in range(cfg.h):
            kernels = tuple(_rbf_draw(rng, span, std_y**2) for _ in range(r))
            model = ChangeSurfaceModel(surface, kernels, noise_var, offset)
            draws[c, j] = nlml_exact(model, data, idx)
            if best is None or draws[c, j] < draws[c, best[0]]:
                best = (j, model)
        model, rep = fit(best[1], data, pcfg, idx)
        partial[c] = rep.objective
        fitted.append(model)
        log.info("candidate %d: best draw %.3f -> %.3f", c, draws[c].min(), partial[c])
    winner = int(np.argmin(partial))
    final, rep = fit(fitted[winner], data, replace(pcfg, max_iter=cfg.final_iters), idx)
    return WeightInit(final, draws, partial, winner, rep.objective, idx, defaults)


@dataclass
class InitResult:
    model: ChangeSurfaceModel
    weights: WeightInit | None
    sm_details: list

    def report(self) -> str:
        lines = []
        wi = self.weights
        if wi is not None:
            lines.append(f"weight screening on {wi.subset.size} points; defaults {wi.defaults}")
            for c, (row, p) in enumerate(zip(wi.draw_objectives, wi.partial_objectives)):
                mark = " *" if c == wi.winner else ""
                lines.append(f"candidate {c}: best draw NLML {row.min():.4f}, partial {p:.4f}{mark}")
            lines.append(f"winner {wi.winner}: final NLML {wi.final_objective:.4f}")
        for i, det in enumerate(self.sm_details):
            for d, (g, fb) in enumerate(zip(det["gmm"], det["fallback"])):
                comps = ", ".join(f"(phi={p:.3f}, mu={m:.4g}, sigma={s:.4g})"
                                  for p, m, s in zip(g.weights, g.means, g.stds))
                note = " [full-data fallback]" if fb else ""
                lines.append(f"regime {i} dim {d}: {comps}{note}")
        lines.append(f"noise variance {self.model.noise_var:.4g}")
        return "\n".join(lines) + "\n"


def initialize(data: GridDataset, r: int = 2, cfg: InitConfig | None = None, idx=None) -> InitResult:
    """Both initialization stages; returns a spectral-mixture change-surface model.

    With ``r == 1`` the weight stage is skipped and the noise starts at
    ``(mean(|y|)/10)^2``.
    """
    cfg = cfg or InitConfig()
    rng = np.random.default_rng(cfg.seed)
    tr = np.arange(data.n) if idx is None else np.asarray(idx)
    offset = float(np.mean(data.y[tr]))
    if r == 1:
        surface = ChangeSurface((ZeroWeight(data.ndim),))
        std_y = float(np.std(data.y[tr]))
        if std_y == 0:
            raise DegenerateData("responses have zero variance")
        noise = (float(np.mean(np.abs(data.y[tr]))) / 10.0) ** 2 or 1e-2 * std_y**2
        wi = None
    else:
        wi = init_weights(data, replace(cfg, seed=int(rng.integers(2**31))), r, idx)
        surface, noise = wi.model.surface, wi.model.noise_var
    kernels, details = init_sm(data, surface, cfg.Q, int(rng.integers(2**31)), idx, cfg.sort_line,
                               cfg.v_as_variance, cfg.samples_per_line)
    model = ChangeSurfaceModel(surface, tuple(kernels), noise, offset)
    return InitResult(model, wi, details)
