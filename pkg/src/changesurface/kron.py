"""Kronecker-structured matvecs, spectra and preconditioned CG solves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenvalues sorted in descending order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("eigenvalues must be finite")
        if np.any(np.diff(v) > 0):
            raise ValueError("eigenvalues must be sorted in descending order")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_unsorted(cls, values) -> "EigenSpectrum":
        return cls(np.sort(np.asarray(values, float).ravel())[::-1])

    def __len__(self) -> int:
        return self.values.size


def spectrum_values(s) -> np.ndarray:
    return s.values if isinstance(s, EigenSpectrum) else np.asarray(s, float).ravel()


@dataclass(frozen=True)
class KronOperator:
    """``sum_i diag(s_i) (F_i1 x ... x F_iD) diag(s_i) + noise_var I``."""

    terms: tuple  # of (scale vector, tuple of factor matrices)
    noise_var: float = 0.0

    def __post_init__(self):
        terms = tuple((np.asarray(s, float).ravel(), tuple(np.asarray(f, float) for f in fs))
                      for s, fs in self.terms)
        if not terms:
            raise ValueError("operator needs at least one term")
        n = terms[0][0].size
        for s, fs in terms:
            if math.prod(f.shape[0] for f in fs) != n or s.size != n:
                raise DimensionMismatch("every term must act on the same n")
        if self.noise_var < 0:
            raise ValueError("noise variance must be nonnegative")
        object.__setattr__(self, "terms", terms)

    @property
    def n(self) -> int:
        return self.terms[0][0].size

    def diagonal(self) -> np.ndarray:
        """Exact diagonal, used for Jacobi preconditioning."""
        out = np.full(self.n, float(self.noise_var))
        for s, fs in self.terms:
            d = np.ones(1)
            for f in fs:
                d = np.outer(d, np.diag(f)).ravel()
            out += s**2 * d
        return out

    def matvec(self, v) -> np.ndarray:
        return operator_matvec(self, v)


def kron_matvec(factors: Sequence[np.ndarray], v) -> np.ndarray:
    """``(F_1 x ... x F_D) v`` without forming the Kronecker product."""
    v = np.asarray(v, float)
    shape = tuple(f.shape[1] for f in factors)
    if math.prod(shape) != v.size:
        raise DimensionMismatch(f"vector of length {v.size} for factors of shape {shape}")
    x = v.reshape(shape)
    for d, f in enumerate(factors):
        x = np.moveaxis(np.tensordot(f, x, axes=(1, d)), 0, d)
    return x.ravel()


def operator_matvec(op: KronOperator, v) -> np.ndarray:
    v = np.asarray(v, float).ravel()
    if v.size != op.n:
        raise DimensionMismatch(f"vector of length {v.size} for operator of size {op.n}")
    out = op.noise_var * v
    for s, fs in op.terms:
        out = out + s * kron_matvec(fs, s * v)
    return out


class CGResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: bool
    rel_residual: float


def cg_solve(op, rhs, tol: float = 1e-6, max_iter: int = 1000, x0=None,
             precondition: bool = True) -> CGResult:
    """Jacobi-preconditioned conjugate gradients for ``op x = rhs``.

    Stops once ``||op x - rhs|| / ||rhs|| <= tol``.  On hitting ``max_iter``
    the best iterate so far is returned with ``converged=False``.
    ``op`` is a :class:`KronOperator` or any object with ``matvec`` and
    ``diagonal`` methods.
    """
    b = np.asarray(rhs, float).ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0, True, 0.0)
    inv_diag = 1.0 / op.diagonal() if precondition else np.ones_like(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, float)
    r = b - op.matvec(x) if x0 is not None else b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    best_x, best_res = x.copy(), np.linalg.norm(r) / bnorm
    if best_res <= tol:
        return CGResult(x, 0, True, best_res)
    it = 0
    for it in range(1, max_iter + 1):
        ap = op.matvec(p)
        pap = p @ ap
        if pap <= 0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            return CGResult(x, it, True, res)
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(best_x, it, False, best_res)


def kron_eigvals(factors: Sequence[np.ndarray], jitter: float = 0.0) -> EigenSpectrum:
    """All products of factor eigenvalues, clamped at zero, sorted descending.

    ``jitter`` is added to each factor's diagonal relative to its largest
    diagonal entry before the symmetric eigensolve.
    """
    vals = np.ones(1)
    for f in factors:
        f = np.asarray(f, float)
        if jitter:
            f = f + jitter * np.max(np.diag(f)) * np.eye(f.shape[0])
        lam = np.clip(np.linalg.eigvalsh(f), 0.0, None)
        vals = np.outer(vals, lam).ravel()
    return EigenSpectrum(np.sort(vals)[::-1])


def scaled_term_spectrum(s, kern_spectrum) -> EigenSpectrum:
    """Product bound on the spectrum of ``diag(s) K diag(s)``.

    Pairs the l-th largest scale with the l-th largest kernel eigenvalue:
    ``s_(l) * k_(l) * s_(l)``.
    """
    s = np.sort(np.asarray(s, float).ravel())[::-1]
    k = np.sort(spectrum_values(kern_spectrum))[::-1]
    if s.size != k.size:
        raise DimensionMismatch(f"{s.size} scales for a spectrum of length {k.size}")
    return EigenSpectrum(np.sort(s * k * s)[::-1])
