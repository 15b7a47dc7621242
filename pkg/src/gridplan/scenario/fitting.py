"""Least-squares fitting, parameter covariance and prediction intervals."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np
from scipy import stats

from .models import ModelKind, eval_model, get_kind, param_jacobian

log = logging.getLogger(__name__)


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 200
    grad_tol: float = 1e-8
    rank_rtol: float = 1e-10  # singular values below rtol * s_max count as zero


@dataclass(frozen=True)
class FittedModel:
    kind: str
    params: np.ndarray
    cov_p: np.ndarray
    mse: float
    n_samples: int
    converged: bool = True
    rank_deficient: bool = False
    iterations: int = 0
    grad_norm: float = 0.0

    @property
    def arity(self) -> int:
        return get_kind(self.kind).arity

    @property
    def dof(self) -> int:
        return self.n_samples - self.arity

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov_p), 0.0))

    def predict(self, inputs: Mapping[str, Any]):
        return eval_model(self.kind, self.params, inputs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": [float(v) for v in self.params],
            "cov_p": [float(v) for v in np.asarray(self.cov_p).ravel()],
            "mse": float(self.mse),
            "n_samples": int(self.n_samples),
            "converged": bool(self.converged),
            "rank_deficient": bool(self.rank_deficient),
            "iterations": int(self.iterations),
            "grad_norm": float(self.grad_norm),
            "std_errors": [float(v) for v in self.std_errors],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FittedModel":
        k = get_kind(d["kind"])
        p = np.asarray(d["params"], dtype=float)
        cov = np.asarray(d["cov_p"], dtype=float)
        if p.size != k.arity or cov.size != k.arity ** 2:
            raise FitError(f"{k.name}: stored parameter/covariance sizes do not match arity {k.arity}")
        return cls(k.name, p, cov.reshape(k.arity, k.arity), float(d["mse"]), int(d["n_samples"]),
                   bool(d.get("converged", True)), bool(d.get("rank_deficient", False)),
                   int(d.get("iterations", 0)), float(d.get("grad_norm", 0.0)))

    @classmethod
    def exact(cls, kind: str, params, n_samples: int = 10**6) -> "FittedModel":
        """A model with no parameter or residual uncertainty."""
        k = get_kind(kind)
        p = np.asarray(params, dtype=float)
        return cls(k.name, p, np.zeros((k.arity, k.arity)), 0.0, n_samples)


def scaled_gradient(J: np.ndarray, r: np.ndarray, y: np.ndarray) -> float:
    """||J^T r|| relative to ||J||_F ||y|| (floored at 1)."""
    g = J.T @ r
    return float(np.linalg.norm(g) / max(1.0, np.linalg.norm(J) * np.linalg.norm(y)))


def _covariance(J: np.ndarray, mse: float, rtol: float) -> tuple[np.ndarray, bool]:
    _, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((J.shape[1], J.shape[1])), True
    keep = s > rtol * s[0]
    deficient = bool((~keep).any()) or s.size < J.shape[1]
    inv = np.where(keep, 1.0 / np.where(keep, s, 1.0) ** 2, 0.0)
    cov = (Vt.T * inv) @ Vt * mse
    return 0.5 * (cov + cov.T), deficient


def fit_model(kind: str | ModelKind, inputs: Mapping[str, Any], y, init,
              options: Optional[FitOptions] = None) -> FittedModel:
    """Minimize the sum of squared residuals by damped Gauss-Newton (Levenberg-Marquardt).

    The Jacobian uses central differences with step 1e-6*max(1, |p|).
    """
    k = get_kind(kind)
    opts = options or FitOptions()
    y = np.asarray(y, dtype=float).ravel()
    N = y.size
    p = np.asarray(init, dtype=float).copy()
    if p.shape != (k.arity,):
        raise FitError(f"{k.name}: initial guess has {p.size} values, expected {k.arity}")
    if N <= k.arity:
        raise FitError(f"{k.name}: insufficient data ({N} samples for {k.arity} parameters)")
    x = {v: np.broadcast_to(np.asarray(inputs[v], dtype=float), y.shape) for v in k.inputs
         if v in inputs}
    if len(x) != len(k.inputs):
        missing = [v for v in k.inputs if v not in inputs][0]
        raise FitError(f"{k.name}: missing input {missing!r}")

    def resid(q):
        return np.asarray(eval_model(k, q, x), dtype=float).ravel() - y

    r = resid(p)
    if not np.all(np.isfinite(r)):
        raise FitError(f"{k.name}: model is not finite at the initial guess")
    ssr = float(r @ r)
    J = param_jacobian(k, p, x)
    mu = 1e-3
    it = 0
    converged = False
    for it in range(1, opts.max_iter + 1):
        gnorm = scaled_gradient(J, r, y)
        d2 = np.sum(J * J, axis=0)
        D = np.sqrt(np.maximum(d2, 1e-300))
        improved = False
        for _ in range(40):
            A = np.vstack([J, np.diag(np.sqrt(mu) * D)])
            rhs = np.concatenate([-r, np.zeros(k.arity)])
            step = np.linalg.lstsq(A, rhs, rcond=None)[0]
            q = p + step
            rq = resid(q)
            sq = float(rq @ rq) if np.all(np.isfinite(rq)) else math.inf
            if sq <= ssr:
                improved = True
                break
            mu *= 10.0
        if not improved:
            # no decrease possible at machine precision
            converged = gnorm <= opts.grad_tol
            break
        p, r, ssr = q, rq, sq
        mu = max(mu * 0.3, 1e-12)
        J = param_jacobian(k, p, x)
        small_step = float(np.max(np.abs(step) / np.maximum(1.0, np.abs(p)))) <= 1e-10
        if ssr == 0.0 or (small_step and scaled_gradient(J, r, y) <= opts.grad_tol):
            converged = True
            break
    gfinal = scaled_gradient(J, r, y)
    converged = converged or gfinal <= opts.grad_tol
    if not converged:
        log.warning("%s: fit did not converge in %d iterations (scaled gradient %.3g)", k.name, it, gfinal)
    mse = ssr / (N - k.arity)
    cov, deficient = _covariance(J, mse, opts.rank_rtol)
    if deficient:
        log.warning("%s: J^T J is singular; covariance uses the pseudo-inverse", k.name)
    return FittedModel(k.name, p, cov, mse, N, converged, deficient, it, gfinal)


def propagate_uncertainty(m: FittedModel, inputs: Mapping[str, Any]):
    """First-order output variance J cov_p J^T at the given inputs."""
    J = param_jacobian(m.kind, m.params, inputs)
    v = np.einsum("ij,jk,ik->i", J, m.cov_p, J)
    v = np.maximum(v, 0.0)
    return float(v[0]) if v.size == 1 else v


@dataclass(frozen=True)
class PredictionBand:
    mean: float
    variance: float
    lam: float
    lo: float
    hi: float

    @property
    def half_width(self) -> float:
        return self.hi - self.mean


def t_quantile(confidence: float, dof: float) -> float:
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    if dof <= 0:
        raise FitError("degrees of freedom must be positive")
    return float(stats.t.ppf(0.5 + confidence / 2.0, dof))


def prediction_band(m: FittedModel, inputs: Mapping[str, Any], confidence: float = 0.95) -> PredictionBand:
    lam = t_quantile(confidence, m.dof)
    mean = float(m.predict(inputs))
    var = float(propagate_uncertainty(m, inputs)) + m.mse
    w = lam * math.sqrt(var)
    return PredictionBand(mean, var, lam, mean - w, mean + w)
