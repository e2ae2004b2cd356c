"""Independent brute-force oracles: finite differences, scalar and small-grid
minimization, and iterative spectral constants.

These are deliberately kept separate from the closed-form implementations they
validate; tests compare the two routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import DataError, NumericalError, UsageError

_CBRT_EPS = float(np.finfo(float).eps) ** (1.0 / 3.0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OracleConfig:
    fd_step_scale: float = _CBRT_EPS
    grid_points: int = 201
    golden_tol: float = 1e-10
    tie_tol: float = 1e-8
    multi_start: int = 5
    spectral_tol: float = 1e-10
    spectral_max_iter: int = 100000

    def __post_init__(self):
        if min(self.fd_step_scale, self.golden_tol, self.tie_tol, self.spectral_tol) <= 0:
            raise UsageError("oracle tolerances must be positive")
        if self.grid_points < 5 or self.spectral_max_iter < 1:
            raise UsageError("oracle iteration/grid caps must be sensible")


DEFAULT_CONFIG = OracleConfig()


def finite_diff_gradient(value: Callable[[np.ndarray], float], x,
                         config: OracleConfig = DEFAULT_CONFIG,
                         return_kink_mask: bool = False):
    """Central-difference gradient with per-coordinate scaled steps.

    With ``return_kink_mask=True`` also returns a boolean mask of coordinates
    where the one-sided slopes disagree badly (a kink: the central estimate is
    meaningless there and callers should skip the probe).
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    kink = np.zeros(x.shape, dtype=bool)
    f0 = None
    for i in range(x.size):
        h = config.fd_step_scale * (1.0 + abs(x[i]))
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        fp, fm = value(xp), value(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise DataError(f"non-finite probe at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
        if return_kink_mask:
            if f0 is None:
                f0 = value(x)
            fwd = (fp - f0) / h
            bwd = (f0 - fm) / h
            kink[i] = abs(fwd - bwd) > 1e-2 * (1.0 + abs(grad[i]))
    if return_kink_mask:
        return grad, kink
    return grad


@dataclass
class ScalarMinResult:
    argmin: float
    minval: float
    candidates: list  # (argmin, value) per near-optimal basin

    @property
    def multi_valued(self) -> bool:
        return len(self.candidates) > 1


def scalar_minimize(g: Callable[[float], float], bracket,
                    config: OracleConfig = DEFAULT_CONFIG) -> ScalarMinResult:
    """Grid pre-scan plus golden-section refinement of a 1-D function.

    Refines the best ``config.multi_start`` grid basins; basins whose refined
    value ties the global best within ``tie_tol`` are reported as candidates
    so callers can detect multi-valued minimizers.
    """
    lo, hi = float(min(bracket)), float(max(bracket))
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise UsageError(f"invalid bracket {bracket}")
    ts = np.linspace(lo, hi, config.grid_points)
    vals = np.array([g(t) for t in ts], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DataError("non-finite values on scalar grid")
    if vals[0] < vals[1] and vals[-1] < vals[-2]:
        raise DataError("function decreases at both bracket ends; unbounded below?")
    # local grid minima (ties kept), best few refined independently
    basins = [i for i in range(len(ts))
              if (i == 0 or vals[i] <= vals[i - 1]) and (i == len(ts) - 1 or vals[i] <= vals[i + 1])]
    basins.sort(key=lambda i: vals[i])
    refined = []
    for i in basins[:config.multi_start]:
        a = ts[max(i - 1, 0)]
        b = ts[min(i + 1, len(ts) - 1)]
        u, v = _golden_section(g, a, b, config.golden_tol)
        u, v = _parabolic_polish(g, u, v, lo, hi)
        if vals[i] < v:
            # refinement assumes the cell is unimodal; a discontinuous g can
            # defeat it, in which case the scanned grid point stands
            u, v = ts[i], vals[i]
        refined.append((u, v))
    best_u, best_v = min(refined, key=lambda uv: uv[1])
    tie = config.tie_tol * max(1.0, abs(best_v))
    candidates = []
    for u, v in sorted(refined, key=lambda uv: uv[1]):
        if v - best_v <= tie and all(abs(u - c) > 1e-6 * (1.0 + abs(u)) for c, _ in candidates):
            candidates.append((u, v))
    return ScalarMinResult(argmin=best_u, minval=best_v, candidates=candidates)


def _golden_section(g, a, b, tol):
    tol_abs = tol * (1.0 + abs(a) + abs(b))
    h = b - a
    c = b - _GOLDEN * h
    d = a + _GOLDEN * h
    gc, gd = g(c), g(d)
    while h > tol_abs:
        if gc < gd:
            b, d, gd = d, c, gc
            h = b - a
            c = b - _GOLDEN * h
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            h = b - a
            d = a + _GOLDEN * h
            gd = g(d)
    u = c if gc < gd else d
    return u, g(u)


def _parabolic_polish(g, u, gu, lo, hi):
    """Sharpen a golden-section argmin past the value-comparison noise floor.

    Golden section alone cannot resolve a smooth argmin below roughly
    sqrt(machine eps); two guarded parabolic-vertex steps recover ~1e-9.
    A kinked minimum rejects the polish (the vertex strictly worsens g).
    """
    scale = 1.0 + abs(u)
    for delta in (1e-4 * scale, 1e-6 * scale):
        um, up = u - delta, u + delta
        if um < lo or up > hi:
            continue
        gm, gp = g(um), g(up)
        denom = gm - 2.0 * gu + gp
        if not (math.isfinite(denom) and denom > 0.0):
            continue
        step = 0.5 * delta * (gm - gp) / denom
        step = max(min(step, delta), -delta)
        cand = u + step
        gc = g(cand)
        if gc <= gu + 1e-12 * (1.0 + abs(gu)):
            u, gu = cand, gc
    return u, gu


@dataclass(frozen=True)
class SpectralConstants:
    opnorm: float
    sigma_min: float


def spectral_constants(A, config: OracleConfig = DEFAULT_CONFIG,
                       method: str = "auto") -> SpectralConstants:
    """Largest/smallest singular values of a full-column-rank matrix.

    ``opnorm`` comes from power iteration on A^T A.  ``sigma_min`` uses exact
    SVD when min(m, n) <= 64, otherwise inverse iteration through a Cholesky
    factor of A^T A.  ``method`` forces one route ("svd" or "iterative").
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or not np.all(np.isfinite(A)):
        raise DataError("A must be a finite 2-D matrix")
    if method not in ("auto", "svd", "iterative"):
        raise UsageError(f"unknown method {method!r}")
    if method == "svd":
        s = np.linalg.svd(A, compute_uv=False)
        return SpectralConstants(opnorm=float(s[0]), sigma_min=float(s[-1]))
    B = A.T @ A if A.shape[0] >= A.shape[1] else A @ A.T
    lam_max = _power_iteration(B, config)
    if method == "auto" and min(A.shape) <= 64:
        s = np.linalg.svd(A, compute_uv=False)
        sig_min = float(s[-1])
    else:
        sig_min = math.sqrt(max(_inverse_iteration(B, config), 0.0))
    return SpectralConstants(opnorm=math.sqrt(lam_max), sigma_min=sig_min)


def _power_iteration(B, config):
    rng = np.random.default_rng(0)
    v = rng.standard_normal(B.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(config.spectral_max_iter):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (B @ v))
        if abs(lam_new - lam) <= config.spectral_tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    raise NumericalError("power iteration did not converge")


def _inverse_iteration(B, config):
    try:
        Lc = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Gram matrix is not positive definite (rank deficient?)") from exc
    rng = np.random.default_rng(1)
    v = rng.standard_normal(B.shape[0])
    v /= np.linalg.norm(v)
    lam = math.inf
    for _ in range(config.spectral_max_iter):
        w = _cho_solve(Lc, v)
        v = w / np.linalg.norm(w)
        lam_new = float(v @ (B @ v))
        if abs(lam_new - lam) <= config.spectral_tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    raise NumericalError("inverse iteration did not converge")


def _cho_solve(Lc, b):
    y = np.linalg.solve(Lc, b)
    return np.linalg.solve(Lc.T, y)


def estimate_holder_constant(grad: Callable[[np.ndarray], np.ndarray], dim: int,
                             nu: float = 1.0, n_pairs: int = 200, seed: int = 0,
                             box: float = 5.0, safety: float = 1.5) -> float:
    """Sampled bound on ||grad(x) - grad(y)|| / ||x - y||^nu over a box.

    The safety factor over-estimates on purpose: a too-large constant only
    shortens steps, while a too-small one invalidates descent guarantees.
    """
    if not 0.0 < nu <= 1.0:
        raise UsageError("nu must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        x = rng.uniform(-box, box, dim)
        y = rng.uniform(-box, box, dim)
        d = float(np.linalg.norm(x - y))
        if d == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(grad(x) - grad(y))) / d ** nu)
    if worst == 0.0:
        raise NumericalError("gradient appears constant on the sample box")
    return safety * worst


def grid_minimize_nd(f: Callable[[np.ndarray], float], bounds: Sequence,
                     points_per_axis: int = 21, levels: int = 8):
    """Coarse-to-fine grid minimization for n <= 3 (oracle-scale only)."""
    bounds = [tuple(map(float, b)) for b in bounds]
    n = len(bounds)
    if n > 3:
        raise UsageError("grid oracle is limited to n <= 3")
    best_x, best_v = None, math.inf
    for _ in range(levels):
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([f(p) for p in pts])
        i = int(np.argmin(vals))
        best_x, best_v = pts[i], float(vals[i])
        spans = [(hi - lo) / (points_per_axis - 1) for lo, hi in bounds]
        bounds = [(best_x[j] - spans[j], best_x[j] + spans[j]) for j in range(n)]
    return best_x, best_v
