"""Objective/trace data model and the per-run descent certificates.

Every solver in this package emits an :class:`IterateTrace`; the certificate
functions below re-check the inequalities the solver is supposed to maintain
(per-iteration sufficient decrease, bounded displacement, min-gradient decay)
directly from the logged or re-evaluated quantities.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class UsageError(ValueError):
    """Caller violated an API precondition."""


class DataError(ValueError):
    """Input data is malformed or incomplete (non-finite values, missing fields)."""


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to produce a usable result."""


class CapabilityError(UsageError):
    """The objective lacks an oracle this operation requires."""


def as_vector(x, dim: Optional[int] = None, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-D float array, validating dimension if given."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise UsageError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise UsageError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class HolderInfo:
    """Gradient smoothness metadata: ||grad f(x) - grad f(y)|| <= L ||x-y||^nu."""

    nu: float
    L: float

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise UsageError(f"nu must lie in (0, 1], got {self.nu}")
        if not self.L > 0.0:
            raise UsageError(f"L must be positive, got {self.L}")


@dataclass(frozen=True)
class KLInfo:
    """Gradient-dominance metadata: (f(x) - f*)^vartheta <= tau ||grad f(x)||."""

    vartheta: float
    tau: float

    def __post_init__(self):
        if not 0.0 < self.vartheta < 1.0:
            raise UsageError(f"vartheta must lie in (0, 1), got {self.vartheta}")
        if not self.tau > 0.0:
            raise UsageError(f"tau must be positive, got {self.tau}")


@dataclass
class SmoothObjective:
    """Value/gradient oracle with optional Hessian-apply and metadata.

    Oracles must be re-entrant: no hidden mutable state across calls.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess_apply: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    holder: Optional[HolderInfo] = None
    kl: Optional[KLInfo] = None
    fstar: Optional[float] = None
    name: str = "objective"

    def __post_init__(self):
        if self.dim < 1:
            raise UsageError("dimension must be >= 1")

    def value_grad(self, x):
        return self.value(x), self.grad(x)


@dataclass
class CompositeObjective:
    """Smooth part plus a prox-capable nonsmooth part.

    ``nonsmooth`` must expose ``value(x)`` and ``prox(x, gamma, p)``;
    ``weak_convexity`` is the modulus making nonsmooth + (m/2)||.||^2 convex
    (0 means convex).
    """

    smooth: SmoothObjective
    nonsmooth: object
    weak_convexity: float = 0.0
    fstar: Optional[float] = None
    name: str = "composite"

    def __post_init__(self):
        if self.weak_convexity < 0.0:
            raise UsageError("weak-convexity modulus must be >= 0")

    def value(self, x):
        return self.smooth.value(x) + self.nonsmooth.value(x)


@dataclass
class IterateRecord:
    """One solver iteration: objective value, gradient norm, step bookkeeping.

    ``displacement`` is the norm of the step leaving this iterate; it is
    filled when the next iterate is produced and stays NaN on the final
    record.  ``x`` is stored only when the run enables iterate storage.
    """

    k: int
    f: float
    grad_norm: float
    step: float = math.nan
    inner_count: int = 0
    displacement: float = math.nan
    x: Optional[np.ndarray] = None


TRACE_COLUMNS = ("k", "f", "grad_norm", "step", "inner_count", "displacement")


@dataclass
class IterateTrace:
    """Ordered iteration log plus the constants certified for the run."""

    records: list[IterateRecord] = field(default_factory=list)
    seed: Optional[int] = None
    config_digest: str = ""
    solver_id: str = ""
    rho: float = math.nan
    theta: float = math.nan
    guaranteed: bool = True
    extras: dict = field(default_factory=dict)

    def validate(self):
        if not (self.rho > 0.0):
            raise UsageError(f"trace rho must be positive, got {self.rho}")
        if not (self.theta > 1.0):
            raise UsageError(f"trace theta must exceed 1, got {self.theta}")
        last = -1
        for rec in self.records:
            if rec.k <= last:
                raise DataError("iteration indices must be strictly increasing")
            last = rec.k
            if not math.isfinite(rec.f):
                raise DataError(f"non-finite objective value at k={rec.k}")
            if not rec.grad_norm >= 0.0:
                raise DataError(f"negative gradient norm at k={rec.k}")
            if rec.inner_count < 0:
                raise DataError(f"negative inner count at k={rec.k}")
        return self

    def __len__(self):
        return len(self.records)

    def f_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records], dtype=float)

    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm for r in self.records], dtype=float)

    def steps(self) -> np.ndarray:
        return np.array([r.step for r in self.records], dtype=float)

    def inner_counts(self) -> np.ndarray:
        return np.array([r.inner_count for r in self.records], dtype=int)

    def displacements(self) -> np.ndarray:
        return np.array([r.displacement for r in self.records], dtype=float)

    def iterates(self) -> Optional[np.ndarray]:
        if any(r.x is None for r in self.records):
            return None
        return np.stack([r.x for r in self.records])

    def to_csv(self, path):
        """Write the exact column layout k,f,grad_norm,step,inner_count,displacement."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for rec in self.records:
                writer.writerow([
                    rec.k,
                    _fmt(rec.f),
                    _fmt(rec.grad_norm),
                    _fmt(rec.step),
                    rec.inner_count,
                    _fmt(rec.displacement),
                ])

    @classmethod
    def from_csv(cls, path, **meta) -> "IterateTrace":
        records = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != TRACE_COLUMNS:
                raise DataError(f"trace CSV must start with header {','.join(TRACE_COLUMNS)}")
            for row in reader:
                if len(row) != len(TRACE_COLUMNS):
                    raise DataError(f"malformed trace row: {row!r}")
                records.append(IterateRecord(
                    k=int(row[0]),
                    f=_parse(row[1]),
                    grad_norm=_parse(row[2]),
                    step=_parse(row[3]),
                    inner_count=int(row[4]),
                    displacement=_parse(row[5]),
                ))
        return cls(records=records, **meta)


def _fmt(v: float) -> str:
    return "" if (v is None or math.isnan(v)) else repr(float(v))


def _parse(s: str) -> float:
    return math.nan if s == "" else float(s)


def config_digest(config: dict) -> str:
    """Stable short identifier of a run configuration."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class CertificateReport:
    """Outcome of one per-trace inequality check."""

    name: str
    passed: bool
    n_checked: int
    worst_violation: float = -math.inf
    worst_index: int = -1
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "n_checked": self.n_checked,
            "worst_violation": self.worst_violation,
            "worst_index": self.worst_index,
            "details": self.details,
        }


def certify_descent(trace: IterateTrace, rho: float, theta: float,
                    rel_tol: float = 1e-10) -> CertificateReport:
    """Check f(x^{k+1}) <= f(x^k) - rho ||grad f(x^k)||^theta on every pair.

    A pair passes when the signed violation
    ``f[k+1] - f[k] + rho * g[k]**theta`` stays below
    ``rel_tol * max(1, |f[k]|)``.  Reports the worst violation and where it
    occurred.
    """
    if rho <= 0.0 or theta <= 1.0:
        raise UsageError("certify_descent needs rho > 0 and theta > 1")
    if rel_tol < 0.0:
        raise UsageError("rel_tol must be nonnegative")
    f, g = _finite_series(trace)
    worst = -math.inf
    worst_k = -1
    passed = True
    for k in range(len(f) - 1):
        viol = f[k + 1] - f[k] + rho * g[k] ** theta
        slack = rel_tol * max(1.0, abs(f[k]))
        if viol > slack:
            passed = False
        if viol > worst:
            worst, worst_k = viol, k
    return CertificateReport(
        name="descent",
        passed=passed,
        n_checked=max(len(f) - 1, 0),
        worst_violation=worst,
        worst_index=worst_k,
        details={"rho": rho, "theta": theta, "rel_tol": rel_tol},
    )


def certify_displacement(trace: IterateTrace, c: float, theta: float,
                         rel_tol: float = 1e-10) -> CertificateReport:
    """Check ||x^{k+1} - x^k|| <= c ||grad f(x^k)||^(theta-1) at each recorded step.

    The slack is rel_tol * max(1, bound): once steps shrink below the
    floating-point resolution of the iterates, the measured displacement is
    pure rounding noise at x-scale, so a purely multiplicative slack would
    reject runs that converged too well.
    """
    if c <= 0.0 or theta <= 1.0:
        raise UsageError("certify_displacement needs c > 0 and theta > 1")
    _finite_series(trace)
    disp = trace.displacements()
    g = trace.grad_norms()
    have = np.isfinite(disp)
    if not have.any():
        raise DataError("trace stores no displacements")
    worst = -math.inf
    worst_k = -1
    passed = True
    for k in np.flatnonzero(have):
        bound = c * g[k] ** (theta - 1.0)
        viol = disp[k] - (bound + rel_tol * max(1.0, bound))
        if viol > 0.0:
            passed = False
        if viol > worst:
            worst, worst_k = viol, int(k)
    return CertificateReport(
        name="displacement",
        passed=passed,
        n_checked=int(have.sum()),
        worst_violation=worst,
        worst_index=worst_k,
        details={"c": c, "theta": theta, "rel_tol": rel_tol},
    )


def min_grad_bound_check(trace: IterateTrace, rho: float, theta: float,
                         fstar: float) -> CertificateReport:
    """Check min_{k<N} ||grad f(x^k)|| <= ((f(x^0)-f*)/(rho N))^(1/theta) for every N.

    The bound follows from summing the descent inequality, so equality is
    attainable (one-step exact minimization); a 1e-12 relative guard absorbs
    round-off in that case.
    """
    if rho <= 0.0 or theta <= 1.0:
        raise UsageError("min_grad_bound_check needs rho > 0 and theta > 1")
    f, g = _finite_series(trace)
    if not math.isfinite(fstar):
        raise UsageError("fstar must be finite")
    if fstar > f.min() + 1e-12 * max(1.0, abs(fstar)):
        raise UsageError("fstar exceeds the smallest recorded objective value")
    gap0 = max(f[0] - fstar, 0.0)
    running = math.inf
    worst = -math.inf
    worst_n = -1
    passed = True
    for n in range(1, len(f) + 1):
        running = min(running, g[n - 1])
        bound = (gap0 / (rho * n)) ** (1.0 / theta)
        viol = running - bound * (1.0 + 1e-12)
        if viol > 0.0:
            passed = False
        if viol > worst:
            worst, worst_n = viol, n
    return CertificateReport(
        name="min_grad_bound",
        passed=passed,
        n_checked=len(f),
        worst_violation=worst,
        worst_index=worst_n,
        details={"rho": rho, "theta": theta, "fstar": fstar},
    )


def reevaluate_trace(trace: IterateTrace,
                     value: Callable[[np.ndarray], float],
                     grad: Callable[[np.ndarray], np.ndarray]) -> IterateTrace:
    """Rebuild f/grad_norm/displacement from stored iterates.

    Certificates should not have to trust solver-logged numbers; when the run
    stored its iterates this recomputes every logged quantity through the
    supplied oracles (for envelope solvers, pass the envelope value/gradient).
    """
    X = trace.iterates()
    if X is None:
        raise DataError("trace does not store iterates; rerun with storage enabled")
    records = []
    for i, rec in enumerate(trace.records):
        x = X[i]
        gnorm = float(np.linalg.norm(grad(x)))
        disp = float(np.linalg.norm(X[i + 1] - x)) if i + 1 < len(X) else math.nan
        records.append(IterateRecord(
            k=rec.k,
            f=float(value(x)),
            grad_norm=gnorm,
            step=rec.step,
            inner_count=rec.inner_count,
            displacement=disp,
            x=x,
        ))
    return IterateTrace(
        records=records,
        seed=trace.seed,
        config_digest=trace.config_digest,
        solver_id=trace.solver_id,
        rho=trace.rho,
        theta=trace.theta,
        guaranteed=trace.guaranteed,
        extras=dict(trace.extras, reevaluated=True),
    )


def _finite_series(trace: IterateTrace):
    if len(trace) == 0:
        raise UsageError("trace is empty")
    f = trace.f_values()
    g = trace.grad_norms()
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise DataError("trace contains non-finite objective values or gradient norms")
    return f, g
